//! Keep/drop decisions over the samples of a stream.

use std::io::{Read, Write};

use crate::error::{dimension, domain, Error, Result};

/// Boolean keep/drop decision per sample index, with its exact kept count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMask {
    keep: Vec<bool>,
    n: usize,
}

impl SampleMask {
    pub fn from_keep(keep: Vec<bool>) -> Self {
        let n = keep.iter().filter(|k| **k).count();
        Self { keep, n }
    }

    pub fn empty(len: usize) -> Self {
        Self {
            keep: vec![false; len],
            n: 0,
        }
    }

    pub fn full(len: usize) -> Self {
        Self {
            keep: vec![true; len],
            n: len,
        }
    }

    /// Mask of length `len` keeping exactly the given indices.
    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut keep = vec![false; len];
        for i in indices {
            if i >= len {
                return Err(domain(format!("index {i} out of range for length {len}")));
            }
            keep[i] = true;
        }
        Ok(Self::from_keep(keep))
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    /// Number of kept samples.
    pub fn kept(&self) -> usize {
        self.n
    }

    pub fn keeps(&self, i: usize) -> bool {
        self.keep[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.keep
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.keep
            .iter()
            .enumerate()
            .filter_map(|(i, k)| k.then_some(i))
    }

    pub fn rate(&self) -> f64 {
        if self.keep.is_empty() {
            0.0
        } else {
            self.n as f64 / self.keep.len() as f64
        }
    }

    /// Forces the kept count to exactly `n`: extras are dropped from the
    /// highest index down, shortfalls are filled from the lowest unkept index up.
    pub fn trim_or_pad(&mut self, n: usize) -> Result<()> {
        if n > self.keep.len() {
            return Err(domain(format!(
                "cannot keep {n} of {} samples",
                self.keep.len()
            )));
        }
        let mut i = self.keep.len();
        while self.n > n {
            i -= 1;
            if self.keep[i] {
                self.keep[i] = false;
                self.n -= 1;
            }
        }
        let mut i = 0;
        while self.n < n {
            if !self.keep[i] {
                self.keep[i] = true;
                self.n += 1;
            }
            i += 1;
        }
        Ok(())
    }

    /// Little-endian `u32 N`, `u32 n`, then `N` bits packed LSB-first.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let len = u32::try_from(self.keep.len()).map_err(|_| domain("mask too long"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        let mut bytes = vec![0u8; self.keep.len().div_ceil(8)];
        for i in self.indices() {
            bytes[i / 8] |= 1 << (i % 8);
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let len = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        let mut bytes = vec![0u8; len.div_ceil(8)];
        r.read_exact(&mut bytes)?;
        let keep: Vec<bool> = (0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect();
        let mask = Self::from_keep(keep);
        if mask.n != n {
            return Err(Error::Format(format!(
                "mask header says {n} kept, bits say {}",
                mask.n
            )));
        }
        Ok(mask)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if self.keep.len() != len {
            return Err(dimension(format!(
                "mask has {} entries, stream has {len}",
                self.keep.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trim_drops_high_and_pad_fills_low() {
        let mut m = SampleMask::from_indices(6, [1, 3, 5]).unwrap();
        m.trim_or_pad(2).unwrap();
        assert_eq!(m.indices().collect::<Vec<_>>(), vec![1, 3]);
        m.trim_or_pad(4).unwrap();
        assert_eq!(m.indices().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(m.trim_or_pad(7).is_err());
    }

    #[test]
    fn packed_layout() {
        let m = SampleMask::from_indices(10, [0, 9]).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(buf, [10, 0, 0, 0, 2, 0, 0, 0, 0b0000_0001, 0b0000_0010]);
    }

    #[test]
    fn corrupt_count_is_rejected() {
        let buf = [3u8, 0, 0, 0, 2, 0, 0, 0, 0b001];
        assert!(matches!(
            SampleMask::read_from(&buf[..]),
            Err(Error::Format(_))
        ));
    }

    proptest! {
        #[test]
        fn serialization_round_trips(keep in proptest::collection::vec(any::<bool>(), 0..200)) {
            let m = SampleMask::from_keep(keep);
            let mut buf = Vec::new();
            m.write_to(&mut buf).unwrap();
            prop_assert_eq!(SampleMask::read_from(&buf[..]).unwrap(), m);
        }
    }
}
