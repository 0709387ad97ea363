//! Image → scan → sampler → reconstruction, at a target samplerate.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{level_crossing_at_rate, mar_mask, random_mask, uniform_mask, DEFAULT_MAR_RHO};
use crate::error::{domain, Error, Result};
use crate::image::Image;
use crate::mask::SampleMask;
use crate::reconstruct::{nearest_fill, zero_fill, SparseImage};
use crate::sauce::{apply_mask, heatmap, select, SamplerParams, Selection, VarianceMode};
use crate::scanner::{scan, SampleStream, ScanConfig};
use crate::twostage::{two_stage_sample, TwoStageConfig};

/// Number of samples kept at rate `r` out of `total`: `round(r·N)`, at least 1.
pub fn budget(rate: f64, total: usize) -> Result<usize> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(domain(format!("samplerate must be in (0, 1], got {rate}")));
    }
    Ok(((rate * total as f64).round() as usize).clamp(1, total))
}

/// The samplers that can be compared on one samplerate axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Sauce {
        params: SamplerParams,
        variance: VarianceMode,
        selection: Selection,
    },
    Uniform,
    Random,
    LevelCrossing,
    Mar {
        rho: f64,
    },
    TwoStage {
        factor: usize,
        params: SamplerParams,
        reuse_first_pass: bool,
    },
}

impl Sampler {
    pub fn sauce(params: SamplerParams) -> Self {
        Self::Sauce {
            params,
            variance: VarianceMode::TwoPass,
            selection: Selection::TopK,
        }
    }

    pub fn two_stage(factor: usize, params: SamplerParams) -> Self {
        Self::TwoStage {
            factor,
            params,
            reuse_first_pass: true,
        }
    }

    /// Parses a sampler name (`sauce`, `uniform`, `random`, `lc`, `mar`,
    /// `mar:rho=0.3`, `twostage`, `twostage:f=3`), filling in SAUCE weights from `params`.
    pub fn parse(name: &str, params: SamplerParams) -> Result<Self> {
        let (kind, arg) = match name.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (name, None),
        };
        let value = |key: &str| -> Result<Option<f64>> {
            match arg {
                None => Ok(None),
                Some(a) => {
                    let v = a
                        .strip_prefix(key)
                        .and_then(|rest| rest.strip_prefix('='))
                        .ok_or_else(|| domain(format!("expected `{key}=<value>` in `{name}`")))?;
                    v.parse::<f64>()
                        .map(Some)
                        .map_err(|_| domain(format!("bad number in `{name}`")))
                }
            }
        };
        match kind {
            "sauce" => Ok(Self::sauce(params)),
            "uniform" => Ok(Self::Uniform),
            "random" => Ok(Self::Random),
            "lc" => Ok(Self::LevelCrossing),
            "mar" => Ok(Self::Mar {
                rho: value("rho")?.unwrap_or(DEFAULT_MAR_RHO),
            }),
            "twostage" => {
                let f = value("f")?.unwrap_or(2.0);
                if f.fract() != 0.0 || f < 2.0 {
                    return Err(domain(format!("two-stage factor must be an integer >= 2, got {f}")));
                }
                Ok(Self::two_stage(f as usize, params))
            }
            _ => Err(domain(format!("unknown sampler `{name}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Sauce { .. } => "sauce".into(),
            Self::Uniform => "uniform".into(),
            Self::Random => "random".into(),
            Self::LevelCrossing => "lc".into(),
            Self::Mar { rho } if *rho == DEFAULT_MAR_RHO => "mar".into(),
            Self::Mar { rho } => format!("mar:rho={rho}"),
            Self::TwoStage { factor, .. } => format!("twostage:f={factor}"),
        }
    }

    pub fn with_params(&self, params: SamplerParams) -> Self {
        match self.clone() {
            Self::Sauce {
                variance,
                selection,
                ..
            } => Self::Sauce {
                params,
                variance,
                selection,
            },
            Self::TwoStage {
                factor,
                reuse_first_pass,
                ..
            } => Self::TwoStage {
                factor,
                params,
                reuse_first_pass,
            },
            other => other,
        }
    }

    /// Mask over an already-scanned stream keeping `n` samples.
    ///
    /// Two-stage sampling needs the source image and is rejected here.
    pub fn mask(&self, stream: &SampleStream, n: usize, seed: u64) -> Result<SampleMask> {
        let total = stream.len();
        match self {
            Self::Sauce {
                params,
                variance,
                selection,
            } => {
                let h = heatmap(stream, params, *variance)?;
                select(&h, n, *selection, &mut ChaCha8Rng::seed_from_u64(seed))
            }
            Self::Uniform => uniform_mask(total, n),
            Self::Random => random_mask(total, n, seed),
            Self::LevelCrossing => Ok(level_crossing_at_rate(stream, n)?.mask),
            Self::Mar { rho } => mar_mask(stream, n, *rho, seed),
            Self::TwoStage { .. } => Err(domain(
                "two-stage sampling scans the source image; use sample_image",
            )),
        }
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// How unsampled pixels are filled before the task sees the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fill {
    #[default]
    Nearest,
    Zero,
}

impl FromStr for Fill {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "zero" => Ok(Self::Zero),
            _ => Err(domain(format!("unknown fill `{s}`"))),
        }
    }
}

impl Fill {
    pub fn apply(self, sparse: &SparseImage) -> Result<Image> {
        match self {
            Self::Nearest => nearest_fill(sparse),
            Self::Zero => zero_fill(sparse),
        }
    }
}

/// A sampler at a fixed samplerate with a fill rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub sampler: Sampler,
    pub rate: f64,
    pub fill: Fill,
    pub seed: u64,
}

/// Output of running one image through a [`Pipeline`].
#[derive(Debug, Clone)]
pub struct Sampled {
    pub image: Image,
    pub mask: SampleMask,
    /// Samples actually measured over the full-resolution sample count,
    /// counting both passes for two-stage sampling.
    pub achieved_rate: f64,
}

impl Pipeline {
    pub fn new(sampler: Sampler, rate: f64) -> Self {
        Self {
            sampler,
            rate,
            fill: Fill::Nearest,
            seed: 0,
        }
    }

    /// Runs the pipeline on one image; `salt` decorrelates seeded samplers across images.
    pub fn run(&self, image: &Image, salt: u64) -> Result<Sampled> {
        sample_image(image, &self.sampler, self.rate, self.fill, mix_seed(self.seed, salt))
    }
}

/// Combines a run seed with a per-item salt (splitmix64 finalizer).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scans `image` with a one-pixel footprint, keeps samples per `sampler` at
/// `rate`, and fills the rest.
pub fn sample_image(
    image: &Image,
    sampler: &Sampler,
    rate: f64,
    fill: Fill,
    seed: u64,
) -> Result<Sampled> {
    let total = image.len();
    let n = budget(rate, total)?;
    if n == total {
        return Ok(Sampled {
            image: image.clone(),
            mask: SampleMask::full(total),
            achieved_rate: 1.0,
        });
    }
    if let Sampler::TwoStage {
        factor,
        params,
        reuse_first_pass,
    } = sampler
    {
        let low = crate::twostage::low_res_count(image.width(), image.height(), *factor);
        let config = TwoStageConfig {
            factor: *factor,
            second_pass_budget: n.saturating_sub(low),
            params: *params,
            reuse_first_pass: *reuse_first_pass,
        };
        let out = two_stage_sample(image, &config)?;
        return Ok(Sampled {
            image: fill.apply(&out.sparse)?,
            mask: out.mask,
            achieved_rate: out.effective_rate,
        });
    }
    let stream = scan(image, &ScanConfig::identity(image.width(), image.height()))?;
    let mask = sampler.mask(&stream, n, seed)?;
    let sparse = apply_mask(&stream, &mask)?;
    if sparse.is_empty() {
        return Err(Error::Empty("sampler kept no samples"));
    }
    Ok(Sampled {
        image: fill.apply(&sparse)?,
        achieved_rate: mask.rate(),
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{digits, DigitStyle};

    #[test]
    fn budget_rounds_with_floor_of_one() {
        assert_eq!(budget(0.25, 100).unwrap(), 25);
        assert_eq!(budget(0.001, 100).unwrap(), 1);
        assert_eq!(budget(1.0, 7).unwrap(), 7);
        assert!(budget(0.0, 10).is_err());
        assert!(budget(1.5, 10).is_err());
    }

    #[test]
    fn names_round_trip() {
        let p = SamplerParams::default();
        for name in ["sauce", "uniform", "random", "lc", "mar", "mar:rho=0.25", "twostage:f=3"] {
            assert_eq!(Sampler::parse(name, p).unwrap().name(), name);
        }
        assert_eq!(Sampler::parse("twostage", p).unwrap().name(), "twostage:f=2");
        assert!(Sampler::parse("twostage:f=1", p).is_err());
        assert!(Sampler::parse("bogus", p).is_err());
    }

    #[test]
    fn full_rate_is_identity_for_every_sampler() {
        let img = digits(1, &DigitStyle::default(), 4).items()[0].0.clone();
        for name in ["sauce", "uniform", "random", "lc", "mar"] {
            let sampler = Sampler::parse(name, SamplerParams::default()).unwrap();
            let out = sample_image(&img, &sampler, 1.0, Fill::Nearest, 9).unwrap();
            assert_eq!(out.image, img, "{name}");
            assert_eq!(out.achieved_rate, 1.0);
        }
    }

    #[test]
    fn exact_budget_for_every_sampler() {
        let img = digits(1, &DigitStyle::default(), 5).items()[3].0.clone();
        for name in ["sauce", "uniform", "random", "lc", "mar"] {
            let sampler = Sampler::parse(name, SamplerParams::default()).unwrap();
            let out = sample_image(&img, &sampler, 0.2, Fill::Zero, 1).unwrap();
            assert_eq!(out.mask.kept(), 51, "{name}");
        }
    }
}
