//! Derivative-free simplex search.

/// Nelder-Mead settings (standard coefficients).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub max_iterations: usize,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    /// Stop once the spread of simplex values falls below this.
    pub tolerance: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_step: 1.0,
            tolerance: 1e-8,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

impl NelderMead {
    /// Minimizes `f` from `x0`. Non-finite values are treated as `+inf`, so
    /// such points are never accepted over a finite one.
    pub fn minimize(&self, mut f: impl FnMut(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let dim = x0.len();
        let mut evaluations = 0;
        let mut eval = |x: &[f64]| {
            evaluations += 1;
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..dim {
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            let v = eval(&x);
            simplex.push((x, v));
        }

        let mut history = Vec::new();
        let mut iterations = 0;
        while iterations < self.max_iterations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[dim].1);
            if best.is_finite() && worst.is_finite() && (worst - best).abs() <= self.tolerance {
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
                .collect();
            let towards = |coef: f64, from: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(from)
                    .map(|(c, w)| c + coef * (c - w))
                    .collect()
            };

            let worst_x = simplex[dim].0.clone();
            let reflected = towards(self.reflection, &worst_x);
            let fr = eval(&reflected);
            if fr < simplex[0].1 {
                let expanded = towards(self.reflection * self.expansion, &worst_x);
                let fe = eval(&expanded);
                simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            } else if fr < simplex[dim - 1].1 {
                simplex[dim] = (reflected, fr);
            } else {
                let (contracted, fc) = if fr < simplex[dim].1 {
                    let c = towards(self.reflection * self.contraction, &worst_x);
                    let v = eval(&c);
                    (c, v)
                } else {
                    let c = towards(-self.contraction, &worst_x);
                    let v = eval(&c);
                    (c, v)
                };
                if fc < fr.min(simplex[dim].1) {
                    simplex[dim] = (contracted, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    for point in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = anchor
                            .iter()
                            .zip(&point.0)
                            .map(|(a, p)| a + self.shrink * (p - a))
                            .collect();
                        let v = eval(&x);
                        *point = (x, v);
                    }
                }
            }
            history.push(simplex.iter().map(|p| p.1).fold(f64::INFINITY, f64::min));
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            iterations,
            evaluations,
            history,
        }
    }
}
