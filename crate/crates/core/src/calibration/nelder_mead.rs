use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadCoefficients {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NelderMeadCoefficients {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

impl NelderMeadCoefficients {
    pub fn validate(&self) -> Result<()> {
        let ok = self.reflection > 0.0
            && self.expansion > 1.0
            && self.expansion > self.reflection
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid Nelder-Mead coefficients {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Simplex diameter fell below the tolerance.
    Converged,
    /// Best value did not improve for the configured number of evaluations.
    Stagnated,
    IterationLimit,
    EvaluationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub diameter: f64,
}

/// Box-bounded Nelder–Mead. Trial points are projected onto the box.
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead {
    pub coefficients: NelderMeadCoefficients,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Edge length of the regular initial simplex.
    pub initial_edge: f64,
    /// Stop once the largest vertex distance from the best vertex is below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_evaluations: Option<usize>,
    pub stagnation_evaluations: Option<usize>,
}

struct Counter<F> {
    f: F,
    evaluations: usize,
    cap: Option<usize>,
    best: f64,
    since_improvement: usize,
    iteration: usize,
}

impl<F: FnMut(&[f64], usize) -> Result<f64>> Counter<F> {
    /// `None` once the evaluation cap is exhausted.
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>> {
        if self.cap.is_some_and(|c| self.evaluations >= c) {
            return Ok(None);
        }
        let v = (self.f)(x, self.iteration)?;
        self.evaluations += 1;
        if v < self.best {
            self.best = v;
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        Ok(Some(v))
    }
}

impl NelderMead {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Upper bound on evaluations per iteration: reflection, contraction and a full shrink.
    pub fn evaluations_per_iteration(&self) -> usize {
        self.dim() + 2
    }

    fn validate(&self, start: &[f64]) -> Result<()> {
        self.coefficients.validate()?;
        let d = self.dim();
        if d == 0 || self.upper.len() != d || start.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: start.len(),
                context: "Nelder-Mead dimension",
            });
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidConfig("empty Nelder-Mead bounds".into()));
        }
        if !(self.initial_edge > 0.0 && self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig(
                "initial edge must be > 0 and tolerance >= 0".into(),
            ));
        }
        Ok(())
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn initial_simplex(&self, start: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim();
        let df = d as f64;
        let root = (df + 1.0).sqrt();
        let p = self.initial_edge * (root + df - 1.0) / (df * std::f64::consts::SQRT_2);
        let q = self.initial_edge * (root - 1.0) / (df * std::f64::consts::SQRT_2);
        let mut base = start.to_vec();
        self.project(&mut base);
        let mut simplex = vec![base.clone()];
        for j in 0..d {
            let mut v = base.clone();
            for (i, x) in v.iter_mut().enumerate() {
                let offset = if i == j { p } else { q };
                *x = if *x + offset <= self.upper[i] { *x + offset } else { *x - offset };
            }
            self.project(&mut v);
            simplex.push(v);
        }
        simplex
    }

    /// Minimises `f(x, iteration)` from `start`.
    pub fn minimize<F>(&self, start: &[f64], f: F) -> Result<NelderMeadOutcome>
    where
        F: FnMut(&[f64], usize) -> Result<f64>,
    {
        self.validate(start)?;
        let d = self.dim();
        let c = self.coefficients;
        let mut counter = Counter {
            f,
            evaluations: 0,
            cap: self.max_evaluations,
            best: f64::INFINITY,
            since_improvement: 0,
            iteration: 0,
        };

        let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
        let mut values: Vec<f64> = Vec::with_capacity(d + 1);
        let simplex = if self.max_iterations == 0 {
            let mut s = start.to_vec();
            self.project(&mut s);
            vec![s]
        } else {
            self.initial_simplex(start)
        };
        for v in simplex {
            match counter.eval(&v)? {
                Some(fv) => {
                    vertices.push(v);
                    values.push(fv);
                }
                None => break,
            }
        }
        if vertices.is_empty() {
            return Err(Error::InvalidConfig(
                "evaluation budget too small to evaluate the start point".into(),
            ));
        }
        if vertices.len() < d + 1 {
            let (best, best_value) = best_of(&vertices, &values);
            let termination = if self.max_iterations == 0 {
                Termination::IterationLimit
            } else {
                Termination::EvaluationLimit
            };
            return Ok(NelderMeadOutcome {
                best,
                best_value,
                iterations: 0,
                evaluations: counter.evaluations,
                termination,
                diameter: f64::INFINITY,
            });
        }

        let mut iterations = 0usize;
        let termination = loop {
            sort_simplex(&mut vertices, &mut values);
            if diameter(&vertices) < self.tolerance {
                break Termination::Converged;
            }
            if iterations >= self.max_iterations {
                break Termination::IterationLimit;
            }
            if self
                .stagnation_evaluations
                .is_some_and(|s| counter.since_improvement >= s)
            {
                break Termination::Stagnated;
            }
            iterations += 1;
            counter.iteration = iterations;

            let worst = d;
            let mut centroid = vec![0.0; d];
            for v in &vertices[..d] {
                for (ci, vi) in centroid.iter_mut().zip(v) {
                    *ci += vi / d as f64;
                }
            }
            let towards = |from: &[f64], to: &[f64], t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect();
                self.project(&mut p);
                p
            };

            let xr = towards(&centroid, &vertices[worst], -c.reflection);
            let Some(fr) = counter.eval(&xr)? else {
                break Termination::EvaluationLimit;
            };
            if fr < values[0] {
                let xe = towards(&centroid, &xr, c.expansion / c.reflection);
                let Some(fe) = counter.eval(&xe)? else {
                    vertices[worst] = xr;
                    values[worst] = fr;
                    break Termination::EvaluationLimit;
                };
                if fe < fr {
                    vertices[worst] = xe;
                    values[worst] = fe;
                } else {
                    vertices[worst] = xr;
                    values[worst] = fr;
                }
                continue;
            }
            if fr < values[d - 1] {
                vertices[worst] = xr;
                values[worst] = fr;
                continue;
            }
            let outside = fr < values[worst];
            let xc = if outside {
                towards(&centroid, &xr, c.contraction)
            } else {
                towards(&centroid, &vertices[worst], c.contraction)
            };
            let Some(fc) = counter.eval(&xc)? else {
                if outside {
                    vertices[worst] = xr;
                    values[worst] = fr;
                }
                break Termination::EvaluationLimit;
            };
            let accept = if outside { fc <= fr } else { fc < values[worst] };
            if accept {
                vertices[worst] = xc;
                values[worst] = fc;
                continue;
            }
            let mut exhausted = false;
            for i in 1..=d {
                let xs = towards(&vertices[0], &vertices[i], c.shrink);
                match counter.eval(&xs)? {
                    Some(fs) => {
                        vertices[i] = xs;
                        values[i] = fs;
                    }
                    None => {
                        exhausted = true;
                        break;
                    }
                }
            }
            if exhausted {
                break Termination::EvaluationLimit;
            }
        };
        sort_simplex(&mut vertices, &mut values);
        Ok(NelderMeadOutcome {
            best: vertices[0].clone(),
            best_value: values[0],
            iterations,
            evaluations: counter.evaluations,
            termination,
            diameter: diameter(&vertices),
        })
    }
}

fn best_of(vertices: &[Vec<f64>], values: &[f64]) -> (Vec<f64>, f64) {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    (vertices[best].clone(), values[best])
}

fn sort_simplex(vertices: &mut Vec<Vec<f64>>, values: &mut Vec<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    *vertices = order.iter().map(|&i| vertices[i].clone()).collect();
    *values = order.iter().map(|&i| values[i]).collect();
}

/// Largest distance from the first (best) vertex to any other.
fn diameter(vertices: &[Vec<f64>]) -> f64 {
    let first = &vertices[0];
    vertices[1..]
        .iter()
        .map(|v| {
            v.iter()
                .zip(first)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}
