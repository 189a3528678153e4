//! Analytic test functions that can be re-evaluated exactly at any point,
//! including after a dislocation.

use serde::{Deserialize, Serialize};

use crate::dislocations::Dislocation;
use crate::error::Result;
use crate::extremals::BubbleParams;
use crate::field::{Field, FracParams, Grid};

/// A single cosine mode `amplitude·cos(k·x + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub wavevector: Vec<f64>,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedForm {
    /// `c / (λ² + |x-x0|²)^{(N-2s)/2}`.
    Bubble(BubbleParams),
    /// `a·exp(-|x-c|²/w²)`.
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `a·n^{-s}·sin(n(x₁-c₁))·exp(-|x-c|²/w²)`.
    Packet {
        amplitude: f64,
        frequency: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `Σ modes · exp(-|x|²/(2w²))`.
    Waves { modes: Vec<Mode>, envelope_width: f64 },
    Sum(Vec<ClosedForm>),
    Scaled { factor: f64, inner: Box<ClosedForm> },
    Dislocated {
        dislocation: Dislocation,
        inner: Box<ClosedForm>,
    },
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum()
}

impl ClosedForm {
    pub fn eval(&self, x: &[f64], p: &FracParams) -> f64 {
        match self {
            ClosedForm::Bubble(b) => b.eval(x, p),
            ClosedForm::Gaussian {
                amplitude,
                center,
                width,
            } => amplitude * (-dist2(x, center) / (width * width)).exp(),
            ClosedForm::Packet {
                amplitude,
                frequency,
                center,
                width,
            } => {
                amplitude
                    * frequency.powf(-p.s())
                    * (frequency * (x[0] - center[0])).sin()
                    * (-dist2(x, center) / (width * width)).exp()
            }
            ClosedForm::Waves {
                modes,
                envelope_width,
            } => {
                let env = (-0.5 * dist2(x, &[0.0; 3][..x.len()]) / envelope_width.powi(2)).exp();
                let sum: f64 = modes
                    .iter()
                    .map(|m| {
                        let phase: f64 =
                            m.wavevector.iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>() + m.phase;
                        m.amplitude * phase.cos()
                    })
                    .sum();
                env * sum
            }
            ClosedForm::Sum(parts) => parts.iter().map(|f| f.eval(x, p)).sum(),
            ClosedForm::Scaled { factor, inner } => factor * inner.eval(x, p),
            ClosedForm::Dislocated { dislocation, inner } => {
                let mut z = [0.0; 3];
                dislocation.pull_point(x, &mut z[..x.len()]);
                dislocation.amplitude(p) * inner.eval(&z[..x.len()], p)
            }
        }
    }

    /// Samples on the torus. Each centred form is read on the period cell
    /// around its own centre, so moving the centre by whole spacings is an
    /// exact cyclic shift of the samples.
    pub fn sample(&self, grid: &Grid, p: &FracParams) -> Result<Field> {
        p.check_grid(grid)?;
        Field::from_fn(*grid, |x| self.eval_periodic(grid, x, p))
    }

    fn eval_periodic(&self, grid: &Grid, x: &[f64], p: &FracParams) -> f64 {
        let mut z = [0.0; 3];
        let near = |c: &[f64], z: &mut [f64; 3]| {
            for (a, zi) in z.iter_mut().enumerate().take(x.len()) {
                *zi = c[a] + grid.wrap_delta(x[a] - c[a]);
            }
        };
        match self {
            ClosedForm::Bubble(b) => {
                near(&b.x0, &mut z);
                self.eval(&z[..x.len()], p)
            }
            ClosedForm::Gaussian { center, .. } | ClosedForm::Packet { center, .. } => {
                near(center, &mut z);
                self.eval(&z[..x.len()], p)
            }
            ClosedForm::Waves { .. } => self.eval(x, p),
            ClosedForm::Sum(parts) => parts.iter().map(|f| f.eval_periodic(grid, x, p)).sum(),
            ClosedForm::Scaled { factor, inner } => factor * inner.eval_periodic(grid, x, p),
            ClosedForm::Dislocated { dislocation, .. } => {
                near(&dislocation.y, &mut z);
                self.eval(&z[..x.len()], p)
            }
        }
    }

    pub fn scaled(self, factor: f64) -> ClosedForm {
        ClosedForm::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    pub fn dislocated(self, d: Dislocation) -> ClosedForm {
        ClosedForm::Dislocated {
            dislocation: d,
            inner: Box::new(self),
        }
    }
}
