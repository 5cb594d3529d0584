//! Element-wise priors on inferred quantities and the RBF kernel used by the
//! density-estimate repulsion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorFamily {
    /// Normal restricted to `x ≥ 0`.
    HalfNormal,
    /// Cauchy restricted to `x ≥ 0`.
    HalfCauchy,
    /// Improper flat prior; contributes nothing.
    Uniform,
    /// Zero-mean normal on the whole line (weights).
    Normal,
    /// Zero-centred Cauchy on the whole line (logits).
    Cauchy,
}

impl PriorFamily {
    pub fn requires_nonnegative(self) -> bool {
        matches!(self, PriorFamily::HalfNormal | PriorFamily::HalfCauchy)
    }
}

/// Independent, identical prior on every element, parameterised by `1/σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: PriorFamily,
    pub inverse_scale: f64,
}

impl PriorSpec {
    pub fn new(family: PriorFamily, inverse_scale: f64) -> Result<Self> {
        let spec = PriorSpec {
            family,
            inverse_scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform() -> Self {
        PriorSpec {
            family: PriorFamily::Uniform,
            inverse_scale: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family != PriorFamily::Uniform
            && !(self.inverse_scale > 0.0 && self.inverse_scale.is_finite())
        {
            return Err(Error::config(
                "prior_inverse_scale",
                format!("must be positive for {:?}, got {}", self.family, self.inverse_scale),
            ));
        }
        Ok(())
    }

    /// `σ²`
    pub fn variance(&self) -> f64 {
        1.0 / self.inverse_scale
    }
}

/// Gradient of the log prior density (up to normalisation) at every element.
///
/// * half-normal / normal: `−x/σ²`
/// * half-Cauchy / Cauchy: `−2x/(σ² + x²)`
/// * uniform: `0`
pub fn prior_logp_grad(spec: &PriorSpec, v: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.family.requires_nonnegative() {
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| **x < 0.0) {
            return Err(Error::NegativeSupport { index, value });
        }
    }
    let out = match spec.family {
        PriorFamily::Uniform => vec![0.0; v.len()],
        PriorFamily::HalfNormal | PriorFamily::Normal => {
            v.iter().map(|x| -x * spec.inverse_scale).collect()
        }
        PriorFamily::HalfCauchy | PriorFamily::Cauchy => {
            let s2 = spec.variance();
            v.iter().map(|x| -2.0 * x / (s2 + x * x)).collect()
        }
    };
    Ok(out)
}

/// Log density up to an additive constant; used by finite-difference checks.
pub fn prior_logp(spec: &PriorSpec, x: f64) -> f64 {
    match spec.family {
        PriorFamily::Uniform => 0.0,
        PriorFamily::HalfNormal | PriorFamily::Normal => -0.5 * x * x * spec.inverse_scale,
        PriorFamily::HalfCauchy | PriorFamily::Cauchy => -(1.0 + x * x * spec.inverse_scale).ln(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median of pairwise squared distances, recomputed for every evaluation.
    MedianHeuristic,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub bandwidth: Bandwidth,
    pub floor: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            bandwidth: Bandwidth::MedianHeuristic,
            floor: 1e-12,
        }
    }
}

impl KernelSpec {
    pub fn fixed(h: f64) -> Result<Self> {
        let spec = KernelSpec {
            bandwidth: Bandwidth::Fixed(h),
            ..KernelSpec::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config("bandwidth", format!("fixed bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }

    /// Bandwidth for the given particle set (one particle per row).
    pub fn bandwidth_for(&self, points: &Matrix) -> f64 {
        match self.bandwidth {
            Bandwidth::Fixed(h) => h,
            Bandwidth::MedianHeuristic => median_bandwidth_with_floor(points, self.floor),
        }
    }
}

/// Median of the pairwise squared distances between rows, at least `1e-12`;
/// `1` for a single point.
pub fn median_bandwidth(points: &Matrix) -> f64 {
    median_bandwidth_with_floor(points, KernelSpec::default().floor)
}

fn median_bandwidth_with_floor(points: &Matrix, floor: f64) -> f64 {
    let n = points.rows();
    if n < 2 {
        return 1.0;
    }
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push(squared_distance(points.row(i), points.row(j)));
        }
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    median.max(floor)
}

/// `exp(−‖a − b‖² / h)`
#[inline]
pub fn rbf_kernel(a: &[f64], b: &[f64], h: f64) -> f64 {
    (-squared_distance(a, b) / h).exp()
}

/// `∇_a k(a, b) = −(2/h)(a − b)·k(a, b)`
pub fn rbf_kernel_grad(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    let k = rbf_kernel(a, b, h);
    a.iter().zip(b).map(|(x, y)| -2.0 / h * (x - y) * k).collect()
}
