//! Two-point mean functions `θ(s, t)`.

use std::fmt;
use std::sync::Arc;

use crate::special::{log_mean_unchecked, MEAN_SWITCH};
use crate::{Error, Result};

/// A strictly convex energy density `φ` with `φ(1) = 0`.
pub trait ConvexFunction: Send + Sync {
    fn phi(&self, s: f64) -> f64;
    fn dphi(&self, s: f64) -> f64;
    fn d2phi(&self, s: f64) -> f64;
    fn d3phi(&self, s: f64) -> f64;
    fn name(&self) -> &str {
        "generic"
    }
}

/// `φ(s) = (s - 1)^2 / 2`, whose mean is identically one.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquared;

impl ConvexFunction for ChiSquared {
    fn phi(&self, s: f64) -> f64 {
        0.5 * (s - 1.0) * (s - 1.0)
    }
    fn dphi(&self, s: f64) -> f64 {
        s - 1.0
    }
    fn d2phi(&self, _s: f64) -> f64 {
        1.0
    }
    fn d3phi(&self, _s: f64) -> f64 {
        0.0
    }
    fn name(&self) -> &str {
        "chi-squared"
    }
}

/// Mean function `θ(s, t) = (s - t) / (φ'(s) - φ'(t))`.
#[derive(Clone)]
pub enum MeanFunction {
    /// `φ(s) = s ln s - s + 1`, giving the logarithmic mean.
    Logarithmic,
    /// `θ(s, t) = sqrt(s t)`. It is not induced by any `φ`, so it carries no
    /// free energy and is only usable with a zero potential.
    Geometric,
    Generic(Arc<dyn ConvexFunction>),
}

impl fmt::Debug for MeanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanFunction::Logarithmic => write!(f, "Logarithmic"),
            MeanFunction::Geometric => write!(f, "Geometric"),
            MeanFunction::Generic(phi) => write!(f, "Generic({})", phi.name()),
        }
    }
}

/// Below this relative gap the generic derivative uses its diagonal limit.
const GENERIC_DERIVATIVE_SWITCH: f64 = 1e-5;

impl MeanFunction {
    pub fn generic(phi: impl ConvexFunction + 'static) -> Self {
        MeanFunction::Generic(Arc::new(phi))
    }

    /// Validated evaluation of `θ(s, t)`.
    pub fn theta(&self, s: f64, t: f64) -> Result<f64> {
        if !(s > 0.0 && t > 0.0) || !s.is_finite() || !t.is_finite() {
            return Err(Error::Domain(format!(
                "mean function needs positive arguments, got ({s}, {t})"
            )));
        }
        Ok(self.theta_unchecked(s, t))
    }

    #[inline]
    pub(crate) fn theta_unchecked(&self, s: f64, t: f64) -> f64 {
        match self {
            MeanFunction::Logarithmic => log_mean_unchecked(s, t),
            MeanFunction::Geometric => (s * t).sqrt(),
            MeanFunction::Generic(phi) => {
                if (s - t).abs() <= MEAN_SWITCH * s.max(t) {
                    1.0 / phi.d2phi(0.5 * (s + t))
                } else {
                    (s - t) / (phi.dphi(s) - phi.dphi(t))
                }
            }
        }
    }

    /// `∂θ/∂s` at `(s, t)`. By symmetry `∂θ/∂t (s, t) = ∂θ/∂s (t, s)`.
    #[inline]
    pub fn dtheta_ds(&self, s: f64, t: f64) -> f64 {
        match self {
            MeanFunction::Logarithmic => {
                // With u = ln(s/t): (u - 1 + e^{-u}) / u^2.
                let u = (s / t).ln();
                if u.abs() < 1e-2 {
                    let u2 = u * u;
                    0.5 - u / 6.0 + u2 / 24.0 - u2 * u / 120.0 + u2 * u2 / 720.0
                } else {
                    (u + (-u).exp_m1()) / (u * u)
                }
            }
            MeanFunction::Geometric => 0.5 * (t / s).sqrt(),
            MeanFunction::Generic(phi) => {
                let diff = s - t;
                if diff.abs() <= GENERIC_DERIVATIVE_SWITCH * s.max(t) {
                    let m = 0.5 * (s + t);
                    let d2 = phi.d2phi(m);
                    -phi.d3phi(m) / (2.0 * d2 * d2)
                } else {
                    let den = phi.dphi(s) - phi.dphi(t);
                    (den - diff * phi.d2phi(s)) / (den * den)
                }
            }
        }
    }

    /// `φ`, `φ'` and `φ''` when the mean is induced by an energy.
    pub(crate) fn energy(&self) -> Option<Energy<'_>> {
        match self {
            MeanFunction::Logarithmic => Some(Energy::Kl),
            MeanFunction::Geometric => None,
            MeanFunction::Generic(phi) => Some(Energy::Generic(phi.as_ref())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeanFunction::Logarithmic => "logarithmic".into(),
            MeanFunction::Geometric => "geometric".into(),
            MeanFunction::Generic(phi) => phi.name().into(),
        }
    }
}

pub(crate) enum Energy<'a> {
    Kl,
    Generic(&'a dyn ConvexFunction),
}

impl Energy<'_> {
    #[inline]
    pub(crate) fn phi(&self, s: f64) -> f64 {
        match self {
            Energy::Kl => {
                if s == 0.0 {
                    1.0
                } else {
                    s * s.ln() - s + 1.0
                }
            }
            Energy::Generic(f) => f.phi(s),
        }
    }

    #[inline]
    pub(crate) fn dphi(&self, s: f64) -> f64 {
        match self {
            Energy::Kl => s.ln(),
            Energy::Generic(f) => f.dphi(s),
        }
    }

    #[inline]
    pub(crate) fn d2phi(&self, s: f64) -> f64 {
        match self {
            Energy::Kl => 1.0 / s,
            Energy::Generic(f) => f.d2phi(s),
        }
    }
}
