//! Derivatives of `K` and `log|g|` with respect to the state.

use crate::geometry::local::LocalGeometry;
use crate::geometry::mean::MeanFunction;
use crate::linalg::Matrix;
use crate::network::ReactionNetwork;
use crate::{Error, Result};

/// How derivatives of `K(x)` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeScheme {
    /// Closed-form derivatives of the mean function.
    #[default]
    Analytic,
    /// Central differences along the tangent directions `e_j - e_d`.
    FiniteDifference,
}

/// Relative step of the finite-difference scheme.
pub const FD_RELATIVE_STEP: f64 = 1e-6;

/// `(∇·K)_i = Σ_j ∂_j K_ij`.
///
/// Rows of `K` sum to zero for every positive `x`, so the divergence only
/// involves tangent derivatives and both schemes compute the same quantity.
pub fn divergence_k(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x: &[f64],
    scheme: DerivativeScheme,
) -> Result<Vec<f64>> {
    let mut lg = LocalGeometry::new(network, mf);
    match scheme {
        DerivativeScheme::Analytic => {
            lg.set_point(x, true)?;
            Ok(lg.divergence().to_vec())
        }
        DerivativeScheme::FiniteDifference => {
            let d = x.len();
            let mut div = vec![0.0; d];
            for j in 0..d - 1 {
                let dk = tangent_difference(&mut lg, x, j, |lg| Ok(lg.k().clone()))?;
                for (i, v) in div.iter_mut().enumerate() {
                    *v += dk[(i, j)];
                }
            }
            Ok(div)
        }
    }
}

/// `log|g| = log d - Σ_l log λ_l = log d - log det(K + 11ᵀ/d)`.
pub fn log_det_g(network: &ReactionNetwork, mf: &MeanFunction, x: &[f64]) -> Result<f64> {
    let mut lg = LocalGeometry::new(network, mf);
    lg.set_point(x, false)?;
    log_det_g_at(&lg)
}

fn log_det_g_at(lg: &LocalGeometry) -> Result<f64> {
    let d = lg.d();
    let shifted = Matrix::from_fn(d, d, |i, j| lg.k()[(i, j)] + 1.0 / d as f64);
    let det = shifted.determinant();
    if !(det > 0.0) {
        return Err(Error::NearSingular { value: det });
    }
    Ok((d as f64).ln() - det.ln())
}

/// Gradient of `log|g|`, projected onto the tangent space `Σ v_i = 0`.
pub fn grad_log_det_g(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x: &[f64],
    scheme: DerivativeScheme,
) -> Result<Vec<f64>> {
    let mut lg = LocalGeometry::new(network, mf);
    match scheme {
        DerivativeScheme::Analytic => {
            lg.set_point(x, true)?;
            Ok(lg.compute_grad_log_g()?.to_vec())
        }
        DerivativeScheme::FiniteDifference => {
            let d = x.len();
            let mut grad = vec![0.0; d];
            for (j, g) in grad.iter_mut().enumerate().take(d - 1) {
                *g = tangent_difference(&mut lg, x, j, log_det_g_at)?;
            }
            let mean = grad.iter().sum::<f64>() / d as f64;
            grad.iter_mut().for_each(|v| *v -= mean);
            Ok(grad)
        }
    }
}

/// Central difference of `f(K(x))` along `e_j - e_d`.
fn tangent_difference<T>(
    lg: &mut LocalGeometry,
    x: &[f64],
    j: usize,
    f: impl Fn(&LocalGeometry) -> Result<T>,
) -> Result<T>
where
    T: Difference,
{
    let last = x.len() - 1;
    let h = FD_RELATIVE_STEP * x[j].min(x[last]);
    let mut y = x.to_vec();
    y[j] += h;
    y[last] -= h;
    lg.set_point(&y, false)?;
    let plus = f(lg)?;
    y[j] = x[j] - h;
    y[last] = x[last] + h;
    lg.set_point(&y, false)?;
    let minus = f(lg)?;
    Ok(plus.difference(minus, 2.0 * h))
}

trait Difference {
    fn difference(self, other: Self, width: f64) -> Self;
}

impl Difference for f64 {
    fn difference(self, other: f64, width: f64) -> f64 {
        (self - other) / width
    }
}

impl Difference for Matrix {
    fn difference(self, other: Matrix, width: f64) -> Matrix {
        Matrix::from_fn(self.rows(), self.cols(), |i, j| {
            (self[(i, j)] - other[(i, j)]) / width
        })
    }
}
