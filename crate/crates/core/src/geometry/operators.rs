//! Differential operators of the metric induced by `K`, the diffusion
//! generator and the stationary Hamilton-Jacobi residual.

use crate::fp::ThetaProfile;
use crate::geometry::derivatives::{divergence_k, grad_log_det_g, DerivativeScheme};
use crate::geometry::mean::MeanFunction;
use crate::geometry::onsager::{free_energy_gradient, onsager_matrix};
use crate::linalg::{dot, Matrix};
use crate::network::{ReactionNetwork, SimplexState};
use crate::{Error, Result};

/// A twice differentiable function on `R^d`.
pub trait ScalarField {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Defaults to central differences of the gradient.
    fn hessian(&self, x: &[f64]) -> Matrix {
        let d = x.len();
        let mut hess = Matrix::zeros(d, d);
        let mut y = x.to_vec();
        for j in 0..d {
            let h = 1e-5 * x[j].abs().max(1e-3);
            y[j] = x[j] + h;
            let plus = self.gradient(&y);
            y[j] = x[j] - h;
            let minus = self.gradient(&y);
            y[j] = x[j];
            for i in 0..d {
                hess[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        Matrix::from_fn(d, d, |i, j| 0.5 * (hess[(i, j)] + hess[(j, i)]))
    }
}

/// `f(x) = cᵀx`.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub c: Vec<f64>,
}

impl ScalarField for LinearField {
    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }
    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.c.clone()
    }
    fn hessian(&self, x: &[f64]) -> Matrix {
        Matrix::zeros(x.len(), x.len())
    }
}

/// `f(x) = xᵀAx / 2 + bᵀx` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct QuadraticField {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl ScalarField for QuadraticField {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.a.matvec(x)) + dot(&self.b, x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .matvec(x)
            .iter()
            .zip(&self.b)
            .map(|(u, v)| u + v)
            .collect()
    }
    fn hessian(&self, _x: &[f64]) -> Matrix {
        self.a.clone()
    }
}

/// Extrinsic gradient, Laplace-Beltrami operator and Dirichlet energy density.
#[derive(Debug, Clone)]
pub struct DifferentialOperators {
    /// `K ∇f`
    pub grad_g: Vec<f64>,
    /// `|g|^{-1/2} ∇·(|g|^{1/2} K ∇f)`
    pub laplace_beltrami: f64,
    /// `⟨∇f, K ∇f⟩`
    pub dirichlet_density: f64,
}

/// `Δ_g f = tr(K ∇²f) + (∇·K)·∇f + ⟨∇log|g|, K∇f⟩ / 2`.
pub fn differential_operators(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    f: &dyn ScalarField,
    x: &SimplexState,
    scheme: DerivativeScheme,
) -> Result<DifferentialOperators> {
    if !x.is_interior() {
        return Err(Error::BoundarySingular(
            "differential operators need an interior state".into(),
        ));
    }
    let x = x.as_slice();
    let d = x.len();
    let k = onsager_matrix(network, mf, x)?;
    let grad = f.gradient(x);
    let grad_g = k.matvec(&grad);
    let dirichlet_density = dot(&grad, &grad_g);
    let hess = f.hessian(x);
    let trace: f64 = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| k[(i, j)] * hess[(j, i)])
        .sum();
    let div = divergence_k(network, mf, x, scheme)?;
    let glog = grad_log_det_g(network, mf, x, scheme)?;
    let laplace_beltrami = trace + dot(&div, &grad) + 0.5 * dot(&glog, &grad_g);
    Ok(DifferentialOperators {
        grad_g,
        laplace_beltrami,
        dirichlet_density,
    })
}

/// Energy driving the drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Potential {
    /// The free energy `ψ` induced by the mean function.
    #[default]
    FreeEnergy,
    /// No drift beyond the geometric terms (canonical diffusion).
    Zero,
}

pub(crate) fn potential_gradient(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    potential: Potential,
    x: &[f64],
) -> Result<Vec<f64>> {
    match potential {
        Potential::FreeEnergy => free_energy_gradient(network, mf, x),
        Potential::Zero => Ok(vec![0.0; x.len()]),
    }
}

/// `L f = -⟨K ∇ψ, ∇f⟩ + h Δ_g f`.
pub fn apply_generator(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    f: &dyn ScalarField,
    x: &SimplexState,
    h: f64,
    potential: Potential,
    scheme: DerivativeScheme,
) -> Result<f64> {
    let ops = differential_operators(network, mf, f, x, scheme)?;
    let grad_psi = potential_gradient(network, mf, potential, x.as_slice())?;
    Ok(-dot(&grad_psi, &ops.grad_g) + h * ops.laplace_beltrami)
}

/// `Σ_{(i,j) ∈ E} (Q_ji x_j e^{∂_iψ - ∂_jψ} - Q_ij x_i)` over directed edges
/// `i → j` with `Q_ij > 0`.
pub fn hje_residual(
    network: &ReactionNetwork,
    psi_grad: impl Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
) -> f64 {
    let grad = psi_grad(x);
    let q = network.q();
    let d = network.d();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j && q.rate(i, j) > 0.0 {
                total += q.rate(j, i) * x[j] * (grad[i] - grad[j]).exp() - q.rate(i, j) * x[i];
            }
        }
    }
    total
}

/// `W_2((0, 1), (x, 1 - x)) = ∫_0^x θ(r)^{-1/2} dr` on a two-species network.
pub fn wasserstein2_twopoint(network: &ReactionNetwork, mf: &MeanFunction, x: f64) -> Result<f64> {
    let profile = ThetaProfile::from_network(network, mf)?;
    profile.arclength(x)
}
