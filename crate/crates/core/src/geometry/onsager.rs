//! Free energies and the Onsager response matrix.

use crate::geometry::local::LocalGeometry;
use crate::geometry::mean::MeanFunction;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::network::{ReactionNetwork, SimplexState};
use crate::special::log_mean_unchecked;
use crate::{Error, Result};

/// `ψ(x) = Σ_i x^s_i φ(x_i / x^s_i)` and its gradient `φ'(x_i / x^s_i)`.
pub fn free_energy(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x: &SimplexState,
) -> Result<(f64, Vec<f64>)> {
    let value = free_energy_value(network, mf, x.as_slice())?;
    let gradient = free_energy_gradient(network, mf, x.as_slice())?;
    Ok((value, gradient))
}

pub fn free_energy_value(network: &ReactionNetwork, mf: &MeanFunction, x: &[f64]) -> Result<f64> {
    let energy = mf
        .energy()
        .ok_or_else(|| Error::Unsupported(format!("{} mean has no free energy", mf.label())))?;
    Ok(network
        .x_stat()
        .iter()
        .zip(x)
        .map(|(&s, &xi)| s * energy.phi(xi / s))
        .sum())
}

pub fn free_energy_gradient(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x: &[f64],
) -> Result<Vec<f64>> {
    let energy = mf
        .energy()
        .ok_or_else(|| Error::Unsupported(format!("{} mean has no free energy", mf.label())))?;
    let grad: Vec<f64> = network
        .x_stat()
        .iter()
        .zip(x)
        .map(|(&s, &xi)| energy.dphi(xi / s))
        .collect();
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::BoundarySingular(format!(
            "free-energy gradient diverges at x[{i}] = {}",
            x[i]
        )));
    }
    Ok(grad)
}

/// Hessian diagonal `φ''(x_i / x^s_i) / x^s_i`; the free energy is separable.
pub fn free_energy_hessian_diag(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x: &[f64],
) -> Result<Vec<f64>> {
    let energy = mf
        .energy()
        .ok_or_else(|| Error::Unsupported(format!("{} mean has no free energy", mf.label())))?;
    Ok(network
        .x_stat()
        .iter()
        .zip(x)
        .map(|(&s, &xi)| energy.d2phi(xi / s) / s)
        .collect())
}

/// `K_ij = -ω_ij θ(x_i / x^s_i, x_j / x^s_j)` with zero row sums.
pub fn onsager_matrix(network: &ReactionNetwork, mf: &MeanFunction, x: &[f64]) -> Result<Matrix> {
    let mut lg = LocalGeometry::new(network, mf);
    lg.set_point(x, false)?;
    Ok(lg.k().clone())
}

/// `K(x)` with its positive spectrum.
#[derive(Debug, Clone)]
pub struct OnsagerDecomposition {
    pub k: Matrix,
    /// The `d - 1` positive eigenvalues, descending.
    pub lambdas: Vec<f64>,
    /// `d x (d-1)`; column `l` is the unit eigenvector `u^l`.
    pub eigvecs: Matrix,
    /// `(1, ..., 1) / sqrt(d)`.
    pub e: Vec<f64>,
    /// `d x (d-1)`; column `l` is `sqrt(λ_l) u^l`, so `σσᵀ = K`.
    pub sigma: Matrix,
}

/// Largest deviations from the decomposition identities.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecompositionResiduals {
    /// `max_l ‖K u^l - λ_l u^l‖∞`
    pub eigen: f64,
    /// `‖K e‖∞`
    pub null: f64,
    /// `max |uᵀu - I|`
    pub orthonormality: f64,
    /// `max_l |Σ_i u^l_i|`
    pub zero_sum: f64,
    /// `max |σσᵀ - K|`
    pub factorization: f64,
    /// `max |K_ij - K_ji|`
    pub symmetry: f64,
    /// `max_i |Σ_j K_ij|`
    pub row_sum: f64,
}

impl DecompositionResiduals {
    pub fn max(&self) -> f64 {
        [
            self.eigen,
            self.null,
            self.orthonormality,
            self.zero_sum,
            self.factorization,
            self.symmetry,
            self.row_sum,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Builds `K(x)` and eigen-decomposes it with cyclic Jacobi. The eigenvector
/// closest to the null direction is dropped and the rest are projected onto
/// the tangent space and renormalized.
pub fn build_onsager(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x: &SimplexState,
) -> Result<OnsagerDecomposition> {
    network.require_detailed_balance()?;
    if !x.is_interior() {
        return Err(Error::BoundarySingular(format!(
            "interior margin {}",
            x.interior_margin()
        )));
    }
    let d = network.d();
    let k = onsager_matrix(network, mf, x.as_slice())?;
    let eig = symmetric_eigen(&k);
    let mut eigvecs = Matrix::zeros(d, d - 1);
    let mut lambdas = Vec::with_capacity(d - 1);
    for l in 0..d - 1 {
        let mut u = eig.vectors.column(l);
        let mean = u.iter().sum::<f64>() / d as f64;
        u.iter_mut().for_each(|v| *v -= mean);
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lead = u.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            eigvecs[(i, l)] = sign * u[i] / norm;
        }
        lambdas.push(eig.values[l]);
    }
    if let Some(&smallest) = lambdas.last() {
        if smallest < 1e-12 {
            return Err(Error::NearSingular { value: smallest });
        }
    }
    let sigma = Matrix::from_fn(d, d - 1, |i, l| lambdas[l].sqrt() * eigvecs[(i, l)]);
    let e = vec![1.0 / (d as f64).sqrt(); d];
    Ok(OnsagerDecomposition {
        k,
        lambdas,
        eigvecs,
        e,
        sigma,
    })
}

impl OnsagerDecomposition {
    pub fn d(&self) -> usize {
        self.k.rows()
    }

    pub fn residuals(&self) -> DecompositionResiduals {
        let d = self.d();
        let mut r = DecompositionResiduals::default();
        for l in 0..d - 1 {
            let u = self.eigvecs.column(l);
            let ku = self.k.matvec(&u);
            for i in 0..d {
                r.eigen = r.eigen.max((ku[i] - self.lambdas[l] * u[i]).abs());
            }
            r.zero_sum = r.zero_sum.max(u.iter().sum::<f64>().abs());
        }
        r.null = self
            .k
            .matvec(&self.e)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()));
        let gram = self.eigvecs.transpose().matmul(&self.eigvecs);
        r.orthonormality = gram.max_abs_diff(&Matrix::identity(d - 1));
        r.factorization = self
            .sigma
            .matmul(&self.sigma.transpose())
            .max_abs_diff(&self.k);
        r.symmetry = self.k.max_abs_diff(&self.k.transpose());
        r.row_sum = (0..d)
            .map(|i| self.k.row(i).iter().sum::<f64>().abs())
            .fold(0.0, f64::max);
        r
    }

    /// Moore-Penrose pseudo-inverse `Σ_l u^l (u^l)ᵀ / λ_l`.
    pub fn pseudo_inverse(&self) -> Matrix {
        let d = self.d();
        Matrix::from_fn(d, d, |i, j| {
            (0..d - 1)
                .map(|l| self.eigvecs[(i, l)] * self.eigvecs[(j, l)] / self.lambdas[l])
                .sum()
        })
    }
}

/// One reversible reaction `Σ ν⁻ ⇌ Σ ν⁺` with stoichiometric change `nu` and
/// forward/backward fluxes evaluated at the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub nu: Vec<i64>,
    pub forward: f64,
    pub backward: f64,
}

/// `K = Σ_r Λ(Φ_r⁺, Φ_r⁻) ν^r ⊗ ν^r` with `Λ` the logarithmic mean.
pub fn build_onsager_general(reactions: &[Reaction], d: usize) -> Result<Matrix> {
    let mut k = Matrix::zeros(d, d);
    for (r, reaction) in reactions.iter().enumerate() {
        if reaction.nu.len() != d {
            return Err(Error::Domain(format!(
                "reaction {r} has {} coefficients for d = {d}",
                reaction.nu.len()
            )));
        }
        if !(reaction.forward > 0.0 && reaction.backward > 0.0) {
            return Err(Error::Domain(format!(
                "reaction {r} has nonpositive rate ({}, {})",
                reaction.forward, reaction.backward
            )));
        }
        let weight = log_mean_unchecked(reaction.forward, reaction.backward);
        for i in 0..d {
            for j in 0..d {
                k[(i, j)] += weight * (reaction.nu[i] * reaction.nu[j]) as f64;
            }
        }
    }
    Ok(k)
}

/// One reaction per unordered edge `i - j`: `ν = e_j - e_i`, forward flux
/// `Q_ij x_i`, backward flux `Q_ji x_j`.
pub fn linear_network_reactions(network: &ReactionNetwork, x: &[f64]) -> Vec<Reaction> {
    let d = network.d();
    let q = network.q();
    network
        .edges()
        .into_iter()
        .map(|(i, j)| {
            let mut nu = vec![0; d];
            nu[i] = -1;
            nu[j] = 1;
            Reaction {
                nu,
                forward: q.rate(i, j) * x[i],
                backward: q.rate(j, i) * x[j],
            }
        })
        .collect()
}
