//! Reusable buffers for evaluating `K(x)` and its derivatives at many points.

use crate::geometry::mean::MeanFunction;
use crate::linalg::{invert_into, symmetric_eigen, Matrix};
use crate::network::ReactionNetwork;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Edge {
    i: usize,
    j: usize,
    omega: f64,
}

/// Local geometry at one point: `K`, its first derivatives, pseudo-inverse
/// and (on request) its spectral decomposition on the tangent space.
///
/// `set_point` does not allocate, so one instance per trajectory keeps the
/// stochastic integrators allocation-free in `d <= 3`.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    d: usize,
    mf: MeanFunction,
    edges: Vec<Edge>,
    inv_x_stat: Vec<f64>,
    ratio: Vec<f64>,
    k: Matrix,
    // c[(i, j)] = ∂K_ij/∂x_i for i != j.
    c: Matrix,
    div: Vec<f64>,
    pinv: Matrix,
    scratch: Matrix,
    grad_log_g: Vec<f64>,
    helmert: Matrix,
    lambdas: Vec<f64>,
    // Column l is u^l.
    vectors: Matrix,
}

impl LocalGeometry {
    pub fn new(network: &ReactionNetwork, mf: &MeanFunction) -> Self {
        let d = network.d();
        let omega = network.omega();
        let edges = network
            .edges()
            .into_iter()
            .map(|(i, j)| Edge {
                i,
                j,
                omega: 0.5 * (omega[(i, j)] + omega[(j, i)]),
            })
            .filter(|e| e.omega > 0.0)
            .collect();
        Self {
            d,
            mf: mf.clone(),
            edges,
            inv_x_stat: network.x_stat().iter().map(|v| 1.0 / v).collect(),
            ratio: vec![0.0; d],
            k: Matrix::zeros(d, d),
            c: Matrix::zeros(d, d),
            div: vec![0.0; d],
            pinv: Matrix::zeros(d, d),
            scratch: Matrix::zeros(d, d),
            grad_log_g: vec![0.0; d],
            helmert: helmert_basis(d),
            lambdas: vec![0.0; d - 1],
            vectors: Matrix::zeros(d, d - 1),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mean(&self) -> &MeanFunction {
        &self.mf
    }

    /// Evaluates `K(x)`, and with `derivatives` also the entry derivatives and
    /// the divergence `(∇·K)_i = Σ_j ∂_j K_ij`. `x` must be strictly positive.
    pub fn set_point(&mut self, x: &[f64], derivatives: bool) -> Result<()> {
        debug_assert_eq!(x.len(), self.d);
        for (i, &xi) in x.iter().enumerate() {
            if !(xi > 0.0) {
                return Err(Error::BoundarySingular(format!("x[{i}] = {xi}")));
            }
            self.ratio[i] = xi * self.inv_x_stat[i];
        }
        self.k.fill(0.0);
        for e in &self.edges {
            let (ri, rj) = (self.ratio[e.i], self.ratio[e.j]);
            let kij = -e.omega * self.mf.theta_unchecked(ri, rj);
            self.k[(e.i, e.j)] = kij;
            self.k[(e.j, e.i)] = kij;
            self.k[(e.i, e.i)] -= kij;
            self.k[(e.j, e.j)] -= kij;
        }
        if derivatives {
            self.div.iter_mut().for_each(|v| *v = 0.0);
            for e in &self.edges {
                let (ri, rj) = (self.ratio[e.i], self.ratio[e.j]);
                let cij = -e.omega * self.mf.dtheta_ds(ri, rj) * self.inv_x_stat[e.i];
                let cji = -e.omega * self.mf.dtheta_ds(rj, ri) * self.inv_x_stat[e.j];
                self.c[(e.i, e.j)] = cij;
                self.c[(e.j, e.i)] = cji;
                // Row i: ∂_j K_ij + ∂_i K_ii = c_ji - c_ij; row j likewise.
                self.div[e.i] += cji - cij;
                self.div[e.j] += cij - cji;
            }
        }
        Ok(())
    }

    pub fn k(&self) -> &Matrix {
        &self.k
    }

    /// Valid after `set_point(.., true)`.
    pub fn divergence(&self) -> &[f64] {
        &self.div
    }

    /// `(K y)_i`.
    #[inline]
    pub fn apply_k(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.k.row(i).iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }

    /// `K† = (K + 11ᵀ/d)^{-1} - 11ᵀ/d`.
    pub fn compute_pinv(&mut self) -> Result<&Matrix> {
        let d = self.d;
        let shift = 1.0 / d as f64;
        for i in 0..d {
            for j in 0..d {
                self.scratch[(i, j)] = self.k[(i, j)] + shift;
            }
        }
        invert_into(&mut self.scratch, &mut self.pinv)
            .map_err(|_| Error::NearSingular { value: 0.0 })?;
        for v in self.pinv.as_mut_slice() {
            *v -= shift;
        }
        Ok(&self.pinv)
    }

    /// Ambient gradient of `log|g| = log d - Σ log λ_l`, projected onto the
    /// tangent space. Requires `set_point(.., true)`; computes `K†`.
    ///
    /// `∂_m log|g| = -tr(K† ∂_m K) = Σ_{j≠m} c_mj (K†_mm + K†_jj - 2 K†_mj)`.
    pub fn compute_grad_log_g(&mut self) -> Result<&[f64]> {
        self.compute_pinv()?;
        self.grad_log_g.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.edges {
            let (i, j) = (e.i, e.j);
            let resistance = self.pinv[(i, i)] + self.pinv[(j, j)] - 2.0 * self.pinv[(i, j)];
            self.grad_log_g[i] += self.c[(i, j)] * resistance;
            self.grad_log_g[j] += self.c[(j, i)] * resistance;
        }
        let mean = self.grad_log_g.iter().sum::<f64>() / self.d as f64;
        self.grad_log_g.iter_mut().for_each(|v| *v -= mean);
        Ok(&self.grad_log_g)
    }

    /// Positive eigenpairs of `K`, computed on the tangent space in the
    /// orthonormal Helmert basis. Eigenvalues are sorted descending and each
    /// eigenvector has its first component above `1e-12` in magnitude positive.
    pub fn compute_eigen(&mut self) -> Result<(&[f64], &Matrix)> {
        let d = self.d;
        let n = d - 1;
        let h = &self.helmert;
        // B = Hᵀ K H
        let mut b = [[0.0; 2]; 2];
        let reduced = if n <= 2 {
            for p in 0..n {
                for q in p..n {
                    let mut s = 0.0;
                    for i in 0..d {
                        let ki = self.k.row(i);
                        let hk: f64 = (0..d).map(|j| ki[j] * h[(j, q)]).sum();
                        s += h[(i, p)] * hk;
                    }
                    b[p][q] = s;
                    b[q][p] = s;
                }
            }
            None
        } else {
            let kh = self.k.matmul(h);
            Some(h.transpose().matmul(&kh))
        };

        match n {
            1 => {
                self.lambdas[0] = b[0][0];
                for i in 0..d {
                    self.vectors[(i, 0)] = h[(i, 0)];
                }
            }
            2 => {
                let (a, off, c) = (b[0][0], b[0][1], b[1][1]);
                let mid = 0.5 * (a + c);
                let rad = (0.25 * (a - c) * (a - c) + off * off).sqrt();
                let (l0, l1) = (mid + rad, mid - rad);
                let (mut v0, mut v1) = if off == 0.0 {
                    if a >= c {
                        (1.0, 0.0)
                    } else {
                        (0.0, 1.0)
                    }
                } else if a >= c {
                    (l0 - c, off)
                } else {
                    (off, l0 - a)
                };
                let norm = (v0 * v0 + v1 * v1).sqrt();
                v0 /= norm;
                v1 /= norm;
                self.lambdas[0] = l0;
                self.lambdas[1] = l1;
                for i in 0..d {
                    self.vectors[(i, 0)] = h[(i, 0)] * v0 + h[(i, 1)] * v1;
                    self.vectors[(i, 1)] = -h[(i, 0)] * v1 + h[(i, 1)] * v0;
                }
            }
            _ => {
                let eig = symmetric_eigen(reduced.as_ref().expect("reduced matrix"));
                self.lambdas.copy_from_slice(&eig.values);
                let u = h.matmul(&eig.vectors);
                for i in 0..d {
                    for l in 0..n {
                        self.vectors[(i, l)] = u[(i, l)];
                    }
                }
            }
        }
        for l in 0..n {
            let lead = (0..d)
                .map(|i| self.vectors[(i, l)])
                .find(|v| v.abs() > 1e-12)
                .unwrap_or(1.0);
            if lead < 0.0 {
                for i in 0..d {
                    self.vectors[(i, l)] = -self.vectors[(i, l)];
                }
            }
        }
        if let Some(&smallest) = self.lambdas.last() {
            if smallest < 1e-12 {
                return Err(Error::NearSingular { value: smallest });
            }
        }
        Ok((&self.lambdas, &self.vectors))
    }
}

/// Orthonormal basis of `{v : Σ v_i = 0}`; column `k` is
/// `(1, ..., 1, -(k+1), 0, ..., 0) / sqrt((k+1)(k+2))`.
pub fn helmert_basis(d: usize) -> Matrix {
    let mut h = Matrix::zeros(d, d - 1);
    for k in 0..d - 1 {
        let m = (k + 1) as f64;
        let norm = (m * (m + 1.0)).sqrt();
        for i in 0..=k {
            h[(i, k)] = 1.0 / norm;
        }
        h[(k + 1, k)] = -m / norm;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{random_detailed_balanced, SimplexState};
    use crate::rng::{tag, Stream, StreamId};

    #[test]
    fn helmert_is_orthonormal_and_tangent() {
        for d in 2..=7 {
            let h = helmert_basis(d);
            let gram = h.transpose().matmul(&h);
            assert!(gram.max_abs_diff(&Matrix::identity(d - 1)) < 1e-15);
            for k in 0..d - 1 {
                assert!(h.column(k).iter().sum::<f64>().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reduced_eigen_agrees_with_full_jacobi() {
        let mut s = Stream::new(StreamId::new(11, tag::TEST, 0));
        for d in 2..=6 {
            let net = random_detailed_balanced(d, 0.5, &mut s).unwrap();
            let x = SimplexState::random_interior(d, 0.02, &mut s);
            let mut lg = LocalGeometry::new(&net, &MeanFunction::Logarithmic);
            lg.set_point(x.as_slice(), false).unwrap();
            let full = symmetric_eigen(lg.k());
            let (vals, vecs) = lg.compute_eigen().unwrap();
            let (vals, vecs) = (vals.to_vec(), vecs.clone());
            for l in 0..d - 1 {
                assert!((vals[l] - full.values[l]).abs() < 1e-12, "d={d}");
                let dotp: f64 = (0..d).map(|i| vecs[(i, l)] * full.vectors[(i, l)]).sum();
                assert!((dotp.abs() - 1.0).abs() < 1e-9, "d={d} l={l}");
            }
        }
    }

    #[test]
    fn pinv_is_moore_penrose() {
        let mut s = Stream::new(StreamId::new(12, tag::TEST, 0));
        let net = random_detailed_balanced(5, 0.5, &mut s).unwrap();
        let x = SimplexState::random_interior(5, 0.02, &mut s);
        let mut lg = LocalGeometry::new(&net, &MeanFunction::Logarithmic);
        lg.set_point(x.as_slice(), false).unwrap();
        let k = lg.k().clone();
        let p = lg.compute_pinv().unwrap().clone();
        assert!(k.matmul(&p).matmul(&k).max_abs_diff(&k) < 1e-12);
        assert!(p.matmul(&k).matmul(&p).max_abs_diff(&p) < 1e-10 * p.max_abs());
    }

    #[test]
    fn boundary_point_is_rejected() {
        let mut s = Stream::new(StreamId::new(13, tag::TEST, 0));
        let net = random_detailed_balanced(3, 0.5, &mut s).unwrap();
        let mut lg = LocalGeometry::new(&net, &MeanFunction::Logarithmic);
        assert!(matches!(
            lg.set_point(&[0.5, 0.5, 0.0], false),
            Err(Error::BoundarySingular(_))
        ));
    }
}
