//! The Riemannian metric induced by `K` in the chart `(x_1, ..., x_{d-1})`.

use crate::geometry::onsager::OnsagerDecomposition;
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct MetricData {
    /// `g = M Λ^{-1} Mᵀ` with `M_il = u^l_i - u^l_d`.
    pub g: Matrix,
    /// Leading `(d-1) x (d-1)` block of `K`.
    pub g_inv: Matrix,
    /// `d / Π λ_l`.
    pub det_g: f64,
    /// `det g` by LU factorization of `g`.
    pub det_g_direct: f64,
    /// `sqrt(det g) / sqrt(d)`, the density of the volume form with respect
    /// to the Hausdorff measure on the simplex.
    pub vol_density: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MetricResiduals {
    /// `max |g g_inv - I|`
    pub inverse: f64,
    /// `|det_g - det_g_direct| / det_g`
    pub determinant: f64,
}

pub fn metric_tensor(dec: &OnsagerDecomposition) -> Result<MetricData> {
    let d = dec.d();
    let n = d - 1;
    if let Some(&smallest) = dec.lambdas.last() {
        if smallest < 1e-12 {
            return Err(Error::NearSingular { value: smallest });
        }
    }
    let m = Matrix::from_fn(n, n, |i, l| dec.eigvecs[(i, l)] - dec.eigvecs[(d - 1, l)]);
    let g = Matrix::from_fn(n, n, |i, j| {
        (0..n).map(|l| m[(i, l)] * m[(j, l)] / dec.lambdas[l]).sum()
    });
    let g_inv = dec.k.leading_block(n);
    let det_g = d as f64 / dec.lambdas.iter().product::<f64>();
    let det_g_direct = g.determinant();
    let vol_density = det_g.sqrt() / (d as f64).sqrt();
    Ok(MetricData {
        g,
        g_inv,
        det_g,
        det_g_direct,
        vol_density,
    })
}

impl MetricData {
    pub fn residuals(&self) -> MetricResiduals {
        let n = self.g.rows();
        MetricResiduals {
            inverse: self
                .g
                .matmul(&self.g_inv)
                .max_abs_diff(&Matrix::identity(n)),
            determinant: (self.det_g - self.det_g_direct).abs() / self.det_g,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mean::MeanFunction;
    use crate::geometry::onsager::build_onsager;
    use crate::network::{build_network, random_detailed_balanced, QMatrix, SimplexState};
    use crate::rng::{tag, Stream, StreamId};

    #[test]
    fn two_point_metric_by_hand() {
        let net = build_network(QMatrix::from_rates(&[vec![1.0], vec![1.0]]).unwrap()).unwrap();
        let x = SimplexState::new(vec![0.5, 0.5]).unwrap();
        let dec = build_onsager(&net, &MeanFunction::Logarithmic, &x).unwrap();
        let m = metric_tensor(&dec).unwrap();
        assert!((m.g[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((m.det_g - 2.0).abs() < 1e-14);
        assert!((m.g_inv[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((m.vol_density - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_metric_identities() {
        let mut s = Stream::new(StreamId::new(31, tag::TEST, 0));
        for d in 2..=6 {
            let net = random_detailed_balanced(d, 0.5, &mut s).unwrap();
            let x = SimplexState::random_interior(d, 0.01, &mut s);
            let dec = build_onsager(&net, &MeanFunction::Logarithmic, &x).unwrap();
            let r = metric_tensor(&dec).unwrap().residuals();
            assert!(r.inverse < 1e-9 && r.determinant < 1e-9, "d={d}: {r:?}");
        }
    }
}
