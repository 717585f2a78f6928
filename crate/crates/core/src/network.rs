//! Linear reaction networks and states on the probability simplex.

use std::collections::VecDeque;

use crate::linalg::{least_squares, Matrix};
use crate::rng::Stream;
use crate::{Error, Result};

/// Relative tolerance on Q-matrix row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Relative tolerance on `|ω_ij - ω_ji|`.
pub const DETAILED_BALANCE_TOLERANCE: f64 = 1e-10;

/// Generator of a continuous-time Markov chain on `d` species.
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix {
    entries: Matrix,
}

impl QMatrix {
    /// Validates a full `d x d` rate matrix.
    pub fn new(entries: Matrix) -> Result<Self> {
        let d = entries.rows();
        if d < 2 || entries.cols() != d {
            return Err(Error::BadQMatrix(format!(
                "expected a square matrix with d >= 2, got {}x{}",
                d,
                entries.cols()
            )));
        }
        let scale = entries.max_abs();
        for i in 0..d {
            for j in 0..d {
                let q = entries[(i, j)];
                if !q.is_finite() {
                    return Err(Error::BadQMatrix(format!("Q[{i}][{j}] is not finite")));
                }
                if i != j && q < 0.0 {
                    return Err(Error::BadQMatrix(format!(
                        "negative off-diagonal rate Q[{i}][{j}] = {q}"
                    )));
                }
            }
            let sum: f64 = entries.row(i).iter().sum();
            if sum.abs() > ROW_SUM_TOLERANCE * scale {
                return Err(Error::BadQMatrix(format!("row {i} sums to {sum:e}")));
            }
        }
        Ok(Self { entries })
    }

    /// Builds a Q-matrix from off-diagonal rates, inferring the diagonal.
    ///
    /// Each row either has length `d` (its diagonal entry must be zero or
    /// already equal minus the off-diagonal sum) or length `d - 1` (the
    /// off-diagonal entries in column order).
    pub fn from_rates(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d < 2 {
            return Err(Error::BadQMatrix(format!(
                "need at least 2 species, got {d}"
            )));
        }
        let mut entries = Matrix::zeros(d, d);
        for (i, row) in rows.iter().enumerate() {
            let off: Vec<f64> = match row.len() {
                n if n == d => row
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &v)| v)
                    .collect(),
                n if n + 1 == d => row.clone(),
                n => {
                    return Err(Error::BadQMatrix(format!(
                        "row {i} has {n} entries for d = {d}"
                    )))
                }
            };
            let given_diag = (row.len() == d).then(|| row[i]);
            let cols = (0..d).filter(|&j| j != i);
            for (j, v) in cols.zip(off) {
                entries[(i, j)] = v;
            }
            let inferred = -entries.row(i).iter().sum::<f64>();
            if let Some(diag) = given_diag {
                let scale = entries.row(i).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if diag != 0.0
                    && (diag - inferred).abs() > ROW_SUM_TOLERANCE * scale.max(diag.abs())
                {
                    return Err(Error::BadQMatrix(format!("row {i} does not sum to zero")));
                }
            }
            entries[(i, i)] = inferred;
        }
        Self::new(entries)
    }

    pub fn d(&self) -> usize {
        self.entries.rows()
    }

    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    /// Unordered pairs `i < j` joined by a reaction in either direction.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let d = self.d();
        let mut edges = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                if self.rate(i, j) > 0.0 || self.rate(j, i) > 0.0 {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    /// Whether every species reaches every other along positive rates.
    pub fn is_strongly_connected(&self) -> bool {
        let d = self.d();
        let reach = |forward: bool| {
            let mut seen = vec![false; d];
            let mut queue = VecDeque::from([0]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                for j in 0..d {
                    let rate = if forward {
                        self.rate(i, j)
                    } else {
                        self.rate(j, i)
                    };
                    if j != i && rate > 0.0 && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

/// A linear reaction network with its stationary vector and edge weights.
#[derive(Debug, Clone)]
pub struct ReactionNetwork {
    q: QMatrix,
    x_stat: Vec<f64>,
    omega: Matrix,
    detailed_balanced: bool,
}

/// Builds a network and requires detailed balance.
pub fn build_network(q: QMatrix) -> Result<ReactionNetwork> {
    let network = build_network_raw(q)?;
    let residual = network.omega_asymmetry();
    if residual > DETAILED_BALANCE_TOLERANCE * network.omega.max_abs() {
        return Err(Error::NotDetailedBalanced { residual });
    }
    Ok(ReactionNetwork {
        detailed_balanced: true,
        ..network
    })
}

/// Builds a network without the detailed-balance requirement. Only the
/// residual diagnostic and the jump process accept such networks.
pub fn build_network_raw(q: QMatrix) -> Result<ReactionNetwork> {
    if !q.is_strongly_connected() {
        return Err(Error::NotConnected);
    }
    let d = q.d();
    let mut a = Matrix::zeros(d + 1, d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = q.rate(j, i);
        }
        a[(d, i)] = 1.0;
    }
    let mut rhs = vec![0.0; d + 1];
    rhs[d] = 1.0;
    let mut x = least_squares(&a, &rhs).map_err(|_| Error::NotConnected)?;
    if x.iter().any(|&v| v <= 0.0) {
        return Err(Error::NotConnected);
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    let omega = Matrix::from_fn(d, d, |i, j| q.rate(i, j) * x[i]);
    let network = ReactionNetwork {
        q,
        x_stat: x,
        omega,
        detailed_balanced: false,
    };
    let stationarity = network.stationarity_residual();
    if stationarity > 1e-10 * network.q.entries().max_abs().max(1.0) {
        return Err(Error::BadQMatrix(format!(
            "stationary solve residual {stationarity:e}"
        )));
    }
    let detailed_balanced =
        network.omega_asymmetry() <= DETAILED_BALANCE_TOLERANCE * network.omega.max_abs();
    Ok(ReactionNetwork {
        detailed_balanced,
        ..network
    })
}

impl ReactionNetwork {
    pub fn d(&self) -> usize {
        self.q.d()
    }

    pub fn q(&self) -> &QMatrix {
        &self.q
    }

    pub fn x_stat(&self) -> &[f64] {
        &self.x_stat
    }

    /// `ω_ij = Q_ij x^s_i`.
    pub fn omega(&self) -> &Matrix {
        &self.omega
    }

    pub fn is_detailed_balanced(&self) -> bool {
        self.detailed_balanced
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.q.edges()
    }

    /// `max_ij |Q_ij x^s_i - Q_ji x^s_j|`.
    pub fn detailed_balance_residual(&self) -> f64 {
        self.omega_asymmetry()
    }

    /// `‖Qᵀ x^s‖∞`.
    pub fn stationarity_residual(&self) -> f64 {
        let d = self.d();
        (0..d)
            .map(|j| {
                (0..d)
                    .map(|i| self.q.rate(i, j) * self.x_stat[i])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    fn omega_asymmetry(&self) -> f64 {
        let d = self.d();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in i + 1..d {
                worst = worst.max((self.omega[(i, j)] - self.omega[(j, i)]).abs());
            }
        }
        worst
    }

    pub(crate) fn require_detailed_balance(&self) -> Result<()> {
        if self.detailed_balanced {
            Ok(())
        } else {
            Err(Error::NotDetailedBalanced {
                residual: self.omega_asymmetry(),
            })
        }
    }
}

/// Random detailed-balanced network: positive `x^s`, symmetric weights on a
/// connected graph (a random spanning path plus extra edges with probability
/// `extra_edge_prob`), and `Q_ij = ω_ij / x^s_i`.
pub fn random_detailed_balanced(
    d: usize,
    extra_edge_prob: f64,
    stream: &mut Stream,
) -> Result<ReactionNetwork> {
    if d < 2 {
        return Err(Error::Domain(format!("need d >= 2, got {d}")));
    }
    let x: Vec<f64> = (0..d).map(|_| 0.2 + stream.uniform()).collect();
    let total: f64 = x.iter().sum();
    let x: Vec<f64> = x.iter().map(|v| v / total).collect();

    let mut order: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        let j = (stream.uniform() * (i + 1) as f64) as usize;
        order.swap(i, j.min(i));
    }
    let mut omega = Matrix::zeros(d, d);
    let link = |omega: &mut Matrix, i: usize, j: usize, w: f64| {
        omega[(i, j)] = w;
        omega[(j, i)] = w;
    };
    for pair in order.windows(2) {
        link(&mut omega, pair[0], pair[1], 0.1 + stream.uniform());
    }
    for i in 0..d {
        for j in i + 1..d {
            let extra = stream.uniform() < extra_edge_prob;
            let w = 0.1 + stream.uniform();
            if extra && omega[(i, j)] == 0.0 {
                link(&mut omega, i, j, w);
            }
        }
    }
    let mut entries = Matrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { omega[(i, j)] / x[i] });
    for i in 0..d {
        entries[(i, i)] = -entries.row(i).iter().sum::<f64>();
    }
    build_network(QMatrix::new(entries)?)
}

/// Simplex tolerance on `Σ x_i = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexState {
    x: Vec<f64>,
}

impl SimplexState {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InvalidState(format!(
                "need at least 2 coordinates, got {}",
                x.len()
            )));
        }
        if let Some(v) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidState(format!(
                "coordinate {v} is negative or not finite"
            )));
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "coordinates sum to {sum}, not 1"
            )));
        }
        Ok(Self { x })
    }

    /// Normalizes a nonnegative vector onto the simplex.
    pub fn normalized(mut x: Vec<f64>) -> Result<Self> {
        let sum: f64 = x.iter().sum();
        if !(sum > 0.0) || x.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidState("cannot normalize".into()));
        }
        x.iter_mut().for_each(|v| *v /= sum);
        Self::new(x)
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidState("all counts are zero".into()));
        }
        Ok(Self {
            x: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        })
    }

    /// Uniformly distributed point (flat Dirichlet), pushed inward so that
    /// every coordinate is at least `margin`.
    pub fn random_interior(d: usize, margin: f64, stream: &mut Stream) -> Self {
        assert!(margin * d as f64 <= 0.5, "margin too large for d = {d}");
        let e: Vec<f64> = (0..d).map(|_| stream.exponential()).collect();
        let total: f64 = e.iter().sum();
        let scale = 1.0 - margin * d as f64;
        let x: Vec<f64> = e.iter().map(|v| margin + scale * v / total).collect();
        let sum: f64 = x.iter().sum();
        Self {
            x: x.iter().map(|v| v / sum).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.x
    }

    pub fn interior_margin(&self) -> f64 {
        self.x.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_interior(&self) -> bool {
        self.interior_margin() > 0.0
    }

    /// Counts `N x_i` if the state lies on the lattice with spacing `1/N`.
    pub fn to_counts(&self, n: u64) -> Result<Vec<u64>> {
        let counts: Vec<u64> = self
            .x
            .iter()
            .map(|v| (v * n as f64).round() as u64)
            .collect();
        let on_lattice = self
            .x
            .iter()
            .zip(&counts)
            .all(|(v, &c)| (v * n as f64 - c as f64).abs() < 1e-9);
        if !on_lattice || counts.iter().sum::<u64>() != n {
            return Err(Error::InvalidState(format!(
                "state is not on the lattice with N = {n}"
            )));
        }
        Ok(counts)
    }
}

/// Time-stamped states from any of the dynamical layers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.push(x.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.times
            .last()
            .map(|&t| (t, self.states.last().unwrap().as_slice()))
    }

    /// Piecewise-constant (càdlàg) value at time `t`.
    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        let k = self.times.partition_point(|&s| s <= t);
        (k > 0).then(|| self.states[k - 1].as_slice())
    }
}
