//! The rescaled counting process on the lattice `{x : N x ∈ ℕ^d, Σ x = 1}`:
//! exact simulation, its master equation and the WKB transform of its law.

use rayon::prelude::*;

use crate::network::{ReactionNetwork, SimplexState, Trajectory};
use crate::rng::{tag, Stream, StreamId};
use crate::{Error, Result};

/// Largest lattice the master-equation solver accepts.
pub const MAX_LATTICE_STATES: u128 = 1_000_000;
/// Largest lattice for the dense stationary solve.
pub const MAX_DENSE_STATES: usize = 2_000;
/// `dt · (largest exit rate)` bound for explicit stepping.
pub const CME_STABILITY: f64 = 0.5;

/// A sample path of counts `C(t)` with `Σ C_i = N`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrajectory {
    pub n: u64,
    /// `0`, the jump times before `t_end`, then `t_end` (if positive).
    pub times: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
}

impl JumpTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `X = C / N` at epoch `k`.
    pub fn state(&self, k: usize) -> Vec<f64> {
        self.counts[k]
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let mut traj = Trajectory::default();
        for k in 0..self.len() {
            traj.push(self.times[k], &self.state(k));
        }
        traj
    }

    /// Counts at time `t` (right-continuous).
    pub fn counts_at(&self, t: f64) -> Option<&[u64]> {
        let k = self.times.partition_point(|&s| s <= t);
        (k > 0).then(|| self.counts[k - 1].as_slice())
    }
}

/// Outgoing reactions `i → j` with rate constants `Q_ij`, grouped by source.
struct ReactionTable {
    out: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

impl ReactionTable {
    fn new(network: &ReactionNetwork) -> Self {
        let d = network.d();
        let q = network.q();
        let out: Vec<Vec<(usize, f64)>> = (0..d)
            .map(|i| {
                (0..d)
                    .filter(|&j| j != i && q.rate(i, j) > 0.0)
                    .map(|j| (j, q.rate(i, j)))
                    .collect()
            })
            .collect();
        let exit = out.iter().map(|r| r.iter().map(|(_, q)| q).sum()).collect();
        Self { out, exit }
    }

    /// Draws the next jump after time `t`: its time and reaction `(i, j)`.
    fn next_jump(
        &self,
        counts: &[u64],
        t: f64,
        stream: &mut Stream,
    ) -> Option<(f64, usize, usize)> {
        let total: f64 = counts
            .iter()
            .zip(&self.exit)
            .map(|(&c, e)| c as f64 * e)
            .sum();
        if total <= 0.0 {
            return None;
        }
        let tau = stream.exponential() / total;
        let mut target = stream.uniform() * total;
        let mut last = None;
        for (i, reactions) in self.out.iter().enumerate() {
            let c = counts[i] as f64;
            if c == 0.0 {
                continue;
            }
            for &(j, rate) in reactions {
                let a = c * rate;
                last = Some((i, j));
                if target < a {
                    return Some((t + tau, i, j));
                }
                target -= a;
            }
        }
        // Round-off left a sliver of `target`: take the last admissible reaction.
        last.map(|(i, j)| (t + tau, i, j))
    }
}

fn initial_counts(network: &ReactionNetwork, n: u64, x0: &SimplexState) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    if x0.d() != network.d() {
        return Err(Error::InvalidState(format!(
            "state has {} coordinates, network has {}",
            x0.d(),
            network.d()
        )));
    }
    x0.to_counts(n)
}

/// Gillespie's direct method with propensities `Q_ij C_i`.
pub fn simulate_ssa(
    network: &ReactionNetwork,
    n: u64,
    x0: &SimplexState,
    t_end: f64,
    stream: StreamId,
) -> Result<JumpTrajectory> {
    if !(t_end >= 0.0) {
        return Err(Error::Domain(format!(
            "t_end must be nonnegative, got {t_end}"
        )));
    }
    let mut counts = initial_counts(network, n, x0)?;
    let table = ReactionTable::new(network);
    let mut rng = Stream::new(stream);
    let mut traj = JumpTrajectory {
        n,
        times: vec![0.0],
        counts: vec![counts.clone()],
    };
    if t_end == 0.0 {
        return Ok(traj);
    }
    let mut t = 0.0;
    while let Some((next, i, j)) = table.next_jump(&counts, t, &mut rng) {
        if next >= t_end {
            break;
        }
        counts[i] -= 1;
        counts[j] += 1;
        t = next;
        traj.times.push(t);
        traj.counts.push(counts.clone());
    }
    traj.times.push(t_end);
    traj.counts.push(counts);
    Ok(traj)
}

/// Counts at each of the increasing `times`, without storing the path.
pub fn simulate_ssa_sampled(
    network: &ReactionNetwork,
    n: u64,
    x0: &SimplexState,
    times: &[f64],
    stream: StreamId,
) -> Result<Vec<Vec<u64>>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Domain(
            "sample times must be nonnegative and nondecreasing".into(),
        ));
    }
    let mut counts = initial_counts(network, n, x0)?;
    let table = ReactionTable::new(network);
    let mut rng = Stream::new(stream);
    let mut samples = Vec::with_capacity(times.len());
    let mut pending = table.next_jump(&counts, 0.0, &mut rng);
    for &ts in times {
        while let Some((next, i, j)) = pending {
            if next > ts {
                break;
            }
            counts[i] -= 1;
            counts[j] += 1;
            pending = table.next_jump(&counts, next, &mut rng);
        }
        samples.push(counts.clone());
    }
    Ok(samples)
}

/// Per-path sampled counts for `n_paths` independent trajectories; path `k`
/// uses stream `(seed, SSA, k)`. Results are in path order.
pub fn ssa_ensemble(
    network: &ReactionNetwork,
    n: u64,
    x0: &SimplexState,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<u64>>>> {
    (0..n_paths)
        .into_par_iter()
        .map(|k| {
            simulate_ssa_sampled(
                network,
                n,
                x0,
                times,
                StreamId::new(seed, tag::SSA, k as u64),
            )
        })
        .collect()
}

/// Ensemble mean of `X(t)` at each sample time.
pub fn ssa_ensemble_mean(
    network: &ReactionNetwork,
    n: u64,
    x0: &SimplexState,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let paths = ssa_ensemble(network, n, x0, times, n_paths, seed)?;
    let d = network.d();
    let mut mean = vec![vec![0.0; d]; times.len()];
    for path in &paths {
        for (m, sample) in mean.iter_mut().zip(path) {
            for (v, &c) in m.iter_mut().zip(sample) {
                *v += c as f64 / n as f64;
            }
        }
    }
    let scale = 1.0 / n_paths as f64;
    mean.iter_mut().flatten().for_each(|v| *v *= scale);
    Ok(mean)
}

/// `C(a, b)`, saturating at `u128::MAX`.
fn binomial(a: u64, b: u64) -> u128 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for k in 0..b {
        acc = match acc.checked_mul((a - k) as u128) {
            Some(v) => v / (k + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// The multi-indices `ℓ ∈ ℕ^d` with `|ℓ| = N`, ranked colexicographically.
///
/// `ℓ` corresponds to the `(d-1)`-subset `c_k = ℓ_0 + ... + ℓ_{k-1} + k - 1`
/// of `{0, ..., N+d-2}`, whose colex rank is `Σ_k C(c_k, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    d: usize,
    n: u64,
    size: usize,
    // binom[k][c] = C(c, k) for 1 <= k <= d-1, c <= N+d-2
    binom: Vec<Vec<u64>>,
}

impl Lattice {
    pub fn new(d: usize, n: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("lattice needs d >= 2, got {d}")));
        }
        let size = binomial(n + d as u64 - 1, d as u64 - 1);
        if size > MAX_LATTICE_STATES {
            return Err(Error::LatticeTooLarge {
                size,
                limit: MAX_LATTICE_STATES,
            });
        }
        let top = n + d as u64 - 2;
        let binom = (0..d)
            .map(|k| {
                (0..=top)
                    .map(|c| binomial(c, k as u64).min(u64::MAX as u128) as u64)
                    .collect()
            })
            .collect();
        Ok(Self {
            d,
            n,
            size: size as usize,
            binom,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn rank(&self, ell: &[u64]) -> usize {
        debug_assert_eq!(ell.len(), self.d);
        let mut rank = 0u64;
        let mut partial = 0u64;
        for k in 1..self.d {
            partial += ell[k - 1];
            rank += self.binom[k][(partial + k as u64 - 1) as usize];
        }
        rank as usize
    }

    pub fn unrank(&self, rank: usize) -> Vec<u64> {
        let mut r = rank as u64;
        let mut c = vec![0u64; self.d];
        let mut hi = self.n + self.d as u64 - 2;
        for k in (1..self.d).rev() {
            // Largest c with C(c, k) <= r.
            let mut v = hi;
            while self.binom[k][v as usize] > r {
                v -= 1;
            }
            c[k] = v;
            r -= self.binom[k][v as usize];
            hi = v.saturating_sub(1);
        }
        let mut ell = vec![0u64; self.d];
        let mut prev: i64 = -1;
        for k in 1..self.d {
            ell[k - 1] = (c[k] as i64 - prev - 1) as u64;
            prev = c[k] as i64;
        }
        ell[self.d - 1] = self.n - ell[..self.d - 1].iter().sum::<u64>();
        ell
    }

    /// All multi-indices in rank order.
    pub fn states(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        (0..self.size).map(|r| self.unrank(r))
    }

    pub fn contains(&self, ell: &[u64]) -> bool {
        ell.len() == self.d && ell.iter().sum::<u64>() == self.n
    }
}

/// A probability vector over a lattice, indexed by rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    lattice: Lattice,
    probs: Vec<f64>,
}

/// Tolerance on the total mass of a lattice distribution.
pub const LATTICE_MASS_TOLERANCE: f64 = 1e-12;

impl LatticeDistribution {
    pub fn new(lattice: Lattice, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != lattice.len() {
            return Err(Error::SupportMismatch(format!(
                "{} probabilities for {} states",
                probs.len(),
                lattice.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Domain(format!(
                "probability {p} is negative or not finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > LATTICE_MASS_TOLERANCE {
            return Err(Error::Domain(format!("probabilities sum to {total}")));
        }
        Ok(Self { lattice, probs })
    }

    pub fn delta(lattice: Lattice, ell: &[u64]) -> Result<Self> {
        if !lattice.contains(ell) {
            return Err(Error::InvalidState(format!(
                "{ell:?} is not on the lattice with N = {}",
                lattice.n()
            )));
        }
        let mut probs = vec![0.0; lattice.len()];
        probs[lattice.rank(ell)] = 1.0;
        Ok(Self { lattice, probs })
    }

    pub fn uniform(lattice: Lattice) -> Self {
        let m = lattice.len();
        Self {
            lattice,
            probs: vec![1.0 / m as f64; m],
        }
    }

    /// `N! Π p_i^{ℓ_i} / ℓ_i!`, evaluated in log space.
    pub fn multinomial(lattice: Lattice, p: &[f64]) -> Result<Self> {
        if p.len() != lattice.d() {
            return Err(Error::SupportMismatch(
                "multinomial weights have the wrong length".into(),
            ));
        }
        let log_fact = |k: u64| (1..=k).map(|v| (v as f64).ln()).sum::<f64>();
        let table: Vec<f64> = (0..=lattice.n()).map(log_fact).collect();
        let probs: Vec<f64> = lattice
            .states()
            .map(|ell| {
                let mut lp = table[lattice.n() as usize];
                for (&l, &pi) in ell.iter().zip(p) {
                    if l > 0 {
                        lp += l as f64 * pi.ln() - table[l as usize];
                    }
                }
                lp.exp()
            })
            .collect();
        let total: f64 = probs.iter().sum();
        Self::new(lattice, probs.into_iter().map(|v| v / total).collect())
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, ell: &[u64]) -> f64 {
        if self.lattice.contains(ell) {
            self.probs[self.lattice.rank(ell)]
        } else {
            0.0
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Law of `ℓ_i`.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.lattice.n() as usize + 1];
        for (r, &p) in self.probs.iter().enumerate() {
            out[self.lattice.unrank(r)[i] as usize] += p;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<u64>, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(r, &p)| (self.lattice.unrank(r), p))
    }
}

/// Sparse master-equation generator: transitions `(from, to, rate)`.
struct CmeGenerator {
    transitions: Vec<(u32, u32, f64)>,
    exit: Vec<f64>,
}

impl CmeGenerator {
    fn new(network: &ReactionNetwork, lattice: &Lattice) -> Self {
        let table = ReactionTable::new(network);
        let mut transitions = Vec::new();
        let mut exit = vec![0.0; lattice.len()];
        for (r, ell) in lattice.states().enumerate() {
            let mut next = ell.clone();
            for (i, reactions) in table.out.iter().enumerate() {
                if ell[i] == 0 {
                    continue;
                }
                for &(j, rate) in reactions {
                    next[i] -= 1;
                    next[j] += 1;
                    let a = rate * ell[i] as f64;
                    transitions.push((r as u32, lattice.rank(&next) as u32, a));
                    exit[r] += a;
                    next[i] += 1;
                    next[j] -= 1;
                }
            }
        }
        Self { transitions, exit }
    }

    /// `out = p G`, conservative transition by transition.
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(from, to, rate) in &self.transitions {
            let flow = rate * p[from as usize];
            out[from as usize] -= flow;
            out[to as usize] += flow;
        }
    }

    fn max_exit(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct CmeSolution {
    pub distribution: LatticeDistribution,
    pub steps: u64,
    /// Entries clipped from within `1e-14` below zero.
    pub clipped: u64,
    pub max_mass_error: f64,
}

/// Forward master equation by classical RK4 with fixed `dt`.
pub fn solve_cme(
    network: &ReactionNetwork,
    p0: &LatticeDistribution,
    t_end: f64,
    dt: f64,
) -> Result<CmeSolution> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Domain(format!(
            "need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let lattice = p0.lattice().clone();
    if lattice.d() != network.d() {
        return Err(Error::SupportMismatch(
            "lattice and network dimensions differ".into(),
        ));
    }
    let generator = CmeGenerator::new(network, &lattice);
    let limit = CME_STABILITY / generator.max_exit();
    if dt > limit {
        return Err(Error::UnstableTimestep { dt, limit });
    }
    let m = lattice.len();
    let mut p = p0.probs().to_vec();
    let mut k = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let mut stage = vec![0.0; m];
    let steps = crate::geometry::flow::step_count(t_end, dt);
    let mut clipped = 0;
    let mut max_mass_error = 0.0_f64;
    let mut t = 0.0;
    for s in 0..steps {
        let tau = if s + 1 == steps { t_end - t } else { dt };
        generator.apply(&p, &mut k[0]);
        for (c, factor) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for r in 0..m {
                stage[r] = p[r] + factor * tau * k[c - 1][r];
            }
            generator.apply(&stage, &mut k[c]);
        }
        for r in 0..m {
            p[r] += tau / 6.0 * (k[0][r] + 2.0 * k[1][r] + 2.0 * k[2][r] + k[3][r]);
            if p[r] < 0.0 {
                if p[r] < -1e-14 {
                    return Err(Error::UnstableTimestep { dt, limit });
                }
                p[r] = 0.0;
                clipped += 1;
            }
        }
        max_mass_error = max_mass_error.max((p.iter().sum::<f64>() - 1.0).abs());
        t += tau;
    }
    let distribution = LatticeDistribution { lattice, probs: p };
    Ok(CmeSolution {
        distribution,
        steps,
        clipped,
        max_mass_error,
    })
}

/// Stationary law as the normalized null vector of the generator, by a dense
/// solve with one balance equation replaced by `Σ p = 1`.
pub fn cme_stationary(network: &ReactionNetwork, n: u64) -> Result<LatticeDistribution> {
    let lattice = Lattice::new(network.d(), n)?;
    let m = lattice.len();
    if m > MAX_DENSE_STATES {
        return Err(Error::LatticeTooLarge {
            size: m as u128,
            limit: MAX_DENSE_STATES as u128,
        });
    }
    let generator = CmeGenerator::new(network, &lattice);
    // Rows are balance equations: Σ_from p_from G[from, to] = 0.
    let mut a = crate::linalg::Matrix::zeros(m, m);
    for &(from, to, rate) in &generator.transitions {
        a[(to as usize, from as usize)] += rate;
        a[(from as usize, from as usize)] -= rate;
    }
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let mut rhs = vec![0.0; m];
    rhs[m - 1] = 1.0;
    let mut p = a.solve(&rhs)?;
    for v in p.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-12 {
                return Err(Error::NearSingular { value: *v });
            }
            *v = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    LatticeDistribution::new(lattice, p)
}

/// `ψ_h = -h log p`, `+∞` where `p = 0`.
pub fn wkb_transform(p: &LatticeDistribution, h: f64) -> Vec<f64> {
    p.probs()
        .iter()
        .map(|&v| if v > 0.0 { -h * v.ln() } else { f64::INFINITY })
        .collect()
}
