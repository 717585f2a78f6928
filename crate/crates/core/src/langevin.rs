//! The Wasserstein Langevin equation on the simplex,
//!
//! ```text
//! dX = (-K ∇ψ̂ + h ∇·K) dt + sqrt(2h) σ dB,    ψ̂ = ψ - (h/2) log|g|,
//! ```
//!
//! integrated by Euler-Maruyama with eigen-noise `σ σᵀ = K` or
//! antisymmetric edge noise, plus the reduced two-point equation on `[0, 1]`.

use rayon::prelude::*;

use crate::fp::{Potential1D, ThetaProfile};
use crate::geometry::derivatives::{divergence_k, grad_log_det_g, log_det_g, DerivativeScheme};
use crate::geometry::local::LocalGeometry;
use crate::geometry::mean::MeanFunction;
use crate::geometry::onsager::{free_energy_gradient, free_energy_value};
use crate::geometry::operators::Potential;
use crate::network::{ReactionNetwork, SimplexState, Trajectory};
use crate::rng::{tag, Stream, StreamId};
use crate::stats::{Histogram, Moments};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseForm {
    #[default]
    Eigen,
    Edge,
}

impl NoiseForm {
    pub fn tag(self) -> u16 {
        match self {
            NoiseForm::Eigen => tag::SDE_EIGEN,
            NoiseForm::Edge => tag::SDE_EDGE,
        }
    }
}

/// Successive reflections tried for `d >= 3` before a step is declared lost.
pub const MAX_REFLECTIONS: u32 = 64;

#[derive(Debug, Clone)]
pub struct SdeConfig {
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub noise_form: NoiseForm,
    pub reflection: bool,
    pub stream: StreamId,
    pub potential: Potential,
    /// Include the `h ∇·K` drift.
    pub divergence_drift: bool,
    /// Include the Brownian increment.
    pub noise: bool,
    pub scheme: DerivativeScheme,
    /// Store every `record_every`-th step (the last step is always stored).
    pub record_every: usize,
}

impl SdeConfig {
    pub fn new(h: f64, dt: f64, t_end: f64, noise_form: NoiseForm, seed: u64) -> Self {
        Self {
            h,
            dt,
            t_end,
            noise_form,
            reflection: true,
            stream: StreamId::new(seed, noise_form.tag(), 0),
            potential: Potential::FreeEnergy,
            divergence_drift: true,
            noise: true,
            scheme: DerivativeScheme::Analytic,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!(
                "h must be nonnegative, got {}",
                self.h
            )));
        }
        if !(self.dt > 0.0 && self.t_end >= self.dt) {
            return Err(Error::Config(format!(
                "need 0 < dt <= t_end, got dt = {}, t_end = {}",
                self.dt, self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        crate::geometry::flow::step_count(self.t_end, self.dt)
    }

    fn step_size(&self, n: u64, steps: u64) -> f64 {
        if n + 1 == steps {
            self.t_end - n as f64 * self.dt
        } else {
            self.dt
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeTrajectory {
    pub trajectory: Trajectory,
    pub reflection_count: u64,
    pub steps: u64,
}

/// `ψ̂ = ψ - (h/2) log|g|` and its gradient (`∇ log|g|` projected onto the
/// tangent space).
pub fn effective_potential(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x: &SimplexState,
    h: f64,
    scheme: DerivativeScheme,
) -> Result<(f64, Vec<f64>)> {
    if !x.is_interior() {
        return Err(Error::BoundarySingular(
            "effective potential needs an interior state".into(),
        ));
    }
    let x = x.as_slice();
    let mut value = free_energy_value(network, mf, x)?;
    let mut grad = free_energy_gradient(network, mf, x)?;
    if h != 0.0 {
        value -= 0.5 * h * log_det_g(network, mf, x)?;
        let glog = grad_log_det_g(network, mf, x, scheme)?;
        grad.iter_mut()
            .zip(&glog)
            .for_each(|(g, l)| *g -= 0.5 * h * l);
    }
    Ok((value, grad))
}

/// Per-path state of the simplex integrator. Buffers are reused across steps.
struct SimplexStepper<'a> {
    network: &'a ReactionNetwork,
    cfg: &'a SdeConfig,
    lg: LocalGeometry,
    edges: Vec<(usize, usize)>,
    grad: Vec<f64>,
    drift: Vec<f64>,
    next: Vec<f64>,
    rng: Stream,
}

impl<'a> SimplexStepper<'a> {
    fn new(
        network: &'a ReactionNetwork,
        mf: &MeanFunction,
        cfg: &'a SdeConfig,
        stream: StreamId,
    ) -> Result<Self> {
        let d = network.d();
        if cfg.potential == Potential::FreeEnergy && cfg.scheme == DerivativeScheme::Analytic {
            // Fails early for means without an energy.
            free_energy_gradient(network, mf, network.x_stat())?;
        }
        Ok(Self {
            network,
            cfg,
            lg: LocalGeometry::new(network, mf),
            edges: network.edges(),
            grad: vec![0.0; d],
            drift: vec![0.0; d],
            next: vec![0.0; d],
            rng: Stream::new(stream),
        })
    }

    fn compute_drift(&mut self, x: &[f64]) -> Result<()> {
        let cfg = self.cfg;
        let h = cfg.h;
        match cfg.scheme {
            DerivativeScheme::Analytic => self.lg.set_point(x, true)?,
            DerivativeScheme::FiniteDifference => self.lg.set_point(x, false)?,
        }
        match cfg.potential {
            Potential::FreeEnergy => {
                let energy = self
                    .lg
                    .mean()
                    .energy()
                    .ok_or_else(|| Error::Unsupported("mean has no free energy".into()))?;
                for (i, g) in self.grad.iter_mut().enumerate() {
                    *g = energy.dphi(x[i] / self.network.x_stat()[i]);
                }
            }
            Potential::Zero => self.grad.iter_mut().for_each(|g| *g = 0.0),
        }
        if h != 0.0 {
            match cfg.scheme {
                DerivativeScheme::Analytic => {
                    let glog = self.lg.compute_grad_log_g()?;
                    self.grad
                        .iter_mut()
                        .zip(glog)
                        .for_each(|(g, l)| *g -= 0.5 * h * l);
                }
                DerivativeScheme::FiniteDifference => {
                    let glog = grad_log_det_g(self.network, self.lg.mean(), x, cfg.scheme)?;
                    self.grad
                        .iter_mut()
                        .zip(&glog)
                        .for_each(|(g, l)| *g -= 0.5 * h * l);
                }
            }
        }
        self.lg.apply_k(&self.grad, &mut self.drift);
        self.drift.iter_mut().for_each(|v| *v = -*v);
        if cfg.divergence_drift && h != 0.0 {
            match cfg.scheme {
                DerivativeScheme::Analytic => {
                    self.drift
                        .iter_mut()
                        .zip(self.lg.divergence())
                        .for_each(|(b, v)| *b += h * v);
                }
                DerivativeScheme::FiniteDifference => {
                    let div = divergence_k(self.network, self.lg.mean(), x, cfg.scheme)?;
                    self.drift
                        .iter_mut()
                        .zip(&div)
                        .for_each(|(b, v)| *b += h * v);
                }
            }
        }
        Ok(())
    }

    /// One Euler-Maruyama step from `x` (at time `t`) into `x`. Returns the
    /// number of reflections applied.
    fn step(&mut self, x: &mut [f64], t: f64, dt: f64) -> Result<u32> {
        let d = x.len();
        self.compute_drift(x)?;
        for i in 0..d {
            self.next[i] = x[i] + self.drift[i] * dt;
        }
        let cfg = self.cfg;
        if cfg.noise && cfg.h > 0.0 {
            let scale = (2.0 * cfg.h * dt).sqrt();
            match cfg.noise_form {
                NoiseForm::Eigen => {
                    let (lambdas, vectors) = self.lg.compute_eigen()?;
                    for (l, &lambda) in lambdas.iter().enumerate() {
                        let amp = scale * lambda.sqrt() * self.rng.normal();
                        for i in 0..d {
                            self.next[i] += amp * vectors[(i, l)];
                        }
                    }
                }
                NoiseForm::Edge => {
                    let k = self.lg.k();
                    for &(i, j) in &self.edges {
                        let b = scale * k[(i, j)].abs().sqrt() * self.rng.normal();
                        self.next[i] += b;
                        self.next[j] -= b;
                    }
                }
            }
        }
        let excess = (self.next.iter().sum::<f64>() - 1.0) / d as f64;
        self.next.iter_mut().for_each(|v| *v -= excess);
        let reflections = if cfg.reflection {
            reflect(&mut self.next)
        } else {
            0
        };
        if self.next.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::StepLeftSimplex { t: t + dt });
        }
        x.copy_from_slice(&self.next);
        Ok(reflections)
    }
}

/// Mirrors negative coordinates and rescales the others so the sum stays
/// one, repeated until the state is nonnegative or `MAX_REFLECTIONS` is
/// reached. For `d = 2` the rule is mirror reflection at both ends and is
/// applied in closed form.
fn reflect(x: &mut [f64]) -> u32 {
    if x.len() == 2 {
        let count = fold_unit(&mut x[0]);
        x[1] = 1.0 - x[0];
        return count;
    }
    let mut count = 0;
    while count < MAX_REFLECTIONS && x.iter().any(|&v| v < 0.0) {
        count += 1;
        let others: f64 = x.iter().filter(|&&v| v >= 0.0).sum();
        let flipped: f64 = x.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
        let shrink = if others > 0.0 {
            (others + flipped - 1.0) / others
        } else {
            0.0
        };
        for v in x.iter_mut() {
            *v = if *v < 0.0 { -*v } else { *v - shrink * *v };
        }
    }
    count
}

/// Euler-Maruyama path from `x0`.
pub fn simulate_sde(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x0: &SimplexState,
    cfg: &SdeConfig,
) -> Result<SdeTrajectory> {
    cfg.validate()?;
    network.require_detailed_balance()?;
    if !x0.is_interior() {
        return Err(Error::BoundarySingular(
            "SDE needs an interior initial state".into(),
        ));
    }
    let mut stepper = SimplexStepper::new(network, mf, cfg, cfg.stream)?;
    let mut x = x0.as_slice().to_vec();
    let mut traj = Trajectory::default();
    traj.push(0.0, &x);
    let steps = cfg.steps();
    let mut reflection_count = 0;
    let mut t = 0.0;
    for n in 0..steps {
        let dt = cfg.step_size(n, steps);
        reflection_count += u64::from(stepper.step(&mut x, t, dt)?);
        t = if n + 1 == steps {
            cfg.t_end
        } else {
            (n + 1) as f64 * cfg.dt
        };
        if (n + 1) % cfg.record_every as u64 == 0 || n + 1 == steps {
            traj.push(t, &x);
        }
    }
    Ok(SdeTrajectory {
        trajectory: traj,
        reflection_count,
        steps,
    })
}

/// States of one path at the given times, which are rounded to the step grid.
fn sample_path(
    mut advance: impl FnMut(&mut [f64], f64, f64) -> Result<u32>,
    x0: &[f64],
    cfg: &SdeConfig,
    sample_steps: &[u64],
) -> Result<(Vec<Vec<f64>>, u64)> {
    let steps = cfg.steps();
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(sample_steps.len());
    let mut reflections = 0;
    let mut n = 0;
    for &target in sample_steps {
        while n < target.min(steps) {
            let dt = cfg.step_size(n, steps);
            reflections += u64::from(advance(&mut x, n as f64 * cfg.dt, dt)?);
            n += 1;
        }
        out.push(x.clone());
    }
    Ok((out, reflections))
}

fn sample_steps(cfg: &SdeConfig, times: &[f64]) -> Result<Vec<u64>> {
    if times.windows(2).any(|w| w[1] < w[0])
        || times
            .iter()
            .any(|&t| !(0.0..=cfg.t_end * (1.0 + 1e-12)).contains(&t))
    {
        return Err(Error::Config(
            "sample times must be nondecreasing and inside [0, t_end]".into(),
        ));
    }
    let steps = cfg.steps();
    Ok(times
        .iter()
        .map(|&t| {
            if t >= cfg.t_end {
                steps
            } else {
                ((t / cfg.dt).round() as u64).min(steps)
            }
        })
        .collect())
}

/// Path-parallel ensemble summary.
#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    /// `samples[k][p]` is the state of path `p` at `times[k]`.
    pub samples: Vec<Vec<Vec<f64>>>,
    pub reflection_count: u64,
    pub steps_per_path: u64,
}

impl EnsembleSummary {
    /// Coordinate `i` of every path at `times[k]`.
    pub fn coordinate(&self, k: usize, i: usize) -> Vec<f64> {
        self.samples[k].iter().map(|x| x[i]).collect()
    }

    pub fn histogram(&self, k: usize, i: usize, bins: usize) -> Result<Histogram> {
        Histogram::from_samples(0.0, 1.0, bins, &self.coordinate(k, i))
    }

    pub fn moments(&self, k: usize, i: usize) -> Moments {
        Moments::of(&self.coordinate(k, i))
    }

    /// Fraction of steps that needed a reflection.
    pub fn reflection_rate(&self) -> f64 {
        let paths = self.samples.first().map_or(0, |s| s.len()) as f64;
        self.reflection_count as f64 / (paths * self.steps_per_path as f64).max(1.0)
    }
}

fn collect_ensemble(
    results: Vec<Result<(Vec<Vec<f64>>, u64)>>,
    times: &[f64],
    steps: u64,
) -> Result<EnsembleSummary> {
    let mut samples = vec![Vec::with_capacity(results.len()); times.len()];
    let mut reflection_count = 0;
    for r in results {
        let (path, refl) = r?;
        reflection_count += refl;
        for (k, x) in path.into_iter().enumerate() {
            samples[k].push(x);
        }
    }
    Ok(EnsembleSummary {
        times: times.to_vec(),
        samples,
        reflection_count,
        steps_per_path: steps,
    })
}

/// `n_paths` independent paths; path `p` draws from `cfg.stream.with_index(p)`.
pub fn simulate_ensemble(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x0: &SimplexState,
    cfg: &SdeConfig,
    n_paths: usize,
    times: &[f64],
) -> Result<EnsembleSummary> {
    cfg.validate()?;
    network.require_detailed_balance()?;
    if n_paths == 0 {
        return Err(Error::Config("n_paths must be at least 1".into()));
    }
    if !x0.is_interior() {
        return Err(Error::BoundarySingular(
            "SDE needs an interior initial state".into(),
        ));
    }
    let targets = sample_steps(cfg, times)?;
    let results: Vec<_> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut stepper =
                SimplexStepper::new(network, mf, cfg, cfg.stream.with_index(p as u64))?;
            sample_path(
                |x, t, dt| stepper.step(x, t, dt),
                x0.as_slice(),
                cfg,
                &targets,
            )
        })
        .collect();
    collect_ensemble(results, times, cfg.steps())
}

/// The reduced equation for `x = X_1` on a two-species network,
///
/// ```text
/// dX = (-ωθ V' + (h/2) ωθ') dt + sqrt(2hωθ) dB,
/// ```
///
/// with mirror reflection at `0` and `1`.
#[derive(Debug, Clone)]
pub struct TwoPointSde {
    pub theta: ThetaProfile,
    pub potential: Potential1D,
    pub omega: f64,
}

impl TwoPointSde {
    /// `θ = 2 sqrt(x (1 - x))`, `V = 0`, `ω = 1/2` (so `ωh = 1` at `h = 2`).
    pub fn canonical() -> Self {
        Self {
            theta: ThetaProfile::canonical(),
            potential: Potential1D::zero(),
            omega: 0.5,
        }
    }

    pub fn from_network(
        network: &ReactionNetwork,
        mf: &MeanFunction,
        potential: Potential,
    ) -> Result<Self> {
        let theta = ThetaProfile::from_network(network, mf)?;
        let omega = 0.5 * (network.omega()[(0, 1)] + network.omega()[(1, 0)]);
        let potential = match potential {
            Potential::FreeEnergy => Potential1D::free_energy(network, mf)?,
            Potential::Zero => Potential1D::zero(),
        };
        Ok(Self {
            theta,
            potential,
            omega,
        })
    }

    #[inline]
    pub fn drift(&self, x: f64, h: f64, divergence_drift: bool) -> f64 {
        let th = self.theta.theta(x);
        let mut b = -self.omega * th * self.potential.derivative(x);
        if h != 0.0 {
            // -ωθ (h/2) θ'/θ from the volume term, + hωθ' from ∇·K.
            let tp = self.theta.theta_prime(x);
            b -= 0.5 * h * self.omega * tp;
            if divergence_drift {
                b += h * self.omega * tp;
            }
        }
        b
    }

    fn step(&self, x: &mut f64, cfg: &SdeConfig, rng: &mut Stream, t: f64, dt: f64) -> Result<u32> {
        let mut next = *x + self.drift(*x, cfg.h, cfg.divergence_drift) * dt;
        if cfg.noise && cfg.h > 0.0 {
            next += (2.0 * cfg.h * self.omega * self.theta.theta(*x) * dt).sqrt() * rng.normal();
        }
        let reflections = if cfg.reflection {
            fold_unit(&mut next)
        } else {
            0
        };
        if !(next > 0.0 && next < 1.0) {
            return Err(Error::StepLeftSimplex { t: t + dt });
        }
        *x = next;
        Ok(reflections)
    }

    pub fn simulate(&self, x0: f64, cfg: &SdeConfig) -> Result<SdeTrajectory> {
        cfg.validate()?;
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(Error::BoundarySingular(format!(
                "two-point SDE needs 0 < x0 < 1, got {x0}"
            )));
        }
        let mut rng = Stream::new(cfg.stream);
        let mut x = x0;
        let mut traj = Trajectory::default();
        traj.push(0.0, &[x, 1.0 - x]);
        let steps = cfg.steps();
        let mut reflection_count = 0;
        for n in 0..steps {
            let dt = cfg.step_size(n, steps);
            reflection_count +=
                u64::from(self.step(&mut x, cfg, &mut rng, n as f64 * cfg.dt, dt)?);
            if (n + 1) % cfg.record_every as u64 == 0 || n + 1 == steps {
                let t = if n + 1 == steps {
                    cfg.t_end
                } else {
                    (n + 1) as f64 * cfg.dt
                };
                traj.push(t, &[x, 1.0 - x]);
            }
        }
        Ok(SdeTrajectory {
            trajectory: traj,
            reflection_count,
            steps,
        })
    }

    /// Ensemble of `X_1`; states are stored as `(x, 1 - x)`.
    pub fn ensemble(
        &self,
        x0: f64,
        cfg: &SdeConfig,
        n_paths: usize,
        times: &[f64],
    ) -> Result<EnsembleSummary> {
        cfg.validate()?;
        if n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(Error::BoundarySingular(format!(
                "two-point SDE needs 0 < x0 < 1, got {x0}"
            )));
        }
        let targets = sample_steps(cfg, times)?;
        let results: Vec<_> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = Stream::new(cfg.stream.with_index(p as u64));
                let advance = |x: &mut [f64], t: f64, dt: f64| {
                    let r = self.step(&mut x[0], cfg, &mut rng, t, dt)?;
                    x[1] = 1.0 - x[0];
                    Ok(r)
                };
                sample_path(advance, &[x0, 1.0 - x0], cfg, &targets)
            })
            .collect();
        collect_ensemble(results, times, cfg.steps())
    }
}

/// Folds `x` into `[0, 1]` by mirror reflection at the ends (a triangle
/// wave, so any overshoot is handled). Returns the number of reflections.
pub fn fold_unit(x: &mut f64) -> u32 {
    if (0.0..=1.0).contains(x) {
        return 0;
    }
    let crossings = if *x < 0.0 {
        (-*x).floor() + 1.0
    } else {
        x.floor()
    };
    let y = x.rem_euclid(2.0);
    *x = if y > 1.0 { 2.0 - y } else { y };
    crossings.min(f64::from(u32::MAX)) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::flow::solve_gradient_flow;
    use crate::network::{build_network, random_detailed_balanced, QMatrix};

    fn symmetric_pair() -> ReactionNetwork {
        build_network(QMatrix::from_rates(&[vec![1.0], vec![1.0]]).unwrap()).unwrap()
    }

    #[test]
    fn reflection_rules() {
        let mut x = [-0.1, 1.1];
        assert_eq!(reflect(&mut x), 1);
        assert!((x[0] - 0.1).abs() < 1e-15 && (x[1] - 0.9).abs() < 1e-15);
        let mut x = [-0.1, 0.6, 0.5];
        reflect(&mut x);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-15 && x.iter().all(|&v| v > 0.0));
        let mut y = 1.3;
        assert_eq!(fold_unit(&mut y), 1);
        assert!((y - 0.7).abs() < 1e-15);
        let mut y = -2.5;
        fold_unit(&mut y);
        assert!((y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn effective_potential_reduces_at_zero_h() {
        let mut s = Stream::new(StreamId::new(71, tag::TEST, 0));
        let net = random_detailed_balanced(3, 0.5, &mut s).unwrap();
        let x = SimplexState::random_interior(3, 0.05, &mut s);
        let mf = MeanFunction::Logarithmic;
        let (v, g) = effective_potential(&net, &mf, &x, 0.0, DerivativeScheme::Analytic).unwrap();
        assert_eq!(v, free_energy_value(&net, &mf, x.as_slice()).unwrap());
        assert_eq!(g, free_energy_gradient(&net, &mf, x.as_slice()).unwrap());
        let half = SimplexState::new(vec![0.5, 0.5]).unwrap();
        let (_, g) = effective_potential(
            &symmetric_pair(),
            &mf,
            &half,
            0.3,
            DerivativeScheme::Analytic,
        )
        .unwrap();
        assert!((g[0] - g[1]).abs() < 1e-14);
    }

    #[test]
    fn sum_is_conserved_for_both_noise_forms() {
        let mut s = Stream::new(StreamId::new(72, tag::TEST, 0));
        let net = random_detailed_balanced(4, 0.6, &mut s).unwrap();
        let x0 = SimplexState::random_interior(4, 0.1, &mut s);
        for form in [NoiseForm::Eigen, NoiseForm::Edge] {
            let cfg = SdeConfig::new(0.02, 1e-3, 0.5, form, 9);
            let traj = simulate_sde(&net, &MeanFunction::Logarithmic, &x0, &cfg).unwrap();
            for x in &traj.trajectory.states {
                assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_limit_is_first_order() {
        let net = symmetric_pair();
        let x0 = SimplexState::new(vec![0.9, 0.1]).unwrap();
        let mf = MeanFunction::Logarithmic;
        let reference = solve_gradient_flow(&net, &mf, &x0, 1.0, 1e-4).unwrap();
        let exact = reference.last().unwrap().1[0];
        let error = |dt: f64| {
            let mut cfg = SdeConfig::new(0.0, dt, 1.0, NoiseForm::Eigen, 0);
            cfg.noise = false;
            let traj = simulate_sde(&net, &mf, &x0, &cfg).unwrap();
            (traj.trajectory.last().unwrap().1[0] - exact).abs()
        };
        let ratio = error(1e-2) / error(1e-3);
        assert!((ratio - 10.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn reduced_two_point_matches_simplex_path() {
        // Same stream, same normals: the reduced and full schemes coincide.
        let net = symmetric_pair();
        let mf = MeanFunction::Geometric;
        let mut cfg = SdeConfig::new(2.0, 1e-3, 0.2, NoiseForm::Eigen, 5);
        cfg.potential = Potential::Zero;
        let full =
            simulate_sde(&net, &mf, &SimplexState::new(vec![0.3, 0.7]).unwrap(), &cfg).unwrap();
        let reduced = TwoPointSde::from_network(&net, &mf, Potential::Zero)
            .unwrap()
            .simulate(0.3, &cfg)
            .unwrap();
        assert_eq!(full.trajectory.len(), reduced.trajectory.len());
        for (a, b) in full
            .trajectory
            .states
            .iter()
            .zip(&reduced.trajectory.states)
        {
            assert!((a[0] - b[0]).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn canonical_drift_is_half_theta_prime() {
        let sde = TwoPointSde::canonical();
        for &x in &[0.1, 0.4, 0.77] {
            let expect = 0.5 * sde.theta.theta_prime(x);
            assert!((sde.drift(x, 2.0, true) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn single_path_ensemble_matches_simulate() {
        let net = symmetric_pair();
        let x0 = SimplexState::new(vec![0.4, 0.6]).unwrap();
        let cfg = SdeConfig::new(0.1, 1e-3, 0.1, NoiseForm::Edge, 17);
        let traj = simulate_sde(&net, &MeanFunction::Logarithmic, &x0, &cfg).unwrap();
        let ens = simulate_ensemble(&net, &MeanFunction::Logarithmic, &x0, &cfg, 1, &[0.05, 0.1])
            .unwrap();
        assert_eq!(ens.samples[0][0], traj.trajectory.states[50]);
        assert_eq!(
            ens.samples[1][0].as_slice(),
            traj.trajectory.last().unwrap().1
        );
    }

    #[test]
    fn leaving_without_reflection_is_an_error() {
        let sde = TwoPointSde::canonical();
        let mut cfg = SdeConfig::new(2.0, 0.05, 5.0, NoiseForm::Eigen, 3);
        cfg.reflection = false;
        assert!(matches!(
            sde.simulate(0.01, &cfg),
            Err(Error::StepLeftSimplex { .. })
        ));
    }
}
