//! The change of variables `y = ψ(x)` taking the canonical two-point
//! diffusion `dX = (1/2) θ'(X) dt + sqrt(2θ(X)) dB` to the Wright-Fisher
//! diffusion `dY = γ (1/2 - Y) dt + sqrt(2γ Y (1 - Y)) dB`.
//!
//! `ψ` solves `sqrt(2θ) ψ' = sqrt(2γ ψ (1 - ψ))`, which integrates to
//! `B(ψ(x); 1/2, 1/2) = sqrt(γ) ∫_0^x θ^{-1/2}` and, since
//! `B(y; 1/2, 1/2) = 2 arcsin(sqrt(y))`, to `ψ(x) = sin²(π y(x) / 2)` with
//! `y(x)` the normalized arclength and `γ = (π / Z)²`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::fp::{Potential1D, ThetaProfile, WassersteinCoordinate};
use crate::langevin::{fold_unit, SdeConfig, TwoPointSde};
use crate::network::Trajectory;
use crate::rng::{tag, Stream, StreamId};
use crate::special::{incomplete_beta, kronrod_rule};
use crate::stats::{ks_two_sample, KsResult};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct WfTransform {
    coordinate: WassersteinCoordinate,
    gamma: f64,
}

pub fn build_transform(theta: &ThetaProfile) -> Result<WfTransform> {
    let coordinate = WassersteinCoordinate::new(theta)?;
    let gamma = (PI / coordinate.total_length()).powi(2);
    Ok(WfTransform { coordinate, gamma })
}

impl WfTransform {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn theta(&self) -> &ThetaProfile {
        self.coordinate.theta()
    }

    pub fn total_length(&self) -> f64 {
        self.coordinate.total_length()
    }

    pub fn psi(&self, x: f64) -> Result<f64> {
        let y = self.coordinate.y(x)?;
        Ok((0.5 * PI * y).sin().powi(2))
    }

    /// `ψ'(x) = (π/2) sin(π y) y'(x)` with `y' = θ^{-1/2} / Z`.
    pub fn psi_prime(&self, x: f64) -> Result<f64> {
        let y = self.coordinate.y(x)?;
        let dy = self.theta().theta(x).powf(-0.5) / self.total_length();
        Ok(0.5 * PI * (PI * y).sin() * dy)
    }

    /// Solves `ψ(x) = p` by bisection safeguarded Newton steps.
    pub fn psi_inverse(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("ψ⁻¹ needs p in [0, 1], got {p}")));
        }
        if p == 0.0 || p == 1.0 {
            return Ok(p);
        }
        let target = (2.0 / PI) * p.sqrt().asin() * self.total_length();
        let theta = self.theta();
        solve_monotone(
            |x| Ok(self.coordinate.arclength(x)? - target),
            |x| theta.theta(x).powf(-0.5),
        )
    }

    /// `ψ(x)` by inverting `B(ψ; 1/2, 1/2) = sqrt(γ) ∫_0^x θ^{-1/2}` with the
    /// series incomplete beta function.
    pub fn psi_incomplete_beta(&self, x: f64) -> Result<f64> {
        let target = self.gamma.sqrt() * self.coordinate.arclength(x)?;
        if target <= 0.0 {
            return Ok(0.0);
        }
        if target >= PI {
            return Ok(1.0);
        }
        solve_monotone(
            |p| Ok(incomplete_beta(p, 0.5, 0.5)? - target),
            |p| 1.0 / (p * (1.0 - p)).sqrt(),
        )
    }

    /// `sqrt(2θ) ψ' - sqrt(2γ ψ (1 - ψ))` with `ψ'` by central differences.
    pub fn relation_residual(&self, x: f64) -> Result<f64> {
        let step = 1e-5 * x.min(1.0 - x);
        let dpsi = (self.psi(x + step)? - self.psi(x - step)?) / (2.0 * step);
        let p = self.psi(x)?;
        Ok((2.0 * self.theta().theta(x)).sqrt() * dpsi - (2.0 * self.gamma * p * (1.0 - p)).sqrt())
    }

    /// `∫ |π(x) - π̃(ψ(x)) ψ'(x)| dx` where `π = θ^{-1/2} / Z` and `π̃` is the
    /// arcsine density, with `ψ'` by central differences. Fixed composite
    /// Kronrod rule in `x = sin²(u)`.
    pub fn stationary_pushforward_l1(&self) -> Result<f64> {
        let z = self.total_length();
        let integrand = |x: f64| -> Result<f64> {
            let pi_x = self.theta().theta(x).powf(-0.5) / z;
            let step = 1e-4 * x.min(1.0 - x);
            let dpsi = (self.psi(x + step)? - self.psi(x - step)?) / (2.0 * step);
            let p = self.psi(x)?;
            let arcsine = 1.0 / (PI * (p * (1.0 - p)).sqrt());
            Ok((pi_x - arcsine * dpsi).abs())
        };
        let rule = kronrod_rule();
        let panels = 64;
        let width = 0.5 * PI / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let center = (k as f64 + 0.5) * width;
            for &(node, weight) in &rule {
                let u = center + 0.5 * width * node;
                let x = u.sin().powi(2);
                if x <= 0.0 || x >= 1.0 {
                    continue;
                }
                total += 0.5 * width * weight * integrand(x)? * (2.0 * u).sin();
            }
        }
        Ok(total)
    }
}

/// Root of an increasing function on `[0, 1]` given its derivative.
fn solve_monotone(f: impl Fn(f64) -> Result<f64>, df: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = 0.5;
    for _ in 0..200 {
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / df(x);
        let next = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let moved = (next - x).abs();
        x = next;
        if hi - lo < 1e-15 || moved < 1e-16 {
            break;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy)]
pub struct WfConfig {
    pub dt: f64,
    pub t_end: f64,
    pub noise: bool,
    pub stream: StreamId,
}

impl WfConfig {
    pub fn new(dt: f64, t_end: f64, seed: u64) -> Self {
        Self {
            dt,
            t_end,
            noise: true,
            stream: StreamId::new(seed, tag::WRIGHT_FISHER, 0),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_end >= self.dt) {
            return Err(Error::Config(format!(
                "need 0 < dt <= t_end, got dt = {}, t_end = {}",
                self.dt, self.t_end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub reflection_count: u64,
}

impl WfTrajectory {
    pub fn to_trajectory(&self) -> Trajectory {
        let mut traj = Trajectory::default();
        for (t, y) in self.times.iter().zip(&self.values) {
            traj.push(*t, &[*y]);
        }
        traj
    }
}

fn wf_step(gamma: f64, y: &mut f64, dt: f64, noise: bool, rng: &mut Stream) -> u32 {
    let mut next = *y + gamma * (0.5 - *y) * dt;
    if noise {
        next += (2.0 * gamma * (*y * (1.0 - *y)).max(0.0) * dt).sqrt() * rng.normal();
    }
    let r = fold_unit(&mut next);
    *y = next.clamp(0.0, 1.0);
    r
}

/// Euler-Maruyama with mirror reflection at `0` and `1`.
pub fn simulate_wf(gamma: f64, y0: f64, cfg: &WfConfig) -> Result<WfTrajectory> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&y0) || !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "need y0 in [0, 1] and γ > 0, got y0 = {y0}, γ = {gamma}"
        )));
    }
    let steps = crate::geometry::flow::step_count(cfg.t_end, cfg.dt);
    let mut rng = Stream::new(cfg.stream);
    let mut y = y0;
    let mut out = WfTrajectory {
        times: vec![0.0],
        values: vec![y0],
        reflection_count: 0,
    };
    for n in 0..steps {
        let dt = if n + 1 == steps {
            cfg.t_end - n as f64 * cfg.dt
        } else {
            cfg.dt
        };
        out.reflection_count += u64::from(wf_step(gamma, &mut y, dt, cfg.noise, &mut rng));
        out.times.push(if n + 1 == steps {
            cfg.t_end
        } else {
            (n + 1) as f64 * cfg.dt
        });
        out.values.push(y);
    }
    Ok(out)
}

/// Values of `n_paths` independent paths at `t_end`; path `p` uses
/// `cfg.stream.with_index(p)`.
pub fn wf_ensemble(gamma: f64, y0: f64, cfg: &WfConfig, n_paths: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&y0) || !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "need y0 in [0, 1] and γ > 0, got y0 = {y0}, γ = {gamma}"
        )));
    }
    let steps = crate::geometry::flow::step_count(cfg.t_end, cfg.dt);
    Ok((0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = Stream::new(cfg.stream.with_index(p as u64));
            let mut y = y0;
            for n in 0..steps {
                let dt = if n + 1 == steps {
                    cfg.t_end - n as f64 * cfg.dt
                } else {
                    cfg.dt
                };
                wf_step(gamma, &mut y, dt, cfg.noise, &mut rng);
            }
            y
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct PushforwardReport {
    pub ks: KsResult,
    pub passed: bool,
    /// `ψ(X_t)` per path.
    pub transformed: Vec<f64>,
    /// `Y_t` per path.
    pub wright_fisher: Vec<f64>,
}

/// Simulates the canonical diffusion (`V = 0`, `ωh = 1`) from `x0` and the
/// Wright-Fisher diffusion from `ψ(x0)`, and compares `ψ(X_t)` with `Y_t`
/// by a two-sample KS test at the 1% level.
pub fn pushforward_check(
    transform: &WfTransform,
    x0: f64,
    n_paths: usize,
    t: f64,
    dt: f64,
    seed: u64,
) -> Result<PushforwardReport> {
    let sde = TwoPointSde {
        theta: transform.theta().clone(),
        potential: Potential1D::zero(),
        omega: 1.0,
    };
    let mut cfg = SdeConfig::new(1.0, dt, t, crate::langevin::NoiseForm::Eigen, seed);
    cfg.potential = crate::geometry::operators::Potential::Zero;
    let ensemble = sde.ensemble(x0, &cfg, n_paths, &[t])?;
    let transformed = ensemble
        .coordinate(0, 0)
        .iter()
        .map(|&x| transform.psi(x))
        .collect::<Result<Vec<_>>>()?;
    let wright_fisher = wf_ensemble(
        transform.gamma(),
        transform.psi(x0)?,
        &WfConfig::new(dt, t, seed),
        n_paths,
    )?;
    let ks = ks_two_sample(&transformed, &wright_fisher)?;
    Ok(PushforwardReport {
        ks,
        passed: ks.passes_1pct(),
        transformed,
        wright_fisher,
    })
}
