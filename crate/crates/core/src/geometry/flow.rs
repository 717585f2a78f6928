//! Deterministic dynamics: the Onsager gradient flow and the linear rate
//! equation.

use crate::geometry::local::LocalGeometry;
use crate::geometry::mean::MeanFunction;
use crate::geometry::onsager::free_energy_gradient;
use crate::network::{ReactionNetwork, SimplexState, Trajectory};
use crate::{Error, Result};

/// Maximum number of step halvings before a step is rejected outright.
pub const MAX_HALVINGS: u32 = 40;

/// `dx/dt = -K(x) ∇ψ(x)` by RK4. A step whose stages leave the open simplex
/// is retried with half the step, up to `MAX_HALVINGS` times. Every step is
/// recorded.
pub fn solve_gradient_flow(
    network: &ReactionNetwork,
    mf: &MeanFunction,
    x0: &SimplexState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    network.require_detailed_balance()?;
    if !x0.is_interior() {
        return Err(Error::BoundarySingular(
            "gradient flow needs an interior initial state".into(),
        ));
    }
    let mut lg = LocalGeometry::new(network, mf);
    let mut rhs = |x: &[f64], out: &mut [f64]| -> Result<()> {
        lg.set_point(x, false)?;
        let grad = free_energy_gradient(network, mf, x)?;
        lg.apply_k(&grad, out);
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    };
    integrate_rk4(&mut rhs, x0.as_slice(), t_end, dt, true)
}

/// `dx/dt = Qᵀ x` by RK4.
pub fn solve_linear_ode(
    network: &ReactionNetwork,
    x0: &SimplexState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let q = network.q();
    let d = network.d();
    let mut rhs = |x: &[f64], out: &mut [f64]| -> Result<()> {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..d).map(|i| q.rate(i, j) * x[i]).sum();
        }
        Ok(())
    };
    integrate_rk4(&mut rhs, x0.as_slice(), t_end, dt, false)
}

/// With `strict`, iterates must stay in the open simplex; otherwise only
/// nonnegativity is required.
fn integrate_rk4(
    rhs: &mut impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    strict: bool,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Domain(format!(
            "need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let d = x0.len();
    let mut traj = Trajectory::default();
    let mut x = x0.to_vec();
    let mut t = 0.0;
    traj.push(t, &x);
    let mut k = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    let mut stage = vec![0.0; d];
    let mut next = vec![0.0; d];
    let steps = step_count(t_end, dt);
    for n in 0..steps {
        let target = if n + 1 == steps {
            t_end
        } else {
            (n + 1) as f64 * dt
        };
        let mut h = target - t;
        let mut halvings = 0;
        // Sub-steps of size h until the target is reached.
        while t < target {
            h = h.min(target - t);
            match rk4_step(rhs, &x, h, strict, &mut k, &mut stage, &mut next) {
                Ok(true) => {
                    x.copy_from_slice(&next);
                    t = if target - t - h <= 1e-15 * target.max(1.0) {
                        target
                    } else {
                        t + h
                    };
                }
                Ok(false) | Err(Error::BoundarySingular(_)) => {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        return Err(Error::StepRejected { t });
                    }
                    h *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        traj.push(t, &x);
    }
    Ok(traj)
}

/// Number of steps of size `dt` covering `[0, t_end]`, the last one possibly
/// shortened.
pub fn step_count(t_end: f64, dt: f64) -> u64 {
    (t_end / dt - 1e-9).ceil().max(0.0) as u64
}

/// One classical RK4 step. Returns `false` if a stage or the result leaves
/// the admissible set.
fn rk4_step(
    rhs: &mut impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    x: &[f64],
    h: f64,
    strict: bool,
    k: &mut [Vec<f64>; 4],
    stage: &mut [f64],
    next: &mut [f64],
) -> Result<bool> {
    let inside = |v: &[f64]| v.iter().all(|&c| if strict { c > 0.0 } else { c >= 0.0 });
    rhs(x, &mut k[0])?;
    for (c, factor) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
        for i in 0..x.len() {
            stage[i] = x[i] + factor * h * k[c - 1][i];
        }
        if !inside(stage) {
            return Ok(false);
        }
        rhs(stage, &mut k[c])?;
    }
    for i in 0..x.len() {
        next[i] = x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    Ok(inside(next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::onsager::free_energy_value;
    use crate::network::{build_network, random_detailed_balanced, QMatrix};
    use crate::rng::{tag, Stream, StreamId};

    fn symmetric_pair() -> ReactionNetwork {
        build_network(QMatrix::from_rates(&[vec![1.0], vec![1.0]]).unwrap()).unwrap()
    }

    #[test]
    fn equilibrium_is_fixed() {
        let net = symmetric_pair();
        let x0 = SimplexState::new(vec![0.5, 0.5]).unwrap();
        let traj = solve_gradient_flow(&net, &MeanFunction::Logarithmic, &x0, 1.0, 0.01).unwrap();
        assert!(traj.states.iter().all(|x| (x[0] - 0.5).abs() < 1e-15));
    }

    #[test]
    fn two_point_relaxation_matches_exponential() {
        let net = symmetric_pair();
        let x0 = SimplexState::new(vec![0.99, 0.01]).unwrap();
        let traj = solve_gradient_flow(&net, &MeanFunction::Logarithmic, &x0, 1.0, 1e-3).unwrap();
        let (t, x) = traj.last().unwrap();
        assert_eq!(t, 1.0);
        let exact = 0.5 + 0.49 * (-2.0f64).exp();
        assert!((x[0] - exact).abs() < 1e-9);
    }

    #[test]
    fn kl_flow_equals_linear_ode() {
        let mut s = Stream::new(StreamId::new(51, tag::TEST, 0));
        for d in 2..=5 {
            let net = random_detailed_balanced(d, 0.5, &mut s).unwrap();
            let x0 = SimplexState::random_interior(d, 0.01, &mut s);
            let a = solve_gradient_flow(&net, &MeanFunction::Logarithmic, &x0, 2.0, 1e-3).unwrap();
            let b = solve_linear_ode(&net, &x0, 2.0, 1e-3).unwrap();
            assert_eq!(a.len(), b.len());
            for (xa, xb) in a.states.iter().zip(&b.states) {
                for (u, v) in xa.iter().zip(xb) {
                    assert!((u - v).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn free_energy_dissipates() {
        let mut s = Stream::new(StreamId::new(52, tag::TEST, 0));
        let net = random_detailed_balanced(4, 0.5, &mut s).unwrap();
        let x0 = SimplexState::random_interior(4, 0.001, &mut s);
        let traj = solve_gradient_flow(&net, &MeanFunction::Logarithmic, &x0, 3.0, 1e-2).unwrap();
        let energies: Vec<f64> = traj
            .states
            .iter()
            .map(|x| free_energy_value(&net, &MeanFunction::Logarithmic, x).unwrap())
            .collect();
        assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(traj
            .states
            .iter()
            .all(|x| (x.iter().sum::<f64>() - 1.0).abs() < 1e-13));
    }

    #[test]
    fn stiff_start_triggers_halving_not_failure() {
        let net = symmetric_pair();
        let x0 = SimplexState::new(vec![1.0 - 1e-9, 1e-9]).unwrap();
        let traj = solve_gradient_flow(&net, &MeanFunction::Logarithmic, &x0, 0.5, 0.1).unwrap();
        let (_, x) = traj.last().unwrap();
        assert!(x.iter().all(|&v| v > 0.0));
    }
}
