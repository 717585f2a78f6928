//! The two-point Fokker-Planck equation on `[0, 1]` with zero-flux
//! boundaries, its stationary law and its closed-form Green function.
//!
//! With `θ` the mean-function profile along the segment `(x, 1 - x)`:
//!
//! ```text
//! ∂_t p = hω ∂_x( θ^{1/2} e^{-V/h} ∂_x[ p e^{V/h} θ^{1/2} ] )
//! ```

use std::fmt;
use std::sync::Arc;

use crate::geometry::mean::MeanFunction;
use crate::geometry::onsager::{free_energy_gradient, free_energy_value};
use crate::network::ReactionNetwork;
use crate::special::{integrate, kronrod_rule, quad_singular, Certificate};
use crate::{Error, Result};

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum ProfileKind {
    Network { mf: MeanFunction, xs: [f64; 2] },
    Constant(f64),
    Custom { theta: Fn1, theta_prime: Fn1 },
}

/// `θ(x)` on `(0, 1)` with its derivative and the endpoint behaviour of
/// `θ^{-1/2}`.
#[derive(Clone)]
pub struct ThetaProfile {
    kind: ProfileKind,
    certificate: Certificate,
    symmetric: bool,
}

impl fmt::Debug for ThetaProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            ProfileKind::Network { mf, xs } => format!("Network({mf:?}, {xs:?})"),
            ProfileKind::Constant(c) => format!("Constant({c})"),
            ProfileKind::Custom { .. } => "Custom".into(),
        };
        f.debug_struct("ThetaProfile")
            .field("kind", &kind)
            .field("certificate", &self.certificate)
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

impl ThetaProfile {
    /// `θ(x) = θ(x / x^s_1, (1 - x) / x^s_2)` for a two-species network.
    pub fn from_network(network: &ReactionNetwork, mf: &MeanFunction) -> Result<Self> {
        if network.d() != 2 {
            return Err(Error::Domain(format!(
                "two-point profile needs d = 2, got {}",
                network.d()
            )));
        }
        let xs = [network.x_stat()[0], network.x_stat()[1]];
        let certificate = match mf {
            MeanFunction::Geometric => Certificate::SqrtEndpoint,
            _ => Certificate::LogEndpoint,
        };
        let symmetric = (xs[0] - xs[1]).abs() < 1e-14;
        Ok(Self {
            kind: ProfileKind::Network { mf: mf.clone(), xs },
            certificate,
            symmetric,
        })
    }

    /// `θ(x) = 2 sqrt(x (1 - x))`, the geometric mean on the symmetric pair.
    pub fn canonical() -> Self {
        Self {
            kind: ProfileKind::Network {
                mf: MeanFunction::Geometric,
                xs: [0.5, 0.5],
            },
            certificate: Certificate::SqrtEndpoint,
            symmetric: true,
        }
    }

    /// `θ(x) = 4 x (1 - x) / ln(x / (1 - x))`-type profile: the logarithmic
    /// mean on the symmetric pair.
    pub fn logarithmic() -> Self {
        Self {
            kind: ProfileKind::Network {
                mf: MeanFunction::Logarithmic,
                xs: [0.5, 0.5],
            },
            certificate: Certificate::LogEndpoint,
            symmetric: true,
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!(
                "constant profile needs c > 0, got {c}"
            )));
        }
        Ok(Self {
            kind: ProfileKind::Constant(c),
            certificate: Certificate::Smooth,
            symmetric: true,
        })
    }

    pub fn custom(
        theta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        theta_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        certificate: Certificate,
        symmetric: bool,
    ) -> Self {
        Self {
            kind: ProfileKind::Custom {
                theta: Arc::new(theta),
                theta_prime: Arc::new(theta_prime),
            },
            certificate,
            symmetric,
        }
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    #[inline]
    pub fn theta(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Network { mf, xs } => mf.theta_unchecked(x / xs[0], (1.0 - x) / xs[1]),
            ProfileKind::Constant(c) => *c,
            ProfileKind::Custom { theta, .. } => theta(x),
        }
    }

    #[inline]
    pub fn theta_prime(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Network { mf, xs } => {
                let (s, t) = (x / xs[0], (1.0 - x) / xs[1]);
                mf.dtheta_ds(s, t) / xs[0] - mf.dtheta_ds(t, s) / xs[1]
            }
            ProfileKind::Constant(_) => 0.0,
            ProfileKind::Custom { theta_prime, .. } => theta_prime(x),
        }
    }

    /// `∫_0^x θ^{-1/2}`, the two-point Wasserstein distance from `(0, 1)`
    /// to `(x, 1 - x)`.
    pub fn arclength(&self, x: f64) -> Result<f64> {
        let value = quad_singular(|r| self.theta(r).powf(-0.5), x, self.certificate)
            .map_err(|e| Error::NonIntegrableTheta(e.to_string()))?;
        if !value.is_finite() {
            return Err(Error::NonIntegrableTheta(format!(
                "arclength to {x} is not finite"
            )));
        }
        Ok(value)
    }

    /// Total length `Z = ∫_0^1 θ^{-1/2}`.
    pub fn total_length(&self) -> Result<f64> {
        self.arclength(1.0)
    }
}

/// A potential `V` on `[0, 1]` with its derivative.
#[derive(Clone)]
pub struct Potential1D {
    v: Fn1,
    dv: Fn1,
}

impl fmt::Debug for Potential1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Potential1D")
    }
}

impl Potential1D {
    pub fn zero() -> Self {
        Self {
            v: Arc::new(|_| 0.0),
            dv: Arc::new(|_| 0.0),
        }
    }

    pub fn new(
        v: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            v: Arc::new(v),
            dv: Arc::new(dv),
        }
    }

    /// `V(x) = ψ(x, 1 - x)` for the free energy of a two-species network.
    pub fn free_energy(network: &ReactionNetwork, mf: &MeanFunction) -> Result<Self> {
        if network.d() != 2 {
            return Err(Error::Domain("two-point potential needs d = 2".into()));
        }
        free_energy_value(network, mf, &[0.5, 0.5])?;
        let (n1, m1) = (network.clone(), mf.clone());
        let (n2, m2) = (network.clone(), mf.clone());
        Ok(Self {
            v: Arc::new(move |x| {
                free_energy_value(&n1, &m1, &[x, 1.0 - x]).unwrap_or(f64::INFINITY)
            }),
            dv: Arc::new(move |x| {
                free_energy_gradient(&n2, &m2, &[x, 1.0 - x])
                    .map(|g| g[0] - g[1])
                    .unwrap_or(f64::NAN)
            }),
        })
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.v)(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (self.dv)(x)
    }
}

/// Cell-centred density on `[0, 1]`: `p_m` approximates the density at
/// `(m + 1/2) / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid1D {
    values: Vec<f64>,
}

/// Tolerance on `Σ p_m / M = 1`.
pub const DENSITY_MASS_TOLERANCE: f64 = 1e-10;

impl DensityGrid1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("density grid needs at least one cell".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!(
                "density value {v} is negative or not finite"
            )));
        }
        let grid = Self { values };
        let mass = grid.mass();
        if (mass - 1.0).abs() > DENSITY_MASS_TOLERANCE {
            return Err(Error::Domain(format!("density has mass {mass}, not 1")));
        }
        Ok(grid)
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        let m = values.len() as f64;
        let mass: f64 = values.iter().sum::<f64>() / m;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Domain(format!(
                "cannot normalize density of mass {mass}"
            )));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Self::new(values)
    }

    /// Normalized point values of `f` at the cell centres.
    pub fn from_fn(cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::normalized((0..cells).map(|m| f(cell_center(m, cells))).collect())
    }

    pub fn uniform(cells: usize) -> Self {
        Self {
            values: vec![1.0; cells],
        }
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells())
            .map(|m| cell_center(m, self.cells()))
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.cells() as f64
    }

    /// `Σ |p_m - q_m| / M`.
    pub fn l1_distance(&self, other: &DensityGrid1D) -> Result<f64> {
        if self.cells() != other.cells() {
            return Err(Error::SupportMismatch(format!(
                "{} vs {} cells",
                self.cells(),
                other.cells()
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.cells() as f64)
    }

    /// `Σ p_m f(x_m) / M`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let m = self.cells();
        self.values
            .iter()
            .enumerate()
            .map(|(k, p)| p * f(cell_center(k, m)))
            .sum::<f64>()
            / m as f64
    }
}

#[inline]
pub fn cell_center(m: usize, cells: usize) -> f64 {
    (m as f64 + 0.5) / cells as f64
}

/// `π(x) ∝ e^{-V/h} θ^{-1/2}` at the cell centres, normalized.
pub fn stationary_density(
    theta: &ThetaProfile,
    v: &Potential1D,
    h: f64,
    cells: usize,
) -> Result<DensityGrid1D> {
    let values: Vec<f64> = (0..cells)
        .map(|m| {
            let x = cell_center(m, cells);
            (-v.value(x) / h).exp() * theta.theta(x).powf(-0.5)
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonIntegrableTheta(
            "stationary density is not finite on the grid".into(),
        ));
    }
    let total: f64 = values.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NonIntegrableTheta(
            "stationary density cannot be normalized".into(),
        ));
    }
    DensityGrid1D::normalized(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    #[default]
    ExplicitEuler,
    /// Heun's second-order method.
    Heun,
}

/// Stability constant `C` in `dt <= C Δx² / (hω max θ)`.
pub const FP_STABILITY: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct FpSolution {
    pub density: DensityGrid1D,
    pub snapshots: Vec<(f64, DensityGrid1D)>,
    pub steps: u64,
    /// Number of cell values clipped from slightly negative to zero.
    pub clipped: u64,
    /// Largest `|mass - 1|` seen over all steps.
    pub max_mass_error: f64,
}

/// Finite-volume operator for the flux form of the equation.
struct FvOperator {
    /// `hω A_{m+1/2} / Δx²` for the interior faces.
    face: Vec<f64>,
    /// `e^{V/h} θ^{1/2}` at the cell centres.
    b: Vec<f64>,
}

impl FvOperator {
    fn new(
        theta: &ThetaProfile,
        v: &Potential1D,
        h: f64,
        omega: f64,
        cells: usize,
    ) -> Result<Self> {
        let dx = 1.0 / cells as f64;
        let mut a = Vec::with_capacity(cells);
        let mut b = Vec::with_capacity(cells);
        for m in 0..cells {
            let x = cell_center(m, cells);
            let th = theta.theta(x);
            let vx = v.value(x);
            if !(th > 0.0 && th.is_finite() && vx.is_finite()) {
                return Err(Error::NonIntegrableTheta(format!(
                    "θ({x}) = {th}, V({x}) = {vx}"
                )));
            }
            a.push(th.sqrt() * (-vx / h).exp());
            b.push((vx / h).exp() * th.sqrt());
        }
        let face = a
            .windows(2)
            .map(|w| h * omega * (w[0] * w[1]).sqrt() / (dx * dx))
            .collect();
        Ok(Self { face, b })
    }

    /// `out = L p`, conservative by construction.
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (m, &f) in self.face.iter().enumerate() {
            let flux = f * (self.b[m + 1] * p[m + 1] - self.b[m] * p[m]);
            out[m] += flux;
            out[m + 1] -= flux;
        }
    }

    fn max_outflow(&self) -> f64 {
        let n = self.b.len();
        (0..n)
            .map(|m| {
                let left = if m > 0 { self.face[m - 1] } else { 0.0 };
                let right = if m + 1 < n { self.face[m] } else { 0.0 };
                (left + right) * self.b[m]
            })
            .fold(0.0, f64::max)
    }
}

/// Largest stable step `C Δx² / (hω max θ)` on the given grid.
pub fn fp_stable_dt(theta: &ThetaProfile, h: f64, omega: f64, cells: usize) -> f64 {
    let max_theta = (0..cells)
        .map(|m| theta.theta(cell_center(m, cells)))
        .fold(0.0, f64::max);
    let dx = 1.0 / cells as f64;
    FP_STABILITY * dx * dx / (h * omega * max_theta)
}

/// Integrates the equation from `p0` to `t_end`. `snapshot_times` are
/// rounded to the nearest step.
#[allow(clippy::too_many_arguments)]
pub fn solve_fp(
    theta: &ThetaProfile,
    v: &Potential1D,
    h: f64,
    omega: f64,
    p0: &DensityGrid1D,
    t_end: f64,
    dt: f64,
    scheme: TimeScheme,
    snapshot_times: &[f64],
) -> Result<FpSolution> {
    if !(h > 0.0 && omega > 0.0 && dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Domain(format!(
            "invalid parameters h = {h}, ω = {omega}, dt = {dt}, t_end = {t_end}"
        )));
    }
    let cells = p0.cells();
    let op = FvOperator::new(theta, v, h, omega, cells)?;
    let limit = fp_stable_dt(theta, h, omega, cells);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::UnstableTimestep { dt, limit });
    }
    let outflow_limit = 1.0 / op.max_outflow();
    if dt > outflow_limit {
        return Err(Error::UnstableTimestep {
            dt,
            limit: outflow_limit,
        });
    }
    let steps = crate::geometry::flow::step_count(t_end, dt);
    let snapshot_steps: Vec<u64> = snapshot_times
        .iter()
        .map(|&t| (t / dt).round() as u64)
        .collect();
    let mut p = p0.values().to_vec();
    let mut k1 = vec![0.0; cells];
    let mut k2 = vec![0.0; cells];
    let mut stage = vec![0.0; cells];
    let mut snapshots = Vec::new();
    let mut clipped = 0;
    let mut max_mass_error = 0.0_f64;
    let mut t = 0.0;
    for n in 0..=steps {
        for (i, &s) in snapshot_steps.iter().enumerate() {
            if s == n {
                snapshots.push((snapshot_times[i], DensityGrid1D { values: p.clone() }));
            }
        }
        if n == steps {
            break;
        }
        let tau = if n + 1 == steps { t_end - t } else { dt };
        op.apply(&p, &mut k1);
        match scheme {
            TimeScheme::ExplicitEuler => {
                for (pm, k) in p.iter_mut().zip(&k1) {
                    *pm += tau * k;
                }
            }
            TimeScheme::Heun => {
                for m in 0..cells {
                    stage[m] = p[m] + tau * k1[m];
                }
                op.apply(&stage, &mut k2);
                for m in 0..cells {
                    p[m] += 0.5 * tau * (k1[m] + k2[m]);
                }
            }
        }
        for pm in p.iter_mut() {
            if *pm < 0.0 {
                if *pm < -1e-14 {
                    return Err(Error::UnstableTimestep { dt, limit });
                }
                *pm = 0.0;
                clipped += 1;
            }
        }
        let mass = p.iter().sum::<f64>() / cells as f64;
        max_mass_error = max_mass_error.max((mass - 1.0).abs());
        t += tau;
    }
    Ok(FpSolution {
        density: DensityGrid1D { values: p },
        snapshots,
        steps,
        clipped,
        max_mass_error,
    })
}

/// The map `x ↦ y(x) = (1/Z) ∫_0^x θ^{-1/2}` with cumulative arclength
/// tabulated at equispaced knots.
#[derive(Debug, Clone)]
pub struct WassersteinCoordinate {
    theta: ThetaProfile,
    knots: Vec<f64>,
    total: f64,
}

const COORDINATE_KNOTS: usize = 64;

impl WassersteinCoordinate {
    pub fn new(theta: &ThetaProfile) -> Result<Self> {
        let n = COORDINATE_KNOTS;
        let f = |r: f64| theta.theta(r).powf(-0.5);
        let mut knots = vec![0.0; n + 1];
        knots[1] = theta.arclength(1.0 / n as f64)?;
        for k in 1..n - 2 {
            let (a, b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            let piece = integrate(f, a, b, 1e-13)
                .map_err(|e| Error::NonIntegrableTheta(e.to_string()))?
                .value;
            knots[k + 1] = knots[k] + piece;
        }
        knots[n - 1] = theta.arclength((n - 1) as f64 / n as f64)?;
        knots[n] = theta.total_length()?;
        let total = knots[n];
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::NonIntegrableTheta(format!("total length {total}")));
        }
        Ok(Self {
            theta: theta.clone(),
            knots,
            total,
        })
    }

    /// `Z = ∫_0^1 θ^{-1/2}`.
    pub fn total_length(&self) -> f64 {
        self.total
    }

    pub fn theta(&self) -> &ThetaProfile {
        &self.theta
    }

    /// Unnormalized arclength `∫_0^x θ^{-1/2}`.
    pub fn arclength(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!(
                "coordinate argument {x} outside [0, 1]"
            )));
        }
        let n = COORDINATE_KNOTS;
        let k = ((x * n as f64) as usize).min(n - 1);
        let a = k as f64 / n as f64;
        if x == a {
            return Ok(self.knots[k]);
        }
        if k == 0 || k == n - 1 {
            return self.theta.arclength(x);
        }
        let f = |r: f64| self.theta.theta(r).powf(-0.5);
        let piece = integrate(f, a, x, 1e-13)
            .map_err(|e| Error::NonIntegrableTheta(e.to_string()))?
            .value;
        Ok(self.knots[k] + piece)
    }

    /// `y(x)`, increasing from `y(0) = 0` to `y(1) = 1`.
    pub fn y(&self, x: f64) -> Result<f64> {
        Ok(self.arclength(x)? / self.total)
    }
}

/// Cosine-series fundamental solution of the canonical (`V = 0`, `hω = 1`)
/// equation.
#[derive(Debug, Clone)]
pub struct GreenFunctionSpec {
    pub coordinate: WassersteinCoordinate,
    /// Cap on the number of series terms.
    pub k_max: usize,
}

/// Terms are dropped once `e^{-(kπ/Z)² t}` falls below this.
pub const GREEN_TAIL: f64 = 1e-14;
pub const DEFAULT_K_MAX: usize = 100_000;

impl GreenFunctionSpec {
    pub fn new(theta: &ThetaProfile) -> Result<Self> {
        Ok(Self {
            coordinate: WassersteinCoordinate::new(theta)?,
            k_max: DEFAULT_K_MAX,
        })
    }

    /// Decay rate `(π/Z)²` of the slowest mode.
    pub fn gap(&self) -> f64 {
        let z = self.coordinate.total_length();
        (std::f64::consts::PI / z).powi(2)
    }

    /// Number of terms needed to reach the tail tolerance at time `t`.
    pub fn terms(&self, t: f64) -> Result<usize> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!(
                "Green function needs t > 0, got {t}"
            )));
        }
        let k = ((-GREEN_TAIL.ln()) / (self.gap() * t)).sqrt().ceil() as usize;
        if k > self.k_max {
            return Err(Error::TruncationWarning {
                t,
                terms: self.k_max,
            });
        }
        Ok(k.max(1))
    }

    /// `G(t, x, z) = θ(x)^{-1/2}/Z [1 + 2 Σ_k e^{-(kπ/Z)² t} cos(kπ y(z)) cos(kπ y(x))]`.
    pub fn green_function(&self, t: f64, x: f64, z: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0 && z > 0.0 && z < 1.0) {
            return Err(Error::Domain(format!(
                "Green function needs x, z in (0, 1), got ({x}, {z})"
            )));
        }
        let terms = self.terms(t)?;
        let (yx, yz) = (self.coordinate.y(x)?, self.coordinate.y(z)?);
        let gap = self.gap();
        let pi = std::f64::consts::PI;
        let series: f64 = (1..=terms)
            .map(|k| {
                (-gap * (k * k) as f64 * t).exp()
                    * (k as f64 * pi * yz).cos()
                    * (k as f64 * pi * yx).cos()
            })
            .sum();
        let z_total = self.coordinate.total_length();
        Ok(self.coordinate.theta().theta(x).powf(-0.5) / z_total * (1.0 + 2.0 * series))
    }

    /// `c_k = 2 ∫ p0(z) cos(kπ y(z)) dz` for `k = 1..=terms`, with `p0`
    /// piecewise constant on its cells and each cell integrated by GK15.
    pub fn cosine_coefficients(&self, p0: &DensityGrid1D, terms: usize) -> Result<Vec<f64>> {
        let cells = p0.cells();
        let nodes = kronrod_rule();
        let pi = std::f64::consts::PI;
        let mut coeffs = vec![0.0; terms];
        for (m, &pm) in p0.values().iter().enumerate() {
            if pm == 0.0 {
                continue;
            }
            let (a, b) = (m as f64 / cells as f64, (m + 1) as f64 / cells as f64);
            let (center, half) = (0.5 * (a + b), 0.5 * (b - a));
            for &(node, weight) in &nodes {
                let z = center + half * node;
                let y = self.coordinate.y(z)?;
                for (k, c) in coeffs.iter_mut().enumerate() {
                    *c += 2.0 * pm * weight * half * ((k + 1) as f64 * pi * y).cos();
                }
            }
        }
        Ok(coeffs)
    }

    /// `p(t, x_m) = ∫ G(t, x_m, z) p0(z) dz` at the cell centres of `p0`,
    /// renormalized to unit grid mass.
    pub fn evolve(&self, p0: &DensityGrid1D, t: f64) -> Result<DensityGrid1D> {
        let terms = self.terms(t)?;
        let coeffs = self.cosine_coefficients(p0, terms)?;
        let gap = self.gap();
        let pi = std::f64::consts::PI;
        let cells = p0.cells();
        let z_total = self.coordinate.total_length();
        let mut values = Vec::with_capacity(cells);
        for m in 0..cells {
            let x = cell_center(m, cells);
            let y = self.coordinate.y(x)?;
            let series: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let k = (k + 1) as f64;
                    c * (-gap * k * k * t).exp() * (k * pi * y).cos()
                })
                .sum();
            values.push(
                (self.coordinate.theta().theta(x).powf(-0.5) / z_total * (1.0 + series)).max(0.0),
            );
        }
        DensityGrid1D::normalized(values)
    }
}

/// `evolve_via_green` as a free function.
pub fn evolve_via_green(
    spec: &GreenFunctionSpec,
    p0: &DensityGrid1D,
    t: f64,
) -> Result<DensityGrid1D> {
    spec.evolve(p0, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::beta;

    #[test]
    fn canonical_total_length() {
        let z = ThetaProfile::canonical().total_length().unwrap();
        let expect = beta(0.75, 0.75).unwrap() / 2f64.sqrt();
        assert!((z - expect).abs() < 1e-10, "{z} vs {expect}");
        let coord = WassersteinCoordinate::new(&ThetaProfile::canonical()).unwrap();
        assert!((coord.total_length() - expect).abs() < 1e-10);
        assert!((coord.y(0.5).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(coord.y(1.0).unwrap(), 1.0);
        assert_eq!(coord.y(0.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_profile_coordinate_is_identity() {
        let coord = WassersteinCoordinate::new(&ThetaProfile::constant(1.0).unwrap()).unwrap();
        assert!((coord.total_length() - 1.0).abs() < 1e-14);
        for &x in &[0.0, 0.01, 0.3, 0.77, 0.999, 1.0] {
            assert!((coord.y(x).unwrap() - x).abs() < 1e-14);
        }
    }

    #[test]
    fn coordinate_is_monotone() {
        let coord = WassersteinCoordinate::new(&ThetaProfile::logarithmic()).unwrap();
        let ys: Vec<f64> = (0..=200)
            .map(|k| coord.y(k as f64 / 200.0).unwrap())
            .collect();
        assert!(ys.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn network_profile_derivative() {
        for profile in [ThetaProfile::canonical(), ThetaProfile::logarithmic()] {
            for &x in &[0.1, 0.35, 0.5, 0.8] {
                let h = 1e-6;
                let fd = (profile.theta(x + h) - profile.theta(x - h)) / (2.0 * h);
                assert!(
                    (profile.theta_prime(x) - fd).abs() < 1e-7,
                    "{profile:?} at {x}"
                );
            }
        }
        let canonical = ThetaProfile::canonical();
        assert!((canonical.theta(0.3) - 2.0 * (0.3f64 * 0.7).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stationary_density_is_stationary_and_symmetric() {
        let theta = ThetaProfile::canonical();
        let pi = stationary_density(&theta, &Potential1D::zero(), 2.0, 200).unwrap();
        let n = pi.cells();
        for m in 0..n / 2 {
            assert!((pi.values()[m] - pi.values()[n - 1 - m]).abs() <= 1e-12 * pi.values()[m]);
        }
        let dt = fp_stable_dt(&theta, 2.0, 0.5, n);
        let sol = solve_fp(
            &theta,
            &Potential1D::zero(),
            2.0,
            0.5,
            &pi,
            1.0,
            dt,
            TimeScheme::ExplicitEuler,
            &[],
        )
        .unwrap();
        assert!(sol.density.l1_distance(&pi).unwrap() < 1e-10);
        assert!(sol.max_mass_error < 1e-12);
        let uniform = stationary_density(
            &ThetaProfile::constant(1.0).unwrap(),
            &Potential1D::zero(),
            1.0,
            50,
        )
        .unwrap();
        assert!(uniform.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn unstable_step_is_rejected() {
        let theta = ThetaProfile::canonical();
        let p0 = DensityGrid1D::uniform(100);
        let dt = 2.0 * fp_stable_dt(&theta, 1.0, 1.0, 100);
        let err = solve_fp(
            &theta,
            &Potential1D::zero(),
            1.0,
            1.0,
            &p0,
            0.1,
            dt,
            TimeScheme::ExplicitEuler,
            &[],
        );
        assert!(matches!(err, Err(Error::UnstableTimestep { .. })));
    }

    #[test]
    fn green_function_long_time_limit_and_mass() {
        let spec = GreenFunctionSpec::new(&ThetaProfile::canonical()).unwrap();
        let pi =
            |x: f64| ThetaProfile::canonical().theta(x).powf(-0.5) / spec.coordinate.total_length();
        for &(x, z) in &[(0.2, 0.7), (0.5, 0.1)] {
            assert!((spec.green_function(50.0, x, z).unwrap() - pi(x)).abs() < 1e-12);
        }
        let z = 0.3;
        let mass = quad_singular(
            |x| {
                spec.green_function(0.2, x.clamp(1e-300, 1.0 - 1e-16), z)
                    .unwrap()
            },
            1.0,
            Certificate::SqrtEndpoint,
        )
        .unwrap();
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
        assert!(matches!(
            spec.green_function(1e-12, 0.5, 0.5),
            Err(Error::TruncationWarning { .. })
        ));
    }
}
