//! Experiment configuration: TOML (or JSON) with a versioned schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fp::{Potential1D, ThetaProfile, TimeScheme};
use crate::geometry::derivatives::DerivativeScheme;
use crate::geometry::mean::{ChiSquared, MeanFunction};
use crate::geometry::operators::Potential;
use crate::langevin::NoiseForm;
use crate::network::{build_network, QMatrix, ReactionNetwork, SimplexState};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    pub network: Option<NetworkSection>,
    #[serde(default)]
    pub mean: MeanKind,
    #[serde(default)]
    pub potential: PotentialKind,
    pub h: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub paths: Option<usize>,
    #[serde(default)]
    pub ssa: SsaSection,
    #[serde(default)]
    pub cme: CmeSection,
    #[serde(default)]
    pub ode: OdeSection,
    #[serde(default)]
    pub sde: SdeSection,
    #[serde(default)]
    pub fp: FpSection,
    #[serde(default)]
    pub wf: WfSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Rows of `Q`. Rows of length `d - 1` omit the diagonal; the diagonal
    /// of full rows is ignored and recomputed.
    pub rates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanKind {
    #[default]
    Logarithmic,
    Geometric,
    ChiSquared,
}

impl MeanKind {
    pub fn build(self) -> MeanFunction {
        match self {
            MeanKind::Logarithmic => MeanFunction::Logarithmic,
            MeanKind::Geometric => MeanFunction::Geometric,
            MeanKind::ChiSquared => MeanFunction::generic(ChiSquared),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    #[default]
    FreeEnergy,
    Zero,
}

impl PotentialKind {
    pub fn build(self) -> Potential {
        match self {
            PotentialKind::FreeEnergy => Potential::FreeEnergy,
            PotentialKind::Zero => Potential::Zero,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsaSection {
    /// Molecule count `N`.
    pub n: Option<u64>,
    pub sample_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmeSection {
    pub n: Option<u64>,
    #[serde(default)]
    pub stationary: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OdeKind {
    #[default]
    GradientFlow,
    Linear,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSection {
    #[serde(default)]
    pub kind: OdeKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    Eigen,
    Edge,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeKind {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSection {
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default = "yes")]
    pub reflection: bool,
    #[serde(default = "yes")]
    pub divergence_drift: bool,
    #[serde(default)]
    pub derivatives: DerivativeKind,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "one")]
    pub record_every: usize,
}

impl Default for SdeSection {
    fn default() -> Self {
        Self {
            noise: NoiseKind::Eigen,
            reflection: true,
            divergence_drift: true,
            derivatives: DerivativeKind::Analytic,
            bins: default_bins(),
            record_every: 1,
        }
    }
}

impl SdeSection {
    pub fn noise_form(&self) -> NoiseForm {
        match self.noise {
            NoiseKind::Eigen => NoiseForm::Eigen,
            NoiseKind::Edge => NoiseForm::Edge,
        }
    }

    pub fn scheme(&self) -> DerivativeScheme {
        match self.derivatives {
            DerivativeKind::Analytic => DerivativeScheme::Analytic,
            DerivativeKind::FiniteDifference => DerivativeScheme::FiniteDifference,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    #[default]
    Euler,
    Heun,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// From the two-species network and mean.
    #[default]
    Network,
    /// `θ = 2 sqrt(x (1 - x))`.
    Canonical,
    /// Logarithmic mean on the symmetric pair.
    Logarithmic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    #[default]
    Uniform,
    Stationary,
    /// `p0(x) = 2x`.
    Linear,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpSection {
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub scheme: SchemeKind,
    #[serde(default)]
    pub profile: ProfileKind,
    #[serde(default)]
    pub initial: InitialKind,
    /// Edge weight; defaults to the network's, or `1/2` without a network.
    pub omega: Option<f64>,
    /// Time step; defaults to the stability limit of the grid.
    pub dt: Option<f64>,
}

impl Default for FpSection {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            scheme: SchemeKind::Euler,
            profile: ProfileKind::Network,
            initial: InitialKind::Uniform,
            omega: None,
            dt: None,
        }
    }
}

impl FpSection {
    pub fn time_scheme(&self) -> TimeScheme {
        match self.scheme {
            SchemeKind::Euler => TimeScheme::ExplicitEuler,
            SchemeKind::Heun => TimeScheme::Heun,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WfSection {
    #[serde(default)]
    pub profile: ProfileKind,
    /// Initial `x` of the two-point diffusion.
    #[serde(default = "default_wf_x0")]
    pub x0: f64,
    #[serde(default = "default_table")]
    pub table_points: usize,
}

impl Default for WfSection {
    fn default() -> Self {
        Self {
            profile: ProfileKind::Canonical,
            x0: default_wf_x0(),
            table_points: default_table(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(default = "default_geometry_d")]
    pub d: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_eigen_tolerance")]
    pub tolerance: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            d: default_geometry_d(),
            samples: default_samples(),
            tolerance: default_eigen_tolerance(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default = "default_l1_threshold")]
    pub l1_threshold: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            l1_threshold: default_l1_threshold(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn default_bins() -> usize {
    50
}
fn default_grid() -> usize {
    400
}
fn default_wf_x0() -> f64 {
    0.3
}
fn default_table() -> usize {
    101
}
fn default_geometry_d() -> usize {
    4
}
fn default_samples() -> usize {
    200
}
fn default_eigen_tolerance() -> f64 {
    1e-10
}
fn default_l1_threshold() -> f64 {
    0.05
}

/// A parsed configuration with the SHA-256 of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub sha256: String,
}

impl LoadedConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, is_json)
    }

    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let config: ExperimentConfig = if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        if config.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                config.schema
            )));
        }
        config.validate()?;
        Ok(Self {
            config,
            sha256: sha256_hex(text.as_bytes()),
        })
    }

    /// Stand-in for commands run without a configuration file.
    pub fn empty() -> Self {
        Self {
            config: ExperimentConfig {
                schema: SCHEMA_VERSION,
                ..Default::default()
            },
            sha256: sha256_hex(b""),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn positive(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(Error::Config(format!("{name} must be positive, got {x}")))
        }
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    /// Checks everything that can be checked without knowing the command.
    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("h", self.h)?;
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("t_end must be nonnegative, got {t}")));
            }
        }
        if self.paths == Some(0) {
            return Err(Error::Config("paths must be at least 1".into()));
        }
        positive("fp.omega", self.fp.omega)?;
        positive("fp.dt", self.fp.dt)?;
        if self.fp.grid < 2 || self.sde.bins == 0 || self.sde.record_every == 0 {
            return Err(Error::Config(
                "fp.grid must be >= 2, sde.bins and sde.record_every >= 1".into(),
            ));
        }
        if self.geometry.d < 2 {
            return Err(Error::Config("geometry.d must be at least 2".into()));
        }
        if !(self.wf.x0 > 0.0 && self.wf.x0 < 1.0) {
            return Err(Error::Config(format!(
                "wf.x0 must be in (0, 1), got {}",
                self.wf.x0
            )));
        }
        if self.network.is_some() {
            let net = self.network()?;
            if let Some(x0) = &self.x0 {
                if x0.len() != net.d() {
                    return Err(Error::Config(format!(
                        "x0 has {} entries, network has {}",
                        x0.len(),
                        net.d()
                    )));
                }
            }
        }
        if let Some(x0) = &self.x0 {
            SimplexState::new(x0.clone()).map_err(|e| Error::Config(format!("x0: {e}")))?;
        }
        Ok(())
    }

    pub fn network(&self) -> Result<ReactionNetwork> {
        let section = self
            .network
            .as_ref()
            .ok_or_else(|| Error::Config("missing [network] section".into()))?;
        let q = QMatrix::from_rates(&section.rates)
            .map_err(|e| Error::Config(format!("network: {e}")))?;
        build_network(q).map_err(|e| Error::Config(format!("network: {e}")))
    }

    pub fn x0(&self) -> Result<SimplexState> {
        let x0 = self
            .x0
            .clone()
            .ok_or_else(|| Error::Config("missing x0".into()))?;
        SimplexState::new(x0).map_err(|e| Error::Config(format!("x0: {e}")))
    }

    pub fn require<T: Copy>(&self, name: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| Error::Config(format!("missing {name}")))
    }

    pub fn mean_function(&self) -> MeanFunction {
        self.mean.build()
    }

    /// Two-point profile, edge weight and potential for the scalar solvers.
    pub fn two_point(&self, profile: ProfileKind) -> Result<(ThetaProfile, f64, Potential1D)> {
        let mf = self.mean_function();
        let (theta, network_omega, network) = match profile {
            ProfileKind::Network => {
                let net = self.network()?;
                let theta = ThetaProfile::from_network(&net, &mf)
                    .map_err(|e| Error::Config(e.to_string()))?;
                let omega = 0.5 * (net.omega()[(0, 1)] + net.omega()[(1, 0)]);
                (theta, Some(omega), Some(net))
            }
            ProfileKind::Canonical => (ThetaProfile::canonical(), None, self.network().ok()),
            ProfileKind::Logarithmic => (ThetaProfile::logarithmic(), None, self.network().ok()),
        };
        let omega = self.fp.omega.or(network_omega).unwrap_or(0.5);
        let potential = match self.potential {
            PotentialKind::Zero => Potential1D::zero(),
            PotentialKind::FreeEnergy => {
                let net = network.ok_or_else(|| {
                    Error::Config("free-energy potential needs a [network]".into())
                })?;
                Potential1D::free_energy(&net, &mf)
                    .map_err(|e| Error::Config(format!("potential: {e}")))?
            }
        };
        Ok((theta, omega, potential))
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if overrides.dt.is_some() {
            self.dt = overrides.dt;
            self.fp.dt = overrides.dt;
        }
        if overrides.t_end.is_some() {
            self.t_end = overrides.t_end;
        }
        if overrides.paths.is_some() {
            self.paths = overrides.paths;
        }
        if let Some(grid) = overrides.grid {
            self.fp.grid = grid;
        }
        if overrides.out.is_some() {
            self.output.dir = overrides.out.clone();
        }
    }
}

/// Command-line overrides of configuration values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub paths: Option<usize>,
    pub grid: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_POINT: &str = r#"
schema = 1
seed = 3
mean = "geometric"
potential = "zero"
h = 2.0
x0 = [0.3, 0.7]

[network]
rates = [[1.0], [1.0]]
"#;

    #[test]
    fn parses_toml_and_json_alike() {
        let a = LoadedConfig::parse(TWO_POINT, false).unwrap();
        let json = serde_json::to_string(&a.config).unwrap();
        let b = LoadedConfig::parse(&json, true).unwrap();
        assert_eq!(a.config.seed, b.config.seed);
        assert_eq!(a.config.mean, MeanKind::Geometric);
        assert_eq!(a.sha256.len(), 64);
        assert_eq!(a.config.network().unwrap().d(), 2);
    }

    #[test]
    fn rejects_unknown_keys_and_schema() {
        let bad = format!("{TWO_POINT}\nunknown = 1\n");
        assert!(matches!(
            LoadedConfig::parse(&bad, false),
            Err(Error::Config(_))
        ));
        let bad = TWO_POINT.replace("schema = 1", "schema = 2");
        assert!(matches!(
            LoadedConfig::parse(&bad, false),
            Err(Error::Config(_))
        ));
        let bad = TWO_POINT.replace("[0.3, 0.7]", "[0.3, 0.8]");
        assert!(matches!(
            LoadedConfig::parse(&bad, false),
            Err(Error::Config(_))
        ));
        let bad = TWO_POINT.replace("[[1.0], [1.0]]", "[[1.0], [0.0]]");
        assert!(matches!(
            LoadedConfig::parse(&bad, false),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn overrides_apply() {
        let mut c = LoadedConfig::parse(TWO_POINT, false).unwrap().config;
        c.apply(&Overrides {
            seed: Some(9),
            dt: Some(0.1),
            grid: Some(50),
            ..Default::default()
        });
        assert_eq!((c.seed, c.dt, c.fp.grid), (9, Some(0.1), 50));
    }
}
