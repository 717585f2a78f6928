//! Experiment orchestration behind the `simplexdiff` command line.
//!
//! Exit status: `0` success, `1` a comparison or identity check failed,
//! `2` configuration error, `3` numerical failure.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use crate::fp::{
    fp_stable_dt, solve_fp, stationary_density, DensityGrid1D, GreenFunctionSpec, Potential1D,
    ThetaProfile,
};
use crate::geometry::flow::{solve_gradient_flow, solve_linear_ode};
use crate::geometry::metric::metric_tensor;
use crate::geometry::onsager::build_onsager;
use crate::jump::{
    cme_stationary, simulate_ssa, solve_cme, ssa_ensemble_mean, Lattice, LatticeDistribution,
};
use crate::langevin::{simulate_ensemble, simulate_sde, SdeConfig};
use crate::network::{random_detailed_balanced, SimplexState};
use crate::rng::{tag, Stream, StreamId};
use crate::stats::{compare_distributions, Histogram};
use crate::wf::{build_transform, pushforward_check, simulate_wf, WfConfig};
use crate::{Error, Result};

pub use config::{ExperimentConfig, InitialKind, LoadedConfig, Overrides};
pub use output::{CsvOutput, Header, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Relative tolerance on `det g = d / Π λ_l`.
pub const DET_TOLERANCE: f64 = 1e-8;
const DEFAULT_SDE_PATHS: usize = 1000;
const DEFAULT_SSA_SAMPLES: usize = 21;

#[derive(Debug, Clone)]
pub enum Command {
    Ssa,
    Cme,
    Ode,
    Sde,
    Fp,
    Green,
    Wf,
    GeometryCheck {
        d: Option<usize>,
        samples: Option<usize>,
    },
    Compare {
        samples: PathBuf,
        density: PathBuf,
        threshold: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ssa => "ssa",
            Command::Cme => "cme",
            Command::Ode => "ode",
            Command::Sde => "sde",
            Command::Fp => "fp",
            Command::Green => "green",
            Command::Wf => "wf",
            Command::GeometryCheck { .. } => "geometry-check",
            Command::Compare { .. } => "compare",
        }
    }

    /// Commands that can run on defaults alone.
    pub fn config_optional(&self) -> bool {
        matches!(
            self,
            Command::GeometryCheck { .. } | Command::Compare { .. }
        )
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// False when a comparison or identity check failed.
    pub passed: bool,
    pub summary: Vec<String>,
}

impl Outcome {
    fn new(files: Vec<PathBuf>) -> Self {
        Self {
            files,
            passed: true,
            summary: Vec::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(outcome) => outcome.exit_code(),
        Err(e) if e.is_config_error() => EXIT_CONFIG,
        Err(_) => EXIT_NUMERICAL,
    }
}

/// Sizes the global rayon pool. Only the first call has an effect.
pub fn configure_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    // A second initialisation fails harmlessly, e.g. in tests.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

/// Loads the configuration, applies overrides and runs `command`.
pub fn run(
    command: &Command,
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> Result<Outcome> {
    let loaded = match config_path {
        Some(path) => LoadedConfig::load(path)?,
        None if command.config_optional() => LoadedConfig::empty(),
        None => {
            return Err(Error::Config(format!(
                "{} requires --config",
                command.name()
            )))
        }
    };
    let mut config = loaded.config;
    config.apply(overrides);
    config.validate()?;
    let out_dir = config
        .output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let ctx = Context {
        config,
        out_dir,
        sha256: loaded.sha256,
        command: command.name(),
    };
    match command {
        Command::Ssa => ctx.ssa(),
        Command::Cme => ctx.cme(),
        Command::Ode => ctx.ode(),
        Command::Sde => ctx.sde(),
        Command::Fp => ctx.fp(),
        Command::Green => ctx.green(),
        Command::Wf => ctx.wf(),
        Command::GeometryCheck { d, samples } => ctx.geometry_check(*d, *samples),
        Command::Compare {
            samples,
            density,
            threshold,
        } => ctx.compare(samples, density, *threshold),
    }
}

struct Context {
    config: ExperimentConfig,
    out_dir: PathBuf,
    sha256: String,
    command: &'static str,
}

fn state_columns(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

impl Context {
    fn header(&self) -> Header {
        Header::new(self.command, &self.sha256, self.config.seed)
    }

    fn open(&self, name: &str, header: &Header, columns: &[String]) -> Result<CsvOutput> {
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        CsvOutput::create(&self.out_dir.join(name), header, &columns)
    }

    fn dt(&self) -> Result<f64> {
        self.config.require("dt", self.config.dt)
    }

    fn t_end(&self) -> Result<f64> {
        self.config.require("t_end", self.config.t_end)
    }

    fn h(&self) -> Result<f64> {
        self.config.require("h", self.config.h)
    }

    fn ssa(&self) -> Result<Outcome> {
        let c = &self.config;
        let net = c.network()?;
        let n = c.require("ssa.n", c.ssa.n)?;
        let x0 = c.x0()?;
        let t_end = self.t_end()?;
        let d = net.d();
        let path = simulate_ssa(&net, n, &x0, t_end, StreamId::new(c.seed, tag::SSA, 0))?;
        let mut columns = vec!["t".to_string()];
        columns.extend(state_columns("x", d));
        let mut out = self.open("ssa_trajectory.csv", &self.header(), &columns)?;
        for k in 0..path.len() {
            let mut row = vec![path.times[k]];
            row.extend(path.state(k));
            out.row(&row)?;
        }
        let mut files = vec![out.finish()?];
        if let Some(paths) = c.paths {
            let times = match &c.ssa.sample_times {
                Some(t) => t.clone(),
                None => (0..DEFAULT_SSA_SAMPLES)
                    .map(|k| t_end * k as f64 / (DEFAULT_SSA_SAMPLES - 1) as f64)
                    .collect(),
            };
            let mean = ssa_ensemble_mean(&net, n, &x0, &times, paths, c.seed)?;
            let mut out = self.open("ssa_mean.csv", &self.header(), &columns)?;
            for (t, m) in times.iter().zip(&mean) {
                let mut row = vec![*t];
                row.extend(m);
                out.row(&row)?;
            }
            files.push(out.finish()?);
        }
        Ok(Outcome::new(files))
    }

    fn cme(&self) -> Result<Outcome> {
        let c = &self.config;
        let net = c.network()?;
        let n = c.require("cme.n", c.cme.n)?;
        let dist = if c.cme.stationary {
            cme_stationary(&net, n)?
        } else {
            let counts = c
                .x0()?
                .to_counts(n)
                .map_err(|e| Error::Config(format!("x0: {e}")))?;
            let p0 = LatticeDistribution::delta(Lattice::new(net.d(), n)?, &counts)?;
            solve_cme(&net, &p0, self.t_end()?, self.dt()?)?.distribution
        };
        let mut columns = state_columns("l", net.d());
        columns.push("p".into());
        let mut out = self.open("cme.csv", &self.header(), &columns)?;
        for (ell, p) in dist.iter() {
            let mut row: Vec<f64> = ell.iter().map(|&v| v as f64).collect();
            row.push(p);
            out.row(&row)?;
        }
        Ok(Outcome::new(vec![out.finish()?]))
    }

    fn ode(&self) -> Result<Outcome> {
        let c = &self.config;
        let net = c.network()?;
        let x0 = c.x0()?;
        let (t_end, dt) = (self.t_end()?, self.dt()?);
        let traj = match c.ode.kind {
            config::OdeKind::GradientFlow => {
                solve_gradient_flow(&net, &c.mean_function(), &x0, t_end, dt)?
            }
            config::OdeKind::Linear => solve_linear_ode(&net, &x0, t_end, dt)?,
        };
        let mut columns = vec!["t".to_string()];
        columns.extend(state_columns("x", net.d()));
        let mut out = self.open("ode.csv", &self.header(), &columns)?;
        for (t, x) in traj.times.iter().zip(&traj.states) {
            let mut row = vec![*t];
            row.extend(x);
            out.row(&row)?;
        }
        Ok(Outcome::new(vec![out.finish()?]))
    }

    fn sde(&self) -> Result<Outcome> {
        let c = &self.config;
        let net = c.network()?;
        let mf = c.mean_function();
        let x0 = c.x0()?;
        let mut cfg = SdeConfig::new(
            self.h()?,
            self.dt()?,
            self.t_end()?,
            c.sde.noise_form(),
            c.seed,
        );
        cfg.reflection = c.sde.reflection;
        cfg.potential = c.potential.build();
        cfg.divergence_drift = c.sde.divergence_drift;
        cfg.scheme = c.sde.scheme();
        cfg.record_every = c.sde.record_every;
        let mut header = self.header().with_note(format!(
            "noise={:?} boundary={}",
            cfg.noise_form,
            if cfg.reflection { "reflection" } else { "none" }
        ));
        if net.d() >= 3 && cfg.reflection {
            header = header.with_note("reflection at faces is a heuristic for d >= 3");
        }
        let path = simulate_sde(&net, &mf, &x0, &cfg)?;
        let mut columns = vec!["t".to_string()];
        columns.extend(state_columns("x", net.d()));
        let mut out = self.open("sde_trajectory.csv", &header, &columns)?;
        for (t, x) in path.trajectory.times.iter().zip(&path.trajectory.states) {
            let mut row = vec![*t];
            row.extend(x);
            out.row(&row)?;
        }
        let mut files = vec![out.finish()?];

        let paths = c.paths.unwrap_or(DEFAULT_SDE_PATHS);
        let ensemble = simulate_ensemble(&net, &mf, &x0, &cfg, paths, &[cfg.t_end])?;
        let hist = ensemble.histogram(0, 0, c.sde.bins)?;
        let header = header.with_note(format!(
            "histogram of x1 at t={} over {paths} paths, reflection_rate={}",
            cfg.t_end,
            ensemble.reflection_rate()
        ));
        files.push(self.write_histogram("sde_histogram.csv", &header, &hist)?);
        Ok(Outcome::new(files))
    }

    fn write_histogram(&self, name: &str, header: &Header, hist: &Histogram) -> Result<PathBuf> {
        let columns = ["bin_left", "bin_right", "count", "frequency"].map(String::from);
        let mut out = self.open(name, header, &columns)?;
        for (k, f) in hist.frequencies().into_iter().enumerate() {
            let (lo, hi) = hist.bin_edges(k);
            out.row(&[lo, hi, hist.counts[k] as f64, f])?;
        }
        out.finish()
    }

    fn initial_density(
        &self,
        theta: &ThetaProfile,
        v: &Potential1D,
        h: f64,
    ) -> Result<DensityGrid1D> {
        let cells = self.config.fp.grid;
        match self.config.fp.initial {
            InitialKind::Uniform => Ok(DensityGrid1D::uniform(cells)),
            InitialKind::Linear => DensityGrid1D::from_fn(cells, |x| 2.0 * x),
            InitialKind::Stationary => stationary_density(theta, v, h, cells),
        }
    }

    fn write_density(&self, name: &str, header: &Header, p: &DensityGrid1D) -> Result<PathBuf> {
        let columns = ["x", "p"].map(String::from);
        let mut out = self.open(name, header, &columns)?;
        for (x, v) in p.centers().into_iter().zip(p.values()) {
            out.row(&[x, *v])?;
        }
        out.finish()
    }

    fn fp(&self) -> Result<Outcome> {
        let c = &self.config;
        let (theta, omega, v) = c.two_point(c.fp.profile)?;
        let h = self.h()?;
        let t_end = self.t_end()?;
        let dt =
            c.fp.dt
                .unwrap_or_else(|| fp_stable_dt(&theta, h, omega, c.fp.grid));
        let p0 = self.initial_density(&theta, &v, h)?;
        let sol = solve_fp(
            &theta,
            &v,
            h,
            omega,
            &p0,
            t_end,
            dt,
            c.fp.time_scheme(),
            &[],
        )?;
        let header = self.header().with_note(format!(
            "grid={} dt={dt} steps={} max_mass_error={}",
            c.fp.grid, sol.steps, sol.max_mass_error
        ));
        Ok(Outcome::new(vec![self.write_density(
            "fp.csv",
            &header,
            &sol.density,
        )?]))
    }

    fn green(&self) -> Result<Outcome> {
        let c = &self.config;
        if c.potential != config::PotentialKind::Zero {
            return Err(Error::Config("green needs potential = \"zero\"".into()));
        }
        let (theta, omega, v) = c.two_point(c.fp.profile)?;
        let h = self.h()?;
        let spec = GreenFunctionSpec::new(&theta)?;
        let p0 = self.initial_density(&theta, &v, h)?;
        // The series is written for hω = 1; other values rescale time.
        let p = spec.evolve(&p0, h * omega * self.t_end()?)?;
        let header = self
            .header()
            .with_note(format!("grid={} gap={}", c.fp.grid, spec.gap()));
        Ok(Outcome::new(vec![self.write_density(
            "green.csv",
            &header,
            &p,
        )?]))
    }

    fn wf(&self) -> Result<Outcome> {
        let c = &self.config;
        let (theta, _, _) = c.two_point(c.wf.profile)?;
        let transform = build_transform(&theta)?;
        let header = self
            .header()
            .with_note(format!("gamma={}", transform.gamma()));
        let mut out = self.open("wf_transform.csv", &header, &["x", "psi"].map(String::from))?;
        let n = c.wf.table_points.max(2);
        for k in 0..n {
            let x = k as f64 / (n - 1) as f64;
            out.row(&[x, transform.psi(x)?])?;
        }
        let mut files = vec![out.finish()?];

        let (dt, t_end) = (self.dt()?, self.t_end()?);
        let y0 = transform.psi(c.wf.x0)?;
        let path = simulate_wf(transform.gamma(), y0, &WfConfig::new(dt, t_end, c.seed))?;
        let mut out = self.open("wf_trajectory.csv", &header, &["t", "y"].map(String::from))?;
        for (t, y) in path.times.iter().zip(&path.values) {
            out.row(&[*t, *y])?;
        }
        files.push(out.finish()?);

        let mut outcome = Outcome::new(files);
        if let Some(paths) = c.paths {
            let report = pushforward_check(&transform, c.wf.x0, paths, t_end, dt, c.seed)?;
            let columns =
                ["ks_statistic", "critical_1pct", "critical_5pct", "passed"].map(String::from);
            let mut out = self.open("wf_pushforward.csv", &header, &columns)?;
            let ks = report.ks;
            out.row(&[
                ks.statistic,
                ks.critical_1pct,
                ks.critical_5pct,
                f64::from(u8::from(report.passed)),
            ])?;
            outcome.files.push(out.finish()?);
            outcome.summary.push(format!(
                "push-forward KS {} (1% critical {})",
                ks.statistic, ks.critical_1pct
            ));
        }
        Ok(outcome)
    }

    fn geometry_check(&self, d: Option<usize>, samples: Option<usize>) -> Result<Outcome> {
        let c = &self.config;
        let d = d.unwrap_or(c.geometry.d);
        let samples = samples.unwrap_or(c.geometry.samples);
        if d < 2 {
            return Err(Error::Config(format!("d must be at least 2, got {d}")));
        }
        let mf = c.mean_function();
        let tol = c.geometry.tolerance;
        let columns = [
            "sample",
            "decomposition_residual",
            "det_relative_error",
            "passed",
        ]
        .map(String::from);
        let mut out = self.open(
            "geometry_check.csv",
            &self.header().with_note(format!("d={d}")),
            &columns,
        )?;
        let mut failures = 0;
        for s in 0..samples {
            let mut rng = Stream::new(StreamId::new(c.seed, tag::NETWORK, s as u64));
            let net = random_detailed_balanced(d, 0.5, &mut rng)?;
            let x = SimplexState::random_interior(d, 0.01, &mut rng);
            let dec = build_onsager(&net, &mf, &x)?;
            let metric = metric_tensor(&dec)?;
            let residual = dec.residuals().max();
            let det_err = metric.residuals().determinant;
            let ok = residual <= tol && det_err <= DET_TOLERANCE;
            failures += usize::from(!ok);
            out.row(&[s as f64, residual, det_err, f64::from(u8::from(ok))])?;
        }
        let mut outcome = Outcome::new(vec![out.finish()?]);
        outcome.passed = failures == 0;
        outcome
            .summary
            .push(format!("d={d}: {failures} of {samples} samples failed"));
        Ok(outcome)
    }

    fn compare(&self, samples: &Path, density: &Path, threshold: Option<f64>) -> Result<Outcome> {
        let hist_table = Table::read(samples)?;
        let lefts = hist_table.column("bin_left")?;
        let rights = hist_table.column("bin_right")?;
        let counts = hist_table.column("count")?;
        let (Some(&lo), Some(&hi)) = (lefts.first(), rights.last()) else {
            return Err(Error::Config(format!("{} has no bins", samples.display())));
        };
        let mut hist = Histogram::uniform(lo, hi, counts.len())?;
        for (k, &n) in counts.iter().enumerate() {
            if !(n >= 0.0 && n.fract() == 0.0) {
                return Err(Error::Config(format!(
                    "bin {k}: count {n} is not a nonnegative integer"
                )));
            }
            hist.counts[k] = n as u64;
            hist.total += n as u64;
        }
        let density_table = Table::read(density)?;
        let grid = DensityGrid1D::normalized(density_table.column("p")?)?;
        let xs = density_table.column("x")?;
        if xs
            .iter()
            .zip(grid.centers())
            .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(Error::SupportMismatch(
                "density must be given at cell centres of [0, 1]".into(),
            ));
        }
        let threshold = threshold.unwrap_or(self.config.compare.l1_threshold);
        let report = compare_distributions(&hist, &grid, None, threshold)?;
        let columns = ["metric", "value"].map(String::from);
        let mut out = self.open("compare.csv", &self.header(), &columns)?;
        let rows = [
            ("l1", report.l1),
            ("l1_threshold", report.l1_threshold),
            ("sample_mean", report.sample_moments.mean),
            ("sample_variance", report.sample_moments.variance),
            ("reference_mean", report.reference_mean),
            ("reference_variance", report.reference_variance),
            ("passed", f64::from(u8::from(report.passed))),
        ];
        for (name, value) in rows {
            out.text_row(&[name.to_string(), format!("{value:?}")])?;
        }
        let mut outcome = Outcome::new(vec![out.finish()?]);
        outcome.passed = report.passed;
        outcome.summary.push(format!(
            "L1 = {} (threshold {})",
            report.l1, report.l1_threshold
        ));
        Ok(outcome)
    }
}
