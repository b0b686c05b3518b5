//! Experiment configuration, test distributions and sweep runners behind the CLI.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::closures::{ClosureState, MomentRule, MomentVector};
use crate::density::Mixture;
use crate::error::{Error, Result};
use crate::gausskernel::Maxwellian;
use crate::momentsystem::{
    assemble_hyperbolic, characteristic_speeds, check_spd, imaginary_residue, Collision, RelaxationTrace,
};
use crate::projector::{project_continuation, NewtonReport, ProjectorOptions};

pub const PROFILE_RANGE: (f64, f64) = (-6.0, 6.0);
pub const PROFILE_POINTS: usize = 601;
/// Absolute tolerance of the quadratures behind the error measures.
pub const ERROR_QUAD_TOL: f64 = 1e-11;

/// `(weight, mean, variance)` components of the built-in test distributions.
pub fn builtin_spec(name: &str) -> Option<Vec<(f64, f64, f64)>> {
    match name {
        "f1" => Some(vec![(1.0, 2.0, 1.0), (1.0, -2.0, 1.0)]),
        "f2" => Some(vec![(1.0, 2.0, 1.0), (1.0, -2.0, 2.0)]),
        "f3" => Some(vec![(1.0, 2.0, 0.25), (1.0, 0.0, 0.375), (1.0, -2.0, 0.5)]),
        _ => None,
    }
}

/// Parses a mixture file: one `weight mean variance` triple per line, `#`
/// comments. Weights may be negative.
pub fn parse_mixture(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Config(format!("mixture line {}: expected 3 fields, got {}", n + 1, fields.len())));
        }
        let parse =
            |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("mixture line {}: {s:?}: {e}", n + 1)));
        let (w, m, v) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
        if !(w != 0.0 && v > 0.0 && m.is_finite() && w.is_finite() && v.is_finite()) {
            return Err(Error::Config(format!(
                "mixture line {}: weight must be non-zero and variance positive",
                n + 1
            )));
        }
        out.push((w, m, v));
    }
    if out.is_empty() {
        return Err(Error::Config("mixture file has no components".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec {
    Builtin(String),
    File(PathBuf),
}

impl DistributionSpec {
    pub fn parse(s: &str) -> Self {
        if builtin_spec(s).is_some() {
            DistributionSpec::Builtin(s.to_string())
        } else {
            DistributionSpec::File(PathBuf::from(s))
        }
    }

    /// Short label used in output file names.
    pub fn label(&self) -> String {
        match self {
            DistributionSpec::Builtin(name) => name.clone(),
            DistributionSpec::File(p) => p.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned()),
        }
    }

    pub fn load(&self) -> Result<Mixture> {
        let spec = match self {
            DistributionSpec::Builtin(name) => builtin_spec(name).expect("checked at parse"),
            DistributionSpec::File(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read mixture file {}: {e}", p.display())))?;
                parse_mixture(&text)?
            }
        };
        Mixture::from_gaussians(&spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub order: u32,
    pub k_list: Vec<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub tau: f64,
    pub output_dir: PathBuf,
    /// Prescribed background; `None` selects the equilibrium of the distribution.
    pub background: Option<Maxwellian>,
    /// Relaxation sample count over `[0, 5τ]`.
    pub relax_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            distribution: DistributionSpec::Builtin("f1".into()),
            order: 2,
            k_list: (3..=15).collect(),
            tol: 1e-4,
            max_iter: 2000,
            tau: 1.0,
            output_dir: PathBuf::from("out"),
            background: None,
            relax_samples: 16,
        }
    }
}

fn parse_k_list(value: &str) -> Result<Vec<usize>> {
    let value = value.trim();
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Config(format!("k list entry {s:?}: {e}")));
    if let Some((lo, hi)) = value.split_once("..") {
        let (lo, hi) = (parse(lo)?, parse(hi.trim_start_matches('='))?);
        return Ok((lo..=hi).collect());
    }
    value.split(',').map(parse).collect()
}

impl ExperimentConfig {
    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut bg = [None; 3];
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|e| Error::Config(format!("{key}: {v:?}: {e}")));
            let int = |v: &str| v.parse::<usize>().map_err(|e| Error::Config(format!("{key}: {v:?}: {e}")));
            match key {
                "distribution" | "dist" => self.distribution = DistributionSpec::parse(value),
                "order" | "N" => {
                    self.order = u32::try_from(int(value)?).map_err(|e| Error::Config(format!("{key}: {e}")))?
                }
                "k_list" | "k" => self.k_list = parse_k_list(value)?,
                "kmax" => self.k_list = (3..=int(value)?).collect(),
                "tol" => self.tol = num(value)?,
                "max_iter" => self.max_iter = int(value)?,
                "tau" => self.tau = num(value)?,
                "output_dir" | "out" => self.output_dir = PathBuf::from(value),
                "relax_samples" => self.relax_samples = int(value)?,
                "background_rho" => bg[0] = Some(num(value)?),
                "background_u" => bg[1] = Some(num(value)?),
                "background_theta" => bg[2] = Some(num(value)?),
                other => return Err(Error::Config(format!("unknown config key {other:?}"))),
            }
        }
        match bg {
            [None, None, None] => {}
            [Some(rho), Some(u), Some(theta)] => {
                self.background =
                    Some(Maxwellian::new(rho, u, theta).map_err(|e| Error::Config(format!("background: {e}")))?)
            }
            _ => return Err(Error::Config("background needs rho, u and theta together".into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Config("order must be positive".into()));
        }
        if self.k_list.is_empty() || self.k_list.iter().any(|k| *k < 3) {
            return Err(Error::Config("k list entries must be at least 3".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if self.relax_samples < 2 {
            return Err(Error::Config("relax_samples must be at least 2".into()));
        }
        Ok(())
    }

    /// Canonical text used for the config hash and the CSV echo.
    pub fn canonical(&self) -> String {
        let dist = match &self.distribution {
            DistributionSpec::Builtin(n) => n.clone(),
            DistributionSpec::File(p) => p.display().to_string(),
        };
        let ks: Vec<String> = self.k_list.iter().map(|k| k.to_string()).collect();
        let bg = self.background.map_or("equilibrium".into(), |m| format!("{} {} {}", m.rho, m.u, m.theta));
        format!(
            "distribution={dist};order={};k_list={};tol={:e};max_iter={};tau={};background={bg};relax_samples={}",
            self.order,
            ks.join(","),
            self.tol,
            self.max_iter,
            self.tau,
            self.relax_samples
        )
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn projector_options(&self) -> ProjectorOptions {
        ProjectorOptions { tol: self.tol, max_iter: self.max_iter, ..ProjectorOptions::default() }
    }
}

/// A test distribution with its background and solver frame.
#[derive(Clone, Debug)]
pub struct Problem {
    pub label: String,
    pub f: Mixture,
    pub background: Maxwellian,
}

impl Problem {
    pub fn new(label: impl Into<String>, f: Mixture, background: Option<Maxwellian>) -> Result<Self> {
        let background = match background {
            Some(m) => m,
            None => f.equilibrium()?,
        };
        Ok(Self { label: label.into(), f, background })
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let spec = builtin_spec(name).ok_or_else(|| Error::Config(format!("unknown distribution {name}")))?;
        Self::new(name, Mixture::from_gaussians(&spec)?, None)
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Self::new(cfg.distribution.label(), cfg.distribution.load()?, cfg.background)
    }

    /// First `k` moments in the reduced frame of the background.
    pub fn target(&self, k: usize) -> MomentVector {
        self.f.moments(&self.background.reduced_frame(), k, MomentRule::Gamma)
    }

    /// Continuation sweep over `ks`.
    pub fn solve(&self, ks: &[usize], order: u32, opts: &ProjectorOptions) -> Vec<(usize, Result<NewtonReport>)> {
        project_continuation(ks, |k| Ok(self.target(k)), order, self.background, opts)
    }

    /// `‖f - 𝓕‖₁/‖f‖₁`.
    pub fn l1_error(&self, state: &ClosureState) -> Result<f64> {
        let diff = self.f.combine(1.0, &Mixture::closure(state.clone()), -1.0);
        Ok(diff.l1_norm(ERROR_QUAD_TOL)? / self.f.l1_norm(ERROR_QUAD_TOL)?)
    }

    /// Relative error in the cosine moment `⟨cos(v) ·⟩`.
    pub fn cosine_error(&self, state: &ClosureState) -> Result<f64> {
        let exact = self.f.integrate(f64::cos, ERROR_QUAD_TOL)?;
        let approx = Mixture::closure(state.clone()).integrate(f64::cos, ERROR_QUAD_TOL)?;
        Ok((exact - approx).abs() / exact.abs())
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Per-command exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
    InvalidConfig,
    NotRealizable,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 2,
            Outcome::InvalidConfig => 3,
            Outcome::NotRealizable => 4,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Io(_) => Outcome::InvalidConfig,
            Error::NotRealizable(_) | Error::Pathological => Outcome::NotRealizable,
            Error::Level { source, .. } => Outcome::from_error(source),
            _ => Outcome::NotConverged,
        }
    }

    fn worst(self, other: Self) -> Self {
        if self.code() >= other.code() {
            self
        } else {
            other
        }
    }
}

/// CSV text with a header line, `#` metadata rows, then data rows.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    header: String,
    meta: Vec<String>,
    rows: Vec<String>,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self { header: header.to_string(), ..Self::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        self.meta.push(format!("# {key}={value}"));
    }

    pub fn row(&mut self, fields: &[String]) {
        self.rows.push(fields.join(","));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}", self.header).unwrap();
        for m in &self.meta {
            writeln!(s, "{m}").unwrap();
        }
        for r in &self.rows {
            writeln!(s, "{r}").unwrap();
        }
        s
    }

    /// Writes through a temporary file and a rename.
    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, self.render())?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// Files written and the resulting status of one command.
#[derive(Clone, Debug)]
pub struct CommandResult {
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
}

impl CommandResult {
    fn new() -> Self {
        Self { outcome: Outcome::Success, files: Vec::new(), messages: Vec::new() }
    }

    fn fail(&mut self, k: Option<usize>, e: &Error) {
        self.outcome = self.outcome.worst(Outcome::from_error(e));
        match k {
            Some(k) => self.messages.push(format!("k={k}: {e}")),
            None => self.messages.push(e.to_string()),
        }
    }

    fn absorb(&mut self, r: Result<PathBuf>) {
        match r {
            Ok(p) => self.files.push(p),
            Err(e) => self.fail(None, &e),
        }
    }
}

fn solved(problem: &Problem, cfg: &ExperimentConfig, result: &mut CommandResult) -> Vec<(usize, NewtonReport)> {
    let mut ks = cfg.k_list.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut out = Vec::new();
    for (k, r) in problem.solve(&ks, cfg.order, &cfg.projector_options()) {
        match r.and_then(NewtonReport::into_converged) {
            Ok(report) => out.push((k, report)),
            Err(e) => result.fail(Some(k), &e),
        }
    }
    out
}

fn base_csv(header: &str, cfg: &ExperimentConfig, problem: &Problem) -> Csv {
    let mut csv = Csv::new(header);
    csv.meta("config", cfg.canonical());
    let m = problem.background;
    csv.meta("background", format!("{} {} {}", m.rho, m.u, m.theta));
    csv
}

/// Closure profiles on `[-6, 6]` and converged coefficients per `k`.
pub fn cmd_project(cfg: &ExperimentConfig) -> Result<CommandResult> {
    let problem = Problem::from_config(cfg)?;
    let mut result = CommandResult::new();
    let reports = solved(&problem, cfg, &mut result);
    let (lo, hi) = PROFILE_RANGE;
    let outputs: Vec<Result<PathBuf>> = reports
        .par_iter()
        .flat_map_iter(|(k, report)| {
            let state = &report.final_state;
            let mut profile = base_csv("v,f_exact,f_closure", cfg, &problem);
            profile.meta("grid", format!("uniform [{lo}, {hi}] with {PROFILE_POINTS} points"));
            for i in 0..PROFILE_POINTS {
                let v = lo + (hi - lo) * i as f64 / (PROFILE_POINTS - 1) as f64;
                profile.row(&[fmt(v), fmt(problem.f.eval(v)), fmt(state.eval(v))]);
            }
            let mut alpha = base_csv("j,alpha", cfg, &problem);
            alpha.meta("basis", format!("w^j with w = (v - {})/{}", state.frame().center, state.frame().scale));
            alpha.meta("iterations", report.iterations());
            for (j, a) in state.alpha().iter().enumerate() {
                alpha.row(&[j.to_string(), fmt(*a)]);
            }
            [
                profile.write(&cfg.output_dir, &format!("profile_{}_k{k}.csv", problem.label)),
                alpha.write(&cfg.output_dir, &format!("alpha_{}_k{k}.csv", problem.label)),
            ]
        })
        .collect();
    outputs.into_iter().for_each(|r| result.absorb(r));
    Ok(result)
}

/// Newton histories: relative update and `κ∞` per iteration.
pub fn cmd_newton_diag(cfg: &ExperimentConfig) -> Result<CommandResult> {
    let problem = Problem::from_config(cfg)?;
    let mut result = CommandResult::new();
    let reports = solved(&problem, cfg, &mut result);
    let mut csv = base_csv("k,iteration,rel_update,kappa_inf", cfg, &problem);
    for (k, report) in &reports {
        csv.meta(&format!("k{k}_final_rel_update"), fmt(report.final_rel_update()));
        for (i, it) in report.iterates.iter().enumerate() {
            csv.row(&[k.to_string(), (i + 1).to_string(), fmt(it.rel_update), fmt(it.kappa_inf)]);
        }
    }
    result.absorb(csv.write(&cfg.output_dir, &format!("newton_{}.csv", problem.label)));
    Ok(result)
}

/// Error measures per `k` for a set of converged projections.
pub fn convergence_table(problem: &Problem, reports: &[(usize, NewtonReport)]) -> Result<Vec<(usize, f64, f64)>> {
    reports
        .par_iter()
        .map(|(k, r)| Ok((*k, problem.l1_error(&r.final_state)?, problem.cosine_error(&r.final_state)?)))
        .collect()
}

/// Slopes of `log₁₀ err` against `k` over entries with `k ≥ k_min`.
pub fn convergence_slopes(table: &[(usize, f64, f64)], k_min: usize) -> (f64, f64) {
    let rows: Vec<_> = table.iter().filter(|r| r.0 >= k_min).collect();
    let ks: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let e1: Vec<f64> = rows.iter().map(|r| r.1.log10()).collect();
    let e2: Vec<f64> = rows.iter().map(|r| r.2.log10()).collect();
    (ls_slope(&ks, &e1), ls_slope(&ks, &e2))
}

/// L¹ and cosine-moment errors per `k` with fitted decay slopes.
pub fn cmd_converge(cfg: &ExperimentConfig) -> Result<CommandResult> {
    let problem = Problem::from_config(cfg)?;
    let mut result = CommandResult::new();
    let reports = solved(&problem, cfg, &mut result);
    let table = convergence_table(&problem, &reports)?;
    let mut csv = base_csv("k,err1,err2", cfg, &problem);
    let k_min = if table.iter().filter(|r| r.0 >= 4).count() >= 2 { 4 } else { 0 };
    if table.iter().filter(|r| r.0 >= k_min).count() >= 2 {
        let (s1, s2) = convergence_slopes(&table, k_min);
        csv.meta("slope_log10_err1", fmt(s1));
        csv.meta("slope_log10_err2", fmt(s2));
        csv.meta("slope_k_min", k_min);
    }
    for (k, e1, e2) in &table {
        csv.row(&[k.to_string(), fmt(*e1), fmt(*e2)]);
    }
    result.absorb(csv.write(&cfg.output_dir, &format!("convergence_{}.csv", problem.label)));
    Ok(result)
}

/// Homogeneous BGK relaxation traces per `k`.
pub fn cmd_relax(cfg: &ExperimentConfig) -> Result<CommandResult> {
    let problem = Problem::from_config(cfg)?;
    let mut result = CommandResult::new();
    let reports = solved(&problem, cfg, &mut result);
    let outputs: Vec<Result<PathBuf>> = reports
        .par_iter()
        .map(|(k, report)| {
            let trace = RelaxationTrace::compute(&problem.f, &report.final_state, cfg.tau, cfg.relax_samples)?;
            let norm = problem.f.l1_norm(ERROR_QUAD_TOL)?;
            let mut csv = base_csv("t,l1_error,divergence,dissipation_rate", cfg, &problem);
            csv.meta("tau", cfg.tau);
            csv.meta("l1_error", format!("relative to |f|_1 = {}", fmt(norm)));
            for i in 0..trace.times.len() {
                csv.row(&[
                    fmt(trace.times[i]),
                    fmt(trace.l1_error[i] / norm),
                    fmt(trace.divergence[i]),
                    fmt(trace.dissipation_rate[i]),
                ]);
            }
            csv.write(&cfg.output_dir, &format!("relax_{}_k{k}.csv", problem.label))
        })
        .collect();
    outputs.into_iter().for_each(|r| result.absorb(r));
    Ok(result)
}

/// Structural diagnostics of the hyperbolic assembly per `k`.
pub fn cmd_structure(cfg: &ExperimentConfig) -> Result<CommandResult> {
    let problem = Problem::from_config(cfg)?;
    let mut result = CommandResult::new();
    let reports = solved(&problem, cfg, &mut result);
    let outputs: Vec<Result<PathBuf>> = reports
        .par_iter()
        .map(|(k, report)| {
            let asm =
                assemble_hyperbolic(&report.final_state, &Collision::Bgk { tau: cfg.tau }, None, MomentRule::Panel)?;
            let (a0_spd, a0_min) = check_spd(&asm.a0);
            let (a1_spd, a1_min) = check_spd(&asm.a1);
            let speeds = characteristic_speeds(&asm)?;
            let residue = imaginary_residue(&asm);
            let mut csv = base_csv("quantity,index,value", cfg, &problem);
            csv.meta("basis", format!("w^j with w = (v - {})/{}", asm.frame.center, asm.frame.scale));
            csv.row(&["a0_spd".into(), "0".into(), a0_spd.to_string()]);
            csv.row(&["a0_min_eigenvalue".into(), "0".into(), fmt(a0_min)]);
            csv.row(&["a1_spd".into(), "0".into(), a1_spd.to_string()]);
            csv.row(&["a1_min_eigenvalue".into(), "0".into(), fmt(a1_min)]);
            csv.row(&["max_imaginary_residue".into(), "0".into(), fmt(residue)]);
            for (i, s) in speeds.iter().enumerate() {
                csv.row(&["speed".into(), i.to_string(), fmt(*s)]);
            }
            csv.write(&cfg.output_dir, &format!("structure_{}_k{k}.csv", problem.label))
        })
        .collect();
    outputs.into_iter().for_each(|r| result.absorb(r));
    Ok(result)
}

/// Appends one status line to `run_manifest.txt`.
pub fn record_manifest(cfg: &ExperimentConfig, command: &str, result: &CommandResult) -> Result<()> {
    let path = cfg.output_dir.join("run_manifest.txt");
    let mut text = std::fs::read_to_string(&path).unwrap_or_default();
    if text.is_empty() {
        writeln!(text, "version={}", version_string()).unwrap();
    }
    writeln!(
        text,
        "command={command} config_hash={} exit_status={} files={}",
        cfg.hash(),
        result.outcome.code(),
        result.files.len()
    )
    .unwrap();
    for m in &result.messages {
        writeln!(text, "  {m}").unwrap();
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn version_string() -> String {
    format!("{}-v{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}
