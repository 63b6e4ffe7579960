//! Subcommand implementations. Each returns the process exit code or an
//! error that maps to one.

use std::fmt::{self, Write as _};
use std::io::Write as _;
use std::path::Path;

use smallgain::path::{construct_path_using, default_radii, fmt_sig12, path_csv, Constructor};
use smallgain::sim::{
    check_decrease, check_iss_bound, integrate, DecreaseReport, DecreaseSpec, InputSampling, IssSpec, Signal, SimError,
};
use smallgain::smallgain::{check_strong_sgc, GridSpec, Method, Witness};
use smallgain::{
    check_sgc, compose, construct_path, CompositeLyapunov, DiagOp, ExternalMode, GainOperator, PathError, PathOptions,
    SgcStatus, SgcVerdict, ValidatedPath,
};

use crate::config::{parse_config, ConfigError, Problem, System};
use crate::{Common, Mode};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// Invalid invocation or I/O failure.
    Usage(String),
    /// The requested construction or check failed.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

pub struct Context {
    pub common: Common,
    pub problem: Problem,
}

impl Context {
    pub fn load(common: Common) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(&common.config)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", common.config.display())))?;
        let problem = parse_config(&text)?;
        if !(common.rmax > 0.0) {
            return Err(CliError::Usage("--rmax must be positive".into()));
        }
        if common.grid == 0 {
            return Err(CliError::Usage("--grid must be at least 1".into()));
        }
        if common.scale_sigma.is_some_and(|c| !(c > 0.0)) {
            return Err(CliError::Usage("--scale-sigma must be positive".into()));
        }
        Ok(Context { common, problem })
    }

    fn alpha(&self, mode: &str) -> Result<smallgain::GainExpr<f64>, CliError> {
        self.problem
            .alpha
            .clone()
            .ok_or_else(|| ConfigError::at("/alpha", format!("required for --mode {mode}")).into())
    }

    /// Diagonal operator the path has to decrease under, and the matching
    /// external mode of the certificate.
    fn mode(&self) -> Result<(Option<DiagOp<f64>>, ExternalMode<f64>), CliError> {
        Ok(match self.common.mode {
            None => (None, ExternalMode::General),
            Some(Mode::Max) => (None, ExternalMode::Max),
            Some(Mode::Sum) => {
                let alpha = self.alpha("sum")?;
                (Some(DiagOp::IdPlus(alpha.clone())), ExternalMode::Additive(alpha))
            }
            Some(Mode::Separated) => {
                let (c, alpha) = (self.problem.separated_c, self.alpha("separated")?);
                (Some(DiagOp::Separated { c, alpha: alpha.clone() }), ExternalMode::Separated { c, alpha })
            }
        })
    }

    fn path_options(&self) -> PathOptions<f64> {
        PathOptions { rmax: self.common.rmax, seed: self.common.seed, radii: default_radii() }
    }

    /// Path for the configured constructor, or the dispatch order.
    fn build_path(&self, d: Option<&DiagOp<f64>>) -> Result<ValidatedPath<f64>, PathError> {
        match self.problem.constructor {
            Some(c) => construct_path_using(&self.problem.network, d, &self.path_options(), c),
            None => construct_path(&self.problem.network, d, &self.path_options()),
        }
    }

    fn system(&self, command: &str) -> Result<&System, CliError> {
        self.problem.system.as_ref().ok_or_else(|| ConfigError::at("/model", format!("required by {command}")).into())
    }

    fn certificate(&self) -> Result<(CompositeLyapunov<f64>, Constructor), CliError> {
        let (d, mode) = self.mode()?;
        let vp = self.build_path(d.as_ref()).map_err(|e| CliError::Failed(e.to_string()))?;
        let cl = compose(&self.problem.network, vp.path, self.problem.subsystems(), mode)
            .map_err(|e| CliError::Failed(e.to_string()))?;
        Ok((cl, vp.constructor))
    }

    fn scaled(&self, cl: CompositeLyapunov<f64>) -> CompositeLyapunov<f64> {
        match self.common.scale_sigma {
            Some(c) => cl.with_scaled_sigma(c),
            None => cl,
        }
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn tuple(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_sig12(*x)).collect();
    format!("({})", parts.join(","))
}

/// Witness points are printed scaled to unit max norm.
fn normalized(v: &[f64]) -> Vec<f64> {
    let m = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if m > 0.0 {
        v.iter().map(|x| x / m).collect()
    } else {
        v.to_vec()
    }
}

fn verdict_lines(v: &SgcVerdict<f64>) -> String {
    let label = match (&v.status, v.method) {
        (SgcStatus::CertifiedHolds, _) => "holds",
        (SgcStatus::CertifiedFails(_), _) => "fails",
        (SgcStatus::Inconclusive, Method::Falsification) => "no witness found",
        (SgcStatus::Inconclusive, _) => "inconclusive",
    };
    let mut out = format!("{}: {label} (worst {}, {} samples)\n", v.method, fmt_sig12(v.worst), v.samples);
    match v.witness() {
        Some(Witness::Point(p)) => {
            let _ = writeln!(out, "witness: {}", tuple(&normalized(p)));
        }
        Some(Witness::Cycle { cycle, radius, point }) => {
            let _ = writeln!(out, "witness cycle: {} at r = {}", cycle.display_one_based(), fmt_sig12(*radius));
            if let Some(p) = point {
                let _ = writeln!(out, "witness: {}", tuple(&normalized(p)));
            }
        }
        None => {}
    }
    out
}

pub fn check(ctx: &Context) -> Result<u8, CliError> {
    let net = &ctx.problem.network;
    let grid = GridSpec::with_radii(ctx.common.grid, ctx.common.seed);
    let verdicts = check_sgc(net, &grid);
    let mut out = String::new();
    for v in &verdicts {
        out.push_str(&verdict_lines(v));
    }
    let mut failed = verdicts.iter().any(SgcVerdict::fails);
    let held = verdicts.iter().any(SgcVerdict::holds);
    if let Some(alpha) = &ctx.problem.alpha {
        let v = check_strong_sgc(net, &DiagOp::IdPlus(alpha.clone()), false, &grid);
        out.push_str("strong condition with D = id + alpha, ");
        out.push_str(&verdict_lines(&v));
        failed |= v.fails();
    }
    let code = if failed {
        out.push_str("small gain condition: fails\n");
        1
    } else if held {
        out.push_str("small gain condition: holds\n");
        0
    } else {
        match ctx.build_path(None) {
            Ok(vp) => {
                let _ = writeln!(
                    out,
                    "small gain condition: not refuted; path construction succeeded ({})",
                    vp.constructor
                );
                0
            }
            Err(e) => {
                let _ = writeln!(out, "small gain condition: undecided; path construction failed: {e}");
                1
            }
        }
    };
    emit(&out);
    Ok(code)
}

pub fn path(ctx: &Context) -> Result<u8, CliError> {
    let (d, _) = ctx.mode()?;
    let opts = ctx.path_options();
    let vp = ctx.build_path(d.as_ref()).map_err(|e| CliError::Failed(e.to_string()))?;
    let csv = path_csv(&GainOperator::outer(&ctx.problem.network, d.as_ref()), &vp.path, &opts.radii);
    let summary = format!(
        "constructor: {}\nmin margin: {}\nmin relative margin: {}\n",
        vp.constructor,
        fmt_sig12(vp.report.min_margin()),
        fmt_sig12(vp.report.min_relative_on_grid())
    );
    match &ctx.common.out {
        Some(p) => {
            write_file(p, &csv)?;
            emit(&format!("{summary}wrote {}\n", p.display()));
        }
        None => {
            emit(&csv);
            eprint!("{summary}");
        }
    }
    Ok(0)
}

pub fn certify(ctx: &Context) -> Result<u8, CliError> {
    let (d, _) = ctx.mode()?;
    let (cl, constructor) = ctx.certificate()?;
    let radii = default_radii::<f64>();
    let path = path_csv(&GainOperator::outer(&ctx.problem.network, d.as_ref()), cl.sigma(), &radii);
    let table = cl.general_cond();
    let mut phi = String::from("r,phi\n");
    let mut margins = String::from("r,margin_min\n");
    for k in 0..table.radii.len() {
        let _ = writeln!(phi, "{},{}", fmt_sig12(table.radii[k]), fmt_sig12(table.phi[k]));
        let _ = writeln!(margins, "{},{}", fmt_sig12(table.radii[k]), fmt_sig12(table.margins[k]));
    }
    let mut report = format!("constructor: {constructor}\nmode: {}\n", cl.mode());
    if cl.phi_is_identity() {
        report.push_str("phi = identity (no external gains)\n");
    } else {
        match cl.iss_threshold(1.0) {
            Ok(t) => {
                let _ = writeln!(report, "phi derived; V threshold for |u| = 1: {}", fmt_sig12(t));
            }
            Err(e) => {
                let _ = writeln!(report, "phi derived; {e}");
            }
        }
    }
    let _ = writeln!(report, "min margin of the decrease condition: {}", fmt_sig12(table.min_margin()));
    match &ctx.common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
            for (name, body) in [("path.csv", &path), ("phi.csv", &phi), ("margins.csv", &margins)] {
                write_file(&dir.join(name), body)?;
            }
            emit(&format!("{report}wrote {}/{{path,phi,margins}}.csv\n", dir.display()));
        }
        None => {
            emit(&format!("{report}# path.csv\n{path}# phi.csv\n{phi}# margins.csv\n{margins}"));
        }
    }
    Ok(0)
}

fn initial_state(ctx: &Context, sys: &System) -> Vec<f64> {
    ctx.problem.simulation.x0.clone().unwrap_or_else(|| vec![1.0; sys.model.state_dim()])
}

fn input_signal(ctx: &Context, sys: &System) -> Signal {
    ctx.problem.simulation.input.clone().unwrap_or_else(|| Signal::zero(sys.model.input_dim()))
}

pub fn simulate(ctx: &Context) -> Result<u8, CliError> {
    let sys = ctx.system("simulate")?;
    let sim = &ctx.problem.simulation;
    let cl = match ctx.certificate() {
        Ok((cl, _)) => Some(ctx.scaled(cl)),
        Err(e) => {
            eprintln!("no certificate, V column is nan: {e}");
            None
        }
    };
    let x0 = initial_state(ctx, sys);
    let u = input_signal(ctx, sys);
    let (traj, code, note) = match integrate(&sys.model, cl.as_ref(), &x0, &u, sim.t_end, sim.dt) {
        Ok(t) => (t, 0, None),
        Err(SimError::Diverged { t, trajectory }) => {
            (*trajectory, 1, Some(format!("Diverged: state norm exceeded 1e12 at t = {}", fmt_sig12(t))))
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let csv = traj.to_csv();
    match &ctx.common.out {
        Some(p) => {
            write_file(p, &csv)?;
            emit(&format!("{} samples, wrote {}\n", traj.len(), p.display()));
        }
        None => emit(&csv),
    }
    if let Some(n) = note {
        eprintln!("{n}");
    }
    Ok(code)
}

/// Result of one verification stage for the overall summary.
struct Stage {
    passed: bool,
    violations: usize,
}

fn summary(pass: bool, violations: usize, worst: f64) -> String {
    format!("verdict={} violations={violations} worst={}", if pass { "pass" } else { "fail" }, fmt_sig12(worst))
}

pub fn verify(ctx: &Context) -> Result<u8, CliError> {
    let sys = ctx.system("verify")?;
    let sim = &ctx.problem.simulation;
    let (cl, constructor) = ctx.certificate()?;
    let cl = ctx.scaled(cl);
    let mut out = format!("certificate for the {} model: {constructor} path, {} mode\n", sys.family, cl.mode());
    if let Some(c) = ctx.common.scale_sigma {
        let _ = writeln!(out, "path scaled by {} after composition", fmt_sig12(c));
    }
    let mut stages = Vec::new();
    let mut worst = f64::NEG_INFINITY;

    let decrease = |label: &str, input: InputSampling, out: &mut String| -> DecreaseReport {
        let spec = DecreaseSpec { samples: sim.samples, input, seed: ctx.common.seed, ..DecreaseSpec::default() };
        let r = check_decrease(&sys.model, &cl, &spec);
        let _ = write!(out, "== decrease, {label}\n{r}");
        r
    };
    for (label, input) in [("u = 0", InputSampling::Zero), ("matched input", InputSampling::Matched)] {
        let r = decrease(label, input, &mut out);
        worst = worst.max(r.worst);
        stages.push(Stage { passed: r.passed(), violations: r.violations });
    }

    let iss = |input: Signal| IssSpec {
        runs: if sim.x0.is_some() { 1 } else { sim.runs },
        t_end: sim.t_end,
        dt: sim.dt,
        input,
        x0_radius: sim.x0_radius,
        x0: sim.x0.clone(),
        seed: ctx.common.seed,
    };
    let mut inputs = vec![("u = 0", Signal::zero(sys.model.input_dim()))];
    if let Some(u) = sim.input.clone().filter(|u| u.sup_norm() > 0.0) {
        inputs.push(("configured input", u));
    }
    for (label, u) in inputs {
        let _ = writeln!(out, "== trajectories, {label}");
        match check_iss_bound(&sys.model, &cl, &iss(u)) {
            Ok(r) => {
                let _ = write!(out, "{r}");
                stages.push(Stage { passed: r.passed(), violations: r.violations() });
            }
            Err(e) => {
                let _ = writeln!(out, "{e}\n{}", summary(false, 1, f64::INFINITY));
                stages.push(Stage { passed: false, violations: 1 });
            }
        }
    }

    let pass = stages.iter().all(|s| s.passed);
    let violations = stages.iter().map(|s| s.violations).sum();
    let _ = writeln!(
        out,
        "== overall (worst normalized derivative over the decrease checks)\n{}",
        summary(pass, violations, worst)
    );
    match &ctx.common.out {
        Some(p) => {
            write_file(p, &out)?;
            emit(&out);
        }
        None => emit(&out),
    }
    Ok(if pass { 0 } else { 1 })
}
