//! Empirical checks of a composed certificate against a model: sampled
//! decrease of `V` along the flow and boundedness along trajectories.

use std::fmt;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::integrate::{integrate, Signal};
use super::models::SystemModel;
use super::SimError;
use crate::lyapunov::CompositeLyapunov;
use crate::path::fmt_sig12;
use crate::scalar::log_grid;

/// How inputs are drawn for each sampled state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputSampling {
    Zero,
    /// Largest admissible norm for the sampled state, `|u| = phi(V(x) / (1 + guard))`.
    Matched,
    /// Fixed norm; states below the guarded threshold are skipped.
    Norm(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseSpec {
    pub samples: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub input: InputSampling,
    pub guard: f64,
    pub seed: u64,
}

impl Default for DecreaseSpec {
    fn default() -> Self {
        DecreaseSpec { samples: 10_000, r_min: 1e-3, r_max: 1e3, input: InputSampling::Zero, guard: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseReport {
    pub checked: usize,
    pub skipped: usize,
    pub violations: usize,
    /// Largest `dV/dt / (1 + V)` over the checked samples.
    pub worst: f64,
    pub worst_state: Vec<f64>,
}

impl DecreaseReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for DecreaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "decrease check: {} samples, {} skipped below threshold", self.checked, self.skipped)?;
        let state: Vec<String> = self.worst_state.iter().map(|v| fmt_sig12(*v)).collect();
        writeln!(f, "worst normalized derivative at x = ({})", state.join(","))?;
        summary_line(f, self.passed(), self.violations, self.worst)
    }
}

fn summary_line(f: &mut fmt::Formatter<'_>, pass: bool, violations: usize, worst: f64) -> fmt::Result {
    writeln!(f, "verdict={} violations={} worst={}", if pass { "pass" } else { "fail" }, violations, fmt_sig12(worst))
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    loop {
        let d = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let n = d.norm();
        if n > 1e-12 || dim == 0 {
            return if dim == 0 { d } else { d / n };
        }
    }
}

fn sample_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

struct Sample {
    skipped: bool,
    normalized: f64,
    violation: bool,
    x: Vec<f64>,
}

/// Samples states on log-spaced radii in `[r_min, r_max]` with uniform
/// directions, keeps those with `V(x) >= threshold(|u|) (1 + guard)` and
/// estimates `dV/dt` by central differences along `f(x, u)` with step
/// `h = 1e-6 (1 + |x|)`. A violation is an estimate `>= -1e-8 (1 + V)`.
pub fn check_decrease(model: &SystemModel, cl: &CompositeLyapunov<f64>, spec: &DecreaseSpec) -> DecreaseReport {
    let n = model.state_dim();
    let m = model.input_dim();
    let radii = log_grid(spec.r_min, spec.r_max, spec.samples);
    let results: Vec<Sample> = radii
        .par_iter()
        .enumerate()
        .map(|(k, &r)| {
            let mut rng = sample_rng(spec.seed, k);
            let x = unit_gaussian(&mut rng, n) * r;
            let v = cl.value(x.as_slice());
            let u_norm = match spec.input {
                InputSampling::Zero => 0.0,
                InputSampling::Matched => cl.phi_at(v / (1.0 + spec.guard) * (1.0 - 1e-9)),
                InputSampling::Norm(a) => a,
            };
            let skip = |x: DVector<f64>| Sample {
                skipped: true,
                normalized: f64::NEG_INFINITY,
                violation: false,
                x: x.as_slice().to_vec(),
            };
            let threshold = match cl.iss_threshold(u_norm) {
                Ok(t) => t,
                Err(_) => return skip(x),
            };
            if !(v > 0.0) || v < threshold * (1.0 + spec.guard) {
                return skip(x);
            }
            let u = unit_gaussian(&mut rng, m) * u_norm;
            let f = model.rhs(&x, &u);
            let h = 1e-6 * (1.0 + x.norm());
            let fwd = cl.value((&x + &f * h).as_slice());
            let bwd = cl.value((&x - &f * h).as_slice());
            let d = (fwd - bwd) / (2.0 * h);
            Sample {
                skipped: false,
                normalized: d / (1.0 + v),
                violation: d >= -1e-8 * (1.0 + v),
                x: x.as_slice().to_vec(),
            }
        })
        .collect();
    let mut report =
        DecreaseReport { checked: 0, skipped: 0, violations: 0, worst: f64::NEG_INFINITY, worst_state: Vec::new() };
    for s in results {
        if s.skipped {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        report.violations += s.violation as usize;
        if s.normalized > report.worst {
            report.worst = s.normalized;
            report.worst_state = s.x;
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct IssSpec {
    pub runs: usize,
    pub t_end: f64,
    pub dt: f64,
    pub input: Signal,
    /// Initial states are drawn uniformly on the sphere of this radius
    /// unless `x0` is given.
    pub x0_radius: f64,
    /// Fixed initial state used by every run.
    pub x0: Option<Vec<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub x0: Vec<f64>,
    pub ok: bool,
    /// Zero input: `|x(T)| / |x0|`. Otherwise: `max V / threshold` over the last quarter.
    pub ratio: f64,
    /// Largest increase of `V` between consecutive steps.
    pub max_rise: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IssReport {
    pub zero_input: bool,
    pub threshold: f64,
    pub runs: Vec<RunResult>,
}

impl IssReport {
    pub fn violations(&self) -> usize {
        self.runs.iter().filter(|r| !r.ok).count()
    }

    pub fn worst(&self) -> f64 {
        self.runs.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

impl fmt::Display for IssReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero_input {
            writeln!(f, "0-GAS check: {} runs, worst |x(T)|/|x0| = {}", self.runs.len(), fmt_sig12(self.worst()))?;
        } else {
            writeln!(
                f,
                "ISS bound check: {} runs, threshold {}, worst V/threshold over the last quarter = {}",
                self.runs.len(),
                fmt_sig12(self.threshold),
                fmt_sig12(self.worst())
            )?;
        }
        let rise = self.runs.iter().map(|r| r.max_rise).fold(f64::NEG_INFINITY, f64::max);
        writeln!(f, "largest per-step rise of V: {}", fmt_sig12(rise))?;
        summary_line(f, self.passed(), self.violations(), self.worst())
    }
}

/// Allowed rise of `V` per integration step.
pub const V_DRIFT: f64 = 1e-8;
/// Required contraction `|x(T)| / |x0|` without input.
pub const CONTRACTION: f64 = 1e-3;
/// Slack on the threshold for bounded inputs.
pub const SETTLE_SLACK: f64 = 0.1;

/// Zero input: `V` nonincreasing up to `1e-8 max(1, V)` per step and
/// `|x(T)| < 1e-3 |x0|`. Bounded input: `V(t) <= 1.1 threshold(|u|_inf)` on
/// the last quarter of the horizon.
pub fn check_iss_bound(
    model: &SystemModel,
    cl: &CompositeLyapunov<f64>,
    spec: &IssSpec,
) -> Result<IssReport, SimError> {
    let u_sup = spec.input.sup_norm();
    let zero_input = u_sup == 0.0;
    let threshold = cl.iss_threshold(u_sup).map_err(|e| SimError::BadParameters(e.to_string()))?;
    let n = model.state_dim();
    if spec.x0.as_ref().is_some_and(|x| x.len() != n) {
        return Err(SimError::BadParameters(format!("x0 has the wrong dimension (expected {n})")));
    }
    let runs = (0..spec.runs)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(spec.seed, k);
            let x0 = match &spec.x0 {
                Some(x) => DVector::from_column_slice(x),
                None => unit_gaussian(&mut rng, n) * spec.x0_radius,
            };
            let tr = match integrate(model, Some(cl), x0.as_slice(), &spec.input, spec.t_end, spec.dt) {
                Ok(tr) => tr,
                Err(SimError::Diverged { .. }) => {
                    return Ok(RunResult {
                        x0: x0.as_slice().to_vec(),
                        ok: false,
                        ratio: f64::INFINITY,
                        max_rise: f64::INFINITY,
                        diverged: true,
                    })
                }
                Err(e) => return Err(e),
            };
            let v = tr.v.as_ref().expect("certificate attached");
            let max_rise = v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            let (ok, ratio) = if zero_input {
                let monotone = v.windows(2).all(|w| w[1] <= w[0] + V_DRIFT * w[0].max(1.0));
                let x0n = x0.norm();
                let xt = tr.x.last().unwrap().norm();
                let ratio = if x0n > 0.0 { xt / x0n } else { xt };
                (monotone && (xt < CONTRACTION * x0n || xt == 0.0), ratio)
            } else {
                let start = tr.t.iter().position(|&t| t >= 0.75 * spec.t_end).unwrap_or(0);
                let vmax = v[start..].iter().copied().fold(0.0, f64::max);
                let ratio = if threshold > 0.0 { vmax / threshold } else { vmax };
                (vmax <= (1.0 + SETTLE_SLACK) * threshold, ratio)
            };
            Ok(RunResult { x0: x0.as_slice().to_vec(), ok, ratio, max_rise, diverged: false })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(IssReport { zero_input, threshold, runs })
}
