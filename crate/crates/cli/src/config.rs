//! JSON network configs. Decoding errors carry JSON-pointer locations.

use std::fmt;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;
use smallgain::path::Constructor;
use smallgain::sim::{cg_gains, linear_gains, CohenGrossberg, LinearInterconnection, Signal, SystemModel};
use smallgain::{parse_gain, ExternalCoupling, GainExpr, GainNetwork, LyapunovFn, Maf, SubsystemSpec};

/// A config error located by a JSON pointer into the document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { pointer: pointer.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ptr = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "config error at {ptr}: {}", self.message)
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn join(base: &str, token: impl fmt::Display) -> String {
    format!("{base}/{}", escape(&token.to_string()))
}

/// Deserializes `v` and reports failures relative to `base`.
fn decode<T: DeserializeOwned>(v: &Value, base: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let mut ptr = base.to_string();
        for seg in e.path().iter() {
            match seg {
                serde_path_to_error::Segment::Seq { index } => ptr = join(&ptr, index),
                serde_path_to_error::Segment::Map { key } => ptr = join(&ptr, key),
                serde_path_to_error::Segment::Enum { variant } => ptr = join(&ptr, variant),
                serde_path_to_error::Segment::Unknown => {}
            }
        }
        ConfigError::at(ptr, e.inner().to_string())
    })
}

fn gain(text: &str, ptr: &str) -> Result<GainExpr<f64>> {
    parse_gain(text).map_err(|e| ConfigError::at(ptr, format!("{e} in {text:?}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: usize,
    gains: Option<Vec<Vec<String>>>,
    external_gains: Option<Vec<String>>,
    mu: Option<Value>,
    coupling: Option<Value>,
    alpha: Option<String>,
    separated_c: Option<f64>,
    constructor: Option<String>,
    model: Option<Value>,
    simulation: Option<Value>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum MafSpec {
    Sum,
    Max,
    OuterSum(String),
    BlockMaxSum(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum CouplingSpec {
    Joint,
    Additive(String),
}

/// Either one value for every row or an array with one value per row.
fn per_row<T: DeserializeOwned + Clone>(v: &Value, n: usize, ptr: &str) -> Result<Vec<T>> {
    match v {
        Value::Array(items) => {
            if items.len() != n {
                return Err(ConfigError::at(ptr, format!("expected {n} entries, got {}", items.len())));
            }
            items.iter().enumerate().map(|(i, x)| decode(x, &join(ptr, i))).collect()
        }
        other => Ok(vec![decode(other, ptr)?; n]),
    }
}

fn maf(spec: &MafSpec, n: usize, ptr: &str) -> Result<Maf<f64>> {
    Ok(match spec {
        MafSpec::Sum => Maf::Sum,
        MafSpec::Max => Maf::Max,
        MafSpec::OuterSum(g) => Maf::OuterSum(gain(g, &join(ptr, "outer_sum"))?),
        MafSpec::BlockMaxSum(blocks) => {
            let mut out = Vec::with_capacity(blocks.len());
            for (b, block) in blocks.iter().enumerate() {
                let mut idx = Vec::with_capacity(block.len());
                for (k, &j) in block.iter().enumerate() {
                    if j == 0 || j > n + 1 {
                        let p = join(&join(&join(ptr, "block_max_sum"), b), k);
                        return Err(ConfigError::at(p, format!("index {j} outside 1..={}", n + 1)));
                    }
                    idx.push(j - 1);
                }
                out.push(idx);
            }
            Maf::BlockMaxSum(out)
        }
    })
}

/// Per-block matrix: a number is a `1 x 1` block, otherwise an array of rows.
fn matrix(v: &Value, ptr: &str) -> Result<DMatrix<f64>> {
    if let Some(x) = v.as_f64() {
        return Ok(DMatrix::from_element(1, 1, x));
    }
    let rows: Vec<Vec<f64>> = decode(v, ptr)?;
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(ConfigError::at(ptr, "matrix rows must be nonempty and of equal length"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn is_matrix(v: &Value) -> bool {
    v.as_array().is_some_and(|rows| {
        !rows.is_empty() && rows.iter().all(|r| r.as_array().is_some_and(|r| r.iter().all(Value::is_number)))
    })
}

/// One matrix shared by all blocks, or an array with one matrix per block.
fn block_matrices(v: &Value, n: usize, ptr: &str) -> Result<Vec<DMatrix<f64>>> {
    if v.is_number() || is_matrix(v) {
        return Ok(vec![matrix(v, ptr)?; n]);
    }
    let items = v.as_array().ok_or_else(|| ConfigError::at(ptr, "expected a number, a matrix or one per block"))?;
    if items.len() != n {
        return Err(ConfigError::at(ptr, format!("expected {n} blocks, got {}", items.len())));
    }
    items.iter().enumerate().map(|(i, x)| matrix(x, &join(ptr, i))).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearSpec {
    #[allow(dead_code)]
    family: String,
    a: Value,
    b: Value,
    #[serde(default)]
    delta: Option<Value>,
    #[serde(default)]
    q: Option<Value>,
    #[serde(default)]
    epsilon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CgSpec {
    #[allow(dead_code)]
    family: String,
    weights: Value,
    lower: Value,
    upper: Value,
    decay: Value,
    activation: Value,
    #[serde(default)]
    rho: Option<String>,
    #[serde(default)]
    epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    x0: Option<Vec<f64>>,
    input: Option<Value>,
    #[serde(alias = "T")]
    t_end: Option<f64>,
    dt: Option<f64>,
    runs: Option<usize>,
    samples: Option<usize>,
    x0_radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    kind: String,
    value: Option<Vec<f64>>,
    at: Option<f64>,
    amplitude: Option<Vec<f64>>,
    omega: Option<f64>,
    times: Option<Vec<f64>>,
    values: Option<Vec<Vec<f64>>>,
}

/// Simulation settings with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub x0: Option<Vec<f64>>,
    pub input: Option<Signal>,
    pub t_end: f64,
    pub dt: f64,
    pub runs: usize,
    pub samples: usize,
    pub x0_radius: f64,
}

impl Default for Simulation {
    fn default() -> Self {
        Simulation { x0: None, input: None, t_end: 20.0, dt: 1e-2, runs: 50, samples: 10_000, x0_radius: 1.0 }
    }
}

/// A concrete system with its subsystem Lyapunov functions.
#[derive(Debug, Clone)]
pub struct System {
    pub family: &'static str,
    pub model: SystemModel,
    pub subsystems: Vec<SubsystemSpec<f64>>,
}

/// A decoded config.
#[derive(Debug, Clone)]
pub struct Problem {
    pub network: GainNetwork<f64>,
    pub alpha: Option<GainExpr<f64>>,
    pub separated_c: f64,
    /// Constructor used instead of the dispatch order.
    pub constructor: Option<Constructor>,
    pub system: Option<System>,
    pub simulation: Simulation,
}

impl Problem {
    /// Lyapunov functions of the model, or `|x_i|` on scalar blocks without one.
    pub fn subsystems(&self) -> Vec<SubsystemSpec<f64>> {
        match &self.system {
            Some(s) => s.subsystems.clone(),
            None => (0..self.network.n()).map(|_| SubsystemSpec::new(1, LyapunovFn::Norm)).collect(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<Problem> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::at("", format!("invalid JSON at line {} column {}: {e}", e.line(), e.column())))?;
    let raw: RawConfig = decode(&doc, "")?;
    let n = raw.n;
    if n == 0 {
        return Err(ConfigError::at("/n", "must be at least 1"));
    }
    let alpha = raw.alpha.as_deref().map(|a| gain(a, "/alpha")).transpose()?;
    let separated_c = raw.separated_c.unwrap_or(1.0);
    if !(separated_c > 0.0) {
        return Err(ConfigError::at("/separated_c", "must be positive"));
    }
    let constructor = raw
        .constructor
        .as_deref()
        .map(|c| c.parse::<Constructor>().map_err(|e| ConfigError::at("/constructor", e)))
        .transpose()?;
    let (network, system) = match &raw.model {
        Some(m) => {
            for (field, present) in [
                ("gains", raw.gains.is_some()),
                ("external_gains", raw.external_gains.is_some()),
                ("mu", raw.mu.is_some()),
                ("coupling", raw.coupling.is_some()),
            ] {
                if present {
                    return Err(ConfigError::at(join("", field), "gains are derived from /model; remove this field"));
                }
            }
            let (net, sys) = build_model(m, n)?;
            (net, Some(sys))
        }
        None => (build_network(&raw, n)?, None),
    };
    let simulation = match &raw.simulation {
        Some(v) => build_simulation(v, system.as_ref())?,
        None => Simulation::default(),
    };
    Ok(Problem { network, alpha, separated_c, constructor, system, simulation })
}

fn build_network(raw: &RawConfig, n: usize) -> Result<GainNetwork<f64>> {
    let rows = raw.gains.as_ref().ok_or_else(|| ConfigError::at("/gains", "required when no model is given"))?;
    if rows.len() != n {
        return Err(ConfigError::at("/gains", format!("expected {n} rows, got {}", rows.len())));
    }
    let mut gamma = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let rp = join("/gains", i);
        if row.len() != n {
            return Err(ConfigError::at(rp, format!("expected {n} entries, got {}", row.len())));
        }
        let parsed = row.iter().enumerate().map(|(j, g)| gain(g, &join(&rp, j))).collect::<Result<Vec<_>>>()?;
        if !parsed[i].is_zero() {
            return Err(ConfigError::at(join(&rp, i), "diagonal gains must be 0"));
        }
        gamma.push(parsed);
    }
    let gamma_u = match &raw.external_gains {
        None => vec![GainExpr::Zero; n],
        Some(v) if v.len() != n => {
            return Err(ConfigError::at("/external_gains", format!("expected {n} entries, got {}", v.len())))
        }
        Some(v) => v.iter().enumerate().map(|(i, g)| gain(g, &join("/external_gains", i))).collect::<Result<_>>()?,
    };
    let mu_specs: Vec<MafSpec> = match &raw.mu {
        None => vec![MafSpec::Sum; n],
        Some(v) => per_row(v, n, "/mu")?,
    };
    let mu = mu_specs
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let p = if matches!(raw.mu, Some(Value::Array(_))) { join("/mu", i) } else { "/mu".into() };
            maf(m, n, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    let coupling_specs: Vec<CouplingSpec> = match &raw.coupling {
        None => vec![CouplingSpec::Joint; n],
        Some(v) => per_row(v, n, "/coupling")?,
    };
    let coupling = coupling_specs
        .iter()
        .enumerate()
        .map(|(i, c)| match c {
            CouplingSpec::Joint => Ok(ExternalCoupling::Joint),
            CouplingSpec::Additive(g) => {
                Ok(ExternalCoupling::Additive(gain(g, &join(&join("/coupling", i), "additive"))?))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    GainNetwork::with_coupling(gamma, gamma_u, mu, coupling).map_err(|e| {
        let ptr = match &e {
            smallgain::NetworkError::Incompatible { row, .. } => join("/mu", row),
            smallgain::NetworkError::NonZeroDiagonal(i) => join(&join("/gains", i), i),
            smallgain::NetworkError::Shape(_) => String::new(),
        };
        ConfigError::at(ptr, e.to_string())
    })
}

fn family(v: &Value) -> Result<&str> {
    v.get("family")
        .and_then(Value::as_str)
        .ok_or_else(|| ConfigError::at("/model/family", "required: \"linear\" or \"cohen_grossberg\""))
}

fn build_model(v: &Value, n: usize) -> Result<(GainNetwork<f64>, System)> {
    let bad = |ptr: &str, e: smallgain::sim::SimError| ConfigError::at(ptr, e.to_string());
    match family(v)? {
        "linear" => {
            let spec: LinearSpec = decode(v, "/model")?;
            let a = block_matrices(&spec.a, n, "/model/a")?;
            let b = block_matrices(&spec.b, n, "/model/b")?;
            let delta = match &spec.delta {
                None => (0..n).map(|i| (0..n).map(|j| DMatrix::zeros(a[i].nrows(), a[j].nrows())).collect()).collect(),
                Some(Value::Number(x)) => {
                    let d = x.as_f64().unwrap_or(0.0);
                    (0..n)
                        .map(|i| {
                            (0..n)
                                .map(|j| {
                                    DMatrix::from_element(a[i].nrows(), a[j].nrows(), if i == j { 0.0 } else { d })
                                })
                                .collect()
                        })
                        .collect()
                }
                Some(other) => {
                    let rows = other.as_array().filter(|r| r.len() == n).ok_or_else(|| {
                        ConfigError::at("/model/delta", format!("expected a number or an {n} x {n} array of blocks"))
                    })?;
                    let mut out = Vec::with_capacity(n);
                    for (i, row) in rows.iter().enumerate() {
                        let rp = join("/model/delta", i);
                        let cells = row
                            .as_array()
                            .filter(|r| r.len() == n)
                            .ok_or_else(|| ConfigError::at(&rp, format!("expected {n} blocks")))?;
                        let mut blocks = Vec::with_capacity(n);
                        for (j, cell) in cells.iter().enumerate() {
                            blocks.push(if i == j || cell.is_null() {
                                DMatrix::zeros(a[i].nrows(), a[j].nrows())
                            } else {
                                matrix(cell, &join(&rp, j))?
                            });
                        }
                        out.push(blocks);
                    }
                    out
                }
            };
            let q = match &spec.q {
                None => a.iter().map(|m| DMatrix::identity(m.nrows(), m.nrows())).collect(),
                Some(Value::Number(x)) => {
                    let c = x.as_f64().unwrap_or(1.0);
                    a.iter().map(|m| DMatrix::identity(m.nrows(), m.nrows()) * c).collect()
                }
                Some(other) => block_matrices(other, n, "/model/q")?,
            };
            let sys = LinearInterconnection { a, delta, b };
            let lg = linear_gains(&sys, &q, spec.epsilon.unwrap_or(0.5)).map_err(|e| bad("/model", e))?;
            let model = sys.model().map_err(|e| bad("/model", e))?;
            let subsystems = lg.subsystems();
            Ok((lg.network, System { family: "linear", model, subsystems }))
        }
        "cohen_grossberg" => {
            let spec: CgSpec = decode(v, "/model")?;
            let weights: Vec<Vec<f64>> = match &spec.weights {
                Value::Number(t) => {
                    let t = t.as_f64().unwrap_or(0.0);
                    (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { t }).collect()).collect()
                }
                other => decode(other, "/model/weights")?,
            };
            let lower: Vec<f64> = per_row(&spec.lower, n, "/model/lower")?;
            let upper: Vec<f64> = per_row(&spec.upper, n, "/model/upper")?;
            let gains_of = |v: &Value, ptr: &str| -> Result<Vec<GainExpr<f64>>> {
                let texts: Vec<String> = per_row(v, n, ptr)?;
                let per = v.is_array();
                texts
                    .iter()
                    .enumerate()
                    .map(|(i, t)| gain(t, &if per { join(ptr, i) } else { ptr.to_string() }))
                    .collect()
            };
            let decay = gains_of(&spec.decay, "/model/decay")?;
            let activation = gains_of(&spec.activation, "/model/activation")?;
            let rho = match &spec.rho {
                Some(r) => gain(r, "/model/rho")?,
                None => GainExpr::linear(1.0),
            };
            let epsilon = spec.epsilon.unwrap_or_else(|| lower.iter().copied().fold(f64::INFINITY, f64::min) / 2.0);
            let cg = CohenGrossberg { weights, lower, upper, decay, activation, rho, epsilon };
            let net = cg_gains(&cg).map_err(|e| bad("/model", e))?;
            let model = cg.model().map_err(|e| bad("/model", e))?;
            let subsystems = cg.subsystems();
            Ok((net, System { family: "cohen_grossberg", model, subsystems }))
        }
        other => Err(ConfigError::at("/model/family", format!("unknown family {other:?}"))),
    }
}

fn build_simulation(v: &Value, system: Option<&System>) -> Result<Simulation> {
    let raw: RawSimulation = decode(v, "/simulation")?;
    let d = Simulation::default();
    let sim = Simulation {
        x0: raw.x0,
        input: raw.input.as_ref().map(|i| build_input(i, "/simulation/input")).transpose()?,
        t_end: raw.t_end.unwrap_or(d.t_end),
        dt: raw.dt.unwrap_or(d.dt),
        runs: raw.runs.unwrap_or(d.runs),
        samples: raw.samples.unwrap_or(d.samples),
        x0_radius: raw.x0_radius.unwrap_or(d.x0_radius),
    };
    if !(sim.dt > 0.0 && sim.t_end >= sim.dt) {
        return Err(ConfigError::at("/simulation/dt", "need dt > 0 and t_end >= dt"));
    }
    if let Some(sys) = system {
        if let Some(x0) = &sim.x0 {
            if x0.len() != sys.model.state_dim() {
                return Err(ConfigError::at(
                    "/simulation/x0",
                    format!("expected {} entries, got {}", sys.model.state_dim(), x0.len()),
                ));
            }
        }
        if let Some(u) = &sim.input {
            if u.dim() != sys.model.input_dim() {
                return Err(ConfigError::at(
                    "/simulation/input",
                    format!("input dimension {} does not match the model ({})", u.dim(), sys.model.input_dim()),
                ));
            }
        }
    }
    Ok(sim)
}

fn build_input(v: &Value, ptr: &str) -> Result<Signal> {
    let raw: RawInput = decode(v, ptr)?;
    let need = |field: &str| ConfigError::at(join(ptr, field), format!("required for kind {:?}", raw.kind));
    match raw.kind.as_str() {
        "constant" => Ok(Signal::Constant(raw.value.clone().ok_or_else(|| need("value"))?)),
        "step" => {
            Ok(Signal::Step { at: raw.at.unwrap_or(0.0), value: raw.value.clone().ok_or_else(|| need("value"))? })
        }
        "sinusoid" => Ok(Signal::Sinusoid {
            amplitude: raw.amplitude.clone().ok_or_else(|| need("amplitude"))?,
            omega: raw.omega.ok_or_else(|| need("omega"))?,
        }),
        "piecewise" => {
            let times = raw.times.clone().ok_or_else(|| need("times"))?;
            let values = raw.values.clone().ok_or_else(|| need("values"))?;
            if times.is_empty() || times.len() != values.len() || times.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ConfigError::at(join(ptr, "times"), "need increasing times, one per value"));
            }
            if values.iter().any(|v| v.len() != values[0].len()) {
                return Err(ConfigError::at(join(ptr, "values"), "all values need the same dimension"));
            }
            Ok(Signal::Piecewise { times, values })
        }
        other => Err(ConfigError::at(join(ptr, "kind"), format!("unknown kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> ConfigError {
        parse_config(text).unwrap_err()
    }

    #[test]
    fn pointer_to_bad_gain() {
        let e = err(r#"{"n": 2, "gains": [["0", "0.5*s"], ["0.5*q", "0"]]}"#);
        assert_eq!(e.pointer, "/gains/1/0");
        assert!(e.message.contains("position"), "{}", e.message);
    }

    #[test]
    fn pointer_to_unknown_field() {
        let e = err(r#"{"n": 1, "gains": [["0"]], "simulation": {"dt": 0.1, "bogus": 1}}"#);
        assert_eq!(e.pointer, "/simulation/bogus");
        let e = err(r#"{"n": 1, "gains": [["0"]], "extra": true}"#);
        assert_eq!(e.pointer, "/extra");
    }

    #[test]
    fn pointer_into_typed_field() {
        let e = err(r#"{"n": 2, "gains": [["0", "0"], ["0", "0"]], "mu": ["sum", {"outer_sum": 3}]}"#);
        assert!(e.pointer.starts_with("/mu/1"), "{}", e.pointer);
        let e = err(r#"{"n": "two"}"#);
        assert_eq!(e.pointer, "/n");
    }

    #[test]
    fn network_fields() {
        let p = parse_config(
            r#"{"n": 2, "gains": [["0", "0.5*s"], ["0.5*s", "0"]], "external_gains": ["1*s", "0"],
                "mu": [{"block_max_sum": [[2, 3]]}, "max"], "alpha": "0.1*s"}"#,
        )
        .unwrap();
        assert_eq!(p.network.maf(0), &Maf::BlockMaxSum(vec![vec![1, 2]]));
        assert_eq!(p.network.maf(1), &Maf::Max);
        assert_eq!(p.network.external_gain(0), &GainExpr::linear(1.0));
        assert_eq!(p.alpha, Some(GainExpr::linear(0.1)));
        assert!(p.system.is_none());
    }

    #[test]
    fn incompatible_row_is_located() {
        let e = err(r#"{"n": 2, "gains": [["0", "0.5*s"], ["0.5*s", "0"]], "mu": [{"block_max_sum": [[3]]}, "sum"]}"#);
        assert_eq!(e.pointer, "/mu/0");
        let e = err(r#"{"n": 2, "gains": [["1*s", "0.5*s"], ["0.5*s", "0"]]}"#);
        assert_eq!(e.pointer, "/gains/0/0");
    }

    #[test]
    fn linear_model_builds_the_demo_network() {
        let p = parse_config(
            r#"{"n": 2, "model": {"family": "linear", "a": -1, "b": 1, "delta": 0.2, "q": 2, "epsilon": 0.5}}"#,
        )
        .unwrap();
        let sys = p.system.as_ref().unwrap();
        assert_eq!(sys.model.state_dim(), 2);
        // gamma_12(s) = 0.4 sqrt(s): k = 2 / (2 * 0.5) = 2, G = 2 * 0.2 / 1
        assert!((p.network.gain(0, 1).eval(4.0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn model_excludes_explicit_gains() {
        let e = err(r#"{"n": 1, "gains": [["0"]], "model": {"family": "linear", "a": -1, "b": 1}}"#);
        assert_eq!(e.pointer, "/gains");
        let e = err(r#"{"n": 1, "model": {"family": "quantum"}}"#);
        assert_eq!(e.pointer, "/model/family");
    }

    #[test]
    fn cohen_grossberg_model() {
        let p = parse_config(
            r#"{"n": 2, "model": {"family": "cohen_grossberg", "weights": 0.1, "lower": 1, "upper": 2,
                "decay": "1.4*s", "activation": "1*atan(s)"}}"#,
        )
        .unwrap();
        assert_eq!(p.system.unwrap().family, "cohen_grossberg");
        let e = err(r#"{"n": 2, "model": {"family": "cohen_grossberg", "weights": 0.1, "lower": 1, "upper": 2,
                "decay": ["1.4*s", "1.4*s^"], "activation": "1*atan(s)"}}"#);
        assert_eq!(e.pointer, "/model/decay/1");
    }

    #[test]
    fn simulation_inputs() {
        let p = parse_config(
            r#"{"n": 1, "model": {"family": "linear", "a": -1, "b": 1},
                "simulation": {"x0": [1], "input": {"kind": "step", "at": 1, "value": [2]}, "T": 5, "dt": 0.1}}"#,
        )
        .unwrap();
        assert_eq!(p.simulation.input, Some(Signal::Step { at: 1.0, value: vec![2.0] }));
        assert_eq!(p.simulation.t_end, 5.0);
        let e = err(
            r#"{"n": 1, "model": {"family": "linear", "a": -1, "b": 1}, "simulation": {"input": {"kind": "sinusoid", "amplitude": [1]}}}"#,
        );
        assert_eq!(e.pointer, "/simulation/input/omega");
        let e = err(r#"{"n": 1, "model": {"family": "linear", "a": -1, "b": 1}, "simulation": {"x0": [1, 2]}}"#);
        assert_eq!(e.pointer, "/simulation/x0");
    }

    #[test]
    fn constructor_field() {
        let p = parse_config(r#"{"n": 1, "gains": [["0"]], "constructor": "three_sum"}"#).unwrap();
        assert_eq!(p.constructor, Some(Constructor::ThreeSum));
        let e = err(r#"{"n": 1, "gains": [["0"]], "constructor": "magic"}"#);
        assert_eq!(e.pointer, "/constructor");
    }

    #[test]
    fn pointer_tokens_are_escaped() {
        assert_eq!(join("", "a/b~c"), "/a~1b~0c");
    }
}
