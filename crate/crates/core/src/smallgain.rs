//! Deciding `Gamma_mu ≱ id` (SGC) and `D ∘ Gamma_mu ≱ id` (strong SGC).
//!
//! Only three routes certify that the condition holds: the cycle criterion
//! for max-aggregated networks, the spectral radius for linear (or linearly
//! conjugated) operators, and the Perron eigenvalue for homogeneous ones.
//! Grid falsification can only refute.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::gain::GainExpr;
use crate::graph::{adjacency, scc_decompose, subordinated_cycles, AdjacencyMatrix, Cycle, GraphError};
use crate::network::{DiagOp, GainNetwork, GainOperator, Maf, MonotoneOperator};
use crate::scalar::{log_grid, norm_inf, vec_ge, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    CycleCondition,
    Spectral,
    Perron,
    Falsification,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::CycleCondition => "cycle condition",
            Method::Spectral => "spectral radius",
            Method::Perron => "nonlinear Perron eigenvalue",
            Method::Falsification => "grid falsification",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness<T> {
    /// `s != 0` with `Gamma(s) >= s`.
    Point(Vec<T>),
    /// Subordinated cycle whose composed gain is not below the identity at
    /// `radius`, with the point it induces when that point re-verifies.
    Cycle { cycle: Cycle, radius: T, point: Option<Vec<T>> },
}

impl<T: Scalar> Witness<T> {
    pub fn point(&self) -> Option<&[T]> {
        match self {
            Witness::Point(p) => Some(p),
            Witness::Cycle { point, .. } => point.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SgcStatus<T> {
    CertifiedHolds,
    CertifiedFails(Witness<T>),
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgcVerdict<T> {
    pub status: SgcStatus<T>,
    pub method: Method,
    /// Method-specific worst value: largest `c(r)/r` over cycles (cycle
    /// condition), the spectral radius or Perron eigenvalue, or the closest
    /// approach `max_s min_i (Gamma(s)_i - s_i) / |s|` (falsification).
    pub worst: T,
    pub samples: usize,
}

impl<T: Scalar> SgcVerdict<T> {
    pub fn holds(&self) -> bool {
        matches!(self.status, SgcStatus::CertifiedHolds)
    }

    pub fn fails(&self) -> bool {
        matches!(self.status, SgcStatus::CertifiedFails(_))
    }

    pub fn witness(&self) -> Option<&Witness<T>> {
        match &self.status {
            SgcStatus::CertifiedFails(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SmallGainError {
    #[error("row {} does not use max aggregation", .row + 1)]
    WrongAggregation { row: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("operator is not linearizable: {0}")]
    NotLinearizable(String),
    #[error("operator is not homogeneous of degree one (relative defect {defect:e})")]
    NotHomogeneous { defect: f64 },
    #[error("power iteration did not converge within {iterations} steps")]
    NoConvergence { iterations: usize },
}

/// Search grid for falsification.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub radii: Vec<T>,
    pub random_directions: usize,
    pub ascent_steps: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for GridSpec<T> {
    fn default() -> Self {
        Self::with_radii(40, 0)
    }
}

impl<T: Scalar> GridSpec<T> {
    /// `r = 1` followed by `count` radii log-spaced in `[1e-6, 1e6]`.
    pub fn with_radii(count: usize, seed: u64) -> Self {
        let mut radii = vec![T::one()];
        radii.extend(log_grid(T::lit(1e-6), T::lit(1e6), count));
        GridSpec { radii, random_directions: 199, ascent_steps: 2000, seed }
    }
}

fn rel_tol<T: Scalar>() -> T {
    T::tol_strict()
}

// ---------------------------------------------------------------------------
// cycle criterion

pub fn check_cycle_condition<T: Scalar>(net: &GainNetwork<T>) -> Result<SgcVerdict<T>, SmallGainError> {
    if let Some(row) = net.mafs().iter().position(|m| !m.is_max()) {
        return Err(SmallGainError::WrongAggregation { row });
    }
    let cycles = subordinated_cycles(&adjacency(net))?;
    let mut radii = vec![T::one()];
    radii.extend(log_grid(T::lit(1e-8), T::lit(1e8), 321));
    let mut worst = T::zero();
    let mut samples = 0;
    let mut undecided = false;
    for cycle in &cycles {
        let gains: Vec<&GainExpr<T>> =
            (0..cycle.0.len()).map(|k| net.gain(cycle.0[k], cycle.0[(k + 1) % cycle.0.len()])).collect();
        let slopes: Option<Vec<T>> = gains.iter().map(|g| g.linear_slope()).collect();
        if let Some(slopes) = slopes {
            let product = slopes.iter().fold(T::one(), |p, &c| p * c);
            worst = worst.max(product);
            samples += 1;
            if product >= T::one() {
                return Ok(cycle_failure(net, cycle, T::one(), worst, samples));
            }
            if product > T::one() - rel_tol::<T>() {
                undecided = true;
            }
            continue;
        }
        for &r in &radii {
            let c = compose_cycle(&gains, r);
            samples += 1;
            worst = worst.max(c / r);
            if c >= r {
                return Ok(cycle_failure(net, cycle, r, worst, samples));
            }
            if c > r * (T::one() - rel_tol::<T>()) {
                undecided = true;
            }
        }
    }
    let status = if undecided { SgcStatus::Inconclusive } else { SgcStatus::CertifiedHolds };
    Ok(SgcVerdict { status, method: Method::CycleCondition, worst, samples })
}

/// `gamma_{i1 i2} ∘ ... ∘ gamma_{iK i1}` at `r`.
fn compose_cycle<T: Scalar>(gains: &[&GainExpr<T>], r: T) -> T {
    gains.iter().rev().fold(r, |v, g| g.eval(v))
}

fn cycle_failure<T: Scalar>(net: &GainNetwork<T>, cycle: &Cycle, r: T, worst: T, samples: usize) -> SgcVerdict<T> {
    // s_{i1} = r and s_{ik} = gamma_{ik i(k+1)}(s_{i(k+1)}) walking backwards,
    // so every cycle row is reproduced exactly and row i1 sees c(r) >= r.
    let idx = &cycle.0;
    let k = idx.len();
    let mut s = vec![T::zero(); net.n()];
    s[idx[0]] = r;
    for m in (1..k).rev() {
        let next = idx[(m + 1) % k];
        s[idx[m]] = net.gain(idx[m], next).eval(s[next]);
    }
    let point = (norm_inf(&s) > T::zero() && vec_ge(&net.eval_operator(&s), &s)).then_some(s);
    SgcVerdict {
        status: SgcStatus::CertifiedFails(Witness::Cycle { cycle: cycle.clone(), radius: r, point }),
        method: Method::CycleCondition,
        worst,
        samples,
    }
}

// ---------------------------------------------------------------------------
// falsification

pub fn falsify_sgc<T: Scalar>(net: &GainNetwork<T>, grid: &GridSpec<T>) -> SgcVerdict<T> {
    falsify_operator(net, grid)
}

/// Searches for `s != 0` with `op(s) >= s`.
pub fn falsify_operator<T: Scalar, O: MonotoneOperator<T> + ?Sized>(op: &O, grid: &GridSpec<T>) -> SgcVerdict<T> {
    let n = op.dim();
    let dirs = directions::<T>(n, grid.random_directions, grid.seed);
    let seeds: Vec<Vec<T>> = std::iter::once(vec![T::one(); n]).chain((0..n).map(|i| unit(n, i))).collect();

    let results: Vec<(Option<Vec<T>>, T, usize)> = grid
        .radii
        .par_iter()
        .map(|&r| {
            let mut best = T::neg_infinity();
            let mut count = 0;
            for d in &dirs {
                let s: Vec<T> = d.iter().map(|&x| x * r).collect();
                count += 1;
                let gap = approach(op, &s);
                best = best.max(gap);
                if gap >= T::zero() {
                    return (Some(s), best, count);
                }
            }
            for seed in &seeds {
                let mut s: Vec<T> = seed.iter().map(|&x| x * r).collect();
                for _ in 0..grid.ascent_steps {
                    let g = op.apply(&s);
                    count += 1;
                    let gap = approach_with(&s, &g);
                    best = best.max(gap);
                    if gap >= T::zero() {
                        return (Some(s), best, count);
                    }
                    let next: Vec<T> = s.iter().zip(&g).map(|(&a, &b)| a.max(b)).collect();
                    let scale = r / norm_inf(&next);
                    if !scale.is_finite() {
                        break;
                    }
                    let next: Vec<T> = next.iter().map(|&x| x * scale).collect();
                    if next == s {
                        break;
                    }
                    s = next;
                }
            }
            (None, best, count)
        })
        .collect();

    let worst = results.iter().fold(T::neg_infinity(), |m, r| m.max(r.1));
    let samples = results.iter().map(|r| r.2).sum();
    let status = match results.into_iter().find_map(|r| r.0) {
        Some(s) => SgcStatus::CertifiedFails(Witness::Point(s)),
        None => SgcStatus::Inconclusive,
    };
    SgcVerdict { status, method: Method::Falsification, worst, samples }
}

fn approach<T: Scalar, O: MonotoneOperator<T> + ?Sized>(op: &O, s: &[T]) -> T {
    approach_with(s, &op.apply(s))
}

/// `min_i (g_i - s_i) / |s|`; nonnegative exactly when `g >= s`.
fn approach_with<T: Scalar>(s: &[T], g: &[T]) -> T {
    let norm = norm_inf(s);
    if norm == T::zero() {
        return T::neg_infinity();
    }
    let m = s.iter().zip(g).fold(T::infinity(), |m, (&a, &b)| m.min(b - a));
    if m >= T::zero() && !vec_ge(g, s) {
        return -T::min_positive_value();
    }
    m / norm
}

fn unit<T: Scalar>(n: usize, i: usize) -> Vec<T> {
    let mut e = vec![T::zero(); n];
    e[i] = T::one();
    e
}

/// Ones, unit vectors, axis-biased vectors and random simplex points, each
/// normalised to sup-norm one.
fn directions<T: Scalar>(n: usize, random: usize, seed: u64) -> Vec<Vec<T>> {
    let mut out = vec![vec![T::one(); n]];
    out.extend((0..n).map(|i| unit(n, i)));
    out.extend((0..n).map(|i| {
        let mut d = vec![T::lit(0.1); n];
        d[i] = T::one();
        d
    }));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let m = e.iter().fold(0.0f64, |a, &b| a.max(b));
        out.push(e.iter().map(|&x| T::lit(if m > 0.0 { x / m } else { 1.0 })).collect());
    }
    out
}

// ---------------------------------------------------------------------------
// spectral and Perron

/// Nonnegative matrix `G` with `Gamma_mu = D^-1 ∘ G ∘ D` where
/// `D(s) = s^(1/p)` componentwise (`p = 1` for linear sum networks).
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization<T> {
    pub matrix: Vec<Vec<T>>,
    /// `p` above.
    pub power: T,
}

impl<T: Scalar> Linearization<T> {
    /// `D^-1(v) = v^p`.
    pub fn to_operator_coords(&self, v: &[T]) -> Vec<T> {
        v.iter().map(|&x| x.powf(self.power)).collect()
    }
}

pub fn linearize<T: Scalar>(net: &GainNetwork<T>) -> Result<Linearization<T>, SmallGainError> {
    let n = net.n();
    let not = |why: String| Err(SmallGainError::NotLinearizable(why));
    if net.all_sum() {
        let mut g = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                match net.gain(i, j).linear_slope() {
                    Some(c) => g[i][j] = c,
                    None => return not(format!("gain ({},{}) is not linear", i + 1, j + 1)),
                }
            }
        }
        return Ok(Linearization { matrix: g, power: T::one() });
    }
    let mut power: Option<T> = None;
    let mut g = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        let (c, p) = match net.maf(i) {
            Maf::OuterSum(GainExpr::Power { coeff, exponent }) => (*coeff, *exponent),
            Maf::OuterSum(GainExpr::Linear(c)) => (*c, T::one()),
            Maf::Sum => (T::one(), T::one()),
            Maf::Max => return not("max aggregation is not linear".into()),
            _ => return not(format!("row {} aggregation has no power form", i + 1)),
        };
        match power {
            None => power = Some(p),
            Some(q) if (q - p).abs() <= T::epsilon() * T::lit(8.0) * q => {}
            Some(_) => return not("rows use different outer exponents".into()),
        }
        let inv = T::one() / p;
        for j in 0..n {
            let k = match net.gain(i, j) {
                GainExpr::Zero => T::zero(),
                GainExpr::Power { coeff, exponent } if (*exponent - inv).abs() <= T::epsilon() * T::lit(8.0) => *coeff,
                GainExpr::Linear(k) if inv == T::one() => *k,
                _ => return not(format!("gain ({},{}) is not s^(1/{p})", i + 1, j + 1)),
            };
            g[i][j] = c.powf(inv) * k;
        }
    }
    Ok(Linearization { matrix: g, power: power.unwrap_or(T::one()) })
}

/// Spectral radius of a nonnegative matrix and a nonnegative eigenvector,
/// taken over the strongly connected diagonal blocks.
pub fn spectral_radius<T: Scalar>(g: &[Vec<T>]) -> (T, Vec<T>) {
    let n = g.len();
    let adj = AdjacencyMatrix::from_bools((0..n).map(|i| (0..n).map(|j| g[i][j] > T::zero()).collect()).collect());
    let mut best = (T::zero(), (0..n).map(|i| if i == 0 { T::one() } else { T::zero() }).collect::<Vec<_>>());
    let mut first = true;
    for block in scc_decompose(&adj).blocks {
        let sub: Vec<Vec<T>> = block.iter().map(|&i| block.iter().map(|&j| g[i][j]).collect()).collect();
        let (rho, v) = block_perron(&sub);
        if first || rho > best.0 {
            first = false;
            let mut full = vec![T::zero(); n];
            for (k, &i) in block.iter().enumerate() {
                full[i] = v[k];
            }
            best = (rho, full);
        }
    }
    best
}

/// Shifted power iteration `x <- (I + G) x` on an irreducible block.
fn block_perron<T: Scalar>(g: &[Vec<T>]) -> (T, Vec<T>) {
    let n = g.len();
    if n == 1 {
        return (g[0][0].max(T::zero()), vec![T::one()]);
    }
    let mut x = vec![T::one(); n];
    let tol = T::lit(1e-15).max(T::epsilon() * T::lit(4.0));
    for _ in 0..100_000 {
        let y: Vec<T> = (0..n).map(|i| x[i] + (0..n).map(|j| g[i][j] * x[j]).sum::<T>()).collect();
        let m = norm_inf(&y);
        let y: Vec<T> = y.iter().map(|&v| v / m).collect();
        let diff = x.iter().zip(&y).fold(T::zero(), |a, (&p, &q)| a.max((p - q).abs()));
        x = y;
        if diff <= tol {
            break;
        }
    }
    let gx: Vec<T> = (0..n).map(|i| (0..n).map(|j| g[i][j] * x[j]).sum::<T>()).collect();
    (norm_inf(&gx) / norm_inf(&x), x)
}

/// Spectral test for linear or linearly conjugated networks.
pub fn check_linear_spectral<T: Scalar>(net: &GainNetwork<T>) -> Result<SgcVerdict<T>, SmallGainError> {
    let lin = linearize(net)?;
    let (rho, v) = spectral_radius(&lin.matrix);
    let status = if rho < T::one() - rel_tol::<T>() {
        SgcStatus::CertifiedHolds
    } else {
        let s = lin.to_operator_coords(&v);
        if rho >= T::one() && vec_ge(&net.eval_operator(&s), &s) {
            SgcStatus::CertifiedFails(Witness::Point(s))
        } else {
            SgcStatus::Inconclusive
        }
    };
    Ok(SgcVerdict { status, method: Method::Spectral, worst: rho, samples: 1 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerronResult<T> {
    pub lambda: T,
    /// Eigendirection with sup-norm one.
    pub vector: Vec<T>,
    /// `|Gamma(v) - lambda v|_inf`.
    pub residual: T,
    pub iterations: usize,
}

/// Largest relative deviation from `Gamma(t s) = t Gamma(s)` on seeded samples.
pub fn homogeneity_defect<T: Scalar, O: MonotoneOperator<T> + ?Sized>(op: &O, seed: u64) -> T {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::zero();
    for _ in 0..32 {
        let scale = 10f64.powf(rng.random_range(-4.0..4.0));
        let s: Vec<T> = (0..n).map(|_| T::lit(scale * rng.random_range(0.05..1.0))).collect();
        let base = op.apply(&s);
        for t in [2.0, 0.5, 10.0] {
            let t = T::lit(t);
            let st: Vec<T> = s.iter().map(|&x| x * t).collect();
            let lhs = op.apply(&st);
            for (a, b) in lhs.iter().zip(&base) {
                let want = *b * t;
                let d = (*a - want).abs() / want.abs().max(norm_inf(&st) * T::lit(1e-3)).max(T::min_positive_value());
                worst = worst.max(d);
            }
        }
    }
    worst
}

pub fn nonlinear_perron<T: Scalar>(net: &GainNetwork<T>) -> Result<PerronResult<T>, SmallGainError> {
    nonlinear_perron_op(net)
}

/// Normalised power iteration for homogeneous operators. The iteration runs
/// on `s + Gamma(s)`, which has the same eigendirections and does not
/// oscillate on periodic operators.
pub fn nonlinear_perron_op<T: Scalar, O: MonotoneOperator<T> + ?Sized>(
    op: &O,
) -> Result<PerronResult<T>, SmallGainError> {
    let defect = homogeneity_defect(op, 7);
    if !(defect <= T::lit(1e-9).max(T::epsilon() * T::lit(64.0))) {
        return Err(SmallGainError::NotHomogeneous { defect: defect.as_f64() });
    }
    let n = op.dim();
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
    let cap = 100_000;
    let mut s = vec![T::one(); n];
    for k in 1..=cap {
        let g = op.apply(&s);
        let y: Vec<T> = s.iter().zip(&g).map(|(&a, &b)| a + b).collect();
        let m = norm_inf(&y);
        let y: Vec<T> = y.iter().map(|&v| v / m).collect();
        let diff = s.iter().zip(&y).fold(T::zero(), |a, (&p, &q)| a.max((p - q).abs()));
        s = y;
        if diff < tol {
            let g = op.apply(&s);
            let lambda = norm_inf(&g);
            let residual = g.iter().zip(&s).fold(T::zero(), |a, (&gi, &si)| a.max((gi - lambda * si).abs()));
            return Ok(PerronResult { lambda, vector: s, residual, iterations: k });
        }
    }
    Err(SmallGainError::NoConvergence { iterations: cap })
}

// ---------------------------------------------------------------------------
// strong condition and dispatch

/// Falsification on `D ∘ Gamma_mu`, or on `Gamma_mu ∘ D` when `inner`.
pub fn check_strong_sgc<T: Scalar>(
    net: &GainNetwork<T>,
    d: &DiagOp<T>,
    inner: bool,
    grid: &GridSpec<T>,
) -> SgcVerdict<T> {
    if inner {
        falsify_operator(&GainOperator::inner(net, d), grid)
    } else {
        falsify_operator(&GainOperator::outer(net, Some(d)), grid)
    }
}

/// Runs the certifying check that applies to `net`, falling back to
/// falsification when none does or when it is inconclusive.
pub fn check_sgc<T: Scalar>(net: &GainNetwork<T>, grid: &GridSpec<T>) -> Vec<SgcVerdict<T>> {
    let mut out = Vec::new();
    if net.all_max() {
        if let Ok(v) = check_cycle_condition(net) {
            let decided = !matches!(v.status, SgcStatus::Inconclusive);
            out.push(v);
            if decided {
                return out;
            }
        }
    } else if let Ok(v) = check_linear_spectral(net) {
        let decided = !matches!(v.status, SgcStatus::Inconclusive);
        out.push(v);
        if decided {
            return out;
        }
    } else if crate::graph::is_irreducible(&adjacency(net)) {
        if let Ok(p) = nonlinear_perron(net) {
            let status = if p.lambda < T::one() - rel_tol::<T>() {
                SgcStatus::CertifiedHolds
            } else if p.lambda >= T::one() && vec_ge(&net.eval_operator(&p.vector), &p.vector) {
                SgcStatus::CertifiedFails(Witness::Point(p.vector.clone()))
            } else {
                SgcStatus::Inconclusive
            };
            let decided = !matches!(status, SgcStatus::Inconclusive);
            out.push(SgcVerdict { status, method: Method::Perron, worst: p.lambda, samples: p.iterations });
            if decided {
                return out;
            }
        }
    }
    out.push(falsify_sgc(net, grid));
    out
}
