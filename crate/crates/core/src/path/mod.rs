//! Ω-paths: vectors of piecewise-linear K∞ functions `sigma` with
//! `Gamma_mu(sigma(r)) < sigma(r)` for all `r > 0`.

mod chain;
mod reducible;
mod special;

pub use chain::{
    chain_upward, find_seed, path_bounded, path_bounded_op, path_downward, path_downward_op, path_homogeneous,
    path_irreducible, path_max,
};
pub use reducible::{path_reducible, path_reducible_with};
pub use special::{path_mixed, path_three_sum, path_three_sum_details, ThreeSumDetails};

use crate::gain::GainClass;
use crate::graph::{adjacency, is_irreducible, GraphError};
use crate::network::{DiagOp, GainNetwork, GainOperator, MonotoneOperator};
use crate::scalar::{log_grid, norm_inf, Scalar};
use crate::smallgain::SmallGainError;

/// Piecewise-linear path over anchor radii `0 = r_0 < r_1 < ... < r_M`,
/// extended linearly past `r_M` with the last segment's slope.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaPath<T> {
    radii: Vec<T>,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> OmegaPath<T> {
    /// `radii[0]` must be zero and `values[0]` the zero vector.
    pub fn new(radii: Vec<T>, values: Vec<Vec<T>>) -> Self {
        assert!(radii.len() >= 2 && radii.len() == values.len(), "need at least two anchors");
        assert!(radii[0] == T::zero(), "path must start at r = 0");
        assert!(radii.windows(2).all(|w| w[0] < w[1]), "anchor radii must increase");
        let n = values[0].len();
        assert!(values.iter().all(|v| v.len() == n), "anchor dimension");
        OmegaPath { radii, values }
    }

    /// Anchors `0 < a_1 < a_2 < ...` (componentwise increasing), parametrised
    /// by `r = |a|_inf`. The origin is prepended.
    pub fn from_anchors(anchors: Vec<Vec<T>>) -> Self {
        let n = anchors[0].len();
        let mut radii = vec![T::zero()];
        let mut values = vec![vec![T::zero(); n]];
        for a in anchors {
            let r = norm_inf(&a);
            if r > *radii.last().unwrap() {
                radii.push(r);
                values.push(a);
            }
        }
        Self::new(radii, values)
    }

    /// The ray `r * v`.
    pub fn ray(v: Vec<T>) -> Self {
        let n = v.len();
        Self::new(vec![T::zero(), T::one()], vec![vec![T::zero(); n], v])
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn anchor_radii(&self) -> &[T] {
        &self.radii
    }

    pub fn anchor_values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn anchor_count(&self) -> usize {
        self.radii.len()
    }

    fn segment(&self, r: T) -> usize {
        let k = self.radii.partition_point(|&x| x <= r);
        k.clamp(1, self.radii.len() - 1) - 1
    }

    pub fn component(&self, i: usize, r: T) -> T {
        if r <= T::zero() {
            return T::zero();
        }
        let k = self.segment(r);
        let (r0, r1) = (self.radii[k], self.radii[k + 1]);
        let (v0, v1) = (self.values[k][i], self.values[k + 1][i]);
        v0 + (v1 - v0) * ((r - r0) / (r1 - r0))
    }

    pub fn eval(&self, r: T) -> Vec<T> {
        (0..self.dim()).map(|i| self.component(i, r)).collect()
    }

    /// `sigma_i^{-1}(v)`; at an anchor the left segment is used.
    pub fn inverse(&self, i: usize, v: T) -> T {
        if v <= T::zero() {
            return T::zero();
        }
        let m = self.radii.len();
        let k = self.values.partition_point(|x| x[i] < v).clamp(1, m - 1) - 1;
        let (r0, r1) = (self.radii[k], self.radii[k + 1]);
        let (v0, v1) = (self.values[k][i], self.values[k + 1][i]);
        r0 + (r1 - r0) * ((v - v0) / (v1 - v0))
    }

    /// Minimum over components and segments of the slope; positive iff every
    /// component is strictly increasing.
    pub fn min_slope(&self) -> T {
        let mut m = T::infinity();
        for k in 0..self.radii.len() - 1 {
            let dr = self.radii[k + 1] - self.radii[k];
            for i in 0..self.dim() {
                m = m.min((self.values[k + 1][i] - self.values[k][i]) / dr);
            }
        }
        m
    }

    /// Componentwise scaling `c * sigma`.
    pub fn scaled(&self, c: T) -> Self {
        OmegaPath {
            radii: self.radii.clone(),
            values: self.values.iter().map(|v| v.iter().map(|&x| x * c).collect()).collect(),
        }
    }

    /// Same curve reparametrised by `r = |sigma|_inf` (skipping anchors that
    /// would not increase the norm).
    pub fn canonical(&self) -> Self {
        Self::from_anchors(self.values[1..].to_vec())
    }
}

/// Per-radius margins of a candidate path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathReport<T> {
    pub radii: Vec<T>,
    /// `min_i (sigma_i(r) - T(sigma(r))_i)`.
    pub margins: Vec<T>,
    /// `min_i (sigma_i(r) - T(sigma(r))_i) / max(1, sigma_i(r))`.
    pub relative: Vec<T>,
    /// Whether the radius belongs to the requested grid (as opposed to an anchor).
    pub on_grid: Vec<bool>,
    pub monotone: bool,
    pub min_slope: T,
    pub anchor_count: usize,
}

impl<T: Scalar> PathReport<T> {
    /// All margins positive and every component strictly increasing.
    pub fn valid(&self) -> bool {
        self.monotone && self.margins.iter().all(|&m| m > T::zero())
    }

    /// Relative margin at least `tol` at every grid radius.
    pub fn certified(&self, tol: T) -> bool {
        self.monotone && self.relative.iter().zip(&self.on_grid).all(|(&m, &g)| !g || m >= tol)
    }

    pub fn min_margin(&self) -> T {
        self.margins.iter().fold(T::infinity(), |a, &b| a.min(b))
    }

    pub fn min_relative_on_grid(&self) -> T {
        self.relative.iter().zip(&self.on_grid).filter(|(_, &g)| g).fold(T::infinity(), |a, (&b, _)| a.min(b))
    }

    /// Radius of the smallest margin.
    pub fn worst_radius(&self) -> T {
        let mut best = (T::infinity(), T::zero());
        for (&m, &r) in self.margins.iter().zip(&self.radii) {
            if m < best.0 {
                best = (m, r);
            }
        }
        best.1
    }
}

/// Default validation grid: 1000 radii log-spaced in `[1e-6, 1e6]`.
pub fn default_radii<T: Scalar>() -> Vec<T> {
    log_grid(T::lit(1e-6), T::lit(1e6), 1000)
}

pub fn validate_path<T: Scalar>(net: &GainNetwork<T>, sigma: &OmegaPath<T>, radii: &[T]) -> PathReport<T> {
    validate_path_op(net, sigma, radii)
}

/// Margins of `sigma` against `op` at `radii` and at every positive anchor.
pub fn validate_path_op<T: Scalar, O: MonotoneOperator<T> + ?Sized>(
    op: &O,
    sigma: &OmegaPath<T>,
    radii: &[T],
) -> PathReport<T> {
    let mut all: Vec<(T, bool)> = radii.iter().map(|&r| (r, true)).collect();
    all.extend(sigma.anchor_radii().iter().skip(1).map(|&r| (r, false)));
    let mut margins = Vec::with_capacity(all.len());
    let mut relative = Vec::with_capacity(all.len());
    for &(r, _) in &all {
        let s = sigma.eval(r);
        let g = op.apply(&s);
        let mut m = T::infinity();
        let mut rel = T::infinity();
        for (a, b) in s.iter().zip(&g) {
            let d = *a - *b;
            m = m.min(d);
            rel = rel.min(d / a.max(T::one()));
        }
        margins.push(m);
        relative.push(rel);
    }
    let min_slope = sigma.min_slope();
    PathReport {
        radii: all.iter().map(|x| x.0).collect(),
        on_grid: all.iter().map(|x| x.1).collect(),
        margins,
        relative,
        monotone: min_slope > T::zero(),
        min_slope,
        anchor_count: sigma.anchor_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constructor {
    Homogeneous,
    Max,
    ThreeSum,
    Mixed,
    Bounded,
    Irreducible,
    Reducible,
    Trivial,
}

impl Constructor {
    pub const ALL: [Constructor; 8] = [
        Constructor::Homogeneous,
        Constructor::Max,
        Constructor::ThreeSum,
        Constructor::Mixed,
        Constructor::Bounded,
        Constructor::Irreducible,
        Constructor::Reducible,
        Constructor::Trivial,
    ];
}

impl std::str::FromStr for Constructor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Constructor::ALL.into_iter().find(|c| c.to_string() == s).ok_or_else(|| format!("unknown constructor {s:?}"))
    }
}

impl std::fmt::Display for Constructor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Constructor::Homogeneous => "homogeneous",
            Constructor::Max => "max",
            Constructor::ThreeSum => "three_sum",
            Constructor::Mixed => "mixed",
            Constructor::Bounded => "bounded",
            Constructor::Irreducible => "irreducible",
            Constructor::Reducible => "reducible",
            Constructor::Trivial => "trivial",
        })
    }
}

/// A path together with the validation it passed.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedPath<T> {
    pub path: OmegaPath<T>,
    pub report: PathReport<T>,
    pub constructor: Constructor,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathError {
    #[error("NotInOmega: starting point does not satisfy Gamma(s) < s")]
    NotInOmega,
    #[error("Stalled: downward iteration stopped decreasing at |s| = {norm:e}")]
    Stalled { norm: f64 },
    #[error("NotBounded: some gain is unbounded")]
    NotBounded,
    #[error("SeedNotFound: no point of Omega found on the unit sphere")]
    SeedNotFound,
    #[error("PathStalled: upward chaining stopped growing at |s| = {norm:e}")]
    PathStalled { norm: f64 },
    #[error("Reducible: the interconnection graph is not strongly connected")]
    Reducible,
    #[error("Irreducible: the interconnection graph is strongly connected")]
    Irreducible,
    #[error("BoundedGains: constructor requires every nonzero gain to be unbounded")]
    BoundedGains,
    #[error("ZeroRow: row {} has no inputs", .row + 1)]
    ZeroRow { row: usize },
    #[error("LambdaNotContractive: Perron eigenvalue {lambda} is not below one")]
    LambdaNotContractive { lambda: f64 },
    #[error("CycleConditionFails: cycle {cycle} is not a contraction")]
    CycleConditionFails { cycle: String },
    #[error("NotApplicable: {0}")]
    NotApplicable(String),
    #[error("EmptyGap: no admissible third component at r = {radius:e}")]
    EmptyGap { radius: f64 },
    #[error("BisectionFailure: coupling equation has no root at r = {radius:e}")]
    BisectionFailure { radius: f64 },
    #[error("SpliceFailure: no splice radius gives a valid path")]
    SpliceFailure,
    #[error("BlockSgcFails: block {} admits no path", .block + 1)]
    BlockSgcFails { block: usize },
    #[error("InvalidPath: margin {margin:e} at r = {radius:e}")]
    InvalidPath { margin: f64, radius: f64 },
    #[error(transparent)]
    SmallGain(#[from] SmallGainError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Tuning shared by the constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOptions<T> {
    /// Upward chaining stops once the anchor norm reaches this radius.
    pub rmax: T,
    /// Seed of the random directions used by the seed search.
    pub seed: u64,
    /// Validation radii.
    pub radii: Vec<T>,
}

impl<T: Scalar> Default for PathOptions<T> {
    fn default() -> Self {
        PathOptions { rmax: T::lit(1e6), seed: 0, radii: default_radii() }
    }
}

pub(crate) fn finish<T: Scalar, O: MonotoneOperator<T> + ?Sized>(
    op: &O,
    path: OmegaPath<T>,
    constructor: Constructor,
    opts: &PathOptions<T>,
) -> Result<ValidatedPath<T>, PathError> {
    let report = validate_path_op(op, &path, &opts.radii);
    if !report.valid() {
        let margin = if report.monotone { report.min_margin() } else { report.min_slope };
        return Err(PathError::InvalidPath { margin: margin.as_f64(), radius: report.worst_radius().as_f64() });
    }
    Ok(ValidatedPath { path, report, constructor })
}

pub(crate) fn op<'a, T: Scalar>(net: &'a GainNetwork<T>, d: Option<&'a DiagOp<T>>) -> GainOperator<'a, T> {
    GainOperator::outer(net, d)
}

fn all_gains_bounded<T: Scalar>(net: &GainNetwork<T>) -> bool {
    net.gain_classes().all(|c| c != GainClass::KInfinity)
}

fn all_gains_unbounded<T: Scalar>(net: &GainNetwork<T>) -> bool {
    net.gain_classes().all(|c| c == GainClass::KInfinity)
}

/// Builds a path with the first applicable constructor in the order
/// homogeneous, max, three_sum, mixed, bounded, irreducible, reducible.
/// Later applicable constructors are tried when an earlier one fails; when
/// all fail the first error is returned, or a `CycleConditionFails` if any.
pub fn construct_path<T: Scalar>(
    net: &GainNetwork<T>,
    d: Option<&DiagOp<T>>,
    opts: &PathOptions<T>,
) -> Result<ValidatedPath<T>, PathError> {
    if net.is_decoupled() {
        let path = OmegaPath::ray(vec![T::one(); net.n()]);
        return finish(&op(net, d), path, Constructor::Trivial, opts);
    }
    let irreducible = is_irreducible(&adjacency(net));
    let mut first_err: Option<PathError> = None;
    let mut attempt = |r: Result<ValidatedPath<T>, PathError>| match r {
        Ok(p) => Some(p),
        Err(e) => {
            // a failing cycle is a certified SGC violation with a named witness
            if first_err.is_none() || matches!(e, PathError::CycleConditionFails { .. }) {
                first_err = Some(e);
            }
            None
        }
    };
    let homogeneous = irreducible
        && crate::smallgain::homogeneity_defect(&op(net, d), 7) <= T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
    if homogeneous {
        if let Some(p) = attempt(path_homogeneous(net, d, opts)) {
            return Ok(p);
        }
    }
    if d.is_none() && net.all_max() {
        if let Some(p) = attempt(path_max(net, opts)) {
            return Ok(p);
        }
    }
    if d.is_none()
        && net.n() == 3
        && net.all_sum()
        && (0..3).all(|i| (0..3).all(|j| i == j || !net.gain(i, j).is_zero()))
        && all_gains_unbounded(net)
    {
        if let Some(p) = attempt(path_three_sum(net, opts)) {
            return Ok(p);
        }
    }
    let bounded = all_gains_bounded(net);
    let unbounded = all_gains_unbounded(net);
    if d.is_none() && net.all_sum() && !bounded && !unbounded {
        if let Some(p) = attempt(path_mixed(net, opts)) {
            return Ok(p);
        }
    }
    if bounded && !net.has_zero_row() {
        if let Some(p) = attempt(path_bounded_op(&op(net, d), net, opts)) {
            return Ok(p);
        }
    }
    if irreducible {
        if let Some(p) = attempt(path_irreducible(net, d, opts)) {
            return Ok(p);
        }
    } else if let Some(p) = attempt(path_reducible_with(net, d, opts)) {
        return Ok(p);
    }
    Err(first_err.unwrap_or_else(|| PathError::NotApplicable("no constructor applies to this network".into())))
}

/// Runs one named constructor instead of the dispatch order of
/// [`construct_path`]. Constructors without operator support reject `d`.
pub fn construct_path_using<T: Scalar>(
    net: &GainNetwork<T>,
    d: Option<&DiagOp<T>>,
    opts: &PathOptions<T>,
    which: Constructor,
) -> Result<ValidatedPath<T>, PathError> {
    if d.is_some() && matches!(which, Constructor::Max | Constructor::ThreeSum | Constructor::Mixed) {
        return Err(PathError::NotApplicable(format!("constructor {which} does not take a diagonal operator")));
    }
    match which {
        Constructor::Homogeneous => path_homogeneous(net, d, opts),
        Constructor::Max => path_max(net, opts),
        Constructor::ThreeSum => path_three_sum(net, opts),
        Constructor::Mixed => path_mixed(net, opts),
        Constructor::Bounded => path_bounded_op(&op(net, d), net, opts),
        Constructor::Irreducible => path_irreducible(net, d, opts),
        Constructor::Reducible => path_reducible_with(net, d, opts),
        Constructor::Trivial => {
            if !net.is_decoupled() {
                return Err(PathError::NotApplicable("the trivial path needs a decoupled network".into()));
            }
            finish(&op(net, d), OmegaPath::ray(vec![T::one(); net.n()]), Constructor::Trivial, opts)
        }
    }
}

/// Formats `x` with 12 significant digits, `%g` style.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..12).contains(&exp) {
        let mant = strip_zeros(mant);
        return format!("{mant}e{exp}");
    }
    let decimals = (11 - exp).max(0) as usize;
    strip_zeros(&format!("{x:.decimals$}")).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Path export: header `r,sigma_1,...,sigma_n,margin_min`, one row per radius.
pub fn path_csv<T: Scalar, O: MonotoneOperator<T> + ?Sized>(op: &O, sigma: &OmegaPath<T>, radii: &[T]) -> String {
    let n = sigma.dim();
    let mut out = String::from("r");
    for i in 1..=n {
        out.push_str(&format!(",sigma_{i}"));
    }
    out.push_str(",margin_min\n");
    for &r in radii {
        let s = sigma.eval(r);
        let g = op.apply(&s);
        let m = s.iter().zip(&g).fold(T::infinity(), |a, (&x, &y)| a.min(x - y));
        out.push_str(&fmt_sig12(r.as_f64()));
        for x in &s {
            out.push(',');
            out.push_str(&fmt_sig12(x.as_f64()));
        }
        out.push(',');
        out.push_str(&fmt_sig12(m.as_f64()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::GainExpr;
    use crate::network::Maf;

    #[test]
    fn interpolation_and_inverse() {
        let p = OmegaPath::<f64>::new(vec![0.0, 1.0, 3.0], vec![vec![0.0, 0.0], vec![2.0, 1.0], vec![4.0, 5.0]]);
        assert_eq!(p.eval(0.5), vec![1.0, 0.5]);
        assert_eq!(p.eval(2.0), vec![3.0, 3.0]);
        // linear tail with the last slope
        assert_eq!(p.eval(5.0), vec![6.0, 9.0]);
        assert_eq!(p.inverse(0, 3.0), 2.0);
        assert_eq!(p.inverse(1, 9.0), 5.0);
        assert_eq!(p.inverse(0, 2.0), 1.0);
        assert_eq!(p.eval(0.0), vec![0.0, 0.0]);
        assert!(p.min_slope() > 0.0);
    }

    #[test]
    fn validation_examples() {
        let half = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.5], vec![0.5, 0.0]], Maf::Max).unwrap();
        let ones = OmegaPath::ray(vec![1.0, 1.0]);
        let rep = validate_path(&half, &ones, &default_radii());
        assert!(rep.valid());
        for (&r, &m) in rep.radii.iter().zip(&rep.margins) {
            assert!((m - 0.5 * r).abs() <= 1e-15 * r.max(1.0));
        }
        let two = GainNetwork::<f64>::from_slopes(&[vec![0.0, 2.0], vec![2.0, 0.0]], Maf::Max).unwrap();
        let rep = validate_path(&two, &ones, &default_radii());
        assert!(!rep.valid());
        assert!(rep.min_margin() < 0.0);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(fmt_sig12(1.0), "1");
        assert_eq!(fmt_sig12(1.75), "1.75");
        assert_eq!(fmt_sig12(1e-6), "1e-6");
        assert_eq!(fmt_sig12(123456.0), "123456");
        assert_eq!(fmt_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig12(1e6), "1000000");
        assert_eq!(fmt_sig12(2.5e13), "2.5e13");
        assert_eq!(fmt_sig12(-0.5), "-0.5");
        assert_eq!(fmt_sig12(9.9999999999999e-1), "1");
    }

    #[test]
    fn csv_layout() {
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.5], vec![0.5, 0.0]], Maf::Max).unwrap();
        let csv = path_csv(&net, &OmegaPath::ray(vec![1.0, 1.0]), &[1.0, 2.0]);
        assert_eq!(csv, "r,sigma_1,sigma_2,margin_min\n1,1,1,0.5\n2,2,2,1\n");
    }

    #[test]
    fn forced_constructor() {
        let net = GainNetwork::<f64>::uniform(3, GainExpr::linear(0.25), Maf::Sum).unwrap();
        let dispatched = construct_path(&net, None, &PathOptions::default()).unwrap();
        assert_eq!(dispatched.constructor, Constructor::Homogeneous);
        let forced = construct_path_using(&net, None, &PathOptions::default(), Constructor::ThreeSum).unwrap();
        assert_eq!(forced.constructor, Constructor::ThreeSum);
        let s = forced.path.eval(2.0);
        assert!((s[2] - 3.5).abs() < 1e-9, "{s:?}");
        let d = DiagOp::id_plus(GainExpr::linear(0.1));
        assert!(construct_path_using(&net, Some(&d), &PathOptions::default(), Constructor::Max).is_err());
        assert!(construct_path_using(&net, None, &PathOptions::default(), Constructor::Trivial).is_err());
        for c in Constructor::ALL {
            assert_eq!(c.to_string().parse::<Constructor>(), Ok(c));
        }
    }
}
