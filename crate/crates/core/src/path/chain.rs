//! Downward iteration, seed search and upward chaining, and the constructors
//! built directly on them (bounded, irreducible, max, homogeneous).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{finish, op, reducible, Constructor, OmegaPath, PathError, PathOptions, ValidatedPath};
use crate::graph::{adjacency, is_irreducible};
use crate::network::{DiagOp, GainNetwork, MonotoneOperator};
use crate::scalar::{log_grid, norm_inf, strictly_below, vec_lt, Scalar};
use crate::smallgain::{check_cycle_condition, nonlinear_perron_op, SgcStatus, Witness};

const DOWN_STOP: f64 = 1e-12;
const MAX_DOWN_STEPS: usize = 1_000_000;
const MAX_UP_STEPS: usize = 200_000;
const STALL_GROWTH: f64 = 1e-6;
const STALL_STEPS: usize = 50;

fn scale<T: Scalar>(s: &[T], c: T) -> Vec<T> {
    s.iter().map(|&x| x * c).collect()
}

fn axpy<T: Scalar>(a: &[T], t: T, d: &[T]) -> Vec<T> {
    a.iter().zip(d).map(|(&x, &y)| x + t * y).collect()
}

/// `op(s) < s` componentwise with the certification margin.
fn strictly_inside<T: Scalar>(g: &[T], s: &[T]) -> bool {
    g.iter().zip(s).all(|(&a, &b)| strictly_below(a, b, T::tol_strict()))
}

pub fn path_downward<T: Scalar>(net: &GainNetwork<T>, s0: &[T]) -> Result<Vec<Vec<T>>, PathError> {
    path_downward_op(net, s0)
}

/// Anchors `s0, T(s0), T^2(s0), ...` down to the origin (last entry is zero).
///
/// When the per-step contraction is weak the straight segment from the
/// current anchor to the origin is tested and, if it lies in Omega, closes
/// the path.
pub fn path_downward_op<T: Scalar, O: MonotoneOperator<T> + ?Sized>(
    op: &O,
    s0: &[T],
) -> Result<Vec<Vec<T>>, PathError> {
    let n = s0.len();
    let g0 = op.apply(s0);
    let tol = T::tol_strict();
    if g0.iter().zip(s0).all(|(&g, &s)| (g - s).abs() <= tol * s.abs().max(T::min_positive_value())) {
        return Err(PathError::Stalled { norm: norm_inf(s0).as_f64() });
    }
    if !vec_lt(&g0, s0) {
        return Err(PathError::NotInOmega);
    }
    let stop = T::lit(DOWN_STOP) * norm_inf(s0);
    let mut anchors = vec![s0.to_vec()];
    let mut s = s0.to_vec();
    let mut g = g0;
    let mut last_ray_check = 0usize;
    for step in 0..MAX_DOWN_STEPS {
        let next = g;
        let nn = norm_inf(&next);
        if nn < stop {
            if nn > T::zero() && vec_lt(&next, &s) {
                anchors.push(next);
            }
            anchors.push(vec![T::zero(); n]);
            return Ok(anchors);
        }
        if !vec_lt(&next, &s) {
            return Err(PathError::Stalled { norm: norm_inf(&s).as_f64() });
        }
        let ratio = nn / norm_inf(&s);
        anchors.push(next.clone());
        if ratio > T::lit(0.95) && step >= last_ray_check + STALL_STEPS {
            last_ray_check = step;
            if ray_in_omega(op, &next, stop) {
                anchors.push(vec![T::zero(); n]);
                return Ok(anchors);
            }
        }
        s = next;
        g = op.apply(&s);
    }
    Err(PathError::Stalled { norm: norm_inf(&s).as_f64() })
}

/// Whether `t * s` lies in Omega for `t` on a log grid down to `stop / |s|`.
fn ray_in_omega<T: Scalar, O: MonotoneOperator<T> + ?Sized>(op: &O, s: &[T], stop: T) -> bool {
    let lo = (stop / norm_inf(s)).min(T::one());
    log_grid(lo, T::one(), 240).into_iter().all(|t| {
        let p = scale(s, t);
        vec_lt(&op.apply(&p), &p)
    })
}

/// First point of Omega on the unit sphere among the ones vector, `2n`
/// axis-biased directions and 500 seeded random simplex points.
pub fn find_seed<T: Scalar, O: MonotoneOperator<T> + ?Sized>(op: &O, seed: u64) -> Option<Vec<T>> {
    let n = op.dim();
    let mut cands: Vec<Vec<T>> = vec![vec![T::one(); n]];
    for i in 0..n {
        for w in [0.5, 2.0] {
            let mut d = vec![T::one(); n];
            d[i] = T::lit(w);
            cands.push(d);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..500 {
        cands.push((0..n).map(|_| T::lit(-(1.0 - rng.random::<f64>()).ln() + 1e-3)).collect());
    }
    cands.into_iter().map(|d| scale(&d, T::one() / norm_inf(&d))).find(|s| strictly_inside(&op.apply(s), s))
}

/// `sup { t : T(a + t d) < a }`, infinite when every `t` qualifies.
fn max_step<T: Scalar, O: MonotoneOperator<T> + ?Sized>(op: &O, a: &[T], d: &[T]) -> T {
    let feasible = |t: T| strictly_inside(&op.apply(&axpy(a, t, d)), a);
    let base = norm_inf(a);
    let mut lo = T::zero();
    let mut hi = None;
    let mut t = base * T::lit(2f64.powi(-30));
    for _ in 0..100 {
        if feasible(t) {
            lo = t;
            t = t * T::lit(2.0);
        } else {
            hi = Some(t);
            break;
        }
    }
    let Some(mut hi) = hi else { return T::infinity() };
    for _ in 0..80 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Anchors strictly above `seed` with `T(a_{m+1}) < a_m`, until the norm
/// reaches `rmax`. Each step moves half the maximal feasible distance along
/// whichever of three directions grows most: all-ones, radial, and the
/// vector of per-coordinate feasible extents.
pub fn chain_upward<T: Scalar, O: MonotoneOperator<T> + ?Sized>(
    op: &O,
    seed: &[T],
    rmax: T,
) -> Result<Vec<Vec<T>>, PathError> {
    let n = seed.len();
    let ones = vec![T::one(); n];
    let mut a = seed.to_vec();
    let mut out = Vec::new();
    let mut stagnant = 0;
    for _ in 0..MAX_UP_STEPS {
        let na = norm_inf(&a);
        if na >= rmax {
            return Ok(out);
        }
        let radial = scale(&a, T::one() / na);
        let extents: Vec<T> = (0..n)
            .map(|j| {
                let mut e = vec![T::zero(); n];
                e[j] = T::one();
                max_step(op, &a, &e).min(rmax * T::lit(2.0))
            })
            .collect();
        let mut best: Option<(T, Vec<T>)> = None;
        for d in [&ones, &radial, &extents] {
            let t = max_step(op, &a, d);
            let cand = if t.is_infinite() { axpy(&a, rmax * T::lit(2.0), d) } else { axpy(&a, t / T::lit(2.0), d) };
            let growth = norm_inf(&cand) / na - T::one();
            if best.as_ref().is_none_or(|b| growth > b.0) && vec_lt(&a, &cand) {
                best = Some((growth, cand));
            }
        }
        let Some((growth, next)) = best else {
            return Err(PathError::PathStalled { norm: na.as_f64() });
        };
        if growth < T::lit(STALL_GROWTH) {
            stagnant += 1;
            if stagnant >= STALL_STEPS {
                return Err(PathError::PathStalled { norm: na.as_f64() });
            }
        } else {
            stagnant = 0;
        }
        out.push(next.clone());
        a = next;
    }
    Err(PathError::PathStalled { norm: norm_inf(&a).as_f64() })
}

/// Seed search, upward chaining and downward iteration merged into one path.
pub(crate) fn chained_path<T: Scalar, O: MonotoneOperator<T> + ?Sized>(
    op: &O,
    opts: &PathOptions<T>,
) -> Result<OmegaPath<T>, PathError> {
    let seed = find_seed(op, opts.seed).ok_or(PathError::SeedNotFound)?;
    let up = chain_upward(op, &seed, opts.rmax)?;
    let mut down = path_downward_op(op, &seed)?;
    down.pop();
    down.reverse();
    down.extend(up);
    Ok(OmegaPath::from_anchors(down))
}

pub fn path_irreducible<T: Scalar>(
    net: &GainNetwork<T>,
    d: Option<&DiagOp<T>>,
    opts: &PathOptions<T>,
) -> Result<ValidatedPath<T>, PathError> {
    if !is_irreducible(&adjacency(net)) {
        return Err(PathError::Reducible);
    }
    if !super::all_gains_unbounded(net) {
        return Err(PathError::BoundedGains);
    }
    let o = op(net, d);
    let path = chained_path(&o, opts)?;
    finish(&o, path, Constructor::Irreducible, opts)
}

pub fn path_max<T: Scalar>(net: &GainNetwork<T>, opts: &PathOptions<T>) -> Result<ValidatedPath<T>, PathError> {
    if !net.all_max() {
        return Err(PathError::NotApplicable("path_max requires max aggregation in every row".into()));
    }
    if net.is_decoupled() {
        return finish(net, OmegaPath::ray(vec![T::one(); net.n()]), Constructor::Max, opts);
    }
    let verdict = check_cycle_condition(net)?;
    if let SgcStatus::CertifiedFails(w) = &verdict.status {
        let cycle = match w {
            Witness::Cycle { cycle, .. } => cycle.display_one_based(),
            Witness::Point(p) => format!("{p:?}"),
        };
        return Err(PathError::CycleConditionFails { cycle });
    }
    if is_irreducible(&adjacency(net)) {
        let path = chained_path(net, opts)?;
        finish(net, path, Constructor::Max, opts)
    } else {
        let mut p = reducible::path_reducible_with(net, None, opts)?;
        p.constructor = Constructor::Max;
        Ok(p)
    }
}

pub fn path_homogeneous<T: Scalar>(
    net: &GainNetwork<T>,
    d: Option<&DiagOp<T>>,
    opts: &PathOptions<T>,
) -> Result<ValidatedPath<T>, PathError> {
    if !is_irreducible(&adjacency(net)) {
        return Err(PathError::Reducible);
    }
    let o = op(net, d);
    let perron = nonlinear_perron_op(&o)?;
    if perron.lambda >= T::one() - T::tol_strict() {
        return Err(PathError::LambdaNotContractive { lambda: perron.lambda.as_f64() });
    }
    if perron.vector.iter().any(|&v| !(v > T::zero())) {
        return Err(PathError::NotApplicable("Perron direction is not positive".into()));
    }
    finish(&o, OmegaPath::ray(perron.vector), Constructor::Homogeneous, opts)
}

pub fn path_bounded<T: Scalar>(net: &GainNetwork<T>, opts: &PathOptions<T>) -> Result<ValidatedPath<T>, PathError> {
    path_bounded_op(net, net, opts)
}

/// Bounded construction on `op` (which must be `net` possibly wrapped by a
/// diagonal operator): a ray above `1.05 sup op`, iterated downward below.
pub fn path_bounded_op<T: Scalar, O: MonotoneOperator<T> + ?Sized>(
    op: &O,
    net: &GainNetwork<T>,
    opts: &PathOptions<T>,
) -> Result<ValidatedPath<T>, PathError> {
    if !super::all_gains_bounded(net) {
        return Err(PathError::NotBounded);
    }
    if net.is_decoupled() {
        return finish(op, OmegaPath::ray(vec![T::one(); net.n()]), Constructor::Bounded, opts);
    }
    if let Some(row) = (0..net.n()).find(|&i| (0..net.n()).all(|j| net.gain(i, j).is_zero())) {
        return Err(PathError::ZeroRow { row });
    }
    let sup = op.sup();
    if sup.iter().any(|x| !x.is_finite()) {
        return Err(PathError::NotBounded);
    }
    let mut s0 = scale(&sup, T::lit(1.05));
    let mut found = false;
    for _ in 0..=40 {
        if strictly_inside(&op.apply(&s0), &s0) {
            found = true;
            break;
        }
        s0 = scale(&s0, T::lit(2.0));
    }
    if !found {
        return Err(PathError::NotInOmega);
    }
    let mut anchors = path_downward_op(op, &s0)?;
    anchors.pop();
    anchors.reverse();
    let n0 = norm_inf(&s0);
    let far = (opts.rmax * T::lit(2.0) / n0).max(T::lit(2.0));
    anchors.push(scale(&s0, far));
    finish(op, OmegaPath::from_anchors(anchors), Constructor::Bounded, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::GainExpr;
    use crate::network::Maf;
    use crate::path::validate_path;

    type G = GainExpr<f64>;

    fn opts() -> PathOptions<f64> {
        PathOptions::default()
    }

    #[test]
    fn downward_examples() {
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.5], vec![0.5, 0.0]], Maf::Max).unwrap();
        let a = path_downward(&net, &[1.0, 1.0]).unwrap();
        assert_eq!(a[0], vec![1.0, 1.0]);
        assert_eq!(a[1], vec![0.5, 0.5]);
        assert_eq!(a[2], vec![0.25, 0.25]);
        assert_eq!(a.last().unwrap(), &vec![0.0, 0.0]);
        for w in a.windows(2) {
            assert!(vec_lt(&w[1], &w[0]));
        }

        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.4], vec![0.4, 0.0]], Maf::Sum).unwrap();
        let a = path_downward(&net, &[1.0, 1.0]).unwrap();
        for w in a.windows(2).take(a.len() - 2) {
            assert!((w[1][0] / w[0][0] - 0.4).abs() < 1e-12);
        }

        let id = GainNetwork::<f64>::from_slopes(&[vec![0.0, 1.0], vec![1.0, 0.0]], Maf::Max).unwrap();
        assert!(matches!(path_downward(&id, &[1.0, 1.0]), Err(PathError::Stalled { .. })));
        assert_eq!(path_downward(&id, &[1.0, 0.5]), Err(PathError::NotInOmega));
    }

    #[test]
    fn bounded_examples() {
        let net = GainNetwork::uniform(2, G::saturating(1.0), Maf::Sum).unwrap();
        let p = path_bounded(&net, &opts()).unwrap();
        assert!(p.report.valid());
        let s0 = vec![1.05, 1.05];
        let g = net.eval_operator(&s0);
        assert!((g[0] - 1.05 / 2.05).abs() < 1e-12);

        let zero = GainNetwork::<f64>::from_slopes(&[vec![0.0; 2], vec![0.0; 2]], Maf::Sum).unwrap();
        let p = path_bounded(&zero, &opts()).unwrap();
        assert_eq!(p.path.eval(3.0), vec![3.0, 3.0]);

        let steep = GainNetwork::uniform(2, G::saturating(2.0), Maf::Max).unwrap();
        assert!(matches!(path_bounded(&steep, &opts()), Err(PathError::Stalled { .. })));

        let unbounded = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.5], vec![0.5, 0.0]], Maf::Sum).unwrap();
        assert_eq!(path_bounded(&unbounded, &opts()), Err(PathError::NotBounded));
    }

    #[test]
    fn irreducible_examples() {
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.5], vec![0.5, 0.0]], Maf::Max).unwrap();
        let g = net.eval_operator(&[1.0, 0.75]);
        assert_eq!(g, vec![0.375, 0.5]);
        let p = path_irreducible(&net, None, &opts()).unwrap();
        assert!(p.report.certified(1e-9));

        let net = GainNetwork::uniform(3, G::linear(0.25), Maf::Sum).unwrap();
        let p = path_irreducible(&net, None, &opts()).unwrap();
        assert!(p.report.certified(1e-9));

        let cascade = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.5], vec![0.0, 0.0]], Maf::Sum).unwrap();
        assert_eq!(path_irreducible(&cascade, None, &opts()), Err(PathError::Reducible));
    }

    #[test]
    fn irreducible_with_asymmetric_powers() {
        let net = GainNetwork::new(
            vec![vec![G::Zero, G::power(0.5, 2.0)], vec![G::power(0.8, 0.5), G::Zero]],
            vec![G::Zero; 2],
            vec![Maf::Sum; 2],
        )
        .unwrap();
        // cycle gain 0.5 * 0.64 s = 0.32 s
        let p = path_irreducible(&net, None, &opts()).unwrap();
        assert!(p.report.valid());
        let rep = validate_path(&net, &p.path, &crate::path::default_radii());
        assert!(rep.valid());
    }

    #[test]
    fn max_examples() {
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.5], vec![0.5, 0.0]], Maf::Max).unwrap();
        let p = path_max(&net, &opts()).unwrap();
        assert!(p.report.certified(1e-9));
        for k in 1..p.path.anchor_count() {
            let s = &p.path.anchor_values()[k];
            let g = net.eval_operator(s);
            let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(s.iter().zip(&g).all(|(a, b)| a - b >= 0.25 * smin * (1.0 - 1e-12)));
        }

        let id = GainNetwork::new(
            vec![vec![G::Zero, G::power(1.0, 2.0)], vec![G::power(1.0, 0.5), G::Zero]],
            vec![G::Zero; 2],
            vec![Maf::Max; 2],
        )
        .unwrap();
        assert!(matches!(path_max(&id, &opts()), Err(PathError::CycleConditionFails { .. })));

        let single = GainNetwork::<f64>::from_slopes(&[vec![0.0]], Maf::Max).unwrap();
        let p = path_max(&single, &opts()).unwrap();
        assert_eq!(p.path.eval(2.5), vec![2.5]);
    }

    #[test]
    fn homogeneous_examples() {
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.5], vec![0.5, 0.0]], Maf::Sum).unwrap();
        let p = path_homogeneous(&net, None, &opts()).unwrap();
        let v = p.path.eval(1.0);
        assert!((v[0] - 1.0).abs() < 1e-10 && (v[1] - 1.0).abs() < 1e-10);

        let crit = GainNetwork::<f64>::from_slopes(&[vec![0.0, 1.0], vec![1.0, 0.0]], Maf::Sum).unwrap();
        assert!(matches!(path_homogeneous(&crit, None, &opts()), Err(PathError::LambdaNotContractive { .. })));
    }

    #[test]
    fn downward_convex_combinations_stay_in_omega() {
        let net = GainNetwork::new(
            vec![vec![G::Zero, G::power(0.6, 1.5)], vec![G::saturating(0.7), G::Zero]],
            vec![G::Zero; 2],
            vec![Maf::Sum; 2],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 50 {
            let s = vec![rng.random_range(0.01..3.0), rng.random_range(0.01..3.0)];
            let g = net.eval_operator(&s);
            if !vec_lt(&g, &s) {
                continue;
            }
            checked += 1;
            for _ in 0..10 {
                let l: f64 = rng.random();
                let c: Vec<f64> = s.iter().zip(&g).map(|(a, b)| l * a + (1.0 - l) * b).collect();
                assert!(vec_lt(&net.eval_operator(&c), &c));
            }
        }
    }
}
