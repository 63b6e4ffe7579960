//! Explicit construction for three additively coupled subsystems, and the
//! splice of unbounded and bounded parts for partly bounded sum networks.

use super::{
    chain::{path_bounded, path_downward_op, path_irreducible},
    construct_path, finish, Constructor, OmegaPath, PathError, PathOptions, ValidatedPath,
};
use crate::gain::{GainClass, GainExpr};
use crate::network::GainNetwork;
use crate::scalar::{log_grid, strictly_below, Scalar};

/// Intermediate quantities of the three-node construction, one entry per
/// anchor radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeSumDetails<T> {
    pub radii: Vec<T>,
    pub sigma2: Vec<T>,
    pub sigma3: Vec<T>,
    /// Residual of the coupling equation at the computed `sigma2`.
    pub residuals: Vec<T>,
    /// Upper bound for `sigma3` from rows 1 and 2.
    pub g: Vec<T>,
    /// Running minimum of `g` taken from the largest radius down.
    pub g_star: Vec<T>,
    /// Lower bound for `sigma3` from row 3.
    pub h: Vec<T>,
}

pub fn path_three_sum<T: Scalar>(net: &GainNetwork<T>, opts: &PathOptions<T>) -> Result<ValidatedPath<T>, PathError> {
    if net.n() == 3 && net.all_sum() && has_zero_off_diagonal(net) {
        return path_irreducible(net, None, opts);
    }
    path_three_sum_details(net, opts).map(|(p, _)| p)
}

fn has_zero_off_diagonal<T: Scalar>(net: &GainNetwork<T>) -> bool {
    (0..3).any(|i| (0..3).any(|j| i != j && net.gain(i, j).is_zero()))
}

/// `sigma_1(r) = r`, `sigma_2` from the coupling equation of rows 1 and 2,
/// and `sigma_3` halfway between the row-3 lower bound and the monotone
/// envelope of the row-1/2 upper bound.
pub fn path_three_sum_details<T: Scalar>(
    net: &GainNetwork<T>,
    opts: &PathOptions<T>,
) -> Result<(ValidatedPath<T>, ThreeSumDetails<T>), PathError> {
    if net.n() != 3 || !net.all_sum() {
        return Err(PathError::NotApplicable("three_sum requires n = 3 and sum aggregation".into()));
    }
    if has_zero_off_diagonal(net) || net.gain_classes().any(|c| c != GainClass::KInfinity) {
        return Err(PathError::NotApplicable("three_sum requires six unbounded off-diagonal gains".into()));
    }
    let g = |i: usize, j: usize| net.gain(i, j);
    let radii = log_grid(T::lit(1e-8), T::lit(1e8), 1601);
    let mut d = ThreeSumDetails {
        radii: radii.clone(),
        sigma2: Vec::with_capacity(radii.len()),
        sigma3: Vec::new(),
        residuals: Vec::with_capacity(radii.len()),
        g: Vec::with_capacity(radii.len()),
        g_star: Vec::new(),
        h: Vec::with_capacity(radii.len()),
    };
    for &r in &radii {
        let (s2, res) = solve_sigma2(g(0, 1), g(0, 2), g(1, 0), g(1, 2), r)?;
        d.sigma2.push(s2);
        d.residuals.push(res);
        d.h.push(g(2, 0).eval(r) + g(2, 1).eval(s2));
        let gap = (r - g(0, 1).eval(s2)).max(T::zero());
        d.g.push(g(0, 2).invert(gap).map_err(|_| PathError::BisectionFailure { radius: r.as_f64() })?);
    }
    let mut g_star = d.g.clone();
    for k in (0..g_star.len().saturating_sub(1)).rev() {
        g_star[k] = g_star[k].min(g_star[k + 1]);
    }
    for k in 0..radii.len() {
        if !(d.h[k] < g_star[k]) {
            return Err(PathError::EmptyGap { radius: radii[k].as_f64() });
        }
    }
    d.sigma3 = g_star.iter().zip(&d.h).map(|(&a, &b)| (a + b) / T::lit(2.0)).collect();
    d.g_star = g_star;

    let mut pr = vec![T::zero()];
    let mut pv = vec![vec![T::zero(); 3]];
    for k in 0..radii.len() {
        pr.push(radii[k]);
        pv.push(vec![radii[k], d.sigma2[k], d.sigma3[k]]);
    }
    let path = finish(net, OmegaPath::new(pr, pv), Constructor::ThreeSum, opts)?;
    Ok((path, d))
}

/// Root in `s2` of `g13^-1(r - g12(s2)) = g23^-1(s2 - g21(r))` and its residual.
fn solve_sigma2<T: Scalar>(
    g12: &GainExpr<T>,
    g13: &GainExpr<T>,
    g21: &GainExpr<T>,
    g23: &GainExpr<T>,
    r: T,
) -> Result<(T, T), PathError> {
    let fail = || PathError::BisectionFailure { radius: r.as_f64() };
    let f = |s2: T| -> Result<T, PathError> {
        let a = g13.invert((r - g12.eval(s2)).max(T::zero())).map_err(|_| fail())?;
        let b = g23.invert((s2 - g21.eval(r)).max(T::zero())).map_err(|_| fail())?;
        Ok(a - b)
    };
    let mut lo = g21.eval(r);
    let mut hi = g12.invert(r).map_err(|_| fail())?;
    if !(lo < hi) || !(f(lo)? > T::zero()) || !(f(hi)? < T::zero()) {
        return Err(fail());
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo)?.abs(), f(hi)?.abs());
    Ok(if flo <= fhi { (lo, flo) } else { (hi, fhi) })
}

/// Splits `Gamma = Gamma_U + Gamma_B` into unbounded and bounded gains.
/// For large radii `sigma = sigma_U + sigma_B(theta(r))`, where `sigma_U` is
/// a path for `(1 + kappa) Gamma_U` and `theta` keeps the bounded part below
/// `kappa / 4` of `sigma_U`; below the splice radius the path is continued by
/// downward iteration of the full operator.
pub fn path_mixed<T: Scalar>(net: &GainNetwork<T>, opts: &PathOptions<T>) -> Result<ValidatedPath<T>, PathError> {
    if !net.all_sum() {
        return Err(PathError::NotApplicable("path_mixed requires sum aggregation".into()));
    }
    let unbounded = net.filter_gains(|g| g.classify() == GainClass::KInfinity);
    let bounded = net.filter_gains(|g| g.classify() == GainClass::KBounded);
    if bounded.is_decoupled() {
        return path_irreducible(net, None, opts);
    }
    if unbounded.is_decoupled() {
        return path_bounded(net, opts);
    }
    let n = net.n();
    let sigma_b =
        construct_path(&bounded, None, opts).map(|p| p.path).unwrap_or_else(|_| OmegaPath::ray(vec![T::one(); n]));
    let grid = log_grid(T::lit(1e-8), T::lit(1e8), 801);
    for kappa in [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125] {
        let kappa = T::lit(kappa);
        let scaled = scale_gains(&unbounded, T::one() + kappa);
        let Ok(sigma_u) = construct_path(&scaled, None, opts) else { continue };
        let combined: Vec<Vec<T>> = grid
            .iter()
            .map(|&r| {
                let u = sigma_u.path.eval(r);
                let floor = u.iter().fold(T::infinity(), |a, &b| a.min(b));
                let theta = r.min(kappa / T::lit(4.0) * floor);
                let b = sigma_b.eval(theta);
                u.iter().zip(&b).map(|(&x, &y)| x + y).collect()
            })
            .collect();
        let inside: Vec<bool> = combined
            .iter()
            .map(|s| net.eval_operator(s).iter().zip(s).all(|(&g, &x)| strictly_below(g, x, T::tol_strict())))
            .collect();
        let Some(k_star) = (0..grid.len()).rev().take_while(|&k| inside[k]).last() else { continue };
        let mut anchors = Vec::new();
        if k_star > 0 {
            let Ok(mut down) = path_downward_op(net, &combined[k_star]) else { continue };
            down.pop();
            down.reverse();
            down.pop();
            anchors = down;
        }
        anchors.extend(combined[k_star..].iter().cloned());
        if let Ok(p) = finish(net, OmegaPath::from_anchors(anchors), Constructor::Mixed, opts) {
            return Ok(p);
        }
    }
    Err(PathError::SpliceFailure)
}

fn scale_gains<T: Scalar>(net: &GainNetwork<T>, c: T) -> GainNetwork<T> {
    let gamma = net.gains().iter().map(|row| row.iter().map(|g| g.scaled(c)).collect()).collect();
    GainNetwork::with_coupling(
        gamma,
        net.external_gains().to_vec(),
        net.mafs().to_vec(),
        (0..net.n()).map(|i| net.coupling(i).clone()).collect(),
    )
    .expect("scaling keeps the network compatible")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Maf;

    type G = GainExpr<f64>;

    #[test]
    fn three_sum_closed_form() {
        let net = GainNetwork::uniform(3, G::linear(0.25), Maf::Sum).unwrap();
        let (p, d) = path_three_sum_details(&net, &PathOptions::default()).unwrap();
        for k in 0..d.radii.len() {
            let r = d.radii[k];
            assert!((d.sigma2[k] - r).abs() <= 1e-12 * r);
            assert!((d.h[k] - 0.5 * r).abs() <= 1e-12 * r);
            assert!((d.g[k] - 3.0 * r).abs() <= 1e-12 * r);
            assert!((d.sigma3[k] - 1.75 * r).abs() <= 1e-12 * r);
            assert!(d.residuals[k] <= 1e-10 * r);
        }
        let s = p.path.eval(2.0);
        let g = net.eval_operator(&s);
        assert!((g[0] - 0.6875 * 2.0).abs() < 1e-9);
        assert!((g[2] - 0.5 * 2.0).abs() < 1e-9);
        assert!(p.report.certified(1e-9));
    }

    #[test]
    fn three_sum_symmetric_pair() {
        let pair = G::Sum(vec![G::linear(0.3), G::atan(0.1)]);
        let net = GainNetwork::new(
            vec![
                vec![G::Zero, pair.clone(), G::linear(0.2)],
                vec![pair, G::Zero, G::linear(0.2)],
                vec![G::linear(0.1), G::power(0.2, 1.0), G::Zero],
            ],
            vec![G::Zero; 3],
            vec![Maf::Sum; 3],
        )
        .unwrap();
        let (_, d) = path_three_sum_details(&net, &PathOptions::default()).unwrap();
        for k in (0..d.radii.len()).step_by(50) {
            let r = d.radii[k];
            assert!((d.sigma2[k] - r).abs() <= 1e-9 * r, "r = {r}: {}", d.sigma2[k]);
        }
    }

    #[test]
    fn three_sum_rejects_violation() {
        let net = GainNetwork::uniform(3, G::linear(1.0), Maf::Sum).unwrap();
        assert_eq!(net.eval_operator(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
        let err = path_three_sum(&net, &PathOptions::default()).unwrap_err();
        assert!(
            matches!(
                err,
                PathError::EmptyGap { .. } | PathError::BisectionFailure { .. } | PathError::InvalidPath { .. }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn mixed_example() {
        let net = GainNetwork::new(
            vec![vec![G::Zero, G::linear(0.3)], vec![G::saturating(0.5), G::Zero]],
            vec![G::Zero; 2],
            vec![Maf::Sum; 2],
        )
        .unwrap();
        let p = path_mixed(&net, &PathOptions::default()).unwrap();
        assert_eq!(p.constructor, Constructor::Mixed);
        assert!(p.report.certified(1e-9), "{}", p.report.min_relative_on_grid());
    }

    #[test]
    fn mixed_delegates() {
        let b = GainNetwork::uniform(2, G::saturating(0.5), Maf::Sum).unwrap();
        assert_eq!(path_mixed(&b, &PathOptions::default()).unwrap().constructor, Constructor::Bounded);
        let u = GainNetwork::uniform(2, G::linear(0.5), Maf::Sum).unwrap();
        assert_eq!(path_mixed(&u, &PathOptions::default()).unwrap().constructor, Constructor::Irreducible);
    }
}
