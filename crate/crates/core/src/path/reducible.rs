//! Block composition for reducible networks.
//!
//! Blocks are processed from the most downstream one upwards. Each block has
//! its own path `sigma_B(tau)`; the block parameter is `tau(r) = max(2 eta~(r), r)`
//! where `eta(r)` is the smallest `tau` for which the block rows are strictly
//! contracted while the downstream states sit at their already composed
//! values, and `eta~` is an increasing majorant of `eta` on the anchor grid.

use super::{
    chain::path_max, construct_path, finish, op, Constructor, OmegaPath, PathError, PathOptions, ValidatedPath,
};
use crate::graph::{adjacency, scc_decompose};
use crate::network::{DiagOp, GainNetwork};
use crate::scalar::{log_grid, Scalar};

pub fn path_reducible<T: Scalar>(net: &GainNetwork<T>, opts: &PathOptions<T>) -> Result<ValidatedPath<T>, PathError> {
    path_reducible_with(net, None, opts)
}

/// As [`path_reducible`], for `D ∘ Gamma_mu` when `d` is given.
pub fn path_reducible_with<T: Scalar>(
    net: &GainNetwork<T>,
    d: Option<&DiagOp<T>>,
    opts: &PathOptions<T>,
) -> Result<ValidatedPath<T>, PathError> {
    let n = net.n();
    let blocks = scc_decompose(&adjacency(net)).blocks;
    if blocks.len() < 2 {
        return Err(PathError::Irreducible);
    }
    let grid = log_grid(T::lit(1e-8), T::lit(1e8), 641);
    let kk = grid.len();
    let mut vals = vec![vec![T::zero(); n]; kk];
    let tol = T::tol_strict();

    for (b, block) in blocks.iter().enumerate().rev() {
        let sub = net.restrict(block);
        let sigma_b = if sub.is_decoupled() {
            OmegaPath::ray(vec![T::one(); block.len()])
        } else if d.is_none() && sub.all_max() {
            path_max(&sub, opts).map_err(|_| PathError::BlockSgcFails { block: b })?.path
        } else {
            construct_path(&sub, d, opts).map_err(|_| PathError::BlockSgcFails { block: b })?.path
        };
        let fed = block.iter().any(|&i| (0..n).any(|j| !block.contains(&j) && !net.gain(i, j).is_zero()));
        let mut taus = grid.clone();
        if fed {
            let contracted = |tau: T, k: usize| {
                let mut s = vals[k].clone();
                let local = sigma_b.eval(tau);
                for (p, &i) in block.iter().enumerate() {
                    s[i] = local[p];
                }
                block.iter().enumerate().all(|(p, &i)| {
                    let mut v = net.eval_row_ext(i, &s, T::zero());
                    if let Some(d) = d {
                        v = d.apply_scalar(v);
                    }
                    v <= local[p] * (T::one() - tol)
                })
            };
            let mut eta = Vec::with_capacity(kk);
            for k in 0..kk {
                eta.push(smallest_tau(&contracted, k, grid[k]).ok_or(PathError::BlockSgcFails { block: b })?);
            }
            for k in 0..kk {
                let ahead = if k + 1 < kk { eta[k].max(eta[k + 1]) } else { eta[k] };
                let mut t = (ahead * T::lit(2.0)).max(grid[k]);
                if k > 0 {
                    t = t.max(taus[k - 1] * (T::one() + T::lit(1e-9)));
                }
                taus[k] = t;
            }
        }
        for k in 0..kk {
            let local = sigma_b.eval(taus[k]);
            for (p, &i) in block.iter().enumerate() {
                vals[k][i] = local[p];
            }
        }
    }

    let mut radii = vec![T::zero()];
    radii.extend(grid.iter().copied());
    let mut values = vec![vec![T::zero(); n]];
    values.extend(vals);
    finish(&op(net, d), OmegaPath::new(radii, values), Constructor::Reducible, opts)
}

/// Smallest `tau` (to bisection accuracy) with `ok(tau, k)`, searching
/// geometrically from `start`.
fn smallest_tau<T: Scalar>(ok: &impl Fn(T, usize) -> bool, k: usize, start: T) -> Option<T> {
    let two = T::lit(2.0);
    let (mut lo, mut hi);
    if ok(start, k) {
        hi = start;
        lo = start / two;
        let mut steps = 0;
        while ok(lo, k) {
            hi = lo;
            lo = lo / two;
            steps += 1;
            if steps > 200 || lo == T::zero() {
                return Some(hi);
            }
        }
    } else {
        lo = start;
        hi = start * two;
        let mut steps = 0;
        while !ok(hi, k) {
            lo = hi;
            hi = hi * two;
            steps += 1;
            if steps > 400 || !hi.is_finite() {
                return None;
            }
        }
    }
    for _ in 0..60 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid, k) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::GainExpr;
    use crate::network::Maf;

    type G = GainExpr<f64>;

    #[test]
    fn cascade() {
        // node 1 driven by node 2 only
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.8], vec![0.0, 0.0]], Maf::Sum).unwrap();
        let p = path_reducible(&net, &PathOptions::default()).unwrap();
        assert!(p.report.certified(1e-9));
        let s = p.path.eval(1.0);
        assert!((s[1] - 1.0).abs() < 1e-12);
        // 2 * eta~(r) with eta(r) = 0.8 r up to the strictness margin and grid look-ahead
        assert!(s[0] >= 1.6 && s[0] <= 1.6 * 1.06, "{}", s[0]);
    }

    #[test]
    fn decoupled_gives_identity() {
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]], Maf::Sum).unwrap();
        let p = path_reducible(&net, &PathOptions::default()).unwrap();
        assert_eq!(p.path.eval(0.5), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn two_cycles_in_series() {
        let mut rows = vec![vec![0.0; 4]; 4];
        rows[0][1] = 0.5;
        rows[1][0] = 0.5;
        rows[2][3] = 0.5;
        rows[3][2] = 0.5;
        rows[1][2] = 1.0;
        let net = GainNetwork::<f64>::from_slopes(&rows, Maf::Sum).unwrap();
        let p = path_reducible(&net, &PathOptions::default()).unwrap();
        assert!(p.report.certified(1e-9));
    }

    #[test]
    fn nonlinear_cascade_with_max_blocks() {
        let net = GainNetwork::new(
            vec![
                vec![G::Zero, G::power(0.5, 1.0), G::power(2.0, 2.0)],
                vec![G::linear(0.9), G::Zero, G::Zero],
                vec![G::Zero, G::Zero, G::Zero],
            ],
            vec![G::Zero; 3],
            vec![Maf::Max; 3],
        )
        .unwrap();
        let p = path_reducible(&net, &PathOptions::default()).unwrap();
        assert!(p.report.valid());
    }

    #[test]
    fn irreducible_input_is_rejected() {
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0, 0.5], vec![0.5, 0.0]], Maf::Sum).unwrap();
        assert_eq!(path_reducible(&net, &PathOptions::default()), Err(PathError::Irreducible));
    }
}
