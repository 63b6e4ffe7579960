//! Monotone aggregation functions, gain matrices and the induced gain
//! operators on the positive orthant.

use crate::gain::{GainClass, GainExpr};
use crate::scalar::Scalar;

/// Monotone aggregation of one row of gain values.
#[derive(Debug, Clone, PartialEq)]
pub enum Maf<T> {
    Sum,
    Max,
    /// `rho(sum of slots)`
    OuterSum(GainExpr<T>),
    /// Sum over blocks of the maximum inside each block. Slot `n` is the
    /// external input.
    BlockMaxSum(Vec<Vec<usize>>),
}

/// How the external slot enters a row.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ExternalCoupling<T> {
    /// The external value is one more argument of the aggregation.
    #[default]
    Joint,
    /// `mu(internal) + psi(external)`.
    Additive(GainExpr<T>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("gain matrix shape mismatch: {0}")]
    Shape(String),
    #[error("diagonal gain gamma_{i}{i} must be zero", i = .0 + 1)]
    NonZeroDiagonal(usize),
    #[error("row {}: aggregation is not strictly increasing on the active inputs ({reason})", .row + 1)]
    Incompatible { row: usize, reason: String },
}

impl<T: Scalar> Maf<T> {
    /// Aggregates internal slot values together with the external slot value.
    pub fn aggregate(&self, values: &[T], ext: T) -> T {
        match self {
            Maf::Sum => values.iter().copied().sum::<T>() + ext,
            Maf::Max => values.iter().fold(ext, |m, &v| m.max(v)),
            Maf::OuterSum(rho) => rho.eval(values.iter().copied().sum::<T>() + ext),
            Maf::BlockMaxSum(blocks) => blocks
                .iter()
                .map(|b| {
                    b.iter().fold(T::zero(), |m, &k| {
                        let v = if k < values.len() { values[k] } else { ext };
                        m.max(v)
                    })
                })
                .sum(),
        }
    }

    pub fn is_max(&self) -> bool {
        matches!(self, Maf::Max)
    }

    pub fn is_sum(&self) -> bool {
        matches!(self, Maf::Sum)
    }
}

/// Diagonal operator on the orthant, applied componentwise.
#[derive(Debug, Clone, PartialEq)]
pub enum DiagOp<T> {
    /// `s + alpha(s)`
    IdPlus(GainExpr<T>),
    /// `c * s + s * alpha(s)`, the operator of the separated-gains case.
    Separated { c: T, alpha: GainExpr<T> },
}

impl<T: Scalar> DiagOp<T> {
    pub fn id_plus(alpha: GainExpr<T>) -> Self {
        DiagOp::IdPlus(alpha)
    }

    pub fn alpha(&self) -> &GainExpr<T> {
        match self {
            DiagOp::IdPlus(a) | DiagOp::Separated { alpha: a, .. } => a,
        }
    }

    pub fn apply_scalar(&self, s: T) -> T {
        match self {
            DiagOp::IdPlus(a) => s + a.eval(s),
            DiagOp::Separated { c, alpha } => *c * s + s * alpha.eval(s),
        }
    }

    pub fn apply(&self, s: &[T]) -> Vec<T> {
        s.iter().map(|&x| self.apply_scalar(x)).collect()
    }
}

/// Gain matrix with per-row aggregation: induces `Gamma_mu` and `Gamma-bar_mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainNetwork<T> {
    gamma: Vec<Vec<GainExpr<T>>>,
    gamma_u: Vec<GainExpr<T>>,
    mu: Vec<Maf<T>>,
    coupling: Vec<ExternalCoupling<T>>,
}

impl<T: Scalar> GainNetwork<T> {
    pub fn new(gamma: Vec<Vec<GainExpr<T>>>, gamma_u: Vec<GainExpr<T>>, mu: Vec<Maf<T>>) -> Result<Self, NetworkError> {
        let n = gamma.len();
        Self::with_coupling(gamma, gamma_u, mu, vec![ExternalCoupling::Joint; n])
    }

    pub fn with_coupling(
        gamma: Vec<Vec<GainExpr<T>>>,
        gamma_u: Vec<GainExpr<T>>,
        mu: Vec<Maf<T>>,
        coupling: Vec<ExternalCoupling<T>>,
    ) -> Result<Self, NetworkError> {
        let n = gamma.len();
        if n == 0 {
            return Err(NetworkError::Shape("empty network".into()));
        }
        if let Some(i) = gamma.iter().position(|row| row.len() != n) {
            return Err(NetworkError::Shape(format!("row {} has {} entries, expected {n}", i + 1, gamma[i].len())));
        }
        if gamma_u.len() != n || mu.len() != n || coupling.len() != n {
            return Err(NetworkError::Shape(format!(
                "expected {n} external gains/aggregations, got {}/{}/{}",
                gamma_u.len(),
                mu.len(),
                coupling.len()
            )));
        }
        let net = GainNetwork { gamma, gamma_u, mu, coupling };
        for i in 0..n {
            if !net.gamma[i][i].is_zero() {
                return Err(NetworkError::NonZeroDiagonal(i));
            }
            net.audit_row(i)?;
        }
        Ok(net)
    }

    /// Linear gains `slopes[i][j] * s` with the same aggregation on every row.
    pub fn from_slopes(slopes: &[Vec<f64>], mu: Maf<T>) -> Result<Self, NetworkError> {
        let n = slopes.len();
        let gamma = slopes
            .iter()
            .map(|row| row.iter().map(|&c| if c == 0.0 { GainExpr::Zero } else { GainExpr::linear(c) }).collect())
            .collect();
        Self::new(gamma, vec![GainExpr::Zero; n], vec![mu; n])
    }

    /// Same gains everywhere off the diagonal.
    pub fn uniform(n: usize, g: GainExpr<T>, mu: Maf<T>) -> Result<Self, NetworkError> {
        let gamma = (0..n).map(|i| (0..n).map(|j| if i == j { GainExpr::Zero } else { g.clone() }).collect()).collect();
        Self::new(gamma, vec![GainExpr::Zero; n], vec![mu; n])
    }

    pub fn with_external_gains(mut self, gamma_u: Vec<GainExpr<T>>) -> Result<Self, NetworkError> {
        if gamma_u.len() != self.n() {
            return Err(NetworkError::Shape("external gain count".into()));
        }
        self.gamma_u = gamma_u;
        for i in 0..self.n() {
            self.audit_row(i)?;
        }
        Ok(self)
    }

    fn audit_row(&self, i: usize) -> Result<(), NetworkError> {
        let n = self.n();
        let active: Vec<usize> = (0..n).filter(|&j| !self.gamma[i][j].is_zero()).collect();
        let ext_active = !self.gamma_u[i].is_zero();
        let bad = |reason: String| Err(NetworkError::Incompatible { row: i, reason });
        match &self.mu[i] {
            Maf::Sum | Maf::Max => {}
            Maf::OuterSum(rho) => {
                if rho.classify() == GainClass::Zero {
                    return bad("outer function is zero".into());
                }
            }
            Maf::BlockMaxSum(blocks) => {
                let mut seen = vec![false; n + 1];
                for b in blocks {
                    if b.is_empty() {
                        return bad("empty block".into());
                    }
                    for &k in b {
                        if k > n {
                            return bad(format!("block index {} out of range", k + 1));
                        }
                        if seen[k] {
                            return bad(format!("index {} appears in two blocks", k + 1));
                        }
                        seen[k] = true;
                    }
                }
                if let Some(&j) = active.iter().find(|&&j| !seen[j]) {
                    return bad(format!("active input {} is not covered by any block", j + 1));
                }
                if ext_active && matches!(self.coupling[i], ExternalCoupling::Joint) && !seen[n] {
                    return bad("external input is not covered by any block".into());
                }
            }
        }
        if let ExternalCoupling::Additive(psi) = &self.coupling[i] {
            if ext_active && psi.is_zero() {
                return bad("additive external function is zero".into());
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn gain(&self, i: usize, j: usize) -> &GainExpr<T> {
        &self.gamma[i][j]
    }

    pub fn gains(&self) -> &[Vec<GainExpr<T>>] {
        &self.gamma
    }

    pub fn external_gain(&self, i: usize) -> &GainExpr<T> {
        &self.gamma_u[i]
    }

    pub fn external_gains(&self) -> &[GainExpr<T>] {
        &self.gamma_u
    }

    pub fn maf(&self, i: usize) -> &Maf<T> {
        &self.mu[i]
    }

    pub fn mafs(&self) -> &[Maf<T>] {
        &self.mu
    }

    pub fn coupling(&self, i: usize) -> &ExternalCoupling<T> {
        &self.coupling[i]
    }

    pub fn has_external_input(&self) -> bool {
        self.gamma_u.iter().any(|g| !g.is_zero())
    }

    pub fn all_max(&self) -> bool {
        self.mu.iter().all(Maf::is_max)
    }

    pub fn all_sum(&self) -> bool {
        self.mu.iter().all(Maf::is_sum)
    }

    /// True when every off-diagonal gain is zero.
    pub fn is_decoupled(&self) -> bool {
        self.gamma.iter().all(|row| row.iter().all(GainExpr::is_zero))
    }

    pub fn has_zero_row(&self) -> bool {
        self.gamma.iter().any(|row| row.iter().all(GainExpr::is_zero))
    }

    /// Classes of the nonzero off-diagonal gains.
    pub fn gain_classes(&self) -> impl Iterator<Item = GainClass> + '_ {
        self.gamma.iter().flatten().map(GainExpr::classify).filter(|c| *c != GainClass::Zero)
    }

    fn row_values(&self, i: usize, s: &[T]) -> Vec<T> {
        self.gamma[i].iter().zip(s).map(|(g, &x)| g.eval(x)).collect()
    }

    fn row_ext(&self, i: usize, s: &[T], r: T) -> T {
        let values = self.row_values(i, s);
        let w = self.gamma_u[i].eval(r);
        match &self.coupling[i] {
            ExternalCoupling::Joint => self.mu[i].aggregate(&values, w),
            ExternalCoupling::Additive(psi) => self.mu[i].aggregate(&values, T::zero()) + psi.eval(w),
        }
    }

    /// `Gamma_mu(s)`.
    pub fn eval_operator(&self, s: &[T]) -> Vec<T> {
        self.eval_operator_ext(s, T::zero())
    }

    /// `Gamma-bar_mu(s, r)`.
    pub fn eval_operator_ext(&self, s: &[T], r: T) -> Vec<T> {
        assert_eq!(s.len(), self.n(), "state dimension");
        (0..self.n()).map(|i| self.row_ext(i, s, r)).collect()
    }

    /// Row `i` of `Gamma-bar_mu`.
    pub fn eval_row_ext(&self, i: usize, s: &[T], r: T) -> T {
        self.row_ext(i, s, r)
    }

    /// Structural componentwise supremum of `Gamma_mu`.
    pub fn operator_sup(&self) -> Vec<T> {
        (0..self.n())
            .map(|i| {
                let sups: Vec<T> = self.gamma[i].iter().map(GainExpr::sup).collect();
                self.mu[i].aggregate(&sups, T::zero())
            })
            .collect()
    }

    /// Keeps the gains accepted by `keep` and replaces the rest with zero.
    pub fn filter_gains(&self, keep: impl Fn(&GainExpr<T>) -> bool) -> Self {
        let mut out = self.clone();
        for row in out.gamma.iter_mut() {
            for g in row.iter_mut() {
                if !keep(g) {
                    *g = GainExpr::Zero;
                }
            }
        }
        out
    }

    /// Sub-network on `nodes` with all other inputs dropped.
    pub fn restrict(&self, nodes: &[usize]) -> Self {
        let gamma = nodes.iter().map(|&i| nodes.iter().map(|&j| self.gamma[i][j].clone()).collect()).collect();
        GainNetwork {
            gamma,
            gamma_u: nodes.iter().map(|&i| self.gamma_u[i].clone()).collect(),
            mu: nodes
                .iter()
                .map(|&i| match &self.mu[i] {
                    Maf::BlockMaxSum(blocks) => Maf::BlockMaxSum(
                        blocks
                            .iter()
                            .map(|b| {
                                b.iter()
                                    .filter_map(|&k| {
                                        if k == self.n() {
                                            Some(nodes.len())
                                        } else {
                                            nodes.iter().position(|&x| x == k)
                                        }
                                    })
                                    .collect::<Vec<_>>()
                            })
                            .filter(|b| !b.is_empty())
                            .collect(),
                    ),
                    m => m.clone(),
                })
                .collect(),
            coupling: nodes.iter().map(|&i| self.coupling[i].clone()).collect(),
        }
    }
}

/// A monotone self-map of the positive orthant.
pub trait MonotoneOperator<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, s: &[T]) -> Vec<T>;
    /// Componentwise supremum over the orthant (`+∞` where unbounded).
    fn sup(&self) -> Vec<T>;
}

impl<T: Scalar> MonotoneOperator<T> for GainNetwork<T> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, s: &[T]) -> Vec<T> {
        self.eval_operator(s)
    }

    fn sup(&self) -> Vec<T> {
        self.operator_sup()
    }
}

/// `Gamma_mu` optionally wrapped by diagonal operators: `outer ∘ Gamma_mu ∘ inner`.
#[derive(Debug, Clone, Copy)]
pub struct GainOperator<'a, T> {
    pub net: &'a GainNetwork<T>,
    pub outer: Option<&'a DiagOp<T>>,
    pub inner: Option<&'a DiagOp<T>>,
}

impl<'a, T: Scalar> GainOperator<'a, T> {
    pub fn plain(net: &'a GainNetwork<T>) -> Self {
        GainOperator { net, outer: None, inner: None }
    }

    /// `D ∘ Gamma_mu`
    pub fn outer(net: &'a GainNetwork<T>, d: Option<&'a DiagOp<T>>) -> Self {
        GainOperator { net, outer: d, inner: None }
    }

    /// `Gamma_mu ∘ D`
    pub fn inner(net: &'a GainNetwork<T>, d: &'a DiagOp<T>) -> Self {
        GainOperator { net, outer: None, inner: Some(d) }
    }
}

impl<T: Scalar> MonotoneOperator<T> for GainOperator<'_, T> {
    fn dim(&self) -> usize {
        self.net.n()
    }

    fn apply(&self, s: &[T]) -> Vec<T> {
        let v = match self.inner {
            Some(d) => self.net.eval_operator(&d.apply(s)),
            None => self.net.eval_operator(s),
        };
        match self.outer {
            Some(d) => d.apply(&v),
            None => v,
        }
    }

    fn sup(&self) -> Vec<T> {
        let s = self.net.operator_sup();
        match self.outer {
            Some(d) => s.iter().map(|&x| if x.is_infinite() { x } else { d.apply_scalar(x) }).collect(),
            None => s,
        }
    }
}

/// Componentwise application of `D`.
pub fn apply_diag<T: Scalar>(d: &DiagOp<T>, s: &[T]) -> Vec<T> {
    d.apply(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = GainExpr<f64>;

    fn two_max(c: f64) -> GainNetwork<f64> {
        GainNetwork::from_slopes(&[vec![0.0, c], vec![c, 0.0]], Maf::Max).unwrap()
    }

    #[test]
    fn operator_examples() {
        assert_eq!(two_max(0.5).eval_operator(&[1.0, 1.0]), vec![0.5, 0.5]);
        assert_eq!(two_max(0.5).eval_operator(&[0.0, 0.0]), vec![0.0, 0.0]);

        let sq = Maf::OuterSum(G::power(1.0, 2.0));
        let net = GainNetwork::new(
            vec![vec![G::Zero, G::linear(1.0)], vec![G::linear(2.0), G::Zero]],
            vec![G::Zero, G::Zero],
            vec![sq.clone(), sq],
        )
        .unwrap();
        assert_eq!(net.eval_operator(&[1.0, 3.0]), vec![9.0, 4.0]);
    }

    #[test]
    fn external_slot_examples() {
        let net = GainNetwork::new(vec![vec![G::Zero]], vec![G::linear(1.0)], vec![Maf::Sum]).unwrap();
        assert_eq!(net.eval_operator_ext(&[0.0], 2.0), vec![2.0]);
        assert_eq!(net.eval_operator_ext(&[0.0], 0.0), net.eval_operator(&[0.0]));

        // (sum of slots + r)^2 with row values (1, 2) and r = 1 -> 16
        let sq = Maf::<f64>::OuterSum(G::power(1.0, 2.0));
        assert_eq!(sq.aggregate(&[1.0, 2.0], 1.0), 16.0);
    }

    #[test]
    fn diag_examples() {
        let d = DiagOp::id_plus(G::linear(1.0));
        assert_eq!(apply_diag(&d, &[1.0, 2.0]), vec![2.0, 4.0]);
        assert_eq!(apply_diag(&d, &[0.0, 0.0]), vec![0.0, 0.0]);
        let d = DiagOp::id_plus(G::power(1.0, 2.0));
        assert_eq!(apply_diag(&d, &[3.0]), vec![12.0]);
    }

    #[test]
    fn block_max_sum_aggregates_blocks() {
        let m = Maf::<f64>::BlockMaxSum(vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(m.aggregate(&[1.0, 3.0, 2.0, 0.5], 0.0), 5.0);
    }

    #[test]
    fn rejects_incompatible_aggregation() {
        let err = GainNetwork::new(
            vec![vec![G::Zero, G::linear(1.0), G::linear(1.0)], vec![G::Zero; 3], vec![G::Zero; 3]],
            vec![G::Zero; 3],
            vec![Maf::BlockMaxSum(vec![vec![1]]), Maf::Sum, Maf::Sum],
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::Incompatible { row: 0, .. }));

        let err = GainNetwork::new(
            vec![vec![G::Zero, G::linear(1.0)], vec![G::linear(1.0), G::Zero]],
            vec![G::Zero; 2],
            vec![Maf::OuterSum(G::Zero), Maf::Sum],
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::Incompatible { row: 0, .. }));

        let err = GainNetwork::new(vec![vec![G::linear(1.0)]], vec![G::Zero], vec![Maf::Sum]).unwrap_err();
        assert_eq!(err, NetworkError::NonZeroDiagonal(0));
    }

    #[test]
    fn restrict_keeps_block_structure() {
        let net = GainNetwork::new(
            vec![
                vec![G::Zero, G::linear(0.5), G::linear(2.0)],
                vec![G::linear(0.5), G::Zero, G::Zero],
                vec![G::Zero, G::Zero, G::Zero],
            ],
            vec![G::Zero; 3],
            vec![Maf::Sum; 3],
        )
        .unwrap();
        let sub = net.restrict(&[0, 1]);
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.eval_operator(&[1.0, 1.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn composed_operators() {
        let net = GainNetwork::from_slopes(&[vec![0.0, 0.9], vec![0.9, 0.0]], Maf::Sum).unwrap();
        let d = DiagOp::id_plus(G::linear(0.2));
        let op = GainOperator::outer(&net, Some(&d));
        let v = op.apply(&[1.0, 1.0]);
        assert!((v[0] - 1.08).abs() < 1e-12);
        let op = GainOperator::inner(&net, &d);
        let v = op.apply(&[1.0, 1.0]);
        assert!((v[0] - 1.08).abs() < 1e-12);
    }
}
