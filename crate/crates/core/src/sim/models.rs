//! Built-in model families and their gain networks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::lyap_eq::solve_lyapunov_eq;
use super::SimError;
use crate::gain::{GainClass, GainExpr};
use crate::lyapunov::{LyapunovFn, SubsystemSpec};
use crate::network::{ExternalCoupling, GainNetwork, Maf};

type Rhs = dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;

/// Interconnected dynamics `x' = f(x, u)` with the state split into blocks.
#[derive(Clone)]
pub struct SystemModel {
    state_dims: Vec<usize>,
    input_dim: usize,
    rhs: Arc<Rhs>,
}

impl std::fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemModel")
            .field("state_dims", &self.state_dims)
            .field("input_dim", &self.input_dim)
            .finish_non_exhaustive()
    }
}

impl SystemModel {
    pub fn custom(
        state_dims: Vec<usize>,
        input_dim: usize,
        rhs: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        SystemModel { state_dims, input_dim, rhs: Arc::new(rhs) }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dims.iter().sum()
    }

    pub fn state_dims(&self) -> &[usize] {
        &self.state_dims
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        (self.rhs)(x, u)
    }
}

/// `x_i' = A_i x_i + sum_j Delta_ij x_j + B_i u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInterconnection {
    pub a: Vec<DMatrix<f64>>,
    /// `delta[i][j]` is `N_i x N_j`; the diagonal entries are ignored.
    pub delta: Vec<Vec<DMatrix<f64>>>,
    /// `b[i]` is `N_i x M_i`.
    pub b: Vec<DMatrix<f64>>,
}

impl LinearInterconnection {
    /// Scalar blocks `A_i = a`, `Delta_ij = delta` off the diagonal and `B_i = b`.
    pub fn scalar(n: usize, a: f64, delta: f64, b: f64) -> Self {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        LinearInterconnection {
            a: vec![m(a); n],
            delta: (0..n).map(|i| (0..n).map(|j| m(if i == j { 0.0 } else { delta })).collect()).collect(),
            b: vec![m(b); n],
        }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    fn check(&self) -> Result<(), SimError> {
        let n = self.n();
        if self.b.len() != n || self.delta.len() != n {
            return Err(SimError::BadParameters("block counts of A, B, Delta differ".into()));
        }
        for i in 0..n {
            let ni = self.a[i].nrows();
            if self.a[i].ncols() != ni || self.b[i].nrows() != ni || self.delta[i].len() != n {
                return Err(SimError::BadParameters(format!("block {} has inconsistent shapes", i + 1)));
            }
            for j in 0..n {
                if i != j && self.delta[i][j].shape() != (ni, self.a[j].nrows()) {
                    return Err(SimError::BadParameters(format!("Delta_{}{} has the wrong shape", i + 1, j + 1)));
                }
            }
        }
        Ok(())
    }

    /// Full matrices `A + Delta` and block-diagonal `B`.
    pub fn full_matrices(&self) -> Result<(DMatrix<f64>, DMatrix<f64>), SimError> {
        self.check()?;
        let n = self.n();
        let rows: Vec<usize> = self.a.iter().map(|m| m.nrows()).collect();
        let cols: Vec<usize> = self.b.iter().map(|m| m.ncols()).collect();
        let (nx, nu) = (rows.iter().sum(), cols.iter().sum());
        let mut a = DMatrix::zeros(nx, nx);
        let mut b = DMatrix::zeros(nx, nu);
        let (mut r0, mut c0) = (0, 0);
        for i in 0..n {
            let mut k0 = 0;
            for j in 0..n {
                let blk = if i == j { &self.a[i] } else { &self.delta[i][j] };
                a.view_mut((r0, k0), (rows[i], rows[j])).copy_from(blk);
                k0 += rows[j];
            }
            b.view_mut((r0, c0), (rows[i], cols[i])).copy_from(&self.b[i]);
            r0 += rows[i];
            c0 += cols[i];
        }
        Ok((a, b))
    }

    pub fn model(&self) -> Result<SystemModel, SimError> {
        let (a, b) = self.full_matrices()?;
        let dims = self.a.iter().map(|m| m.nrows()).collect();
        Ok(SystemModel::custom(dims, b.ncols(), move |x, u| &a * x + &b * u))
    }
}

/// Gains of a linear interconnection with quadratic subsystem Lyapunov
/// functions `x_i^T P_i x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGains {
    pub network: GainNetwork<f64>,
    /// `G_ij = 2 b_i^3 |Delta_ij| / (c_i (1 - eps) a_j)`.
    pub g: DMatrix<f64>,
    pub p: Vec<DMatrix<f64>>,
}

impl LinearGains {
    pub fn subsystems(&self) -> Vec<SubsystemSpec<f64>> {
        self.p
            .iter()
            .map(|p| {
                let rows = (0..p.nrows()).map(|r| p.row(r).iter().copied().collect()).collect();
                SubsystemSpec::new(p.nrows(), LyapunovFn::Quadratic(rows))
            })
            .collect()
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `gamma_ij(s) = G_ij sqrt(s)`, `gamma_iu(s) = 2 |B_i| b_i^3 / (c_i (1 - eps)) s`
/// and `mu_i(s, w) = (sum_j s_j + w)^2`, where `a_i^2`, `b_i^2` are the extreme
/// eigenvalues of `P_i` and `c_i` the smallest eigenvalue of `Q_i`.
pub fn linear_gains(sys: &LinearInterconnection, q: &[DMatrix<f64>], epsilon: f64) -> Result<LinearGains, SimError> {
    sys.check()?;
    let n = sys.n();
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SimError::BadParameters(format!("epsilon = {epsilon} not in (0, 1)")));
    }
    if q.len() != n {
        return Err(SimError::BadParameters(format!("expected {n} Q matrices, got {}", q.len())));
    }
    let mut p = Vec::with_capacity(n);
    let (mut lo, mut hi, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let pi = solve_lyapunov_eq(&sys.a[i], &q[i])?;
        let ev = SymmetricEigen::new(pi.clone()).eigenvalues;
        lo[i] = ev.min().sqrt();
        hi[i] = ev.max().sqrt();
        c[i] = SymmetricEigen::new(q[i].clone()).eigenvalues.min();
        if !(c[i] > 0.0) {
            return Err(SimError::BadParameters(format!("Q_{} is not positive definite", i + 1)));
        }
        p.push(pi);
    }
    let k: Vec<f64> = (0..n).map(|i| 2.0 * hi[i].powi(3) / (c[i] * (1.0 - epsilon))).collect();
    let g = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { k[i] * spectral_norm(&sys.delta[i][j]) / lo[j] });
    let gamma = (0..n)
        .map(|i| {
            (0..n).map(|j| if g[(i, j)] > 0.0 { GainExpr::power(g[(i, j)], 0.5) } else { GainExpr::Zero }).collect()
        })
        .collect();
    let gamma_u = (0..n)
        .map(|i| {
            let nb = spectral_norm(&sys.b[i]);
            if nb > 0.0 {
                GainExpr::linear(k[i] * nb)
            } else {
                GainExpr::Zero
            }
        })
        .collect();
    let mu = vec![Maf::OuterSum(GainExpr::power(1.0, 2.0)); n];
    let network = GainNetwork::new(gamma, gamma_u, mu).map_err(|e| SimError::BadParameters(e.to_string()))?;
    Ok(LinearGains { network, g, p })
}

/// Cohen-Grossberg network
/// `x_i' = -a_i(x_i) (b_i(x_i) - sum_j t_ij s_j(x_j) + J_i)` with
/// `lower_i < a_i < upper_i`, `|b_i(x)| > decay_i(|x|)` and
/// `|s_j(x)| < activation_j(|x|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CohenGrossberg {
    pub weights: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub decay: Vec<GainExpr<f64>>,
    pub activation: Vec<GainExpr<f64>>,
    pub rho: GainExpr<f64>,
    pub epsilon: f64,
}

impl CohenGrossberg {
    /// `n` identical neurons with weight `t` between distinct neurons.
    pub fn uniform(n: usize, t: f64, lower: f64, upper: f64, decay: GainExpr<f64>, activation: GainExpr<f64>) -> Self {
        CohenGrossberg {
            weights: (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { t }).collect()).collect(),
            lower: vec![lower; n],
            upper: vec![upper; n],
            decay: vec![decay; n],
            activation: vec![activation; n],
            rho: GainExpr::linear(1.0),
            epsilon: lower / 2.0,
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    fn check(&self) -> Result<(), SimError> {
        let n = self.n();
        let bad = |m: String| Err(SimError::BadParameters(m));
        if n == 0 || self.weights.iter().any(|r| r.len() != n) {
            return bad("weights must be a square matrix".into());
        }
        if [self.lower.len(), self.upper.len(), self.decay.len(), self.activation.len()].iter().any(|&l| l != n) {
            return bad(format!("expected {n} entries per neuron parameter"));
        }
        for i in 0..n {
            if self.weights[i][i] != 0.0 {
                return bad(format!("self weight t_{}{} must be zero", i + 1, i + 1));
            }
            if !(self.epsilon > 0.0 && self.epsilon < self.lower[i] && self.lower[i] <= self.upper[i]) {
                return bad(format!("need 0 < epsilon < lower_{0} <= upper_{0}", i + 1));
            }
            if self.decay[i].classify() != GainClass::KInfinity || self.decay[i].inverse_expr().is_none() {
                return bad(format!("decay_{} must be a Linear or Power gain", i + 1));
            }
            if self.activation[i].is_zero() {
                return bad(format!("activation bound {} must be class K", i + 1));
            }
        }
        if self.rho.inverse_expr().is_none() {
            return bad("rho must be a Linear or Power gain".into());
        }
        Ok(())
    }

    /// Subsystem Lyapunov functions `V_i(x_i) = |x_i|`.
    pub fn subsystems(&self) -> Vec<SubsystemSpec<f64>> {
        (0..self.n()).map(|_| SubsystemSpec::new(1, LyapunovFn::Norm)).collect()
    }

    /// Concrete members of the family used for simulation:
    /// `a_i(x) = lower + (upper - lower)(1 + x^2/(1 + x^2))/3`,
    /// `b_i(x) = 1.05 sign(x) decay_i(|x|)`, `s_j(x) = 0.95 sign(x) activation_j(|x|)`.
    pub fn model(&self) -> Result<SystemModel, SimError> {
        self.check()?;
        let cg = self.clone();
        let n = self.n();
        Ok(SystemModel::custom(vec![1; n], n, move |x, u| {
            let act: Vec<f64> = (0..n).map(|j| 0.95 * x[j].signum() * cg.activation[j].eval(x[j].abs())).collect();
            DVector::from_fn(n, |i, _| {
                let xi = x[i];
                let amp = cg.lower[i] + (cg.upper[i] - cg.lower[i]) * (1.0 + xi * xi / (1.0 + xi * xi)) / 3.0;
                let b = 1.05 * xi.signum() * cg.decay[i].eval(xi.abs());
                let drive: f64 = (0..n).map(|j| cg.weights[i][j] * act[j]).sum();
                -amp * (b - drive + u[i])
            })
        }))
    }
}

/// `gamma_ij = upper_i |t_ij| / (lower_i - eps) activation_j`,
/// `gamma_iu = upper_i / (lower_i - eps) id`, and
/// `mu_i(s, w) = decay_i^-1 o (id + rho)(sum s) + decay_i^-1 o (id + rho^-1)(w)`.
pub fn cg_gains(cg: &CohenGrossberg) -> Result<GainNetwork<f64>, SimError> {
    cg.check()?;
    let n = cg.n();
    let rho_inv = cg.rho.inverse_expr().expect("checked");
    let scale: Vec<f64> = (0..n).map(|i| cg.upper[i] / (cg.lower[i] - cg.epsilon)).collect();
    let gamma = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let t = cg.weights[i][j].abs();
                    if t == 0.0 {
                        GainExpr::Zero
                    } else {
                        cg.activation[j].scaled(scale[i] * t)
                    }
                })
                .collect()
        })
        .collect();
    let gamma_u = scale.iter().map(|&k| GainExpr::linear(k)).collect();
    let mut mu = Vec::with_capacity(n);
    let mut coupling = Vec::with_capacity(n);
    for i in 0..n {
        let inv = cg.decay[i].inverse_expr().expect("checked");
        mu.push(Maf::OuterSum(GainExpr::compose(inv.clone(), GainExpr::plus_id(cg.rho.clone()))));
        coupling.push(ExternalCoupling::Additive(GainExpr::compose(inv, GainExpr::plus_id(rho_inv.clone()))));
    }
    GainNetwork::with_coupling(gamma, gamma_u, mu, coupling).map_err(|e| SimError::BadParameters(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_linear_gains() {
        let sys = LinearInterconnection::scalar(2, -1.0, 0.2, 0.0);
        let q = vec![DMatrix::from_element(1, 1, 2.0); 2];
        let lg = linear_gains(&sys, &q, 0.5).unwrap();
        assert!((lg.p[0][(0, 0)] - 1.0).abs() < 1e-14);
        for (i, j) in [(0, 1), (1, 0)] {
            assert!((lg.g[(i, j)] - 0.4).abs() < 1e-12);
            assert!((lg.network.gain(i, j).eval(4.0) - 0.8).abs() < 1e-12);
        }
        assert!(lg.network.external_gain(0).is_zero());
        let rho = lg.g.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((rho - 0.4).abs() < 1e-9);
    }

    #[test]
    fn uncoupled_blocks_have_zero_gains() {
        let sys = LinearInterconnection::scalar(2, -1.0, 0.0, 1.0);
        let lg =
            linear_gains(&sys, &[DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 2.0)], 0.5).unwrap();
        assert!(lg.network.is_decoupled());
        assert_eq!(lg.g.amax(), 0.0);
        assert!((lg.network.external_gain(1).eval(1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_model_matches_matrices() {
        let sys = LinearInterconnection::scalar(2, -1.0, 0.2, 1.0);
        let m = sys.model().unwrap();
        let f = m.rhs(&DVector::from_vec(vec![1.0, 2.0]), &DVector::from_vec(vec![0.5, 0.0]));
        assert!((f[0] - (-1.0 + 0.4 + 0.5)).abs() < 1e-15);
        assert!((f[1] - (0.2 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn cg_zero_weights_give_zero_operator() {
        let cg = CohenGrossberg::uniform(2, 0.0, 1.0, 1.0, GainExpr::linear(1.0), GainExpr::atan(1.0));
        let net = cg_gains(&cg).unwrap();
        assert!(net.is_decoupled());
        assert_eq!(net.eval_operator(&[3.0, 4.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn cg_gains_are_bounded_with_atan_activation() {
        let cg = CohenGrossberg::uniform(2, 0.1, 1.0, 2.0, GainExpr::linear(1.4), GainExpr::atan(1.0));
        let net = cg_gains(&cg).unwrap();
        assert!(net.gain_classes().all(|c| c == GainClass::KBounded));
        // gamma_12 = 2 * 0.1 / 0.5 atan = 0.4 atan; mu = (2/1.4) sum
        let v = net.eval_row_ext(0, &[0.0, 1.0], 0.0);
        assert!((v - 0.4 * 1f64.atan() * 2.0 / 1.4).abs() < 1e-12);
        // external slot: (1/1.4)(id + id)(gamma_u(w)) with gamma_u = 4 id
        let w = net.eval_row_ext(0, &[0.0, 0.0], 1.0);
        assert!((w - 8.0 / 1.4).abs() < 1e-12);
    }

    #[test]
    fn cg_model_has_equilibrium_at_origin() {
        let cg = CohenGrossberg::uniform(3, 0.2, 1.0, 2.0, GainExpr::linear(1.4), GainExpr::saturating(1.0));
        let m = cg.model().unwrap();
        assert_eq!(m.rhs(&DVector::zeros(3), &DVector::zeros(3)), DVector::zeros(3));
    }

    #[test]
    fn cg_rejects_bad_parameters() {
        let mut cg = CohenGrossberg::uniform(2, 0.1, 1.0, 2.0, GainExpr::linear(1.4), GainExpr::atan(1.0));
        cg.epsilon = 1.5;
        assert!(matches!(cg_gains(&cg), Err(SimError::BadParameters(_))));
    }
}
