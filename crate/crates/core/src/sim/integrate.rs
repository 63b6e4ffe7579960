//! Input signals, fixed-step RK4 integration and trajectory export.

use nalgebra::DVector;

use super::models::SystemModel;
use super::SimError;
use crate::lyapunov::CompositeLyapunov;
use crate::path::fmt_sig12;

/// States with a norm above this count as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Constant(Vec<f64>),
    /// Zero before `at`, `value` from `at` on.
    Step {
        at: f64,
        value: Vec<f64>,
    },
    /// `amplitude * sin(omega t)`.
    Sinusoid {
        amplitude: Vec<f64>,
        omega: f64,
    },
    /// Piecewise constant: `values[k]` on `[times[k], times[k+1])`, zero before `times[0]`.
    Piecewise {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl Signal {
    pub fn zero(dim: usize) -> Self {
        Signal::Constant(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            Signal::Constant(v) | Signal::Step { value: v, .. } | Signal::Sinusoid { amplitude: v, .. } => v.len(),
            Signal::Piecewise { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            Signal::Constant(v) => DVector::from_column_slice(v),
            Signal::Step { at, value } => {
                if t >= *at {
                    DVector::from_column_slice(value)
                } else {
                    DVector::zeros(value.len())
                }
            }
            Signal::Sinusoid { amplitude, omega } => DVector::from_column_slice(amplitude) * (omega * t).sin(),
            Signal::Piecewise { times, values } => {
                let k = times.partition_point(|&x| x <= t);
                if k == 0 {
                    DVector::zeros(self.dim())
                } else {
                    DVector::from_column_slice(&values[k - 1])
                }
            }
        }
    }

    /// Upper bound of `|u(t)|` over all times.
    pub fn sup_norm(&self) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        match self {
            Signal::Constant(v) | Signal::Step { value: v, .. } | Signal::Sinusoid { amplitude: v, .. } => norm(v),
            Signal::Piecewise { values, .. } => values.iter().map(|v| norm(v)).fold(0.0, f64::max),
        }
    }
}

/// Samples on a uniform time grid; `v` is present when a certificate was attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub v: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Header `t,x_1..x_N,u_1..u_M,V`; values with 12 significant digits,
    /// `V` is `nan` without a certificate.
    pub fn to_csv(&self) -> String {
        let nx = self.x.first().map_or(0, |x| x.len());
        let nu = self.u.first().map_or(0, |u| u.len());
        let mut out = String::from("t");
        for i in 1..=nx {
            out.push_str(&format!(",x_{i}"));
        }
        for i in 1..=nu {
            out.push_str(&format!(",u_{i}"));
        }
        out.push_str(",V\n");
        for k in 0..self.len() {
            out.push_str(&fmt_sig12(self.t[k]));
            for v in self.x[k].iter().chain(self.u[k].iter()) {
                out.push(',');
                out.push_str(&fmt_sig12(*v));
            }
            out.push(',');
            out.push_str(&self.v.as_ref().map_or("nan".to_string(), |v| fmt_sig12(v[k])));
            out.push('\n');
        }
        out
    }
}

/// One classical RK4 step with the input sampled at `t`, `t + dt/2`, `t + dt`.
pub fn rk4_step(model: &SystemModel, x: &DVector<f64>, u: &Signal, t: f64, dt: f64) -> DVector<f64> {
    let um = u.eval(t + dt / 2.0);
    let k1 = model.rhs(x, &u.eval(t));
    let k2 = model.rhs(&(x + &k1 * (dt / 2.0)), &um);
    let k3 = model.rhs(&(x + &k2 * (dt / 2.0)), &um);
    let k4 = model.rhs(&(x + &k3 * dt), &u.eval(t + dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Fixed-step RK4 over `[0, t_end]` with `round(t_end / dt)` steps.
/// Divergence (norm above `1e12` or non-finite) returns the truncated
/// trajectory inside the error.
pub fn integrate(
    model: &SystemModel,
    cl: Option<&CompositeLyapunov<f64>>,
    x0: &[f64],
    u: &Signal,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    if !(dt > 0.0 && t_end >= dt) {
        return Err(SimError::BadParameters(format!("need dt > 0 and T >= dt (dt = {dt}, T = {t_end})")));
    }
    if x0.len() != model.state_dim() || u.dim() != model.input_dim() {
        return Err(SimError::BadParameters(format!(
            "state/input dimension {}/{} does not match the model ({}/{})",
            x0.len(),
            u.dim(),
            model.state_dim(),
            model.input_dim()
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        v: cl.map(|_| Vec::with_capacity(steps + 1)),
    };
    let mut x = DVector::from_column_slice(x0);
    for k in 0..=steps {
        let t = k as f64 * dt;
        if !x.iter().all(|v| v.is_finite()) || x.norm() > DIVERGENCE_NORM {
            return Err(SimError::Diverged { t, trajectory: Box::new(traj) });
        }
        traj.t.push(t);
        traj.u.push(u.eval(t));
        if let (Some(cl), Some(v)) = (cl, traj.v.as_mut()) {
            v.push(cl.value(x.as_slice()));
        }
        traj.x.push(x.clone());
        if k < steps {
            x = rk4_step(model, &x, u, t, dt);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64) -> SystemModel {
        SystemModel::custom(vec![1], 1, move |x, u| x * a + u)
    }

    #[test]
    fn exponential_decay() {
        let tr = integrate(&scalar(-1.0), None, &[1.0], &Signal::zero(1), 1.0, 1e-3).unwrap();
        assert_eq!(tr.len(), 1001);
        assert!((tr.x.last().unwrap()[0] - (-1f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |dt: f64| {
            let tr = integrate(&scalar(-1.0), None, &[1.0], &Signal::zero(1), 1.0, dt).unwrap();
            (tr.x.last().unwrap()[0] - (-1f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 16.0 * 0.2, "{ratio}");
    }

    #[test]
    fn origin_stays_put() {
        let tr = integrate(&scalar(-2.0), None, &[0.0], &Signal::zero(1), 2.0, 0.01).unwrap();
        assert!(tr.x.iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn unstable_block_diverges() {
        let err = integrate(&scalar(1.0), None, &[1.0], &Signal::zero(1), 100.0, 0.01).unwrap_err();
        match err {
            SimError::Diverged { t, trajectory } => {
                assert!(t > 27.0 && t < 29.0, "{t}");
                assert!(!trajectory.is_empty());
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn signals() {
        let s = Signal::Step { at: 1.0, value: vec![3.0, 4.0] };
        assert_eq!(s.eval(0.5).norm(), 0.0);
        assert_eq!(s.eval(1.0).norm(), 5.0);
        assert_eq!(s.sup_norm(), 5.0);
        let p = Signal::Piecewise { times: vec![1.0, 2.0], values: vec![vec![1.0], vec![-2.0]] };
        assert_eq!(p.eval(0.0)[0], 0.0);
        assert_eq!(p.eval(1.5)[0], 1.0);
        assert_eq!(p.eval(7.0)[0], -2.0);
        assert_eq!(p.sup_norm(), 2.0);
    }

    #[test]
    fn csv_layout() {
        let tr = integrate(&scalar(-1.0), None, &[1.0], &Signal::Constant(vec![0.5]), 0.02, 0.01).unwrap();
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x_1,u_1,V");
        assert_eq!(lines[1], "0,1,0.5,nan");
        assert_eq!(lines.len(), 4);
    }
}
