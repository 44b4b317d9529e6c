//! Levenberg-Marquardt least squares with Marquardt diagonal scaling.
//!
//! Problems should be posed in parameters of order one; the finite
//! difference step is `1e-6·max(|x|, 1)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative reduction of the cost below which the fit is converged.
    pub ftol: f64,
    /// Relative step size below which the fit is converged.
    pub xtol: f64,
    /// Infinity norm of the scaled gradient below which the fit is converged.
    pub gtol: f64,
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 200,
            ftol: 1e-15,
            xtol: 1e-12,
            gtol: 1e-14,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// `s²(JᵀJ)⁻¹` with `s² = Σr²/(m − n)`; `None` if `JᵀJ` is singular.
    pub covariance: Option<DMatrix<f64>>,
    pub residuals: Vec<f64>,
    /// `sqrt(Σr²)` at the optimum.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LmOutcome {
    /// Standard error of parameter `i`; infinite when the covariance is
    /// unavailable.
    pub fn stderr(&self, i: usize) -> f64 {
        match &self.covariance {
            Some(c) => c[(i, i)].max(0.0).sqrt(),
            None => f64::INFINITY,
        }
    }

    pub fn reduced_chi2(&self) -> f64 {
        let dof = self
            .residuals
            .len()
            .saturating_sub(self.params.len())
            .max(1);
        self.residual_norm * self.residual_norm / dof as f64
    }
}

type ResidualFn<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a;
type JacobianFn<'a> = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + 'a;

/// A least-squares problem: residual vector and optional analytic Jacobian.
pub struct Problem<'a> {
    residuals: Box<ResidualFn<'a>>,
    jacobian: Option<Box<JacobianFn<'a>>>,
}

impl<'a> Problem<'a> {
    pub fn new(residuals: impl Fn(&[f64]) -> Result<Vec<f64>> + 'a) -> Self {
        Problem {
            residuals: Box::new(residuals),
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> Result<DMatrix<f64>> + 'a) -> Self {
        self.jacobian = Some(Box::new(jac));
        self
    }

    pub fn residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = (self.residuals)(x)?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit("non-finite residual".into()));
        }
        Ok(r)
    }

    pub fn jacobian(&self, x: &[f64], r0: &[f64], step: f64) -> Result<DMatrix<f64>> {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        let m = r0.len();
        let mut jac = DMatrix::zeros(m, x.len());
        let mut xp = x.to_vec();
        for k in 0..x.len() {
            let h = step * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let up = self.residuals(&xp)?;
            xp[k] = x[k] - h;
            let down = self.residuals(&xp)?;
            xp[k] = x[k];
            for i in 0..m {
                jac[(i, k)] = (up[i] - down[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Minimize `½Σr²` starting from `x0`.
pub fn levenberg_marquardt(problem: &Problem, x0: &[f64], opts: LmOptions) -> Result<LmOutcome> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = problem.residuals(&x)?;
    if r.len() < n {
        return Err(Error::Fit(format!(
            "{} residuals cannot determine {n} parameters",
            r.len()
        )));
    }
    let mut f = cost(&r);
    let mut jac = problem.jacobian(&x, &r, opts.fd_step)?;
    let mut lambda = -1.0;
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &rv;
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();
        let scaled_grad = (0..n)
            .map(|i| grad[i].abs() / diag[i].sqrt())
            .fold(0.0, f64::max);
        if f == 0.0 || scaled_grad <= opts.gtol * (2.0 * f).sqrt() {
            converged = true;
            break;
        }
        if lambda < 0.0 {
            lambda = 1e-3;
        }

        // inner loop: raise damping until a step lowers the cost
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    continue;
                }
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = match problem.residuals(&trial) {
                Ok(rt) => rt,
                Err(_) => {
                    lambda *= nu;
                    nu *= 2.0;
                    continue;
                }
            };
            let ft = cost(&rt);
            let predicted = -(step.dot(&grad) + 0.5 * step.dot(&(&jtj * &step)));
            let rho = if predicted > 0.0 {
                (f - ft) / predicted
            } else {
                -1.0
            };
            if ft < f && rho > 0.0 {
                let small_step = step
                    .iter()
                    .zip(&x)
                    .all(|(s, xi)| s.abs() <= opts.xtol * (xi.abs() + opts.xtol));
                let small_gain = (f - ft) <= opts.ftol * f;
                x = trial;
                r = rt;
                f = ft;
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                accepted = true;
                jac = problem.jacobian(&x, &r, opts.fd_step)?;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e30 {
                break;
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // no descent direction left at machine precision
            converged = true;
            break;
        }
    }

    let m = r.len();
    let ssr = 2.0 * f;
    let s2 = if m > n { ssr / (m - n) as f64 } else { 0.0 };
    let jtj = jac.transpose() * &jac;
    let covariance = jtj.try_inverse().and_then(|inv| {
        let c = inv * s2;
        c.iter().all(|v| v.is_finite()).then_some(c)
    });
    Ok(LmOutcome {
        params: x,
        covariance,
        residuals: r,
        residual_norm: ssr.sqrt(),
        iterations,
        converged,
    })
}
