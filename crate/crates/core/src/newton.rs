//! Safeguarded Newton ascent shared by the MLE and posterior-mode searches.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Stopping rules for [`maximize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Converged once the gradient norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            grad_tol: 1e-6,
            max_iter: 100,
            max_halvings: 30,
        }
    }
}

pub(crate) trait Objective {
    fn value(&self, theta: &DVector<f64>) -> f64;
    fn derivs(&self, theta: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>);
}

#[derive(Debug, Clone)]
pub(crate) struct Optimum {
    pub theta: DVector<f64>,
    pub value: f64,
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum NewtonError {
    /// Objective was not finite at the starting point.
    BadStart,
    Stalled {
        theta: DVector<f64>,
        grad_norm: f64,
        iterations: usize,
    },
}

fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let neg = -hess;
    neg.cholesky().map(|ch| ch.solve(grad))
}

/// Diagonally scaled gradient step, used where the Hessian is not negative definite.
fn gradient_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> DVector<f64> {
    let scale = hess.diagonal().iter().fold(0.0_f64, |m, h| m.max(h.abs()));
    let floor = (scale * 1e-8).max(1e-12);
    DVector::from_iterator(
        grad.len(),
        grad.iter()
            .zip(hess.diagonal().iter())
            .map(|(g, h)| g / h.abs().max(floor)),
    )
}

pub(crate) fn maximize<O: Objective>(
    obj: &O,
    start: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<Optimum, NewtonError> {
    let mut theta = start;
    let (mut f, mut g, mut h) = obj.derivs(&theta);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(NewtonError::BadStart);
    }
    for iter in 0..opts.max_iter {
        let gnorm = g.norm();
        if gnorm < opts.grad_tol {
            polish(obj, &mut theta, &mut f, &mut g, &mut h);
            return Ok(Optimum {
                theta,
                value: f,
                hessian: h,
                iterations: iter,
            });
        }
        let newton = newton_direction(&g, &h);
        let is_newton = newton.is_some();
        let dir = newton.unwrap_or_else(|| gradient_direction(&g, &h));
        let slack = 1e-12 * (1.0 + f.abs());

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand = &theta + &dir * step;
            let fc = obj.value(&cand);
            if fc.is_finite() && (fc > f || (is_newton && step == 1.0 && fc >= f - slack)) {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some(cand) => {
                let (fc, gc, hc) = obj.derivs(&cand);
                if gc.iter().any(|v| !v.is_finite()) {
                    break;
                }
                theta = cand;
                f = fc;
                g = gc;
                h = hc;
            }
            None => break,
        }
    }
    let grad_norm = g.norm();
    if grad_norm < opts.grad_tol {
        return Ok(Optimum {
            theta,
            value: f,
            hessian: h,
            iterations: opts.max_iter,
        });
    }
    Err(NewtonError::Stalled {
        theta,
        grad_norm,
        iterations: opts.max_iter,
    })
}

/// One extra Newton step past the tolerance, kept only if it helps.
fn polish<O: Objective>(
    obj: &O,
    theta: &mut DVector<f64>,
    f: &mut f64,
    g: &mut DVector<f64>,
    h: &mut DMatrix<f64>,
) {
    let Some(dir) = newton_direction(g, h) else {
        return;
    };
    let cand = &*theta + dir;
    let (fc, gc, hc) = obj.derivs(&cand);
    if fc.is_finite() && fc >= *f - 1e-12 * (1.0 + f.abs()) && gc.norm() < g.norm() {
        *theta = cand;
        *f = fc;
        *g = gc;
        *h = hc;
    }
}
