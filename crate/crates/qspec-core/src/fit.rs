//! Small dense least-squares fitting.
//!
//! A plain Levenberg-Marquardt loop with a forward-difference Jacobian and
//! box constraints, sized for the handful-of-parameter dip fits done here.
//! Nothing about it is specific to spectroscopy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    pub rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-14;

/// Minimizes `sum_i (model(x_i, params) - y_i)^2` over `params`, clamped to
/// `bounds`. `converged` reports whether the step or cost tolerance was hit
/// before the iteration cap.
pub fn least_squares<F>(
    xs: &[f64],
    ys: &[f64],
    initial: &[f64],
    bounds: &[(f64, f64)],
    model: F,
) -> Result<FitOutcome>
where
    F: Fn(f64, &[f64]) -> f64,
{
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if initial.len() != bounds.len() {
        return Err(Error::LengthMismatch { left: initial.len(), right: bounds.len() });
    }
    let n_params = initial.len();
    if xs.len() < n_params {
        return Err(Error::SeriesTooShort { got: xs.len(), min: n_params });
    }
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "bound {k} is empty: [{lo}, {hi}]"
            )));
        }
    }

    let clamp = |p: &mut [f64]| {
        for (v, &(lo, hi)) in p.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    };

    let residuals = |p: &[f64]| -> DVector<f64> {
        DVector::from_iterator(xs.len(), xs.iter().zip(ys).map(|(&x, &y)| model(x, p) - y))
    };

    let mut params: Vec<f64> = initial.to_vec();
    clamp(&mut params);
    let mut r = residuals(&params);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..MAX_ITERATIONS {
        iterations = iter + 1;

        let mut jac = DMatrix::zeros(xs.len(), n_params);
        for k in 0..n_params {
            let scale = params[k].abs().max(1e-4);
            let h = 1e-7 * scale;
            let mut bumped = params.clone();
            bumped[k] += h;
            let rb = residuals(&bumped);
            for i in 0..xs.len() {
                jac[(i, k)] = (rb[i] - r[i]) / h;
            }
        }

        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;

        let mut stepped = false;
        for _ in 0..12 {
            let mut damped = jtj.clone();
            for k in 0..n_params {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = damped.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> =
                params.iter().zip(delta.iter()).map(|(p, d)| p + d).collect();
            clamp(&mut trial);
            let rt = residuals(&trial);
            let trial_cost = rt.norm_squared();
            if trial_cost < cost {
                let step_size = trial
                    .iter()
                    .zip(&params)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let improvement = cost - trial_cost;
                params = trial;
                r = rt;
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                stepped = true;
                if step_size < STEP_TOL || improvement < COST_TOL * (1.0 + cost) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }

        if converged {
            break;
        }
        if !stepped {
            // No damping level produced progress; treat the current point
            // as a (possibly constrained) minimum.
            converged = true;
            break;
        }
    }

    Ok(FitOutcome {
        rms: (cost / xs.len() as f64).sqrt(),
        params,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_a_parabola() {
        let xs: Vec<f64> = (0..20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (x - 0.3).powi(2) + 0.5).collect();
        let out = least_squares(
            &xs,
            &ys,
            &[1.0, 0.0, 0.0],
            &[(0.1, 10.0), (-1.0, 1.0), (-5.0, 5.0)],
            |x, p| p[0] * (x - p[1]).powi(2) + p[2],
        )
        .unwrap();
        assert!(out.converged);
        assert_abs_diff_eq!(out.params[0], 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(out.params[1], 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(out.params[2], 0.5, epsilon = 1e-6);
        assert!(out.rms < 1e-7);
    }

    #[test]
    fn respects_box_bounds() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
        let out = least_squares(&xs, &ys, &[1.0], &[(0.0, 2.0)], |x, p| p[0] * x).unwrap();
        assert_abs_diff_eq!(out.params[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let err = least_squares(&[1.0, 2.0], &[1.0], &[0.0], &[(-1.0, 1.0)], |x, _| x);
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
        let err = least_squares(&[1.0], &[1.0], &[0.0, 0.0], &[(-1.0, 1.0), (-1.0, 1.0)], |x, _| x);
        assert!(matches!(err, Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn noisy_sinusoid_fit_stays_close() {
        let xs: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
        // Deterministic pseudo-noise, zero-ish mean.
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 1.4 * (0.9 * x).sin() + 0.01 * ((i * 2654435761 % 97) as f64 / 97.0 - 0.5))
            .collect();
        let out = least_squares(
            &xs,
            &ys,
            &[1.0, 1.0],
            &[(0.1, 5.0), (0.5, 1.5)],
            |x, p| p[0] * (p[1] * x).sin(),
        )
        .unwrap();
        assert_abs_diff_eq!(out.params[0], 1.4, epsilon = 0.02);
        assert_abs_diff_eq!(out.params[1], 0.9, epsilon = 0.02);
    }
}
