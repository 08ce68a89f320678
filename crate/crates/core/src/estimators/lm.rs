//! Bounded Levenberg-Marquardt least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A scalar model `y = m(p; x)` with an analytic gradient in `p`.
pub trait FitModel: Sync {
    fn n_params(&self) -> usize;

    /// Model value; fills `grad` with `dm/dp` when given.
    fn eval(&self, p: &[f64], x: f64, grad: Option<&mut [f64]>) -> f64;
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged once every `|dp_i| / max(|p_i|, scale_i)` falls below this.
    pub step_tolerance: f64,
    pub initial_damping: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Typical magnitude of each parameter, used near zero.
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Half the weighted sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    /// `(J^T W J)^+` at the optimum.
    pub inverse_hessian: DMatrix<f64>,
}

fn residuals_and_jacobian(
    model: &dyn FitModel,
    p: &[f64],
    xs: &[f64],
    ys: &[f64],
    sqrt_w: &[f64],
) -> (DVector<f64>, DMatrix<f64>) {
    let np = model.n_params();
    let mut r = DVector::zeros(xs.len());
    let mut j = DMatrix::zeros(xs.len(), np);
    let mut g = vec![0.0; np];
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let m = model.eval(p, x, Some(&mut g));
        r[i] = sqrt_w[i] * (m - y);
        for (c, gc) in g.iter().enumerate() {
            j[(i, c)] = sqrt_w[i] * gc;
        }
    }
    (r, j)
}

fn cost_at(model: &dyn FitModel, p: &[f64], xs: &[f64], ys: &[f64], sqrt_w: &[f64]) -> f64 {
    0.5 * xs
        .iter()
        .zip(ys)
        .zip(sqrt_w)
        .map(|((&x, &y), &w)| (w * (model.eval(p, x, None) - y)).powi(2))
        .sum::<f64>()
}

/// Pseudo-inverse of a symmetric positive semi-definite matrix.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let cutoff = max_sv * 1e-14 * a.nrows() as f64;
    svd.pseudo_inverse(cutoff)
        .unwrap_or_else(|_| DMatrix::zeros(a.nrows(), a.ncols()))
}

/// Minimize `0.5 * sum w_i (m(p; x_i) - y_i)^2` within box bounds.
pub fn levenberg_marquardt(
    model: &dyn FitModel,
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
    p0: &[f64],
    opts: &LmOptions,
) -> Result<LmResult> {
    let np = model.n_params();
    if p0.len() != np || opts.lower.len() != np || opts.upper.len() != np || opts.scale.len() != np {
        return Err(Error::invalid("parameter vector lengths disagree"));
    }
    if xs.len() != ys.len() || xs.len() != weights.len() {
        return Err(Error::invalid("data lengths disagree"));
    }
    if xs.len() < np {
        return Err(Error::InsufficientData(format!(
            "{} points for {np} parameters",
            xs.len()
        )));
    }
    let clamp = |p: &mut [f64]| {
        for (i, v) in p.iter_mut().enumerate() {
            *v = v.clamp(opts.lower[i], opts.upper[i]);
        }
    };
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut p = p0.to_vec();
    clamp(&mut p);
    let mut cost = cost_at(model, &p, xs, ys, &sqrt_w);
    let mut lambda = opts.initial_damping;
    let mut last_step = f64::INFINITY;

    for iter in 1..=opts.max_iterations {
        let (r, j) = residuals_and_jacobian(model, &p, xs, ys, &sqrt_w);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let diag_floor = jtj.diagonal().max() * 1e-15;

        // parameters pinned at a bound with the descent pointing outward
        let active: Vec<bool> = (0..np)
            .map(|i| (p[i] <= opts.lower[i] && g[i] > 0.0) || (p[i] >= opts.upper[i] && g[i] < 0.0))
            .collect();
        let free: Vec<usize> = (0..np).filter(|&i| !active[i]).collect();

        // Raise the damping until a step lowers the cost or stalls.
        loop {
            let nf = free.len();
            let mut a = DMatrix::zeros(nf, nf);
            let mut rhs = DVector::zeros(nf);
            for (r, &i) in free.iter().enumerate() {
                rhs[r] = -g[i];
                for (c, &j) in free.iter().enumerate() {
                    a[(r, c)] = jtj[(i, j)];
                }
                a[(r, r)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let reduced = match a.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => pseudo_inverse(&a) * rhs,
            };
            let mut step = DVector::zeros(np);
            for (r, &i) in free.iter().enumerate() {
                step[i] = reduced[r];
            }
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial);
            last_step = trial
                .iter()
                .zip(&p)
                .enumerate()
                .map(|(i, (t, q))| (t - q).abs() / q.abs().max(opts.scale[i]))
                .fold(0.0, f64::max);
            let trial_cost = cost_at(model, &trial, xs, ys, &sqrt_w);
            if trial_cost <= cost {
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            if last_step < opts.step_tolerance {
                break;
            }
            lambda *= 4.0;
            if lambda > 1e20 {
                last_step = 0.0;
                break;
            }
        }
        if last_step < opts.step_tolerance || cost == 0.0 {
            let (_, j) = residuals_and_jacobian(model, &p, xs, ys, &sqrt_w);
            let inverse_hessian = pseudo_inverse(&(j.transpose() * &j));
            return Ok(LmResult {
                params: p,
                cost,
                iterations: iter,
                inverse_hessian,
            });
        }
    }
    Err(Error::Fit {
        iterations: opts.max_iterations,
        cost,
        last_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exponential;

    impl FitModel for Exponential {
        fn n_params(&self) -> usize {
            2
        }
        fn eval(&self, p: &[f64], x: f64, grad: Option<&mut [f64]>) -> f64 {
            let e = (-p[1] * x).exp();
            if let Some(g) = grad {
                g[0] = e;
                g[1] = -p[0] * x * e;
            }
            p[0] * e
        }
    }

    fn opts() -> LmOptions {
        LmOptions {
            max_iterations: 200,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
            lower: vec![0.0, 0.0],
            upper: vec![f64::INFINITY, 10.0],
            scale: vec![1.0, 1.0],
        }
    }

    #[test]
    fn recovers_exact_parameters() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-0.7 * x).exp()).collect();
        let w = vec![1.0; xs.len()];
        let r = levenberg_marquardt(&Exponential, &xs, &ys, &w, &[1.0, 2.0], &opts()).unwrap();
        assert!((r.params[0] - 3.0).abs() < 1e-8);
        assert!((r.params[1] - 0.7).abs() < 1e-8);
        assert!(r.cost < 1e-20);
    }

    #[test]
    fn respects_bounds() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (0.2 * x).exp()).collect();
        let w = vec![1.0; xs.len()];
        let r = levenberg_marquardt(&Exponential, &xs, &ys, &w, &[1.0, 1.0], &opts()).unwrap();
        assert_eq!(r.params[1], 0.0);
    }

    #[test]
    fn linear_covariance_matches_normal_equations() {
        // for y = a exp(-b x) near the optimum J^T J is the Gauss-Newton Hessian
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.2).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (-0.5 * x).exp()).collect();
        let w = vec![4.0; xs.len()];
        let r = levenberg_marquardt(&Exponential, &xs, &ys, &w, &[2.0, 0.5], &opts()).unwrap();
        let mut jtj = DMatrix::zeros(2, 2);
        for &x in &xs {
            let e = (-0.5 * x).exp();
            let g = [e, -2.0 * x * e];
            for a in 0..2 {
                for b in 0..2 {
                    jtj[(a, b)] += 4.0 * g[a] * g[b];
                }
            }
        }
        let expected = jtj.try_inverse().unwrap();
        assert!((&r.inverse_hessian - &expected).abs().max() < 1e-9 * expected.abs().max());
    }

    #[test]
    fn iteration_cap_reports_fit_error() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-0.7 * x).exp()).collect();
        let w = vec![1.0; xs.len()];
        let mut o = opts();
        o.max_iterations = 1;
        assert!(matches!(
            levenberg_marquardt(&Exponential, &xs, &ys, &w, &[0.1, 5.0], &o),
            Err(Error::Fit { .. })
        ));
    }
}
