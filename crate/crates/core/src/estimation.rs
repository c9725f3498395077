//! Maximum-likelihood fitting on the unconstrained scale and the
//! observed-information covariance used for the perturbation draw.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::decision::{DynamicsModel, LogLikelihood, ParameterVector, Transition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Penalty weight on `||theta||^2`; the objective is `loglik - ridge * ||theta||^2`.
    pub ridge: f64,
    pub max_iter: usize,
    /// Relative gradient tolerance: converged when `|grad| <= tol * (1 + |objective|)`.
    pub grad_tol: f64,
    pub keep_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            max_iter: 500,
            grad_tol: 1e-6,
            keep_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub gradient_norm: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: ParameterVector,
    /// Asymptotic covariance scale `n * (-hessian)^-1`; divide by `n` for the
    /// sampling variance.
    pub covariance: DMatrix<f64>,
    pub converged: bool,
    pub log_likelihood: f64,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Number of transitions in the fitted data.
    pub transitions: usize,
    /// The information matrix was ill-conditioned and a pseudo-inverse was used.
    pub pseudo_inverse: bool,
    pub trace: Vec<TraceRow>,
}

impl FitResult {
    /// Writes the optimizer trace as `iteration,objective,gradient_norm,step_size`.
    pub fn write_trace_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "objective", "gradient_norm", "step_size"])?;
        for r in &self.trace {
            w.write_record([
                r.iteration.to_string(),
                format!("{:?}", r.objective),
                format!("{:?}", r.gradient_norm),
                format!("{:?}", r.step_size),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Penalized<'a> {
    lik: &'a dyn LogLikelihood,
    ridge: f64,
}

impl Penalized<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let v = self.lik.evaluate(x) - self.ridge * x.iter().map(|a| a * a).sum::<f64>();
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        if let Some(g) = self.lik.gradient(x) {
            return DVector::from_iterator(
                x.len(),
                g.iter().zip(x).map(|(gi, xi)| {
                    let v = gi - 2.0 * self.ridge * xi;
                    if v.is_nan() {
                        f64::INFINITY
                    } else {
                        v
                    }
                }),
            );
        }
        let mut work = x.to_vec();
        DVector::from_iterator(
            x.len(),
            (0..x.len()).map(|j| {
                let h = 1e-6 * x[j].abs().max(1.0);
                work[j] = x[j] + h;
                let up = self.value(&work);
                work[j] = x[j] - h;
                let down = self.value(&work);
                work[j] = x[j];
                (up - down) / (2.0 * h)
            }),
        )
    }
}

/// Fits `theta` by maximizing the penalized log-likelihood of `data`.
pub fn fit_mle<M: DynamicsModel>(
    model: &M,
    data: &[Transition<'_, M::State, M::Action>],
    init: &ParameterVector,
    opts: &FitOptions,
) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::InsufficientData {
            needed: 2,
            available: 1,
        });
    }
    if init.len() != model.dim() {
        return Err(Error::Initialization(format!(
            "initial value has dimension {}, model has {}",
            init.len(),
            model.dim()
        )));
    }
    let lik = model.likelihood(data);
    maximize_likelihood(lik.as_ref(), init, opts)
}

/// Quasi-Newton (BFGS) ascent with central-difference gradients and a
/// backtracking Armijo line search. Every accepted step strictly increases
/// the objective.
pub fn maximize_likelihood(
    lik: &dyn LogLikelihood,
    init: &ParameterVector,
    opts: &FitOptions,
) -> Result<FitResult> {
    let obj = Penalized {
        lik,
        ridge: opts.ridge,
    };
    let q = init.len();
    let mut x = DVector::from_column_slice(init.as_slice());
    // Minimize phi = -objective.
    let mut fx = -obj.value(x.as_slice());
    if !fx.is_finite() {
        return Err(Error::Initialization(format!(
            "objective is not finite at the initial value ({})",
            -fx
        )));
    }
    let mut g = -obj.gradient(x.as_slice());
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Initialization("gradient is not finite at the initial value".into()));
    }
    let mut hinv = DMatrix::<f64>::identity(q, q) * (1.0 / g.norm().max(1.0));
    let mut fresh = true;
    let mut trace = Vec::new();
    let mut iterations = 0;
    // Iterate past the reported tolerance until the line search stalls so the
    // returned point is as close to stationary as floating point allows.
    let polish_tol = |f: f64| 1e-3 * opts.grad_tol * (1.0 + f.abs());

    while iterations < opts.max_iter && g.norm() > polish_tol(fx) {
        let mut d = -(&hinv * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(q, q) * (1.0 / g.norm().max(1.0));
            fresh = true;
            d = -(&hinv * &g);
            slope = g.dot(&d);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let trial = &x + &d * alpha;
            let ft = -obj.value(trial.as_slice());
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope && ft < fx {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if fresh {
                break;
            }
            hinv = DMatrix::identity(q, q) * (1.0 / g.norm().max(1.0));
            fresh = true;
            continue;
        };
        iterations += 1;
        let gn = -obj.gradient(xn.as_slice());
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                hinv = DMatrix::identity(q, q) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(q, q);
            let left = &eye - (&s * y.transpose()) * rho;
            let right = &eye - (&y * s.transpose()) * rho;
            hinv = &left * &hinv * &right + (&s * s.transpose()) * rho;
            fresh = false;
        }
        x = xn;
        fx = fnew;
        g = gn;
        if opts.keep_trace {
            trace.push(TraceRow {
                iteration: iterations,
                objective: -fx,
                gradient_norm: g.norm(),
                step_size: alpha * d.norm(),
            });
        }
    }

    let objective = -fx;
    let gradient_norm = g.norm();
    let converged = gradient_norm <= opts.grad_tol * (1.0 + objective.abs());
    let theta_hat = ParameterVector::new(x.iter().copied().collect())?;
    let info = observed_information(lik, &theta_hat, opts.ridge)?;
    Ok(FitResult {
        log_likelihood: lik.evaluate(theta_hat.as_slice()),
        theta_hat,
        covariance: info.covariance,
        converged,
        objective,
        gradient_norm,
        iterations,
        transitions: lik.transitions(),
        pseudo_inverse: info.pseudo_inverse,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct Information {
    /// `n * (-hessian)^-1` (or its pseudo-inverse).
    pub covariance: DMatrix<f64>,
    /// Symmetrized finite-difference Hessian of the penalized objective.
    pub hessian: DMatrix<f64>,
    pub pseudo_inverse: bool,
}

const CONDITION_LIMIT: f64 = 1e12;

/// Central differences of an analytic gradient, step `max(1e-5, 1e-5 |x_j|)`.
fn gradient_hessian(obj: &Penalized<'_>, x: &[f64]) -> DMatrix<f64> {
    let q = x.len();
    let mut work = x.to_vec();
    let mut hess = DMatrix::<f64>::zeros(q, q);
    for j in 0..q {
        let h = 1e-5 * x[j].abs().max(1.0);
        work[j] = x[j] + h;
        let up = obj.gradient(&work);
        work[j] = x[j] - h;
        let down = obj.gradient(&work);
        work[j] = x[j];
        hess.set_column(j, &((up - down) / (2.0 * h)));
    }
    hess
}

/// Second differences of the objective. The step is wider than for the
/// gradient path because each entry divides by `h^2`.
fn value_hessian(obj: &Penalized<'_>, x: &[f64]) -> DMatrix<f64> {
    let q = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let f0 = obj.value(x);
    let mut work = x.to_vec();
    let mut eval = |shifts: &[(usize, f64)]| {
        for &(j, s) in shifts {
            work[j] = x[j] + s;
        }
        let v = obj.value(&work);
        for &(j, _) in shifts {
            work[j] = x[j];
        }
        v
    };
    let mut hess = DMatrix::<f64>::zeros(q, q);
    for j in 0..q {
        let up = eval(&[(j, h[j])]);
        let down = eval(&[(j, -h[j])]);
        hess[(j, j)] = (up - 2.0 * f0 + down) / (h[j] * h[j]);
        for k in 0..j {
            let pp = eval(&[(j, h[j]), (k, h[k])]);
            let pm = eval(&[(j, h[j]), (k, -h[k])]);
            let mp = eval(&[(j, -h[j]), (k, h[k])]);
            let mm = eval(&[(j, -h[j]), (k, -h[k])]);
            let v = (pp - pm - mp + mm) / (4.0 * h[j] * h[k]);
            hess[(j, k)] = v;
            hess[(k, j)] = v;
        }
    }
    hess
}

/// Observed-information covariance at `theta_hat`: `n * (-H)^-1`, where `H` is
/// the central-difference Hessian of the penalized log-likelihood (differences
/// of the analytic gradient when the likelihood has one) and `n` the
/// number of transitions. Falls back to a pseudo-inverse when `-H` is not
/// positive definite or its condition number exceeds 1e12.
pub fn observed_information(
    lik: &dyn LogLikelihood,
    theta_hat: &ParameterVector,
    ridge: f64,
) -> Result<Information> {
    let obj = Penalized { lik, ridge };
    let x = theta_hat.as_slice();
    let hess = if lik.gradient(x).is_some() {
        gradient_hessian(&obj, x)
    } else {
        value_hessian(&obj, x)
    };
    if hess.iter().any(|v| !v.is_finite()) {
        return Err(Error::Estimation("Hessian has non-finite entries".into()));
    }
    let hess = (&hess + hess.transpose()) * 0.5;
    let info = -&hess;
    let n = lik.transitions().max(1) as f64;
    let eig = SymmetricEigen::new(info);
    let max_eig = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max_eig > 0.0) {
        return Err(Error::Estimation(
            "observed information has no positive eigenvalue".into(),
        ));
    }
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let pseudo_inverse = !(min_eig > 0.0 && max_eig / min_eig <= CONDITION_LIMIT);
    let cutoff = max_eig / CONDITION_LIMIT;
    let inv_vals = eig
        .eigenvalues
        .map(|l| if l > cutoff { n / l } else { 0.0 });
    let v = &eig.eigenvectors;
    let cov = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
    let covariance = (&cov + cov.transpose()) * 0.5;
    Ok(Information {
        covariance,
        hessian: hess,
        pseudo_inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct FnLik<F: Fn(&[f64]) -> f64 + Sync>(F, usize);

    impl<F: Fn(&[f64]) -> f64 + Sync> LogLikelihood for FnLik<F> {
        fn evaluate(&self, theta: &[f64]) -> f64 {
            (self.0)(theta)
        }
        fn transitions(&self) -> usize {
            self.1
        }
    }

    #[test]
    fn quadratic_information_is_unit() {
        for t in [1usize, 7, 100, 5000] {
            let lik = FnLik(move |th: &[f64]| -(t as f64) * th[0] * th[0] / 2.0, t);
            let info = observed_information(&lik, &ParameterVector::new(vec![0.0]).unwrap(), 0.0)
                .unwrap();
            assert!((info.covariance[(0, 0)] - 1.0).abs() < 1e-6, "t={t}");
            assert!(!info.pseudo_inverse);
        }
    }

    #[test]
    fn gaussian_mean_information() {
        // t observations of N(mu, sigma^2), sigma known: information t / sigma^2.
        let sigma: f64 = 1.7;
        let obs: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.37).sin() * 2.0 + 1.0).collect();
        let t = obs.len();
        let o = obs.clone();
        let lik = FnLik(
            move |th: &[f64]| {
                o.iter()
                    .map(|y| {
                        -0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
                            - (y - th[0]).powi(2) / (2.0 * sigma * sigma)
                    })
                    .sum()
            },
            t,
        );
        let mean = obs.iter().sum::<f64>() / t as f64;
        let fit = maximize_likelihood(&lik, &ParameterVector::new(vec![0.0]).unwrap(), &FitOptions {
            ridge: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(fit.converged);
        assert!((fit.theta_hat[0] - mean).abs() < 1e-8);
        assert!((fit.covariance[(0, 0)] - sigma * sigma).abs() < 1e-4);
        // purity
        let again = observed_information(&lik, &fit.theta_hat, 0.0).unwrap();
        assert_eq!(again.covariance, fit.covariance);
    }

    #[test]
    fn singular_information_uses_pseudo_inverse() {
        // Only the sum of the two coordinates is identified.
        let lik = FnLik(|th: &[f64]| -50.0 * (th[0] + th[1] - 1.0).powi(2), 50);
        let fit = maximize_likelihood(&lik, &ParameterVector::zeros(2), &FitOptions {
            ridge: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(fit.pseudo_inverse);
        assert!((fit.theta_hat[0] + fit.theta_hat[1] - 1.0).abs() < 1e-6);
        let c = &fit.covariance;
        assert!((c[(0, 1)] - c[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn flat_likelihood_is_an_estimation_error() {
        let lik = FnLik(|_: &[f64]| 3.0, 10);
        assert!(matches!(
            observed_information(&lik, &ParameterVector::zeros(2), 0.0),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn non_finite_init_is_rejected() {
        let lik = FnLik(|th: &[f64]| if th[0] < 1.0 { f64::NEG_INFINITY } else { -th[0] * th[0] }, 3);
        assert!(matches!(
            maximize_likelihood(&lik, &ParameterVector::zeros(1), &FitOptions::default()),
            Err(Error::Initialization(_))
        ));
    }

    #[test]
    fn objective_never_decreases() {
        let lik = FnLik(
            |th: &[f64]| -(th[0] - 3.0).powi(4) - 10.0 * (th[1] - th[0] * th[0]).powi(2),
            10,
        );
        let fit = maximize_likelihood(&lik, &ParameterVector::zeros(2), &FitOptions {
            ridge: 0.0,
            keep_trace: true,
            ..Default::default()
        })
        .unwrap();
        let obj: Vec<f64> = fit.trace.iter().map(|r| r.objective).collect();
        assert!(obj.windows(2).all(|w| w[1] >= w[0]));
        assert!(obj.len() > 3);
    }
}
