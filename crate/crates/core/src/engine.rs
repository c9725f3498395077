//! The approximate Thompson sampling loop.
//!
//! Each epoch `t`:
//! 1. plan: find the policy maximizing the value truncated at `r_t` under the
//!    current perturbed parameter;
//! 2. act on the current state with that policy;
//! 3. observe the successor state and utility;
//! 4. refit the MLE and its observed-information covariance, and draw the
//!    next perturbed parameter from `Normal(theta_hat, cov / n)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::decision::{DynamicsModel, History, ParameterVector, Policy};
use crate::error::{Error, Result};
use crate::estimation::{fit_mle, FitOptions};
use crate::nelder_mead::NelderMeadOptions;
use crate::policy_eval::{optimize_policy, PolicyClass, SearchConfig, ValueEstimate};
use crate::rng::{tag, StreamKey};

/// Rollout horizon `max(1, floor(-ln t / ln gamma^2))`.
pub fn truncation_horizon(t: u64, gamma: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("discount {gamma} outside (0, 1)")));
    }
    if t == 0 {
        return Err(Error::Domain("epoch index starts at 1".into()));
    }
    let raw = -(t as f64).ln() / (gamma * gamma).ln();
    // Absorb rounding when the ratio is an exact integer (e.g. t = 4^k, gamma = 1/2).
    let r = (raw + 1e-9 * raw.max(1.0)).floor();
    Ok((r as usize).max(1))
}

/// Normal approximation `Normal(theta_hat, covariance / sample_count)` to the
/// sampling distribution of the estimator.
#[derive(Debug, Clone)]
pub struct ParameterPosterior {
    theta_hat: ParameterVector,
    covariance: DMatrix<f64>,
    sample_count: u64,
    /// Symmetric square root of the (clipped) covariance.
    factor: DMatrix<f64>,
}

impl ParameterPosterior {
    pub fn new(theta_hat: ParameterVector, covariance: DMatrix<f64>, sample_count: u64) -> Result<Self> {
        let q = theta_hat.len();
        if covariance.nrows() != q || covariance.ncols() != q {
            return Err(Error::Numeric(format!(
                "covariance is {}x{}, parameter has dimension {q}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if sample_count == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("covariance has non-finite entries".into()));
        }
        let scale = covariance.amax().max(1.0);
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-8 * scale {
            return Err(Error::Numeric(format!("covariance is not symmetric (gap {asym})")));
        }
        let sym = (&covariance + covariance.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * scale {
            return Err(Error::Numeric(format!(
                "covariance is not positive semidefinite (eigenvalue {min})"
            )));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let v = &eig.eigenvectors;
        let factor = v * DMatrix::from_diagonal(&roots) * v.transpose();
        Ok(Self {
            theta_hat,
            covariance: sym,
            sample_count,
            factor,
        })
    }

    pub fn theta_hat(&self) -> &ParameterVector {
        &self.theta_hat
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    /// Same location and covariance, new sample count.
    pub fn with_sample_count(&self, sample_count: u64) -> Self {
        Self {
            sample_count: sample_count.max(1),
            ..self.clone()
        }
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }
}

/// `theta_hat + L z / sqrt(n)` with `L L^T = covariance`, `z` standard normal.
/// The parameter space is all of R^q so the projection is the identity.
pub fn draw_perturbed_parameters(posterior: &ParameterPosterior, rng: &mut dyn RngCore) -> ParameterVector {
    let q = posterior.theta_hat.len();
    let z = DVector::from_iterator(q, (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let shift = &posterior.factor * z / (posterior.sample_count as f64).sqrt();
    let values = posterior
        .theta_hat
        .as_slice()
        .iter()
        .zip(shift.iter())
        .map(|(a, b)| a + b)
        .collect();
    ParameterVector::new(values).expect("finite draw from a finite posterior")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub gamma: f64,
    pub rollouts_per_eval: usize,
    /// Value evaluations allowed per planning step for continuous classes.
    pub policy_search_budget: usize,
    pub restarts: usize,
    pub init_scale: f64,
    pub simplex_tol: f64,
    pub simplex_max_iter: usize,
    pub master_seed: u64,
    /// Transitions required before the MLE replaces the warm start.
    pub min_fit_epochs: usize,
    /// Refit every k epochs; in between the last fit is reused.
    pub refit_every: usize,
    pub ridge: f64,
    pub max_fit_iter: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            rollouts_per_eval: 64,
            policy_search_budget: 600,
            restarts: 3,
            init_scale: 1.0,
            simplex_tol: 1e-3,
            simplex_max_iter: 200,
            master_seed: 0,
            min_fit_epochs: 5,
            refit_every: 1,
            ridge: 1e-6,
            max_fit_iter: 500,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Domain(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        let budgets = [
            ("rollouts_per_eval", self.rollouts_per_eval),
            ("policy_search_budget", self.policy_search_budget),
            ("restarts", self.restarts),
            ("refit_every", self.refit_every),
            ("max_fit_iter", self.max_fit_iter),
        ];
        for (name, v) in budgets {
            if v == 0 {
                return Err(Error::Domain(format!("{name} must be at least 1")));
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Domain("ridge must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            rollouts: self.rollouts_per_eval,
            budget: self.policy_search_budget,
            restarts: self.restarts,
            init_scale: self.init_scale,
            nelder_mead: NelderMeadOptions {
                diameter_tol: self.simplex_tol,
                max_iter: self.simplex_max_iter,
                max_evals: usize::MAX,
            },
            anchor: None,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            ridge: self.ridge,
            max_iter: self.max_fit_iter,
            ..FitOptions::default()
        }
    }
}

/// Outcome of the planning step for one epoch.
#[derive(Debug, Clone)]
pub struct Decision<A> {
    pub t: u64,
    pub horizon: usize,
    pub action: A,
    pub policy_params: Vec<f64>,
    pub value: ValueEstimate,
    pub theta_tilde: ParameterVector,
    pub evaluations: usize,
    pub budget_exhausted: bool,
}

/// What happened when the engine absorbed a new observation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    pub refit: bool,
    pub converged: Option<bool>,
    pub pseudo_inverse: bool,
    pub fit_error: Option<String>,
    pub warm_start: bool,
}

/// One row of per-epoch diagnostics.
#[derive(Debug, Clone)]
pub struct EpochDiagnostics {
    pub t: u64,
    pub horizon: usize,
    pub policy_params: Vec<f64>,
    pub value: ValueEstimate,
    pub theta_tilde: Vec<f64>,
    pub update: UpdateReport,
}

pub fn write_diagnostics_csv<W: std::io::Write>(rows: &[EpochDiagnostics], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let q = rows.first().map_or(0, |r| r.theta_tilde.len());
    let mut header = vec![
        "t".to_string(),
        "r_t".into(),
        "policy_params".into(),
        "value_mean".into(),
        "value_se".into(),
        "refit".into(),
    ];
    header.extend((0..q).map(|j| format!("theta_tilde_{j}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.t.to_string(),
            r.horizon.to_string(),
            r.policy_params
                .iter()
                .map(|p| format!("{p:?}"))
                .collect::<Vec<_>>()
                .join(";"),
            format!("{:?}", r.value.mean),
            format!("{:?}", r.value.standard_error),
            r.update.refit.to_string(),
        ];
        rec.extend(r.theta_tilde.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Online approximate Thompson sampling over a fixed policy class.
pub struct ThompsonEngine<'a, M: DynamicsModel, C: PolicyClass<M>> {
    model: &'a M,
    class: &'a C,
    config: EngineConfig,
    streams: StreamKey,
    history: History<M::State, M::Action>,
    warm_start: ParameterVector,
    theta_tilde: ParameterVector,
    theta_hat: Option<ParameterVector>,
    posterior: Option<ParameterPosterior>,
    last_choice: Option<Vec<f64>>,
}

impl<'a, M: DynamicsModel, C: PolicyClass<M>> ThompsonEngine<'a, M, C> {
    /// `warm_start` is the parameter used until `min_fit_epochs` transitions exist.
    pub fn new(model: &'a M, class: &'a C, config: EngineConfig, warm_start: ParameterVector) -> Result<Self> {
        config.validate()?;
        if warm_start.len() != model.dim() {
            return Err(Error::Domain(format!(
                "warm start has dimension {}, model has {}",
                warm_start.len(),
                model.dim()
            )));
        }
        Ok(Self {
            model,
            class,
            streams: StreamKey::root(config.master_seed),
            config,
            history: History::new(),
            theta_tilde: warm_start.clone(),
            warm_start,
            theta_hat: None,
            posterior: None,
            last_choice: None,
        })
    }

    /// Uses a caller-supplied stream instead of one rooted at `master_seed`.
    pub fn with_streams(mut self, streams: StreamKey) -> Self {
        self.streams = streams;
        self
    }

    /// Seeds the engine with previously collected data ending in `current`.
    pub fn prime(&mut self, history: History<M::State, M::Action>, current: &M::State) -> UpdateReport {
        self.history = history;
        self.update(current)
    }

    pub fn history(&self) -> &History<M::State, M::Action> {
        &self.history
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn theta_tilde(&self) -> &ParameterVector {
        &self.theta_tilde
    }

    pub fn theta_hat(&self) -> Option<&ParameterVector> {
        self.theta_hat.as_ref()
    }

    pub fn posterior(&self) -> Option<&ParameterPosterior> {
        self.posterior.as_ref()
    }

    /// Index of the next decision (1-based).
    pub fn t(&self) -> u64 {
        self.history.len() as u64 + 1
    }

    /// Plans against the current perturbed parameter and returns the action for `state`.
    pub fn decide(&self, state: &M::State) -> Result<Decision<M::Action>> {
        let t = self.t();
        let horizon = truncation_horizon(t, self.config.gamma)?;
        let key = self.streams.path(&[t, tag::PLAN]);
        let search = SearchConfig {
            anchor: self.last_choice.clone(),
            ..self.config.search()
        };
        let choice = optimize_policy(
            self.model,
            &self.theta_tilde,
            self.class,
            horizon,
            state,
            self.config.gamma,
            &search,
            key,
        )?;
        let policy = self.class.build(&choice.params, &self.theta_tilde);
        let mut act_rng = self.streams.path(&[t, tag::POLICY]).rng();
        let action = policy.act(state, &mut act_rng);
        Ok(Decision {
            t,
            horizon,
            action,
            policy_params: choice.params,
            value: choice.value,
            theta_tilde: self.theta_tilde.clone(),
            evaluations: choice.evaluations,
            budget_exhausted: choice.budget_exhausted,
        })
    }

    /// Records `(state, action, utility)`, then refits using the transition into `next`.
    pub fn observe(
        &mut self,
        state: M::State,
        action: M::Action,
        utility: f64,
        next: &M::State,
    ) -> Result<UpdateReport> {
        self.history.append(state, action, utility)?;
        Ok(self.update(next))
    }

    /// One full epoch. `environment` applies the action to the real system.
    pub fn ts_epoch(
        &mut self,
        state: &M::State,
        environment: impl FnOnce(&M::Action) -> Result<(M::State, f64)>,
    ) -> Result<(M::State, f64, EpochDiagnostics)> {
        let decision = self.decide(state)?;
        self.last_choice = Some(decision.policy_params.clone());
        let (next, utility) = environment(&decision.action)?;
        let update = self.observe(state.clone(), decision.action, utility, &next)?;
        let diag = EpochDiagnostics {
            t: decision.t,
            horizon: decision.horizon,
            policy_params: decision.policy_params,
            value: decision.value,
            theta_tilde: decision.theta_tilde.into_inner(),
            update,
        };
        Ok((next, utility, diag))
    }

    fn update(&mut self, current: &M::State) -> UpdateReport {
        let n = self.history.len();
        let mut report = UpdateReport::default();
        if n < self.config.min_fit_epochs.max(1) {
            self.theta_tilde = self.warm_start.clone();
            report.warm_start = true;
            return report;
        }
        let since = n - self.config.min_fit_epochs.max(1);
        if self.posterior.is_none() || since % self.config.refit_every == 0 {
            report.refit = true;
            let data = self.history.transitions_to(current);
            let init = self.theta_hat.clone().unwrap_or_else(|| self.warm_start.clone());
            let fit = fit_mle(self.model, &data, &init, &self.config.fit_options()).and_then(|fit| {
                let post = ParameterPosterior::new(fit.theta_hat.clone(), fit.covariance.clone(), n as u64)?;
                Ok((fit, post))
            });
            match fit {
                Ok((fit, post)) => {
                    report.converged = Some(fit.converged);
                    report.pseudo_inverse = fit.pseudo_inverse;
                    self.theta_hat = Some(fit.theta_hat);
                    self.posterior = Some(post);
                }
                Err(e) => report.fit_error = Some(e.to_string()),
            }
        } else if let Some(p) = &self.posterior {
            self.posterior = Some(p.with_sample_count(n as u64));
        }
        match &self.posterior {
            Some(post) => {
                let mut rng = self.streams.path(&[n as u64 + 1, tag::PERTURB]).rng();
                self.theta_tilde = draw_perturbed_parameters(post, &mut rng);
            }
            None => {
                self.theta_tilde = self.warm_start.clone();
                report.warm_start = true;
            }
        }
        report
    }
}
