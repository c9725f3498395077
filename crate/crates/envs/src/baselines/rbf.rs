//! Fitted value iteration with Gaussian radial basis functions on a 2-D
//! summary of the state.

use ats_core::{DynamicsModel, Error, ParameterVector, Policy, Result, StreamKey};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Maps states to and from the plane the value function lives on.
pub trait Embedding<S>: Sync {
    fn embed(&self, state: &S) -> [f64; 2];
    /// A representative state for a point of the plane.
    fn lift(&self, point: [f64; 2]) -> S;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbfConfig {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    /// Grid points per axis; the centres are the grid.
    pub grid: [usize; 2],
    /// Kernel width in grid spacings.
    pub bandwidth: f64,
    /// Next-state draws per grid point and action.
    pub samples: usize,
    pub ridge: f64,
    pub gamma: f64,
    pub max_sweeps: usize,
    pub tol: f64,
    /// Consecutive growing sweeps that count as divergence.
    pub divergence_window: usize,
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self {
            lower: [2.0, 0.5],
            upper: [20.0, 7.0],
            grid: [12, 8],
            bandwidth: 1.5,
            samples: 32,
            ridge: 1e-8,
            gamma: 0.9,
            max_sweeps: 100,
            tol: 1e-4,
            divergence_window: 10,
        }
    }
}

impl RbfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.contains(&0) || self.samples == 0 {
            return Err(Error::Domain("grid sizes and sample count must be positive".into()));
        }
        if (0..2).any(|k| !(self.upper[k] >= self.lower[k])) {
            return Err(Error::Domain(format!("grid bounds {:?}..{:?} are reversed", self.lower, self.upper)));
        }
        if !(self.bandwidth > 0.0) || !(self.ridge >= 0.0) || !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Domain("need bandwidth > 0, ridge >= 0 and gamma in [0, 1)".into()));
        }
        Ok(())
    }

    fn spacing(&self, k: usize) -> f64 {
        if self.grid[k] > 1 {
            (self.upper[k] - self.lower[k]) / (self.grid[k] - 1) as f64
        } else {
            1.0
        }
    }

    /// Grid points, first axis varying slowest.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.grid[0] * self.grid[1]);
        for i in 0..self.grid[0] {
            for j in 0..self.grid[1] {
                out.push([
                    self.lower[0] + i as f64 * self.spacing(0),
                    self.lower[1] + j as f64 * self.spacing(1),
                ]);
            }
        }
        out
    }
}

/// `V(x) = sum_k w_k exp(-|(x - c_k) / bandwidth|^2 / 2)`, bandwidth per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfValueFunction {
    pub centers: Vec<[f64; 2]>,
    pub bandwidth: [f64; 2],
    pub weights: Vec<f64>,
    pub gamma: f64,
}

impl RbfValueFunction {
    pub fn validate(&self) -> Result<()> {
        if self.centers.len() != self.weights.len() {
            return Err(Error::Domain(format!(
                "{} centres but {} weights",
                self.centers.len(),
                self.weights.len()
            )));
        }
        if self.bandwidth.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::Domain(format!("bandwidth {:?} must be positive", self.bandwidth)));
        }
        if self.weights.iter().chain(self.centers.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("centres and weights must be finite".into()));
        }
        Ok(())
    }

    pub fn features(&self, x: [f64; 2]) -> Vec<f64> {
        kernel_row(&self.centers, self.bandwidth, x)
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.features(x).iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("value function: {e}")))?;
        v.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(v)
    }
}

fn kernel_row(centers: &[[f64; 2]], bw: [f64; 2], x: [f64; 2]) -> Vec<f64> {
    centers
        .iter()
        .map(|c| {
            let a = (x[0] - c[0]) / bw[0];
            let b = (x[1] - c[1]) / bw[1];
            (-0.5 * (a * a + b * b)).exp()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RbfFit {
    pub value: RbfValueFunction,
    pub sweeps: usize,
    /// Sup-norm change on the grid after each sweep.
    pub changes: Vec<f64>,
    pub converged: bool,
}

/// Fitted value iteration under `theta`. Next-state draws are made once, up
/// front, from `key` and reused in every sweep.
pub fn fit_rbf_value_iteration<M, E>(
    model: &M,
    theta: &ParameterVector,
    actions: &[M::Action],
    embedding: &E,
    cfg: &RbfConfig,
    key: StreamKey,
) -> Result<RbfFit>
where
    M: DynamicsModel,
    E: Embedding<M::State>,
{
    cfg.validate()?;
    if actions.is_empty() {
        return Err(Error::Domain("no actions to choose from".into()));
    }
    let centers = cfg.points();
    let g = centers.len();
    let bandwidth = [cfg.bandwidth * cfg.spacing(0), cfg.bandwidth * cfg.spacing(1)];
    let (na, ns) = (actions.len(), cfg.samples);

    // Row (i * na + a) * ns + k: features of sample k after action a at grid point i.
    let mut next_features = DMatrix::<f64>::zeros(g * na * ns, g);
    let mut mean_utility = vec![0.0; g * na];
    for (i, &point) in centers.iter().enumerate() {
        let state = embedding.lift(point);
        for (a, action) in actions.iter().enumerate() {
            for k in 0..ns {
                let mut rng = key.path(&[i as u64, a as u64, k as u64]).rng();
                let (next, u) = model.sample_transition(&state, action, theta, &mut rng)?;
                let row = (i * na + a) * ns + k;
                for (c, f) in kernel_row(&centers, bandwidth, embedding.embed(&next)).into_iter().enumerate() {
                    next_features[(row, c)] = f;
                }
                mean_utility[i * na + a] += u / ns as f64;
            }
        }
    }

    let design = DMatrix::from_fn(g, g, |i, c| kernel_row(&centers, bandwidth, centers[i])[c]);
    let svd = design.clone().svd(true, true);
    let (u_mat, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let shrink = svd.singular_values.map(|s| s / (s * s + cfg.ridge));
    let solve = |y: &DVector<f64>| -> DVector<f64> {
        let uy = u_mat.transpose() * y;
        v_t.transpose() * uy.component_mul(&shrink)
    };

    let mut weights = DVector::<f64>::zeros(g);
    let mut fitted = DVector::<f64>::zeros(g);
    let mut changes = Vec::new();
    let mut growing = 0;
    let mut converged = false;
    for _ in 0..cfg.max_sweeps {
        let next_values = &next_features * &weights;
        let targets = DVector::from_fn(g, |i, _| {
            (0..na)
                .map(|a| {
                    let start = (i * na + a) * ns;
                    let future: f64 = next_values.rows(start, ns).sum() / ns as f64;
                    mean_utility[i * na + a] + cfg.gamma * future
                })
                .fold(f64::NEG_INFINITY, f64::max)
        });
        weights = solve(&targets);
        let new_fitted = &design * &weights;
        let change = (&new_fitted - &fitted).amax();
        fitted = new_fitted;
        if !change.is_finite() {
            return Err(Error::Numeric("value iteration produced non-finite values".into()));
        }
        if changes.last().is_some_and(|&prev| change > prev) {
            growing += 1;
            if growing >= cfg.divergence_window {
                return Err(Error::Numeric(format!(
                    "value iteration diverged: sup-change grew for {growing} consecutive sweeps (now {change:.3e})"
                )));
            }
        } else {
            growing = 0;
        }
        changes.push(change);
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(RbfFit {
        value: RbfValueFunction {
            centers,
            bandwidth,
            weights: weights.iter().copied().collect(),
            gamma: cfg.gamma,
        },
        sweeps: changes.len(),
        changes,
        converged,
    })
}

/// One-step lookahead on a fitted value function: maximizes the Monte Carlo
/// mean of `U + gamma V(s')`, with the same draws for every action. Ties go
/// to the earliest action.
pub struct RbfGreedyPolicy<'a, M: DynamicsModel, E> {
    pub model: &'a M,
    pub theta: ParameterVector,
    pub value: &'a RbfValueFunction,
    pub actions: Vec<M::Action>,
    pub embedding: &'a E,
    pub samples: usize,
}

impl<M, E> RbfGreedyPolicy<'_, M, E>
where
    M: DynamicsModel,
    E: Embedding<M::State>,
{
    /// Lookahead value of every action, with draws seeded by `seed`.
    pub fn action_values(&self, state: &M::State, seed: u64) -> Result<Vec<f64>> {
        let key = StreamKey::root(seed);
        self.actions
            .iter()
            .map(|action| {
                let mut total = 0.0;
                for k in 0..self.samples {
                    let mut rng = key.child(k as u64).rng();
                    let (next, u) = self.model.sample_transition(state, action, &self.theta, &mut rng)?;
                    total += u + self.value.gamma * self.value.value(self.embedding.embed(&next));
                }
                Ok(total / self.samples.max(1) as f64)
            })
            .collect()
    }
}

/// Index of the first maximum.
pub fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl<M, E> Policy<M::State, M::Action> for RbfGreedyPolicy<'_, M, E>
where
    M: DynamicsModel,
    E: Embedding<M::State>,
{
    fn act(&self, state: &M::State, rng: &mut dyn RngCore) -> M::Action {
        let values = self
            .action_values(state, rng.next_u64())
            .expect("transition sampling failed in the greedy lookahead");
        self.actions[first_argmax(&values)].clone()
    }
}
