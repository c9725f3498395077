//! Environment- and policy-agnostic pieces of a parametric decision process:
//! parameter vectors and their reparametrization, the online history, and the
//! model/policy contracts.

use std::io::{Read, Write};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dynamics parameter on the unconstrained scale (the whole of R^q).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "parameter component {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean distance on the unconstrained scale.
    pub fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl std::ops::Index<usize> for ParameterVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Bijection for one coordinate between its natural domain and R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// Natural domain (0, 1).
    Logit,
    /// Natural domain (-1, 1).
    Atanh,
}

impl Transform {
    pub fn to_natural(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Logit => expit(x),
            Transform::Atanh => x.tanh(),
        }
    }

    pub fn to_unconstrained(self, v: f64) -> Result<f64> {
        match self {
            Transform::Identity if v.is_finite() => Ok(v),
            Transform::Logit if v > 0.0 && v < 1.0 => Ok((v / (1.0 - v)).ln()),
            Transform::Atanh if v > -1.0 && v < 1.0 => Ok(v.atanh()),
            t => Err(Error::Domain(format!("{v} is outside the domain of {t:?}"))),
        }
    }
}

/// Numerically stable logistic function.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-coordinate bijection between the natural and unconstrained scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Reparam(Vec<Transform>);

impl Reparam {
    pub fn new(transforms: Vec<Transform>) -> Self {
        Self(transforms)
    }

    pub fn identity(dim: usize) -> Self {
        Self(vec![Transform::Identity; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.0
    }

    pub fn to_natural(&self, theta: &ParameterVector) -> Vec<f64> {
        debug_assert_eq!(theta.len(), self.0.len());
        self.0
            .iter()
            .zip(theta.as_slice())
            .map(|(t, &x)| t.to_natural(x))
            .collect()
    }

    pub fn to_unconstrained(&self, natural: &[f64]) -> Result<ParameterVector> {
        if natural.len() != self.0.len() {
            return Err(Error::Domain(format!(
                "expected {} natural-scale values, got {}",
                self.0.len(),
                natural.len()
            )));
        }
        let values = self
            .0
            .iter()
            .zip(natural)
            .map(|(t, &v)| t.to_unconstrained(v))
            .collect::<Result<Vec<_>>>()?;
        ParameterVector::new(values)
    }
}

/// One decision epoch: the state acted on, the action taken, the utility received.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<S, A> {
    pub state: S,
    pub action: A,
    pub utility: f64,
}

/// A transition `(state, action) -> next` borrowed from a history.
#[derive(Debug)]
pub struct Transition<'a, S, A> {
    pub state: &'a S,
    pub action: &'a A,
    pub next: &'a S,
}

impl<S, A> Clone for Transition<'_, S, A> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S, A> Copy for Transition<'_, S, A> {}

/// Append-only record of the single data stream.
///
/// Consecutive records form transitions: record `v` and the state of record
/// `v + 1` are one draw from the dynamics. The most recent successor state,
/// which has no action yet, is held by the caller and passed to
/// [`History::transitions_to`].
#[derive(Debug, Clone, PartialEq)]
pub struct History<S, A> {
    records: Vec<Record<S, A>>,
}

impl<S, A> Default for History<S, A> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
        }
    }
}

impl<S, A> History<S, A> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, state: S, action: A, utility: f64) -> Result<()> {
        if !(utility.abs() <= 1.0) {
            return Err(Error::UtilityBound(utility));
        }
        self.records.push(Record {
            state,
            action,
            utility,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record<S, A>] {
        &self.records
    }

    pub fn last(&self) -> Option<&Record<S, A>> {
        self.records.last()
    }

    /// Transitions between consecutive records.
    pub fn transitions(&self) -> Vec<Transition<'_, S, A>> {
        self.records
            .windows(2)
            .map(|w| Transition {
                state: &w[0].state,
                action: &w[0].action,
                next: &w[1].state,
            })
            .collect()
    }

    /// Transitions between consecutive records, plus the transition from the
    /// last record into `current`.
    pub fn transitions_to<'a>(&'a self, current: &'a S) -> Vec<Transition<'a, S, A>> {
        let mut out = self.transitions();
        if let Some(last) = self.records.last() {
            out.push(Transition {
                state: &last.state,
                action: &last.action,
                next: current,
            });
        }
        out
    }

    /// Writes `t,state,action,utility` rows; `t` starts at 1.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        encode_state: impl Fn(&S) -> String,
        encode_action: impl Fn(&A) -> String,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "state", "action", "utility"])?;
        for (i, r) in self.records.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                encode_state(&r.state),
                encode_action(&r.action),
                format!("{:?}", r.utility),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(
        reader: R,
        decode_state: impl Fn(&str) -> Result<S>,
        decode_action: impl Fn(&str) -> Result<A>,
    ) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "state", "action", "utility"] {
            return Err(Error::Parse(format!("unexpected history header {headers:?}")));
        }
        let mut history = Self::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            if row.len() != 4 {
                return Err(Error::Parse(format!("row {} has {} fields", i + 1, row.len())));
            }
            let t: usize = row[0]
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: bad t: {e}", i + 1)))?;
            if t != i + 1 {
                return Err(Error::Parse(format!("row {}: expected t = {}, found {t}", i + 1, i + 1)));
            }
            let utility: f64 = row[3]
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: bad utility: {e}", i + 1)))?;
            history.append(decode_state(&row[1])?, decode_action(&row[2])?, utility)?;
        }
        Ok(history)
    }
}

/// Log-likelihood of a fixed data set as a function of the unconstrained parameter.
pub trait LogLikelihood: Sync {
    fn evaluate(&self, theta: &[f64]) -> f64;
    /// Number of transitions the likelihood is built from.
    fn transitions(&self) -> usize;
    /// Analytic gradient, if the model provides one. Finite differences are
    /// used otherwise.
    fn gradient(&self, _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Parametric transition model `f(s' | s, a; theta)` with a matching simulator.
pub trait DynamicsModel: Sync {
    type State: Clone + Send + Sync;
    type Action: Clone + Send + Sync;

    fn reparam(&self) -> &Reparam;

    fn dim(&self) -> usize {
        self.reparam().dim()
    }

    /// Draws `(next state, utility)`. Must be a deterministic function of the
    /// inputs and the position of `rng`.
    fn sample_transition(
        &self,
        state: &Self::State,
        action: &Self::Action,
        theta: &ParameterVector,
        rng: &mut dyn RngCore,
    ) -> Result<(Self::State, f64)>;

    /// `log f(next | state, action; theta)`; `-inf` for impossible transitions.
    fn log_density(
        &self,
        next: &Self::State,
        state: &Self::State,
        action: &Self::Action,
        theta: &ParameterVector,
    ) -> f64;

    /// Likelihood over `data`. Models may override this with a precompiled
    /// form; the default sums [`DynamicsModel::log_density`].
    fn likelihood<'a>(
        &'a self,
        data: &[Transition<'a, Self::State, Self::Action>],
    ) -> Box<dyn LogLikelihood + 'a>
    where
        Self: Sized,
    {
        Box::new(SummedLikelihood {
            model: self,
            data: data.to_vec(),
        })
    }
}

struct SummedLikelihood<'a, M: DynamicsModel> {
    model: &'a M,
    data: Vec<Transition<'a, M::State, M::Action>>,
}

impl<M: DynamicsModel> LogLikelihood for SummedLikelihood<'_, M> {
    fn evaluate(&self, theta: &[f64]) -> f64 {
        let Ok(theta) = ParameterVector::new(theta.to_vec()) else {
            return f64::NEG_INFINITY;
        };
        self.data
            .iter()
            .map(|tr| self.model.log_density(tr.next, tr.state, tr.action, &theta))
            .sum()
    }

    fn transitions(&self) -> usize {
        self.data.len()
    }
}

/// `sum_v log f(S^v | S^{v-1}, A^{v-1}; theta)` over a history. The initial
/// state is a point mass and never enters.
pub fn log_likelihood<M: DynamicsModel>(
    history: &History<M::State, M::Action>,
    model: &M,
    theta: &ParameterVector,
) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: history.len(),
        });
    }
    Ok(history
        .transitions()
        .iter()
        .map(|tr| model.log_density(tr.next, tr.state, tr.action, theta))
        .sum())
}

/// Maps a state to an action. Randomness (tie-breaking) comes only from `rng`.
pub trait Policy<S, A>: Sync {
    fn act(&self, state: &S, rng: &mut dyn RngCore) -> A;
}

impl<S, A, P: Policy<S, A> + ?Sized + Send> Policy<S, A> for Box<P> {
    fn act(&self, state: &S, rng: &mut dyn RngCore) -> A {
        (**self).act(state, rng)
    }
}
