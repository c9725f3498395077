use ats_core::{Error, Result, StreamKey};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Settings shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub replications: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            replications: 100,
            master_seed: 20_170_601,
            threads: 0,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Domain("replications must be at least 1".into()));
        }
        Ok(())
    }

    /// Stream of replicate `rep`.
    pub fn replicate_key(&self, rep: usize) -> StreamKey {
        StreamKey::root(self.master_seed).child(rep as u64)
    }
}

/// A replicate that returned an error.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub replicate: usize,
    pub message: String,
}

/// Outputs of all replicates, in replicate order, with failures set aside.
#[derive(Debug, Clone)]
pub struct Replicates<T> {
    pub completed: Vec<(usize, T)>,
    pub failures: Vec<Failure>,
}

/// Runs `body(rep, key)` for every replicate on a pool of `settings.threads`
/// workers. Results come back in replicate order whatever the scheduling, and
/// a failing replicate does not stop the others.
pub fn run_replications<T, F>(settings: &RunSettings, body: F) -> Result<Replicates<T>>
where
    T: Send,
    F: Fn(usize, StreamKey) -> Result<T> + Sync,
{
    settings.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| {
        (0..settings.replications)
            .into_par_iter()
            .map(|rep| body(rep, settings.replicate_key(rep)))
            .collect()
    });
    let mut out = Replicates {
        completed: Vec::with_capacity(results.len()),
        failures: Vec::new(),
    };
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.completed.push((rep, v)),
            Err(e) => out.failures.push(Failure {
                replicate: rep,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}
