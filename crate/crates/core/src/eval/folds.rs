//! Cross-validation folds that keep every data record inside a single fold.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inference::partition_trace;
use crate::trace::InteractionTrace;

/// Trace positions of one fold, both sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Units that must stay together: the keyed interactions of each record, or single
/// interactions when the trace has no keyed interactions at all.
pub fn fold_units(trace: &InteractionTrace) -> Vec<Vec<usize>> {
    let keyed: Vec<bool> = trace
        .interactions
        .iter()
        .map(|i| !trace.key_of(i).is_empty())
        .collect();
    if !keyed.iter().any(|&k| k) {
        return (0..trace.len()).map(|i| vec![i]).collect();
    }
    partition_trace(trace)
        .into_iter()
        .map(|p| p.interactions.into_iter().filter(|&i| keyed[i]).collect())
        .collect()
}

/// Shuffles record partitions with `seed` and deals them round-robin into `k` folds. Unkeyed
/// interactions of a stateful trace go into every training set and no test set.
pub fn kfold_by_key_payload(trace: &InteractionTrace, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    let mut units = fold_units(trace);
    if units.len() < k {
        return Err(Error::Argument(format!(
            "{} record partitions cannot fill {k} folds",
            units.len()
        )));
    }
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![None; trace.len()];
    for (n, unit) in units.iter().enumerate() {
        for &i in unit {
            fold_of[i] = Some(n % k);
        }
    }
    Ok((0..k)
        .map(|f| Fold {
            train: (0..trace.len())
                .filter(|&i| fold_of[i] != Some(f))
                .collect(),
            test: (0..trace.len())
                .filter(|&i| fold_of[i] == Some(f))
                .collect(),
        })
        .collect())
}
