use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};

use super::{Emotion, Example, Manifest, Split};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Utterance-disjoint train/val split per class, then per-class resampling to
/// `per_class_total * train_fraction` train and the rest val examples.
///
/// Utterances of each class are shuffled and split first, so duplicates made
/// while upsampling never cross the split. Surplus examples are dropped at
/// random; deficits are filled by whole copies plus a random partial copy.
pub fn balance_and_split(
    m: &Manifest,
    per_class_total: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<Manifest> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Precondition(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let train_target = (per_class_total as f64 * train_fraction).round() as usize;
    let val_target = per_class_total - train_target.min(per_class_total);
    if train_target == 0 || val_target == 0 {
        return Err(Error::ImpossibleBalance(format!(
            "{per_class_total} per class at fraction {train_fraction} leaves an empty split"
        )));
    }

    let mut by_class: BTreeMap<Emotion, Vec<&Example>> = BTreeMap::new();
    for e in &m.examples {
        by_class.entry(e.label).or_default().push(e);
    }
    let mut out = Vec::with_capacity(by_class.len() * per_class_total);
    for (&label, examples) in &by_class {
        let utterances: BTreeSet<&str> = examples.iter().map(|e| e.utterance_id.as_str()).collect();
        let mut utterances: Vec<&str> = utterances.into_iter().collect();
        if utterances.len() < 2 {
            return Err(Error::ImpossibleBalance(format!(
                "class {label} has {} unique utterance(s); both splits need at least one",
                utterances.len()
            )));
        }
        utterances.shuffle(&mut stream(seed, Purpose::Split, label as u64));
        let n_train = ((utterances.len() as f64 * train_fraction).round() as usize)
            .clamp(1, utterances.len() - 1);
        let train_utts: BTreeSet<&str> = utterances[..n_train].iter().copied().collect();

        let (train, val): (Vec<&Example>, Vec<&Example>) = examples
            .iter()
            .partition(|e| train_utts.contains(e.utterance_id.as_str()));
        for (split, pool, target) in [(Split::Train, train, train_target), (Split::Val, val, val_target)] {
            let index = (label as u64) << 1 | (split == Split::Val) as u64;
            let mut rng = stream(seed, Purpose::Balance, index);
            let picked = resample(&pool, target, &mut rng);
            for (e, copy) in picked {
                let mut e = e.clone();
                if copy > 0 {
                    e.id = format!("{}#dup{copy}", e.id);
                }
                e.split = Some(split);
                out.push(e);
            }
        }
    }
    Ok(m.with_examples(out))
}

/// `target` picks from `pool`, each with its copy number (0 for the first).
fn resample<'a>(
    pool: &[&'a Example],
    target: usize,
    rng: &mut crate::rng::Rng,
) -> Vec<(&'a Example, usize)> {
    let n = pool.len();
    let full = target / n;
    let mut picked = Vec::with_capacity(target);
    for copy in 0..full {
        picked.extend(pool.iter().map(|&e| (e, copy)));
    }
    let mut rest = index::sample(rng, n, target - full * n).into_vec();
    rest.sort_unstable();
    picked.extend(rest.into_iter().map(|i| (pool[i], full)));
    picked
}
