use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{Emotion, Manifest, Modality};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairType {
    /// clip and spectrogram of the same segment
    Positive,
    /// different utterances, different emotions
    HardNegative,
    /// different utterances, same emotion
    SuperHardNegative,
}

impl PairType {
    pub const ALL: [PairType; 3] = [
        PairType::Positive,
        PairType::HardNegative,
        PairType::SuperHardNegative,
    ];
}

/// Indices are positions in the sampled manifest's `examples`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastivePair {
    /// supplies the video clip
    pub clip_example: usize,
    /// supplies the spectrogram
    pub spec_example: usize,
    pub pair_type: PairType,
    /// 1 when both come from the same video
    pub y: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRatios {
    pub positive: f64,
    pub hard_negative: f64,
    pub super_hard_negative: f64,
}

impl Default for PairRatios {
    fn default() -> Self {
        PairRatios {
            positive: 1.0 / 3.0,
            hard_negative: 1.0 / 3.0,
            super_hard_negative: 1.0 / 3.0,
        }
    }
}

impl PairRatios {
    fn weights(&self) -> [f64; 3] {
        [self.positive, self.hard_negative, self.super_hard_negative]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights();
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!("invalid pair ratios {w:?}")));
        }
        Ok(())
    }

    /// Splits `count` by largest remainders so the totals are exact.
    pub fn allocate(&self, count: usize) -> [usize; 3] {
        let w = self.weights();
        let total: f64 = w.iter().sum();
        let exact = w.map(|v| v / total * count as f64);
        let mut out = exact.map(|v| v.floor() as usize);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| {
            let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let mut left = count - out.iter().sum::<usize>();
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            if w[i] > 0.0 {
                out[i] += 1;
                left -= 1;
            }
        }
        out
    }
}

/// Draws `count` (clip, spectrogram) pairs with type counts allotted exactly
/// by `ratios`, in seeded random order.
pub fn sample_contrastive_pairs(
    m: &Manifest,
    count: usize,
    ratios: &PairRatios,
    seed: u64,
) -> Result<Vec<ContrastivePair>> {
    ratios.validate()?;
    if m.modality != Modality::AudioVideo || m.examples.iter().any(|e| e.clip.is_none()) {
        return Err(Error::Sampling("contrastive pairs need an audio+video manifest".into()));
    }
    let alloc = ratios.allocate(count);
    if count > 0 && m.is_empty() {
        return Err(Error::Sampling("manifest is empty".into()));
    }

    let mut by_label: BTreeMap<Emotion, Vec<usize>> = BTreeMap::new();
    for (i, e) in m.examples.iter().enumerate() {
        by_label.entry(e.label).or_default().push(i);
    }
    let utterances_of = |ids: &[usize]| -> usize {
        ids.iter()
            .map(|&i| m.examples[i].utterance_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    };
    let all: Vec<usize> = (0..m.len()).collect();
    // hard negatives need two labels; super-hard need a label with two utterances
    let hard_anchor: Vec<usize> = if by_label.len() >= 2 { all.clone() } else { Vec::new() };
    let super_anchor: Vec<usize> = by_label
        .values()
        .filter(|ids| utterances_of(ids) >= 2)
        .flatten()
        .copied()
        .collect();
    if alloc[1] > 0 && hard_anchor.is_empty() {
        return Err(Error::Sampling(
            "hard negatives need at least two emotions in the manifest".into(),
        ));
    }
    if alloc[2] > 0 && super_anchor.is_empty() {
        return Err(Error::Sampling(
            "super-hard negatives need an emotion with at least two utterances".into(),
        ));
    }

    let mut types: Vec<PairType> = PairType::ALL
        .iter()
        .zip(alloc)
        .flat_map(|(&t, n)| std::iter::repeat_n(t, n))
        .collect();
    let mut rng = stream(seed, Purpose::Pairs, 0);
    types.shuffle(&mut rng);

    let mut pairs = Vec::with_capacity(count);
    for t in types {
        let pair = match t {
            PairType::Positive => {
                let i = *all.choose(&mut rng).expect("non-empty");
                (i, i)
            }
            PairType::HardNegative => {
                let i = *hard_anchor.choose(&mut rng).expect("non-empty");
                let a = &m.examples[i];
                let j = pick(&mut rng, &all, |j| {
                    let b = &m.examples[j];
                    b.label != a.label && b.utterance_id != a.utterance_id
                });
                (i, j)
            }
            PairType::SuperHardNegative => {
                let i = *super_anchor.choose(&mut rng).expect("non-empty");
                let a = &m.examples[i];
                let j = pick(&mut rng, &by_label[&a.label], |j| {
                    m.examples[j].utterance_id != a.utterance_id
                });
                (i, j)
            }
        };
        pairs.push(ContrastivePair {
            clip_example: pair.0,
            spec_example: pair.1,
            pair_type: t,
            y: t == PairType::Positive,
        });
    }
    Ok(pairs)
}

/// Uniform choice among `pool` entries satisfying `ok` (at least one must).
/// Tries rejection sampling first, then falls back to filtering.
fn pick(rng: &mut Rng, pool: &[usize], ok: impl Fn(usize) -> bool) -> usize {
    for _ in 0..64 {
        let j = *pool.choose(rng).expect("non-empty pool");
        if ok(j) {
            return j;
        }
    }
    let valid: Vec<usize> = pool.iter().copied().filter(|&j| ok(j)).collect();
    *valid.choose(rng).expect("a valid partner exists")
}
