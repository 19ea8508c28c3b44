use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusManifest, Split};
use crate::attr::Dialect;
use crate::error::{Error, Result};

/// Target train / val / test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios(pub [f64; 3]);

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self([train, val, test]);
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive, got {:?}", self.0)));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self([0.88, 0.06, 0.06])
    }
}

struct Speaker<'a> {
    samples: Vec<&'a str>,
    dialect: Option<Dialect>,
}

/// Assigns whole speakers to splits.
///
/// A greedy pass visits speakers largest first (seeded order among equal
/// sizes) and gives each to the split with the largest relative size deficit
/// plus relative deficit for the speaker's dialect; ties go to the earlier
/// split. A split that is still empty when only as many speakers remain as
/// there are empty splits is served first, so no split ends up empty.
///
/// Local search then moves single speakers and swaps pairs across splits
/// while that lowers `Σ_s |n_s/N − r_s| + TV(p_s, p)`, where `p_s` is the
/// dialect distribution of split `s` and `p` the global one.
pub fn speaker_disjoint_split(
    manifest: &CorpusManifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<BTreeMap<String, Split>> {
    ratios.validate()?;
    let mut by_id: BTreeMap<&str, Speaker> = BTreeMap::new();
    for s in &manifest.samples {
        let spk = by_id.entry(&s.speaker_id).or_insert_with(|| Speaker {
            samples: Vec::new(),
            dialect: s.dialect,
        });
        if spk.dialect != s.dialect {
            return Err(Error::Integrity(format!(
                "speaker '{}' has samples with different dialects",
                s.speaker_id
            )));
        }
        spk.samples.push(&s.id);
    }
    if by_id.len() < Split::ALL.len() {
        return Err(Error::Infeasible(format!(
            "{} speakers cannot fill {} speaker-disjoint splits",
            by_id.len(),
            Split::ALL.len()
        )));
    }

    let mut speakers: Vec<Speaker> = by_id.into_values().collect();
    speakers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    speakers.sort_by_key(|s| std::cmp::Reverse(s.samples.len()));

    let total = manifest.len() as f64;
    let mut dialect_totals: BTreeMap<Option<Dialect>, f64> = BTreeMap::new();
    for spk in &speakers {
        *dialect_totals.entry(spk.dialect).or_default() += spk.samples.len() as f64;
    }

    let mut sizes = [0.0f64; 3];
    let mut speaker_counts = [0usize; 3];
    let mut dialect_sizes: BTreeMap<Option<Dialect>, [f64; 3]> = BTreeMap::new();
    let mut placed = Vec::with_capacity(speakers.len());
    let n = speakers.len();
    for (visited, spk) in speakers.iter().enumerate() {
        let remaining = n - visited;
        let empty: Vec<usize> = (0..3).filter(|&i| speaker_counts[i] == 0).collect();
        let candidates: Vec<usize> = if !empty.is_empty() && remaining <= empty.len() {
            empty
        } else {
            (0..3).collect()
        };
        let d_sizes = dialect_sizes.entry(spk.dialect).or_insert([0.0; 3]);
        let d_total = dialect_totals[&spk.dialect];
        let score = |i: usize| {
            let target = ratios.0[i] * total;
            let d_target = ratios.0[i] * d_total;
            (target - sizes[i]) / target + (d_target - d_sizes[i]) / d_target
        };
        let mut best = candidates[0];
        for &i in &candidates[1..] {
            if score(i) > score(best) {
                best = i;
            }
        }
        let size = spk.samples.len() as f64;
        sizes[best] += size;
        d_sizes[best] += size;
        speaker_counts[best] += 1;
        placed.push(best);
    }

    let dialects: Vec<Option<Dialect>> = dialect_totals.keys().copied().collect();
    let mut balance = Balance {
        counts: vec![[0.0; 3]; dialects.len()],
        speakers: [0; 3],
        global: dialects.iter().map(|d| dialect_totals[d] / total).collect(),
        ratios: ratios.0,
        total,
    };
    let members: Vec<(usize, f64)> = speakers
        .iter()
        .map(|s| {
            let d = dialects.binary_search(&s.dialect).expect("dialect was counted");
            (d, s.samples.len() as f64)
        })
        .collect();
    for (&(d, size), &split) in members.iter().zip(&placed) {
        balance.add(d, split, size);
    }
    refine(&members, &mut placed, &mut balance);

    let mut assignment = BTreeMap::new();
    for (spk, &split) in speakers.iter().zip(&placed) {
        for id in &spk.samples {
            assignment.insert((*id).to_string(), Split::ALL[split]);
        }
    }
    Ok(assignment)
}

/// Per-split sample counts by dialect.
struct Balance {
    counts: Vec<[f64; 3]>,
    speakers: [usize; 3],
    global: Vec<f64>,
    ratios: [f64; 3],
    total: f64,
}

impl Balance {
    fn add(&mut self, dialect: usize, split: usize, size: f64) {
        self.counts[dialect][split] += size;
        self.speakers[split] += 1;
    }

    fn remove(&mut self, dialect: usize, split: usize, size: f64) {
        self.counts[dialect][split] -= size;
        self.speakers[split] -= 1;
    }

    fn cost(&self) -> f64 {
        if self.speakers.contains(&0) {
            return f64::INFINITY;
        }
        (0..3)
            .map(|s| {
                let n: f64 = self.counts.iter().map(|c| c[s]).sum();
                let tv: f64 = self
                    .counts
                    .iter()
                    .zip(&self.global)
                    .map(|(c, g)| (c[s] / n - g).abs())
                    .sum::<f64>()
                    / 2.0;
                (n / self.total - self.ratios[s]).abs() + tv
            })
            .sum()
    }
}

const MIN_GAIN: f64 = 1e-12;
/// Pair swaps are only tried up to this many speakers.
const SWAP_LIMIT: usize = 1000;

/// Best-improvement moves and swaps until neither lowers the cost.
fn refine(members: &[(usize, f64)], placed: &mut [usize], balance: &mut Balance) {
    let mut current = balance.cost();
    for _ in 0..10 * members.len().max(1) {
        let mut best: Option<(f64, usize, usize, Option<usize>)> = None;
        let mut consider = |cost: f64, i: usize, to: usize, j: Option<usize>| {
            if cost < current - MIN_GAIN && best.is_none_or(|b| cost < b.0 - MIN_GAIN) {
                best = Some((cost, i, to, j));
            }
        };
        for (i, &(d, size)) in members.iter().enumerate() {
            let from = placed[i];
            for to in (0..3).filter(|&t| t != from) {
                balance.remove(d, from, size);
                balance.add(d, to, size);
                consider(balance.cost(), i, to, None);
                balance.remove(d, to, size);
                balance.add(d, from, size);
            }
        }
        let swappable = if members.len() <= SWAP_LIMIT { members.len() } else { 0 };
        for i in 0..swappable {
            for j in i + 1..swappable {
                let (a, b) = (placed[i], placed[j]);
                let ((di, si), (dj, sj)) = (members[i], members[j]);
                if a == b || (di == dj && si == sj) {
                    continue;
                }
                balance.remove(di, a, si);
                balance.remove(dj, b, sj);
                balance.add(di, b, si);
                balance.add(dj, a, sj);
                consider(balance.cost(), i, b, Some(j));
                balance.remove(di, b, si);
                balance.remove(dj, a, sj);
                balance.add(di, a, si);
                balance.add(dj, b, sj);
            }
        }
        let Some((cost, i, to, swap)) = best else {
            return;
        };
        let (di, si) = members[i];
        let from = placed[i];
        balance.remove(di, from, si);
        balance.add(di, to, si);
        placed[i] = to;
        if let Some(j) = swap {
            let (dj, sj) = members[j];
            balance.remove(dj, to, sj);
            balance.add(dj, from, sj);
            placed[j] = from;
        }
        current = cost;
    }
}
