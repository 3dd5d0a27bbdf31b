use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{IdMap, InteractionDataset, ItemIdx};
use crate::error::{Error, Result};
use crate::rng::{domain, keyed_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionKind {
    /// `i → i + 1`, wrapping inside the population's item range.
    Cycle,
    /// Each item gets `branching` distinct random successors with weights
    /// proportional to `decay^rank`.
    Sparse { branching: usize, decay: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub num_users: usize,
    pub transition_seed: u64,
    pub transitions: TransitionKind,
    pub noise_rate: f64,
    pub reorder_rate: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Inclusive item range `(first, last)` this population walks over;
    /// the whole catalogue when absent.
    #[serde(default)]
    pub items: Option<(ItemIdx, ItemIdx)>,
    /// When set, one item drawn from this inclusive range is inserted just
    /// before the last two interactions (an accidental click right before
    /// the held-out items). It is the final item of the training prefix.
    #[serde(default)]
    pub holdout_junk: Option<(ItemIdx, ItemIdx)>,
    /// Inclusive range replacement noise is drawn from; the population's own
    /// range when absent.
    #[serde(default)]
    pub noise_items: Option<(ItemIdx, ItemIdx)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_items: usize,
    pub rng_seed: u64,
    pub populations: Vec<PopulationSpec>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_items == 0 || self.populations.is_empty() {
            return Err(Error::Config(
                "synthetic spec needs items and at least one population".into(),
            ));
        }
        for (p, pop) in self.populations.iter().enumerate() {
            let bad = |m: &str| Err(Error::Config(format!("population {p}: {m}")));
            if !(0.0..=1.0).contains(&pop.noise_rate) || !(0.0..=1.0).contains(&pop.reorder_rate) {
                return bad("rates must lie in [0, 1]");
            }
            if pop.min_len < 3 || pop.max_len < pop.min_len {
                return bad("length range must satisfy 3 <= min <= max");
            }
            let (lo, hi) = self.range(pop);
            if lo == 0 || hi > self.num_items || lo > hi {
                return bad("item range outside the catalogue");
            }
            for (jl, jh) in pop.holdout_junk.into_iter().chain(pop.noise_items) {
                if jl == 0 || jh > self.num_items || jl > jh {
                    return bad("junk range outside the catalogue");
                }
            }
            if let TransitionKind::Sparse { branching, decay } = pop.transitions {
                if branching == 0 || branching > hi - lo + 1 || !(decay > 0.0) {
                    return bad("sparse transitions need 1 <= branching <= range size and decay > 0");
                }
            }
        }
        Ok(())
    }

    fn range(&self, pop: &PopulationSpec) -> (ItemIdx, ItemIdx) {
        pop.items.unwrap_or((1, self.num_items))
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub dataset: InteractionDataset,
    /// Population index of each user.
    pub population: Vec<usize>,
    /// Emissions replaced by a uniform random item.
    pub replaced: usize,
    pub emitted: usize,
}

struct Chain {
    lo: ItemIdx,
    /// successors and cumulative weights per item in the range
    next: Vec<Vec<(ItemIdx, f64)>>,
}

impl Chain {
    fn build(lo: ItemIdx, hi: ItemIdx, kind: &TransitionKind, seed: u64, pop: usize) -> Self {
        let size = hi - lo + 1;
        let next = match kind {
            TransitionKind::Cycle => (0..size)
                .map(|j| vec![(lo + (j + 1) % size, 1.0)])
                .collect(),
            TransitionKind::Sparse { branching, decay } => {
                let mut rng = keyed_rng(seed, domain::SYNTH, pop as u64, u64::MAX);
                (0..size)
                    .map(|_| {
                        let picks = rand::seq::index::sample(&mut rng, size, *branching);
                        let total: f64 = (0..*branching).map(|r| decay.powi(r as i32)).sum();
                        let mut acc = 0.0;
                        picks
                            .iter()
                            .enumerate()
                            .map(|(r, j)| {
                                acc += decay.powi(r as i32) / total;
                                (lo + j, acc)
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        Self { lo, next }
    }

    fn step<R: Rng>(&self, from: ItemIdx, rng: &mut R) -> ItemIdx {
        let options = &self.next[from - self.lo];
        if options.len() == 1 {
            return options[0].0;
        }
        let u: f64 = rng.gen();
        options
            .iter()
            .find(|(_, c)| u < *c)
            .unwrap_or(options.last().expect("non-empty"))
            .0
    }
}

/// Samples every population's users from its Markov chain, then applies
/// replacement noise and adjacent-pair swaps. Fully determined by the spec.
pub fn generate_synthetic_labeled(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut users = IdMap::default();
    let items: IdMap = (1..=spec.num_items)
        .map(|i| format!("i{i}"))
        .collect::<Vec<_>>()
        .into();
    let mut sequences = Vec::new();
    let mut population = Vec::new();
    let (mut replaced, mut emitted) = (0, 0);

    for (p, pop) in spec.populations.iter().enumerate() {
        let (lo, hi) = spec.range(pop);
        let chain = Chain::build(lo, hi, &pop.transitions, pop.transition_seed, p);
        let (nlo, nhi) = pop.noise_items.unwrap_or((lo, hi));
        for u in 0..pop.num_users {
            let mut rng = keyed_rng(spec.rng_seed, domain::SYNTH, p as u64, u as u64);
            let len = rng.gen_range(pop.min_len..=pop.max_len);
            let mut state = rng.gen_range(lo..=hi);
            let mut seq = Vec::with_capacity(len);
            for t in 0..len {
                if t > 0 {
                    state = chain.step(state, &mut rng);
                }
                emitted += 1;
                if rng.gen::<f64>() < pop.noise_rate {
                    replaced += 1;
                    seq.push(rng.gen_range(nlo..=nhi));
                } else {
                    seq.push(state);
                }
            }
            let mut j = 0;
            while j + 1 < seq.len() {
                if rng.gen::<f64>() < pop.reorder_rate {
                    seq.swap(j, j + 1);
                    j += 2;
                } else {
                    j += 1;
                }
            }
            if let Some((jl, jh)) = pop.holdout_junk {
                let at = seq.len() - 2;
                seq.insert(at, rng.gen_range(jl..=jh));
            }
            users.intern(&format!("p{p}_u{u}"));
            sequences.push(seq);
            population.push(p);
        }
    }
    let dataset = InteractionDataset::from_sequences(users, items, sequences)?;
    Ok(SyntheticDataset {
        dataset,
        population,
        replaced,
        emitted,
    })
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<InteractionDataset> {
    Ok(generate_synthetic_labeled(spec)?.dataset)
}
