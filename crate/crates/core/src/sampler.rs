//! Turning plans into concrete samples.
//!
//! All randomness comes from [`StreamRng`] (ChaCha with 8 rounds, seeded with
//! `seed_from_u64`). The derivation is fixed:
//!
//! * [`materialize_select`] walks plan domains in key order and, for each,
//!   Fisher-Yates shuffles the domain's id-sorted list with the shared
//!   generator, keeping the first `count` ids.
//! * [`SampleStream`] consumes, per draw, the domain drawer's variates
//!   followed by one `gen_range(0..n_d as u64)` for the position inside the
//!   chosen domain (with replacement).
//!
//! Integer draws go through `u64`, so streams do not depend on pointer width.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::doss::{DossError, SelectPlan, WeightPlan};
use crate::manifest::{DomainIndex, DomainKey, SampleRecord};
use crate::registry::{Named, Registry};

pub type StreamRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("plan domain {0} is missing from the index")]
    MissingDomain(DomainKey),
    #[error("plan asks for {requested} samples from {domain} but it holds {available}")]
    Oversubscribed {
        domain: DomainKey,
        requested: u64,
        available: u64,
    },
    #[error("indexed sample {0:?} has no manifest record")]
    MissingRecord(String),
    #[error("stream length must be >= 1")]
    EmptyStream,
    #[error("weight plan has no positive mass")]
    NoMass,
    #[error(transparent)]
    Plan(#[from] DossError),
}

/// A pruned manifest plus what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedManifest {
    pub records: Vec<SampleRecord>,
    pub plan: SelectPlan,
    pub seed: u64,
}

/// Picks exactly `counts[d]` samples per domain, uniformly without
/// replacement. Output is sorted by id.
pub fn materialize_select(
    index: &DomainIndex,
    records: &[SampleRecord],
    plan: &SelectPlan,
    seed: u64,
) -> Result<PrunedManifest, SamplerError> {
    // validate everything before touching the generator
    for (domain, &count) in &plan.counts {
        let ids = index
            .ids(domain)
            .ok_or_else(|| SamplerError::MissingDomain(domain.clone()))?;
        if count > ids.len() as u64 {
            return Err(SamplerError::Oversubscribed {
                domain: domain.clone(),
                requested: count,
                available: ids.len() as u64,
            });
        }
    }

    let mut rng = seeded_rng(seed);
    let mut chosen: HashSet<&str> = HashSet::new();
    for (domain, &count) in &plan.counts {
        let mut ids: Vec<&str> = index
            .ids(domain)
            .expect("checked above")
            .iter()
            .map(String::as_str)
            .collect();
        ids.shuffle(&mut rng);
        chosen.extend(ids.into_iter().take(count as usize));
    }

    let by_id: HashMap<&str, &SampleRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut out = Vec::with_capacity(chosen.len());
    for id in chosen {
        let record = by_id
            .get(id)
            .ok_or_else(|| SamplerError::MissingRecord(id.to_string()))?;
        out.push((*record).clone());
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(PrunedManifest {
        records: out,
        plan: plan.clone(),
        seed,
    })
}

/// Draws a domain position in proportion to fixed weights.
pub trait DomainDrawer: Send + Sync {
    fn draw(&self, rng: &mut StreamRng) -> usize;
}

/// Builds a [`DomainDrawer`] for a weight vector.
pub trait DrawerKind: Named + Send + Sync {
    /// `weights` are nonnegative, finite, with a positive sum.
    fn build(&self, weights: &[f64]) -> Box<dyn DomainDrawer>;
}

pub type DrawerRegistry = Registry<dyn DrawerKind>;

/// Binary search over cumulative weights; one `f64` variate per draw.
#[derive(Debug, Clone, Copy, Default)]
pub struct CumulativeKind;

struct CumulativeDrawer {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Named for CumulativeKind {
    fn name(&self) -> &'static str {
        "cumulative"
    }
    fn description(&self) -> &'static str {
        "cumulative-weight binary search, O(log k) per draw"
    }
}

impl DrawerKind for CumulativeKind {
    fn build(&self, weights: &[f64]) -> Box<dyn DomainDrawer> {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        Box::new(CumulativeDrawer {
            cumulative,
            last_positive,
        })
    }
}

impl DomainDrawer for CumulativeDrawer {
    fn draw(&self, rng: &mut StreamRng) -> usize {
        let total = *self.cumulative.last().expect("nonempty weights");
        let x = rng.gen::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= x);
        // x can round up to total
        i.min(self.last_positive)
    }
}

/// Walker/Vose alias table; one `u64` and one `f64` variate per draw.
#[derive(Debug, Clone, Copy, Default)]
pub struct AliasKind;

struct AliasDrawer {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl Named for AliasKind {
    fn name(&self) -> &'static str {
        "alias"
    }
    fn description(&self) -> &'static str {
        "alias table, O(1) per draw"
    }
}

impl DrawerKind for AliasKind {
    fn build(&self, weights: &[f64]) -> Box<dyn DomainDrawer> {
        let k = weights.len();
        let total: f64 = weights.iter().sum();
        let mut prob: Vec<f64> = weights.iter().map(|w| w / total * k as f64).collect();
        let mut alias: Vec<usize> = (0..k).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..k).partition(|&i| prob[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l;
            prob[l] -= 1.0 - prob[s];
            if prob[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are full columns up to rounding
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }
        Box::new(AliasDrawer { prob, alias })
    }
}

impl DomainDrawer for AliasDrawer {
    fn draw(&self, rng: &mut StreamRng) -> usize {
        let i = rng.gen_range(0..self.prob.len() as u64) as usize;
        let u = rng.gen::<f64>();
        if u < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

pub fn builtin_drawers() -> DrawerRegistry {
    let mut reg = DrawerRegistry::new("domain drawer");
    reg.register(Arc::new(CumulativeKind))
        .expect("unique builtin name");
    reg.register(Arc::new(AliasKind))
        .expect("unique builtin name");
    reg
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleStreamSpec {
    pub plan: WeightPlan,
    pub seed: u64,
    pub length: u64,
}

impl SampleStreamSpec {
    pub fn new(plan: WeightPlan, seed: u64, length: u64) -> Result<Self, SamplerError> {
        if length == 0 {
            return Err(SamplerError::EmptyStream);
        }
        plan.validate()?;
        Ok(Self { plan, seed, length })
    }
}

/// Seeded two-stage draw: domain by weight, then a uniform sample within it.
pub struct SampleStream<'a> {
    domains: Vec<(DomainKey, &'a [String])>,
    drawer: Box<dyn DomainDrawer>,
    rng: StreamRng,
    remaining: u64,
}

impl std::fmt::Debug for SampleStream<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampleStream")
            .field("domains", &self.domains.len())
            .field("remaining", &self.remaining)
            .finish()
    }
}

impl<'a> SampleStream<'a> {
    /// Returns the position of the drawn domain (see [`Self::domain`]) and the sample id.
    pub fn next_draw(&mut self) -> Option<(usize, &'a str)> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let d = self.drawer.draw(&mut self.rng);
        let ids = self.domains[d].1;
        let j = self.rng.gen_range(0..ids.len() as u64) as usize;
        Some((d, ids[j].as_str()))
    }

    pub fn domain(&self, position: usize) -> &DomainKey {
        &self.domains[position].0
    }

    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }
}

impl<'a> Iterator for SampleStream<'a> {
    type Item = &'a str;

    fn next(&mut self) -> Option<&'a str> {
        self.next_draw().map(|(_, id)| id)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

/// Stream using the cumulative drawer.
pub fn sample_stream<'a>(
    spec: &SampleStreamSpec,
    index: &'a DomainIndex,
) -> Result<SampleStream<'a>, SamplerError> {
    sample_stream_with(spec, index, &CumulativeKind)
}

pub fn sample_stream_with<'a>(
    spec: &SampleStreamSpec,
    index: &'a DomainIndex,
    kind: &dyn DrawerKind,
) -> Result<SampleStream<'a>, SamplerError> {
    if spec.length == 0 {
        return Err(SamplerError::EmptyStream);
    }
    let mut domains = Vec::with_capacity(spec.plan.weights.len());
    let mut weights = Vec::with_capacity(spec.plan.weights.len());
    for (key, &w) in &spec.plan.weights {
        let ids = index
            .ids(key)
            .filter(|ids| !ids.is_empty())
            .ok_or_else(|| SamplerError::MissingDomain(key.clone()))?;
        domains.push((key.clone(), ids));
        weights.push(w);
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(SamplerError::NoMass);
    }
    Ok(SampleStream {
        domains,
        drawer: kind.build(&weights),
        rng: seeded_rng(spec.seed),
        remaining: spec.length,
    })
}
