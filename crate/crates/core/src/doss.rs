//! Diversity-optimized domain planning.
//!
//! Both planners start from capped fake-domain sizes `min(n_f, N_c)` and give
//! each real domain a share proportional to the capped fakes built on it,
//! scaled by the real-to-fake ratio `rho`:
//!
//! * [`doss_select`] turns that into integer per-domain sample counts (pruning).
//! * [`doss_weight`] applies a diversity temperature `tau` (`x^(1/tau)`) and then
//!   rescales the real weights so total real mass is exactly `rho` times the
//!   total fake mass (re-weighting).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{DomainKey, DomainSizes, Label};

#[derive(Debug, Error, PartialEq)]
pub enum DossError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("no weightable real domain")]
    NoWeightableReal,
    #[error("no weightable fake domain")]
    NoWeightableFake,
    #[error("degenerate plan")]
    DegeneratePlan,
    #[error("plan domain {0} is not in the index")]
    UnknownDomain(DomainKey),
    #[error("invalid weight plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DossParams {
    /// Saturation cap on effective per-domain size.
    pub n_cap: u64,
    /// Target real-to-fake ratio.
    pub rho: f64,
    /// Diversity temperature (weighting only).
    pub tau: f64,
}

impl DossParams {
    pub fn new(n_cap: u64, rho: f64, tau: f64) -> Result<Self, DossError> {
        let params = Self { n_cap, rho, tau };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), DossError> {
        if self.n_cap < 1 {
            return Err(DossError::InvalidParams("n_cap must be >= 1".into()));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(DossError::InvalidParams(format!(
                "rho must be > 0, got {}",
                self.rho
            )));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(DossError::InvalidParams(format!(
                "tau must be > 0, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Per-domain sample counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectPlan {
    pub counts: BTreeMap<DomainKey, u64>,
    pub warnings: Vec<String>,
}

impl SelectPlan {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn real_total(&self) -> u64 {
        self.counts
            .iter()
            .filter(|(k, _)| k.is_real())
            .map(|(_, n)| n)
            .sum()
    }

    pub fn fake_total(&self) -> u64 {
        self.counts
            .iter()
            .filter(|(k, _)| k.is_fake())
            .map(|(_, n)| n)
            .sum()
    }
}

/// Per-domain sampling weights (unnormalized).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPlan {
    pub weights: BTreeMap<DomainKey, f64>,
    pub params: DossParams,
    pub warnings: Vec<String>,
}

/// Relative tolerance of the real/fake mass ratio check.
pub const RATIO_TOLERANCE: f64 = 1e-9;

impl WeightPlan {
    pub fn real_mass(&self) -> f64 {
        self.weights
            .iter()
            .filter(|(k, _)| k.is_real())
            .map(|(_, w)| w)
            .sum()
    }

    pub fn fake_mass(&self) -> f64 {
        self.weights
            .iter()
            .filter(|(k, _)| k.is_fake())
            .map(|(_, w)| w)
            .sum()
    }

    /// Checks nonnegative finite weights and the global ratio law.
    pub fn validate(&self) -> Result<(), DossError> {
        self.params.validate()?;
        if let Some((k, w)) = self
            .weights
            .iter()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(DossError::InvalidPlan(format!("weight {w} for {k}")));
        }
        let real = self.real_mass();
        let target = self.params.rho * self.fake_mass();
        if target <= 0.0 || (real - target).abs() > RATIO_TOLERANCE * target {
            return Err(DossError::InvalidPlan(format!(
                "real mass {real} != rho * fake mass {target}"
            )));
        }
        Ok(())
    }
}

/// Either planner's output.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Select(SelectPlan),
    Weight(WeightPlan),
}

impl Plan {
    pub fn kind(&self) -> &'static str {
        match self {
            Plan::Select(_) => "select",
            Plan::Weight(_) => "weight",
        }
    }

    /// Unnormalized mass per domain, as f64.
    pub fn masses(&self) -> Vec<(&DomainKey, f64)> {
        match self {
            Plan::Select(p) => p.counts.iter().map(|(k, &n)| (k, n as f64)).collect(),
            Plan::Weight(p) => p.weights.iter().map(|(k, &w)| (k, w)).collect(),
        }
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            Plan::Select(p) => &p.warnings,
            Plan::Weight(p) => &p.warnings,
        }
    }
}

/// `x^(1/tau)` via `exp(ln(x)/tau)`, with `0 -> 0`. `tau == 1` is the identity.
pub fn tempered(x: f64, tau: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if tau == 1.0 {
        x
    } else {
        (x.ln() / tau).exp()
    }
}

struct Capped<'a> {
    fakes: BTreeMap<&'a DomainKey, u64>,
    // sum of capped fake sizes per base real domain
    per_real: BTreeMap<&'a DomainKey, u64>,
    warnings: Vec<String>,
}

fn cap_fakes<'a>(sizes: &'a DomainSizes, n_cap: u64) -> Capped<'a> {
    let mut fakes = BTreeMap::new();
    let mut per_real: BTreeMap<&DomainKey, u64> = sizes.reals().map(|(k, _)| (k, 0)).collect();
    let mut warnings = Vec::new();
    for (key, n) in sizes.fakes() {
        let s = n.min(n_cap);
        fakes.insert(key, s);
        let base = key.base();
        match per_real.get_mut(&base) {
            Some(sum) => *sum += s,
            None => {
                let msg = format!("fake domain {key} has no real domain {base} in the pool");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    Capped {
        fakes,
        per_real,
        warnings,
    }
}

fn floor_scaled(sum: u64, rho: f64) -> u64 {
    let target = sum as f64 * rho;
    // absorbs representation error such as 0.29 * 100 = 28.999999999999996
    (target * (1.0 + 1e-12)).floor() as u64
}

/// Pruning planner: integer counts per domain.
pub fn doss_select(sizes: &DomainSizes, params: &DossParams) -> Result<SelectPlan, DossError> {
    params.validate()?;
    let Capped {
        fakes,
        per_real,
        mut warnings,
    } = cap_fakes(sizes, params.n_cap);

    let mut counts: BTreeMap<DomainKey, u64> =
        fakes.into_iter().map(|(k, s)| (k.clone(), s)).collect();
    for (real, sum) in per_real {
        if sum == 0 {
            let msg = format!("real domain {real} has no associated fake samples");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let n_r = sizes.get(real).unwrap_or(0);
        counts.insert(real.clone(), n_r.min(floor_scaled(sum, params.rho)));
    }
    Ok(SelectPlan { counts, warnings })
}

/// Re-weighting planner: tempered weights with the real mass pinned to `rho`
/// times the fake mass.
pub fn doss_weight(sizes: &DomainSizes, params: &DossParams) -> Result<WeightPlan, DossError> {
    params.validate()?;
    let Capped {
        fakes,
        per_real,
        warnings,
    } = cap_fakes(sizes, params.n_cap);

    let mut weights = BTreeMap::new();
    let mut fake_mass = 0.0;
    for (key, s) in fakes {
        let w = tempered(s as f64, params.tau);
        fake_mass += w;
        weights.insert(key.clone(), w);
    }

    let mut reals = Vec::with_capacity(per_real.len());
    let mut real_mass = 0.0;
    for (real, sum) in per_real {
        let n_r = sizes.get(real).unwrap_or(0) as f64;
        let s = n_r.min(sum as f64 * params.rho);
        let w = tempered(s, params.tau);
        real_mass += w;
        reals.push((real, w));
    }

    if fake_mass <= 0.0 {
        return Err(DossError::NoWeightableFake);
    }
    if real_mass <= 0.0 {
        return Err(DossError::NoWeightableReal);
    }
    let alpha = fake_mass * params.rho / real_mass;
    for (real, w) in reals {
        weights.insert(real.clone(), w * alpha);
    }

    Ok(WeightPlan {
        weights,
        params: *params,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRow {
    pub domain: DomainKey,
    pub kind: Label,
    pub probability: f64,
}

/// Normalized per-domain sampling probabilities, fake section first, each
/// section sorted by descending probability (ties by domain).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistributionTable {
    pub rows: Vec<DistributionRow>,
}

impl DistributionTable {
    pub fn probability(&self, key: &DomainKey) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| &r.domain == key)
            .map(|r| r.probability)
    }

    pub fn mass(&self, kind: Label) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.probability)
            .sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["domain", "kind", "probability"])?;
        for row in &self.rows {
            w.write_record([
                row.domain.to_string(),
                row.kind.to_string(),
                row.probability.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn domain_distribution(
    plan: &Plan,
    sizes: &DomainSizes,
) -> Result<DistributionTable, DossError> {
    let masses = plan.masses();
    if let Some((k, _)) = masses.iter().find(|(k, _)| !sizes.contains(k)) {
        return Err(DossError::UnknownDomain((*k).clone()));
    }
    let total: f64 = masses.iter().map(|(_, m)| m).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(DossError::DegeneratePlan);
    }
    let mut rows: Vec<DistributionRow> = masses
        .into_iter()
        .map(|(k, m)| DistributionRow {
            domain: k.clone(),
            kind: k.label(),
            probability: m / total,
        })
        .collect();
    rows.sort_by(|a, b| {
        let section = |l: Label| if l == Label::Fake { 0 } else { 1 };
        section(a.kind)
            .cmp(&section(b.kind))
            .then(b.probability.total_cmp(&a.probability))
            .then_with(|| a.domain.cmp(&b.domain))
    });
    Ok(DistributionTable { rows })
}
