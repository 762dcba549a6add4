//! Diversity-scaling experiment construction and power-law fitting.
//!
//! Two axes are supported. On the source axis a unit is a source corpus: each
//! chosen source contributes `per_source_real * V` real samples and
//! `per_generator_fake * V` fake samples from every generator built on it. On
//! the generator axis a unit is a generator: each chosen generator contributes
//! `per_generator_fake * V` fakes spread evenly over its source domains, and
//! the run draws `per_source_real * V * n_units` reals from the real domains
//! those fakes are based on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doss::SelectPlan;
use crate::manifest::{DomainKey, DomainSizes};
use crate::sampler::seeded_rng;

#[derive(Debug, Error, PartialEq)]
pub enum ScalingError {
    #[error("power law requires positive data")]
    NonPositive,
    #[error("degenerate abscissa")]
    DegenerateAbscissa,
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid scaling config: {0}")]
    InvalidConfig(String),
    #[error("pool has {available} {axis} units, {requested} requested")]
    NotEnoughUnits {
        axis: Axis,
        requested: u32,
        available: usize,
    },
    #[error("unit {unit:?}: {domain} needs {required} samples, has {available} (short by {})", required - available)]
    InsufficientPool {
        unit: String,
        domain: DomainKey,
        required: u64,
        available: u64,
    },
    #[error("unit {0:?} has no real domain to draw from")]
    NoRealPool(String),
    #[error("group {group} mixes metrics {first:?} and {second:?}")]
    MixedMetrics {
        group: String,
        first: String,
        second: String,
    },
    #[error("no trial results")]
    NoResults,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Source,
    Generator,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Source => "source",
            Axis::Generator => "generator",
        })
    }
}

impl FromStr for Axis {
    type Err = ScalingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "source" => Ok(Axis::Source),
            "generator" => Ok(Axis::Generator),
            other => Err(ScalingError::InvalidConfig(format!(
                "unknown axis {other:?}"
            ))),
        }
    }
}

impl Axis {
    pub fn unit_grid(self) -> &'static [u32] {
        match self {
            Axis::Source => &[1, 2, 4, 8],
            Axis::Generator => &[1, 2, 4, 8, 16],
        }
    }

    pub fn usage_grid(self) -> &'static [f64] {
        match self {
            Axis::Source => &[1.0, 0.5, 0.25, 0.125],
            Axis::Generator => &[1.0, 0.5, 0.25, 0.125, 0.0625],
        }
    }

    /// Grid settings whose total volume is at least one full unit
    /// (`n_units * V >= 1`): 10 on the source axis, 15 on the generator axis.
    pub fn grid_points(self) -> Vec<(u32, f64)> {
        let mut points = Vec::new();
        for &n in self.unit_grid() {
            for &v in self.usage_grid() {
                if n as f64 * v >= 1.0 {
                    points.push((n, v));
                }
            }
        }
        points
    }

    pub fn default_per_generator_fake(self) -> u64 {
        match self {
            Axis::Source => 10_000,
            Axis::Generator => 40_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub axis: Axis,
    pub n_units: u32,
    pub usage: f64,
    pub rho: f64,
    pub per_source_real: u64,
    pub per_generator_fake: u64,
    pub trial_seed: u64,
    pub trials: u32,
    /// Restrict to grid settings, integral counts and an exact real/fake ratio.
    pub strict: bool,
}

impl ScalingConfig {
    pub fn new(axis: Axis, n_units: u32, usage: f64) -> Self {
        Self {
            axis,
            n_units,
            usage,
            rho: 0.25,
            per_source_real: 10_000,
            per_generator_fake: axis.default_per_generator_fake(),
            trial_seed: 0,
            trials: 3,
            strict: true,
        }
    }

    pub fn validate(&self) -> Result<(), ScalingError> {
        let bad = |m: String| Err(ScalingError::InvalidConfig(m));
        if self.n_units == 0 {
            return bad("n_units must be >= 1".into());
        }
        if !(self.usage > 0.0 && self.usage <= 1.0) {
            return bad(format!("usage must be in (0, 1], got {}", self.usage));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return bad(format!("rho must be > 0, got {}", self.rho));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.strict
            && !self
                .axis
                .grid_points()
                .iter()
                .any(|&(n, v)| n == self.n_units && v == self.usage)
        {
            return bad(format!(
                "({}, {}) is not a {} grid point",
                self.n_units, self.usage, self.axis
            ));
        }
        Ok(())
    }

    fn scaled(&self, count: u64) -> Result<u64, ScalingError> {
        let exact = count as f64 * self.usage;
        let rounded = exact.round();
        if self.strict && (exact - rounded).abs() > 1e-9 {
            return Err(ScalingError::InvalidConfig(format!(
                "{count} * {} is not an integer",
                self.usage
            )));
        }
        Ok(rounded as u64)
    }
}

/// One trial's unit draw and the resulting plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTrial {
    pub trial: u32,
    pub seed: u64,
    pub units: Vec<String>,
    pub plan: SelectPlan,
}

fn available_units(axis: Axis, sizes: &DomainSizes) -> Vec<String> {
    let units: BTreeSet<&str> = match axis {
        Axis::Source => sizes
            .fakes()
            .map(|(k, _)| k.source())
            .filter(|s| sizes.contains(&DomainKey::real(*s)))
            .collect(),
        Axis::Generator => sizes.fakes().filter_map(|(k, _)| k.generator()).collect(),
    };
    units.into_iter().map(str::to_string).collect()
}

fn take(
    counts: &mut BTreeMap<DomainKey, u64>,
    sizes: &DomainSizes,
    unit: &str,
    domain: DomainKey,
    required: u64,
) -> Result<(), ScalingError> {
    let already = counts.get(&domain).copied().unwrap_or(0);
    let available = sizes.get(&domain).unwrap_or(0);
    if already + required > available {
        return Err(ScalingError::InsufficientPool {
            unit: unit.to_string(),
            domain,
            required: already + required,
            available,
        });
    }
    counts.insert(domain, already + required);
    Ok(())
}

// splits `total` over `k` parts, remainder to the first parts
fn even_split(total: u64, k: usize) -> impl Iterator<Item = u64> {
    let k = k as u64;
    (0..k).map(move |i| total / k + u64::from(i < total % k))
}

/// Builds one selection plan per trial. Trial `i` draws its units with seed
/// `trial_seed + i`.
pub fn build_scaling_config(
    cfg: &ScalingConfig,
    sizes: &DomainSizes,
) -> Result<Vec<ScalingTrial>, ScalingError> {
    cfg.validate()?;
    let units = available_units(cfg.axis, sizes);
    if (cfg.n_units as usize) > units.len() {
        return Err(ScalingError::NotEnoughUnits {
            axis: cfg.axis,
            requested: cfg.n_units,
            available: units.len(),
        });
    }
    let real_per_unit = cfg.scaled(cfg.per_source_real)?;
    let fake_per_unit = cfg.scaled(cfg.per_generator_fake)?;

    let mut trials = Vec::with_capacity(cfg.trials as usize);
    for trial in 0..cfg.trials {
        let seed = cfg.trial_seed.wrapping_add(trial as u64);
        let mut rng = seeded_rng(seed);
        let mut picks = index::sample(&mut rng, units.len(), cfg.n_units as usize).into_vec();
        picks.sort_unstable();
        let chosen: Vec<String> = picks.into_iter().map(|i| units[i].clone()).collect();

        let mut counts = BTreeMap::new();
        match cfg.axis {
            Axis::Source => {
                for source in &chosen {
                    take(
                        &mut counts,
                        sizes,
                        source,
                        DomainKey::real(source.as_str()),
                        real_per_unit,
                    )?;
                    let fakes: Vec<DomainKey> = sizes
                        .fakes()
                        .filter(|(k, _)| k.source() == source)
                        .map(|(k, _)| k.clone())
                        .collect();
                    for key in fakes {
                        take(&mut counts, sizes, source, key, fake_per_unit)?;
                    }
                }
            }
            Axis::Generator => {
                let mut real_pool = BTreeSet::new();
                for generator in &chosen {
                    let fakes: Vec<DomainKey> = sizes
                        .fakes()
                        .filter(|(k, _)| k.generator() == Some(generator.as_str()))
                        .map(|(k, _)| k.clone())
                        .collect();
                    for (key, n) in fakes.iter().zip(even_split(fake_per_unit, fakes.len())) {
                        let base = key.base();
                        if sizes.contains(&base) {
                            real_pool.insert(base);
                        }
                        take(&mut counts, sizes, generator, key.clone(), n)?;
                    }
                }
                if real_pool.is_empty() {
                    return Err(ScalingError::NoRealPool(chosen.join(",")));
                }
                let real_total = real_per_unit * cfg.n_units as u64;
                for (key, n) in real_pool
                    .iter()
                    .zip(even_split(real_total, real_pool.len()))
                {
                    take(&mut counts, sizes, "real pool", key.clone(), n)?;
                }
            }
        }

        let plan = SelectPlan {
            counts,
            warnings: Vec::new(),
        };
        if cfg.strict {
            let real = plan.real_total() as f64;
            let target = cfg.rho * plan.fake_total() as f64;
            if (real - target).abs() > 1e-9 * target.max(1.0) {
                return Err(ScalingError::InvalidConfig(format!(
                    "plan has {real} real vs rho * fake = {target}"
                )));
            }
        }
        trials.push(ScalingTrial {
            trial,
            seed,
            units: chosen,
            plan,
        });
    }
    Ok(trials)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a * x.powf(self.b)
    }
}

impl fmt::Display for PowerLawFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "y = {:.6}·x^{:.6} (R²={:.6})",
            self.a, self.b, self.r_squared
        )
    }
}

/// Least-squares line through `(ln x, ln y)`: `y = a * x^b`.
///
/// R² is computed on the log values and taken as 1 when `ln y` has no variance.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, ScalingError> {
    if points
        .iter()
        .any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(ScalingError::NonPositive);
    }
    if points.len() < 2 {
        return Err(ScalingError::TooFewPoints(points.len()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 || points.iter().all(|p| p.0 == points[0].0) {
        return Err(ScalingError::DegenerateAbscissa);
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        a: intercept.exp(),
        b: slope,
        r_squared,
        n_points: points.len(),
    })
}

/// One experimental outcome, as logged by a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub axis: Axis,
    pub n_units: u32,
    pub usage: f64,
    pub trial: u32,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub axis: Axis,
    pub n_units: u32,
    pub usage: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean/min/max per `(axis, n_units, usage)`, ordered by axis, units, then
/// descending usage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn aggregate_trials(results: &[TrialResult]) -> Result<CurveTable, ScalingError> {
    if results.is_empty() {
        return Err(ScalingError::NoResults);
    }
    let mut groups: BTreeMap<(Axis, u32, u64), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        // bit patterns of positive floats sort like the floats; negate for descending usage
        groups
            .entry((r.axis, r.n_units, u64::MAX - r.usage.to_bits()))
            .or_default()
            .push(r);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((axis, n_units, _), group) in groups {
        let first = &group[0];
        if let Some(other) = group.iter().find(|r| r.metric != first.metric) {
            return Err(ScalingError::MixedMetrics {
                group: format!("{axis}/{n_units}/{}", first.usage),
                first: first.metric.clone(),
                second: other.metric.clone(),
            });
        }
        let values: Vec<f64> = group.iter().map(|r| r.value).collect();
        rows.push(CurveRow {
            axis,
            n_units,
            usage: first.usage,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    Ok(CurveTable { rows })
}
