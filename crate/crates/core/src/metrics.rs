//! Detection metrics over labelled score sets.
//!
//! Scores follow the "higher means more real" convention. A sample is accepted
//! as real at threshold `t` when `score >= t`.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{Label, LineError};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("EER undefined: need at least one real and one fake score")]
    EerUndefined,
    #[error("unnormalized score for ACC: {0}")]
    UnnormalizedScore(f64),
    #[error("empty score set")]
    EmptySet,
    #[error("non-finite score at entry {0}")]
    NonFinite(usize),
    #[error("no score sets")]
    NoSets,
    #[error("duplicate score set name {0:?}")]
    DuplicateSet(String),
    #[error("set {name:?}: {source}")]
    InSet {
        name: String,
        #[source]
        source: Box<MetricsError>,
    },
    #[error("invalid score file ({} error(s)); first: {}", .0.len(), .0[0])]
    Invalid(Vec<LineError>),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub score: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub name: String,
    pub entries: Vec<ScoreEntry>,
}

impl ScoreSet {
    pub fn new(name: impl Into<String>, entries: Vec<ScoreEntry>) -> Result<Self, MetricsError> {
        if let Some(i) = entries.iter().position(|e| !e.score.is_finite()) {
            return Err(MetricsError::NonFinite(i));
        }
        Ok(Self {
            name: name.into(),
            entries,
        })
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreLine {
    #[allow(dead_code)]
    id: String,
    score: f64,
    label: Label,
}

/// Reads a `{"id", "score", "label"}` JSON-lines score file.
pub fn parse_score_file<R: BufRead>(name: &str, reader: R) -> Result<ScoreSet, MetricsError> {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetricsError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ScoreLine>(&line) {
            Ok(row) if row.score.is_finite() => entries.push(ScoreEntry {
                score: row.score,
                label: row.label,
            }),
            Ok(row) => errors.push(LineError {
                line: i + 1,
                reason: format!("non-finite score {}", row.score),
            }),
            Err(e) => errors.push(LineError {
                line: i + 1,
                reason: format!("malformed score row: {e}"),
            }),
        }
    }
    if !errors.is_empty() {
        return Err(MetricsError::Invalid(errors));
    }
    ScoreSet::new(name, entries)
}

/// One operating point of the threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetPoint {
    pub fpr: f64,
    pub fnr: f64,
}

/// Operating points from "accept everything" to "reject everything", one per
/// distinct score plus the final all-reject point.
pub fn det_points(set: &ScoreSet) -> Result<Vec<DetPoint>, MetricsError> {
    let reals = set.count(Label::Real);
    let fakes = set.count(Label::Fake);
    if reals == 0 || fakes == 0 {
        return Err(MetricsError::EerUndefined);
    }
    let mut sorted: Vec<ScoreEntry> = set.entries.clone();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));

    let (r, f) = (reals as f64, fakes as f64);
    let mut reals_below = 0usize;
    let mut fakes_below = 0usize;
    let mut points = vec![DetPoint { fpr: 1.0, fnr: 0.0 }];
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].score;
        while i < sorted.len() && sorted[i].score == score {
            match sorted[i].label {
                Label::Real => reals_below += 1,
                Label::Fake => fakes_below += 1,
            }
            i += 1;
        }
        points.push(DetPoint {
            fpr: (fakes - fakes_below) as f64 / f,
            fnr: reals_below as f64 / r,
        });
    }
    Ok(points)
}

/// Equal error rate, linearly interpolated where `FNR - FPR` changes sign.
pub fn eer(set: &ScoreSet) -> Result<f64, MetricsError> {
    let points = det_points(set)?;
    let mut prev = points[0];
    for &p in &points[1..] {
        let d = p.fnr - p.fpr;
        if d >= 0.0 {
            if d == 0.0 {
                return Ok(p.fnr);
            }
            let d_prev = prev.fnr - prev.fpr;
            let t = -d_prev / (d - d_prev);
            return Ok((prev.fnr + t * (p.fnr - prev.fnr)).clamp(0.0, 1.0));
        }
        prev = p;
    }
    unreachable!("the sweep ends at FNR=1, FPR=0")
}

/// Fixed-threshold accuracy. Scores must lie in `[0, 1]`.
pub fn acc(set: &ScoreSet, threshold: f64) -> Result<f64, MetricsError> {
    if set.entries.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    if let Some(e) = set.entries.iter().find(|e| !(0.0..=1.0).contains(&e.score)) {
        return Err(MetricsError::UnnormalizedScore(e.score));
    }
    let correct = set
        .entries
        .iter()
        .filter(|e| (e.score >= threshold) == (e.label == Label::Real))
        .count();
    Ok(correct as f64 / set.entries.len() as f64)
}

/// Harmonic mean of EER and `1 - ACC`; zero when both are zero.
pub fn cde(eer: f64, acc: f64) -> f64 {
    let miss = 1.0 - acc;
    let denom = eer + miss;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * eer * miss / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub eer: f64,
    pub acc: f64,
    pub cde: f64,
}

/// How the macro CDE is formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdeAggregation {
    /// Mean of the per-set CDE values.
    #[default]
    MeanOfSets,
    /// CDE of the macro EER and macro ACC.
    FromMacro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_set: BTreeMap<String, SetMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: SetMetrics,
    pub cde_aggregation: CdeAggregation,
    pub threshold: f64,
}

impl MetricReport {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["set", "eer", "acc", "cde"])?;
        let rows = self
            .per_set
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain(std::iter::once(("macro", &self.macro_avg)));
        for (name, m) in rows {
            w.write_record([
                name.to_string(),
                m.eer.to_string(),
                m.acc.to_string(),
                m.cde.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn set_metrics(set: &ScoreSet, threshold: f64) -> Result<SetMetrics, MetricsError> {
    let e = eer(set)?;
    let a = acc(set, threshold)?;
    Ok(SetMetrics {
        eer: e,
        acc: a,
        cde: cde(e, a),
    })
}

fn wrap(name: &str, err: MetricsError) -> MetricsError {
    MetricsError::InSet {
        name: name.to_string(),
        source: Box::new(err),
    }
}

/// Assembles a report from already-computed per-set metrics.
pub fn report_from_metrics(
    per_set: BTreeMap<String, SetMetrics>,
    threshold: f64,
    aggregation: CdeAggregation,
) -> Result<MetricReport, MetricsError> {
    if per_set.is_empty() {
        return Err(MetricsError::NoSets);
    }
    let n = per_set.len() as f64;
    let mean = |f: fn(&SetMetrics) -> f64| per_set.values().map(f).sum::<f64>() / n;
    let eer = mean(|m| m.eer);
    let acc = mean(|m| m.acc);
    let cde_macro = match aggregation {
        CdeAggregation::MeanOfSets => mean(|m| m.cde),
        CdeAggregation::FromMacro => cde(eer, acc),
    };
    Ok(MetricReport {
        macro_avg: SetMetrics {
            eer,
            acc,
            cde: cde_macro,
        },
        per_set,
        cde_aggregation: aggregation,
        threshold,
    })
}

/// Per-set metrics plus unweighted means across sets.
pub fn macro_report(
    sets: &[ScoreSet],
    threshold: f64,
    aggregation: CdeAggregation,
) -> Result<MetricReport, MetricsError> {
    if sets.is_empty() {
        return Err(MetricsError::NoSets);
    }
    let mut per_set = BTreeMap::new();
    for set in sets {
        let m = set_metrics(set, threshold).map_err(|e| wrap(&set.name, e))?;
        if per_set.insert(set.name.clone(), m).is_some() {
            return Err(MetricsError::DuplicateSet(set.name.clone()));
        }
    }
    report_from_metrics(per_set, threshold, aggregation)
}
