//! On-disk JSON form of plans.
//!
//! ```json
//! {
//!   "kind": "weight",
//!   "params": {"n_cap": 2500, "rho": 0.25, "tau": 5.0},
//!   "warnings": [],
//!   "domains": {"fake/VCTK/HifiGAN": 4.78, "real/VCTK": 2.19}
//! }
//! ```
//!
//! Domain keys are `real/<source>` or `fake/<source>/<generator>` with `%` and
//! `/` inside names escaped as `%25` and `%2F`. Keys are written in
//! lexicographic order. Writers may add a `provenance` object; readers ignore it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doss::{DossParams, Plan, SelectPlan, WeightPlan};
use crate::manifest::DomainKey;

#[derive(Debug, Error)]
pub enum PlanFileError {
    #[error("malformed plan file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid plan file: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanKind {
    Select,
    Weight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub kind: PlanKind,
    #[serde(default)]
    pub params: Option<DossParams>,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Units drawn for a scaling trial, when the plan came from one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<String>>,
    pub domains: BTreeMap<String, PlanValue>,
}

/// Integral counts for selections, real weights for weightings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanValue {
    Count(u64),
    Weight(f64),
}

impl PlanValue {
    fn as_f64(self) -> f64 {
        match self {
            PlanValue::Count(n) => n as f64,
            PlanValue::Weight(w) => w,
        }
    }
}

impl PlanFile {
    pub fn from_plan(plan: &Plan) -> Self {
        match plan {
            Plan::Select(p) => Self::from_select(p, None),
            Plan::Weight(p) => PlanFile {
                kind: PlanKind::Weight,
                params: Some(p.params),
                warnings: p.warnings.clone(),
                units: None,
                domains: p
                    .weights
                    .iter()
                    .map(|(k, &w)| (k.to_string(), PlanValue::Weight(w)))
                    .collect(),
            },
        }
    }

    pub fn from_select(plan: &SelectPlan, params: Option<DossParams>) -> Self {
        PlanFile {
            kind: PlanKind::Select,
            params,
            warnings: plan.warnings.clone(),
            units: None,
            domains: plan
                .counts
                .iter()
                .map(|(k, &n)| (k.to_string(), PlanValue::Count(n)))
                .collect(),
        }
    }

    pub fn to_plan(&self) -> Result<Plan, PlanFileError> {
        let mut entries = Vec::with_capacity(self.domains.len());
        for (key, &value) in &self.domains {
            let domain: DomainKey =
                key.parse()
                    .map_err(|e: crate::manifest::ParseDomainKeyError| {
                        PlanFileError::Invalid(e.to_string())
                    })?;
            if let PlanValue::Weight(w) = value {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(PlanFileError::Invalid(format!(
                        "{key}: {w} is not a nonnegative number"
                    )));
                }
            }
            entries.push((domain, value));
        }
        match self.kind {
            PlanKind::Select => {
                let mut counts = BTreeMap::new();
                for (domain, value) in entries {
                    let PlanValue::Count(n) = value else {
                        return Err(PlanFileError::Invalid(format!(
                            "{domain}: count {} is not an integer",
                            value.as_f64()
                        )));
                    };
                    counts.insert(domain, n);
                }
                Ok(Plan::Select(SelectPlan {
                    counts,
                    warnings: self.warnings.clone(),
                }))
            }
            PlanKind::Weight => {
                let params = self
                    .params
                    .ok_or_else(|| PlanFileError::Invalid("weight plan without params".into()))?;
                Ok(Plan::Weight(WeightPlan {
                    weights: entries.into_iter().map(|(d, v)| (d, v.as_f64())).collect(),
                    params,
                    warnings: self.warnings.clone(),
                }))
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PlanFileError> {
        Ok(serde_json::from_str(text)?)
    }
}
