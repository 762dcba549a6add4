//! Mixing strategies selectable by name.

use std::sync::Arc;

use crate::doss::{doss_select, doss_weight, DossError, DossParams, Plan};
use crate::manifest::DomainSizes;
use crate::registry::{Named, Registry};

/// Turns domain sizes into a sampling plan.
pub trait MixingStrategy: Named + Send + Sync {
    fn plan(&self, sizes: &DomainSizes, params: &DossParams) -> Result<Plan, DossError>;
}

pub type StrategyRegistry = Registry<dyn MixingStrategy>;

/// Cap-and-prune: integer per-domain counts.
#[derive(Debug, Clone, Copy, Default)]
pub struct DossSelect;

impl Named for DossSelect {
    fn name(&self) -> &'static str {
        "select"
    }
    fn aliases(&self) -> &'static [&'static str] {
        &["doss-select"]
    }
    fn description(&self) -> &'static str {
        "prune each domain to a capped count, reals proportional to their fakes"
    }
}

impl MixingStrategy for DossSelect {
    fn plan(&self, sizes: &DomainSizes, params: &DossParams) -> Result<Plan, DossError> {
        doss_select(sizes, params).map(Plan::Select)
    }
}

/// Cap, temper and rebalance: real-valued per-domain weights.
#[derive(Debug, Clone, Copy, Default)]
pub struct DossWeight;

impl Named for DossWeight {
    fn name(&self) -> &'static str {
        "weight"
    }
    fn aliases(&self) -> &'static [&'static str] {
        &["doss-weight"]
    }
    fn description(&self) -> &'static str {
        "keep the whole pool, weight domains by tempered capped size"
    }
}

impl MixingStrategy for DossWeight {
    fn plan(&self, sizes: &DomainSizes, params: &DossParams) -> Result<Plan, DossError> {
        doss_weight(sizes, params).map(Plan::Weight)
    }
}

/// Registry preloaded with the built-in strategies.
pub fn builtin_strategies() -> StrategyRegistry {
    let mut reg = StrategyRegistry::new("mixing strategy");
    reg.register(Arc::new(DossSelect))
        .expect("unique builtin name");
    reg.register(Arc::new(DossWeight))
        .expect("unique builtin name");
    reg
}
