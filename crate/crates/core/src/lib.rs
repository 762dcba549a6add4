//! Domain-balanced composition of real/fake audio training pools.
//!
//! * [`manifest`]: JSON-lines manifests, domain indexing, source canonicalization.
//! * [`doss`]: capped, proportional selection and tempered re-weighting of domains.
//! * [`strategy`]: the planners behind a name-keyed registry.
//! * [`sampler`]: seeded materialization of selections and weighted id streams.
//! * [`metrics`]: EER, fixed-threshold accuracy, CDE and macro reports.
//! * [`scaling`]: diversity-scaling experiment plans and power-law fits.
//! * [`cli`]: the `doss` command-line tool.

pub mod cli;
pub mod doss;
pub mod manifest;
pub mod metrics;
pub mod plan_file;
pub mod registry;
pub mod sampler;
pub mod scaling;
pub mod strategy;

pub use doss::{
    domain_distribution, doss_select, doss_weight, DossParams, Plan, SelectPlan, WeightPlan,
};
pub use manifest::{
    index_domains, parse_manifest, DomainIndex, DomainKey, DomainSizes, Label, SampleRecord,
};
