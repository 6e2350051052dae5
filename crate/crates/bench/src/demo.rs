//! Pinned desk-scale scenarios shipped with the binary.

use crate::config::ExperimentConfig;
use crate::{BenchError, Result};

pub const SCENARIOS: &[(&str, &str)] = &[
    ("pinned", include_str!("../configs/pinned.toml")),
    ("outlier-shift", include_str!("../configs/outlier-shift.toml")),
    ("heavy-tail", include_str!("../configs/heavy-tail.toml")),
    ("heavy-tail-mean", include_str!("../configs/heavy-tail-mean.toml")),
    ("sparse", include_str!("../configs/sparse.toml")),
    ("regression", include_str!("../configs/regression.toml")),
    ("covariance", include_str!("../configs/covariance.toml")),
    ("lowrank", include_str!("../configs/lowrank.toml")),
    ("coverage", include_str!("../configs/coverage.toml")),
    ("eigensplit", include_str!("../configs/eigensplit.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(name, _)| *name)
}

pub fn scenario(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = SCENARIOS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        BenchError::Config(format!(
            "unknown scenario {name:?}; known: {}",
            names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    ExperimentConfig::from_toml(text)
}
