//! Reference oracles, synthetic data, Monte Carlo risk tables and fixture checks.

pub mod fixtures;
pub mod mc;
pub mod noise;
pub mod oracles;
pub mod report;

pub use fixtures::{check_non_qco_witness, check_qco_type2, Type2Report, WitnessReport};
pub use mc::{
    mc_risk, BodyEntry, EstimatorId, ExperimentPlan, RiskReport, RiskRow, SignalRule, Suite,
};
pub use noise::{Adversary, NoiseKind};
pub use oracles::{
    baseline_truncated_series, exact_width_ellipsoid, pinsker_risk, truncation_level,
};
