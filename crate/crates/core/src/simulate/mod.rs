//! Scenario samplers, label perturbations and Monte-Carlo estimators.

mod perturb;
mod power;
mod scenario;

pub use perturb::{perturb, perturbation_targets, HubReference, Perturbation, PerturbationKind};
pub use power::{
    cp_power_accuracy, estimate_power, lambda_scan, lambda_scan_power, power_study, Arm, ArmResult, ChangePointPower,
    LambdaRow, PowerEstimate, CP_TOLERANCE, MIN_REPS,
};
pub use scenario::{
    preset, preset_defaults, sample_scenario, ChangePointSpec, CovRule, Distribution, Family, MeanRule, PresetParams,
    Sampled, ScenarioSpec, TwoSampleSpec, PRESETS,
};
