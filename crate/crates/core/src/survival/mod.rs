//! Survival heads: discrete-time hazards and CoxPH.

pub mod cox;
pub mod curve;
pub mod discrete;

pub use cox::{breslow_baseline, cox_curve, cox_loss, BreslowBaseline};
pub use curve::SurvivalCurve;
pub use discrete::{
    build_discrete_targets, discrete_curve, discrete_loss, DiscreteTargets, TimeGrid,
};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Discrete,
    Coxph,
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeadKind::Discrete => "discrete",
            HeadKind::Coxph => "coxph",
        })
    }
}
