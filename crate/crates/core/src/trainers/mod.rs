//! The training methods behind one interface, plus the cross-validation,
//! early-stopping and model-selection protocol.
//!
//! | method | sampler | objective |
//! |---|---|---|
//! | ERM | uniform | BCE |
//! | BalancedERM | balanced | BCE |
//! | StratifiedERM | uniform, per group | BCE, one model per group |
//! | Adversarial | balanced | BCE − α · adversary cross-entropy |
//! | MMDMatch | balanced | BCE + λ · Σ MMD² |
//! | MeanMatch | balanced | BCE + λ · Σ mean gaps² |
//! | FairALM | balanced | BCE + Σ μ c + (ρ/2) Σ c² |
//! | GroupDRO | balanced | Σ q_g L_g |
//! | ARL | uniform | Σ w ℓ / Σ w |
//! | JTT | uniform | ERM, then BCE with λ_up on stage-1 errors |

mod config;
mod jtt;
mod model;
mod objective;
mod penalties;
mod stratified;
mod train;

pub use config::{Method, SamplerKind, TrainConfig};
pub use jtt::{error_set, jtt_weights, JTT_THRESHOLD};
pub use model::FoldModel;
pub use objective::{adversary_for, evaluate, Evaluation, GroupBatch, Objective};
pub use penalties::{
    arl_weights, cell_constraints, groupdro_update, lagrangian_penalty, mean_match_penalty, median_bandwidth,
    mmd2, mmd_penalty, softmax, DualState, GroupWeights, Penalty, MIN_BANDWIDTH,
};
pub use train::{select, train, FoldResult, FoldSeeds, FoldTrainer, LogRecord, StepInfo, TrainedEnsemble};
