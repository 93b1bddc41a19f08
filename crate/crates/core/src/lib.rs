//! Online decision making with expert advice.
//!
//! Two families of forecasters are implemented side by side: exponential weights
//! ([`hedge`]) and follow-the-(perturbed)-leader ([`fpl`]). With Gumbel noise the perturbed
//! leader selects experts with exactly the exponential-weights probabilities, which
//! [`analytics::verify_gumbel_hedge_equivalence`] checks numerically. The perturbed leader
//! only needs a minimization oracle, which [`spath`] exploits for online shortest path.

pub mod adversary;
pub mod analytics;
pub mod error;
pub mod fpl;
pub mod game;
pub mod hedge;
pub mod perturbation;
pub mod quadrature;
pub mod records;
pub mod rng;
pub mod spath;

pub use adversary::{ftl_killer_losses, AdaptiveRule, Adversary};
pub use analytics::{check_run_against_bounds, AlgoDescriptor, BoundKind, BoundParams, RegretReport};
pub use error::{Error, Result};
pub use fpl::{DistributionMode, FollowTheLeader, Fpl, FplParams};
pub use game::{
    regret, run_game, ChoiceDistribution, ExpertId, Forecaster, LossHistory, LossSource, RoundContext,
    RoundRecord,
};
pub use hedge::{Hedge, HedgeParams};
pub use perturbation::{NoiseFamily, NoiseSign, PerturbationSpec};
pub use rng::RngStream;
pub use spath::{EdgeGraph, EdgeTimes, PathChoice};
