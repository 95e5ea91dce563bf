//! Tabular reinforcement-learning laboratory for backdoor reward poisoning.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: finite MDPs, policies, trajectories and rollouts.
//! - [`dp`]: exact dynamic programming, including evaluation of the
//!   value-dependent adversarial MDP and brute-force optimality checks.
//! - [`poison`]: trigger bijection, attack parameters, the adversarial MDP
//!   and the static-reward baseline.
//! - [`envs`]: counterexample MDPs, gridworld, chain and random generators.
//! - [`learners`]: tabular softmax policy gradient and replay Q-learning.
//! - [`harness`]: outer-loop trajectory poisoning, inner-loop static
//!   poisoning, annealing and the training loop.
//! - [`metrics`]: attack success rate, benign return ratio, poisoning rate.
//! - [`experiment`]: config parsing, seeded experiment runs, CSV output and
//!   the numerical verification suites.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dp;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod learners;
pub mod mdp;
pub mod metrics;
pub mod poison;

pub use dp::{QTable, ValueTable};
pub use envs::EnvDescriptor;
pub use error::{Error, Result};
pub use harness::{RunLog, TrainingOptions};
pub use learners::{LearnerConfig, LearnerKind, ReplayBuffer, SoftmaxPolicyParams};
pub use mdp::{Mdp, PolicyTable, Step, Trajectory, Violation};
pub use metrics::EvalReport;
pub use poison::{AttackMode, AttackSpec, PoisonedMdp, TriggerScheme};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded random stream used everywhere in the crate.
pub type Rng = ChaCha8Rng;

/// Builds an independent stream for `seed`; distinct `stream` ids never overlap.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
