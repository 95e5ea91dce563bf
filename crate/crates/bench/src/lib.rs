//! Shared fixtures for the criterion benchmarks.

use poisonlab_core::envs::make_random_mdp;
use poisonlab_core::{AttackMode, AttackSpec, EnvDescriptor, PoisonedMdp};

/// Random MDP of the given size with a fixed seed.
pub fn random_env(n_states: usize, n_actions: usize) -> EnvDescriptor {
    make_random_mdp(n_states, n_actions, 42, 1.0, 0.9).expect("valid random MDP size")
}

/// Outer-loop adversarial MDP over [`random_env`].
pub fn poisoned(n_states: usize, n_actions: usize, beta: f64) -> PoisonedMdp {
    let env = random_env(n_states, n_actions);
    PoisonedMdp::new(
        env.mdp,
        AttackSpec::new(AttackMode::SleeperNetsOuter, beta, 1.0, 1.0, 0),
    )
    .expect("valid attack spec")
}
