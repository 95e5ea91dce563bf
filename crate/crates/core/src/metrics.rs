//! Attack success, stealth and budget usage.

use rand::Rng;

use crate::dp::{policy_evaluation, EVAL_TOL};
use crate::envs::EnvDescriptor;
use crate::error::{Error, Result};
use crate::harness::RunLog;
use crate::mdp::{rollout, sample_index, PolicyTable, StepChoice};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub asr: f64,
    pub mean_benign_return: f64,
    pub brr: f64,
    pub episodes_evaluated: usize,
    pub poison_rate: f64,
}

/// Rounds `x` to the nearest multiple of `precision`; zero disables it.
pub fn quantize(x: f64, precision: f64) -> f64 {
    if precision > 0.0 {
        (x / precision).round() * precision
    } else {
        x
    }
}

fn check_covers(policy: &PolicyTable, env: &EnvDescriptor) -> Result<()> {
    if policy.n_states() != env.scheme.n_total() || policy.n_actions() != env.mdp.n_actions() {
        return Err(Error::Dimension(format!(
            "policy is {}x{}, expected {}x{} over S and S_p",
            policy.n_states(),
            policy.n_actions(),
            env.scheme.n_total(),
            env.mdp.n_actions()
        )));
    }
    Ok(())
}

/// Mean of `π(δ(s), a⁺)` over every benign state occurrence in
/// `n_episodes` benign episodes.
///
/// Episodes follow the policy's benign rows; triggered rows are only read,
/// so the estimate carries visitation noise but no action-sampling noise.
pub fn attack_success_rate<R: Rng + ?Sized>(
    policy: &PolicyTable,
    env: &EnvDescriptor,
    target: usize,
    n_episodes: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<f64> {
    check_covers(policy, env)?;
    if target >= env.mdp.n_actions() {
        return Err(Error::Index {
            index: target,
            limit: env.mdp.n_actions(),
        });
    }
    if n_episodes == 0 || horizon == 0 {
        return Err(Error::Contract(
            "ASR needs at least one episode of one step".into(),
        ));
    }
    let n = env.scheme.n_benign();
    let mut total = 0.0;
    let mut visits = 0usize;
    for _ in 0..n_episodes {
        let out = rollout(&env.mdp, horizon, rng, |s, rng| StepChoice {
            recorded_state: s,
            action: sample_index(policy.row(s), rng),
            reward_override: None,
        });
        for step in &out.trajectory.steps {
            total += policy.prob(step.state + n, target);
            visits += 1;
        }
    }
    Ok((total / visits as f64).clamp(0.0, 1.0))
}

/// Expected discounted benign return `Σ_s ρ(s)·V^π(s)` of the policy's
/// benign rows.
pub fn expected_benign_return(policy: &PolicyTable, env: &EnvDescriptor) -> Result<f64> {
    check_covers(policy, env)?;
    let benign = policy.restrict(env.scheme.n_benign());
    let v = policy_evaluation(&env.mdp, &benign, EVAL_TOL)?;
    Ok(env
        .mdp
        .initial_dist()
        .iter()
        .zip(v.as_slice())
        .map(|(p, v)| p * v)
        .sum())
}

/// Poisoned return relative to an unpoisoned baseline, capped at one.
///
/// A positive baseline gives the plain ratio. Otherwise the difference is
/// standardised by the baseline spread and mapped through `exp`, which is
/// one at equality and increasing in the poisoned return.
pub fn benign_return_ratio(poisoned: f64, baseline: f64, baseline_std: f64) -> Result<f64> {
    if !poisoned.is_finite() || !baseline.is_finite() || !baseline_std.is_finite() {
        return Err(Error::Numerical("returns must be finite".into()));
    }
    if baseline > 0.0 {
        return Ok((poisoned / baseline).min(1.0));
    }
    if baseline_std <= 0.0 {
        return Err(Error::DegenerateBaseline);
    }
    Ok(((poisoned - baseline) / baseline_std).exp().min(1.0))
}

/// Total poisoned steps over total environment steps.
pub fn empirical_poison_rate(log: &RunLog) -> f64 {
    if log.total_steps == 0 {
        0.0
    } else {
        log.total_poisoned as f64 / log.total_steps as f64
    }
}

/// Full evaluation of a trained policy against an unpoisoned baseline.
///
/// `mean_benign_return` is the exact expected discounted return, so the
/// only sampling noise in the report is the ASR visitation.
#[allow(clippy::too_many_arguments)]
pub fn evaluate<R: Rng + ?Sized>(
    policy: &PolicyTable,
    env: &EnvDescriptor,
    target: usize,
    n_episodes: usize,
    horizon: usize,
    baseline_return: f64,
    baseline_std: f64,
    log: &RunLog,
    rng: &mut R,
) -> Result<EvalReport> {
    let asr = attack_success_rate(policy, env, target, n_episodes, horizon, rng)?;
    let mean_benign_return = expected_benign_return(policy, env)?;
    Ok(EvalReport {
        asr,
        mean_benign_return,
        brr: benign_return_ratio(mean_benign_return, baseline_return, baseline_std)?,
        episodes_evaluated: n_episodes,
        poison_rate: empirical_poison_rate(log),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_chain, make_gridworld};
    use crate::seeded_rng;

    #[test]
    fn uniform_policy_asr_is_one_over_actions() {
        let env = make_gridworld(3, 3, 1.0, 0.0, 0.2, 0.9).unwrap();
        let pi = PolicyTable::uniform(20, 4);
        let mut rng = seeded_rng(4, 0);
        let asr = attack_success_rate(&pi, &env, 2, 10, 30, &mut rng).unwrap();
        assert_eq!(asr, 0.25);
    }

    #[test]
    fn target_everywhere_gives_one() {
        let env = make_chain(4, 1.0, 0.9).unwrap();
        let pi = PolicyTable::deterministic(&[0; 8], 2);
        let mut rng = seeded_rng(4, 0);
        assert_eq!(
            attack_success_rate(&pi, &env, 0, 5, 10, &mut rng).unwrap(),
            1.0
        );
    }

    #[test]
    fn brr_examples() {
        assert_eq!(benign_return_ratio(3.0, 3.0, 0.1).unwrap(), 1.0);
        assert!((benign_return_ratio(0.97 * 2.0, 2.0, 0.0).unwrap() - 0.97).abs() < 1e-15);
        assert_eq!(benign_return_ratio(5.0, 2.0, 0.0).unwrap(), 1.0);
        assert_eq!(benign_return_ratio(-1.0, -1.0, 0.5).unwrap(), 1.0);
        assert!(benign_return_ratio(-2.0, -1.0, 0.5).unwrap() < 1.0);
        assert!(matches!(
            benign_return_ratio(-2.0, -1.0, 0.0),
            Err(Error::DegenerateBaseline)
        ));
    }

    #[test]
    fn quantize_rounds_to_grid() {
        assert_eq!(quantize(0.99951, 1e-3), 1.0);
        assert_eq!(quantize(0.3333, 0.0), 0.3333);
    }

    #[test]
    fn empty_log_rate_is_zero() {
        assert_eq!(empirical_poison_rate(&RunLog::default()), 0.0);
    }
}
