//! Poisoning attacks wired into the victim's training loop.
//!
//! The outer-loop attack sees each finished trajectory before the learner
//! does and rewrites a budgeted subset of its steps. The inner-loop static
//! baseline decides per time step, before the action, and pays a fixed
//! `±c`. Both respect the annealing gate, which stops poisoning while the
//! most recently measured attack success rate sits at the threshold.

use rand::seq::index::sample;
use rand::Rng;

use crate::envs::EnvDescriptor;
use crate::error::{Error, Result};
use crate::learners::{Learner, LearnerConfig};
use crate::mdp::{rollout, sample_index, PolicyTable, StepChoice, Trajectory};
use crate::metrics::{attack_success_rate, quantize};
use crate::poison::{static_poisoned_reward, AttackMode, AttackSpec, TriggerScheme};
use crate::seeded_rng;

const STREAM_ENV: u64 = 0;
const STREAM_ATTACK: u64 = 1;
const STREAM_EVAL: u64 = 2;
const STREAM_LEARNER: u64 = 3;

fn indicator_reward(spec: &AttackSpec, action: usize) -> f64 {
    static_poisoned_reward(spec, action)
}

/// Discounted return from 0-based index `t` using the rewards as they
/// currently stand; zero past the end.
fn value_estimate(traj: &Trajectory, gamma: f64, t: usize) -> f64 {
    traj.steps[t.min(traj.len())..]
        .iter()
        .rev()
        .fold(0.0, |acc, s| s.reward + gamma * acc)
}

/// Rewrites the given 0-based step indices of `traj` in ascending order.
///
/// For every index `t`: the state becomes `δ(s_t)`, the reward becomes
/// `±c − α·γ·V̂(s_{t+1})`, and the previous reward (if any) absorbs
/// `−γ·r_t + γ·V̂(s_t)` where `V̂(s_t)` was measured before the rewrite.
/// Adjacent indices see each other's edits.
pub fn poison_trajectory_at(
    traj: &Trajectory,
    indices: &[usize],
    spec: &AttackSpec,
    scheme: TriggerScheme,
    gamma: f64,
) -> Result<Trajectory> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = traj.clone();
    for &t in &sorted {
        if t >= out.len() {
            return Err(Error::Index {
                index: t,
                limit: out.len(),
            });
        }
        let v_here = value_estimate(&out, gamma, t);
        let v_next = value_estimate(&out, gamma, t + 1);
        let step = &mut out.steps[t];
        step.state = scheme.apply_trigger(step.state)?;
        step.reward = indicator_reward(spec, step.action) - spec.alpha * gamma * v_next;
        let r_t = step.reward;
        if t > 0 {
            let prev = &mut out.steps[t - 1];
            prev.reward = prev.reward - gamma * r_t + gamma * v_here;
        }
    }
    Ok(out)
}

/// Poisons `⌊β·|H|⌋` uniformly chosen steps of `traj`.
///
/// Returns the rewritten trajectory and the sorted poisoned indices. When
/// the budget floors to zero the input comes back unchanged.
pub fn poison_trajectory_sleepernets<R: Rng + ?Sized>(
    traj: &Trajectory,
    spec: &AttackSpec,
    scheme: TriggerScheme,
    gamma: f64,
    rng: &mut R,
) -> Result<(Trajectory, Vec<usize>)> {
    if traj.is_empty() {
        return Err(Error::Contract("cannot poison an empty trajectory".into()));
    }
    let count = (spec.beta * traj.len() as f64).floor() as usize;
    poison_count(traj, count, spec, scheme, gamma, rng)
}

fn poison_count<R: Rng + ?Sized>(
    traj: &Trajectory,
    count: usize,
    spec: &AttackSpec,
    scheme: TriggerScheme,
    gamma: f64,
    rng: &mut R,
) -> Result<(Trajectory, Vec<usize>)> {
    let count = count.min(traj.len());
    if count == 0 {
        return Ok((traj.clone(), Vec::new()));
    }
    let mut indices = sample(rng, traj.len(), count).into_vec();
    indices.sort_unstable();
    let out = poison_trajectory_at(traj, &indices, spec, scheme, gamma)?;
    Ok((out, indices))
}

/// Per-step trigger decision of the inner-loop baseline.
///
/// With probability `β` returns `(δ(s), true)`; the caller then replaces the
/// step reward with `±c` once the action is known.
pub fn inner_loop_static_step<R: Rng + ?Sized>(
    s: usize,
    spec: &AttackSpec,
    scheme: TriggerScheme,
    rng: &mut R,
) -> Result<(usize, bool)> {
    if scheme.is_poisoned(s) {
        return Err(Error::Index {
            index: s,
            limit: scheme.n_benign(),
        });
    }
    if rng.gen::<f64>() < spec.beta {
        Ok((scheme.apply_trigger(s)?, true))
    } else {
        Ok((s, false))
    }
}

/// `false` iff the adversary should skip poisoning at this ASR.
pub fn anneal_gate(current_asr: f64, spec: &AttackSpec) -> bool {
    !spec.anneal || current_asr < spec.anneal_threshold
}

/// Loop parameters that are not part of the learner or the attack.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingOptions {
    pub episodes: usize,
    pub horizon: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    /// Grid the measured ASR is rounded to before it is logged or gated on.
    pub asr_precision: f64,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        TrainingOptions {
            episodes: 1000,
            horizon: 100,
            eval_interval: 50,
            eval_episodes: 20,
            seed: 0,
            asr_precision: 1e-3,
        }
    }
}

impl TrainingOptions {
    pub fn check(&self) -> Result<()> {
        if self.episodes == 0
            || self.horizon == 0
            || self.eval_interval == 0
            || self.eval_episodes == 0
        {
            return Err(Error::Config(
                "episodes, horizon, eval_interval and eval_episodes must be positive".into(),
            ));
        }
        if !(self.asr_precision >= 0.0) {
            return Err(Error::Config("asr_precision must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Undiscounted environment return, before any poisoning.
    pub benign_return: f64,
    pub steps: usize,
    pub poisoned_steps: usize,
    pub cumulative_poison_rate: f64,
    /// Most recent ASR measurement (zero before the first one).
    pub asr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub episodes: Vec<EpisodeRecord>,
    pub total_steps: usize,
    pub total_poisoned: usize,
    /// ASR of the final policy; also the `asr` of the last episode record.
    pub final_asr: f64,
}

impl RunLog {
    fn push(
        &mut self,
        episode: usize,
        benign_return: f64,
        steps: usize,
        poisoned: usize,
        asr: f64,
    ) {
        self.total_steps += steps;
        self.total_poisoned += poisoned;
        let rate = if self.total_steps == 0 {
            0.0
        } else {
            self.total_poisoned as f64 / self.total_steps as f64
        };
        self.episodes.push(EpisodeRecord {
            episode,
            benign_return,
            steps,
            poisoned_steps: poisoned,
            cumulative_poison_rate: rate,
            asr,
        });
    }

    pub fn cumulative_poison_rate(&self) -> f64 {
        self.episodes
            .last()
            .map_or(0.0, |e| e.cumulative_poison_rate)
    }
}

struct Sampled {
    trajectory: Trajectory,
    benign_return: f64,
    poisoned: usize,
}

fn sample_benign<R: Rng + ?Sized>(
    env: &EnvDescriptor,
    policy: &PolicyTable,
    horizon: usize,
    rng: &mut R,
) -> Sampled {
    let out = rollout(&env.mdp, horizon, rng, |s, rng| StepChoice {
        recorded_state: s,
        action: sample_index(policy.row(s), rng),
        reward_override: None,
    });
    Sampled {
        benign_return: out.env_rewards.iter().sum(),
        trajectory: out.trajectory,
        poisoned: 0,
    }
}

fn sample_static<R: Rng + ?Sized>(
    env: &EnvDescriptor,
    policy: &PolicyTable,
    spec: &AttackSpec,
    horizon: usize,
    rng: &mut R,
    attack_rng: &mut R,
) -> Result<Sampled> {
    let mut poisoned = 0;
    let mut failure = None;
    let out = rollout(&env.mdp, horizon, rng, |s, rng| {
        let (obs, flagged) = match inner_loop_static_step(s, spec, env.scheme, attack_rng) {
            Ok(x) => x,
            Err(e) => {
                failure.get_or_insert(e);
                (s, false)
            }
        };
        let action = sample_index(policy.row(obs), rng);
        if flagged {
            poisoned += 1;
        }
        StepChoice {
            recorded_state: obs,
            action,
            reward_override: flagged.then(|| static_poisoned_reward(spec, action)),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Sampled {
        benign_return: out.env_rewards.iter().sum(),
        trajectory: out.trajectory,
        poisoned,
    })
}

/// Trains one victim under the configured attack.
///
/// Random streams are split by purpose (environment and actions, attack,
/// evaluation, learner) so an unpoisoned run and an attacked run with the
/// same seed share environment randomness until their policies diverge.
/// Returns the deployed policy over `S ∪ S_p` and the run log.
pub fn run_training(
    env: &EnvDescriptor,
    learner_config: &LearnerConfig,
    spec: &AttackSpec,
    options: &TrainingOptions,
) -> Result<(PolicyTable, RunLog)> {
    learner_config.check()?;
    options.check()?;
    spec.check(env.mdp.n_actions())?;
    let gamma = env.mdp.gamma();
    let scheme = env.scheme;
    let mut env_rng = seeded_rng(options.seed, STREAM_ENV);
    let mut attack_rng = seeded_rng(options.seed, STREAM_ATTACK);
    let mut eval_rng = seeded_rng(options.seed, STREAM_EVAL);
    let mut learner_rng = seeded_rng(options.seed, STREAM_LEARNER);

    let mut learner = Learner::new(learner_config, scheme.n_total(), env.mdp.n_actions());
    let mut log = RunLog::default();
    let mut asr: Option<f64> = None;
    let mut credit = 0.0;

    let measure = |learner: &Learner, rng: &mut crate::Rng| -> Result<f64> {
        let policy = learner.deployed_policy();
        let raw = attack_success_rate(
            &policy,
            env,
            spec.target_action,
            options.eval_episodes,
            options.horizon,
            rng,
        )?;
        Ok(quantize(raw, options.asr_precision))
    };

    for episode in 0..options.episodes {
        let policy = learner.behaviour_policy(learner_config);
        let open = asr.is_none_or(|a| anneal_gate(a, spec));
        let sampled = match spec.mode {
            AttackMode::None => sample_benign(env, &policy, options.horizon, &mut env_rng),
            AttackMode::StaticInner if open && spec.beta > 0.0 => sample_static(
                env,
                &policy,
                spec,
                options.horizon,
                &mut env_rng,
                &mut attack_rng,
            )?,
            AttackMode::StaticInner => sample_benign(env, &policy, options.horizon, &mut env_rng),
            AttackMode::SleeperNetsOuter => {
                let mut s = sample_benign(env, &policy, options.horizon, &mut env_rng);
                if open {
                    let count = if spec.accumulate_budget {
                        credit += spec.beta * s.trajectory.len() as f64;
                        let n = credit.floor();
                        credit -= n;
                        n as usize
                    } else {
                        (spec.beta * s.trajectory.len() as f64).floor() as usize
                    };
                    let (t, idx) =
                        poison_count(&s.trajectory, count, spec, scheme, gamma, &mut attack_rng)?;
                    s.trajectory = t;
                    s.poisoned = idx.len();
                }
                s
            }
        };
        let steps = sampled.trajectory.len();
        learner.observe(sampled.trajectory, learner_config, gamma, &mut learner_rng)?;
        if (episode + 1) % options.eval_interval == 0 {
            asr = Some(measure(&learner, &mut eval_rng)?);
        }
        log.push(
            episode,
            sampled.benign_return,
            steps,
            sampled.poisoned,
            asr.unwrap_or(0.0),
        );
    }
    log.final_asr = match asr {
        Some(a) if options.episodes.is_multiple_of(options.eval_interval) => a,
        _ => {
            let a = measure(&learner, &mut eval_rng)?;
            if let Some(last) = log.episodes.last_mut() {
                last.asr = a;
            }
            a
        }
    };
    Ok((learner.deployed_policy(), log))
}
