//! Online victim learners over `S ∪ S_p`.
//!
//! Two archetypes: Monte-Carlo policy gradient with a tabular softmax
//! policy, and tabular Q-learning fed from a FIFO replay buffer. Both start
//! with parameters defined on the triggered states too, so poisoned
//! observations are ordinary inputs.

use std::collections::VecDeque;

use rand::Rng;

use crate::dp::QTable;
use crate::error::{Error, Result};
use crate::mdp::{returns_to_go, PolicyTable, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LearnerKind {
    PolicyGradient,
    QLearning,
}

impl LearnerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::PolicyGradient => "policy_gradient",
            LearnerKind::QLearning => "q_learning",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "policy_gradient" => Ok(LearnerKind::PolicyGradient),
            "q_learning" => Ok(LearnerKind::QLearning),
            other => Err(Error::Config(format!("unknown learner kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub learning_rate: f64,
    /// Exploration rate of the ε-greedy behaviour policy (Q-learning only).
    pub epsilon: f64,
    /// Episodes collected per policy-gradient update.
    pub batch_episodes: usize,
    pub buffer_capacity: usize,
    /// Transitions replayed per Q-learning update.
    pub replay_samples: usize,
    /// Constant subtracted from every return in the policy gradient.
    pub baseline: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            kind: LearnerKind::PolicyGradient,
            learning_rate: 0.5,
            epsilon: 0.1,
            batch_episodes: 1,
            buffer_capacity: 100,
            replay_samples: 64,
            baseline: 0.0,
        }
    }
}

impl LearnerConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon {} must lie in [0,1]",
                self.epsilon
            )));
        }
        if self.batch_episodes == 0 || self.buffer_capacity == 0 || self.replay_samples == 0 {
            return Err(Error::Config(
                "batch_episodes, buffer_capacity and replay_samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Logits `θ[s][a]` of a tabular softmax policy.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxPolicyParams {
    n_states: usize,
    n_actions: usize,
    logits: Vec<f64>,
}

impl SoftmaxPolicyParams {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        SoftmaxPolicyParams {
            n_states,
            n_actions,
            logits: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_logits(n_states: usize, n_actions: usize, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "{} logits for a {n_states}x{n_actions} table",
                logits.len()
            )));
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("logits must be finite".into()));
        }
        Ok(SoftmaxPolicyParams {
            n_states,
            n_actions,
            logits,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.logits[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Row-wise softmax with max subtraction.
pub fn policy_from_logits(params: &SoftmaxPolicyParams) -> PolicyTable {
    let mut probs = vec![0.0; params.logits.len()];
    for s in 0..params.n_states {
        let range = s * params.n_actions..(s + 1) * params.n_actions;
        softmax_into(&params.logits[range.clone()], &mut probs[range]);
    }
    PolicyTable::from_flat(params.n_states, params.n_actions, probs)
}

fn check_batch(params: &SoftmaxPolicyParams, batch: &[Trajectory]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Contract("policy-gradient batch is empty".into()));
    }
    for step in batch.iter().flat_map(|t| &t.steps) {
        if step.state >= params.n_states || step.action >= params.n_actions {
            return Err(Error::Index {
                index: step.state.max(step.action),
                limit: params.n_states,
            });
        }
    }
    Ok(())
}

/// Surrogate `J(θ) = (1/|B|) Σ_H Σ_t (G_t − b)·log π_θ(s_t, a_t)` with the
/// returns held fixed. Its gradient is the REINFORCE estimate.
pub fn surrogate_objective(
    params: &SoftmaxPolicyParams,
    batch: &[Trajectory],
    gamma: f64,
    baseline: f64,
) -> Result<f64> {
    check_batch(params, batch)?;
    let pi = policy_from_logits(params);
    let mut total = 0.0;
    for traj in batch {
        for (step, g) in traj.steps.iter().zip(returns_to_go(traj, gamma)) {
            total += (g - baseline) * pi.prob(step.state, step.action).ln();
        }
    }
    Ok(total / batch.len() as f64)
}

/// Analytic gradient of [`surrogate_objective`] with respect to the logits.
pub fn surrogate_gradient(
    params: &SoftmaxPolicyParams,
    batch: &[Trajectory],
    gamma: f64,
    baseline: f64,
) -> Result<Vec<f64>> {
    check_batch(params, batch)?;
    let na = params.n_actions;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; params.logits.len()];
    let mut probs = vec![0.0; na];
    for traj in batch {
        for (step, g) in traj.steps.iter().zip(returns_to_go(traj, gamma)) {
            let s = step.state;
            softmax_into(params.row(s), &mut probs);
            let weight = (g - baseline) * scale;
            for a in 0..na {
                let indicator = if a == step.action { 1.0 } else { 0.0 };
                grad[s * na + a] += weight * (indicator - probs[a]);
            }
        }
    }
    Ok(grad)
}

/// One ascent step `θ ← θ + lr·∇J` on the Monte-Carlo returns of `batch`.
///
/// Returns are computed on the rewards as stored, poisoned or not. Rows of
/// states absent from the batch are left bit-identical.
pub fn policy_gradient_update(
    params: &SoftmaxPolicyParams,
    batch: &[Trajectory],
    gamma: f64,
    learning_rate: f64,
) -> Result<SoftmaxPolicyParams> {
    policy_gradient_update_with_baseline(params, batch, gamma, learning_rate, 0.0)
}

pub fn policy_gradient_update_with_baseline(
    params: &SoftmaxPolicyParams,
    batch: &[Trajectory],
    gamma: f64,
    learning_rate: f64,
    baseline: f64,
) -> Result<SoftmaxPolicyParams> {
    let grad = surrogate_gradient(params, batch, gamma, baseline)?;
    let mut out = params.clone();
    for (l, g) in out.logits.iter_mut().zip(grad) {
        if g != 0.0 {
            *l += learning_rate * g;
        }
    }
    Ok(out)
}

/// Bounded FIFO store of trajectories.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Trajectory>,
}

/// One replayable transition; `next = None` marks a terminal successor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next: Option<usize>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends, evicting the oldest trajectory when full.
    pub fn push(&mut self, trajectory: Trajectory) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(trajectory);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trajectory> {
        self.entries.iter()
    }

    /// Every transition with a known successor, oldest first.
    ///
    /// The last step of a truncated trajectory has no recorded successor and
    /// is skipped.
    pub fn transitions(&self) -> Vec<Transition> {
        let mut out = Vec::new();
        for traj in &self.entries {
            let n = traj.steps.len();
            for (i, step) in traj.steps.iter().enumerate() {
                let next = if i + 1 < n {
                    Some(traj.steps[i + 1].state)
                } else if traj.truncated {
                    continue;
                } else {
                    None
                };
                out.push(Transition {
                    state: step.state,
                    action: step.action,
                    reward: step.reward,
                    next,
                });
            }
        }
        out
    }
}

/// Replays `sample_size` uniformly drawn transitions through the one-step
/// temporal-difference backup toward `r + γ·max_a' Q(s', a')`.
pub fn q_learning_update<R: Rng + ?Sized>(
    q: &QTable,
    buffer: &ReplayBuffer,
    sample_size: usize,
    gamma: f64,
    learning_rate: f64,
    rng: &mut R,
) -> Result<QTable> {
    let transitions = buffer.transitions();
    if transitions.is_empty() {
        return Err(Error::Contract(
            "replay buffer holds no usable transitions".into(),
        ));
    }
    let mut out = q.clone();
    for _ in 0..sample_size {
        let tr = transitions[rng.gen_range(0..transitions.len())];
        let target = tr.reward + tr.next.map_or(0.0, |n| gamma * out.max(n));
        let old = out.get(tr.state, tr.action);
        out.set(tr.state, tr.action, old + learning_rate * (target - old));
    }
    Ok(out)
}

/// ε-greedy rows: `1−ε+ε/|A|` on the lowest-index argmax, `ε/|A|` elsewhere.
pub fn epsilon_greedy(q: &QTable, epsilon: f64) -> Result<PolicyTable> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Config(format!(
            "epsilon {epsilon} must lie in [0,1]"
        )));
    }
    let na = q.n_actions();
    let floor = epsilon / na as f64;
    let mut probs = vec![floor; q.n_states() * na];
    for s in 0..q.n_states() {
        probs[s * na + q.argmax(s)] += 1.0 - epsilon;
    }
    Ok(PolicyTable::from_flat(q.n_states(), na, probs))
}

/// Mutable learner state for one training run.
#[derive(Clone, Debug)]
pub enum Learner {
    PolicyGradient {
        params: SoftmaxPolicyParams,
        pending: Vec<Trajectory>,
    },
    QLearning {
        q: QTable,
        buffer: ReplayBuffer,
    },
}

impl Learner {
    pub fn new(config: &LearnerConfig, n_states: usize, n_actions: usize) -> Self {
        match config.kind {
            LearnerKind::PolicyGradient => Learner::PolicyGradient {
                params: SoftmaxPolicyParams::zeros(n_states, n_actions),
                pending: Vec::new(),
            },
            LearnerKind::QLearning => Learner::QLearning {
                q: QTable::zeros(n_states, n_actions),
                buffer: ReplayBuffer::new(config.buffer_capacity),
            },
        }
    }

    /// Policy used to act in the environment.
    pub fn behaviour_policy(&self, config: &LearnerConfig) -> PolicyTable {
        match self {
            Learner::PolicyGradient { params, .. } => policy_from_logits(params),
            Learner::QLearning { q, .. } => {
                epsilon_greedy(q, config.epsilon).expect("epsilon checked by LearnerConfig::check")
            }
        }
    }

    /// Policy the agent would deploy: the softmax policy, or greedy in `Q`.
    pub fn deployed_policy(&self) -> PolicyTable {
        match self {
            Learner::PolicyGradient { params, .. } => policy_from_logits(params),
            Learner::QLearning { q, .. } => {
                epsilon_greedy(q, 0.0).expect("zero epsilon is always valid")
            }
        }
    }

    /// Stores a finished (possibly poisoned) trajectory and updates when due.
    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        trajectory: Trajectory,
        config: &LearnerConfig,
        gamma: f64,
        rng: &mut R,
    ) -> Result<()> {
        match self {
            Learner::PolicyGradient { params, pending } => {
                pending.push(trajectory);
                if pending.len() >= config.batch_episodes {
                    *params = policy_gradient_update_with_baseline(
                        params,
                        pending,
                        gamma,
                        config.learning_rate,
                        config.baseline,
                    )?;
                    pending.clear();
                }
            }
            Learner::QLearning { q, buffer } => {
                buffer.push(trajectory);
                if !buffer.transitions().is_empty() {
                    *q = q_learning_update(
                        q,
                        buffer,
                        config.replay_samples,
                        gamma,
                        config.learning_rate,
                        rng,
                    )?;
                }
            }
        }
        Ok(())
    }
}
