//! Finite tabular MDPs, policies and trajectory sampling.
//!
//! Transitions and rewards are stored densely per `(s, a, s')` triple.
//! Terminal states are absorbing self-loops with zero reward, so the same
//! representation serves infinite-horizon dynamic programming and episodic
//! sampling.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
    initial_dist: Vec<f64>,
    terminals: Vec<bool>,
    horizon: Option<usize>,
}

/// First invariant an [`Mdp`] breaks, as reported by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ProbabilityRange {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    InitialRange {
        state: usize,
        value: f64,
    },
    InitialSum {
        sum: f64,
    },
    TerminalNotAbsorbing {
        state: usize,
        action: usize,
    },
    TerminalReward {
        state: usize,
        action: usize,
    },
    NonFiniteReward {
        state: usize,
        action: usize,
        next: usize,
    },
    GammaNotBelowOne {
        gamma: f64,
    },
    GammaRange {
        gamma: f64,
    },
    ZeroHorizon,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ProbabilityRange {
                state,
                action,
                next,
                value,
            } => write!(
                f,
                "transition probability {value} outside [0,1] at ({state},{action},{next})"
            ),
            Violation::RowSum { state, action, sum } => {
                write!(f, "row sum {sum} at ({state},{action})")
            }
            Violation::InitialRange { state, value } => {
                write!(
                    f,
                    "initial probability {value} outside [0,1] at state {state}"
                )
            }
            Violation::InitialSum { sum } => write!(f, "initial distribution sums to {sum}"),
            Violation::TerminalNotAbsorbing { state, action } => {
                write!(
                    f,
                    "terminal state {state} does not self-loop under action {action}"
                )
            }
            Violation::TerminalReward { state, action } => {
                write!(
                    f,
                    "terminal state {state} has non-zero reward under action {action}"
                )
            }
            Violation::NonFiniteReward {
                state,
                action,
                next,
            } => {
                write!(f, "non-finite reward at ({state},{action},{next})")
            }
            Violation::GammaNotBelowOne { .. } => write!(f, "gamma must be < 1"),
            Violation::GammaRange { gamma } => write!(f, "gamma {gamma} outside [0,1]"),
            Violation::ZeroHorizon => write!(f, "horizon must be positive"),
        }
    }
}

impl std::error::Error for Violation {}

impl Mdp {
    /// An MDP with all-zero transition and reward tables, starting in state 0.
    ///
    /// Callers fill the tables with [`Mdp::set_transition`] /
    /// [`Mdp::set_reward`] and then [`validate`].
    pub fn new(n_states: usize, n_actions: usize, gamma: f64) -> Self {
        assert!(
            n_states > 0 && n_actions > 0,
            "MDP needs at least one state and action"
        );
        let mut initial_dist = vec![0.0; n_states];
        initial_dist[0] = 1.0;
        Mdp {
            n_states,
            n_actions,
            transition: vec![0.0; n_states * n_actions * n_states],
            reward: vec![0.0; n_states * n_actions * n_states],
            gamma,
            initial_dist,
            terminals: vec![false; n_states],
            horizon: None,
        }
    }

    #[inline]
    fn idx(&self, s: usize, a: usize, next: usize) -> usize {
        (s * self.n_actions + a) * self.n_states + next
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminals[s]
    }

    pub fn terminals(&self) -> impl Iterator<Item = usize> + '_ {
        self.terminals
            .iter()
            .enumerate()
            .filter(|(_, t)| **t)
            .map(|(s, _)| s)
    }

    #[inline]
    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[self.idx(s, a, next)]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, next: usize) -> f64 {
        self.reward[self.idx(s, a, next)]
    }

    /// Distribution over next states for `(s, a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.idx(s, a, 0);
        &self.transition[start..start + self.n_states]
    }

    pub fn reward_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.idx(s, a, 0);
        &self.reward[start..start + self.n_states]
    }

    pub fn set_transition(&mut self, s: usize, a: usize, next: usize, p: f64) {
        let i = self.idx(s, a, next);
        self.transition[i] = p;
    }

    pub fn set_reward(&mut self, s: usize, a: usize, next: usize, r: f64) {
        let i = self.idx(s, a, next);
        self.reward[i] = r;
    }

    /// Deterministic move `s --a--> next` paying `r`; clears the rest of the row.
    pub fn set_deterministic(&mut self, s: usize, a: usize, next: usize, r: f64) {
        for n in 0..self.n_states {
            self.set_transition(s, a, n, 0.0);
            self.set_reward(s, a, n, 0.0);
        }
        self.set_transition(s, a, next, 1.0);
        self.set_reward(s, a, next, r);
    }

    /// Makes `s` an absorbing zero-reward state for every action.
    pub fn set_terminal(&mut self, s: usize) {
        for a in 0..self.n_actions {
            self.set_deterministic(s, a, s, 0.0);
        }
        self.terminals[s] = true;
    }

    pub fn set_initial_dist(&mut self, dist: Vec<f64>) {
        assert_eq!(dist.len(), self.n_states, "initial distribution length");
        self.initial_dist = dist;
    }

    pub fn set_gamma(&mut self, gamma: f64) {
        self.gamma = gamma;
    }

    pub fn set_horizon(&mut self, horizon: Option<usize>) {
        self.horizon = horizon;
    }

    /// Largest absolute reward in the table.
    pub fn max_abs_reward(&self) -> f64 {
        self.reward.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Checks every [`Mdp`] invariant; the error names the first one violated.
pub fn validate(mdp: &Mdp) -> std::result::Result<(), Violation> {
    match mdp.horizon {
        None if !(mdp.gamma < 1.0) => return Err(Violation::GammaNotBelowOne { gamma: mdp.gamma }),
        Some(0) => return Err(Violation::ZeroHorizon),
        _ => {}
    }
    if !(0.0..=1.0).contains(&mdp.gamma) {
        return Err(Violation::GammaRange { gamma: mdp.gamma });
    }
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let mut sum = 0.0;
            for next in 0..mdp.n_states {
                let p = mdp.transition(s, a, next);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Violation::ProbabilityRange {
                        state: s,
                        action: a,
                        next,
                        value: p,
                    });
                }
                if !mdp.reward(s, a, next).is_finite() {
                    return Err(Violation::NonFiniteReward {
                        state: s,
                        action: a,
                        next,
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Violation::RowSum {
                    state: s,
                    action: a,
                    sum,
                });
            }
            if mdp.terminals[s] {
                if mdp.transition(s, a, s) != 1.0 {
                    return Err(Violation::TerminalNotAbsorbing {
                        state: s,
                        action: a,
                    });
                }
                if mdp.reward(s, a, s) != 0.0 {
                    return Err(Violation::TerminalReward {
                        state: s,
                        action: a,
                    });
                }
            }
        }
    }
    let mut sum = 0.0;
    for (s, &p) in mdp.initial_dist.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Violation::InitialRange { state: s, value: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Violation::InitialSum { sum });
    }
    Ok(())
}

/// Stochastic policy table `π[s][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        PolicyTable {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// One-hot rows selecting `actions[s]` in each state.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            assert!(a < n_actions, "action {a} out of range");
            probs[s * n_actions + a] = 1.0;
        }
        PolicyTable {
            n_states: actions.len(),
            n_actions,
            probs,
        }
    }

    /// Builds a policy from explicit rows, checking each is a distribution.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Dimension(
                "policy needs at least one row and column".into(),
            ));
        }
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::Dimension(format!(
                    "row {s} has {} entries",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::Contract(format!(
                    "row {s} is not a distribution (sum {sum})"
                )));
            }
            probs.extend(row);
        }
        Ok(PolicyTable {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Wraps a flat row-major table without checks; rows must be distributions.
    pub(crate) fn from_flat(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), n_states * n_actions);
        PolicyTable {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn set_row(&mut self, s: usize, row: &[f64]) {
        assert_eq!(row.len(), self.n_actions);
        self.probs[s * self.n_actions..(s + 1) * self.n_actions].copy_from_slice(row);
    }

    /// The first `n_states` rows, e.g. the benign half of a policy over S ∪ S_p.
    pub fn restrict(&self, n_states: usize) -> PolicyTable {
        assert!(n_states <= self.n_states);
        PolicyTable {
            n_states,
            n_actions: self.n_actions,
            probs: self.probs[..n_states * self.n_actions].to_vec(),
        }
    }

    /// Most likely action per state, lowest index on ties.
    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..self.n_states)
            .map(|s| {
                let row = self.row(s);
                let mut best = 0;
                for a in 1..row.len() {
                    if row[a] > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

/// Ordered `(state, action, reward)` steps of one episode.
///
/// `truncated` is set when the sampling horizon cut the episode short rather
/// than a terminal state ending it.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward)
    }
}

/// Draws an index from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // u landed in the rounding gap above the cumulative sum
    last_positive
}

/// What a rollout hook decides for one step.
pub(crate) struct StepChoice {
    /// State index written into the trajectory (may be a triggered state).
    pub recorded_state: usize,
    pub action: usize,
    /// Replaces the environment reward in the recorded step.
    pub reward_override: Option<f64>,
}

/// Result of a hooked rollout: the recorded trajectory and the true rewards.
pub(crate) struct Rollout {
    pub trajectory: Trajectory,
    pub env_rewards: Vec<f64>,
}

/// Episode loop shared by every sampler.
///
/// Per step the hook draws first, then the environment transition, so the
/// random stream is consumed in a fixed order.
pub(crate) fn rollout<R, F>(mdp: &Mdp, horizon: usize, rng: &mut R, mut choose: F) -> Rollout
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> StepChoice,
{
    let mut s = sample_index(&mdp.initial_dist, rng);
    let mut steps = Vec::new();
    let mut env_rewards = Vec::new();
    let mut truncated = true;
    for _ in 0..horizon {
        let choice = choose(s, rng);
        let next = sample_index(mdp.transition_row(s, choice.action), rng);
        let r = mdp.reward(s, choice.action, next);
        steps.push(Step {
            state: choice.recorded_state,
            action: choice.action,
            reward: choice.reward_override.unwrap_or(r),
        });
        env_rewards.push(r);
        s = next;
        if mdp.is_terminal(s) {
            truncated = false;
            break;
        }
    }
    Rollout {
        trajectory: Trajectory { steps, truncated },
        env_rewards,
    }
}

/// Samples one episode of at most `horizon` steps.
///
/// Starts from a state drawn from the initial distribution and stops at a
/// terminal state or after `horizon` steps (then `truncated` is set).
pub fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &Mdp,
    policy: &PolicyTable,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(Error::Dimension(format!(
            "policy is {}x{}, MDP has {} states and {} actions",
            policy.n_states(),
            policy.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    if horizon == 0 {
        return Err(Error::Contract(
            "sampling horizon must be at least 1".into(),
        ));
    }
    let out = rollout(mdp, horizon, rng, |s, rng| StepChoice {
        recorded_state: s,
        action: sample_index(policy.row(s), rng),
        reward_override: None,
    });
    Ok(out.trajectory)
}

/// Monte-Carlo return from 1-based step `t`: `Σ_{i=t}^{|H|} γ^{i−t} r_i`.
///
/// `t = |H| + 1` is allowed and yields 0.
pub fn discounted_return(trajectory: &Trajectory, gamma: f64, t: usize) -> Result<f64> {
    let n = trajectory.len();
    if t == 0 || t > n + 1 {
        return Err(Error::Index {
            index: t,
            limit: n + 1,
        });
    }
    Ok(trajectory.steps[t - 1..]
        .iter()
        .rev()
        .fold(0.0, |g, step| step.reward + gamma * g))
}

/// All Monte-Carlo returns of a trajectory, 0-based.
pub fn returns_to_go(trajectory: &Trajectory, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; trajectory.len()];
    let mut g = 0.0;
    for (i, step) in trajectory.steps.iter().enumerate().rev() {
        g = step.reward + gamma * g;
        out[i] = g;
    }
    out
}
