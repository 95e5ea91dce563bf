//! Desk-scale environments.
//!
//! Every constructor returns the MDP together with its trigger scheme so
//! callers never pair a state space with the wrong poisoned copy. Names
//! returned in [`EnvDescriptor::name`] are the identifiers the experiment
//! config accepts.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{validate, Mdp};
use crate::poison::TriggerScheme;
use crate::seeded_rng;

#[derive(Clone, Debug)]
pub struct EnvDescriptor {
    pub name: String,
    pub mdp: Mdp,
    pub scheme: TriggerScheme,
    pub notes: String,
}

impl EnvDescriptor {
    fn new(name: &str, mdp: Mdp, notes: String) -> Result<Self> {
        validate(&mdp)?;
        let scheme = TriggerScheme::new(mdp.n_states());
        Ok(EnvDescriptor {
            name: name.to_string(),
            mdp,
            scheme,
            notes,
        })
    }
}

/// State indices of [`make_m1`].
pub mod m1 {
    pub const START: usize = 0;
    pub const SURVIVE: usize = 1;
    pub const END: usize = 2;
    /// Target action `a⁺`.
    pub const TARGET: usize = 0;
    pub const A1: usize = 1;
}

/// State indices of [`make_m2`].
pub mod m2 {
    pub const START: usize = 0;
    pub const FAST: usize = 1;
    pub const SLOW1: usize = 2;
    pub const SLOW2: usize = 3;
    pub const FINISH: usize = 4;
    pub const END: usize = 5;
    /// `a⁺`, the fast path.
    pub const TARGET: usize = 0;
    /// `a1`, the slow path.
    pub const SLOW: usize = 1;
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Config(format!("{name} must be positive, got {x}")));
    }
    Ok(())
}

/// Counterexample where a fixed `±c` cannot make `a⁺` optimal.
///
/// From Start, `a⁺` ends the episode and `a1` moves to Survive, which
/// self-loops. All benign rewards are zero; the failure appears once every
/// step is triggered and pays `±c`, because the Survive stream is worth
/// `γc/(1−γ)` and overtakes the one-off `+c` for `γ > 2/3`.
pub fn make_m1(c: f64, gamma: f64) -> Result<EnvDescriptor> {
    check_positive("c", c)?;
    let mut m = Mdp::new(3, 2, gamma);
    m.set_deterministic(m1::START, m1::TARGET, m1::END, 0.0);
    m.set_deterministic(m1::START, m1::A1, m1::SURVIVE, 0.0);
    m.set_deterministic(m1::SURVIVE, m1::TARGET, m1::SURVIVE, 0.0);
    m.set_deterministic(m1::SURVIVE, m1::A1, m1::SURVIVE, 0.0);
    m.set_terminal(m1::END);
    EnvDescriptor::new(
        "m1",
        m,
        format!("start/survive/end skeleton; zero benign rewards; analysed with static c = {c}"),
    )
}

/// Short-episode variant of [`make_m1`] for training runs.
///
/// The Survive stream is collapsed into a single payoff: Survive always
/// moves to End paying `4c`, while `a⁺` at Start pays `5c`. A benign agent
/// therefore ends episodes at Start, yet a triggered Start pays `−c + γ·4c`
/// for `a1` against `+c` for `a⁺`, so static poisoning still loses once
/// `γ > 1/2`.
pub fn make_m1_episodic(c: f64, gamma: f64) -> Result<EnvDescriptor> {
    check_positive("c", c)?;
    let mut m = Mdp::new(3, 2, gamma);
    m.set_deterministic(m1::START, m1::TARGET, m1::END, 5.0 * c);
    m.set_deterministic(m1::START, m1::A1, m1::SURVIVE, 0.0);
    m.set_deterministic(m1::SURVIVE, m1::TARGET, m1::END, 4.0 * c);
    m.set_deterministic(m1::SURVIVE, m1::A1, m1::END, 4.0 * c);
    m.set_terminal(m1::END);
    EnvDescriptor::new(
        "m1-episodic",
        m,
        format!("m1 with the survive stream paid once (4c) and a 5c exit at start; c = {c}"),
    )
}

/// Counterexample where static poisoning flips the benign-optimal path.
///
/// Start offers a fast path (one intermediate state) and a slow path (two)
/// to Finish; Finish pays `c` on its way into the absorbing End. Every
/// triggered state on the way pays an extra `+c`, which favours the longer
/// path once `γ > 1 − β`.
pub fn make_m2(c: f64, gamma: f64) -> Result<EnvDescriptor> {
    check_positive("c", c)?;
    let mut m = Mdp::new(6, 2, gamma);
    m.set_deterministic(m2::START, m2::TARGET, m2::FAST, 0.0);
    m.set_deterministic(m2::START, m2::SLOW, m2::SLOW1, 0.0);
    for a in 0..2 {
        m.set_deterministic(m2::FAST, a, m2::FINISH, 0.0);
        m.set_deterministic(m2::SLOW1, a, m2::SLOW2, 0.0);
        m.set_deterministic(m2::SLOW2, a, m2::FINISH, 0.0);
        m.set_deterministic(m2::FINISH, a, m2::END, c);
    }
    m.set_terminal(m2::END);
    EnvDescriptor::new(
        "m2",
        m,
        format!("fast/slow paths; finish pays c = {c} before the end"),
    )
}

pub mod grid {
    pub const UP: usize = 0;
    pub const RIGHT: usize = 1;
    pub const DOWN: usize = 2;
    pub const LEFT: usize = 3;
}

/// Gridworld with start in the top-left cell and goal in the bottom-right.
///
/// Four actions (up, right, down, left). The intended move happens with
/// probability `1 − slip`; each perpendicular move with `slip/2`. Moves into
/// a wall stay put. Non-goal steps cost `step_cost`; the goal cell pays
/// `goal_reward` as it exits into an absorbing sink (state `width·height`).
pub fn make_gridworld(
    width: usize,
    height: usize,
    goal_reward: f64,
    step_cost: f64,
    slip: f64,
    gamma: f64,
) -> Result<EnvDescriptor> {
    if width == 0 || height == 0 || width * height > 64 {
        return Err(Error::Config(format!(
            "grid {width}x{height} must have 1..=64 cells"
        )));
    }
    if !(0.0..0.5).contains(&slip) {
        return Err(Error::Config(format!("slip {slip} must lie in [0, 0.5)")));
    }
    let cells = width * height;
    let goal = cells - 1;
    let sink = cells;
    let mut m = Mdp::new(cells + 1, 4, gamma);
    let step = |cell: usize, dir: usize| -> usize {
        let (x, y) = (cell % width, cell / width);
        let (nx, ny) = match dir {
            grid::UP => (x, y.saturating_sub(1)),
            grid::RIGHT => ((x + 1).min(width - 1), y),
            grid::DOWN => (x, (y + 1).min(height - 1)),
            _ => (x.saturating_sub(1), y),
        };
        ny * width + nx
    };
    for cell in 0..cells {
        for a in 0..4 {
            if cell == goal {
                m.set_deterministic(cell, a, sink, goal_reward);
                continue;
            }
            let moves = [
                (a, 1.0 - slip),
                ((a + 1) % 4, slip / 2.0),
                ((a + 3) % 4, slip / 2.0),
            ];
            for (dir, p) in moves {
                if p == 0.0 {
                    continue;
                }
                let next = step(cell, dir);
                m.set_transition(cell, a, next, m.transition(cell, a, next) + p);
                m.set_reward(cell, a, next, -step_cost);
            }
        }
    }
    m.set_terminal(sink);
    EnvDescriptor::new(
        "gridworld",
        m,
        format!("{width}x{height} grid, goal {goal_reward}, step cost {step_cost}, slip {slip}"),
    )
}

pub mod chain {
    pub const FORWARD: usize = 0;
    pub const BACK: usize = 1;
}

/// Linear chain of `n` states; forward into the last (terminal) state pays
/// `fwd_reward`, back from state 0 stays put.
pub fn make_chain(n: usize, fwd_reward: f64, gamma: f64) -> Result<EnvDescriptor> {
    if n < 2 {
        return Err(Error::Config(format!(
            "chain needs at least 2 states, got {n}"
        )));
    }
    let mut m = Mdp::new(n, 2, gamma);
    for s in 0..n - 1 {
        let r = if s + 1 == n - 1 { fwd_reward } else { 0.0 };
        m.set_deterministic(s, chain::FORWARD, s + 1, r);
        m.set_deterministic(s, chain::BACK, s.saturating_sub(1), 0.0);
    }
    m.set_terminal(n - 1);
    EnvDescriptor::new(
        "chain",
        m,
        format!("{n}-state chain, forward reward {fwd_reward}"),
    )
}

/// Random dense MDP, reproducible from `seed`.
///
/// Transition rows are normalised uniform draws; rewards are uniform in
/// `[−reward_scale, reward_scale]`; the start distribution is uniform.
pub fn make_random_mdp(
    n_states: usize,
    n_actions: usize,
    seed: u64,
    reward_scale: f64,
    gamma: f64,
) -> Result<EnvDescriptor> {
    if n_states == 0 || n_states > 16 || n_actions == 0 || n_actions > 4 {
        return Err(Error::Config(format!(
            "random MDP size {n_states}x{n_actions} outside 1..=16 states, 1..=4 actions"
        )));
    }
    let mut rng = seeded_rng(seed, 0);
    let mut m = Mdp::new(n_states, n_actions, gamma);
    for s in 0..n_states {
        for a in 0..n_actions {
            let raw: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            for (next, w) in raw.into_iter().enumerate() {
                m.set_transition(s, a, next, w / total);
                let r = if reward_scale == 0.0 {
                    0.0
                } else {
                    rng.gen_range(-reward_scale..=reward_scale)
                };
                m.set_reward(s, a, next, r);
            }
        }
    }
    m.set_initial_dist(vec![1.0 / n_states as f64; n_states]);
    EnvDescriptor::new(
        "random",
        m,
        format!("random {n_states}x{n_actions} MDP, seed {seed}, reward scale {reward_scale}"),
    )
}
