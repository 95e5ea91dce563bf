//! Exact dynamic programming on benign and poisoned MDPs.
//!
//! All infinite-horizon solvers iterate a Bellman operator until successive
//! iterates differ by less than `tol·(1−γ)/γ` in max norm, which bounds the
//! distance to the true fixed point by `tol`.

use std::ops::Index;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdp::{validate, Mdp, PolicyTable};
use crate::poison::PoisonedMdp;

const MAX_ITERATIONS: usize = 200_000;
/// Largest policy space [`brute_force_optimal`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;
/// Slack allowed when checking that one value table dominates another.
pub const DOMINANCE_TOL: f64 = 1e-9;
/// Default stopping tolerance for exact evaluations.
pub const EVAL_TOL: f64 = 1e-12;

/// State values `V[s]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(values: Vec<f64>) -> Self {
        ValueTable { values }
    }

    pub fn zeros(n: usize) -> Self {
        ValueTable {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Max-norm distance to `other` over the first `n` entries.
    pub fn max_diff_prefix(&self, other: &ValueTable, n: usize) -> f64 {
        self.values[..n]
            .iter()
            .zip(&other.values[..n])
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<usize> for ValueTable {
    type Output = f64;

    fn index(&self, s: usize) -> &f64 {
        &self.values[s]
    }
}

/// Action values `Q[s][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable {
            n_states,
            n_actions,
            q: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.q[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index maximiser of row `s`.
    pub fn argmax(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] > row[best] {
                best = a;
            }
        }
        best
    }
}

fn stop_threshold(gamma: f64, tol: f64) -> f64 {
    if gamma == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - gamma) / gamma
    }
}

/// Jacobi iteration of `backup` from zero until the contraction stopping rule fires.
fn fixed_point<F>(n: usize, gamma: f64, tol: f64, mut backup: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(tol > 0.0) {
        return Err(Error::Contract(format!("tolerance {tol} must be positive")));
    }
    let threshold = stop_threshold(gamma, tol);
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        backup(&v, &mut next);
        let diff = v
            .iter()
            .zip(&next)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        std::mem::swap(&mut v, &mut next);
        if !diff.is_finite() {
            return Err(Error::Numerical("value iterate diverged".into()));
        }
        if diff < threshold {
            return Ok(v);
        }
    }
    Err(Error::Numerical(format!(
        "no convergence within {MAX_ITERATIONS} sweeps"
    )))
}

fn check_discounted(mdp: &Mdp) -> Result<()> {
    validate(mdp).map_err(|v| Error::Contract(format!("MDP failed validation: {v}")))?;
    if !(mdp.gamma() < 1.0) {
        return Err(Error::Contract(
            "infinite-horizon evaluation needs gamma < 1".into(),
        ));
    }
    Ok(())
}

fn check_policy(policy: &PolicyTable, n_states: usize, n_actions: usize) -> Result<()> {
    if policy.n_states() != n_states || policy.n_actions() != n_actions {
        return Err(Error::Dimension(format!(
            "policy is {}x{}, expected {}x{}",
            policy.n_states(),
            policy.n_actions(),
            n_states,
            n_actions
        )));
    }
    Ok(())
}

/// `r_π(s)` and the state-to-state kernel `P_π` of a policy.
fn policy_kernel(mdp: &Mdp, policy: &PolicyTable) -> (Vec<f64>, Vec<f64>) {
    let n = mdp.n_states();
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n * n];
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            let t = mdp.transition_row(s, a);
            let rew = mdp.reward_row(s, a);
            for next in 0..n {
                r[s] += w * t[next] * rew[next];
                p[s * n + next] += w * t[next];
            }
        }
    }
    (r, p)
}

/// Value of `policy` in `mdp`, within `tol` of the exact fixed point.
pub fn policy_evaluation(mdp: &Mdp, policy: &PolicyTable, tol: f64) -> Result<ValueTable> {
    check_discounted(mdp)?;
    check_policy(policy, mdp.n_states(), mdp.n_actions())?;
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let (r, p) = policy_kernel(mdp, policy);
    let v = fixed_point(n, gamma, tol, |v, out| {
        for s in 0..n {
            let row = &p[s * n..(s + 1) * n];
            out[s] = r[s] + gamma * row.iter().zip(v).map(|(p, v)| p * v).sum::<f64>();
        }
    })?;
    Ok(ValueTable::new(v))
}

/// `Q[s][a] = Σ_{s'} T(s,a,s')·(R(s,a,s') + γ·V[s'])`.
pub fn q_from_values(mdp: &Mdp, values: &ValueTable) -> Result<QTable> {
    if values.len() != mdp.n_states() {
        return Err(Error::Dimension(format!(
            "value table has {} entries, MDP has {} states",
            values.len(),
            mdp.n_states()
        )));
    }
    Ok(q_from_slice(mdp, values.as_slice()))
}

fn q_from_slice(mdp: &Mdp, v: &[f64]) -> QTable {
    let gamma = mdp.gamma();
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let t = mdp.transition_row(s, a);
            let r = mdp.reward_row(s, a);
            let mut acc = 0.0;
            for next in 0..mdp.n_states() {
                if t[next] != 0.0 {
                    acc += t[next] * (r[next] + gamma * v[next]);
                }
            }
            q.set(s, a, acc);
        }
    }
    q
}

/// Greedy deterministic policy; actions within a relative `1e-12` of the
/// row maximum count as tied and the lowest index wins.
pub fn greedy_policy(q: &QTable) -> PolicyTable {
    let actions: Vec<usize> = (0..q.n_states())
        .map(|s| {
            let best = q.max(s);
            let slack = 1e-12 * best.abs().max(1.0);
            q.row(s)
                .iter()
                .position(|&x| x >= best - slack)
                .unwrap_or(0)
        })
        .collect();
    PolicyTable::deterministic(&actions, q.n_actions())
}

/// Optimal values within `tol` and a greedy policy with respect to them.
pub fn value_iteration(mdp: &Mdp, tol: f64) -> Result<(ValueTable, PolicyTable)> {
    check_discounted(mdp)?;
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let gamma = mdp.gamma();
    let v = fixed_point(n, gamma, tol, |v, out| {
        for (s, slot) in out.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let t = mdp.transition_row(s, a);
                let r = mdp.reward_row(s, a);
                let mut acc = 0.0;
                for next in 0..n {
                    if t[next] != 0.0 {
                        acc += t[next] * (r[next] + gamma * v[next]);
                    }
                }
                best = best.max(acc);
            }
            *slot = best;
        }
    })?;
    let policy = greedy_policy(&q_from_slice(mdp, &v));
    Ok((ValueTable::new(v), policy))
}

/// Backward induction for `t = 1..=horizon`; element `t−1` holds `V_t`.
///
/// The boundary is `V_{H+1} ≡ 0`.
pub fn finite_horizon_evaluation(
    mdp: &Mdp,
    policy: &PolicyTable,
    horizon: usize,
) -> Result<Vec<ValueTable>> {
    validate(mdp).map_err(|v| Error::Contract(format!("MDP failed validation: {v}")))?;
    check_policy(policy, mdp.n_states(), mdp.n_actions())?;
    if horizon == 0 {
        return Err(Error::Contract("horizon must be at least 1".into()));
    }
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let (r, p) = policy_kernel(mdp, policy);
    let mut tables = Vec::with_capacity(horizon);
    let mut later = vec![0.0; n];
    for _ in 0..horizon {
        let now: Vec<f64> = (0..n)
            .map(|s| {
                let row = &p[s * n..(s + 1) * n];
                r[s] + gamma * row.iter().zip(&later).map(|(p, v)| p * v).sum::<f64>()
            })
            .collect();
        tables.push(ValueTable::new(now.clone()));
        later = now;
    }
    tables.reverse();
    Ok(tables)
}

/// Dense `T'` for a poisoned MDP, row-major `[(s·A + a)·2S + s']`.
fn poisoned_kernel(pm: &PoisonedMdp) -> Vec<f64> {
    let n = pm.n_states();
    let na = pm.n_actions();
    let mut t = vec![0.0; n * na * n];
    for s in 0..n {
        for a in 0..na {
            for next in 0..n {
                t[(s * na + a) * n + next] = pm.transition_unchecked(s, a, next);
            }
        }
    }
    t
}

/// One Bellman expectation backup in `M'`, with the value-dependent reward
/// evaluated at the current iterate `v`.
fn poisoned_backup(
    pm: &PoisonedMdp,
    kernel: &[f64],
    policy: &PolicyTable,
    v_reward: &[f64],
    v_next: &[f64],
    out: &mut [f64],
) {
    let n = pm.n_states();
    let na = pm.n_actions();
    let gamma = pm.gamma();
    for s in 0..n {
        let mut total = 0.0;
        for a in 0..na {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            let row = &kernel[(s * na + a) * n..(s * na + a + 1) * n];
            let mut acc = 0.0;
            for next in 0..n {
                if row[next] != 0.0 {
                    acc += row[next]
                        * (pm.reward_unchecked(s, a, next, v_reward) + gamma * v_next[next]);
                }
            }
            total += w * acc;
        }
        out[s] = total;
    }
}

/// Value of `policy` (over `S ∪ S_p`) in the adversarial MDP.
///
/// The reward references the value being computed, so each sweep plugs the
/// current iterate into the reward before backing up. On benign states the
/// correction terms cancel the triggered continuation and the sweep reduces
/// to the benign operator; on triggered states it is constant.
pub fn poisoned_policy_evaluation(
    pm: &PoisonedMdp,
    policy: &PolicyTable,
    tol: f64,
) -> Result<ValueTable> {
    check_policy(policy, pm.n_states(), pm.n_actions())?;
    let kernel = poisoned_kernel(pm);
    let v = fixed_point(pm.n_states(), pm.gamma(), tol, |v, out| {
        poisoned_backup(pm, &kernel, policy, v, v, out)
    })?;
    Ok(ValueTable::new(v))
}

/// Finite-horizon counterpart of [`poisoned_policy_evaluation`].
///
/// At step `t` the reward correction uses `V_{t+1}`, the same table the
/// continuation term uses.
pub fn poisoned_finite_horizon_evaluation(
    pm: &PoisonedMdp,
    policy: &PolicyTable,
    horizon: usize,
) -> Result<Vec<ValueTable>> {
    check_policy(policy, pm.n_states(), pm.n_actions())?;
    if horizon == 0 {
        return Err(Error::Contract("horizon must be at least 1".into()));
    }
    let kernel = poisoned_kernel(pm);
    let n = pm.n_states();
    let mut later = vec![0.0; n];
    let mut tables = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut now = vec![0.0; n];
        poisoned_backup(pm, &kernel, policy, &later, &later, &mut now);
        tables.push(ValueTable::new(now.clone()));
        later = now;
    }
    tables.reverse();
    Ok(tables)
}

fn decode_policy(mut index: u128, n_states: usize, n_actions: usize) -> PolicyTable {
    let mut actions = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        actions.push((index % n_actions as u128) as usize);
        index /= n_actions as u128;
    }
    PolicyTable::deterministic(&actions, n_actions)
}

/// Enumerates every deterministic policy over `S ∪ S_p` and returns one whose
/// value is maximal at every state simultaneously.
///
/// Fails with [`Error::NoDominatingPolicy`] if no enumerated policy dominates,
/// and with [`Error::Falsified`] if the dominating policy does not play the
/// target action in every triggered state.
pub fn brute_force_optimal(pm: &PoisonedMdp) -> Result<(PolicyTable, ValueTable)> {
    let n = pm.n_states();
    let na = pm.n_actions();
    let count = (na as u128)
        .checked_pow(n as u32)
        .filter(|&c| c <= ENUMERATION_LIMIT)
        .ok_or(Error::Capacity {
            count: (na as u128).checked_pow(n as u32).unwrap_or(u128::MAX),
            limit: ENUMERATION_LIMIT,
        })?;
    let evaluate = |k: u128| -> Result<Vec<f64>> {
        let pi = decode_policy(k, n, na);
        Ok(poisoned_policy_evaluation(pm, &pi, EVAL_TOL)?.into_vec())
    };

    let best = (0..count as u64)
        .into_par_iter()
        .map(|k| evaluate(k as u128))
        .try_reduce(
            || vec![f64::NEG_INFINITY; n],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect()),
        )?;

    let winner = (0..count as u64).into_par_iter().find_first(|&k| {
        evaluate(k as u128)
            .map(|v| v.iter().zip(&best).all(|(x, b)| *x >= b - DOMINANCE_TOL))
            .unwrap_or(false)
    });
    let Some(k) = winner else {
        // report where the policy that is best at state 0 falls short
        let anchor = (0..count as u64)
            .into_par_iter()
            .find_first(|&k| {
                evaluate(k as u128)
                    .map(|v| v[0] >= best[0] - DOMINANCE_TOL)
                    .unwrap_or(false)
            })
            .unwrap_or(0);
        let v = evaluate(anchor as u128)?;
        let state = (0..n)
            .find(|&s| v[s] < best[s] - DOMINANCE_TOL)
            .unwrap_or(0);
        return Err(Error::NoDominatingPolicy { state });
    };

    let policy = decode_policy(k as u128, n, na);
    let values = ValueTable::new(evaluate(k as u128)?);
    let scheme = pm.scheme();
    let target = pm.spec().target_action;
    for sp in scheme.n_benign()..n {
        if policy.prob(sp, target) != 1.0 {
            return Err(Error::Falsified(format!(
                "dominating policy plays {} instead of the target action in triggered state {sp}",
                policy.greedy_actions()[sp]
            )));
        }
    }
    Ok((policy, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_m1, make_random_mdp};
    use crate::poison::{build_static_poisoned_mdp_with_rate, AttackMode, AttackSpec};

    fn single_state(rewards: &[f64], gamma: f64) -> Mdp {
        let mut m = Mdp::new(1, rewards.len(), gamma);
        for (a, &r) in rewards.iter().enumerate() {
            m.set_deterministic(0, a, 0, r);
        }
        m
    }

    #[test]
    fn geometric_series() {
        let m = single_state(&[1.0], 0.5);
        let v = policy_evaluation(&m, &PolicyTable::uniform(1, 1), 1e-12).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let env = make_random_mdp(5, 3, 4, 0.0, 0.9).unwrap();
        let v = policy_evaluation(&env.mdp, &PolicyTable::uniform(5, 3), 1e-10).unwrap();
        assert!(v.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_step_to_terminal() {
        let mut m = Mdp::new(2, 1, 0.9);
        m.set_deterministic(0, 0, 1, 1.0);
        m.set_terminal(1);
        let v = policy_evaluation(&m, &PolicyTable::uniform(2, 1), 1e-12).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn evaluation_rejects_invalid_mdp() {
        let mut m = single_state(&[1.0], 0.5);
        m.set_transition(0, 0, 0, 0.9);
        assert!(matches!(
            policy_evaluation(&m, &PolicyTable::uniform(1, 1), 1e-9),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn q_examples() {
        let mut m = Mdp::new(3, 2, 0.9);
        m.set_deterministic(0, 0, 1, 2.0);
        m.set_deterministic(0, 1, 2, -1.0);
        m.set_deterministic(1, 0, 2, 0.5);
        m.set_deterministic(1, 1, 0, 0.25);
        m.set_terminal(2);
        let q = q_from_values(&m, &ValueTable::zeros(3)).unwrap();
        assert_eq!(q.row(0), &[2.0, -1.0]);
        assert_eq!(q.row(1), &[0.5, 0.25]);
        let v = ValueTable::new(vec![3.0, 4.0, 0.0]);
        let q = q_from_values(&m, &v).unwrap();
        assert_eq!(q.row(2), &[0.0, 0.0]);
        assert!(q_from_values(&m, &ValueTable::zeros(2)).is_err());
    }

    #[test]
    fn m1_static_q_values() {
        // poisoned M1 analysed with β = 1, γ = 0.75, c = 1
        let env = make_m1(1.0, 0.75).unwrap();
        let spec = AttackSpec::new(AttackMode::StaticInner, 0.0, 1.0, 1.0, 0);
        let sm = build_static_poisoned_mdp_with_rate(&env.mdp, env.scheme, &spec, 1.0).unwrap();
        let (v, _) = value_iteration(&sm, 1e-13).unwrap();
        let q = q_from_values(&sm, &v).unwrap();
        let start_p = env.scheme.apply_trigger(0).unwrap();
        assert!((q.get(start_p, 1) - 2.0).abs() < 1e-10);
        assert!((q.get(start_p, 0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn value_iteration_single_state() {
        let m = single_state(&[0.0, 1.0], 0.5);
        let (v, pi) = value_iteration(&m, 1e-12).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
        assert_eq!(pi.greedy_actions(), vec![1]);
    }

    #[test]
    fn value_iteration_terminal_only() {
        let mut m = Mdp::new(2, 2, 0.9);
        m.set_terminal(0);
        m.set_terminal(1);
        let (v, pi) = value_iteration(&m, 1e-12).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0]);
        // exact ties resolve to the lowest action
        assert_eq!(pi.greedy_actions(), vec![0, 0]);
    }

    #[test]
    fn value_iteration_self_consistent() {
        // 4-state corridor with a noisy step
        let mut m = Mdp::new(4, 2, 0.9);
        for s in 0..3 {
            m.set_transition(s, 0, s + 1, 0.8);
            m.set_transition(s, 0, s, 0.2);
            m.set_deterministic(s, 1, s.saturating_sub(1), 0.0);
        }
        m.set_reward(2, 0, 3, 1.0);
        m.set_terminal(3);
        let tol = 1e-10;
        let (v, pi) = value_iteration(&m, tol).unwrap();
        let ve = policy_evaluation(&m, &pi, tol).unwrap();
        assert!(v.max_diff_prefix(&ve, 4) <= 2.0 * tol);
    }

    #[test]
    fn finite_horizon_boundary_and_truncation() {
        let env = make_random_mdp(4, 2, 11, 1.0, 0.8).unwrap();
        let pi = PolicyTable::uniform(4, 2);
        let one = finite_horizon_evaluation(&env.mdp, &pi, 1).unwrap();
        for (s, &value) in one[0].as_slice().iter().enumerate() {
            let mut expected = 0.0;
            for a in 0..2 {
                for n in 0..4 {
                    expected += 0.5 * env.mdp.transition(s, a, n) * env.mdp.reward(s, a, n);
                }
            }
            assert!((value - expected).abs() < 1e-14);
        }
        let h = 60;
        let tables = finite_horizon_evaluation(&env.mdp, &pi, h).unwrap();
        let inf = policy_evaluation(&env.mdp, &pi, 1e-13).unwrap();
        let bound = 0.8f64.powi(h as i32) * env.mdp.max_abs_reward() / 0.2;
        assert!(tables[0].max_diff_prefix(&inf, 4) <= bound + 1e-12);
        let zero = make_random_mdp(4, 2, 11, 0.0, 0.8).unwrap();
        let z = finite_horizon_evaluation(&zero.mdp, &pi, 5).unwrap();
        assert!(z.iter().all(|t| t.as_slice().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn triggered_value_equals_target_probability() {
        let env = make_random_mdp(3, 2, 5, 1.0, 0.9).unwrap();
        let pm = PoisonedMdp::new(
            env.mdp.clone(),
            AttackSpec::new(AttackMode::SleeperNetsOuter, 0.4, 1.0, 1.0, 0),
        )
        .unwrap();
        let mut rows = vec![vec![0.5, 0.5]; 3];
        rows.extend(vec![vec![0.3, 0.7]; 3]);
        let pi = PolicyTable::from_rows(rows).unwrap();
        let v = poisoned_policy_evaluation(&pm, &pi, 1e-12).unwrap();
        for sp in 3..6 {
            assert!((v[sp] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn poisoned_with_zero_beta_matches_benign() {
        let env = make_random_mdp(4, 3, 9, 2.0, 0.85).unwrap();
        let pm = PoisonedMdp::new(
            env.mdp.clone(),
            AttackSpec::new(AttackMode::SleeperNetsOuter, 0.0, 1.0, 1.0, 1),
        )
        .unwrap();
        let pi = PolicyTable::uniform(8, 3);
        let v = poisoned_policy_evaluation(&pm, &pi, 1e-12).unwrap();
        let vb = policy_evaluation(&env.mdp, &PolicyTable::uniform(4, 3), 1e-12).unwrap();
        assert!(v.max_diff_prefix(&vb, 4) < 1e-11);
    }

    #[test]
    fn brute_force_small() {
        let env = make_random_mdp(2, 2, 3, 1.0, 0.9).unwrap();
        let pm = PoisonedMdp::new(
            env.mdp.clone(),
            AttackSpec::new(AttackMode::SleeperNetsOuter, 0.3, 1.0, 1.0, 1),
        )
        .unwrap();
        let (pi, v) = brute_force_optimal(&pm).unwrap();
        for sp in 2..4 {
            assert_eq!(pi.prob(sp, 1), 1.0);
            assert!((v[sp] - 1.0).abs() < 1e-9);
        }
        let (vstar, _) = value_iteration(&env.mdp, 1e-12).unwrap();
        assert!(v.max_diff_prefix(&vstar, 2) < 1e-8);
    }

    #[test]
    fn brute_force_trivial_and_capacity() {
        let m = single_state(&[1.0], 0.5);
        let pm = PoisonedMdp::new(
            m,
            AttackSpec::new(AttackMode::SleeperNetsOuter, 0.5, 1.0, 1.0, 0),
        )
        .unwrap();
        let (pi, _) = brute_force_optimal(&pm).unwrap();
        assert_eq!(pi.greedy_actions(), vec![0, 0]);

        let env = make_random_mdp(6, 4, 1, 1.0, 0.9).unwrap();
        let pm = PoisonedMdp::new(
            env.mdp,
            AttackSpec::new(AttackMode::SleeperNetsOuter, 0.5, 1.0, 1.0, 0),
        )
        .unwrap();
        assert!(matches!(
            brute_force_optimal(&pm),
            Err(Error::Capacity { .. })
        ));
    }
}
