//! Trigger bijection, attack parameters and the two poisoned MDP models.
//!
//! Poisoned states are realised as an index offset: benign state `s` maps to
//! `s + |S|`, so `S_p = {|S|, …, 2|S|−1}` is disjoint from `S` and the trigger
//! is invertible by construction.
//!
//! [`PoisonedMdp`] is the adversarial MDP with value-dependent rewards. Its
//! transitions mix benign and triggered successors with weights `1−β` and `β`:
//!
//! | source | successor | probability                    |
//! |--------|-----------|--------------------------------|
//! | `s`    | `s'`      | `(1−β)·T(s,a,s')`              |
//! | `s`    | `δ(s')`   | `β·T(s,a,s')`                  |
//! | `δ(s)` | `δ(s')`   | `β·T(s,a,s')`                  |
//! | `δ(s)` | `s'`      | `(1−β)·T(s,a,s')`              |
//!
//! Rewards leave benign-to-benign steps alone, correct benign-to-triggered
//! steps by `−γV(δ(s')) + γV(s')`, and pay `𝟙[a = a⁺] − γV(s')` for every
//! step taken from a triggered state.

use crate::dp::ValueTable;
use crate::error::{Error, Result};
use crate::mdp::{validate, Mdp};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TriggerScheme {
    n_benign: usize,
}

impl TriggerScheme {
    pub fn new(n_benign: usize) -> Self {
        TriggerScheme { n_benign }
    }

    pub fn n_benign(&self) -> usize {
        self.n_benign
    }

    /// Size of `S ∪ S_p`.
    pub fn n_total(&self) -> usize {
        2 * self.n_benign
    }

    pub fn is_poisoned(&self, s: usize) -> bool {
        s >= self.n_benign
    }

    /// `δ(s)`.
    pub fn apply_trigger(&self, s: usize) -> Result<usize> {
        if s >= self.n_benign {
            return Err(Error::Index {
                index: s,
                limit: self.n_benign,
            });
        }
        Ok(s + self.n_benign)
    }

    /// `δ⁻¹(s_p)`.
    pub fn invert_trigger(&self, sp: usize) -> Result<usize> {
        if sp < self.n_benign || sp >= self.n_total() {
            return Err(Error::Index {
                index: sp,
                limit: self.n_total(),
            });
        }
        Ok(sp - self.n_benign)
    }

    /// Benign state underlying any index in `S ∪ S_p`.
    #[inline]
    pub fn base(&self, s: usize) -> usize {
        if s >= self.n_benign {
            s - self.n_benign
        } else {
            s
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackMode {
    None,
    StaticInner,
    SleeperNetsOuter,
}

impl AttackMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttackMode::None => "none",
            AttackMode::StaticInner => "static_inner",
            AttackMode::SleeperNetsOuter => "sleepernets_outer",
        }
    }
}

impl std::str::FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttackMode::None),
            "static_inner" => Ok(AttackMode::StaticInner),
            "sleepernets_outer" => Ok(AttackMode::SleeperNetsOuter),
            other => Err(Error::Config(format!("unknown attack mode '{other}'"))),
        }
    }
}

/// Adversary parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackSpec {
    /// Poisoning budget, the fraction of observations the adversary may poison.
    pub beta: f64,
    /// Weight on the successor-value correction in outer-loop poisoning.
    pub alpha: f64,
    /// Magnitude of the target-action indicator reward.
    pub c: f64,
    pub target_action: usize,
    pub mode: AttackMode,
    /// Poisoning is skipped while the measured ASR is at or above this.
    pub anneal_threshold: f64,
    /// Whether the annealing gate is consulted at all.
    pub anneal: bool,
    /// Carry the fractional part of `β·|H|` across episodes instead of
    /// flooring it away per episode.
    pub accumulate_budget: bool,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            beta: 0.0,
            alpha: 1.0,
            c: 1.0,
            target_action: 0,
            mode: AttackMode::None,
            anneal_threshold: 1.0,
            anneal: true,
            accumulate_budget: false,
        }
    }
}

impl AttackSpec {
    pub fn new(mode: AttackMode, beta: f64, alpha: f64, c: f64, target_action: usize) -> Self {
        AttackSpec {
            beta,
            alpha,
            c,
            target_action,
            mode,
            ..AttackSpec::default()
        }
    }

    pub fn check(&self, n_actions: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config(format!(
                "beta {} must lie in [0,1)",
                self.beta
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!(
                "alpha {} must be non-negative",
                self.alpha
            )));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::Config(format!("c {} must be non-negative", self.c)));
        }
        if self.target_action >= n_actions {
            return Err(Error::Config(format!(
                "target action {} out of range for {n_actions} actions",
                self.target_action
            )));
        }
        if !(self.anneal_threshold > 0.0 && self.anneal_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "anneal threshold {} must lie in (0,1]",
                self.anneal_threshold
            )));
        }
        Ok(())
    }
}

/// Fixed `±c` reward paid at a poisoned step.
pub fn static_poisoned_reward(spec: &AttackSpec, action: usize) -> f64 {
    if action == spec.target_action {
        spec.c
    } else {
        -spec.c
    }
}

/// The adversarial MDP over `S ∪ S_p` with value-dependent rewards.
#[derive(Clone, Debug)]
pub struct PoisonedMdp {
    benign: Mdp,
    scheme: TriggerScheme,
    spec: AttackSpec,
}

impl PoisonedMdp {
    pub fn new(benign: Mdp, spec: AttackSpec) -> Result<Self> {
        validate(&benign)?;
        spec.check(benign.n_actions())?;
        let scheme = TriggerScheme::new(benign.n_states());
        Ok(PoisonedMdp {
            benign,
            scheme,
            spec,
        })
    }

    pub fn benign(&self) -> &Mdp {
        &self.benign
    }

    pub fn scheme(&self) -> TriggerScheme {
        self.scheme
    }

    pub fn spec(&self) -> &AttackSpec {
        &self.spec
    }

    pub fn n_states(&self) -> usize {
        self.scheme.n_total()
    }

    pub fn n_actions(&self) -> usize {
        self.benign.n_actions()
    }

    pub fn gamma(&self) -> f64 {
        self.benign.gamma()
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states() {
            return Err(Error::Index {
                index: s,
                limit: self.n_states(),
            });
        }
        Ok(())
    }

    /// `T'(s, a, s')`.
    pub fn poisoned_transition(&self, s: usize, a: usize, next: usize) -> Result<f64> {
        self.check_state(s)?;
        self.check_state(next)?;
        if a >= self.n_actions() {
            return Err(Error::Index {
                index: a,
                limit: self.n_actions(),
            });
        }
        Ok(self.transition_unchecked(s, a, next))
    }

    #[inline]
    pub(crate) fn transition_unchecked(&self, s: usize, a: usize, next: usize) -> f64 {
        let beta = self.spec.beta;
        let p = self
            .benign
            .transition(self.scheme.base(s), a, self.scheme.base(next));
        if self.scheme.is_poisoned(next) {
            beta * p
        } else {
            (1.0 - beta) * p
        }
    }

    /// `R'(s, a, s')` with `values` standing in for the policy's value in `M'`.
    pub fn dynamic_poisoned_reward(
        &self,
        s: usize,
        a: usize,
        next: usize,
        values: &ValueTable,
    ) -> Result<f64> {
        self.check_state(s)?;
        self.check_state(next)?;
        if values.len() != self.n_states() {
            return Err(Error::Dimension(format!(
                "value table has {} entries, poisoned MDP has {} states",
                values.len(),
                self.n_states()
            )));
        }
        Ok(self.reward_unchecked(s, a, next, values.as_slice()))
    }

    #[inline]
    pub(crate) fn reward_unchecked(&self, s: usize, a: usize, next: usize, values: &[f64]) -> f64 {
        let gamma = self.gamma();
        if self.scheme.is_poisoned(s) {
            let hit = if a == self.spec.target_action {
                1.0
            } else {
                0.0
            };
            return hit - gamma * values[next];
        }
        if self.scheme.is_poisoned(next) {
            let base_next = next - self.scheme.n_benign();
            return self.benign.reward(s, a, base_next) - gamma * values[next]
                + gamma * values[base_next];
        }
        self.benign.reward(s, a, next)
    }
}

/// Materialises static reward poisoning as an ordinary MDP over `S ∪ S_p`.
///
/// Transitions follow the `β`-mixing of [`PoisonedMdp`]; steps from a
/// triggered state pay [`static_poisoned_reward`], benign-sourced steps keep
/// the benign reward of the underlying transition. Terminal states and their
/// triggered copies are absorbing with zero reward.
pub fn build_static_poisoned_mdp(
    mdp: &Mdp,
    scheme: TriggerScheme,
    spec: &AttackSpec,
) -> Result<Mdp> {
    spec.check(mdp.n_actions())?;
    build_static_poisoned_mdp_with_rate(mdp, scheme, spec, spec.beta)
}

/// [`build_static_poisoned_mdp`] with an explicit rate `β ∈ [0, 1]`.
///
/// `β = 1` is outside an attack budget but is how the first counterexample
/// is analysed: once triggered, the agent stays in `S_p`.
pub fn build_static_poisoned_mdp_with_rate(
    mdp: &Mdp,
    scheme: TriggerScheme,
    spec: &AttackSpec,
    beta: f64,
) -> Result<Mdp> {
    validate(mdp)?;
    if scheme.n_benign() != mdp.n_states() {
        return Err(Error::Dimension(format!(
            "trigger scheme covers {} states, MDP has {}",
            scheme.n_benign(),
            mdp.n_states()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Config(format!("rate {beta} outside [0,1]")));
    }
    if spec.target_action >= mdp.n_actions() {
        return Err(Error::Index {
            index: spec.target_action,
            limit: mdp.n_actions(),
        });
    }
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut out = Mdp::new(2 * n, na, mdp.gamma());
    out.set_horizon(mdp.horizon());
    for s in 0..2 * n {
        let base = scheme.base(s);
        if mdp.is_terminal(base) {
            out.set_terminal(s);
            continue;
        }
        let poisoned_src = scheme.is_poisoned(s);
        for a in 0..na {
            for next in 0..n {
                let p = mdp.transition(base, a, next);
                if p == 0.0 {
                    continue;
                }
                let r_benign = mdp.reward(base, a, next);
                let r = if poisoned_src {
                    static_poisoned_reward(spec, a)
                } else {
                    r_benign
                };
                out.set_transition(s, a, next, (1.0 - beta) * p);
                out.set_reward(s, a, next, r);
                out.set_transition(s, a, next + n, beta * p);
                out.set_reward(s, a, next + n, r);
            }
        }
    }
    let mut init = vec![0.0; 2 * n];
    for (s, &p) in mdp.initial_dist().iter().enumerate() {
        init[s] = (1.0 - beta) * p;
        init[s + n] = beta * p;
    }
    out.set_initial_dist(init);
    validate(&out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_random_mdp;

    fn det_two_state() -> Mdp {
        let mut m = Mdp::new(2, 2, 0.9);
        m.set_deterministic(0, 0, 1, 1.0);
        m.set_deterministic(0, 1, 0, 0.5);
        m.set_deterministic(1, 0, 0, 0.0);
        m.set_deterministic(1, 1, 1, 2.0);
        m
    }

    #[test]
    fn trigger_offset_and_inverse() {
        let scheme = TriggerScheme::new(4);
        assert_eq!(scheme.apply_trigger(2).unwrap(), 6);
        for s in 0..4 {
            assert_eq!(
                scheme
                    .invert_trigger(scheme.apply_trigger(s).unwrap())
                    .unwrap(),
                s
            );
        }
        assert!(matches!(
            scheme.apply_trigger(5),
            Err(Error::Index { index: 5, limit: 4 })
        ));
        assert!(scheme.invert_trigger(3).is_err());
    }

    #[test]
    fn zero_beta_transitions_equal_benign() {
        let m = det_two_state();
        let pm = PoisonedMdp::new(
            m.clone(),
            AttackSpec::new(AttackMode::SleeperNetsOuter, 0.0, 1.0, 1.0, 0),
        )
        .unwrap();
        for s in 0..2 {
            for a in 0..2 {
                for n in 0..2 {
                    assert_eq!(
                        pm.poisoned_transition(s, a, n).unwrap(),
                        m.transition(s, a, n)
                    );
                    assert_eq!(pm.poisoned_transition(s, a, n + 2).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn half_beta_splits_deterministic_move() {
        let pm = PoisonedMdp::new(
            det_two_state(),
            AttackSpec::new(AttackMode::SleeperNetsOuter, 0.5, 1.0, 1.0, 0),
        )
        .unwrap();
        assert_eq!(pm.poisoned_transition(0, 0, 1).unwrap(), 0.5);
        assert_eq!(pm.poisoned_transition(0, 0, 3).unwrap(), 0.5);
        assert_eq!(pm.poisoned_transition(2, 0, 3).unwrap(), 0.5);
        assert_eq!(pm.poisoned_transition(2, 0, 1).unwrap(), 0.5);
        assert!(pm.poisoned_transition(4, 0, 0).is_err());
    }

    #[test]
    fn poisoned_rows_sum_to_one() {
        for seed in 0..20 {
            let env = make_random_mdp(1 + seed as usize % 8, 1 + seed as usize % 4, seed, 1.0, 0.9)
                .unwrap();
            for &beta in &[0.0, 0.1, 0.5, 0.99] {
                let pm = PoisonedMdp::new(
                    env.mdp.clone(),
                    AttackSpec::new(AttackMode::SleeperNetsOuter, beta, 1.0, 1.0, 0),
                )
                .unwrap();
                for s in 0..pm.n_states() {
                    for a in 0..pm.n_actions() {
                        let sum: f64 = (0..pm.n_states())
                            .map(|n| pm.poisoned_transition(s, a, n).unwrap())
                            .sum();
                        assert!(
                            (sum - 1.0).abs() < 1e-12,
                            "seed {seed} beta {beta} sum {sum}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn static_reward_sign_rule() {
        let spec = AttackSpec::new(AttackMode::StaticInner, 0.1, 1.0, 40.0, 2);
        assert_eq!(static_poisoned_reward(&spec, 2), 40.0);
        assert_eq!(static_poisoned_reward(&spec, 0), -40.0);
        let zero = AttackSpec { c: 0.0, ..spec };
        assert_eq!(static_poisoned_reward(&zero, 2), 0.0);
        assert_eq!(static_poisoned_reward(&zero, 1).abs(), 0.0);
    }

    #[test]
    fn dynamic_reward_branches() {
        let mut m = Mdp::new(2, 2, 0.9);
        m.set_deterministic(0, 0, 1, 3.0);
        m.set_deterministic(0, 1, 1, 3.0);
        m.set_terminal(1);
        let pm = PoisonedMdp::new(
            m,
            AttackSpec::new(AttackMode::SleeperNetsOuter, 0.3, 1.0, 1.0, 0),
        )
        .unwrap();
        // poisoned source, target action, terminal successor with zero value
        let v = ValueTable::new(vec![0.0, 0.0, 0.0, 0.0]);
        assert_eq!(pm.dynamic_poisoned_reward(2, 0, 1, &v).unwrap(), 1.0);
        // poisoned source, other action, successor value 0.5
        let v = ValueTable::new(vec![0.0, 0.5, 0.0, 0.0]);
        assert!((pm.dynamic_poisoned_reward(2, 1, 1, &v).unwrap() - -0.45).abs() < 1e-15);
        // benign to benign ignores values
        let v = ValueTable::new(vec![7.0, -2.0, 4.0, 9.0]);
        assert_eq!(pm.dynamic_poisoned_reward(0, 0, 1, &v).unwrap(), 3.0);
        // benign to poisoned: R(s,a,δ⁻¹(s')) − γV(s') + γV(δ⁻¹(s'))
        let expected = 3.0 - 0.9 * 9.0 + 0.9 * -2.0;
        assert_eq!(pm.dynamic_poisoned_reward(0, 0, 3, &v).unwrap(), expected);
        let short = ValueTable::new(vec![0.0; 3]);
        assert!(matches!(
            pm.dynamic_poisoned_reward(0, 0, 1, &short),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn static_mdp_shapes_and_rewards() {
        let m = det_two_state();
        let spec = AttackSpec::new(AttackMode::StaticInner, 0.25, 1.0, 2.0, 1);
        let sm = build_static_poisoned_mdp(&m, TriggerScheme::new(2), &spec).unwrap();
        assert_eq!(sm.n_states(), 4);
        assert_eq!(sm.transition(0, 0, 1), 0.75);
        assert_eq!(sm.transition(0, 0, 3), 0.25);
        // benign source keeps R(s,a,δ⁻¹(s')) on the triggered successor
        assert_eq!(sm.reward(0, 0, 3), 1.0);
        // triggered source pays ±c
        assert_eq!(sm.reward(2, 1, 2), 2.0);
        assert_eq!(sm.reward(2, 0, 3), -2.0);
        assert!((sm.initial_dist()[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn static_mdp_rejects_bad_inputs() {
        let m = det_two_state();
        let spec = AttackSpec::new(AttackMode::StaticInner, 0.25, 1.0, 2.0, 1);
        assert!(build_static_poisoned_mdp(&m, TriggerScheme::new(3), &spec).is_err());
        let mut bad = m.clone();
        bad.set_transition(0, 0, 0, 0.5);
        assert!(matches!(
            build_static_poisoned_mdp(&bad, TriggerScheme::new(2), &spec),
            Err(Error::InvalidMdp(_))
        ));
    }

    #[test]
    fn spec_checks() {
        assert!(AttackSpec::new(AttackMode::None, 1.0, 1.0, 1.0, 0)
            .check(2)
            .is_err());
        assert!(AttackSpec::new(AttackMode::None, 0.5, 1.0, 1.0, 2)
            .check(2)
            .is_err());
        assert!(AttackSpec::new(AttackMode::None, 0.5, 1.0, 1.0, 1)
            .check(2)
            .is_ok());
        assert_eq!(
            "sleepernets_outer".parse::<AttackMode>().unwrap(),
            AttackMode::SleeperNetsOuter
        );
        assert!("bogus".parse::<AttackMode>().is_err());
    }
}
