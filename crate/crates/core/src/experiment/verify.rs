//! Numerical verification of the adversarial-MDP guarantees and of the two
//! counterexamples where static poisoning fails.

use std::fmt;

use rand::Rng;

use crate::dp::{
    brute_force_optimal, poisoned_finite_horizon_evaluation, poisoned_policy_evaluation,
    q_from_values, value_iteration, EVAL_TOL,
};
use crate::envs::{m1, m2, make_m1, make_m2, make_random_mdp};
use crate::error::{Error, Result};
use crate::mdp::PolicyTable;
use crate::poison::{build_static_poisoned_mdp_with_rate, AttackMode, AttackSpec, PoisonedMdp};
use crate::seeded_rng;

/// Tolerance for the value identities on triggered and benign states.
pub const LEMMA_TOL: f64 = 1e-9;
/// Tolerance for optimal-policy comparisons.
pub const THEOREM_TOL: f64 = 1e-8;
/// Bisection width for counterexample thresholds.
pub const THRESHOLD_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Lemmas,
    Theorems,
    Counterexamples,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemmas" => Ok(Suite::Lemmas),
            "theorems" => Ok(Suite::Theorems),
            "counterexamples" => Ok(Suite::Counterexamples),
            "all" => Ok(Suite::All),
            other => Err(Error::Config(format!(
                "unknown verification suite '{other}'"
            ))),
        }
    }
}

/// One row of a verification report: the worst observed value of a check
/// against its tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRow {
    fn residual(suite: &'static str, check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        CheckRow {
            suite,
            check: check.into(),
            value,
            tolerance,
            passed: value < tolerance,
        }
    }

    fn flag(suite: &'static str, check: impl Into<String>, passed: bool) -> Self {
        CheckRow {
            suite,
            check: check.into(),
            value: if passed { 0.0 } else { 1.0 },
            tolerance: 0.5,
            passed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerificationReport {
    pub rows: Vec<CheckRow>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .rows
            .iter()
            .map(|r| r.check.len())
            .max()
            .unwrap_or(5)
            .max(5);
        writeln!(
            f,
            "{:<16} {:<width$} {:>12} {:>10}  result",
            "suite", "check", "value", "tol"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<16} {:<width$} {:>12.3e} {:>10.1e}  {}",
                r.suite,
                r.check,
                r.value,
                r.tolerance,
                if r.passed { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// A random stochastic policy whose rows are normalised uniform draws.
pub fn random_policy<R: Rng + ?Sized>(
    n_states: usize,
    n_actions: usize,
    rng: &mut R,
) -> PolicyTable {
    let rows = (0..n_states)
        .map(|_| {
            let raw: Vec<f64> = (0..n_actions).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
        .collect();
    PolicyTable::from_rows(rows).expect("normalised rows are a valid policy")
}

/// Worst residuals of the value identities over a sweep of random MDPs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LemmaResiduals {
    /// `max |V'(s_p) − π(s_p, a⁺)|` for the discounted evaluation.
    pub triggered: f64,
    /// `max |V'(s) − V(s)|` over benign states, discounted.
    pub benign: f64,
    /// Both identities for the finite-horizon evaluation, all `t`.
    pub triggered_finite: f64,
    pub benign_finite: f64,
}

/// Sweeps `n_mdps` random MDPs (`|S| ≤ 8`, `|A| ≤ 4`), one random policy
/// each, every `β` in `betas` and every horizon in `horizons`.
pub fn lemma_sweep(
    n_mdps: usize,
    betas: &[f64],
    horizons: &[usize],
    seed: u64,
) -> Result<LemmaResiduals> {
    let mut rng = seeded_rng(seed, 10);
    let mut out = LemmaResiduals::default();
    for i in 0..n_mdps {
        let n_s = rng.gen_range(1..=8);
        let n_a = rng.gen_range(1..=4);
        let gamma = rng.gen_range(0.5..0.95);
        let env = make_random_mdp(n_s, n_a, seed.wrapping_mul(1000) + i as u64, 1.0, gamma)?;
        let target = rng.gen_range(0..n_a);
        let pi = random_policy(2 * n_s, n_a, &mut rng);
        let benign_pi = pi.restrict(n_s);
        let v = crate::dp::policy_evaluation(&env.mdp, &benign_pi, EVAL_TOL)?;
        let benign_tables = crate::dp::finite_horizon_evaluation(
            &env.mdp,
            &benign_pi,
            horizons.iter().copied().max().unwrap_or(1),
        )?;
        for &beta in betas {
            let spec = AttackSpec::new(AttackMode::SleeperNetsOuter, beta, 1.0, 1.0, target);
            let pm = PoisonedMdp::new(env.mdp.clone(), spec)?;
            let vp = poisoned_policy_evaluation(&pm, &pi, EVAL_TOL)?;
            for s in 0..n_s {
                out.triggered = out
                    .triggered
                    .max((vp[s + n_s] - pi.prob(s + n_s, target)).abs());
                out.benign = out.benign.max((vp[s] - v[s]).abs());
            }
            for &h in horizons {
                let tables = poisoned_finite_horizon_evaluation(&pm, &pi, h)?;
                let offset = benign_tables.len() - h;
                for (t, table) in tables.iter().enumerate() {
                    let reference = &benign_tables[offset + t];
                    for s in 0..n_s {
                        out.triggered_finite = out
                            .triggered_finite
                            .max((table[s + n_s] - pi.prob(s + n_s, target)).abs());
                        out.benign_finite = out.benign_finite.max((table[s] - reference[s]).abs());
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Outcome of the brute-force optimality sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TheoremResiduals {
    /// Number of MDPs whose dominating policy plays `a⁺` on every triggered state.
    pub target_everywhere: usize,
    pub mdps: usize,
    /// `max |V*'(s) − V*(s)|` over benign states.
    pub benign_gap: f64,
    /// Largest amount any sampled stochastic policy beats the dominating one.
    pub stochastic_excess: f64,
}

/// Brute-forces `n_mdps` small random MDPs and spot-checks
/// `stochastic_per_mdp` random stochastic policies against each winner.
pub fn theorem_sweep(
    n_mdps: usize,
    stochastic_per_mdp: usize,
    seed: u64,
) -> Result<TheoremResiduals> {
    let mut rng = seeded_rng(seed, 11);
    let mut out = TheoremResiduals {
        mdps: n_mdps,
        ..TheoremResiduals::default()
    };
    for i in 0..n_mdps {
        let n_s = rng.gen_range(1..=4);
        let n_a = rng.gen_range(2..=3);
        let gamma = rng.gen_range(0.5..0.95);
        let beta = rng.gen_range(0.05..0.6);
        let env = make_random_mdp(
            n_s,
            n_a,
            seed.wrapping_mul(1000) + 500 + i as u64,
            1.0,
            gamma,
        )?;
        let target = rng.gen_range(0..n_a);
        let pm = PoisonedMdp::new(
            env.mdp.clone(),
            AttackSpec::new(AttackMode::SleeperNetsOuter, beta, 1.0, 1.0, target),
        )?;
        let (best, values) = match brute_force_optimal(&pm) {
            Ok(x) => x,
            Err(Error::Falsified(_)) | Err(Error::NoDominatingPolicy { .. }) => continue,
            Err(e) => return Err(e),
        };
        if (n_s..2 * n_s).all(|sp| best.prob(sp, target) == 1.0) {
            out.target_everywhere += 1;
        }
        let (vstar, _) = value_iteration(&env.mdp, EVAL_TOL)?;
        out.benign_gap = out.benign_gap.max(values.max_diff_prefix(&vstar, n_s));
        for _ in 0..stochastic_per_mdp {
            let pi = random_policy(2 * n_s, n_a, &mut rng);
            let v = poisoned_policy_evaluation(&pm, &pi, EVAL_TOL)?;
            for s in 0..2 * n_s {
                out.stochastic_excess = out.stochastic_excess.max(v[s] - values[s]);
            }
        }
    }
    Ok(out)
}

/// Largest root of a sign change of `f` on `[lo, hi]`, by bisection to `tol`.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numerical(format!("no sign change on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)?.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Q(δ(Start), a⁺) − Q(δ(Start), a1)` in the first counterexample under
/// static `±c` poisoning of every step.
pub fn m1_static_gap(gamma: f64, c: f64) -> Result<f64> {
    let env = make_m1(c, gamma)?;
    let spec = AttackSpec::new(AttackMode::StaticInner, 0.0, 1.0, c, m1::TARGET);
    let sm = build_static_poisoned_mdp_with_rate(&env.mdp, env.scheme, &spec, 1.0)?;
    let (v, _) = value_iteration(&sm, 1e-14)?;
    let q = q_from_values(&sm, &v)?;
    let start = env.scheme.apply_trigger(m1::START)?;
    Ok(q.get(start, m1::TARGET) - q.get(start, m1::A1))
}

/// `(Q(Start, fast), Q(Start, slow))` in the second counterexample under
/// static poisoning at rate `β`.
pub fn m2_static_q(beta: f64, gamma: f64, c: f64) -> Result<(f64, f64)> {
    let env = make_m2(c, gamma)?;
    let spec = AttackSpec::new(AttackMode::StaticInner, 0.0, 1.0, c, m2::TARGET);
    let sm = build_static_poisoned_mdp_with_rate(&env.mdp, env.scheme, &spec, beta)?;
    let (v, _) = value_iteration(&sm, 1e-14)?;
    let q = q_from_values(&sm, &v)?;
    Ok((q.get(m2::START, m2::TARGET), q.get(m2::START, m2::SLOW)))
}

/// Dominating policy of the adversarial MDP built on the first counterexample.
pub fn m1_dynamic_optimum(gamma: f64, beta: f64, c: f64) -> Result<PolicyTable> {
    let env = make_m1(c, gamma)?;
    let pm = PoisonedMdp::new(
        env.mdp,
        AttackSpec::new(AttackMode::SleeperNetsOuter, beta, 1.0, c, m1::TARGET),
    )?;
    Ok(brute_force_optimal(&pm)?.0)
}

/// Dominating policy of the adversarial MDP built on the second counterexample.
pub fn m2_dynamic_optimum(gamma: f64, beta: f64, c: f64) -> Result<PolicyTable> {
    let env = make_m2(c, gamma)?;
    let pm = PoisonedMdp::new(
        env.mdp,
        AttackSpec::new(AttackMode::SleeperNetsOuter, beta, 1.0, c, m2::TARGET),
    )?;
    Ok(brute_force_optimal(&pm)?.0)
}

fn lemma_rows(rows: &mut Vec<CheckRow>) -> Result<()> {
    let r = lemma_sweep(100, &[0.1, 0.3, 0.5], &[1, 3, 10], 7)?;
    rows.push(CheckRow::residual(
        "lemmas",
        "triggered value = pi(a+)",
        r.triggered,
        LEMMA_TOL,
    ));
    rows.push(CheckRow::residual(
        "lemmas",
        "benign value preserved",
        r.benign,
        LEMMA_TOL,
    ));
    rows.push(CheckRow::residual(
        "lemmas",
        "triggered value = pi(a+), finite H",
        r.triggered_finite,
        LEMMA_TOL,
    ));
    rows.push(CheckRow::residual(
        "lemmas",
        "benign value preserved, finite H",
        r.benign_finite,
        LEMMA_TOL,
    ));
    Ok(())
}

fn theorem_rows(rows: &mut Vec<CheckRow>) -> Result<()> {
    let r = theorem_sweep(20, 200, 7)?;
    rows.push(CheckRow::flag(
        "theorems",
        format!(
            "target action optimal on S_p ({}/{})",
            r.target_everywhere, r.mdps
        ),
        r.target_everywhere == r.mdps,
    ));
    rows.push(CheckRow::residual(
        "theorems",
        "optimal benign values preserved",
        r.benign_gap,
        THEOREM_TOL,
    ));
    rows.push(CheckRow::residual(
        "theorems",
        "stochastic policies never dominate",
        r.stochastic_excess.max(0.0),
        THEOREM_TOL,
    ));
    Ok(())
}

fn counterexample_rows(rows: &mut Vec<CheckRow>) -> Result<()> {
    let m1_threshold = bisect(|g| m1_static_gap(g, 1.0), 0.5, 0.9, 1e-9)?;
    rows.push(CheckRow::residual(
        "counterexamples",
        "m1 static threshold vs 2/3",
        (m1_threshold - 2.0 / 3.0).abs(),
        THRESHOLD_TOL,
    ));
    rows.push(CheckRow::flag(
        "counterexamples",
        "m1 static a1 dominates at gamma 0.9",
        m1_static_gap(0.9, 1.0)? < 0.0,
    ));
    let gammas = [0.3, 0.5, 0.7, 0.9, 0.95];
    let mut dynamic_ok = true;
    for &g in &gammas {
        let pi = m1_dynamic_optimum(g, 0.5, 1.0)?;
        dynamic_ok &= (3..6).all(|sp| pi.prob(sp, m1::TARGET) == 1.0);
    }
    rows.push(CheckRow::flag(
        "counterexamples",
        "m1 dynamic a+ optimal for all gamma",
        dynamic_ok,
    ));
    for &beta in &[0.25, 0.5, 0.75] {
        let threshold = bisect(
            |g| m2_static_q(beta, g, 1.0).map(|(fast, slow)| fast - slow),
            0.05,
            0.95,
            1e-9,
        )?;
        rows.push(CheckRow::residual(
            "counterexamples",
            format!("m2 static threshold vs 1-beta (beta {beta})"),
            (threshold - (1.0 - beta)).abs(),
            THRESHOLD_TOL,
        ));
    }
    let (fast, slow) = m2_static_q(0.5, 0.9, 1.0)?;
    rows.push(CheckRow::residual(
        "counterexamples",
        "m2 static Q (fast 1.26, slow 1.584)",
        (fast - 1.26).abs().max((slow - 1.584).abs()),
        1e-9,
    ));
    let mut fast_kept = true;
    for &beta in &[0.25, 0.5, 0.75] {
        let pi = m2_dynamic_optimum(0.9, beta, 1.0)?;
        fast_kept &= pi.prob(m2::START, m2::TARGET) == 1.0;
    }
    rows.push(CheckRow::flag(
        "counterexamples",
        "m2 dynamic keeps the fast path",
        fast_kept,
    ));
    Ok(())
}

/// Runs a suite and collects one row per check.
pub fn run_verification(suite: Suite) -> Result<VerificationReport> {
    let mut rows = Vec::new();
    if matches!(suite, Suite::Lemmas | Suite::All) {
        lemma_rows(&mut rows)?;
    }
    if matches!(suite, Suite::Theorems | Suite::All) {
        theorem_rows(&mut rows)?;
    }
    if matches!(suite, Suite::Counterexamples | Suite::All) {
        counterexample_rows(&mut rows)?;
    }
    Ok(VerificationReport { rows })
}
