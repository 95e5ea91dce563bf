//! Seed fan-out, paired baseline/attack runs and result files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::{run_training, RunLog};
use crate::metrics::{benign_return_ratio, empirical_poison_rate, expected_benign_return};
use crate::poison::{AttackMode, AttackSpec};

use super::config::ExperimentConfig;
use super::csv::{episode_csv, format_real, SUMMARY_HEADER};

/// One finished training run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub run_id: String,
    pub seed: u64,
    pub log: RunLog,
    /// Exact expected discounted return of the final policy's benign rows.
    pub expected_return: f64,
    pub final_asr: f64,
    pub poison_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub run_id: String,
    pub seeds: Vec<u64>,
    pub mode: AttackMode,
    pub beta: f64,
    pub alpha: f64,
    pub c: f64,
    pub final_asr_mean: f64,
    pub final_asr_std: f64,
    pub brr_mean: f64,
    pub brr_std: f64,
    pub poison_rate_mean: f64,
}

impl SummaryRow {
    fn to_csv(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        [
            self.run_id.clone(),
            seeds.join(";"),
            self.mode.as_str().to_string(),
            format_real(self.beta),
            format_real(self.alpha),
            format_real(self.c),
            format_real(self.final_asr_mean),
            format_real(self.final_asr_std),
            format_real(self.brr_mean),
            format_real(self.brr_std),
            format_real(self.poison_rate_mean),
        ]
        .join(",")
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub baselines: Vec<RunResult>,
    pub attacks: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn train(
    config: &ExperimentConfig,
    spec: &AttackSpec,
    run_id: String,
    seed: u64,
) -> Result<RunResult> {
    let env = config.env.build(config.gamma)?;
    let (policy, log) = run_training(&env, &config.learner, spec, &config.training_options(seed))?;
    Ok(RunResult {
        run_id,
        seed,
        expected_return: expected_benign_return(&policy, &env)?,
        final_asr: log.final_asr,
        poison_rate: empirical_poison_rate(&log),
        log,
    })
}

fn summarise(
    run_id: &str,
    config: &ExperimentConfig,
    spec: &AttackSpec,
    runs: &[RunResult],
    baselines: &[RunResult],
) -> Result<SummaryRow> {
    let base_returns: Vec<f64> = baselines.iter().map(|r| r.expected_return).collect();
    let (_, base_std) = mean_std(&base_returns);
    let brr = runs
        .iter()
        .zip(baselines)
        .map(|(r, b)| benign_return_ratio(r.expected_return, b.expected_return, base_std))
        .collect::<Result<Vec<f64>>>()?;
    let asr: Vec<f64> = runs.iter().map(|r| r.final_asr).collect();
    let rate: Vec<f64> = runs.iter().map(|r| r.poison_rate).collect();
    let (final_asr_mean, final_asr_std) = mean_std(&asr);
    let (brr_mean, brr_std) = mean_std(&brr);
    Ok(SummaryRow {
        run_id: run_id.to_string(),
        seeds: config.seeds.clone(),
        mode: spec.mode,
        beta: spec.beta,
        alpha: spec.alpha,
        c: spec.c,
        final_asr_mean,
        final_asr_std,
        brr_mean,
        brr_std,
        poison_rate_mean: mean_std(&rate).0,
    })
}

fn write(path: PathBuf, body: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

/// Runs an unpoisoned baseline and the configured attack for every seed and
/// writes `baseline-seed<N>.csv`, `attack-seed<N>.csv` and `summary.csv`
/// into `output_dir`.
///
/// Seeds run in parallel; files are written afterwards in seed order, so
/// identical configs give identical bytes.
pub fn run_experiment(config: &ExperimentConfig, output_dir: &Path) -> Result<ExperimentOutcome> {
    config.validate()?;
    fs::create_dir_all(output_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", output_dir.display())))?;
    let baseline_spec = AttackSpec {
        mode: AttackMode::None,
        ..config.attack.clone()
    };
    let pairs = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let baseline = train(config, &baseline_spec, format!("baseline-seed{seed}"), seed)?;
            let attack = train(config, &config.attack, format!("attack-seed{seed}"), seed)?;
            Ok((baseline, attack))
        })
        .collect::<Result<Vec<_>>>()?;
    let (baselines, attacks): (Vec<RunResult>, Vec<RunResult>) = pairs.into_iter().unzip();

    let mut files = Vec::new();
    for run in baselines.iter().zip(&attacks).flat_map(|(b, a)| [b, a]) {
        let body = episode_csv(&run.run_id, run.seed, &run.log);
        write(
            output_dir.join(format!("{}.csv", run.run_id)),
            &body,
            &mut files,
        )?;
    }
    let summary = vec![
        summarise("baseline", config, &baseline_spec, &baselines, &baselines)?,
        summarise("attack", config, &config.attack, &attacks, &baselines)?,
    ];
    let mut body = String::from(SUMMARY_HEADER);
    body.push('\n');
    for row in &summary {
        body.push_str(&row.to_csv());
        body.push('\n');
    }
    write(output_dir.join("summary.csv"), &body, &mut files)?;
    Ok(ExperimentOutcome {
        baselines,
        attacks,
        summary,
        files,
    })
}

/// Re-runs the experiment once per value of `param`, each into its own
/// `<param>=<value>` subdirectory, and writes `ablation.csv` with the attack
/// summary row of every run.
pub fn run_ablation(
    config: &ExperimentConfig,
    output_dir: &Path,
    param: &str,
    values: &[String],
) -> Result<Vec<ExperimentOutcome>> {
    if values.is_empty() {
        return Err(Error::Config("ablation needs at least one value".into()));
    }
    let mut outcomes = Vec::with_capacity(values.len());
    let mut body = format!("param,value,{SUMMARY_HEADER}\n");
    for value in values {
        let mut cfg = config.clone();
        cfg.set(param, value)?;
        let outcome = run_experiment(&cfg, &output_dir.join(format!("{param}={value}")))?;
        let attack = outcome
            .summary
            .iter()
            .find(|r| r.run_id == "attack")
            .expect("attack row");
        body.push_str(&format!("{param},{value},{}\n", attack.to_csv()));
        outcomes.push(outcome);
    }
    let mut files = Vec::new();
    write(output_dir.join("ablation.csv"), &body, &mut files)?;
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
