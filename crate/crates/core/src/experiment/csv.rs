//! Minimal CSV writing with fixed numeric formatting.

use std::fmt::Write;

use crate::harness::RunLog;

pub const EPISODE_HEADER: &str =
    "run_id,seed,episode,return,poisoned_steps,cumulative_poison_rate,asr";

pub const SUMMARY_HEADER: &str =
    "run_id,seeds,mode,beta,alpha,c,final_asr_mean,final_asr_std,brr_mean,brr_std,poison_rate_mean";

/// Formats a real with 10 significant digits, like C's `%.10g`.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..10).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (9 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub(crate) fn episode_csv(run_id: &str, seed: u64, log: &RunLog) -> String {
    let mut out = String::with_capacity(64 * (log.episodes.len() + 1));
    out.push_str(EPISODE_HEADER);
    out.push('\n');
    for e in &log.episodes {
        writeln!(
            out,
            "{run_id},{seed},{},{},{},{},{}",
            e.episode,
            format_real(e.benign_return),
            e.poisoned_steps,
            format_real(e.cumulative_poison_rate),
            format_real(e.asr)
        )
        .expect("writing to a String cannot fail");
    }
    out
}
