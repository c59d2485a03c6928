//! Text renderings of experiment output.

use crate::experiment::{AttackReport, EmpiricalResult};

use super::OutputFormat;

/// Formats with 12 significant digits, `.` as decimal separator, trailing
/// zeros trimmed but at least one fractional digit kept in fixed notation.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0.0".to_owned();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_fraction(&format!("{v:.decimals$}"))
    } else {
        let m = trim_fraction(mantissa);
        let m = m.strip_suffix(".0").unwrap_or(&m);
        format!("{m}e{exp}")
    }
}

fn trim_fraction(s: &str) -> String {
    match s.split_once('.') {
        Some((int, frac)) => {
            let frac = frac.trim_end_matches('0');
            if frac.is_empty() {
                format!("{int}.0")
            } else {
                format!("{int}.{frac}")
            }
        }
        None => format!("{s}.0"),
    }
}

const RESULT_COLUMNS: &str =
    "miner_id,stake,coin_age,theoretical_p,empirical_p,wins,ci99_low,ci99_high";

pub fn render_results(result: &EmpiricalResult, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(result).expect("result serializes");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut out = String::from(RESULT_COLUMNS);
            out.push('\n');
            for row in result_rows(result) {
                out.push_str(&row);
                out.push('\n');
            }
            out.push_str(&format!(
                "# chi_square={} df={} p_value={} gof_pass={} trials={} empty_slots={} seed={}\n",
                format_sig12(result.chi_square),
                result.chi_square_df,
                format_sig12(result.p_value),
                result.gof_pass,
                result.trials,
                result.empty_slots,
                result.master_seed,
            ));
            out
        }
    }
}

fn result_rows(result: &EmpiricalResult) -> impl Iterator<Item = String> + '_ {
    (0..result.wins.len()).map(move |i| {
        let (id, wins) = result.wins[i];
        let (lo, hi) = result.ci99[i];
        format!(
            "{id},{},{},{},{},{wins},{},{}",
            result.stakes[i],
            result.coin_ages[i],
            format_sig12(result.theoretical[i]),
            format_sig12(result.frequencies[i]),
            format_sig12(lo),
            format_sig12(hi),
        )
    })
}

/// One table over several runs of the same stake distribution.
pub fn render_comparison(results: &[EmpiricalResult], format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(results).expect("results serialize");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut out = format!("mechanism,{RESULT_COLUMNS},chi_square,p_value,gof_pass\n");
            for r in results {
                for row in result_rows(r) {
                    out.push_str(&format!(
                        "{},{row},{},{},{}\n",
                        r.mechanism,
                        format_sig12(r.chi_square),
                        format_sig12(r.p_value),
                        r.gof_pass
                    ));
                }
            }
            out
        }
    }
}

pub fn render_attack(report: &AttackReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        OutputFormat::Csv => format!(
            "attacker_id,stake_ratio,dominance_eq1,dominance_mechanism,mechanism\n{},{},{},{},{}\n",
            report.attacker_id,
            format_sig12(report.stake_ratio),
            format_sig12(report.dominance_eq1),
            format_sig12(report.dominance_mechanism),
            report.mechanism,
        ),
    }
}
