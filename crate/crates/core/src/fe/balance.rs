use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::stats::{mean, sample_variance};

/// Two-sample comparison of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub variable: String,
    pub mean_a: f64,
    pub se_a: f64,
    pub n_a: usize,
    pub mean_b: f64,
    pub se_b: f64,
    pub n_b: usize,
    pub difference: f64,
    /// Welch t-statistic; `NaN` when undefined.
    pub t_stat: f64,
    /// Both groups have zero variance and differ, so `t` is undefined.
    pub undefined: bool,
}

/// Means, standard errors of means and Welch t-statistics of
/// `variables[i]` between groups A and B. Absent (`NaN`) values are skipped.
pub fn balance_test(variables: &[(&str, &[f64], &[f64])]) -> Vec<BalanceRow> {
    variables
        .iter()
        .map(|(name, a, b)| {
            let a: Vec<f64> = a.iter().copied().filter(|v| v.is_finite()).collect();
            let b: Vec<f64> = b.iter().copied().filter(|v| v.is_finite()).collect();
            let (ma, mb) = (mean(&a), mean(&b));
            let va = if a.len() > 1 { sample_variance(&a) / a.len() as f64 } else { 0.0 };
            let vb = if b.len() > 1 { sample_variance(&b) / b.len() as f64 } else { 0.0 };
            let diff = ma - mb;
            let denom = libm::sqrt(va + vb);
            let (t, undefined) = if denom > 0.0 {
                (diff / denom, false)
            } else if diff == 0.0 && !a.is_empty() && !b.is_empty() {
                (0.0, false)
            } else {
                (f64::NAN, true)
            };
            BalanceRow {
                variable: (*name).into(),
                mean_a: ma,
                se_a: libm::sqrt(va),
                n_a: a.len(),
                mean_b: mb,
                se_b: libm::sqrt(vb),
                n_b: b.len(),
                difference: diff,
                t_stat: t,
                undefined,
            }
        })
        .collect()
}

/// Text table: each variable gives a row of means and difference, then a
/// row of standard errors and the t-statistic in parentheses.
pub fn render_balance_table(rows: &[BalanceRow], label_a: &str, label_b: &str) -> String {
    let label_w = rows.iter().map(|r| r.variable.len()).max().unwrap_or(0).max(8);
    let col_w = label_a.len().max(label_b.len()).max(12);
    let mut out = String::new();
    let _ = writeln!(out, "{:<label_w$}  {:>col_w$}  {:>col_w$}  {:>col_w$}", "", "(1)", "(2)", "(3)");
    let _ = writeln!(out, "{:<label_w$}  {:>col_w$}  {:>col_w$}  {:>col_w$}", "", label_a, label_b, "Difference");
    let _ = writeln!(out, "{:<label_w$}  {:>col_w$}  {:>col_w$}  {:>col_w$}", "", "", "", "(t-stat)");
    for r in rows {
        let t = if r.undefined { String::from("(undefined)") } else { format!("({:.3})", r.t_stat) };
        let _ = writeln!(
            out,
            "{:<label_w$}  {:>col_w$}  {:>col_w$}  {:>col_w$}",
            r.variable,
            format!("{:.2}", r.mean_a),
            format!("{:.2}", r.mean_b),
            format!("{:.2}", r.difference)
        );
        let _ = writeln!(
            out,
            "{:<label_w$}  {:>col_w$}  {:>col_w$}  {:>col_w$}",
            "",
            format!("({:.2})", r.se_a),
            format!("({:.2})", r.se_b),
            t
        );
    }
    out
}
