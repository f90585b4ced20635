//! Aligned text tables (coefficients over parenthesized standard errors,
//! stars at 10/5/1 percent) and CSV renderings of the same tables.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::fe::render_balance_table;
use crate::harness::{col, EventStudyReport, PlaceboReport, SpecResult, StudyReport};

/// Significance stars for a two-sided p-value.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Integer with thousands separators.
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Display name of a regressor.
pub fn term_label(term: &str) -> String {
    let base = |t: &str| -> Option<String> {
        Some(match t {
            col::EDR => "Prenatal EDR".into(),
            col::EDR_DUMMY => "Prenatal EDR Dummy".into(),
            col::CSSI => "CSSI".into(),
            crate::harness::PLACEBO_EDR => "Placebo Prenatal EDR".into(),
            col::ELDER_BROTHERS => "Number of elder brothers".into(),
            col::ELDER_SISTERS => "Number of elder sisters".into(),
            crate::harness::fertility_terms::HAD_FAMINE => "Had child born in famine".into(),
            crate::harness::fertility_terms::MALE_FAMINE => "Male child born in famine".into(),
            crate::harness::fertility_terms::FEMALE_FAMINE => "Female child born in famine".into(),
            _ => {
                let age = t.strip_prefix("edr_age")?;
                format!("EDR at age {age}")
            }
        })
    };
    if let Some(t) = term.strip_suffix("_x_male") {
        return format!("{} × Male", base(t).unwrap_or_else(|| t.into()));
    }
    if let Some(t) = term.strip_suffix("_x_female") {
        return format!("{} × Female", base(t).unwrap_or_else(|| t.into()));
    }
    base(term).unwrap_or_else(|| term.into())
}

/// A rectangular table of already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TextTable {
    pub title: String,
    pub header: Vec<Vec<String>>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl TextTable {
    fn widths(&self) -> Vec<usize> {
        let n = self
            .header
            .iter()
            .chain(&self.rows)
            .map(Vec::len)
            .max()
            .unwrap_or(0);
        let mut w = vec![0; n];
        for row in self.header.iter().chain(&self.rows) {
            for (i, cell) in row.iter().enumerate() {
                w[i] = w[i].max(cell.chars().count());
            }
        }
        for x in w.iter_mut().skip(1) {
            *x = (*x).max(10);
        }
        w
    }

    /// Left-aligned first column, right-aligned numeric columns.
    pub fn render(&self) -> String {
        let widths = self.widths();
        let total: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
        let rule: String = "=".repeat(total);
        let thin: String = "-".repeat(total);
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        let _ = writeln!(out, "{rule}");
        let line = |out: &mut String, row: &[String]| {
            let mut s = String::new();
            for (i, w) in widths.iter().enumerate() {
                let cell = row.get(i).map_or("", String::as_str);
                let pad = w.saturating_sub(cell.chars().count());
                if i == 0 {
                    s.push_str(cell);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str("  ");
                    s.push_str(&" ".repeat(pad));
                    s.push_str(cell);
                }
            }
            let _ = writeln!(out, "{}", s.trim_end());
        };
        for row in &self.header {
            line(&mut out, row);
        }
        if !self.header.is_empty() {
            let _ = writeln!(out, "{thin}");
        }
        for row in &self.rows {
            line(&mut out, row);
        }
        let _ = writeln!(out, "{rule}");
        for n in &self.notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }

    /// Header rows then body rows, comma separated with quoting as needed.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.header.iter().chain(&self.rows) {
            let cells: Vec<String> = row
                .iter()
                .map(|c| {
                    if c.contains([',', '"', '\n']) {
                        format!("\"{}\"", c.replace('"', "\"\""))
                    } else {
                        c.clone()
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Coefficient with stars, and its standard error in parentheses.
pub fn coef_cells(r: &SpecResult, term: &str) -> (String, String) {
    let Some(f) = &r.fit else {
        return (String::new(), String::new());
    };
    match (f.coef(term), f.se(term), f.p_value(term)) {
        (Some(b), Some(se), Some(p)) => (format!("{b:.3}{}", stars(p)), format!("({se:.3})")),
        (Some(b), Some(se), None) => (format!("{b:.3}"), format!("({se:.3})")),
        _ => (String::new(), String::new()),
    }
}

/// Terms in first-appearance order across the given results.
fn union_terms(results: &[&SpecResult]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in results {
        for t in &r.terms {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
    }
    out
}

/// Columns side by side: coefficient rows, then observations, R² and any
/// failures.
pub fn results_table(
    title: &str,
    header: Vec<Vec<String>>,
    results: &[&SpecResult],
    labels: &dyn Fn(&str) -> String,
) -> TextTable {
    let terms = union_terms(results);
    let mut rows = Vec::new();
    for t in &terms {
        let mut coef = vec![labels(t)];
        let mut se = vec![String::new()];
        for r in results {
            let (c, s) = coef_cells(r, t);
            coef.push(c);
            se.push(s);
        }
        rows.push(coef);
        rows.push(se);
    }
    let mut obs = vec!["Observations".to_string()];
    let mut r2 = vec!["R-squared (within)".to_string()];
    let mut notes = Vec::new();
    for (k, r) in results.iter().enumerate() {
        match &r.fit {
            Some(f) => {
                obs.push(thousands(f.n_effective));
                r2.push(format!("{:.3}", f.r2_within));
            }
            None => {
                obs.push("n/a".into());
                r2.push("n/a".into());
                if let Some(e) = &r.error {
                    notes.push(format!("Column {} ({}): {}", k + 1, r.label, e.message));
                }
            }
        }
    }
    rows.push(obs);
    rows.push(r2);
    notes.push(format!(
        "Standard errors clustered by {} in parentheses. *** p<0.01, ** p<0.05, * p<0.1.",
        cluster_label(results)
    ));
    TextTable {
        title: title.into(),
        header,
        rows,
        notes,
    }
}

/// The clustering dimension(s) of the fitted specs.
fn cluster_label(results: &[&SpecResult]) -> String {
    let mut dims: Vec<&str> = results
        .iter()
        .filter_map(|r| r.spec.as_ref())
        .map(|s| s.cluster_dim.as_str())
        .collect();
    dims.sort_unstable();
    dims.dedup();
    if dims.is_empty() {
        return col::COUNTY.into();
    }
    dims.join(" or ").replace('_', " ")
}

fn default_labels(t: &str) -> String {
    term_label(t)
}

fn outcome_title(outcome: &str) -> String {
    match outcome {
        col::YEARS_EDUCATION => "Years of education".into(),
        col::ILLITERATE => "Illiterate".into(),
        other => other.into(),
    }
}

fn event_labels<'a>(report: &'a EventStudyReport) -> impl Fn(&str) -> String + 'a {
    move |t: &str| {
        for b in &report.bins {
            if t == b.regressor {
                return format!("EDR1960 × {}", b.label);
            }
            if b.triple.as_deref() == Some(t) {
                return format!("EDR1960 × Male × {}", b.label);
            }
        }
        term_label(t)
    }
}

/// All tables of a study report, in order.
pub fn study_tables(report: &StudyReport) -> Vec<TextTable> {
    let mut tables = Vec::new();
    let b = &report.battery;
    for outcome in &b.outcomes {
        let results: Vec<&SpecResult> = b.for_outcome(outcome).collect();
        let header = vec![
            core::iter::once(String::new())
                .chain(results.iter().map(|r| r.label.clone()))
                .collect(),
        ];
        let mut t = results_table(
            &format!("{}: {}", b.label, outcome_title(outcome)),
            header,
            &results,
            &default_labels,
        );
        for m in b.magnitudes.iter().filter(|m| m.outcome == *outcome) {
            t.notes.insert(0, format!("At mean famine exposure {}", m.text));
        }
        tables.push(t);
    }
    for v in &report.variants {
        let results: Vec<&SpecResult> = v.results.iter().collect();
        let header = vec![
            core::iter::once(String::new())
                .chain(results.iter().map(|r| outcome_title(&r.outcome)))
                .collect(),
            core::iter::once(String::new())
                .chain(results.iter().map(|r| r.label.clone()))
                .collect(),
        ];
        tables.push(results_table(&v.label, header, &results, &default_labels));
    }
    if let Some(ipw) = &report.ipw {
        let results: Vec<&SpecResult> = ipw.results.iter().collect();
        let header = vec![
            core::iter::once(String::new())
                .chain(results.iter().map(|r| outcome_title(&r.outcome)))
                .collect(),
            core::iter::once(String::new())
                .chain(results.iter().map(|r| r.label.clone()))
                .collect(),
        ];
        let mut t = results_table("Inverse probability weighting", header, &results, &default_labels);
        t.notes.push(format!(
            "Inclusion probabilities by birth year and county: {} cells, {} clipped at {}.",
            ipw.n_cells, ipw.n_clipped_cells, ipw.floor
        ));
        tables.push(t);
    }
    if let Some(es) = &report.event_study {
        let results: Vec<&SpecResult> = es.results.iter().collect();
        let header = vec![
            core::iter::once(String::new())
                .chain(results.iter().map(|r| outcome_title(&r.outcome)))
                .collect(),
        ];
        let labels = event_labels(es);
        let mut t = results_table("Event study", header, &results, &labels);
        t.notes.push(format!("Omitted cohort: {}.", es.omitted));
        t.notes.extend(es.diagnostics.iter().cloned());
        tables.push(t);
    }
    if let Some(rb) = &report.robustness {
        for table in [1u8, 2] {
            let panels: Vec<_> = rb.panels.iter().filter(|p| p.table == table).collect();
            let title = if table == 1 {
                "Robustness checks"
            } else {
                "Scarring versus parental response"
            };
            let mut rows = Vec::new();
            let mut notes = Vec::new();
            let outcomes = &report.battery.outcomes;
            for p in &panels {
                rows.push(vec![format!("Panel {}. {}", p.letter, p.title)]);
                if let Some(why) = &p.skipped {
                    rows.push(vec![format!("  skipped: {why}")]);
                    continue;
                }
                let mut coef = vec![String::new()];
                let mut se = vec![String::new()];
                let mut obs = vec!["  Observations".to_string()];
                for o in outcomes {
                    let r = p.results.iter().find(|r| r.outcome == *o);
                    for term in &p.terms {
                        let (c, s) = r.map(|r| coef_cells(r, term)).unwrap_or_default();
                        coef.push(c);
                        se.push(s);
                    }
                    let n = r
                        .and_then(|r| r.fit.as_ref())
                        .map_or("n/a".to_string(), |f| thousands(f.n_effective));
                    obs.push(n.clone());
                    obs.push(n);
                    if let Some(e) = r.and_then(|r| r.error.as_ref()) {
                        notes.push(format!("Panel {} ({o}): {}", p.letter, e.message));
                    }
                }
                rows.push(coef);
                rows.push(se);
                rows.push(obs);
            }
            let terms: [String; 2] = ["EDR".into(), "EDR × Male".into()];
            let header = vec![
                core::iter::once(String::new())
                    .chain(outcomes.iter().flat_map(|o| [outcome_title(o), String::new()]))
                    .collect(),
                core::iter::once(String::new())
                    .chain(outcomes.iter().flat_map(|_| terms.clone()))
                    .collect(),
            ];
            let fitted: Vec<&SpecResult> = panels.iter().flat_map(|p| p.results.iter()).collect();
            notes.push(format!(
                "Treatment and treatment × Male coefficients; standard errors clustered by {}.",
                cluster_label(&fitted)
            ));
            tables.push(TextTable {
                title: title.into(),
                header,
                rows,
                notes,
            });
        }
    }
    if let Some(fx) = &report.fertility {
        let results: Vec<&SpecResult> = fx.results.iter().collect();
        let header = vec![
            core::iter::once(String::new())
                .chain(results.iter().map(|r| fertility_outcome(&r.outcome)))
                .collect(),
            core::iter::once(String::new())
                .chain(results.iter().map(|r| r.label.clone()))
                .collect(),
        ];
        let mut t = results_table(
            "Famine births and subsequent fertility",
            header,
            &results,
            &default_labels,
        );
        t.notes.push(format!(
            "{} families with a child born by the end of the famine ({} excluded); {} without post-famine children.",
            fx.n_families, fx.n_excluded, fx.n_undefined_ratio
        ));
        tables.push(t);
    }
    tables
}

/// Placebo runs side by side, one column per cohort and outcome.
pub fn placebo_table(report: &PlaceboReport) -> TextTable {
    let results: Vec<&SpecResult> = report.runs.iter().flat_map(|r| &r.results).collect();
    let header = vec![
        core::iter::once(String::new())
            .chain(report.runs.iter().flat_map(|r| r.results.iter().map(move |_| r.label.clone())))
            .collect(),
        core::iter::once(String::new())
            .chain(results.iter().map(|r| outcome_title(&r.outcome)))
            .collect(),
    ];
    let mut t = results_table("Placebo tests", header, &results, &default_labels);
    for r in &report.runs {
        t.notes.push(format!(
            "{}: exposure shifted {:+} years, {} persons in the cohort.",
            r.label, r.shift, r.n_cohort
        ));
    }
    t
}

fn fertility_outcome(outcome: &str) -> String {
    use crate::harness::fertility_terms::*;
    match outcome {
        ANY_POST => "Any post-famine child".into(),
        N_POST => "Post-famine children".into(),
        MALE_SHARE_POST => "Male share post-famine".into(),
        other => other.into(),
    }
}

/// The full text report.
pub fn render_study(report: &StudyReport) -> String {
    let mut out = String::new();
    let g = &report.groups;
    let _ = writeln!(
        out,
        "Persons {}  survivors {}  analysis sample {}",
        report.n_persons, report.n_survivors, report.n_sample
    );
    let _ = writeln!(
        out,
        "Family-gender groups {} ({} with two or more members, {} same-gender pairs)",
        g.n_groups, g.n_multi_member, g.n_same_gender_pairs
    );
    let _ = writeln!(out);
    for line in &report.battery.magnitudes {
        let _ = writeln!(out, "{}", line.text);
    }
    if !report.battery.magnitudes.is_empty() {
        let _ = writeln!(out);
    }
    for t in study_tables(report) {
        let _ = writeln!(out, "{}", t.render());
    }
    if let Some(rows) = &report.balance {
        let _ = writeln!(out, "Parental education by family structure");
        let _ = writeln!(
            out,
            "{}",
            render_balance_table(rows, "Families with Same-Gender Pairs", "Families without Same-Gender Pairs")
        );
    }
    if !report.diagnostics.is_empty() {
        let _ = writeln!(out, "Diagnostics");
        for d in &report.diagnostics {
            let _ = writeln!(out, "  {d}");
        }
    }
    out
}
