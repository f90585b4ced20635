use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{col, run_jobs, BatteryVariant, Job, Panel, Sample, SpecResult, SpecTemplate, StudyPlan};
use crate::error::{Error, Result};
use crate::fe::{balance_test, ipw_weights, singleton_mask, BalanceRow};
use crate::frame::{Frame, MISSING_CODE};
use crate::oracle::Executor;
use crate::panel::Gender;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeUnit {
    Years,
    /// A 0/1 outcome; the effect is also shown in percentage points.
    Probability,
    Level,
}

impl MagnitudeUnit {
    pub fn for_outcome(outcome: &str) -> Self {
        match outcome {
            col::YEARS_EDUCATION => MagnitudeUnit::Years,
            col::ILLITERATE => MagnitudeUnit::Probability,
            _ => MagnitudeUnit::Level,
        }
    }
}

/// Effect of the mean famine exposure implied by a coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeLine {
    pub outcome: String,
    pub coefficient: f64,
    pub exposure: f64,
    pub effect: f64,
    pub unit: MagnitudeUnit,
    pub text: String,
}

pub(crate) fn outcome_label(outcome: &str) -> String {
    match outcome {
        col::YEARS_EDUCATION => "Years of education".into(),
        col::ILLITERATE => "Illiterate".into(),
        other => other.into(),
    }
}

/// `x` rounded to `digits` significant figures, in fixed notation.
pub fn format_significant(x: f64, digits: u32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = libm::floor(libm::log10(libm::fabs(x))) as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn magnitude_line(outcome: &str, coefficient: f64, exposure: f64) -> MagnitudeLine {
    let effect = coefficient * exposure;
    let unit = MagnitudeUnit::for_outcome(outcome);
    let size = format_significant(libm::fabs(effect), 4);
    let direction = if effect < 0.0 { "decrease" } else { "increase" };
    let amount = match unit {
        MagnitudeUnit::Years => format!("{size} years"),
        MagnitudeUnit::Probability => format!("{size} ≈ {:.1} pp", libm::fabs(effect) * 100.0),
        MagnitudeUnit::Level => size,
    };
    let text = format!(
        "{}: {exposure} × {:.3} = {amount} ({direction})",
        outcome_label(outcome),
        libm::fabs(coefficient)
    );
    MagnitudeLine {
        outcome: outcome.into(),
        coefficient,
        exposure,
        effect,
        unit,
        text,
    }
}

/// Fitted columns for every outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub label: String,
    pub columns: Vec<String>,
    pub outcomes: Vec<String>,
    /// Outcome-major: all columns of the first outcome, then the next.
    pub results: Vec<SpecResult>,
    pub magnitudes: Vec<MagnitudeLine>,
    pub n_sample: usize,
}

impl BatteryReport {
    pub fn get(&self, outcome: &str, column: &str) -> Option<&SpecResult> {
        self.results
            .iter()
            .find(|r| r.outcome == outcome && r.label == column)
    }

    pub fn for_outcome<'s>(&'s self, outcome: &'s str) -> impl Iterator<Item = &'s SpecResult> + 's {
        self.results.iter().filter(move |r| r.outcome == outcome)
    }
}

fn template_jobs<'a>(
    templates: &[SpecTemplate],
    outcomes: &[String],
    frame: &'a Frame,
    cluster: &str,
) -> Vec<Job<'a>> {
    let mut jobs = Vec::new();
    for outcome in outcomes {
        for t in templates {
            jobs.push(Job {
                label: t.label.clone(),
                outcome: outcome.clone(),
                terms: t.treatment_terms(),
                frame,
                spec: t.resolve(outcome, frame, cluster),
            });
        }
    }
    jobs
}

/// Every specification of the plan on every outcome. Failures are kept per
/// specification.
pub fn run_main_battery<E: Executor>(exec: &E, plan: &StudyPlan, sample: &Sample<'_>) -> BatteryReport {
    let jobs = template_jobs(&plan.specifications, &plan.outcomes, &sample.frame, &plan.cluster);
    let results = run_jobs(exec, &jobs, &plan.fit);
    let source = &plan.specifications[plan.magnitude_column.clamp(1, plan.specifications.len()) - 1];
    let term = &source.treatment_terms()[0];
    let magnitudes = plan
        .outcomes
        .iter()
        .filter_map(|o| {
            let r = results.iter().find(|r| r.outcome == *o && r.label == source.label)?;
            Some(magnitude_line(o, r.coef(term)?, plan.magnitude_exposure))
        })
        .collect();
    BatteryReport {
        label: "Main specifications".into(),
        columns: plan.specifications.iter().map(|t| t.label.clone()).collect(),
        outcomes: plan.outcomes.clone(),
        results,
        magnitudes,
        n_sample: sample.len(),
    }
}

/// Selected main columns under another treatment or an extra cohort
/// restriction.
pub fn run_variant<E: Executor>(
    exec: &E,
    plan: &StudyPlan,
    panel: &Panel,
    variant: &BatteryVariant,
) -> Result<BatteryReport> {
    let filter = plan.cohort_filter.and(&variant.cohort_filter);
    let sample = Sample::new(panel, plan, &filter)?;
    let templates: Vec<SpecTemplate> = variant
        .columns
        .iter()
        .map(|&c| {
            plan.specifications
                .get(c.wrapping_sub(1))
                .cloned()
                .map(|t| t.with_treatment(variant.treatment))
                .ok_or_else(|| Error::config("variants.columns", format!("no column {c}")))
        })
        .collect::<Result<_>>()?;
    let jobs = template_jobs(&templates, &plan.outcomes, &sample.frame, &plan.cluster);
    Ok(BatteryReport {
        label: variant.label.clone(),
        columns: templates.iter().map(|t| t.label.clone()).collect(),
        outcomes: plan.outcomes.clone(),
        results: run_jobs(exec, &jobs, &plan.fit),
        magnitudes: Vec::new(),
        n_sample: sample.len(),
    })
}

/// Baseline gender-gap GS-SFE fit next to the same fit weighted by the
/// inverse probability of entering the identifying sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpwReport {
    pub floor: f64,
    pub n_cells: usize,
    pub n_clipped_cells: usize,
    pub n_included: usize,
    /// Per outcome: baseline, then re-weighted.
    pub results: Vec<SpecResult>,
    pub diagnostics: Vec<String>,
}

pub fn ipw_comparison<E: Executor>(exec: &E, plan: &StudyPlan, sample: &Sample<'_>) -> Result<IpwReport> {
    let frame = &sample.frame;
    let dims = [
        frame.categorical(col::FAMILY_GENDER)?,
        frame.categorical(col::BIRTH_YEAR_GENDER)?,
    ];
    let initial: Vec<bool> = (0..frame.n_rows())
        .map(|i| dims.iter().all(|d| d.codes[i] != MISSING_CODE))
        .collect();
    let (included, _) = singleton_mask(&dims, &initial);
    let persons = &sample.panel.persons;
    let cells: Vec<(i32, &str, bool)> = sample
        .rows
        .iter()
        .zip(&included)
        .map(|(&i, &inc)| (persons[i].birth_year, persons[i].county_id.as_str(), inc))
        .collect();
    let ipw = ipw_weights(&cells, plan.ipw_floor)?;
    let mut weighted = frame.clone();
    weighted.add_numeric(col::IPW, ipw.weights.iter().map(|w| w.unwrap_or(f64::NAN)).collect())?;

    let baseline = SpecTemplate {
        label: "Baseline".into(),
        ..SpecTemplate::default()
    };
    let reweighted = SpecTemplate {
        label: "Re-weighted (IPW)".into(),
        ipw: true,
        ..SpecTemplate::default()
    };
    let mut jobs = Vec::new();
    for outcome in &plan.outcomes {
        for t in [&baseline, &reweighted] {
            jobs.push(Job {
                label: t.label.clone(),
                outcome: outcome.clone(),
                terms: t.treatment_terms(),
                frame: &weighted,
                spec: t.resolve(outcome, &weighted, &plan.cluster),
            });
        }
    }
    Ok(IpwReport {
        floor: ipw.floor,
        n_cells: ipw.cells.len(),
        n_clipped_cells: ipw.n_clipped_cells,
        n_included: included.iter().filter(|k| **k).count(),
        results: run_jobs(exec, &jobs, &plan.fit),
        diagnostics: ipw.diagnostics.iter().map(|d| d.message.clone()).collect(),
    })
}

pub(crate) fn balance_label(variable: &str) -> String {
    match variable {
        "father_education" => "Father's Years of Education".into(),
        "mother_education" => "Mother's Years of Education".into(),
        other => other.to_string(),
    }
}

/// Parental characteristics of multi-child families with and without a
/// same-gender sibling pair among children born up to the cutoff.
pub fn balance_check(plan: &StudyPlan, panel: &Panel) -> Result<Vec<BalanceRow>> {
    let variables: Vec<&String> = plan
        .balance
        .variables
        .iter()
        .filter(|v| panel.aux.contains_key(v.as_str()))
        .collect();
    if variables.is_empty() {
        return Err(Error::Spec(format!(
            "none of the parental columns {} is present",
            plan.balance.variables.join(", ")
        )));
    }
    let mut families: BTreeMap<&str, ([usize; 2], usize)> = BTreeMap::new();
    for (i, p) in panel.persons.iter().enumerate() {
        if !p.survived || p.birth_year > plan.balance.max_birth_year {
            continue;
        }
        let entry = families.entry(p.family_id.as_str()).or_insert(([0, 0], i));
        entry.0[p.gender.index()] += 1;
    }
    let mut rows = Vec::new();
    for v in variables {
        let values = &panel.aux[v.as_str()];
        let mut with_pair = Vec::new();
        let mut without = Vec::new();
        for (counts, first) in families.values() {
            if counts[0] + counts[1] < 2 {
                continue;
            }
            let x = values[*first].trim().parse::<f64>().unwrap_or(f64::NAN);
            if counts[Gender::Male.index()] >= 2 || counts[Gender::Female.index()] >= 2 {
                with_pair.push(x);
            } else {
                without.push(x);
            }
        }
        let label = balance_label(v);
        rows.extend(balance_test(&[(label.as_str(), &with_pair, &without)]));
    }
    Ok(rows)
}
