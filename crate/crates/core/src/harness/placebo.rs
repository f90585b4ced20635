use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{col, run_jobs, Job, PlaceboCohort, Sample, SpecResult, SpecTemplate, StudyPlan, YearRange};
use crate::error::{Error, Result};
use crate::exposure::{prenatal_edr, shift_birth_year, ExposureConfig};
use crate::fe::RegressionSpec;
use crate::oracle::Executor;
use crate::panel::DeathRateTable;

pub const PLACEBO_EDR: &str = "placebo_edr";

/// Prenatal exposure the person would have had if born `shift` years later.
pub fn placebo_edr(
    birth_year: i32,
    birth_month: u8,
    county: &str,
    shift: i32,
    table: &DeathRateTable,
    cfg: &ExposureConfig,
) -> Result<f64> {
    prenatal_edr(
        shift_birth_year(birth_year, shift),
        birth_month,
        county,
        table,
        cfg.window_convention,
        cfg.floor_negative_edr,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboRun {
    pub label: String,
    pub cohort: YearRange,
    pub shift: i32,
    pub n_cohort: usize,
    /// One fit per outcome.
    pub results: Vec<SpecResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboReport {
    pub runs: Vec<PlaceboRun>,
}

impl PlaceboReport {
    pub fn terms() -> [String; 2] {
        [PLACEBO_EDR.into(), col::x_male(PLACEBO_EDR)]
    }
}

fn placebo_run<E: Executor>(
    exec: &E,
    plan: &StudyPlan,
    sample: &Sample<'_>,
    table: &DeathRateTable,
    cohort: &PlaceboCohort,
) -> Result<PlaceboRun> {
    let panel = sample.panel;
    let mut values = Vec::with_capacity(sample.len());
    let mut n_cohort = 0;
    for &i in &sample.rows {
        let p = &panel.persons[i];
        if cohort.cohort.contains(p.birth_year) {
            n_cohort += 1;
            values.push(placebo_edr(
                p.birth_year,
                p.birth_month,
                &p.county_id,
                cohort.shift,
                table,
                &plan.exposure,
            )?);
        } else {
            values.push(0.0);
        }
    }
    if n_cohort == 0 {
        return Err(Error::Spec(format!(
            "placebo cohort {}-{} is empty",
            cohort.cohort.from, cohort.cohort.to
        )));
    }
    let mut frame = sample.frame.clone();
    frame.add_numeric(PLACEBO_EDR, values)?;
    frame.add_product(&col::x_male(PLACEBO_EDR), PLACEBO_EDR, col::MALE)?;

    let mut regressors: Vec<String> = PlaceboReport::terms().into();
    regressors.extend(SpecTemplate::full().regressors());
    let names: Vec<&str> = regressors.iter().map(String::as_str).collect();
    let fe = [col::FAMILY_GENDER, col::BIRTH_YEAR_GENDER];
    let jobs: Vec<Job<'_>> = plan
        .outcomes
        .iter()
        .map(|o| {
            let spec = RegressionSpec::new(o, &names, &fe, &plan.cluster);
            Job {
                label: cohort.label.clone(),
                outcome: o.clone(),
                terms: PlaceboReport::terms().into(),
                frame: &frame,
                spec: spec.validate().map(|_| spec),
            }
        })
        .collect();
    Ok(PlaceboRun {
        label: cohort.label.clone(),
        cohort: cohort.cohort,
        shift: cohort.shift,
        n_cohort,
        results: run_jobs(exec, &jobs, &plan.fit),
    })
}

/// Falsely assigns famine-era exposure to cohorts born ten years after or
/// before the famine and re-estimates the full specification.
pub fn run_placebos<E: Executor>(exec: &E, plan: &StudyPlan, sample: &Sample<'_>) -> Result<PlaceboReport> {
    let table = sample
        .panel
        .death_rates
        .as_ref()
        .ok_or_else(|| Error::Spec("placebo exposure needs the death-rate table".into()))?;
    let runs = plan
        .placebo
        .cohorts
        .iter()
        .map(|c| placebo_run(exec, plan, sample, table, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(PlaceboReport { runs })
}
