use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{col, run_jobs, Job, Panel, SpecResult, StudyPlan};
use crate::error::{Error, Result};
use crate::fe::RegressionSpec;
use crate::frame::{Categorical, Frame};
use crate::oracle::Executor;
use crate::panel::{Gender, FAMINE_YEARS};

pub const ANY_POST: &str = "any_post_famine_child";
pub const N_POST: &str = "n_post_famine_children";
pub const MALE_SHARE_POST: &str = "male_share_post_famine";
pub const HAD_FAMINE: &str = "had_famine_child";
pub const MALE_FAMINE: &str = "male_famine_child";
pub const FEMALE_FAMINE: &str = "female_famine_child";
pub const N_MALE_PRE: &str = "n_male_by_famine_end";
pub const N_FEMALE_PRE: &str = "n_female_by_famine_end";
pub const FIRST_MALE: &str = "first_child_male";
pub const FIRST_BIRTH_YEAR: &str = "first_child_birth_year";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FertilityReport {
    pub n_families: usize,
    /// Families without any child born by the end of the famine.
    pub n_excluded: usize,
    /// Families without post-famine children (no gender ratio).
    pub n_undefined_ratio: usize,
    /// Columns (1)–(6).
    pub results: Vec<SpecResult>,
}

#[derive(Default)]
struct FamilyTally<'a> {
    county: &'a str,
    first: Option<(i64, i32, Gender)>,
    by_end: [f64; 2],
    famine: [bool; 2],
    post: [f64; 2],
}

/// One row per family with at least one child born by the end of the
/// famine; also returns the number of families excluded.
pub fn fertility_frame(panel: &Panel) -> Result<(Frame, usize)> {
    let last_famine_year = *FAMINE_YEARS.last().unwrap_or(&1961);
    let mut families: BTreeMap<&str, FamilyTally<'_>> = BTreeMap::new();
    for p in panel.persons.iter().filter(|p| p.survived) {
        let t = families.entry(p.family_id.as_str()).or_default();
        t.county = p.county_id.as_str();
        let key = (p.birth_month_index(), p.birth_year, p.gender);
        if t.first.is_none_or(|f| key.0 < f.0) {
            t.first = Some(key);
        }
        let g = p.gender.index();
        if p.birth_year <= last_famine_year {
            t.by_end[g] += 1.0;
        } else {
            t.post[g] += 1.0;
        }
        if FAMINE_YEARS.contains(&p.birth_year) {
            t.famine[g] = true;
        }
    }
    let total = families.len();
    let kept: Vec<&FamilyTally<'_>> = families.values().filter(|t| t.by_end[0] + t.by_end[1] > 0.0).collect();
    if kept.is_empty() {
        return Err(Error::Spec("no family has a child born by the end of the famine".into()));
    }
    let m = Gender::Male.index();
    let f = Gender::Female.index();
    let num = |g: &dyn Fn(&FamilyTally<'_>) -> f64| -> Vec<f64> { kept.iter().map(|t| g(t)).collect() };
    let mut frame = Frame::new(kept.len());
    frame.add_numeric(ANY_POST, num(&|t| f64::from(u8::from(t.post[m] + t.post[f] > 0.0))))?;
    frame.add_numeric(N_POST, num(&|t| t.post[m] + t.post[f]))?;
    frame.add_numeric(
        MALE_SHARE_POST,
        num(&|t| {
            let n = t.post[m] + t.post[f];
            if n > 0.0 {
                t.post[m] / n
            } else {
                f64::NAN
            }
        }),
    )?;
    frame.add_numeric(HAD_FAMINE, num(&|t| f64::from(u8::from(t.famine[m] || t.famine[f]))))?;
    frame.add_numeric(MALE_FAMINE, num(&|t| f64::from(u8::from(t.famine[m]))))?;
    frame.add_numeric(FEMALE_FAMINE, num(&|t| f64::from(u8::from(t.famine[f]))))?;
    frame.add_numeric(N_MALE_PRE, num(&|t| t.by_end[m]))?;
    frame.add_numeric(N_FEMALE_PRE, num(&|t| t.by_end[f]))?;
    frame.add_numeric(
        FIRST_MALE,
        num(&|t| f64::from(u8::from(t.first.is_some_and(|x| x.2.is_male())))),
    )?;
    let county: Vec<&str> = kept.iter().map(|t| t.county).collect();
    frame.add_categorical(col::COUNTY, Categorical::from_keys(&county))?;
    let first_year: Vec<Option<i32>> = kept.iter().map(|t| t.first.map(|x| x.1)).collect();
    frame.add_categorical(FIRST_BIRTH_YEAR, Categorical::from_optional_keys(&first_year))?;
    Ok((frame, total - kept.len()))
}

/// Family-level regressions of post-famine fertility on having had a child
/// (or a son, or a daughter) born during the famine.
pub fn run_fertility_test<E: Executor>(exec: &E, plan: &StudyPlan, panel: &Panel) -> Result<FertilityReport> {
    let (frame, n_excluded) = fertility_frame(panel)?;
    let controls = [N_MALE_PRE, N_FEMALE_PRE, FIRST_MALE];
    let fe = [FIRST_BIRTH_YEAR, col::COUNTY];
    let mut jobs = Vec::new();
    for (k, outcome) in [ANY_POST, N_POST, MALE_SHARE_POST].into_iter().enumerate() {
        for (j, terms) in [&[HAD_FAMINE][..], &[MALE_FAMINE, FEMALE_FAMINE][..]].into_iter().enumerate() {
            let mut regressors: Vec<&str> = terms.to_vec();
            regressors.extend(controls);
            let spec = RegressionSpec::new(outcome, &regressors, &fe, col::COUNTY);
            jobs.push(Job {
                label: alloc::format!("({})", 2 * k + j + 1),
                outcome: outcome.into(),
                terms: terms.iter().map(|s| String::from(*s)).collect(),
                frame: &frame,
                spec: spec.validate().map(|_| spec),
            });
        }
    }
    let n_undefined_ratio = frame.numeric(MALE_SHARE_POST)?.iter().filter(|v| v.is_nan()).count();
    Ok(FertilityReport {
        n_families: frame.n_rows(),
        n_excluded,
        n_undefined_ratio,
        results: run_jobs(exec, &jobs, &plan.fit),
    })
}
