use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{col, CohortFilter, Panel, StudyPlan};
use crate::error::Result;
use crate::exposure::{cssi, prenatal_weights, shrinkage_intensity};
use crate::frame::{Categorical, Frame};
use crate::panel::Gender;

/// Observed analysis sample: surviving persons passing a cohort filter,
/// with the frame built on them.
#[derive(Debug, Clone)]
pub struct Sample<'a> {
    pub panel: &'a Panel,
    /// Panel row of every frame row.
    pub rows: Vec<usize>,
    pub frame: Frame,
    pub diagnostics: Vec<String>,
}

impl<'a> Sample<'a> {
    pub fn new(panel: &'a Panel, plan: &StudyPlan, filter: &CohortFilter) -> Result<Self> {
        let rows: Vec<usize> = panel
            .persons
            .iter()
            .enumerate()
            .filter(|(_, p)| p.survived && filter.keeps(p.birth_year))
            .map(|(i, _)| i)
            .collect();
        let (frame, diagnostics) = build_frame(panel, &rows, plan)?;
        Ok(Self {
            panel,
            rows,
            frame,
            diagnostics,
        })
    }

    /// The rows whose panel index satisfies `keep`.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> Sample<'a> {
        let mask: Vec<bool> = self.rows.iter().map(|&i| keep(i)).collect();
        Sample {
            panel: self.panel,
            rows: self.rows.iter().zip(&mask).filter(|(_, k)| **k).map(|(i, _)| *i).collect(),
            frame: self.frame.filter(&mask),
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Birth order within the observed family and counts of elder brothers and
/// sisters, for every surviving person (others get zeros).
fn sibling_structure(panel: &Panel) -> (Vec<u32>, Vec<f64>, Vec<f64>) {
    let n = panel.len();
    let mut families: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in panel.persons.iter().enumerate() {
        if p.survived {
            families.entry(p.family_id.as_str()).or_default().push(i);
        }
    }
    let mut order = alloc::vec![0u32; n];
    let mut brothers = alloc::vec![0.0; n];
    let mut sisters = alloc::vec![0.0; n];
    for members in families.values_mut() {
        members.sort_by(|&a, &b| {
            let (pa, pb) = (&panel.persons[a], &panel.persons[b]);
            pa.birth_month_index()
                .cmp(&pb.birth_month_index())
                .then_with(|| pa.person_id.cmp(&pb.person_id))
        });
        for (k, &i) in members.iter().enumerate() {
            order[i] = k as u32 + 1;
            let t = panel.persons[i].birth_month_index();
            for &j in &members[..k] {
                let q = &panel.persons[j];
                if q.birth_month_index() < t {
                    match q.gender {
                        Gender::Male => brothers[i] += 1.0,
                        Gender::Female => sisters[i] += 1.0,
                    }
                }
            }
        }
    }
    (order, brothers, sisters)
}

/// Gestation-weighted shrinkage intensity of every person, from survivor
/// cohort counts by county and birth year.
fn cssi_exposure(panel: &Panel, plan: &StudyPlan) -> Result<Vec<f64>> {
    let mut counts: BTreeMap<(String, i32), f64> = BTreeMap::new();
    for p in panel.persons.iter().filter(|p| p.survived) {
        *counts.entry((p.county_id.clone(), p.birth_year)).or_insert(0.0) += 1.0;
    }
    let mut intensity: BTreeMap<(String, i32), f64> = BTreeMap::new();
    for c in cssi(&counts)? {
        intensity.insert((c.county_id, c.famine_year), shrinkage_intensity(c.index));
    }
    Ok(panel
        .persons
        .iter()
        .map(|p| {
            prenatal_weights(p.birth_year, p.birth_month, plan.exposure.window_convention)
                .iter()
                .map(|(y, w)| w * intensity.get(&(p.county_id.clone(), *y)).copied().unwrap_or(0.0))
                .sum()
        })
        .collect())
}

fn parse_number(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") {
        return Some(f64::NAN);
    }
    t.parse::<f64>().ok()
}

/// Analysis frame for the given panel rows, plus diagnostics for columns
/// that could not be built.
pub fn build_frame(panel: &Panel, rows: &[usize], plan: &StudyPlan) -> Result<(Frame, Vec<String>)> {
    let mut diagnostics = Vec::new();
    let mut frame = Frame::new(rows.len());
    let persons = &panel.persons;
    let exposures = &panel.exposures;
    let pick = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { rows.iter().map(|&i| f(i)).collect() };

    frame.add_numeric(
        col::YEARS_EDUCATION,
        pick(&|i| persons[i].years_education.unwrap_or(f64::NAN)),
    )?;
    frame.add_numeric(
        col::ILLITERATE,
        pick(&|i| persons[i].illiterate.map_or(f64::NAN, f64::from)),
    )?;
    frame.add_numeric(col::MALE, pick(&|i| f64::from(u8::from(persons[i].gender.is_male()))))?;
    frame.add_numeric(col::EDR, pick(&|i| exposures[i].prenatal_edr))?;
    frame.add_numeric(col::EDR_DUMMY, pick(&|i| f64::from(exposures[i].binary_treatment)))?;
    for age in 1..=5u8 {
        frame.add_numeric(
            &col::postnatal(age),
            pick(&|i| exposures[i].postnatal_edr[age as usize - 1]),
        )?;
    }
    frame.add_numeric(col::CF_EDR, pick(&|i| exposures[i].counterfactual_1960_edr))?;
    frame.add_numeric(col::YEAR_C, pick(&|i| f64::from(persons[i].birth_year - 1960)))?;

    let (order, brothers, sisters) = sibling_structure(panel);
    frame.add_numeric(col::ELDER_BROTHERS, pick(&|i| brothers[i]))?;
    frame.add_numeric(col::ELDER_SISTERS, pick(&|i| sisters[i]))?;

    match cssi_exposure(panel, plan) {
        Ok(v) => frame.add_numeric(col::CSSI, pick(&|i| v[i]))?,
        Err(e) => diagnostics.push(format!("shrinkage index unavailable: {e}")),
    }

    let mut treatments = alloc::vec![col::EDR, col::EDR_DUMMY];
    if frame.has_numeric(col::CSSI) {
        treatments.push(col::CSSI);
    }
    let female: Vec<f64> = frame.numeric(col::MALE)?.iter().map(|m| 1.0 - m).collect();
    frame.add_numeric("female", female)?;
    for t in treatments {
        frame.add_product(&col::x_male(t), t, col::MALE)?;
        frame.add_product(&col::x_female(t), t, "female")?;
    }

    let parent = plan.parent_key.as_ref().and_then(|k| panel.aux.get(k));
    if let (Some(k), None) = (&plan.parent_key, parent) {
        diagnostics.push(format!("parent key column `{k}` not found; families kept whole"));
    }
    let family: Vec<String> = rows
        .iter()
        .map(|&i| match parent {
            Some(v) => format!("{}\u{1f}{}", persons[i].family_id, v[i]),
            None => persons[i].family_id.clone(),
        })
        .collect();
    frame.add_categorical(col::FAMILY, Categorical::from_keys(&family))?;
    let gender: Vec<Gender> = rows.iter().map(|&i| persons[i].gender).collect();
    frame.add_categorical(col::GENDER, Categorical::from_keys(&gender))?;
    let county: Vec<&str> = rows.iter().map(|&i| persons[i].county_id.as_str()).collect();
    frame.add_categorical(col::COUNTY, Categorical::from_keys(&county))?;
    let year: Vec<i32> = rows.iter().map(|&i| persons[i].birth_year).collect();
    frame.add_categorical(col::BIRTH_YEAR, Categorical::from_keys(&year))?;
    let birth_order: Vec<u32> = rows.iter().map(|&i| order[i]).collect();
    frame.add_categorical(col::BIRTH_ORDER, Categorical::from_keys(&birth_order))?;
    frame.add_interaction(col::FAMILY_GENDER, &[col::FAMILY, col::GENDER])?;
    frame.add_interaction(col::COUNTY_GENDER, &[col::COUNTY, col::GENDER])?;
    frame.add_interaction(col::BIRTH_YEAR_GENDER, &[col::BIRTH_YEAR, col::GENDER])?;

    for (key, values) in &panel.aux {
        if frame.has_categorical(key) || frame.has_numeric(key) {
            diagnostics.push(format!("extra column `{key}` shadows a built-in column and is ignored"));
            continue;
        }
        let raw: Vec<&str> = rows.iter().map(|&i| values[i].as_str()).collect();
        let parsed: Option<Vec<f64>> = raw.iter().map(|s| parse_number(s)).collect();
        if let Some(v) = parsed {
            frame.add_numeric(key, v)?;
        }
        let keys: Vec<Option<&str>> = raw
            .iter()
            .map(|s| {
                let t = s.trim();
                (!t.is_empty()).then_some(t)
            })
            .collect();
        frame.add_categorical(key, Categorical::from_optional_keys(&keys))?;
    }
    Ok((frame, diagnostics))
}
