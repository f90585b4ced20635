use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{col, run_jobs, Job, Sample, SpecResult, StudyPlan};
use crate::error::Result;
use crate::exposure::{counterfactual_1960_edr, CounterfactualMode};
use crate::fe::RegressionSpec;
use crate::oracle::Executor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventBin {
    pub label: String,
    pub regressor: String,
    /// Name of the × Male term when triples are requested.
    pub triple: Option<String>,
    pub n_rows: usize,
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStudyReport {
    pub bins: Vec<EventBin>,
    pub omitted: String,
    pub counterfactual_mode: CounterfactualMode,
    /// One fit per outcome.
    pub results: Vec<SpecResult>,
    pub diagnostics: Vec<String>,
}

impl EventStudyReport {
    /// Regressors of the bins that were estimated, pre/post terms first and
    /// triples after.
    pub fn bin_terms(&self) -> Vec<&str> {
        let live = self.bins.iter().filter(|b| !b.dropped);
        live.clone()
            .map(|b| b.regressor.as_str())
            .chain(live.filter_map(|b| b.triple.as_deref()))
            .collect()
    }
}

/// Famine-cohort exposure plus counterfactual 1960 exposure interacted with
/// each birth-cohort bin, under gender-specific sibling and birth-year
/// fixed effects.
pub fn run_event_study<E: Executor>(exec: &E, plan: &StudyPlan, sample: &Sample<'_>) -> Result<EventStudyReport> {
    let cfg = &plan.event_study;
    cfg.validate()?;
    let panel = sample.panel;
    let mut diagnostics = Vec::new();
    let mut frame = sample.frame.clone();
    let cf: Vec<f64> = match &panel.death_rates {
        Some(table) => {
            let mut by_county: BTreeMap<&str, f64> = BTreeMap::new();
            let mut out = Vec::with_capacity(sample.len());
            for &i in &sample.rows {
                let county = panel.persons[i].county_id.as_str();
                let v = match by_county.get(county) {
                    Some(v) => *v,
                    None => {
                        let v = counterfactual_1960_edr(
                            county,
                            table,
                            cfg.counterfactual_mode,
                            plan.exposure.floor_negative_edr,
                        )?;
                        by_county.insert(county, v);
                        v
                    }
                };
                out.push(v);
            }
            out
        }
        None => {
            diagnostics.push("no death-rate table; using the counterfactual exposure stored with the panel".into());
            frame.numeric(col::CF_EDR)?.to_vec()
        }
    };
    let male = frame.numeric(col::MALE)?.to_vec();

    let mut regressors: Vec<String> = alloc::vec![col::EDR.into()];
    let mut triples: Vec<String> = Vec::new();
    if cfg.triple {
        regressors.push(col::x_male(col::EDR));
    }
    let mut bins = Vec::new();
    for (k, bin) in cfg.bins.iter().enumerate() {
        let name = format!("cf_bin{}", k + 1);
        let inside: Vec<bool> = sample
            .rows
            .iter()
            .map(|&i| {
                let p = &panel.persons[i];
                bin.contains(p.birth_year, p.birth_month)
            })
            .collect();
        let n_rows = inside.iter().filter(|b| **b).count();
        let values: Vec<f64> = cf
            .iter()
            .zip(&inside)
            .map(|(c, b)| if *b { *c } else { 0.0 })
            .collect();
        let dropped = values.iter().all(|v| *v == 0.0);
        if dropped {
            diagnostics.push(format!(
                "cohort bin `{}` has no exposed observations ({n_rows} rows) and is dropped",
                bin.label
            ));
        }
        let triple = cfg.triple.then(|| col::x_male(&name));
        if !dropped {
            let interacted: Vec<f64> = values.iter().zip(&male).map(|(v, m)| v * m).collect();
            frame.add_numeric(&name, values)?;
            regressors.push(name.clone());
            if let Some(t) = &triple {
                frame.add_numeric(t, interacted)?;
                triples.push(t.clone());
            }
        }
        bins.push(EventBin {
            label: bin.label.clone(),
            regressor: name,
            triple,
            n_rows,
            dropped,
        });
    }
    regressors.extend(triples);
    let fe = [col::FAMILY_GENDER, col::BIRTH_YEAR_GENDER];
    let names: Vec<&str> = regressors.iter().map(String::as_str).collect();
    let jobs: Vec<Job<'_>> = plan
        .outcomes
        .iter()
        .map(|o| {
            let spec = RegressionSpec::new(o, &names, &fe, &plan.cluster);
            Job {
                label: "Event study".into(),
                outcome: o.clone(),
                terms: regressors.clone(),
                frame: &frame,
                spec: spec.validate().map(|_| spec),
            }
        })
        .collect();
    let results = run_jobs(exec, &jobs, &plan.fit);
    Ok(EventStudyReport {
        bins,
        omitted: cfg.omitted.label.clone(),
        counterfactual_mode: cfg.counterfactual_mode,
        results,
        diagnostics,
    })
}
