use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{col, run_jobs, run_placebos, Job, Panel, Sample, SpecResult, SpecTemplate, StudyPlan, Treatment};
use crate::error::{Error, Result};
use crate::frame::{Frame, MISSING_CODE};
use crate::oracle::Executor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelKind {
    RegionalProvinceTrends,
    RegionalCountyTrends,
    DropBornAfter,
    DropBornFrom,
    PlaceboLate,
    PlaceboEarly,
    Cssi,
    BirthOrderFe,
    ElderBrothers,
    ElderSisters,
    DropEducatedMothers,
    DropBornAfterFamine,
}

impl PanelKind {
    pub const ALL: [PanelKind; 12] = [
        PanelKind::RegionalProvinceTrends,
        PanelKind::RegionalCountyTrends,
        PanelKind::DropBornAfter,
        PanelKind::DropBornFrom,
        PanelKind::PlaceboLate,
        PanelKind::PlaceboEarly,
        PanelKind::Cssi,
        PanelKind::BirthOrderFe,
        PanelKind::ElderBrothers,
        PanelKind::ElderSisters,
        PanelKind::DropEducatedMothers,
        PanelKind::DropBornAfterFamine,
    ];

    /// Table the panel belongs to (robustness or scarring versus parental
    /// response) and its letter within it.
    pub fn position(self) -> (u8, char) {
        match self {
            PanelKind::RegionalProvinceTrends => (1, 'A'),
            PanelKind::RegionalCountyTrends => (1, 'B'),
            PanelKind::DropBornAfter => (1, 'C'),
            PanelKind::DropBornFrom => (1, 'D'),
            PanelKind::PlaceboLate => (1, 'E'),
            PanelKind::PlaceboEarly => (1, 'F'),
            PanelKind::Cssi => (1, 'G'),
            PanelKind::BirthOrderFe => (2, 'A'),
            PanelKind::ElderBrothers => (2, 'B'),
            PanelKind::ElderSisters => (2, 'C'),
            PanelKind::DropEducatedMothers => (2, 'D'),
            PanelKind::DropBornAfterFamine => (2, 'E'),
        }
    }

    pub fn title(self, cfg: &super::RobustnessConfig) -> String {
        match self {
            PanelKind::RegionalProvinceTrends => "Add time variant regional controls and province-specific trends".into(),
            PanelKind::RegionalCountyTrends => "Add time variant regional controls and county-specific trends".into(),
            PanelKind::DropBornAfter => format!("Drop individuals born after {}", cfg.drop_born_after),
            PanelKind::DropBornFrom => format!("Drop individuals born in or after {}", cfg.drop_born_from),
            PanelKind::PlaceboLate => "Placebo: cohort born 1969-1971 assigned 1959-1961 EDR".into(),
            PanelKind::PlaceboEarly => "Placebo: cohort born 1949-1951 assigned 1959-1961 EDR".into(),
            PanelKind::Cssi => "Cohort size shrinkage index as famine intensity".into(),
            PanelKind::BirthOrderFe => "Control for birth order FE".into(),
            PanelKind::ElderBrothers => "Control for number of elder brothers".into(),
            PanelKind::ElderSisters => "Control for number of elder sisters".into(),
            PanelKind::DropEducatedMothers => "Drop mothers with middle school education or above".into(),
            PanelKind::DropBornAfterFamine => format!("Drop individuals born after {}", cfg.drop_born_after_famine),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelResult {
    pub kind: PanelKind,
    pub table: u8,
    pub letter: char,
    pub title: String,
    /// Treatment and treatment × Male terms, in that order.
    pub terms: Vec<String>,
    /// One fit per outcome; empty when skipped.
    pub results: Vec<SpecResult>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub panels: Vec<PanelResult>,
}

impl RobustnessReport {
    pub fn panel(&self, kind: PanelKind) -> Option<&PanelResult> {
        self.panels.iter().find(|p| p.kind == kind)
    }
}

/// Adds `1{group = k} · (birth year − 1960)` for every level but the first
/// and returns the new column names.
fn add_trends(frame: &mut Frame, group: &str, prefix: &str) -> Result<Vec<String>> {
    let cat = frame.categorical(group)?.clone();
    let year = frame.numeric(col::YEAR_C)?.to_vec();
    let mut names = Vec::new();
    for level in 1..cat.n_levels as u32 {
        let name = format!("{prefix}_{level}");
        let values = cat
            .codes
            .iter()
            .zip(&year)
            .map(|(c, y)| {
                if *c == MISSING_CODE {
                    f64::NAN
                } else if *c == level {
                    *y
                } else {
                    0.0
                }
            })
            .collect();
        frame.add_numeric(&name, values)?;
        names.push(name);
    }
    Ok(names)
}

fn require_numeric(frame: &Frame, columns: &[String]) -> Result<()> {
    let missing: Vec<&str> = columns
        .iter()
        .filter(|c| !frame.has_numeric(c))
        .map(String::as_str)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Spec(format!("missing column(s) {}", missing.join(", "))))
    }
}

fn fit_panel<E: Executor>(
    exec: &E,
    plan: &StudyPlan,
    kind: PanelKind,
    template: &SpecTemplate,
    frame: &Frame,
) -> PanelResult {
    let (table, letter) = kind.position();
    let jobs: Vec<Job<'_>> = plan
        .outcomes
        .iter()
        .map(|o| Job {
            label: template.label.clone(),
            outcome: o.clone(),
            terms: template.treatment_terms(),
            frame,
            spec: template.resolve(o, frame, &plan.cluster),
        })
        .collect();
    PanelResult {
        kind,
        table,
        letter,
        title: kind.title(&plan.robustness),
        terms: template.treatment_terms(),
        results: run_jobs(exec, &jobs, &plan.fit),
        skipped: None,
    }
}

fn skipped(plan: &StudyPlan, kind: PanelKind, terms: Vec<String>, reason: String) -> PanelResult {
    let (table, letter) = kind.position();
    PanelResult {
        kind,
        table,
        letter,
        title: kind.title(&plan.robustness),
        terms,
        results: Vec::new(),
        skipped: Some(reason),
    }
}

fn run_panel<E: Executor>(exec: &E, plan: &StudyPlan, base: &Sample<'_>, kind: PanelKind) -> Result<PanelResult> {
    let cfg = &plan.robustness;
    let persons = &base.panel.persons;
    let full = SpecTemplate {
        label: kind.title(cfg),
        ..SpecTemplate::full()
    };
    let restricted = |keep: &dyn Fn(usize) -> bool| base.restrict(keep);
    Ok(match kind {
        PanelKind::RegionalProvinceTrends | PanelKind::RegionalCountyTrends => {
            require_numeric(&base.frame, &cfg.regional_controls)?;
            let (group, prefix) = if kind == PanelKind::RegionalProvinceTrends {
                if !base.frame.has_categorical(&cfg.province_column) {
                    return Err(Error::Spec(format!("missing column {}", cfg.province_column)));
                }
                (cfg.province_column.as_str(), "trend_province")
            } else {
                (col::COUNTY, "trend_county")
            };
            let mut frame = base.frame.clone();
            let mut controls = cfg.regional_controls.clone();
            controls.extend(add_trends(&mut frame, group, prefix)?);
            let t = SpecTemplate { controls, ..full };
            fit_panel(exec, plan, kind, &t, &frame)
        }
        PanelKind::DropBornAfter => {
            let s = restricted(&|i| persons[i].birth_year <= cfg.drop_born_after);
            fit_panel(exec, plan, kind, &full, &s.frame)
        }
        PanelKind::DropBornFrom => {
            let s = restricted(&|i| persons[i].birth_year < cfg.drop_born_from);
            fit_panel(exec, plan, kind, &full, &s.frame)
        }
        PanelKind::DropBornAfterFamine => {
            let s = restricted(&|i| persons[i].birth_year <= cfg.drop_born_after_famine);
            fit_panel(exec, plan, kind, &full, &s.frame)
        }
        PanelKind::Cssi => {
            if !base.frame.has_numeric(col::CSSI) {
                let why = base
                    .diagnostics
                    .iter()
                    .find(|d| d.contains("shrinkage"))
                    .cloned()
                    .unwrap_or_else(|| "shrinkage index unavailable".into());
                return Err(Error::Spec(why));
            }
            let t = full.with_treatment(Treatment::Cssi);
            fit_panel(exec, plan, kind, &t, &base.frame)
        }
        PanelKind::BirthOrderFe => {
            let t = SpecTemplate {
                birth_order_fe: true,
                ..full
            };
            fit_panel(exec, plan, kind, &t, &base.frame)
        }
        PanelKind::ElderBrothers => {
            let t = SpecTemplate {
                elder_brothers: true,
                ..full
            };
            fit_panel(exec, plan, kind, &t, &base.frame)
        }
        PanelKind::ElderSisters => {
            let t = SpecTemplate {
                elder_sisters: true,
                ..full
            };
            fit_panel(exec, plan, kind, &t, &base.frame)
        }
        PanelKind::DropEducatedMothers => {
            let column = cfg.mother_education_column.clone();
            require_numeric(&base.frame, core::slice::from_ref(&column))?;
            let values = base.frame.numeric(&column)?;
            let keep: Vec<bool> = values.iter().map(|v| !(*v >= cfg.high_education_years)).collect();
            let s = Sample {
                panel: base.panel,
                rows: base.rows.iter().zip(&keep).filter(|(_, k)| **k).map(|(i, _)| *i).collect(),
                frame: base.frame.filter(&keep),
                diagnostics: Vec::new(),
            };
            fit_panel(exec, plan, kind, &full, &s.frame)
        }
        PanelKind::PlaceboLate | PanelKind::PlaceboEarly => unreachable!("placebo panels come from run_placebos"),
    })
}

/// Every robustness and scarring-versus-parental-response panel. Panels
/// whose inputs are missing are skipped with the reason recorded.
pub fn run_robustness_panels<E: Executor>(exec: &E, plan: &StudyPlan, panel: &Panel) -> RobustnessReport {
    let base = match Sample::new(panel, plan, &plan.cohort_filter) {
        Ok(s) => s,
        Err(e) => {
            let panels = PanelKind::ALL
                .iter()
                .map(|k| skipped(plan, *k, Vec::new(), format!("{e}")))
                .collect();
            return RobustnessReport { panels };
        }
    };
    let placebos = run_placebos(exec, plan, &base);
    let mut panels = Vec::new();
    for kind in PanelKind::ALL {
        let terms = SpecTemplate::full().treatment_terms();
        let result = match kind {
            PanelKind::PlaceboLate | PanelKind::PlaceboEarly => {
                let want = if kind == PanelKind::PlaceboLate { -1 } else { 1 };
                match &placebos {
                    Ok(p) => match p.runs.iter().find(|r| r.shift.signum() == want) {
                        Some(run) => {
                            let (table, letter) = kind.position();
                            PanelResult {
                                kind,
                                table,
                                letter,
                                title: run.label.clone(),
                                terms: super::PlaceboReport::terms().into(),
                                results: run.results.clone(),
                                skipped: None,
                            }
                        }
                        None => skipped(plan, kind, terms, "no placebo cohort with this shift direction".into()),
                    },
                    Err(e) => skipped(plan, kind, terms, format!("{e}")),
                }
            }
            _ => run_panel(exec, plan, &base, kind).unwrap_or_else(|e| skipped(plan, kind, terms, format!("{e}"))),
        };
        panels.push(result);
    }
    RobustnessReport { panels }
}
