use super::*;
use crate::dgp::{simulate_population, DgpConfig};
use crate::exposure::shift_birth_year;
use crate::oracle::Sequential;
use crate::panel::Gender;

fn small_panel(seed: u64) -> Panel {
    let cfg = DgpConfig {
        n_families: 800,
        n_counties: 24,
        ..DgpConfig::default()
    };
    Panel::from_population(&simulate_population(&cfg, seed).unwrap())
}

#[test]
fn battery_runs_every_column() {
    let panel = small_panel(1);
    let plan = StudyPlan::default();
    let sample = Sample::new(&panel, &plan, &plan.cohort_filter).unwrap();
    let report = run_main_battery(&Sequential, &plan, &sample);
    assert_eq!(report.results.len(), 16);
    for r in &report.results {
        assert!(r.error.is_none(), "{} {}: {:?}", r.label, r.outcome, r.error);
        for t in &r.terms {
            assert!(r.coef(t).unwrap().is_finite());
        }
    }
    assert_eq!(report.magnitudes.len(), 2);
    let col7 = report.get(col::YEARS_EDUCATION, "(7)").unwrap();
    assert_eq!(report.magnitudes[0].coefficient, col7.coef(col::EDR).unwrap());
}

#[test]
fn zero_exposure_is_collinear_per_spec() {
    let mut panel = small_panel(2);
    for e in &mut panel.exposures {
        e.prenatal_edr = 0.0;
    }
    let plan = StudyPlan::default();
    let sample = Sample::new(&panel, &plan, &plan.cohort_filter).unwrap();
    let report = run_main_battery(&Sequential, &plan, &sample);
    assert!(report.magnitudes.is_empty());
    for r in &report.results {
        assert_eq!(r.error.as_ref().unwrap().kind, "collinearity", "{}", r.label);
    }
}

#[test]
fn missing_column_fails_only_that_spec() {
    let panel = small_panel(3);
    let mut plan = StudyPlan::default();
    plan.specifications.push(SpecTemplate {
        label: "(9)".into(),
        controls: vec!["no_such_column".into()],
        ..SpecTemplate::default()
    });
    let sample = Sample::new(&panel, &plan, &plan.cohort_filter).unwrap();
    let report = run_main_battery(&Sequential, &plan, &sample);
    let bad = report.get(col::YEARS_EDUCATION, "(9)").unwrap();
    assert_eq!(bad.error.as_ref().unwrap().kind, "specification");
    assert!(report.get(col::YEARS_EDUCATION, "(8)").unwrap().fit.is_some());
}

#[test]
fn templates_resolve_to_expected_designs() {
    let main = SpecTemplate::main_battery();
    assert_eq!(main[0].fe_dims(), ["birth_year_gender", "county_gender"]);
    assert_eq!(main[1].regressors(), ["edr_x_male", "edr_x_female"]);
    assert_eq!(main[2].fe_dims(), ["family", "birth_year_gender"]);
    assert_eq!(main[5].fe_dims(), ["family_gender", "birth_year_gender"]);
    assert_eq!(main[6].regressors(), ["edr", "edr_x_male"]);
    assert_eq!(main[7].regressors().len(), 7);
    let dummy = main[4].clone().with_treatment(Treatment::Dummy);
    assert_eq!(dummy.regressors(), ["edr_dummy"]);
}

#[test]
fn omitted_cohort_must_not_overlap_bins() {
    let mut cfg = EventStudyConfig::default();
    cfg.validate().unwrap();
    cfg.bins.push(CohortBin::years("1964-1966", Some(1964), Some(1966)));
    let err = cfg.validate().unwrap_err();
    assert!(matches!(err, Error::Config { ref key, .. } if key == "event_study.bins"));
}

#[test]
fn default_bins_leave_famine_and_omitted_cohorts_uncovered() {
    let cfg = EventStudyConfig::default();
    for (y, m) in [(1959, 1), (1961, 6), (1962, 8), (1962, 9), (1965, 12)] {
        assert!(cfg.bins.iter().all(|b| !b.contains(y, m)), "{y}-{m}");
    }
    assert!(cfg.omitted.contains(1962, 9));
    assert!(!cfg.omitted.contains(1962, 8));
    assert!(cfg.bins[0].contains(1900, 1));
    assert!(cfg.bins[6].contains(1980, 1));
}

#[test]
fn event_study_has_zero_bin_regressors_in_omitted_cohort() {
    let panel = small_panel(4);
    let plan = StudyPlan::default();
    let sample = Sample::new(&panel, &plan, &plan.cohort_filter).unwrap();
    let report = run_event_study(&Sequential, &plan, &sample).unwrap();
    assert_eq!(report.results.len(), 2);
    let fit = report.results[0].fit.as_ref().unwrap();
    assert!(report.bin_terms().iter().all(|t| fit.coef(t).is_some()));
    assert!(report.bins.iter().all(|b| !b.dropped));
}

#[test]
fn empty_bin_is_dropped_with_diagnostic() {
    let panel = small_panel(5);
    let mut plan = StudyPlan::default();
    plan.event_study.bins.push(CohortBin::years("1930s", Some(1930), Some(1939)));
    plan.event_study.bins[0].end = Some(YearMonth::new(1929, 12));
    let sample = Sample::new(&panel, &plan, &plan.cohort_filter).unwrap();
    let report = run_event_study(&Sequential, &plan, &sample).unwrap();
    assert!(report.bins[0].dropped && report.bins[7].dropped);
    assert_eq!(report.diagnostics.len(), 2);
    assert!(report.results[0].fit.is_some());
}

#[test]
fn triples_add_male_terms() {
    let panel = small_panel(6);
    let mut plan = StudyPlan::default();
    plan.event_study.triple = true;
    let sample = Sample::new(&panel, &plan, &plan.cohort_filter).unwrap();
    let report = run_event_study(&Sequential, &plan, &sample).unwrap();
    assert_eq!(report.bin_terms().len(), 14);
    let fit = report.results[0].fit.as_ref().unwrap();
    assert!(fit.coef("cf_bin1_x_male").is_some());
    assert!(fit.coef("edr_x_male").is_some());
}

#[test]
fn placebo_shift_is_an_involution() {
    let panel = small_panel(7);
    let table = panel.death_rates.as_ref().unwrap();
    let cfg = ExposureConfig::default();
    for p in panel.persons.iter().take(300) {
        let there = shift_birth_year(p.birth_year, 10);
        let back = shift_birth_year(there, -10);
        assert_eq!(back, p.birth_year);
        let direct = crate::exposure::prenatal_edr(p.birth_year, p.birth_month, &p.county_id, table, cfg.window_convention, false).unwrap();
        let round = placebo_edr(there, p.birth_month, &p.county_id, -10, table, &cfg).unwrap();
        assert_eq!(direct.to_bits(), round.to_bits());
    }
}

#[test]
fn placebos_run_and_empty_cohort_errors() {
    let panel = small_panel(8);
    let mut plan = StudyPlan::default();
    let sample = Sample::new(&panel, &plan, &plan.cohort_filter).unwrap();
    let report = run_placebos(&Sequential, &plan, &sample).unwrap();
    assert_eq!(report.runs.len(), 2);
    for run in &report.runs {
        assert!(run.n_cohort > 0);
        assert!(run.results.iter().all(|r| r.coef(PLACEBO_EDR).is_some()));
    }
    plan.placebo.cohorts[0].cohort = YearRange { from: 1900, to: 1902 };
    assert!(matches!(run_placebos(&Sequential, &plan, &sample), Err(Error::Spec(_))));
}

#[test]
fn robustness_panels_run_or_skip() {
    let panel = small_panel(9);
    let plan = StudyPlan::default();
    let report = run_robustness_panels(&Sequential, &plan, &panel);
    assert_eq!(report.panels.len(), 12);
    for p in &report.panels {
        assert!(p.skipped.is_none(), "{:?}: {:?}", p.kind, p.skipped);
        for r in &p.results {
            assert!(r.error.is_none(), "{:?} {}: {:?}", p.kind, r.outcome, r.error);
            assert!(r.fit.as_ref().unwrap().n_effective > 0);
        }
    }
    let mut stripped = panel.clone();
    stripped.aux.remove("prov_gdp");
    stripped.aux.remove("mother_education");
    let report = run_robustness_panels(&Sequential, &plan, &stripped);
    assert!(report.panel(PanelKind::RegionalProvinceTrends).unwrap().skipped.is_some());
    assert!(report.panel(PanelKind::RegionalCountyTrends).unwrap().skipped.is_some());
    assert!(report.panel(PanelKind::DropEducatedMothers).unwrap().skipped.is_some());
    assert!(report.panel(PanelKind::BirthOrderFe).unwrap().skipped.is_none());
}

#[test]
fn birth_order_and_elder_counts() {
    let mk = |id: &str, g: Gender, y: i32, m: u8| PersonRecord {
        person_id: id.into(),
        family_id: "f".into(),
        gender: g,
        birth_year: y,
        birth_month: m,
        county_id: "c".into(),
        years_education: Some(5.0),
        illiterate: Some(0),
        survived: true,
    };
    let persons = vec![
        mk("c", Gender::Female, 1960, 1),
        mk("a", Gender::Male, 1955, 3),
        mk("b", Gender::Male, 1957, 3),
        mk("d", Gender::Female, 1962, 1),
    ];
    let exposures = persons
        .iter()
        .map(|p| ExposureRecord {
            person_id: p.person_id.clone(),
            prenatal_edr: 0.0,
            postnatal_edr: [0.0; 5],
            binary_treatment: 0,
            counterfactual_1960_edr: 0.0,
        })
        .collect();
    let panel = Panel::new(persons, exposures, None, BTreeMap::new()).unwrap();
    let plan = StudyPlan::default();
    let (frame, diagnostics) = build_frame(&panel, &[0, 1, 2, 3], &plan).unwrap();
    assert_eq!(frame.numeric(col::ELDER_BROTHERS).unwrap(), &[2.0, 0.0, 1.0, 2.0]);
    assert_eq!(frame.numeric(col::ELDER_SISTERS).unwrap(), &[0.0, 0.0, 0.0, 1.0]);
    assert_eq!(frame.categorical(col::BIRTH_ORDER).unwrap().codes, vec![2, 0, 1, 3]);
    assert!(diagnostics.is_empty());
}

#[test]
fn fertility_test_shapes() {
    let panel = small_panel(10);
    let (frame, excluded) = fertility_frame(&panel).unwrap();
    assert!(frame.n_rows() > 0);
    assert!(excluded > 0);
    let report = run_fertility_test(&Sequential, &StudyPlan::default(), &panel).unwrap();
    assert_eq!(report.results.len(), 6);
    for r in &report.results {
        assert!(r.error.is_none(), "{}: {:?}", r.label, r.error);
    }
    let ratio = &report.results[4];
    assert_eq!(
        ratio.fit.as_ref().unwrap().n_effective + ratio.fit.as_ref().unwrap().dropped_singletons
            + ratio.fit.as_ref().unwrap().dropped_missing,
        report.n_families
    );
    assert_eq!(ratio.fit.as_ref().unwrap().dropped_missing, report.n_undefined_ratio);
}

#[test]
fn single_family_fertility_is_degenerate() {
    let mut panel = small_panel(11);
    let first = panel.persons[0].family_id.clone();
    let keep: Vec<bool> = panel.persons.iter().map(|p| p.family_id == first).collect();
    let pick = |v: &Vec<String>| v.iter().zip(&keep).filter(|(_, k)| **k).map(|(x, _)| x.clone()).collect();
    panel.aux = panel.aux.iter().map(|(k, v)| (k.clone(), pick(v))).collect();
    panel.exposures = panel.exposures.iter().zip(&keep).filter(|(_, k)| **k).map(|(e, _)| e.clone()).collect();
    panel.persons.retain(|p| p.family_id == first);
    panel.persons[0].birth_year = 1955;
    panel.persons[0].survived = true;
    let report = run_fertility_test(&Sequential, &StudyPlan::default(), &panel).unwrap();
    assert!(report.results.iter().all(|r| r.error.is_some()));
}

#[test]
fn study_is_deterministic() {
    let panel = small_panel(12);
    let plan = StudyPlan::default();
    let a = run_study(&Sequential, &plan, &panel).unwrap();
    let b = run_study(&Sequential, &plan, &panel).unwrap();
    assert_eq!(a, b);
    assert_eq!(crate::report::render_study(&a), crate::report::render_study(&b));
    assert!(a.ipw.is_some());
    assert!(a.balance.is_some());
    assert_eq!(a.variants.len(), 2);
}

#[test]
fn magnitude_lines_reproduce_published_arithmetic() {
    let years = magnitude_line(col::YEARS_EDUCATION, -6.268, 0.05);
    assert_eq!(years.text, "Years of education: 0.05 × 6.268 = 0.3134 years (decrease)");
    let illit = magnitude_line(col::ILLITERATE, 0.829, 0.05);
    assert_eq!(illit.text, "Illiterate: 0.05 × 0.829 = 0.04145 ≈ 4.1 pp (increase)");
}

#[test]
fn cohort_filter_combination() {
    let a = CohortFilter::max(1972);
    let b = CohortFilter {
        max_birth_year: Some(1965),
        exclude: vec![YearRange { from: 1953, to: 1955 }],
        ..CohortFilter::default()
    };
    let c = a.and(&b);
    assert!(c.keeps(1950) && !c.keeps(1954) && !c.keeps(1966) && c.keeps(1965));
}

#[test]
fn plan_rejects_bad_settings() {
    let plan = StudyPlan {
        magnitude_column: 12,
        ..StudyPlan::default()
    };
    assert!(matches!(plan.validate(), Err(Error::Config { key, .. }) if key == "magnitude_column"));
    let plan = StudyPlan {
        ipw_floor: 0.0,
        ..StudyPlan::default()
    };
    assert!(matches!(plan.validate(), Err(Error::Config { key, .. }) if key == "ipw_floor"));
}
