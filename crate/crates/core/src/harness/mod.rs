//! The regression battery: main specifications, event study, placebos,
//! robustness panels and the fertility stopping-rule test, run on any
//! conforming panel (synthetic or real).

mod battery;
mod event;
mod fertility;
mod placebo;
mod robustness;
mod sample;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dgp::Population;
use crate::error::{Error, Result};
use crate::exposure::{CounterfactualMode, ExposureConfig, ExposureRecord};
use crate::fe::{fit, FitOptions, FitResult, RegressionSpec};
use crate::frame::Frame;
use crate::oracle::Executor;
use crate::panel::{DeathRateTable, PersonRecord};

pub use battery::{
    balance_check, format_significant, ipw_comparison, magnitude_line, run_main_battery, run_variant, BatteryReport,
    IpwReport, MagnitudeLine, MagnitudeUnit,
};
pub use event::{run_event_study, EventBin, EventStudyReport};
pub use fertility::{fertility_frame, run_fertility_test, FertilityReport};
pub use placebo::{placebo_edr, run_placebos, PlaceboReport, PlaceboRun, PLACEBO_EDR};
pub use robustness::{run_robustness_panels, PanelKind, PanelResult, RobustnessReport};
pub use sample::{build_frame, Sample};

/// Column names of the family-level fertility frame.
pub mod fertility_terms {
    pub use super::fertility::{
        ANY_POST, FEMALE_FAMINE, FIRST_BIRTH_YEAR, FIRST_MALE, HAD_FAMINE, MALE_FAMINE, MALE_SHARE_POST, N_FEMALE_PRE,
        N_MALE_PRE, N_POST,
    };
}

/// Column names of the analysis frame.
pub mod col {
    use alloc::format;
    use alloc::string::String;

    pub const YEARS_EDUCATION: &str = "years_education";
    pub const ILLITERATE: &str = "illiterate";
    pub const MALE: &str = "male";
    pub const EDR: &str = "edr";
    pub const EDR_DUMMY: &str = "edr_dummy";
    pub const CSSI: &str = "cssi";
    pub const CF_EDR: &str = "cf_edr";
    pub const ELDER_BROTHERS: &str = "elder_brothers";
    pub const ELDER_SISTERS: &str = "elder_sisters";
    /// Birth year minus 1960, for linear trends.
    pub const YEAR_C: &str = "year_c";
    pub const IPW: &str = "ipw";

    pub const FAMILY: &str = "family";
    pub const FAMILY_GENDER: &str = "family_gender";
    pub const GENDER: &str = "gender";
    pub const COUNTY: &str = "county";
    pub const COUNTY_GENDER: &str = "county_gender";
    pub const BIRTH_YEAR: &str = "birth_year";
    pub const BIRTH_YEAR_GENDER: &str = "birth_year_gender";
    pub const BIRTH_ORDER: &str = "birth_order";

    pub fn postnatal(age: u8) -> String {
        format!("edr_age{age}")
    }

    pub fn x_male(term: &str) -> String {
        format!("{term}_x_male")
    }

    pub fn x_female(term: &str) -> String {
        format!("{term}_x_female")
    }
}

/// Individuals with their exposures, optional death rates (needed to
/// recompute shifted or counterfactual exposures) and extra string columns
/// aligned with `persons`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub persons: Vec<PersonRecord>,
    pub exposures: Vec<ExposureRecord>,
    pub death_rates: Option<DeathRateTable>,
    pub aux: BTreeMap<String, Vec<String>>,
}

impl Panel {
    pub fn new(
        persons: Vec<PersonRecord>,
        exposures: Vec<ExposureRecord>,
        death_rates: Option<DeathRateTable>,
        aux: BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        if persons.len() != exposures.len() {
            return Err(Error::Integrity(format!(
                "{} persons but {} exposure records",
                persons.len(),
                exposures.len()
            )));
        }
        for (p, e) in persons.iter().zip(&exposures) {
            if p.person_id != e.person_id {
                return Err(Error::Integrity(format!(
                    "exposure record `{}` is not aligned with person `{}`",
                    e.person_id, p.person_id
                )));
            }
        }
        for (key, values) in &aux {
            if values.len() != persons.len() {
                return Err(Error::Integrity(format!(
                    "column `{key}` has {} values for {} persons",
                    values.len(),
                    persons.len()
                )));
            }
        }
        Ok(Self {
            persons,
            exposures,
            death_rates,
            aux,
        })
    }

    pub fn from_population(pop: &Population) -> Self {
        Self {
            persons: pop.persons.clone(),
            exposures: pop.exposures.clone(),
            death_rates: pop.death_rates.clone(),
            aux: pop.aux.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn aux_value(&self, key: &str, row: usize) -> Option<&str> {
        self.aux.get(key).map(|v| v[row].as_str())
    }
}

/// Inclusive range of birth years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YearRange {
    pub from: i32,
    pub to: i32,
}

impl YearRange {
    pub fn contains(&self, year: i32) -> bool {
        (self.from..=self.to).contains(&year)
    }
}

/// Birth-year restrictions applied to the analysis sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortFilter {
    pub min_birth_year: Option<i32>,
    pub max_birth_year: Option<i32>,
    pub exclude: Vec<YearRange>,
}

impl CohortFilter {
    pub fn keeps(&self, year: i32) -> bool {
        self.min_birth_year.is_none_or(|m| year >= m)
            && self.max_birth_year.is_none_or(|m| year <= m)
            && !self.exclude.iter().any(|r| r.contains(year))
    }

    /// Both filters applied.
    pub fn and(&self, other: &CohortFilter) -> CohortFilter {
        let tighter = |a: Option<i32>, b: Option<i32>, pick: fn(i32, i32) -> i32| match (a, b) {
            (Some(x), Some(y)) => Some(pick(x, y)),
            (x, y) => x.or(y),
        };
        let mut exclude = self.exclude.clone();
        exclude.extend(other.exclude.iter().copied());
        CohortFilter {
            min_birth_year: tighter(self.min_birth_year, other.min_birth_year, i32::max),
            max_birth_year: tighter(self.max_birth_year, other.max_birth_year, i32::min),
            exclude,
        }
    }

    pub fn max(year: i32) -> Self {
        Self {
            max_birth_year: Some(year),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiblingFe {
    #[default]
    None,
    GenderNeutral,
    GenderSpecific,
}

/// How the treatment enters: one pooled slope, one slope per gender, or a
/// pooled slope plus its interaction with the male dummy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentForm {
    #[default]
    Pooled,
    ByGender,
    GenderGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    /// Continuous prenatal excess death rate.
    #[default]
    Edr,
    /// Prenatal EDR above the median of its positive values.
    Dummy,
    /// Gestation-weighted cohort shrinkage intensity.
    Cssi,
}

impl Treatment {
    pub fn column(self) -> &'static str {
        match self {
            Treatment::Edr => col::EDR,
            Treatment::Dummy => col::EDR_DUMMY,
            Treatment::Cssi => col::CSSI,
        }
    }
}

/// A regression specification expressed through toggles; resolved into a
/// concrete [`RegressionSpec`] against the analysis frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecTemplate {
    pub label: String,
    pub sibling_fe: SiblingFe,
    /// Gender-specific county fixed effects.
    pub county_fe: bool,
    /// Gender-specific birth-year fixed effects.
    pub birth_year_fe: bool,
    pub form: TreatmentForm,
    pub treatment: Treatment,
    /// Excess death rates at ages 1 to 5 as controls.
    pub postnatal: bool,
    pub birth_order_fe: bool,
    pub elder_brothers: bool,
    pub elder_sisters: bool,
    pub ipw: bool,
    pub controls: Vec<String>,
    pub extra_fe: Vec<String>,
}

impl Default for SpecTemplate {
    fn default() -> Self {
        Self {
            label: String::new(),
            sibling_fe: SiblingFe::GenderSpecific,
            county_fe: false,
            birth_year_fe: true,
            form: TreatmentForm::GenderGap,
            treatment: Treatment::Edr,
            postnatal: false,
            birth_order_fe: false,
            elder_brothers: false,
            elder_sisters: false,
            ipw: false,
            controls: Vec::new(),
            extra_fe: Vec::new(),
        }
    }
}

impl SpecTemplate {
    /// Columns (1)–(8) of the main tables.
    pub fn main_battery() -> Vec<SpecTemplate> {
        let base = |label: &str, sibling_fe, county_fe, form, postnatal| SpecTemplate {
            label: label.into(),
            sibling_fe,
            county_fe,
            form,
            postnatal,
            ..SpecTemplate::default()
        };
        use SiblingFe::*;
        use TreatmentForm::*;
        vec![
            base("(1)", None, true, Pooled, false),
            base("(2)", None, true, ByGender, false),
            base("(3)", GenderNeutral, false, Pooled, false),
            base("(4)", GenderNeutral, false, ByGender, false),
            base("(5)", GenderSpecific, false, Pooled, false),
            base("(6)", GenderSpecific, false, ByGender, false),
            base("(7)", GenderSpecific, false, GenderGap, false),
            base("(8)", GenderSpecific, false, GenderGap, true),
        ]
    }

    /// GS-SFE, gender-gap form with postnatal controls: the base of the
    /// robustness panels.
    pub fn full() -> SpecTemplate {
        SpecTemplate {
            label: "(8)".into(),
            postnatal: true,
            ..SpecTemplate::default()
        }
    }

    pub fn with_treatment(mut self, treatment: Treatment) -> Self {
        self.treatment = treatment;
        self
    }

    /// Treatment regressors in reporting order.
    pub fn treatment_terms(&self) -> Vec<String> {
        let t = self.treatment.column();
        match self.form {
            TreatmentForm::Pooled => vec![t.into()],
            TreatmentForm::ByGender => vec![col::x_male(t), col::x_female(t)],
            TreatmentForm::GenderGap => vec![t.into(), col::x_male(t)],
        }
    }

    pub fn regressors(&self) -> Vec<String> {
        let mut out = self.treatment_terms();
        if self.postnatal {
            out.extend((1..=5).map(col::postnatal));
        }
        if self.elder_brothers {
            out.push(col::ELDER_BROTHERS.into());
        }
        if self.elder_sisters {
            out.push(col::ELDER_SISTERS.into());
        }
        out.extend(self.controls.iter().cloned());
        out
    }

    pub fn fe_dims(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        match self.sibling_fe {
            SiblingFe::None => {}
            SiblingFe::GenderNeutral => out.push(col::FAMILY.into()),
            SiblingFe::GenderSpecific => out.push(col::FAMILY_GENDER.into()),
        }
        if self.birth_year_fe {
            out.push(col::BIRTH_YEAR_GENDER.into());
        }
        if self.county_fe {
            out.push(col::COUNTY_GENDER.into());
        }
        if self.birth_order_fe {
            out.push(col::BIRTH_ORDER.into());
        }
        out.extend(self.extra_fe.iter().cloned());
        out
    }

    /// The concrete specification; every referenced column must exist.
    pub fn resolve(&self, outcome: &str, frame: &Frame, cluster: &str) -> Result<RegressionSpec> {
        let regressors = self.regressors();
        let fe_dims = self.fe_dims();
        let mut spec = RegressionSpec {
            outcome: outcome.into(),
            regressors,
            fe_dims,
            cluster_dim: cluster.into(),
            weights: self.ipw.then(|| col::IPW.to_string()),
            intercept: false,
        };
        if spec.fe_dims.is_empty() {
            spec.intercept = true;
        }
        spec.validate()?;
        let mut missing: Vec<&str> = Vec::new();
        for c in core::iter::once(&spec.outcome)
            .chain(&spec.regressors)
            .chain(spec.weights.as_ref())
        {
            if !frame.has_numeric(c) {
                missing.push(c);
            }
        }
        for c in spec.fe_dims.iter().chain(core::iter::once(&spec.cluster_dim)) {
            if !frame.has_categorical(c) {
                missing.push(c);
            }
        }
        if !missing.is_empty() {
            return Err(Error::Spec(format!(
                "specification {} references unavailable columns: {}",
                self.label,
                missing.join(", ")
            )));
        }
        Ok(spec)
    }
}

/// Cohort bin bound by year and month; open ends are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Self {
        Self { year, month }
    }

    fn index(self) -> i64 {
        crate::panel::month_index(self.year, self.month)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortBin {
    pub label: String,
    pub start: Option<YearMonth>,
    pub end: Option<YearMonth>,
}

impl CohortBin {
    pub fn years(label: &str, start: Option<i32>, end: Option<i32>) -> Self {
        Self {
            label: label.into(),
            start: start.map(|y| YearMonth::new(y, 1)),
            end: end.map(|y| YearMonth::new(y, 12)),
        }
    }

    pub fn contains(&self, year: i32, month: u8) -> bool {
        let t = crate::panel::month_index(year, month);
        self.start.is_none_or(|s| t >= s.index()) && self.end.is_none_or(|e| t <= e.index())
    }

    fn bounds(&self) -> (i64, i64) {
        (
            self.start.map_or(i64::MIN, YearMonth::index),
            self.end.map_or(i64::MAX, YearMonth::index),
        )
    }

    pub fn overlaps(&self, other: &CohortBin) -> bool {
        let (a0, a1) = self.bounds();
        let (b0, b1) = other.bounds();
        a0 <= b1 && b0 <= a1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventStudyConfig {
    pub bins: Vec<CohortBin>,
    pub omitted: CohortBin,
    pub counterfactual_mode: CounterfactualMode,
    /// Adds counterfactual EDR × bin × Male terms.
    pub triple: bool,
}

impl Default for EventStudyConfig {
    fn default() -> Self {
        Self {
            bins: vec![
                CohortBin::years("Before 1953", None, Some(1952)),
                CohortBin::years("1953-1955", Some(1953), Some(1955)),
                CohortBin::years("1956-1958", Some(1956), Some(1958)),
                CohortBin::years("1966-1968", Some(1966), Some(1968)),
                CohortBin::years("1969-1971", Some(1969), Some(1971)),
                CohortBin::years("1972-1974", Some(1972), Some(1974)),
                CohortBin::years("After 1974", Some(1975), None),
            ],
            omitted: CohortBin {
                label: "Sep 1962-Dec 1965".into(),
                start: Some(YearMonth::new(1962, 9)),
                end: Some(YearMonth::new(1965, 12)),
            },
            counterfactual_mode: CounterfactualMode::Year1960,
            triple: false,
        }
    }
}

impl EventStudyConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.bins.iter().enumerate() {
            if b.overlaps(&self.omitted) {
                return Err(Error::config(
                    "event_study.bins",
                    format!("bin `{}` overlaps the omitted cohort", b.label),
                ));
            }
            if let Some(o) = self.bins[..i].iter().find(|o| o.overlaps(b)) {
                return Err(Error::config(
                    "event_study.bins",
                    format!("bins `{}` and `{}` overlap", o.label, b.label),
                ));
            }
        }
        Ok(())
    }
}

/// A cohort assigned the prenatal exposure it would have had if born
/// `shift` years later.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceboCohort {
    pub label: String,
    pub cohort: YearRange,
    pub shift: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlaceboConfig {
    pub cohorts: Vec<PlaceboCohort>,
}

impl Default for PlaceboConfig {
    fn default() -> Self {
        Self {
            cohorts: vec![
                PlaceboCohort {
                    label: "Born 1969-1971 assigned 1959-1961 EDR".into(),
                    cohort: YearRange { from: 1969, to: 1971 },
                    shift: -10,
                },
                PlaceboCohort {
                    label: "Born 1949-1951 assigned 1959-1961 EDR".into(),
                    cohort: YearRange { from: 1949, to: 1951 },
                    shift: 10,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessConfig {
    /// Province-year controls supplied as extra columns.
    pub regional_controls: Vec<String>,
    pub province_column: String,
    pub mother_education_column: String,
    /// Mothers with at least this many years of schooling (completed
    /// middle school) are dropped.
    pub high_education_years: f64,
    pub drop_born_after: i32,
    pub drop_born_from: i32,
    pub drop_born_after_famine: i32,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            regional_controls: vec!["prov_population".into(), "prov_birth_rate".into(), "prov_gdp".into()],
            province_column: "province".into(),
            mother_education_column: "mother_education".into(),
            high_education_years: 9.0,
            drop_born_after: 1972,
            drop_born_from: 1966,
            drop_born_after_famine: 1962,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalanceConfig {
    pub variables: Vec<String>,
    pub max_birth_year: i32,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            variables: vec!["father_education".into(), "mother_education".into()],
            max_birth_year: 1971,
        }
    }
}

/// A re-run of selected main-table columns under another treatment or
/// cohort restriction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryVariant {
    pub label: String,
    pub treatment: Treatment,
    /// 1-based main-table column numbers.
    pub columns: Vec<usize>,
    #[serde(default)]
    pub cohort_filter: CohortFilter,
}

impl BatteryVariant {
    pub fn defaults() -> Vec<BatteryVariant> {
        vec![
            BatteryVariant {
                label: "Binary treatment".into(),
                treatment: Treatment::Dummy,
                columns: vec![5, 6, 7, 8],
                cohort_filter: CohortFilter::default(),
            },
            BatteryVariant {
                label: "Drop individuals born 1953-1955".into(),
                treatment: Treatment::Edr,
                columns: vec![7],
                cohort_filter: CohortFilter {
                    exclude: vec![YearRange { from: 1953, to: 1955 }],
                    ..CohortFilter::default()
                },
            },
        ]
    }
}

/// Everything the harness runs, with defaults mirroring the published
/// battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyPlan {
    pub outcomes: Vec<String>,
    /// Used whenever exposures must be recomputed from death rates.
    pub exposure: ExposureConfig,
    pub cohort_filter: CohortFilter,
    pub specifications: Vec<SpecTemplate>,
    pub variants: Vec<BatteryVariant>,
    /// Mean famine exposure used to translate coefficients into effects.
    pub magnitude_exposure: f64,
    /// 1-based column whose coefficients feed the magnitude lines.
    pub magnitude_column: usize,
    pub event_study: EventStudyConfig,
    pub placebo: PlaceboConfig,
    pub robustness: RobustnessConfig,
    pub balance: BalanceConfig,
    pub ipw_floor: f64,
    /// Extra column splitting families into parent-specific sibling groups.
    pub parent_key: Option<String>,
    pub cluster: String,
    pub fit: FitOptions,
    pub run_event_study: bool,
    pub run_placebos: bool,
    pub run_robustness: bool,
    pub run_fertility: bool,
    pub run_variants: bool,
    pub run_ipw: bool,
    pub run_balance: bool,
}

impl Default for StudyPlan {
    fn default() -> Self {
        Self {
            outcomes: vec![col::YEARS_EDUCATION.into(), col::ILLITERATE.into()],
            exposure: ExposureConfig::default(),
            cohort_filter: CohortFilter::default(),
            specifications: SpecTemplate::main_battery(),
            variants: BatteryVariant::defaults(),
            magnitude_exposure: 0.05,
            magnitude_column: 7,
            event_study: EventStudyConfig::default(),
            placebo: PlaceboConfig::default(),
            robustness: RobustnessConfig::default(),
            balance: BalanceConfig::default(),
            ipw_floor: 0.01,
            parent_key: None,
            cluster: col::COUNTY.into(),
            fit: FitOptions::default(),
            run_event_study: true,
            run_placebos: true,
            run_robustness: true,
            run_fertility: true,
            run_variants: true,
            run_ipw: true,
            run_balance: true,
        }
    }
}

impl StudyPlan {
    pub fn validate(&self) -> Result<()> {
        if self.outcomes.is_empty() {
            return Err(Error::config("outcomes", "at least one outcome is required"));
        }
        if !(self.magnitude_exposure.is_finite()) {
            return Err(Error::config("magnitude_exposure", "must be finite"));
        }
        if self.magnitude_column == 0 || self.magnitude_column > self.specifications.len() {
            return Err(Error::config(
                "magnitude_column",
                format!("must lie in 1..={}", self.specifications.len()),
            ));
        }
        if !(self.ipw_floor > 0.0 && self.ipw_floor <= 1.0) {
            return Err(Error::config("ipw_floor", "must lie in (0, 1]"));
        }
        for v in &self.variants {
            if let Some(c) = v.columns.iter().find(|c| **c == 0 || **c > self.specifications.len()) {
                return Err(Error::config(
                    "variants.columns",
                    format!("variant `{}` names column {c}, which does not exist", v.label),
                ));
            }
        }
        self.event_study.validate()
    }
}

/// Why a specification produced no estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFailure {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for SpecFailure {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

/// One fitted (or failed) specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecResult {
    pub label: String,
    pub outcome: String,
    /// Regressors shown in tables.
    pub terms: Vec<String>,
    pub spec: Option<RegressionSpec>,
    pub fit: Option<FitResult>,
    pub error: Option<SpecFailure>,
}

impl SpecResult {
    pub fn failed(label: &str, outcome: &str, terms: Vec<String>, e: &Error) -> Self {
        Self {
            label: label.into(),
            outcome: outcome.into(),
            terms,
            spec: None,
            fit: None,
            error: Some(e.into()),
        }
    }

    pub fn coef(&self, term: &str) -> Option<f64> {
        self.fit.as_ref()?.coef(term)
    }

    pub fn se(&self, term: &str) -> Option<f64> {
        self.fit.as_ref()?.se(term)
    }

    pub fn p_value(&self, term: &str) -> Option<f64> {
        self.fit.as_ref()?.p_value(term)
    }
}

/// A regression to run: a resolved (or unresolvable) specification on a
/// frame.
pub(crate) struct Job<'a> {
    pub label: String,
    pub outcome: String,
    pub terms: Vec<String>,
    pub frame: &'a Frame,
    pub spec: Result<RegressionSpec>,
}

/// Fits every job independently; results keep the job order.
pub(crate) fn run_jobs<E: Executor>(exec: &E, jobs: &[Job<'_>], opts: &FitOptions) -> Vec<SpecResult> {
    exec.run(jobs.len(), |i| {
        let job = &jobs[i];
        let spec = match &job.spec {
            Ok(s) => s,
            Err(e) => return SpecResult::failed(&job.label, &job.outcome, job.terms.clone(), e),
        };
        match fit(spec, job.frame, opts) {
            Ok(f) => SpecResult {
                label: job.label.clone(),
                outcome: job.outcome.clone(),
                terms: job.terms.clone(),
                spec: Some(spec.clone()),
                fit: Some(f),
                error: None,
            },
            Err(e) => {
                let mut r = SpecResult::failed(&job.label, &job.outcome, job.terms.clone(), &e);
                r.spec = Some(spec.clone());
                r
            }
        }
    })
}

/// Every component of the battery on one panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub n_persons: usize,
    pub n_survivors: usize,
    pub n_sample: usize,
    pub groups: crate::panel::GroupSummary,
    pub battery: BatteryReport,
    pub variants: Vec<BatteryReport>,
    pub ipw: Option<IpwReport>,
    pub balance: Option<Vec<crate::fe::BalanceRow>>,
    pub event_study: Option<EventStudyReport>,
    pub placebos: Option<PlaceboReport>,
    pub robustness: Option<RobustnessReport>,
    pub fertility: Option<FertilityReport>,
    pub diagnostics: Vec<String>,
}

/// Runs the whole battery. Components that cannot run on this panel are
/// recorded as diagnostics; only an invalid plan is an error.
pub fn run_study<E: Executor>(exec: &E, plan: &StudyPlan, panel: &Panel) -> Result<StudyReport> {
    plan.validate()?;
    let sample = Sample::new(panel, plan, &plan.cohort_filter)?;
    let mut diagnostics = sample.diagnostics.clone();
    let observed: Vec<PersonRecord> = sample.rows.iter().map(|&i| panel.persons[i].clone()).collect();
    let parent: Option<Vec<String>> = plan.parent_key.as_ref().and_then(|k| {
        panel
            .aux
            .get(k)
            .map(|v| sample.rows.iter().map(|&i| v[i].clone()).collect())
    });
    let (_, groups) = crate::panel::build_groups(&observed, parent.as_deref());

    let battery = run_main_battery(exec, plan, &sample);
    let mut variants = Vec::new();
    if plan.run_variants {
        for v in &plan.variants {
            match run_variant(exec, plan, panel, v) {
                Ok(r) => variants.push(r),
                Err(e) => diagnostics.push(format!("{}: {e}", v.label)),
            }
        }
    }
    let ipw = if plan.run_ipw {
        match ipw_comparison(exec, plan, &sample) {
            Ok(r) => Some(r),
            Err(e) => {
                diagnostics.push(format!("inverse probability weighting: {e}"));
                None
            }
        }
    } else {
        None
    };
    let balance = if plan.run_balance {
        match balance_check(plan, panel) {
            Ok(r) => Some(r),
            Err(e) => {
                diagnostics.push(format!("balance check: {e}"));
                None
            }
        }
    } else {
        None
    };
    let event_study = if plan.run_event_study {
        match run_event_study(exec, plan, &sample) {
            Ok(r) => Some(r),
            Err(e) => {
                diagnostics.push(format!("event study: {e}"));
                None
            }
        }
    } else {
        None
    };
    let placebos = if plan.run_placebos {
        match run_placebos(exec, plan, &sample) {
            Ok(r) => Some(r),
            Err(e) => {
                diagnostics.push(format!("placebos: {e}"));
                None
            }
        }
    } else {
        None
    };
    let robustness = plan
        .run_robustness
        .then(|| run_robustness_panels(exec, plan, panel));
    let fertility = if plan.run_fertility {
        match run_fertility_test(exec, plan, panel) {
            Ok(r) => Some(r),
            Err(e) => {
                diagnostics.push(format!("fertility test: {e}"));
                None
            }
        }
    } else {
        None
    };
    Ok(StudyReport {
        n_persons: panel.len(),
        n_survivors: panel.persons.iter().filter(|p| p.survived).count(),
        n_sample: sample.rows.len(),
        groups,
        battery,
        variants,
        ipw,
        balance,
        event_study,
        placebos,
        robustness,
        fertility,
        diagnostics,
    })
}

#[cfg(test)]
mod tests;
