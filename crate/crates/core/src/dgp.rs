//! Synthetic populations from the structural selection model.
//!
//! Outcome `Y = β0 + β_i·EDR + α_jg + ε_i`, survival
//! `S = 1{γ0 + γ_g·EDR + ξ_jg + η_i ≥ 0}`, with family-by-gender components
//! `(α_jg, ξ_jg)` and individual components `(ε_i, η_i)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::{self, ExposureConfig, ExposureRecord};
use crate::linalg::{psd_factor, Matrix};
use crate::panel::{DeathRateTable, Gender, PersonRecord, DEFAULT_BASELINE, FAMINE_YEARS};
use crate::rng::{substream, Domain, StreamRng};

/// Distribution of famine intensity (a county-year EDR, or a person's
/// exposure under [`ExposureModel::IidPerson`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum EdrDist {
    /// Log-normal with the given mean and standard deviation.
    LogNormal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Constant { value: f64 },
}

impl Default for EdrDist {
    fn default() -> Self {
        EdrDist::LogNormal { mean: 0.081, sd: 0.178 }
    }
}

impl EdrDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EdrDist::LogNormal { mean, sd } => {
                if !(mean > 0.0 && sd > 0.0 && mean.is_finite() && sd.is_finite()) {
                    return Err(Error::config("edr_dist", "log-normal needs mean > 0 and sd > 0"));
                }
            }
            EdrDist::Uniform { low, high } => {
                if !(low >= 0.0 && high > low && high.is_finite()) {
                    return Err(Error::config("edr_dist", "uniform needs 0 <= low < high"));
                }
            }
            EdrDist::Constant { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::config("edr_dist", "constant must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// `(μ, σ)` of the underlying normal for the log-normal case.
    pub fn log_params(mean: f64, sd: f64) -> (f64, f64) {
        let s2 = libm::log1p((sd / mean) * (sd / mean));
        (libm::log(mean) - 0.5 * s2, libm::sqrt(s2))
    }

    pub fn mean(&self) -> f64 {
        match *self {
            EdrDist::LogNormal { mean, .. } => mean,
            EdrDist::Uniform { low, high } => 0.5 * (low + high),
            EdrDist::Constant { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            EdrDist::LogNormal { sd, .. } => sd * sd,
            EdrDist::Uniform { low, high } => (high - low) * (high - low) / 12.0,
            EdrDist::Constant { .. } => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EdrDist::LogNormal { mean, sd } => {
                let (mu, sigma) = Self::log_params(mean, sd);
                LogNormal::new(mu, sigma).expect("validated").sample(rng)
            }
            EdrDist::Uniform { low, high } => rng.random_range(low..high),
            EdrDist::Constant { value } => value,
        }
    }
}

/// How exposures are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ExposureModel {
    /// County-year death rates are drawn and exposures built from birth
    /// dates through the gestation weighting.
    #[default]
    Calendar,
    /// Each person is exposed with probability `famine_share`, with an
    /// exposure drawn independently from the intensity distribution.
    /// Birth dates are still drawn but carry no exposure information.
    IidPerson { famine_share: f64 },
}

/// Innovation law. Both are scaled to unit variance before the covariance
/// factor is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDist {
    #[default]
    Gaussian,
    Uniform,
}

/// Individual treatment effects `β_i = β_g + eta_loading·η_i + sd·ζ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroEffects {
    pub sd: f64,
    #[serde(default)]
    pub eta_loading: f64,
}

/// Gender-specific mortality sensitivity in `EDR_ig = λ_g·F*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attenuation {
    pub lambda_male: f64,
    pub lambda_female: f64,
}

impl Attenuation {
    pub fn lambda(&self, g: Gender) -> f64 {
        match g {
            Gender::Male => self.lambda_male,
            Gender::Female => self.lambda_female,
        }
    }
}

/// Departures from the identifying assumptions, used to show that the
/// diagnostics have power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Violations {
    /// Probability that a family stops childbearing right after a surviving
    /// son born in a famine year.
    pub stopping_rule: f64,
    /// Adds `κ · cf_c · (birth_year − 1962)` to the outcome, where `cf_c` is
    /// the county's counterfactual 1960 EDR.
    pub county_cohort_trend: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DgpConfig {
    pub n_families: usize,
    pub n_counties: usize,
    pub counties_per_province: usize,
    pub beta0: f64,
    pub beta_male: f64,
    pub beta_female: f64,
    pub gamma0: f64,
    pub gamma_male: f64,
    pub gamma_female: f64,
    pub var_alpha: f64,
    pub var_xi: f64,
    pub var_eps: f64,
    pub var_eta: f64,
    pub cov_alpha_xi: f64,
    pub cov_eps_eta: f64,
    /// Must equal `cov_alpha_xi + cov_eps_eta` when given.
    pub sigma_uv: Option<f64>,
    /// Correlation of the family components across the two genders of one
    /// family; 1 makes them gender-neutral.
    pub cross_gender_corr: f64,
    pub error_dist: ErrorDist,
    pub hetero_effects: Option<HeteroEffects>,
    pub attenuation: Option<Attenuation>,
    /// Probability mass over children per family.
    pub family_size_dist: Vec<(usize, f64)>,
    pub birth_years: (i32, i32),
    pub exposure_model: ExposureModel,
    pub edr_dist: EdrDist,
    /// Range of county baseline death rates.
    pub baseline_rate: (f64, f64),
    pub exposure: ExposureConfig,
    /// `illiterate = 1{Y < threshold}`.
    pub illiteracy_threshold: f64,
    /// Report `max(0, Y)` as years of education instead of `Y`.
    pub censor_education: bool,
    /// Probability mass over mothers' years of schooling.
    pub mother_education_dist: Vec<(f64, f64)>,
    pub violations: Violations,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n_families: 2000,
            n_counties: 60,
            counties_per_province: 6,
            beta0: 7.0,
            beta_male: -6.268,
            beta_female: -6.268,
            gamma0: 1.5,
            gamma_male: -4.0,
            gamma_female: -2.0,
            var_alpha: 4.0,
            var_xi: 1.0,
            var_eps: 12.0,
            var_eta: 1.0,
            cov_alpha_xi: 1.0,
            cov_eps_eta: 0.0,
            sigma_uv: None,
            cross_gender_corr: 0.5,
            error_dist: ErrorDist::Gaussian,
            hetero_effects: None,
            attenuation: None,
            family_size_dist: vec![(2, 0.15), (3, 0.25), (4, 0.25), (5, 0.2), (6, 0.15)],
            birth_years: (1949, 1979),
            exposure_model: ExposureModel::Calendar,
            edr_dist: EdrDist::default(),
            baseline_rate: (0.010, 0.014),
            exposure: ExposureConfig::default(),
            illiteracy_threshold: 3.0,
            censor_education: true,
            mother_education_dist: vec![(0.0, 0.45), (3.0, 0.2), (6.0, 0.2), (9.0, 0.1), (12.0, 0.05)],
            violations: Violations::default(),
        }
    }
}

fn nonneg(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite and >= 0, got {v}")))
    }
}

fn check_pmf<T>(key: &str, pmf: &[(T, f64)]) -> Result<()> {
    if pmf.is_empty() || pmf.iter().any(|(_, p)| !(*p >= 0.0)) {
        return Err(Error::config(key, "needs nonnegative probabilities"));
    }
    let total: f64 = pmf.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(key, format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn draw_pmf<T: Copy, R: Rng + ?Sized>(pmf: &[(T, f64)], rng: &mut R) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (v, p) in pmf {
        acc += p;
        if u < acc {
            return *v;
        }
    }
    pmf[pmf.len() - 1].0
}

impl DgpConfig {
    pub fn beta(&self, g: Gender) -> f64 {
        match g {
            Gender::Male => self.beta_male,
            Gender::Female => self.beta_female,
        }
    }

    pub fn gamma(&self, g: Gender) -> f64 {
        match g {
            Gender::Male => self.gamma_male,
            Gender::Female => self.gamma_female,
        }
    }

    /// `Cov(u, v)`.
    pub fn implied_sigma_uv(&self) -> f64 {
        self.cov_alpha_xi + self.cov_eps_eta
    }

    /// `sd(v)`.
    pub fn sd_v(&self) -> f64 {
        libm::sqrt(self.var_xi + self.var_eta)
    }

    /// Covariance of `(α_m, α_f, ξ_m, ξ_f)`.
    pub fn family_covariance(&self) -> Matrix {
        let r = self.cross_gender_corr;
        let (va, vx, c) = (self.var_alpha, self.var_xi, self.cov_alpha_xi);
        Matrix::from_rows(&[
            vec![va, r * va, c, r * c],
            vec![r * va, va, r * c, c],
            vec![c, r * c, vx, r * vx],
            vec![r * c, c, r * vx, vx],
        ])
    }

    pub fn individual_covariance(&self) -> Matrix {
        Matrix::from_rows(&[
            vec![self.var_eps, self.cov_eps_eta],
            vec![self.cov_eps_eta, self.var_eta],
        ])
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("var_alpha", self.var_alpha),
            ("var_xi", self.var_xi),
            ("var_eps", self.var_eps),
            ("var_eta", self.var_eta),
        ] {
            nonneg(k, v)?;
        }
        if !(self.var_eps > 0.0) {
            return Err(Error::config("var_eps", "must be > 0"));
        }
        if !(self.var_eta > 0.0) {
            return Err(Error::config("var_eta", "must be > 0"));
        }
        if !(self.cross_gender_corr.abs() <= 1.0) {
            return Err(Error::config("cross_gender_corr", "must lie in [-1, 1]"));
        }
        if let Some(s) = self.sigma_uv {
            let implied = self.implied_sigma_uv();
            if (s - implied).abs() > 1e-12 * (1.0 + implied.abs()) {
                return Err(Error::config(
                    "sigma_uv",
                    format!("{s} differs from cov_alpha_xi + cov_eps_eta = {implied}"),
                ));
            }
        }
        if psd_factor(&self.family_covariance()).is_none() {
            return Err(Error::config(
                "cov_alpha_xi",
                "family covariance of (alpha, xi) is not positive semidefinite",
            ));
        }
        if psd_factor(&self.individual_covariance()).is_none() {
            return Err(Error::config(
                "cov_eps_eta",
                "individual covariance of (eps, eta) is not positive semidefinite",
            ));
        }
        for (k, v) in [
            ("beta0", self.beta0),
            ("beta_male", self.beta_male),
            ("beta_female", self.beta_female),
            ("gamma0", self.gamma0),
            ("gamma_male", self.gamma_male),
            ("gamma_female", self.gamma_female),
            ("illiteracy_threshold", self.illiteracy_threshold),
        ] {
            if !v.is_finite() {
                return Err(Error::config(k, "must be finite"));
            }
        }
        if let Some(a) = self.attenuation {
            if !(a.lambda_male > 0.0 && a.lambda_female > 0.0) {
                return Err(Error::config("attenuation", "lambdas must be > 0"));
            }
        }
        if let Some(h) = self.hetero_effects {
            nonneg("hetero_effects.sd", h.sd)?;
            if !h.eta_loading.is_finite() {
                return Err(Error::config("hetero_effects.eta_loading", "must be finite"));
            }
        }
        if self.n_families == 0 {
            return Err(Error::config("n_families", "must be > 0"));
        }
        if self.n_counties == 0 {
            return Err(Error::config("n_counties", "must be > 0"));
        }
        if self.counties_per_province == 0 {
            return Err(Error::config("counties_per_province", "must be > 0"));
        }
        check_pmf("family_size_dist", &self.family_size_dist)?;
        if self.family_size_dist.iter().any(|(k, _)| *k == 0) {
            return Err(Error::config("family_size_dist", "family sizes must be >= 1"));
        }
        check_pmf("mother_education_dist", &self.mother_education_dist)?;
        if self.birth_years.0 > self.birth_years.1 {
            return Err(Error::config("birth_years", "start after end"));
        }
        self.edr_dist.validate()?;
        let (lo, hi) = self.baseline_rate;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::config("baseline_rate", "needs 0 < low <= high"));
        }
        nonneg("violations.stopping_rule", self.violations.stopping_rule)?;
        if self.violations.stopping_rule > 1.0 {
            return Err(Error::config("violations.stopping_rule", "is a probability"));
        }
        if let ExposureModel::IidPerson { famine_share } = self.exposure_model {
            if !(0.0..=1.0).contains(&famine_share) {
                return Err(Error::config("exposure_model.famine_share", "must lie in [0, 1]"));
            }
            if self.violations.county_cohort_trend != 0.0 {
                return Err(Error::config(
                    "violations.county_cohort_trend",
                    "needs the calendar exposure model",
                ));
            }
        }
        Ok(())
    }
}

/// Latent components of one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDraw {
    pub person_id: String,
    pub alpha_jg: f64,
    pub xi_jg: f64,
    pub eps_i: f64,
    pub eta_i: f64,
    pub u_ig: f64,
    pub v_ig: f64,
    pub beta_i: f64,
    pub f_star: f64,
    /// Uncensored outcome.
    pub outcome: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct GenderTruth {
    pub beta: f64,
    pub gamma: f64,
    pub n_persons: usize,
    pub n_survivors: usize,
    pub n_treated: usize,
    pub n_treated_survivors: usize,
    /// Mean `β_i` among treated survivors.
    pub survivor_att: Option<f64>,
    /// Mean `β_i` among all treated.
    pub treated_att: Option<f64>,
}

/// Structural parameters and realized population quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub seed: u64,
    pub config: DgpConfig,
    pub sigma_uv: f64,
    pub n_families: usize,
    pub n_persons: usize,
    pub n_survivors: usize,
    pub male: GenderTruth,
    pub female: GenderTruth,
    pub survivor_att: Option<f64>,
    pub treated_att: Option<f64>,
}

/// A simulated population. All person-level vectors are aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub persons: Vec<PersonRecord>,
    pub latents: Vec<LatentDraw>,
    pub exposures: Vec<ExposureRecord>,
    /// Present under the calendar exposure model.
    pub death_rates: Option<DeathRateTable>,
    /// Extra person-level columns: `mother_education`, `province` and the
    /// province-year controls `prov_population`, `prov_birth_rate`,
    /// `prov_gdp`.
    pub aux: BTreeMap<String, Vec<String>>,
    pub truth: TruthSummary,
}

impl Population {
    pub fn survivor_mask(&self) -> Vec<bool> {
        self.persons.iter().map(|p| p.survived).collect()
    }
}

fn standard<R: Rng + ?Sized>(dist: ErrorDist, rng: &mut R) -> f64 {
    match dist {
        ErrorDist::Gaussian => StandardNormal.sample(rng),
        ErrorDist::Uniform => {
            let s3 = libm::sqrt(3.0);
            rng.random_range(-s3..s3)
        }
    }
}

fn correlated<R: Rng + ?Sized>(factor: &Matrix, dist: ErrorDist, rng: &mut R) -> Vec<f64> {
    let n = factor.rows();
    let z: Vec<f64> = (0..n).map(|_| standard(dist, rng)).collect();
    (0..n)
        .map(|i| (0..=i).map(|j| factor[(i, j)] * z[j]).sum())
        .collect()
}

pub fn county_id(c: usize) -> String {
    format!("c{c:03}")
}

pub fn province_id(p: usize) -> String {
    format!("p{p:02}")
}

/// County death-rate table: baseline years around a county level, famine
/// years at baseline mean plus an intensity draw, other years at the
/// county level.
pub fn draw_death_rates(cfg: &DgpConfig, seed: u64) -> Result<DeathRateTable> {
    let mut table = DeathRateTable::new();
    let (lo, hi) = cfg.baseline_rate;
    let first = cfg.birth_years.0.min(DEFAULT_BASELINE.0) - 1;
    let last = cfg.birth_years.1 + 6;
    for c in 0..cfg.n_counties {
        let mut rng = substream(seed, Domain::County, c as u64);
        let level = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let baseline: Vec<f64> = (DEFAULT_BASELINE.0..=DEFAULT_BASELINE.1)
            .map(|_| level * (1.0 + rng.random_range(-0.05..0.05)))
            .collect();
        let mean = baseline.iter().sum::<f64>() / baseline.len() as f64;
        let excess: Vec<f64> = FAMINE_YEARS.iter().map(|_| cfg.edr_dist.sample(&mut rng)).collect();
        let id = county_id(c);
        for year in first..=last {
            let rate = if let Some(k) = FAMINE_YEARS.iter().position(|y| *y == year) {
                mean + excess[k]
            } else if (DEFAULT_BASELINE.0..=DEFAULT_BASELINE.1).contains(&year) {
                baseline[(year - DEFAULT_BASELINE.0) as usize]
            } else {
                level
            };
            table.insert(&id, year, rate)?;
        }
    }
    Ok(table)
}

struct ProvinceControls {
    population: f64,
    birth_rate: f64,
    gdp: f64,
}

fn province_controls(seed: u64, province: usize, year: i32) -> ProvinceControls {
    let mut rng = substream(seed, Domain::Province, ((province as u64) << 16) | (year as u64 & 0xffff));
    let t = (year - 1960) as f64;
    ProvinceControls {
        population: 20.0 + province as f64 + 0.3 * t + rng.random_range(-0.5..0.5),
        birth_rate: 0.035 - 0.0004 * t + rng.random_range(-0.002..0.002),
        gdp: 100.0 + 3.0 * t + 5.0 * province as f64 + rng.random_range(-2.0..2.0),
    }
}

struct Child {
    gender: Gender,
    year: i32,
    month: u8,
}

/// Draws a population. Families are independent given the county table,
/// each on its own random stream, so the result depends only on
/// `(config, seed)`.
pub fn simulate_population(cfg: &DgpConfig, seed: u64) -> Result<Population> {
    cfg.validate()?;
    let fam_factor = psd_factor(&cfg.family_covariance()).expect("validated");
    let ind_factor = psd_factor(&cfg.individual_covariance()).expect("validated");
    let table = match cfg.exposure_model {
        ExposureModel::Calendar => Some(draw_death_rates(cfg, seed)?),
        ExposureModel::IidPerson { .. } => None,
    };
    let cf_by_county: Vec<f64> = match &table {
        Some(t) => (0..cfg.n_counties)
            .map(|c| {
                exposure::counterfactual_1960_edr(
                    &county_id(c),
                    t,
                    cfg.exposure.counterfactual_mode,
                    cfg.exposure.floor_negative_edr,
                )
            })
            .collect::<Result<_>>()?,
        None => vec![0.0; cfg.n_counties],
    };

    let months_total = ((cfg.birth_years.1 - cfg.birth_years.0 + 1) * 12) as u32;
    let mut persons = Vec::new();
    let mut latents = Vec::new();
    let mut exposures = Vec::new();
    let mut aux: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for key in ["mother_education", "province", "prov_population", "prov_birth_rate", "prov_gdp"] {
        aux.insert(key.into(), Vec::new());
    }

    for f in 0..cfg.n_families {
        let mut rng: StreamRng = substream(seed, Domain::Family, f as u64);
        let county = f % cfg.n_counties;
        let province = county / cfg.counties_per_province;
        let cid = county_id(county);
        let family_id = format!("f{f:06}");
        let size = draw_pmf(&cfg.family_size_dist, &mut rng);
        let fam = correlated(&fam_factor, cfg.error_dist, &mut rng);
        let mother_edu = draw_pmf(&cfg.mother_education_dist, &mut rng);

        let mut children: Vec<Child> = (0..size)
            .map(|_| {
                let gender = if rng.random::<bool>() { Gender::Male } else { Gender::Female };
                let m = rng.random_range(0..months_total) as i32;
                Child {
                    gender,
                    year: cfg.birth_years.0 + m / 12,
                    month: (m % 12 + 1) as u8,
                }
            })
            .collect();
        children.sort_by_key(|c| (c.year, c.month));

        for (k, child) in children.iter().enumerate() {
            let g = child.gender;
            let alpha = fam[g.index()];
            let xi = fam[2 + g.index()];
            let ind = correlated(&ind_factor, cfg.error_dist, &mut rng);
            let (eps, eta) = (ind[0], ind[1]);
            let zeta = standard(ErrorDist::Gaussian, &mut rng);
            let exposed_draw: f64 = rng.random();
            let intensity = cfg.edr_dist.sample(&mut rng);
            let person_id = format!("{family_id}-{k}");
            let mut person = PersonRecord {
                person_id: person_id.clone(),
                family_id: family_id.clone(),
                gender: g,
                birth_year: child.year,
                birth_month: child.month,
                county_id: cid.clone(),
                years_education: None,
                illiterate: None,
                survived: false,
            };
            let exposure = match (&table, &cfg.exposure_model) {
                (Some(t), _) => exposure::exposure_for(&person, t, &cfg.exposure)?,
                (None, ExposureModel::IidPerson { famine_share }) => ExposureRecord {
                    person_id: person_id.clone(),
                    prenatal_edr: if exposed_draw < *famine_share { intensity } else { 0.0 },
                    postnatal_edr: [0.0; 5],
                    binary_treatment: 0,
                    counterfactual_1960_edr: 0.0,
                },
                (None, ExposureModel::Calendar) => unreachable!(),
            };
            let edr = exposure.prenatal_edr;
            let beta_i = cfg.beta(g)
                + cfg.hetero_effects.map_or(0.0, |h| h.eta_loading * eta + h.sd * zeta);
            let survived = cfg.gamma0 + cfg.gamma(g) * edr + xi + eta >= 0.0;
            let trend = cfg.violations.county_cohort_trend
                * cf_by_county[county]
                * (child.year - 1962) as f64;
            let y = cfg.beta0 + beta_i * edr + alpha + eps + trend;
            person.years_education = Some(if cfg.censor_education { y.max(0.0) } else { y });
            person.illiterate = Some(u8::from(y < cfg.illiteracy_threshold));
            person.survived = survived;

            let pc = province_controls(seed, province, child.year);
            aux.get_mut("mother_education").unwrap().push(format!("{mother_edu}"));
            aux.get_mut("province").unwrap().push(province_id(province));
            aux.get_mut("prov_population").unwrap().push(format!("{}", pc.population));
            aux.get_mut("prov_birth_rate").unwrap().push(format!("{}", pc.birth_rate));
            aux.get_mut("prov_gdp").unwrap().push(format!("{}", pc.gdp));

            latents.push(LatentDraw {
                person_id,
                alpha_jg: alpha,
                xi_jg: xi,
                eps_i: eps,
                eta_i: eta,
                u_ig: alpha + eps,
                v_ig: xi + eta,
                beta_i,
                f_star: edr,
                outcome: y,
            });
            persons.push(person);
            exposures.push(exposure);

            let stop = g == Gender::Male
                && survived
                && FAMINE_YEARS.contains(&child.year)
                && rng.random::<f64>() < cfg.violations.stopping_rule;
            if stop {
                break;
            }
        }
    }

    if exposures.iter().any(|e| e.prenatal_edr > 0.0) {
        exposure::binary_treatment(&mut exposures)?;
    }
    let truth = summarize(cfg, seed, &persons, &latents, &exposures);
    Ok(Population {
        persons,
        latents,
        exposures,
        death_rates: table,
        aux,
        truth,
    })
}

fn summarize(
    cfg: &DgpConfig,
    seed: u64,
    persons: &[PersonRecord],
    latents: &[LatentDraw],
    exposures: &[ExposureRecord],
) -> TruthSummary {
    let mut by_gender = [GenderTruth::default(), GenderTruth::default()];
    let mut sums = [[0.0f64; 2]; 2];
    for ((p, l), e) in persons.iter().zip(latents).zip(exposures) {
        let t = &mut by_gender[p.gender.index()];
        t.n_persons += 1;
        t.n_survivors += usize::from(p.survived);
        if e.binary_treatment == 1 {
            t.n_treated += 1;
            sums[p.gender.index()][1] += l.beta_i;
            if p.survived {
                t.n_treated_survivors += 1;
                sums[p.gender.index()][0] += l.beta_i;
            }
        }
    }
    let ratio = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    for g in Gender::BOTH {
        let t = &mut by_gender[g.index()];
        t.beta = cfg.beta(g);
        t.gamma = cfg.gamma(g);
        t.survivor_att = ratio(sums[g.index()][0], t.n_treated_survivors);
        t.treated_att = ratio(sums[g.index()][1], t.n_treated);
    }
    let [male, female] = by_gender;
    TruthSummary {
        seed,
        config: cfg.clone(),
        sigma_uv: cfg.implied_sigma_uv(),
        n_families: cfg.n_families,
        n_persons: persons.len(),
        n_survivors: male.n_survivors + female.n_survivors,
        survivor_att: ratio(sums[0][0] + sums[1][0], male.n_treated_survivors + female.n_treated_survivors),
        treated_att: ratio(sums[0][1] + sums[1][1], male.n_treated + female.n_treated),
        male,
        female,
    }
}

/// Measurement-attenuation panel: latent intensity `F*` per person,
/// outcome `Y = β0 + β_g·F* + ε`, observed gender-specific exposure
/// `λ_g·F*`; nobody is selected out.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationPanel {
    pub persons: Vec<PersonRecord>,
    pub f_star: Vec<f64>,
    pub gender_edr: Vec<f64>,
    pub outcome: Vec<f64>,
}

pub fn simulate_attenuation_panel(cfg: &DgpConfig, seed: u64) -> Result<AttenuationPanel> {
    cfg.validate()?;
    let att = cfg
        .attenuation
        .ok_or_else(|| Error::config("attenuation", "block required for the attenuation panel"))?;
    let mut out = AttenuationPanel {
        persons: Vec::new(),
        f_star: Vec::new(),
        gender_edr: Vec::new(),
        outcome: Vec::new(),
    };
    let sd_eps = libm::sqrt(cfg.var_eps);
    for f in 0..cfg.n_families {
        let mut rng = substream(seed, Domain::Family, f as u64);
        let size = draw_pmf(&cfg.family_size_dist, &mut rng);
        let family_id = format!("f{f:06}");
        let cid = county_id(f % cfg.n_counties);
        for k in 0..size {
            let g = if rng.random::<bool>() { Gender::Male } else { Gender::Female };
            let f_star = cfg.edr_dist.sample(&mut rng);
            let eps = sd_eps * standard(cfg.error_dist, &mut rng);
            let y = cfg.beta0 + cfg.beta(g) * f_star + eps;
            out.persons.push(PersonRecord {
                person_id: format!("{family_id}-{k}"),
                family_id: family_id.clone(),
                gender: g,
                birth_year: 1960,
                birth_month: 1,
                county_id: cid.clone(),
                years_education: Some(y),
                illiterate: Some(u8::from(y < cfg.illiteracy_threshold)),
                survived: true,
            });
            out.f_star.push(f_star);
            out.gender_edr.push(att.lambda(g) * f_star);
            out.outcome.push(y);
        }
    }
    Ok(out)
}
