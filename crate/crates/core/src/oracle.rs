//! Independent checks of the selection-bias results: the closed-form
//! asymptotic bias of OLS on survivors, exact enumeration of the
//! ATT-among-survivors identity, the attenuation ratio, and a Monte Carlo
//! driver.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dgp::{AttenuationPanel, DgpConfig, EdrDist, ErrorDist, ExposureModel, Population};
use crate::error::{Error, Result};
use crate::fe::{fit, FitOptions, FitResult, RegressionSpec};
use crate::frame::{Categorical, Frame};
use crate::panel::Gender;
use crate::quad::integrate;
use crate::rng::{derive_seed, substream, Domain};
pub use crate::special::inverse_mills;
use crate::special::{norm_cdf, student_t_two_sided_p};
use crate::stats::{simple_ols, KahanSum};

/// Predicted-versus-estimated record shared by every oracle report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub predicted: f64,
    pub estimated: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleCheck {
    pub fn new(name: impl Into<String>, predicted: f64, estimated: f64, tolerance: f64) -> Self {
        let deviation = estimated - predicted;
        Self {
            name: name.into(),
            predicted,
            estimated,
            deviation,
            tolerance,
            pass: libm::fabs(deviation) <= tolerance,
        }
    }
}

/// Which distribution the exposure moments are taken under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentWeighting {
    /// Exposure distribution among survivors: the exact probability limit
    /// of OLS run on the surviving sample.
    #[default]
    Survivors,
    /// Exposure distribution in the whole population.
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasComponents {
    pub sigma_uv: f64,
    /// `Cov(EDR, λ((γ0 + γ_g·EDR)/σ_v)) / σ_v`.
    pub cov_edr_mills: f64,
    pub var_edr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPrediction {
    pub gender: Gender,
    pub predicted_asymptotic_bias: f64,
    pub components: BiasComponents,
    pub weighting: MomentWeighting,
}

const QUAD_TOL: f64 = 1e-10;
const LOGNORMAL_SPAN: f64 = 12.0;

// E[w(X)·h(X)] for X drawn from the exposure mixture
// (1 − share)·δ0 + share·dist.
fn expect(
    dist: &EdrDist,
    share: f64,
    mut g: impl FnMut(f64) -> f64,
) -> Result<f64> {
    let continuous = match *dist {
        EdrDist::Constant { value } => g(value),
        EdrDist::Uniform { low, high } => integrate(&mut g, low, high, QUAD_TOL)? / (high - low),
        EdrDist::LogNormal { mean, sd } => {
            let (mu, sigma) = EdrDist::log_params(mean, sd);
            integrate(
                |t| g(libm::exp(mu + sigma * t)) * crate::special::norm_pdf(t),
                -LOGNORMAL_SPAN,
                LOGNORMAL_SPAN,
                QUAD_TOL,
            )?
        }
    };
    let at_zero = if share < 1.0 { g(0.0) } else { 0.0 };
    Ok((1.0 - share) * at_zero + share * continuous)
}

/// Asymptotic bias of the OLS slope of `Y` on `EDR` among survivors of
/// gender `g`, with survivor-weighted exposure moments.
pub fn ols_bias_closed_form(cfg: &DgpConfig, gender: Gender) -> Result<BiasPrediction> {
    ols_bias_closed_form_with(cfg, gender, MomentWeighting::Survivors)
}

/// `σ_uv · Cov(EDR, λ(z/σ_v))/σ_v / Var(EDR)` with `z = γ0 + γ_g·EDR`,
/// evaluated by quadrature over the exposure distribution.
pub fn ols_bias_closed_form_with(
    cfg: &DgpConfig,
    gender: Gender,
    weighting: MomentWeighting,
) -> Result<BiasPrediction> {
    cfg.validate()?;
    if cfg.error_dist != ErrorDist::Gaussian {
        return Err(Error::config("error_dist", "the closed form needs Gaussian errors"));
    }
    let share = match cfg.exposure_model {
        ExposureModel::IidPerson { famine_share } => famine_share,
        ExposureModel::Calendar => {
            return Err(Error::config(
                "exposure_model",
                "the closed form needs a known person-level exposure distribution (iid_person)",
            ))
        }
    };
    let sd_v = cfg.sd_v();
    let (g0, gg) = (cfg.gamma0, cfg.gamma(gender));
    let weight = |x: f64| match weighting {
        MomentWeighting::Survivors => norm_cdf((g0 + gg * x) / sd_v),
        MomentWeighting::Population => 1.0,
    };
    let mills = |x: f64| inverse_mills((g0 + gg * x) / sd_v);
    let dist = &cfg.edr_dist;
    let m0 = expect(dist, share, weight)?;
    if !(m0 > 0.0) {
        return Err(Error::DegenerateDenominator("no survivor mass".into()));
    }
    let m1 = expect(dist, share, |x| weight(x) * x)? / m0;
    let m2 = expect(dist, share, |x| weight(x) * x * x)? / m0;
    let var = m2 - m1 * m1;
    if !(var > 1e-300) {
        return Err(Error::DegenerateDenominator("exposure has zero variance".into()));
    }
    let cov = if gg == 0.0 {
        0.0
    } else {
        let ml = expect(dist, share, |x| weight(x) * mills(x))? / m0;
        let mxl = expect(dist, share, |x| weight(x) * x * mills(x))? / m0;
        (mxl - m1 * ml) / sd_v
    };
    let sigma_uv = cfg.implied_sigma_uv();
    Ok(BiasPrediction {
        gender,
        predicted_asymptotic_bias: sigma_uv * cov / var,
        components: BiasComponents {
            sigma_uv,
            cov_edr_mills: cov,
            var_edr: var,
        },
        weighting,
    })
}

/// OLS slope of the outcome on prenatal exposure among survivors of one
/// gender, with an intercept.
pub fn ols_on_survivors(pop: &Population, gender: Gender) -> Option<f64> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for ((p, e), l) in pop.persons.iter().zip(&pop.exposures).zip(&pop.latents) {
        if p.survived && p.gender == gender {
            x.push(e.prenatal_edr);
            y.push(l.outcome);
        }
    }
    simple_ols(&x, &y).map(|(_, b)| b)
}

/// A finite-support model of a same-gender sibling pair: sibling `i` is
/// treated with probability `p_treat` and survives when
/// `γ0 + γ·D + ξ + η ≥ 0`; sibling `i'` is untreated and always observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteInstance {
    pub p_treat: f64,
    pub gamma0: f64,
    pub gamma: f64,
    /// `(ξ, probability)`.
    pub xi: Vec<(f64, f64)>,
    /// `(η, β, probability)`: the joint law of survival shock and effect.
    pub eta_beta: Vec<(f64, f64, f64)>,
    /// `(ε, probability)`, shared by both siblings independently.
    pub eps: Vec<(f64, f64)>,
}

pub const SUPPORT_CAP: u128 = 1_000_000;

impl DiscreteInstance {
    pub fn support_points(&self) -> u128 {
        2 * self.xi.len() as u128
            * self.eta_beta.len() as u128
            * self.eps.len() as u128
            * self.eps.len() as u128
    }

    fn validate(&self) -> Result<()> {
        if !(self.p_treat > 0.0 && self.p_treat < 1.0) {
            return Err(Error::config("p_treat", "must lie in (0, 1)"));
        }
        let sums = [
            self.xi.iter().map(|t| t.1).sum::<f64>(),
            self.eta_beta.iter().map(|t| t.2).sum::<f64>(),
            self.eps.iter().map(|t| t.1).sum::<f64>(),
        ];
        if sums.iter().any(|s| (s - 1.0).abs() > 1e-12) {
            return Err(Error::config("support", "probabilities must sum to 1"));
        }
        let points = self.support_points();
        if points > SUPPORT_CAP {
            return Err(Error::SupportTooLarge { points, cap: SUPPORT_CAP });
        }
        Ok(())
    }

    fn survives(&self, d: u8, xi: f64, eta: f64) -> bool {
        self.gamma0 + self.gamma * d as f64 + xi + eta >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttReport {
    /// `E[β | D=1, S=1]`.
    pub conditional_mean: f64,
    /// `E[(D − E[D|S=1])·D·β | S=1] / Var(D | S=1)`.
    pub plim_formula: f64,
    /// Probability limit of regressing `Y_i − Y_i'` on `D_i` among
    /// survivors, enumerated including the outcome noise.
    pub difference_regression: f64,
    /// `E[β | D=1]`, the ATT without conditioning on survival.
    pub unconditional_att: f64,
    pub survival_rate_treated: f64,
    pub support_points: u128,
}

/// Exhaustive enumeration of a [`DiscreteInstance`].
pub fn att_survivors_enumerate(inst: &DiscreteInstance) -> Result<AttReport> {
    inst.validate()?;
    // Masses over survivors: P(S), P(D=1,S), E[β·1{D=1,S}], and the
    // first two moments needed by the difference regression.
    let mut p_s = KahanSum::new();
    let mut p_ds = KahanSum::new();
    let mut beta_ds = KahanSum::new();
    let mut p_d = KahanSum::new();
    let mut beta_d = KahanSum::new();
    let mut dy = KahanSum::new();
    let mut y = KahanSum::new();
    for d in [0u8, 1] {
        let pd = if d == 1 { inst.p_treat } else { 1.0 - inst.p_treat };
        for &(xi, pxi) in &inst.xi {
            for &(eta, beta, peb) in &inst.eta_beta {
                let base = pd * pxi * peb;
                if d == 1 {
                    p_d.add(base);
                    beta_d.add(base * beta);
                }
                if !inst.survives(d, xi, eta) {
                    continue;
                }
                for &(e1, pe1) in &inst.eps {
                    for &(e2, pe2) in &inst.eps {
                        let p = base * pe1 * pe2;
                        let diff = beta * d as f64 + e1 - e2;
                        p_s.add(p);
                        y.add(p * diff);
                        if d == 1 {
                            p_ds.add(p);
                            beta_ds.add(p * beta);
                            dy.add(p * diff);
                        }
                    }
                }
            }
        }
    }
    let p_s = p_s.value();
    let p_ds = p_ds.value();
    if !(p_ds > 0.0) {
        return Err(Error::Undefined("no survivor mass among the treated".into()));
    }
    let pi = p_ds / p_s;
    let var_d = pi * (1.0 - pi);
    if !(var_d > 0.0) {
        return Err(Error::Undefined("treatment is degenerate among survivors".into()));
    }
    let conditional_mean = beta_ds.value() / p_ds;
    // E[(D − π)·D·β | S] = (1 − π)·E[D·β | S].
    let plim_formula = (1.0 - pi) * (beta_ds.value() / p_s) / var_d;
    // Cov(D, ΔY | S) / Var(D | S).
    let difference_regression = (dy.value() / p_s - pi * (y.value() / p_s)) / var_d;
    Ok(AttReport {
        conditional_mean,
        plim_formula,
        difference_regression,
        unconditional_att: beta_d.value() / p_d.value(),
        survival_rate_treated: p_ds / p_d.value(),
        support_points: inst.support_points(),
    })
}

fn draw_from<R: Rng + ?Sized, T: Copy>(items: &[T], prob: impl Fn(&T) -> f64, rng: &mut R) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for it in items {
        acc += prob(it);
        if u < acc {
            return *it;
        }
    }
    items[items.len() - 1]
}

/// Samples `n_pairs` sibling pairs from the instance and returns the
/// observed (surviving) rows: columns `y`, `d` and categorical `family`.
pub fn sample_discrete_pairs(inst: &DiscreteInstance, n_pairs: usize, seed: u64) -> Result<Frame> {
    inst.validate()?;
    let mut y = Vec::with_capacity(2 * n_pairs);
    let mut d = Vec::with_capacity(2 * n_pairs);
    let mut fam = Vec::with_capacity(2 * n_pairs);
    for j in 0..n_pairs {
        let mut rng = substream(seed, Domain::Discrete, j as u64);
        let xi = draw_from(&inst.xi, |t| t.1, &mut rng).0;
        let alpha = xi;
        let treated = u8::from(rng.random::<f64>() < inst.p_treat);
        let (eta, beta, _) = draw_from(&inst.eta_beta, |t| t.2, &mut rng);
        let e1 = draw_from(&inst.eps, |t| t.1, &mut rng).0;
        let e2 = draw_from(&inst.eps, |t| t.1, &mut rng).0;
        if inst.survives(treated, xi, eta) {
            y.push(alpha + beta * treated as f64 + e1);
            d.push(treated as f64);
            fam.push(j as u32);
        }
        y.push(alpha + e2);
        d.push(0.0);
        fam.push(j as u32);
    }
    let mut frame = Frame::new(y.len());
    frame.add_numeric("y", y)?;
    frame.add_numeric("d", d)?;
    frame.add_categorical("family", Categorical::from_keys(&fam))?;
    Ok(frame)
}

/// Sibling fixed-effects estimate of the treatment effect on a sample from
/// [`sample_discrete_pairs`], clustered by family.
pub fn discrete_fe_estimate(frame: &Frame) -> Result<FitResult> {
    fit(
        &RegressionSpec::new("y", &["d"], &["family"], "family"),
        frame,
        &FitOptions::default(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationReport {
    pub fitted_male: f64,
    pub fitted_female: f64,
    pub predicted_male: f64,
    pub predicted_female: f64,
    pub fitted_ratio: f64,
    pub predicted_ratio: f64,
    pub rel_dev_male: f64,
    pub rel_dev_female: f64,
    pub rel_dev_ratio: f64,
}

pub const ATT_EDR_MALE: &str = "gender_edr_x_male";
pub const ATT_EDR_FEMALE: &str = "gender_edr_x_female";

/// Regression of the outcome on gender-specific exposure interacted with
/// gender, with gender intercepts and county clusters.
pub fn attenuation_fit(panel: &AttenuationPanel) -> Result<FitResult> {
    let n = panel.persons.len();
    let male: Vec<f64> = panel.persons.iter().map(|p| f64::from(u8::from(p.gender.is_male()))).collect();
    let mut frame = Frame::new(n);
    frame.add_numeric("y", panel.outcome.clone())?;
    frame.add_numeric(
        ATT_EDR_MALE,
        panel.gender_edr.iter().zip(&male).map(|(e, m)| e * m).collect(),
    )?;
    frame.add_numeric(
        ATT_EDR_FEMALE,
        panel.gender_edr.iter().zip(&male).map(|(e, m)| e * (1.0 - m)).collect(),
    )?;
    let genders: Vec<u8> = panel.persons.iter().map(|p| p.gender.index() as u8).collect();
    frame.add_categorical("gender", Categorical::from_keys(&genders))?;
    let counties: Vec<&str> = panel.persons.iter().map(|p| p.county_id.as_str()).collect();
    frame.add_categorical("county", Categorical::from_keys(&counties))?;
    fit(
        &RegressionSpec::new("y", &[ATT_EDR_MALE, ATT_EDR_FEMALE], &["gender"], "county"),
        &frame,
        &FitOptions::default(),
    )
}

/// Compares fitted slopes on gender-specific exposure with `β_g / λ_g`.
pub fn attenuation_check(cfg: &DgpConfig, estimates: &FitResult) -> Result<AttenuationReport> {
    let att = cfg
        .attenuation
        .ok_or_else(|| Error::config("attenuation", "block required"))?;
    let missing = |n: &str| Error::Spec(format!("estimates lack `{n}`"));
    let fm = estimates.coef(ATT_EDR_MALE).ok_or_else(|| missing(ATT_EDR_MALE))?;
    let ff = estimates.coef(ATT_EDR_FEMALE).ok_or_else(|| missing(ATT_EDR_FEMALE))?;
    let pm = cfg.beta_male / att.lambda_male;
    let pf = cfg.beta_female / att.lambda_female;
    let rel = |a: f64, b: f64| if b != 0.0 { (a - b) / b } else { a - b };
    Ok(AttenuationReport {
        fitted_male: fm,
        fitted_female: ff,
        predicted_male: pm,
        predicted_female: pf,
        fitted_ratio: fm / ff,
        predicted_ratio: pm / pf,
        rel_dev_male: rel(fm, pm),
        rel_dev_female: rel(ff, pf),
        rel_dev_ratio: rel(fm / ff, pm / pf),
    })
}

/// Runs independent jobs `0..n`, returning results in index order.
pub trait Executor: Sync {
    fn run<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, job: F) -> Vec<T>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn run<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, job: F) -> Vec<T> {
        (0..n).map(job).collect()
    }
}

/// One estimated quantity from a replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub truth: f64,
    /// Standard error and degrees of freedom, for interval coverage.
    pub se: Option<f64>,
    pub df: Option<f64>,
}

impl Estimate {
    pub fn point(name: impl Into<String>, value: f64, truth: f64) -> Self {
        Self {
            name: name.into(),
            value,
            truth,
            se: None,
            df: None,
        }
    }

    pub fn from_fit(name: impl Into<String>, fit: &FitResult, coef: &str, truth: f64) -> Result<Self> {
        let value = fit
            .coef(coef)
            .ok_or_else(|| Error::Spec(format!("no coefficient `{coef}`")))?;
        Ok(Self {
            name: name.into(),
            value,
            truth,
            se: fit.se(coef),
            df: Some(fit.df()),
        })
    }

    /// Two-sided p-value of `H0: value = truth`.
    pub fn p_value(&self) -> Option<f64> {
        let se = self.se?;
        Some(student_t_two_sided_p((self.value - self.truth) / se, self.df.unwrap_or(f64::INFINITY)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// `sd / √n`.
    pub mc_se: f64,
    pub truth: f64,
    pub bias: f64,
    /// Share of nominal 95% intervals containing the truth.
    pub coverage: Option<f64>,
    /// Share of replications rejecting `H0: value = truth` at 5%.
    pub rejection_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub replications: usize,
    pub failures: usize,
    pub failure_messages: Vec<(usize, String)>,
    /// Fewer than 30 successful replications.
    pub low_precision: bool,
    pub components: Vec<ComponentSummary>,
}

impl McSummary {
    pub fn component(&self, name: &str) -> Option<&ComponentSummary> {
        self.components.iter().find(|c| c.name == name)
    }
}

/// Seed of replication `r`.
pub fn replication_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, Domain::Replication, r as u64)
}

/// Runs `estimator` on `replications` independent seeds. A failing
/// replication is recorded and skipped; more than 10% failures abort.
/// Aggregation is done in replication order with compensated sums, so the
/// summary does not depend on how the executor schedules jobs.
pub fn monte_carlo<E, F>(exec: &E, replications: usize, seed: u64, estimator: F) -> Result<McSummary>
where
    E: Executor,
    F: Fn(u64) -> Result<Vec<Estimate>> + Sync,
{
    if replications < 2 {
        return Err(Error::config("replications", "must be at least 2"));
    }
    let results = exec.run(replications, |r| estimator(replication_seed(seed, r)));
    let mut failure_messages = Vec::new();
    let mut ok: Vec<Vec<Estimate>> = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => failure_messages.push((r, format!("{e}"))),
        }
    }
    let failures = failure_messages.len();
    if failures * 10 > replications {
        return Err(Error::MonteCarloAborted { failures, replications });
    }
    let names: Vec<String> = ok.first().map(|v| v.iter().map(|e| e.name.clone()).collect()).unwrap_or_default();
    let mut components = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let vals: Vec<&Estimate> = ok.iter().filter_map(|v| v.get(k)).collect();
        let n = vals.len();
        let mut s = KahanSum::new();
        vals.iter().for_each(|e| s.add(e.value));
        let mean = s.value() / n as f64;
        let mut ss = KahanSum::new();
        vals.iter().for_each(|e| ss.add((e.value - mean) * (e.value - mean)));
        let sd = if n > 1 { libm::sqrt(ss.value() / (n - 1) as f64) } else { f64::NAN };
        let mut truth = KahanSum::new();
        vals.iter().for_each(|e| truth.add(e.truth));
        let truth = truth.value() / n as f64;
        let ps: Vec<f64> = vals.iter().filter_map(|e| e.p_value()).collect();
        let (coverage, rejection_rate) = if ps.len() == n && n > 0 {
            let rejected = ps.iter().filter(|p| **p < 0.05).count() as f64 / n as f64;
            (Some(1.0 - rejected), Some(rejected))
        } else {
            (None, None)
        };
        components.push(ComponentSummary {
            name: name.clone(),
            n,
            mean,
            sd,
            mc_se: sd / libm::sqrt(n as f64),
            truth,
            bias: mean - truth,
            coverage,
            rejection_rate,
        });
    }
    Ok(McSummary {
        replications,
        failures,
        failure_messages,
        low_precision: ok.len() < 30,
        components,
    })
}

/// Closed-form bias against the Monte Carlo bias of OLS on survivors, per
/// gender; tolerance is three Monte Carlo standard errors.
pub fn bias_oracle<E: Executor>(exec: &E, cfg: &DgpConfig, replications: usize, seed: u64) -> Result<Vec<OracleCheck>> {
    let predictions = [
        ols_bias_closed_form(cfg, Gender::Male)?,
        ols_bias_closed_form(cfg, Gender::Female)?,
    ];
    let mc = monte_carlo(exec, replications, seed, |s| {
        let pop = crate::dgp::simulate_population(cfg, s)?;
        Gender::BOTH
            .iter()
            .map(|&g| {
                let b = ols_on_survivors(&pop, g)
                    .ok_or_else(|| Error::Undefined(format!("no exposure variation among {} survivors", g.as_str())))?;
                Ok(Estimate::point(g.as_str(), b, cfg.beta(g)))
            })
            .collect()
    })?;
    Ok(predictions
        .iter()
        .map(|p| {
            let c = mc.component(p.gender.as_str()).expect("component per gender");
            OracleCheck::new(
                format!("ols_bias_{}", p.gender.as_str()),
                p.predicted_asymptotic_bias,
                c.bias,
                3.0 * c.mc_se,
            )
        })
        .collect())
}
