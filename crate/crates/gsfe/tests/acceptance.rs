//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Numeric arguments select criteria, e.g.
//! `cargo test -p gsfe --test acceptance -- 3 8`.

#[path = "../../core/tests/support/dense.rs"]
mod dense;
#[path = "../../core/tests/support/discrete.rs"]
mod discrete;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gsfe::exec::Parallel;
use gsfe_core::dgp::{simulate_attenuation_panel, simulate_population, Attenuation, DgpConfig, EdrDist, ExposureModel};
use gsfe_core::exposure::{prenatal_edr, prenatal_weights, WindowConvention};
use gsfe_core::fe::{fit, FitOptions, RegressionSpec};
use gsfe_core::frame::{Categorical, Frame};
use gsfe_core::harness::{magnitude_line, run_event_study, run_placebos, Panel, PlaceboReport, Sample, StudyPlan};
use gsfe_core::oracle::{
    att_survivors_enumerate, attenuation_check, attenuation_fit, bias_oracle, discrete_fe_estimate, replication_seed,
    sample_discrete_pairs, Executor,
};
use gsfe_core::panel::{DeathRateTable, Gender};
use gsfe_core::special::{inverse_mills, ln_inverse_mills};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exec() -> Parallel {
    Parallel::from_env().expect("thread pool")
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    ensure(t.elapsed() < limit, || format!("took {:.1?}, limit {limit:?}", t.elapsed()))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (m, (ss / (n - 1.0)).sqrt())
}

fn exposure_exactness() -> Outcome {
    let t = Instant::now();
    let jan = prenatal_weights(1961, 1, WindowConvention::Inclusive);
    ensure(jan == [(1960, 8.0 / 9.0), (1961, 1.0 / 9.0)], || format!("Jan 1961 weights {jan:?}"))?;
    let feb = prenatal_weights(1959, 2, WindowConvention::Exclusive);
    ensure(feb == [(1958, 8.0 / 9.0), (1959, 1.0 / 9.0)], || format!("Feb 1959 weights {feb:?}"))?;
    // Baselines of 2^-7 keep every excess rate an exact binary fraction.
    let mut table = DeathRateTable::new();
    for y in 1954..=1958 {
        table.insert("A", y, 0.0078125).unwrap();
    }
    for (y, e) in [(1959, 0.03125), (1960, 0.015625), (1961, 0.00390625)] {
        table.insert("A", y, 0.0078125 + e).unwrap();
    }
    let jan_edr = prenatal_edr(1961, 1, "A", &table, WindowConvention::Inclusive, true).unwrap();
    ensure(jan_edr == 8.0 / 9.0 * 0.015625 + 1.0 / 9.0 * 0.00390625, || format!("Jan 1961 EDR {jan_edr}"))?;
    let feb_edr = prenatal_edr(1959, 2, "A", &table, WindowConvention::Exclusive, true).unwrap();
    ensure(feb_edr == 1.0 / 9.0 * 0.03125, || format!("Feb 1959 EDR {feb_edr}"))?;
    within(t, Duration::from_secs(1))?;
    Ok("Jan 1961 inclusive (8/9, 1/9) and Feb 1959 exclusive 1/9, bit-exact".into())
}

fn fe_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let (mut worst_coef, mut worst_vcov) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let n = rng.random_range(200..=5000);
        let p = rng.random_range(1..=3);
        let levels = [rng.random_range(5..=60), rng.random_range(3..=30)];
        let clusters = rng.random_range(10..=80);
        let inst = dense::random_instance(1000 + i, n, p, &levels, clusters, i % 3 == 0);
        let xs = dense::regressor_names(p);
        let ds = dense::dim_names(2);
        let xs: Vec<&str> = xs.iter().map(String::as_str).collect();
        let ds: Vec<&str> = ds.iter().map(String::as_str).collect();
        let mut spec = RegressionSpec::new("y", &xs, &ds, "cl");
        if inst.weights.is_some() {
            spec = spec.with_weights("w");
        }
        let r = fit(&spec, &dense::to_frame(&inst), &FitOptions::default()).map_err(|e| format!("instance {i}: {e}"))?;
        let d = dense::dense_fit(&inst, &inst.cluster);
        let factor = dense::conventional_factor(n, d.k, d.n_clusters);
        for a in 0..p {
            worst_coef = worst_coef.max((r.coefficients[a] - d.coef[a]).abs());
            for b in 0..p {
                worst_vcov = worst_vcov.max((r.vcov[(a, b)] - factor * d.sandwich[(a, b)]).abs());
            }
        }
    }
    ensure(worst_coef < 1e-8, || format!("coefficient gap {worst_coef:.2e}"))?;
    ensure(worst_vcov < 1e-10, || format!("vcov gap {worst_vcov:.2e}"))?;
    within(t, Duration::from_secs(60))?;
    Ok(format!("50 instances, max |Δβ| {worst_coef:.1e}, max |ΔV| {worst_vcov:.1e}"))
}

fn bias_config(sigma_uv: f64, gamma_male: f64, gamma_female: f64) -> DgpConfig {
    DgpConfig {
        n_families: 2000,
        gamma_male,
        gamma_female,
        cov_alpha_xi: sigma_uv,
        cov_eps_eta: 0.0,
        sigma_uv: Some(sigma_uv),
        exposure_model: ExposureModel::IidPerson { famine_share: 0.5 },
        ..DgpConfig::default()
    }
}

fn bias_oracle_grid() -> Outcome {
    let t = Instant::now();
    let exec = exec();
    let mut lines = Vec::new();
    for (k, sigma) in [0.0, 0.3].into_iter().enumerate() {
        for (j, (gm, gf)) in [(-4.0, -2.0), (-2.0, -1.0), (-6.0, -3.0)].into_iter().enumerate() {
            let cfg = bias_config(sigma, gm, gf);
            let checks = bias_oracle(&exec, &cfg, 500, 7_000 + (3 * k + j) as u64).map_err(|e| e.to_string())?;
            for c in &checks {
                ensure(c.pass, || {
                    format!(
                        "σ_uv={sigma} γ=({gm},{gf}) {}: predicted {:.4}, Monte Carlo {:.4}, tolerance {:.4}",
                        c.name, c.predicted, c.estimated, c.tolerance
                    )
                })?;
            }
            let (m, f) = (&checks[0], &checks[1]);
            if sigma > 0.0 {
                ensure(m.estimated > f.estimated && f.estimated > 0.0, || {
                    format!("σ_uv={sigma} γ=({gm},{gf}): Monte Carlo bias male {:.4} female {:.4}", m.estimated, f.estimated)
                })?;
                ensure(m.predicted > f.predicted && f.predicted > 0.0, || {
                    format!("σ_uv={sigma} γ=({gm},{gf}): predicted male {:.4} female {:.4}", m.predicted, f.predicted)
                })?;
            }
            lines.push(format!("{:.3}/{:.3}", m.estimated, f.estimated));
        }
    }
    within(t, Duration::from_secs(600))?;
    Ok(format!("6 configs within 3 MC SE; male/female bias {}", lines.join(" ")))
}

/// Per-replication male and female slopes of OLS, sibling FE and
/// gender-specific sibling FE.
fn three_estimators(cfg: &DgpConfig, seed: u64) -> Result<[[f64; 2]; 3], String> {
    let pop = simulate_population(cfg, seed).map_err(|e| e.to_string())?;
    let keep = pop.survivor_mask();
    let n = pop.persons.len();
    let male: Vec<f64> = pop.persons.iter().map(|p| f64::from(u8::from(p.gender.is_male()))).collect();
    let edr: Vec<f64> = pop.exposures.iter().map(|e| e.prenatal_edr).collect();
    let family: Vec<&str> = pop.persons.iter().map(|p| p.family_id.as_str()).collect();
    let fam_gender: Vec<(&str, Gender)> = pop.persons.iter().map(|p| (p.family_id.as_str(), p.gender)).collect();
    let mut frame = Frame::new(n);
    let add = |frame: &mut Frame| -> gsfe_core::Result<()> {
        frame.add_numeric("y", pop.latents.iter().map(|l| l.outcome).collect())?;
        frame.add_numeric("male", male.clone())?;
        frame.add_numeric("edr_m", edr.iter().zip(&male).map(|(e, m)| e * m).collect())?;
        frame.add_numeric("edr_f", edr.iter().zip(&male).map(|(e, m)| e * (1.0 - m)).collect())?;
        frame.add_categorical("family", Categorical::from_keys(&family))?;
        frame.add_categorical("family_gender", Categorical::from_keys(&fam_gender))
    };
    add(&mut frame).map_err(|e| e.to_string())?;
    let frame = frame.filter(&keep);
    let specs = [
        RegressionSpec::new("y", &["edr_m", "edr_f", "male"], &[], "family").with_intercept(),
        RegressionSpec::new("y", &["edr_m", "edr_f", "male"], &["family"], "family"),
        RegressionSpec::new("y", &["edr_m", "edr_f"], &["family_gender"], "family"),
    ];
    let mut out = [[0.0; 2]; 3];
    for (k, spec) in specs.iter().enumerate() {
        let r = fit(spec, &frame, &FitOptions::default()).map_err(|e| e.to_string())?;
        out[k] = [r.coef("edr_m").unwrap(), r.coef("edr_f").unwrap()];
    }
    Ok(out)
}

fn estimator_ordering() -> Outcome {
    let t = Instant::now();
    let cfg = DgpConfig {
        n_families: 2000,
        cross_gender_corr: 0.0,
        cov_alpha_xi: 1.5,
        cov_eps_eta: 0.0,
        gamma_male: -4.0,
        gamma_female: -2.0,
        edr_dist: EdrDist::Uniform { low: 0.0, high: 0.6 },
        exposure_model: ExposureModel::IidPerson { famine_share: 0.5 },
        censor_education: false,
        ..DgpConfig::default()
    };
    let reps = 500;
    let runs = exec().run(reps, |r| three_estimators(&cfg, replication_seed(4_000, r)));
    let runs: Vec<[[f64; 2]; 3]> = runs.into_iter().collect::<Result<_, _>>()?;
    let names = ["OLS", "sibling FE", "GS-SFE"];
    let mut lines = Vec::new();
    for g in Gender::BOTH {
        let gi = g.index();
        let truth = cfg.beta(g);
        let col = |k: usize| runs.iter().map(|r| r[k][gi]).collect::<Vec<f64>>();
        let stats: Vec<(f64, f64)> = (0..3).map(|k| mean_sd(&col(k))).collect();
        let bias: Vec<f64> = stats.iter().map(|s| s.0 - truth).collect();
        let se_gs = stats[2].1 / (reps as f64).sqrt();
        ensure(bias[2].abs() < 3.0 * se_gs, || {
            format!("{}: GS-SFE bias {:.4} exceeds 3 MC SE ({:.4})", g.as_str(), bias[2], 3.0 * se_gs)
        })?;
        // Gap in absolute bias and the MC SE of its paired difference.
        for k in 0..2 {
            let (a, b) = (col(k), col(k + 1));
            let (sa, sb) = (bias[k].signum(), bias[k + 1].signum());
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| sa * x - sb * y).collect();
            let gap = bias[k].abs() - bias[k + 1].abs();
            let se = mean_sd(&d).1 / (reps as f64).sqrt();
            ensure(gap > 2.0 * se, || {
                format!(
                    "{}: |bias| {} {:.4} vs {} {:.4}, gap {:.4} not above 2 MC SE ({:.4})",
                    g.as_str(),
                    names[k],
                    bias[k].abs(),
                    names[k + 1],
                    bias[k + 1].abs(),
                    gap,
                    2.0 * se
                )
            })?;
        }
        lines.push(format!(
            "{} |bias| {:.3} > {:.3} > {:.3}",
            g.as_str(),
            bias[0].abs(),
            bias[1].abs(),
            bias[2].abs()
        ));
    }
    within(t, Duration::from_secs(600))?;
    Ok(lines.join("; "))
}

fn discrete_identity() -> Outcome {
    let mut used = 0;
    let mut positive = 0;
    let mut worst = 0.0f64;
    let mut seed = 0u64;
    while used < 20 {
        let pos = seed % 2 == 0;
        let inst = discrete::random_discrete(seed, pos);
        seed += 1;
        let Ok(r) = att_survivors_enumerate(&inst) else { continue };
        used += 1;
        let gap = (r.plim_formula - r.conditional_mean).abs();
        worst = worst.max(gap);
        ensure(gap <= 1e-12, || format!("instance {}: identity gap {gap:.2e}", seed - 1))?;
        if pos {
            positive += 1;
            ensure(r.conditional_mean >= r.unconditional_att, || {
                format!(
                    "instance {}: survivor ATT {} below unconditional {}",
                    seed - 1,
                    r.conditional_mean,
                    r.unconditional_att
                )
            })?;
        }
        let f = discrete_fe_estimate(&sample_discrete_pairs(&inst, 100_000, 100 + seed - 1).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let (b, se) = (f.coef("d").unwrap(), f.se("d").unwrap());
        ensure((b - r.conditional_mean).abs() <= 3.0 * se + 1e-9, || {
            format!("instance {}: FE {b:.5} vs enumerated {:.5} (SE {se:.5})", seed - 1, r.conditional_mean)
        })?;
    }
    Ok(format!(
        "20 instances, max identity gap {worst:.1e}; FE within 3 SE; bound holds on {positive} positively selected"
    ))
}

fn attenuation() -> Outcome {
    let t = Instant::now();
    let cfg = DgpConfig {
        n_families: 100_000,
        family_size_dist: vec![(1, 1.0)],
        beta_male: -6.268,
        beta_female: -6.268,
        // Sampling SE of the ratio is about 0.35%, well inside the band.
        var_eps: 1.0,
        edr_dist: EdrDist::Uniform { low: 0.0, high: 1.0 },
        attenuation: Some(Attenuation {
            lambda_male: 2.0,
            lambda_female: 1.0,
        }),
        ..DgpConfig::default()
    };
    let panel = simulate_attenuation_panel(&cfg, 66).map_err(|e| e.to_string())?;
    let report = attenuation_check(&cfg, &attenuation_fit(&panel).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(report.predicted_ratio == 0.5, || format!("predicted ratio {}", report.predicted_ratio))?;
    ensure(report.rel_dev_ratio.abs() < 0.02, || {
        format!("fitted ratio {:.4}, {:.2}% off", report.fitted_ratio, 100.0 * report.rel_dev_ratio)
    })?;
    within(t, Duration::from_secs(60))?;
    Ok(format!(
        "n = {}, fitted ratio {:.4} ({:+.2}%)",
        panel.persons.len(),
        report.fitted_ratio,
        100.0 * report.rel_dev_ratio
    ))
}

fn mills() -> Outcome {
    let n = 10_000;
    let mut prev = f64::INFINITY;
    let mut prev_ln = f64::INFINITY;
    let mut underflow = None;
    for i in 0..n {
        let z = -40.0 + 80.0 * i as f64 / (n - 1) as f64;
        let (l, ll) = (inverse_mills(z), ln_inverse_mills(z));
        ensure(l.is_finite() && ll.is_finite(), || format!("non-finite at {z}"))?;
        ensure(ll < prev_ln, || format!("ln λ not strictly decreasing at {z}"))?;
        if l.is_normal() {
            ensure(l < prev, || format!("λ not strictly decreasing at {z}"))?;
        } else {
            underflow.get_or_insert(z);
            ensure(l <= prev, || format!("λ increases at {z}"))?;
        }
        prev = l;
        prev_ln = ll;
    }
    let l0 = inverse_mills(0.0);
    ensure((l0 - 0.797_884_560_8).abs() < 1e-9, || format!("λ(0) = {l0}"))?;
    let l40 = inverse_mills(-40.0);
    ensure(l40.is_finite() && (l40 - 40.024_968_847_2).abs() < 1e-9, || format!("λ(−40) = {l40}"))?;
    Ok(format!(
        "10^4-point grid: ln λ strictly decreasing throughout, λ strictly decreasing while a normal f64 (subnormal from z ≈ {:.2}); λ(0) = {l0:.10}, λ(−40) = {l40:.6}",
        underflow.unwrap_or(f64::NAN)
    ))
}

/// Share of replications rejecting each event-study bin and placebo term
/// at 5%.
fn rejection_rates(cfg: &DgpConfig, reps: usize, seed: u64) -> Result<Vec<(String, f64)>, String> {
    let plan = StudyPlan {
        outcomes: vec!["years_education".into()],
        ..StudyPlan::default()
    };
    let runs = exec().run(reps, |r| -> Result<Vec<(String, bool)>, String> {
        let pop = simulate_population(cfg, replication_seed(seed, r)).map_err(|e| e.to_string())?;
        let panel = Panel::from_population(&pop);
        let sample = Sample::new(&panel, &plan, &plan.cohort_filter).map_err(|e| e.to_string())?;
        let seq = gsfe_core::oracle::Sequential;
        let event = run_event_study(&seq, &plan, &sample).map_err(|e| e.to_string())?;
        let placebo = run_placebos(&seq, &plan, &sample).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        let ev = event.results[0].fit.as_ref().ok_or("event study fit failed")?;
        for b in event.bins.iter().filter(|b| !b.dropped) {
            out.push((format!("event {}", b.label), ev.p_value(&b.regressor).ok_or("no p-value")? < 0.05));
        }
        for run in &placebo.runs {
            let f = run.results[0].fit.as_ref().ok_or("placebo fit failed")?;
            for term in PlaceboReport::terms() {
                out.push((format!("placebo {} {term}", run.cohort.from), f.p_value(&term).ok_or("no p-value")? < 0.05));
            }
        }
        Ok(out)
    });
    let runs: Vec<Vec<(String, bool)>> = runs.into_iter().collect::<Result<_, _>>()?;
    let names: Vec<String> = runs[0].iter().map(|x| x.0.clone()).collect();
    ensure(runs.iter().all(|r| r.len() == names.len()), || "bins differ across replications".into())?;
    Ok(names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let hits = runs.iter().filter(|r| r[k].1).count();
            (name.clone(), hits as f64 / reps as f64)
        })
        .collect())
}

fn size_and_power() -> Outcome {
    let t = Instant::now();
    let null = DgpConfig {
        censor_education: false,
        edr_dist: EdrDist::Uniform { low: 0.0, high: 0.2 },
        ..DgpConfig::default()
    };
    let rates = rejection_rates(&null, 500, 8_000)?;
    for (name, r) in &rates {
        ensure((0.02..=0.09).contains(r), || format!("null rejection of {name}: {r:.3}"))?;
    }
    let violated = DgpConfig {
        violations: gsfe_core::dgp::Violations {
            county_cohort_trend: 5.0,
            ..Default::default()
        },
        ..null.clone()
    };
    let power = rejection_rates(&violated, 500, 8_500)?;
    let best = |prefix: &str| {
        power
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, r)| *r)
            .fold(0.0, f64::max)
    };
    let (ev, pl) = (best("event"), best("placebo"));
    let all = || power.iter().map(|(n, r)| format!("{n} {r:.3}")).collect::<Vec<_>>().join(", ");
    ensure(ev > 0.8, || format!("event-study power {ev:.3} ({})", all()))?;
    ensure(pl > 0.8, || format!("placebo power {pl:.3} ({})", all()))?;
    let (lo, hi) = rates.iter().fold((1.0f64, 0.0f64), |(lo, hi), (_, r)| (lo.min(*r), hi.max(*r)));
    within(t, Duration::from_secs(1200))?;
    Ok(format!(
        "{} null rejection rates in [{lo:.3}, {hi:.3}]; power under cohort trend: event {ev:.3}, placebo {pl:.3}",
        rates.len()
    ))
}

fn magnitudes() -> Outcome {
    let years = magnitude_line("years_education", -6.268, 0.05);
    let illit = magnitude_line("illiterate", 0.829, 0.05);
    ensure((years.effect + 0.3134).abs() < 1e-12, || format!("years effect {}", years.effect))?;
    ensure((illit.effect - 0.04145).abs() < 1e-12, || format!("illiteracy effect {}", illit.effect))?;
    ensure(years.text == "Years of education: 0.05 × 6.268 = 0.3134 years (decrease)", || years.text.clone())?;
    ensure(illit.text == "Illiterate: 0.05 × 0.829 = 0.04145 ≈ 4.1 pp (increase)", || illit.text.clone())?;
    Ok(format!("\"{}\" / \"{}\"", years.text, illit.text))
}

fn gsfe(cwd: &Path, threads: &str, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gsfe"))
        .current_dir(cwd)
        .env("GSFE_THREADS", threads)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("gsfe {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    fs::write(
        dir.join("run.toml"),
        "seed = 31\n\n[dgp]\nn_families = 400\n\n[fit]\noutcome = \"years_education\"\nregressors = [\"edr_x_male\", \"edr_x_female\"]\nfe_dims = [\"family_gender\", \"birth_year_gender\"]\ncluster_dim = \"family\"\n",
    )
    .map_err(|e| e.to_string())?;
    fs::write(
        dir.join("oracle.toml"),
        "seed = 31\nreps = 40\n\n[dgp]\nn_families = 300\ncov_alpha_xi = 0.3\nexposure_model = { kind = \"iid_person\", famine_share = 0.5 }\n\n[dgp.attenuation]\nlambda_male = 2.0\nlambda_female = 1.0\n",
    )
    .map_err(|e| e.to_string())?;
    let inputs = ["--persons", "sim/persons.csv", "--death-rates", "sim/death_rates.csv"];
    let mut checked = Vec::new();
    gsfe(dir, "1", &["simulate", "--config", "run.toml", "--out", "sim"])?;
    for threads in ["1", "4"] {
        let o = |name: &str| format!("{name}_{threads}");
        gsfe(dir, threads, &["simulate", "--config", "run.toml", "--out", &o("simulate")])?;
        for sub in ["exposure", "fit", "study", "placebo"] {
            let mut args = vec![sub, "--config", "run.toml", "--out"];
            let out = o(sub);
            args.push(&out);
            args.extend(inputs);
            gsfe(dir, threads, &args)?;
        }
        gsfe(dir, threads, &["oracle", "--config", "oracle.toml", "--out", &o("oracle")])?;
    }
    for sub in ["simulate", "exposure", "fit", "study", "placebo", "oracle"] {
        let (a, b) = (tree(&dir.join(format!("{sub}_1"))), tree(&dir.join(format!("{sub}_4"))));
        ensure(!a.is_empty() && a == b, || format!("{sub}: artifacts differ between 1 and 4 threads"))?;
        checked.push(format!("{sub} ({} files)", a.len()));
    }
    ensure(tree(&dir.join("sim")) == tree(&dir.join("simulate_1")), || "simulate rerun differs".into())?;
    Ok(format!("byte-identical at 1 and 4 threads: {}", checked.join(", ")))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "exposure exactness", exposure_exactness),
        (2, "FE engine vs dense dummies", fe_oracle),
        (3, "closed-form OLS bias vs Monte Carlo", bias_oracle_grid),
        (4, "estimator ordering", estimator_ordering),
        (5, "discrete ATT identity", discrete_identity),
        (6, "measurement attenuation", attenuation),
        (7, "inverse Mills ratio", mills),
        (8, "event-study and placebo size", size_and_power),
        (9, "magnitude arithmetic", magnitudes),
        (10, "determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (k, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&k) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {k:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {k:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
