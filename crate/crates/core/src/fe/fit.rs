use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::absorb::{singleton_mask, subset, subset_categorical, AbsorbOptions, Absorber, Convergence};
use crate::error::{Error, Result};
use crate::frame::{Categorical, Frame, MISSING_CODE};
use crate::linalg::{dependent_columns, Cholesky, Matrix};
use crate::special::student_t_two_sided_p;

/// One regression: outcome, explicit regressors, absorbed categorical
/// dimensions, the clustering dimension and optional analytic weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSpec {
    pub outcome: String,
    pub regressors: Vec<String>,
    #[serde(default)]
    pub fe_dims: Vec<String>,
    pub cluster_dim: String,
    #[serde(default)]
    pub weights: Option<String>,
    /// Explicit intercept; required when `fe_dims` is empty.
    #[serde(default)]
    pub intercept: bool,
}

impl RegressionSpec {
    pub fn new(outcome: &str, regressors: &[&str], fe_dims: &[&str], cluster_dim: &str) -> Self {
        Self {
            outcome: outcome.into(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            fe_dims: fe_dims.iter().map(|s| s.to_string()).collect(),
            cluster_dim: cluster_dim.into(),
            weights: None,
            intercept: false,
        }
    }

    pub fn with_weights(mut self, column: &str) -> Self {
        self.weights = Some(column.into());
        self
    }

    pub fn with_intercept(mut self) -> Self {
        self.intercept = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() {
            return Err(Error::Spec("no regressors".into()));
        }
        if self.regressors.contains(&self.outcome) {
            return Err(Error::Spec(format!(
                "outcome `{}` also listed as a regressor",
                self.outcome
            )));
        }
        if self.fe_dims.is_empty() && !self.intercept {
            return Err(Error::Spec(
                "specification needs fixed effects or an explicit intercept".into(),
            ));
        }
        let mut seen = BTreeMap::new();
        for r in &self.regressors {
            if seen.insert(r.as_str(), ()).is_some() {
                return Err(Error::Spec(format!("regressor `{r}` listed twice")));
            }
        }
        Ok(())
    }
}

/// Finite-sample scaling of the cluster-robust covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallSampleCorrection {
    /// `G/(G−1) · (n−1)/(n−k)`.
    #[default]
    Conventional,
    /// `G/(G−1)` only.
    ClusterOnly,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub absorb: AbsorbOptions,
    pub small_sample: SmallSampleCorrection,
    /// A column is collinear when its squared residual on the earlier
    /// columns is below this fraction of its raw sum of squares.
    pub collinearity_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            absorb: AbsorbOptions::default(),
            small_sample: SmallSampleCorrection::Conventional,
            collinearity_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub outcome: String,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Cluster-robust covariance, same order as `names`.
    pub vcov: Matrix,
    pub n_effective: usize,
    pub n_clusters: usize,
    pub dropped_singletons: usize,
    pub dropped_missing: usize,
    pub convergence: Convergence,
    /// Parameters counted in the `(n−1)/(n−k)` factor.
    pub k_params: usize,
    pub small_sample_factor: f64,
    pub r2_within: f64,
}

impl FitResult {
    fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.position(name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.position(name).map(|i| libm::sqrt(self.vcov[(i, i)].max(0.0)))
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        self.vcov.diagonal().into_iter().map(|v| libm::sqrt(v.max(0.0))).collect()
    }

    /// Degrees of freedom for t tests: clusters minus one.
    pub fn df(&self) -> f64 {
        (self.n_clusters as f64 - 1.0).max(1.0)
    }

    /// Two-sided p-value of `H0: coef = null` with `G − 1` degrees of freedom.
    pub fn p_value_against(&self, name: &str, null: f64) -> Option<f64> {
        let b = self.coef(name)?;
        let se = self.se(name)?;
        Some(student_t_two_sided_p((b - null) / se, self.df()))
    }

    pub fn p_value(&self, name: &str) -> Option<f64> {
        self.p_value_against(name, 0.0)
    }
}

/// Fits `spec` on `frame`: rows with any absent value are removed,
/// singleton fixed-effect groups are dropped, the fixed effects are absorbed
/// and the remaining least-squares problem is solved with a cluster-robust
/// sandwich covariance.
pub fn fit(spec: &RegressionSpec, frame: &Frame, opts: &FitOptions) -> Result<FitResult> {
    spec.validate()?;
    let n = frame.n_rows();
    let y = frame.numeric(&spec.outcome)?;
    let xs = spec
        .regressors
        .iter()
        .map(|r| frame.numeric(r))
        .collect::<Result<Vec<_>>>()?;
    let dims = spec
        .fe_dims
        .iter()
        .map(|d| frame.categorical(d))
        .collect::<Result<Vec<_>>>()?;
    let cluster = frame.categorical(&spec.cluster_dim)?;
    let weights = spec.weights.as_deref().map(|w| frame.numeric(w)).transpose()?;

    let mut eligible = vec![true; n];
    for (i, e) in eligible.iter_mut().enumerate() {
        *e = y[i].is_finite()
            && xs.iter().all(|x| x[i].is_finite())
            && dims.iter().all(|d| d.codes[i] != MISSING_CODE)
            && cluster.codes[i] != MISSING_CODE
            && weights.map_or(true, |w| w[i].is_finite() && w[i] > 0.0);
    }
    let dropped_missing = eligible.iter().filter(|e| !**e).count();
    let (keep, dropped_singletons) = if dims.is_empty() {
        (eligible, 0)
    } else {
        singleton_mask(&dims, &eligible)
    };
    let n_eff = keep.iter().filter(|k| **k).count();
    if n_eff == 0 {
        return Err(Error::Inference(
            "no observations left after removing missing values and singletons".into(),
        ));
    }

    let sub_dims: Vec<Categorical> = dims.iter().map(|d| subset_categorical(d, &keep)).collect();
    let sub_cluster = subset_categorical(cluster, &keep);
    let w: Option<Vec<f64>> = weights.map(|w| subset(w, &keep));

    let mut names = spec.regressors.clone();
    let mut raw: Vec<Vec<f64>> = xs.iter().map(|x| subset(x, &keep)).collect();
    if spec.intercept {
        names.insert(0, "(intercept)".into());
        raw.insert(0, vec![1.0; n_eff]);
    }
    let p = raw.len();
    let wi = |i: usize| w.as_ref().map_or(1.0, |w| w[i]);
    let reference: Vec<f64> = raw
        .iter()
        .map(|c| c.iter().enumerate().map(|(i, v)| wi(i) * v * v).sum())
        .collect();

    let absorber = Absorber::new(&sub_dims, w.as_deref());
    let mut convergence = Convergence::default();
    let mut yt = subset(y, &keep);
    let c = absorber.demean(&mut yt, &opts.absorb)?;
    convergence.iterations = convergence.iterations.max(c.iterations);
    convergence.residual = convergence.residual.max(c.residual);
    let mut xt = raw;
    for col in &mut xt {
        let c = absorber.demean(col, &opts.absorb)?;
        convergence.iterations = convergence.iterations.max(c.iterations);
        convergence.residual = convergence.residual.max(c.residual);
    }

    let mut gram = Matrix::zeros(p, p);
    let mut xty = vec![0.0; p];
    for a in 0..p {
        for b in a..p {
            let s: f64 = (0..n_eff).map(|i| wi(i) * xt[a][i] * xt[b][i]).sum();
            gram[(a, b)] = s;
            gram[(b, a)] = s;
        }
        xty[a] = (0..n_eff).map(|i| wi(i) * xt[a][i] * yt[i]).sum();
    }
    let dependent = dependent_columns(&gram, &reference, opts.collinearity_tol);
    if !dependent.is_empty() {
        return Err(Error::Collinearity {
            dependent: dependent.into_iter().map(|j| names[j].clone()).collect(),
        });
    }
    let chol = Cholesky::new(&gram).map_err(|j| Error::Collinearity {
        dependent: vec![names[j].clone()],
    })?;
    let beta = chol.solve(&xty);
    let bread = chol.inverse();

    let resid: Vec<f64> = (0..n_eff)
        .map(|i| yt[i] - (0..p).map(|j| xt[j][i] * beta[j]).sum::<f64>())
        .collect();

    let g = sub_cluster.n_levels;
    if g < 2 {
        return Err(Error::Inference(format!(
            "{g} cluster(s); cluster-robust inference needs at least 2"
        )));
    }
    let mut scores = vec![vec![0.0; p]; g];
    for i in 0..n_eff {
        let s = &mut scores[sub_cluster.codes[i] as usize];
        let we = wi(i) * resid[i];
        for j in 0..p {
            s[j] += xt[j][i] * we;
        }
    }
    let mut meat = Matrix::zeros(p, p);
    for s in &scores {
        for a in 0..p {
            for b in a..p {
                meat[(a, b)] += s[a] * s[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            meat[(a, b)] = meat[(b, a)];
        }
    }

    let k = p + absorbed_df(&sub_dims, &sub_cluster);
    if n_eff <= k {
        return Err(Error::Inference(format!(
            "no residual degrees of freedom: {n_eff} observations, {k} parameters"
        )));
    }
    let gf = g as f64;
    let factor = match opts.small_sample {
        SmallSampleCorrection::Conventional => {
            gf / (gf - 1.0) * (n_eff as f64 - 1.0) / (n_eff - k) as f64
        }
        SmallSampleCorrection::ClusterOnly => gf / (gf - 1.0),
        SmallSampleCorrection::None => 1.0,
    };
    let mut vcov = bread.matmul(&meat).matmul(&bread);
    vcov.scale(factor);
    vcov.symmetrize();

    let ssr: f64 = resid.iter().enumerate().map(|(i, e)| wi(i) * e * e).sum();
    let sst: f64 = yt.iter().enumerate().map(|(i, v)| wi(i) * v * v).sum();

    Ok(FitResult {
        outcome: spec.outcome.clone(),
        names,
        coefficients: beta,
        vcov,
        n_effective: n_eff,
        n_clusters: g,
        dropped_singletons,
        dropped_missing,
        convergence,
        k_params: k,
        small_sample_factor: factor,
        r2_within: if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN },
    })
}

/// Degrees of freedom absorbed by the fixed effects. Dimensions nested in
/// the cluster dimension are not counted; the remaining ones count their
/// levels, less one per dimension beyond the one carrying the intercept.
fn absorbed_df(dims: &[Categorical], cluster: &Categorical) -> usize {
    if dims.is_empty() {
        return 0;
    }
    let nested: Vec<bool> = dims.iter().map(|d| is_nested(d, cluster)).collect();
    let any_nested = nested.iter().any(|n| *n);
    let mut df = 0;
    let mut intercept_taken = any_nested;
    for (d, is_n) in dims.iter().zip(&nested) {
        if *is_n {
            continue;
        }
        if intercept_taken {
            df += d.n_levels.saturating_sub(1);
        } else {
            df += d.n_levels;
            intercept_taken = true;
        }
    }
    df
}

fn is_nested(inner: &Categorical, outer: &Categorical) -> bool {
    let mut owner = vec![u32::MAX; inner.n_levels];
    for (c, o) in inner.codes.iter().zip(&outer.codes) {
        let slot = &mut owner[*c as usize];
        if *slot == u32::MAX {
            *slot = *o;
        } else if *slot != *o {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Categorical;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame_with(n: usize, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<u32> = (0..n).map(|_| rng.random_range(0..20)).collect();
        let cl: Vec<u32> = g.iter().map(|v| v / 4).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let fe: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 5.0).collect();
        let y: Vec<f64> = (0..n).map(|i| 2.0 * x[i] + fe[g[i] as usize]).collect();
        let mut f = Frame::new(n);
        f.add_numeric("y", y).unwrap();
        f.add_numeric("x", x).unwrap();
        f.add_categorical("g", Categorical::from_keys(&g)).unwrap();
        f.add_categorical("cl", Categorical::from_keys(&cl)).unwrap();
        f
    }

    #[test]
    fn exact_fit_recovers_slope() {
        let f = frame_with(200, 1);
        let r = fit(&RegressionSpec::new("y", &["x"], &["g"], "cl"), &f, &FitOptions::default()).unwrap();
        assert!((r.coef("x").unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_weights_do_not_change_coefficients() {
        let mut f = frame_with(300, 2);
        let y: Vec<f64> = f.numeric("y").unwrap().iter().enumerate().map(|(i, v)| v + ((i * 7919) % 13) as f64 * 0.1).collect();
        f.add_numeric("y", y).unwrap();
        f.add_numeric("w", vec![3.7; 300]).unwrap();
        let spec = RegressionSpec::new("y", &["x"], &["g"], "cl");
        let a = fit(&spec, &f, &FitOptions::default()).unwrap();
        let b = fit(&spec.clone().with_weights("w"), &f, &FitOptions::default()).unwrap();
        assert!((a.coefficients[0] - b.coefficients[0]).abs() < 1e-12);
        assert!(a.vcov.max_abs_diff(&b.vcov) < 1e-12);
    }

    #[test]
    fn collinear_regressor_named() {
        let mut f = frame_with(100, 3);
        let x2: Vec<f64> = f.numeric("x").unwrap().iter().map(|v| 3.0 * v).collect();
        f.add_numeric("x2", x2).unwrap();
        match fit(&RegressionSpec::new("y", &["x", "x2"], &["g"], "cl"), &f, &FitOptions::default()) {
            Err(Error::Collinearity { dependent }) => assert_eq!(dependent, vec!["x2".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn absorbed_regressor_is_collinear() {
        let mut f = frame_with(100, 4);
        let gx: Vec<f64> = f.categorical("g").unwrap().codes.iter().map(|c| *c as f64).collect();
        f.add_numeric("gx", gx).unwrap();
        assert!(matches!(
            fit(&RegressionSpec::new("y", &["x", "gx"], &["g"], "cl"), &f, &FitOptions::default()),
            Err(Error::Collinearity { .. })
        ));
    }

    #[test]
    fn one_cluster_is_an_inference_error() {
        let mut f = frame_with(50, 5);
        f.add_categorical("one", Categorical::from_keys(&vec![0u8; 50])).unwrap();
        assert!(matches!(
            fit(&RegressionSpec::new("y", &["x"], &["g"], "one"), &f, &FitOptions::default()),
            Err(Error::Inference(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(RegressionSpec::new("y", &["y"], &["g"], "c").validate().is_err());
        assert!(RegressionSpec::new("y", &["x"], &[], "c").validate().is_err());
        assert!(RegressionSpec::new("y", &["x"], &[], "c").with_intercept().validate().is_ok());
    }

    #[test]
    fn nested_dims_not_counted() {
        let fam = Categorical::from_keys(&[0, 0, 1, 1, 2, 2]);
        let county = Categorical::from_keys(&[0, 0, 0, 0, 1, 1]);
        let year = Categorical::from_keys(&[0, 1, 0, 1, 0, 1]);
        assert_eq!(absorbed_df(&[fam.clone()], &county), 0);
        assert_eq!(absorbed_df(&[fam, year.clone()], &county), 1);
        assert_eq!(absorbed_df(&[year], &county), 2);
    }
}
