//! Dense dummy-variable least squares: an independent check on the
//! absorbed estimator.

use gsfe_core::frame::{Categorical, Frame};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Instance {
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub dims: Vec<Vec<u32>>,
    pub cluster: Vec<u32>,
    pub weights: Option<Vec<f64>>,
}

pub fn regressor_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

pub fn dim_names(k: usize) -> Vec<String> {
    (0..k).map(|d| format!("d{d}")).collect()
}

/// Every level of every dimension gets at least two rows, so nothing is
/// dropped as a singleton.
pub fn random_instance(seed: u64, n: usize, p: usize, levels: &[usize], n_clusters: usize, weighted: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims: Vec<Vec<u32>> = levels
        .iter()
        .map(|&l| {
            (0..n)
                .map(|i| if i < 2 * l { (i % l) as u32 } else { rng.random_range(0..l as u32) })
                .collect()
        })
        .collect();
    let effects: Vec<Vec<f64>> = levels.iter().map(|&l| (0..l).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let cluster: Vec<u32> = (0..n).map(|_| rng.random_range(0..n_clusters as u32)).collect();
    let x: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            (0..n)
                .map(|i| rng.random_range(-1.0..1.0) + 0.3 * effects[0][dims[0][i] as usize] * (j as f64 + 1.0))
                .collect()
        })
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let fe: f64 = dims.iter().zip(&effects).map(|(d, e)| e[d[i] as usize]).sum();
            let xb: f64 = (0..p).map(|j| (j as f64 - 0.5) * x[j][i]).sum();
            xb + fe + rng.random_range(-1.0..1.0) * (1.0 + x[0][i].abs())
        })
        .collect();
    let weights = weighted.then(|| (0..n).map(|_| rng.random_range(0.5..2.0)).collect());
    Instance {
        y,
        x,
        dims,
        cluster,
        weights,
    }
}

pub fn to_frame(inst: &Instance) -> Frame {
    let n = inst.y.len();
    let mut f = Frame::new(n);
    f.add_numeric("y", inst.y.clone()).unwrap();
    for (name, col) in regressor_names(inst.x.len()).iter().zip(&inst.x) {
        f.add_numeric(name, col.clone()).unwrap();
    }
    for (name, codes) in dim_names(inst.dims.len()).iter().zip(&inst.dims) {
        f.add_categorical(name, Categorical::from_keys(codes)).unwrap();
    }
    f.add_categorical("cl", Categorical::from_keys(&inst.cluster)).unwrap();
    if let Some(w) = &inst.weights {
        f.add_numeric("w", w.clone()).unwrap();
    }
    f
}

#[derive(Debug, Clone)]
pub struct DenseFit {
    /// Regressor coefficients only.
    pub coef: Vec<f64>,
    /// Regressor block of the unscaled sandwich.
    pub sandwich: DMatrix<f64>,
    /// Columns of the full dummy design, all linearly independent.
    pub k: usize,
    pub n_clusters: usize,
}

/// Least squares on regressors plus a full set of dummies for the first
/// dimension and all but one level of the others.
pub fn dense_fit(inst: &Instance, cluster: &[u32]) -> DenseFit {
    let n = inst.y.len();
    let p = inst.x.len();
    let mut cols: Vec<Vec<f64>> = inst.x.clone();
    for (d, codes) in inst.dims.iter().enumerate() {
        let levels = *codes.iter().max().unwrap() as usize + 1;
        for l in usize::from(d > 0)..levels {
            cols.push(codes.iter().map(|c| f64::from(u8::from(*c as usize == l))).collect());
        }
    }
    let k = cols.len();
    let x = DMatrix::from_fn(n, k, |i, j| cols[j][i]);
    let w = DVector::from_fn(n, |i, _| inst.weights.as_ref().map_or(1.0, |w| w[i]));
    let xw = DMatrix::from_fn(n, k, |i, j| x[(i, j)] * w[i]);
    let xtx = xw.transpose() * &x;
    let rank = xtx.clone().svd(false, false).rank(1e-9 * xtx.norm());
    assert_eq!(rank, k, "dummy design is rank deficient; regenerate the instance");
    let chol = xtx.cholesky().expect("positive definite");
    let y = DVector::from_column_slice(&inst.y);
    let beta = chol.solve(&(xw.transpose() * &y));
    let e = &y - &x * &beta;
    let bread = chol.inverse();
    let g = *cluster.iter().max().unwrap() as usize + 1;
    let mut scores = DMatrix::<f64>::zeros(g, k);
    for i in 0..n {
        for j in 0..k {
            scores[(cluster[i] as usize, j)] += x[(i, j)] * w[i] * e[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let full = &bread * meat * &bread;
    let n_clusters = {
        let mut seen = vec![false; g];
        cluster.iter().for_each(|c| seen[*c as usize] = true);
        seen.iter().filter(|s| **s).count()
    };
    DenseFit {
        coef: beta.as_slice()[..p].to_vec(),
        sandwich: full.view((0, 0), (p, p)).into_owned(),
        k,
        n_clusters,
    }
}

/// `G/(G−1) · (n−1)/(n−k)`.
pub fn conventional_factor(n: usize, k: usize, g: usize) -> f64 {
    let (n, k, g) = (n as f64, k as f64, g as f64);
    g / (g - 1.0) * (n - 1.0) / (n - k)
}
