use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Categorical;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbsorbOptions {
    /// Stop once the largest change of any entry during a sweep is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AbsorbOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Sweeps used by the slowest column.
    pub iterations: usize,
    /// Largest change in the final sweep of any column.
    pub residual: f64,
}

impl Convergence {
    fn merge(self, other: Convergence) -> Convergence {
        Convergence {
            iterations: self.iterations.max(other.iterations),
            residual: self.residual.max(other.residual),
        }
    }
}

/// Iteratively removes rows that are alone in their group in any dimension.
/// `initial` marks the rows eligible at the start. Returns the final mask and
/// the number of rows dropped.
pub fn singleton_mask(dims: &[&Categorical], initial: &[bool]) -> (Vec<bool>, usize) {
    let mut keep = initial.to_vec();
    let mut dropped = 0;
    loop {
        let mut changed = false;
        for dim in dims {
            let mut counts = vec![0u32; dim.n_levels];
            for (i, &c) in dim.codes.iter().enumerate() {
                if keep[i] {
                    counts[c as usize] += 1;
                }
            }
            for (i, &c) in dim.codes.iter().enumerate() {
                if keep[i] && counts[c as usize] == 1 {
                    keep[i] = false;
                    dropped += 1;
                    changed = true;
                }
            }
        }
        if !changed {
            return (keep, dropped);
        }
    }
}

/// Group-demeaning operator for a fixed set of dimensions and weights.
#[derive(Debug, Clone)]
pub struct Absorber {
    dims: Vec<Vec<u32>>,
    inv_weight_sums: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl Absorber {
    /// `dims` must be densely coded over the same rows.
    pub fn new(dims: &[Categorical], weights: Option<&[f64]>) -> Self {
        let mut inv = Vec::with_capacity(dims.len());
        for d in dims {
            let mut sums = vec![0.0; d.n_levels];
            for (i, &c) in d.codes.iter().enumerate() {
                sums[c as usize] += weights.map_or(1.0, |w| w[i]);
            }
            inv.push(sums.into_iter().map(|s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect());
        }
        Self {
            dims: dims.iter().map(|d| d.codes.clone()).collect(),
            inv_weight_sums: inv,
            weights: weights.map(<[f64]>::to_vec),
        }
    }

    pub fn n_dims(&self) -> usize {
        self.dims.len()
    }

    // One projection onto the orthocomplement of dimension `d`; returns the
    // largest absolute group mean removed.
    fn project(&self, d: usize, col: &mut [f64], sums: &mut Vec<f64>) -> f64 {
        let codes = &self.dims[d];
        let inv = &self.inv_weight_sums[d];
        sums.clear();
        sums.resize(inv.len(), 0.0);
        match &self.weights {
            None => {
                for (x, &c) in col.iter().zip(codes) {
                    sums[c as usize] += *x;
                }
            }
            Some(w) => {
                for ((x, &c), wi) in col.iter().zip(codes).zip(w) {
                    sums[c as usize] += *x * wi;
                }
            }
        }
        let mut max_change = 0.0_f64;
        for (s, i) in sums.iter_mut().zip(inv) {
            *s *= i;
            max_change = max_change.max(libm::fabs(*s));
        }
        for (x, &c) in col.iter_mut().zip(codes) {
            *x -= sums[c as usize];
        }
        max_change
    }

    /// Demeans one column in place by alternating projections.
    pub fn demean(&self, col: &mut [f64], opts: &AbsorbOptions) -> Result<Convergence> {
        let mut sums = Vec::new();
        match self.dims.len() {
            0 => Ok(Convergence::default()),
            1 => {
                // A single projection is exact.
                self.project(0, col, &mut sums);
                Ok(Convergence {
                    iterations: 1,
                    residual: 0.0,
                })
            }
            n => {
                let mut change = f64::INFINITY;
                for sweep in 1..=opts.max_iter {
                    change = 0.0;
                    for d in 0..n {
                        change = change.max(self.project(d, col, &mut sums));
                    }
                    if change < opts.tol {
                        return Ok(Convergence {
                            iterations: sweep,
                            residual: change,
                        });
                    }
                }
                Err(Error::NonConvergence {
                    iterations: opts.max_iter,
                    residual: change,
                })
            }
        }
    }
}

/// Result of [`absorb`]: demeaned columns over the retained rows.
#[derive(Debug, Clone)]
pub struct Absorbed {
    pub columns: Vec<Vec<f64>>,
    /// Mask over the input rows; `false` rows were singletons.
    pub keep: Vec<bool>,
    pub dropped_singletons: usize,
    pub convergence: Convergence,
}

/// Drops singleton rows in any dimension, then demeans every column by all
/// dimensions.
pub fn absorb(
    columns: &[Vec<f64>],
    dims: &[Categorical],
    weights: Option<&[f64]>,
    opts: &AbsorbOptions,
) -> Result<Absorbed> {
    if !(opts.tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    let n = dims
        .first()
        .map(|d| d.codes.len())
        .or_else(|| columns.first().map(Vec::len))
        .unwrap_or(0);
    let dim_refs: Vec<&Categorical> = dims.iter().collect();
    let (keep, dropped) = singleton_mask(&dim_refs, &vec![true; n]);
    let sub_dims: Vec<Categorical> = dims.iter().map(|d| subset_categorical(d, &keep)).collect();
    let sub_w: Option<Vec<f64>> = weights.map(|w| subset(w, &keep));
    let absorber = Absorber::new(&sub_dims, sub_w.as_deref());
    let mut convergence = Convergence::default();
    let mut out = Vec::with_capacity(columns.len());
    for col in columns {
        let mut c = subset(col, &keep);
        convergence = convergence.merge(absorber.demean(&mut c, opts)?);
        out.push(c);
    }
    Ok(Absorbed {
        columns: out,
        keep,
        dropped_singletons: dropped,
        convergence,
    })
}

pub(crate) fn subset(col: &[f64], keep: &[bool]) -> Vec<f64> {
    col.iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .map(|(x, _)| *x)
        .collect()
}

pub(crate) fn subset_categorical(cat: &Categorical, keep: &[bool]) -> Categorical {
    let codes: Vec<u32> = cat
        .codes
        .iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .map(|(c, _)| *c)
        .collect();
    Categorical::from_keys(&codes)
}
