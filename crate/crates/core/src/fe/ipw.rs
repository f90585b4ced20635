use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::RowDiagnostic;

/// Inclusion frequency of one birth-year × county cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpwCell {
    pub birth_year: i32,
    pub county_id: String,
    pub n_total: usize,
    pub n_included: usize,
    pub probability: f64,
    /// Probability was below the floor and the floor was used instead.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpwResult {
    /// One entry per input row; `None` for rows not included or whose
    /// cell has no included observation.
    pub weights: Vec<Option<f64>>,
    pub cells: Vec<IpwCell>,
    pub floor: f64,
    pub n_clipped_cells: usize,
    pub diagnostics: Vec<RowDiagnostic>,
}

/// Inverse inclusion-probability weights with probabilities estimated by
/// cell frequencies saturated in birth year × county. `rows` holds
/// `(birth_year, county_id, included)` for the full sample.
pub fn ipw_weights(rows: &[(i32, &str, bool)], floor: f64) -> Result<IpwResult> {
    if !(floor > 0.0 && floor <= 1.0) {
        return Err(Error::config("ipw_floor", "must lie in (0, 1]"));
    }
    let mut counts: BTreeMap<(i32, &str), (usize, usize)> = BTreeMap::new();
    for &(year, county, included) in rows {
        let c = counts.entry((year, county)).or_default();
        c.0 += 1;
        if included {
            c.1 += 1;
        }
    }
    let mut cells = Vec::with_capacity(counts.len());
    let mut prob: BTreeMap<(i32, &str), Option<f64>> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (&(year, county), &(total, included)) in &counts {
        let p = included as f64 / total as f64;
        let clipped = included > 0 && p < floor;
        if included == 0 {
            diagnostics.push(RowDiagnostic {
                line: 0,
                message: format!(
                    "cell birth_year={year} county={county}: no included observations, weight undefined"
                ),
            });
        }
        prob.insert((year, county), (included > 0).then_some(p.max(floor)));
        cells.push(IpwCell {
            birth_year: year,
            county_id: county.into(),
            n_total: total,
            n_included: included,
            probability: p,
            clipped,
        });
    }
    let weights = rows
        .iter()
        .map(|&(year, county, included)| {
            if !included {
                return None;
            }
            prob[&(year, county)].map(|p| 1.0 / p)
        })
        .collect();
    let n_clipped_cells = cells.iter().filter(|c| c.clipped).count();
    Ok(IpwResult {
        weights,
        cells,
        floor,
        n_clipped_cells,
        diagnostics,
    })
}
