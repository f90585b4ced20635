//! Famine-intensity regressors: excess death rates, gestation-weighted
//! prenatal exposure, postnatal exposure by age, the counterfactual 1960
//! exposure used by the event study, the binary treatment dummy and the
//! cohort-size shrinkage index.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{DeathRateTable, PersonRecord, FAMINE_YEARS};
use crate::stats;

/// Which nine calendar months count as gestation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowConvention {
    /// The nine months ending with the birth month.
    #[default]
    Inclusive,
    /// The nine months ending the month before birth.
    Exclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CounterfactualMode {
    #[default]
    #[serde(rename = "year1960")]
    Year1960,
    #[serde(rename = "mean1959_61")]
    Mean1959To61,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExposureConfig {
    pub window_convention: WindowConvention,
    pub floor_negative_edr: bool,
    pub counterfactual_mode: CounterfactualMode,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self {
            window_convention: WindowConvention::Inclusive,
            floor_negative_edr: true,
            counterfactual_mode: CounterfactualMode::Year1960,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureRecord {
    pub person_id: String,
    pub prenatal_edr: f64,
    /// Exposure at ages 1 through 5.
    pub postnatal_edr: [f64; 5],
    pub binary_treatment: u8,
    pub counterfactual_1960_edr: f64,
}

/// Excess death rate of `county` in `year`: the rate minus the county's
/// baseline-window mean in famine years, exactly zero otherwise.
pub fn excess_death_rate(table: &DeathRateTable, county: &str, year: i32, floor: bool) -> Result<f64> {
    if !table.contains_county(county) {
        return Err(Error::Lookup {
            county: county.into(),
            year,
        });
    }
    if !table.is_famine_year(year) {
        return Ok(0.0);
    }
    let baseline = table.baseline_rates(county);
    if baseline.is_empty() {
        return Err(Error::MissingBaseline {
            county: county.into(),
        });
    }
    let rate = table.rate(county, year).ok_or_else(|| Error::Lookup {
        county: county.into(),
        year,
    })?;
    let excess = rate - stats::mean(&baseline);
    Ok(if floor { excess.max(0.0) } else { excess })
}

/// Months of the gestation window falling in the year before birth and in
/// the birth year. The two counts always sum to nine.
pub fn gestation_months(birth_month: u8, convention: WindowConvention) -> (u8, u8) {
    let in_birth_year = match convention {
        WindowConvention::Inclusive => birth_month.min(9),
        WindowConvention::Exclusive => (birth_month - 1).min(9),
    };
    (9 - in_birth_year, in_birth_year)
}

/// `[(year before birth, weight), (birth year, weight)]`, weights = months / 9.
pub fn prenatal_weights(birth_year: i32, birth_month: u8, convention: WindowConvention) -> [(i32, f64); 2] {
    let (prev, cur) = gestation_months(birth_month, convention);
    [
        (birth_year - 1, prev as f64 / 9.0),
        (birth_year, cur as f64 / 9.0),
    ]
}

/// Gestation-weighted sum of an annual series.
pub fn prenatal_weighted(
    birth_year: i32,
    birth_month: u8,
    convention: WindowConvention,
    mut annual: impl FnMut(i32) -> Result<f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for (year, w) in prenatal_weights(birth_year, birth_month, convention) {
        if w > 0.0 {
            total += w * annual(year)?;
        }
    }
    Ok(total)
}

/// True when at least one gestation month falls in a famine year.
pub fn overlaps_famine(birth_year: i32, birth_month: u8, convention: WindowConvention) -> bool {
    prenatal_weights(birth_year, birth_month, convention)
        .iter()
        .any(|(y, w)| *w > 0.0 && FAMINE_YEARS.contains(y))
}

pub fn prenatal_edr(
    birth_year: i32,
    birth_month: u8,
    county: &str,
    table: &DeathRateTable,
    convention: WindowConvention,
    floor: bool,
) -> Result<f64> {
    if !table.contains_county(county) {
        return Err(Error::Lookup {
            county: county.into(),
            year: birth_year,
        });
    }
    prenatal_weighted(birth_year, birth_month, convention, |y| {
        excess_death_rate(table, county, y, floor)
    })
}

/// Exposure at `age` (1..=5): the excess death rate of year `birth_year + age`.
pub fn postnatal_edr(birth_year: i32, county: &str, age: u8, table: &DeathRateTable, floor: bool) -> Result<f64> {
    if !(1..=5).contains(&age) {
        return Err(Error::Spec(format!("postnatal age {age} outside 1..=5")));
    }
    excess_death_rate(table, county, birth_year + age as i32, floor)
}

/// Exposure a person would have had if in utero in 1960 (or the average
/// over the three famine years).
pub fn counterfactual_1960_edr(
    county: &str,
    table: &DeathRateTable,
    mode: CounterfactualMode,
    floor: bool,
) -> Result<f64> {
    match mode {
        CounterfactualMode::Year1960 => excess_death_rate(table, county, 1960, floor),
        CounterfactualMode::Mean1959To61 => {
            let mut sum = 0.0;
            for y in FAMINE_YEARS {
                sum += excess_death_rate(table, county, y, floor)?;
            }
            Ok(sum / FAMINE_YEARS.len() as f64)
        }
    }
}

pub fn exposure_for(person: &PersonRecord, table: &DeathRateTable, cfg: &ExposureConfig) -> Result<ExposureRecord> {
    let floor = cfg.floor_negative_edr;
    let mut postnatal = [0.0; 5];
    for (k, slot) in postnatal.iter_mut().enumerate() {
        *slot = postnatal_edr(person.birth_year, &person.county_id, k as u8 + 1, table, floor)?;
    }
    Ok(ExposureRecord {
        person_id: person.person_id.clone(),
        prenatal_edr: prenatal_edr(
            person.birth_year,
            person.birth_month,
            &person.county_id,
            table,
            cfg.window_convention,
            floor,
        )?,
        postnatal_edr: postnatal,
        binary_treatment: 0,
        counterfactual_1960_edr: counterfactual_1960_edr(&person.county_id, table, cfg.counterfactual_mode, floor)?,
    })
}

/// Exposure records for every person; the binary treatment is filled in
/// when at least one prenatal exposure is positive.
pub fn compute_exposures(
    persons: &[PersonRecord],
    table: &DeathRateTable,
    cfg: &ExposureConfig,
) -> Result<Vec<ExposureRecord>> {
    let mut out = persons
        .iter()
        .map(|p| exposure_for(p, table, cfg))
        .collect::<Result<Vec<_>>>()?;
    if out.iter().any(|e| e.prenatal_edr > 0.0) {
        binary_treatment(&mut out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTreatmentReport {
    pub threshold: f64,
    pub n_positive: usize,
    pub n_treated: usize,
    pub diagnostics: Vec<String>,
}

/// Sets `binary_treatment = 1` exactly when the prenatal exposure is
/// strictly above the median of the strictly positive exposures.
pub fn binary_treatment(exposures: &mut [ExposureRecord]) -> Result<BinaryTreatmentReport> {
    let positive: Vec<f64> = exposures
        .iter()
        .map(|e| e.prenatal_edr)
        .filter(|v| *v > 0.0)
        .collect();
    let threshold = stats::median(&positive).ok_or_else(|| {
        Error::DegenerateThreshold("no strictly positive prenatal exposure".into())
    })?;
    let mut treated = 0;
    for e in exposures.iter_mut() {
        e.binary_treatment = u8::from(e.prenatal_edr > threshold);
        treated += e.binary_treatment as usize;
    }
    let mut diagnostics = Vec::new();
    if treated == 0 {
        diagnostics.push(format!(
            "no exposure exceeds the positive median {threshold}; treatment is all zero"
        ));
    }
    Ok(BinaryTreatmentReport {
        threshold,
        n_positive: positive.len(),
        n_treated: treated,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortShrinkageIndex {
    pub county_id: String,
    pub famine_year: i32,
    pub index: f64,
}

/// Reference (non-famine) birth years for the shrinkage index.
pub const CSSI_REFERENCE_YEARS: [i32; 7] = [1954, 1955, 1956, 1957, 1963, 1964, 1965];

/// Famine-year cohort size divided by the mean reference-year cohort size,
/// for every county and famine year present in `counts`.
pub fn cssi(counts: &BTreeMap<(String, i32), f64>) -> Result<Vec<CohortShrinkageIndex>> {
    let mut out = Vec::new();
    for ((county, year), count) in counts {
        if !FAMINE_YEARS.contains(year) {
            continue;
        }
        let reference: Vec<f64> = CSSI_REFERENCE_YEARS
            .iter()
            .filter_map(|y| counts.get(&(county.clone(), *y)).copied())
            .collect();
        let denom = stats::mean(&reference);
        if reference.is_empty() || !(denom > 0.0) {
            return Err(Error::DegenerateDenominator(format!(
                "county {county} has no positive reference-year cohort count"
            )));
        }
        out.push(CohortShrinkageIndex {
            county_id: county.clone(),
            famine_year: *year,
            index: count / denom,
        });
    }
    Ok(out)
}

/// Famine intensity implied by a shrinkage index: the relative cohort loss
/// `max(0, 1 − index)`, increasing in severity like the excess death rate.
pub fn shrinkage_intensity(index: f64) -> f64 {
    (1.0 - index).max(0.0)
}

/// Birth date shifted by whole years; used by the placebo assignment.
pub fn shift_birth_year(birth_year: i32, years: i32) -> i32 {
    birth_year + years
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn table_with(county: &str, baseline: &[f64], famine: &[(i32, f64)]) -> DeathRateTable {
        let mut t = DeathRateTable::new();
        for (i, r) in baseline.iter().enumerate() {
            t.insert(county, 1954 + i as i32, *r).unwrap();
        }
        for (y, r) in famine {
            t.insert(county, *y, *r).unwrap();
        }
        t
    }

    #[test]
    fn excess_death_rate_hand_arithmetic() {
        let t = table_with("A", &[0.010, 0.012, 0.011, 0.013, 0.014], &[(1960, 0.0255)]);
        let e = excess_death_rate(&t, "A", 1960, true).unwrap();
        assert!((e - 0.0135).abs() < 1e-15, "{e}");
        assert_eq!(excess_death_rate(&t, "A", 1963, true).unwrap(), 0.0);
    }

    #[test]
    fn excess_death_rate_floor_and_errors() {
        let t = table_with("A", &[0.02; 5], &[(1960, 0.01)]);
        assert_eq!(excess_death_rate(&t, "A", 1960, true).unwrap(), 0.0);
        assert!((excess_death_rate(&t, "A", 1960, false).unwrap() + 0.01).abs() < 1e-15);
        assert!(matches!(
            excess_death_rate(&t, "Z", 1960, true),
            Err(Error::Lookup { .. })
        ));
        let mut nb = DeathRateTable::new();
        nb.insert("B", 1960, 0.05).unwrap();
        assert!(matches!(
            excess_death_rate(&nb, "B", 1960, true),
            Err(Error::MissingBaseline { .. })
        ));
    }

    #[test]
    fn worked_gestation_examples() {
        let w = prenatal_weights(1961, 1, WindowConvention::Inclusive);
        assert_eq!(w, [(1960, 8.0 / 9.0), (1961, 1.0 / 9.0)]);
        let w = prenatal_weights(1959, 2, WindowConvention::Exclusive);
        assert_eq!(w, [(1958, 8.0 / 9.0), (1959, 1.0 / 9.0)]);
        let w = prenatal_weights(1959, 2, WindowConvention::Inclusive);
        assert_eq!(w, [(1958, 7.0 / 9.0), (1959, 2.0 / 9.0)]);
    }

    #[test]
    fn prenatal_values() {
        let t = table_with(
            "A",
            &[0.01; 5],
            &[(1959, 0.04), (1960, 0.10), (1961, 0.07)],
        );
        let e59 = excess_death_rate(&t, "A", 1959, true).unwrap();
        let e60 = excess_death_rate(&t, "A", 1960, true).unwrap();
        let e61 = excess_death_rate(&t, "A", 1961, true).unwrap();
        let v = prenatal_edr(1961, 1, "A", &t, WindowConvention::Inclusive, true).unwrap();
        assert_eq!(v, (8.0 / 9.0) * e60 + (1.0 / 9.0) * e61);
        let v = prenatal_edr(1959, 2, "A", &t, WindowConvention::Exclusive, true).unwrap();
        assert_eq!(v, (1.0 / 9.0) * e59);
        for conv in [WindowConvention::Inclusive, WindowConvention::Exclusive] {
            assert_eq!(prenatal_edr(1965, 7, "A", &t, conv, true).unwrap(), 0.0);
        }
    }

    #[test]
    fn postnatal_and_counterfactual() {
        let t = table_with(
            "A",
            &[0.0; 5],
            &[(1959, 0.03), (1960, 0.09), (1961, 0.06)],
        );
        assert_eq!(postnatal_edr(1958, "A", 2, &t, true).unwrap(), 0.09);
        assert_eq!(postnatal_edr(1958, "A", 5, &t, true).unwrap(), 0.0);
        assert_eq!(postnatal_edr(1960, "A", 1, &t, true).unwrap(), 0.06);
        assert!(postnatal_edr(1960, "A", 6, &t, true).is_err());
        assert_eq!(
            counterfactual_1960_edr("A", &t, CounterfactualMode::Year1960, true).unwrap(),
            0.09
        );
        let m = counterfactual_1960_edr("A", &t, CounterfactualMode::Mean1959To61, true).unwrap();
        assert!((m - 0.06).abs() < 1e-15);
    }

    fn exposures(vals: &[f64]) -> Vec<ExposureRecord> {
        vals.iter()
            .enumerate()
            .map(|(i, v)| ExposureRecord {
                person_id: i.to_string(),
                prenatal_edr: *v,
                postnatal_edr: [0.0; 5],
                binary_treatment: 0,
                counterfactual_1960_edr: 0.0,
            })
            .collect()
    }

    #[test]
    fn binary_treatment_strict_median() {
        let mut ex = exposures(&[0.0, 0.0, 0.02, 0.08, 0.10]);
        let rep = binary_treatment(&mut ex).unwrap();
        assert_eq!(rep.threshold, 0.08);
        let d: Vec<u8> = ex.iter().map(|e| e.binary_treatment).collect();
        assert_eq!(d, vec![0, 0, 0, 0, 1]);

        let mut single = exposures(&[0.0, 0.05]);
        let rep = binary_treatment(&mut single).unwrap();
        assert_eq!(single[1].binary_treatment, 0);
        assert!(!rep.diagnostics.is_empty());

        let mut zeros = exposures(&[0.0, 0.0]);
        assert!(matches!(
            binary_treatment(&mut zeros),
            Err(Error::DegenerateThreshold(_))
        ));
    }

    #[test]
    fn cssi_ratios() {
        let mut counts = BTreeMap::new();
        for y in CSSI_REFERENCE_YEARS {
            counts.insert(("A".to_string(), y), 100.0);
        }
        counts.insert(("A".to_string(), 1960), 80.0);
        counts.insert(("B".to_string(), 1960), 50.0);
        counts.insert(("B".to_string(), 1954), 40.0);
        counts.insert(("B".to_string(), 1964), 60.0);
        let idx = cssi(&counts).unwrap();
        assert_eq!(idx.len(), 2);
        assert!((idx[0].index - 0.8).abs() < 1e-15);
        assert!((idx[1].index - 1.0).abs() < 1e-15);

        let mut zero = BTreeMap::new();
        zero.insert(("C".to_string(), 1960), 10.0);
        for y in CSSI_REFERENCE_YEARS {
            zero.insert(("C".to_string(), y), 0.0);
        }
        assert!(matches!(cssi(&zero), Err(Error::DegenerateDenominator(_))));
    }
}
