//! Person and death-rate tables, validation, and family × gender grouping.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const BOTH: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn is_male(self) -> bool {
        self == Gender::Male
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Gender::Male => 0,
            Gender::Female => 1,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;
    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            other => Err(format!("unrecognized gender `{other}`")),
        }
    }
}

/// One individual. Missing outcomes are `None` and are dropped per
/// regression, never imputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub person_id: String,
    pub family_id: String,
    pub gender: Gender,
    pub birth_year: i32,
    pub birth_month: u8,
    pub county_id: String,
    pub years_education: Option<f64>,
    pub illiterate: Option<u8>,
    pub survived: bool,
}

impl PersonRecord {
    /// Checks the per-row invariants.
    pub fn validate(&self) -> core::result::Result<(), String> {
        if self.person_id.is_empty() {
            return Err("person_id is empty".into());
        }
        if self.family_id.is_empty() {
            return Err("family_id is empty".into());
        }
        if !(1..=12).contains(&self.birth_month) {
            return Err(format!("birth_month {} outside 1..=12", self.birth_month));
        }
        if let Some(y) = self.years_education {
            if !(y >= 0.0) || !y.is_finite() {
                return Err(format!("years_education {y} is negative or not finite"));
            }
        }
        if let Some(i) = self.illiterate {
            if i > 1 {
                return Err(format!("illiterate {i} is not 0/1"));
            }
        }
        Ok(())
    }

    /// Birth date as a month index (`year·12 + month − 1`).
    pub fn birth_month_index(&self) -> i64 {
        month_index(self.birth_year, self.birth_month)
    }
}

pub fn month_index(year: i32, month: u8) -> i64 {
    year as i64 * 12 + month as i64 - 1
}

/// A row-indexed diagnostic produced while ingesting a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    pub line: usize,
    pub message: String,
}

/// Validated person table. Rows violating per-row invariants are rejected
/// into `diagnostics`; a duplicated `person_id` is fatal.
pub fn validate_persons(
    rows: Vec<(usize, PersonRecord)>,
) -> Result<(Vec<PersonRecord>, Vec<RowDiagnostic>)> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(rows.len());
    let mut diagnostics = Vec::new();
    for (line, rec) in rows {
        if let Err(message) = rec.validate() {
            diagnostics.push(RowDiagnostic { line, message });
            continue;
        }
        if let Some(first) = seen.insert(rec.person_id.clone(), line) {
            return Err(Error::Integrity(format!(
                "duplicate person_id `{}` on lines {first} and {line}",
                rec.person_id
            )));
        }
        out.push(rec);
    }
    Ok((out, diagnostics))
}

/// County × year death rates with the baseline and famine windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeathRateTable {
    entries: BTreeMap<String, BTreeMap<i32, f64>>,
    pub baseline_years: (i32, i32),
    pub famine_years: BTreeSet<i32>,
}

pub const DEFAULT_BASELINE: (i32, i32) = (1954, 1958);
pub const FAMINE_YEARS: [i32; 3] = [1959, 1960, 1961];

impl Default for DeathRateTable {
    fn default() -> Self {
        Self::new()
    }
}

impl DeathRateTable {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
            baseline_years: DEFAULT_BASELINE,
            famine_years: FAMINE_YEARS.iter().copied().collect(),
        }
    }

    /// Builds a table from `(line, county, year, rate)` rows. Negative or
    /// non-finite rates and duplicated `(county, year)` keys are errors;
    /// counties without any baseline-year entry are reported in the
    /// returned diagnostics.
    pub fn from_rows(rows: Vec<(usize, String, i32, f64)>) -> Result<(Self, Vec<RowDiagnostic>)> {
        let mut table = Self::new();
        let mut lines: BTreeMap<(String, i32), usize> = BTreeMap::new();
        for (line, county, year, rate) in rows {
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::Row {
                    line,
                    message: format!("death rate {rate} for county {county} in {year} is negative"),
                });
            }
            let key = (county.clone(), year);
            if let Some(first) = lines.get(&key) {
                return Err(Error::Integrity(format!(
                    "duplicate death rate for county {county} in {year} on lines {first} and {line}"
                )));
            }
            lines.insert(key, line);
            table.entries.entry(county).or_default().insert(year, rate);
        }
        let diagnostics = table
            .counties_without_baseline()
            .into_iter()
            .map(|county| RowDiagnostic {
                line: lines
                    .iter()
                    .filter(|((c, _), _)| *c == county)
                    .map(|(_, l)| *l)
                    .min()
                    .unwrap_or(0),
                message: format!("county {county} has no baseline-year entry"),
            })
            .collect();
        Ok((table, diagnostics))
    }

    pub fn insert(&mut self, county: &str, year: i32, rate: f64) -> Result<()> {
        if !(rate >= 0.0) {
            return Err(Error::Integrity(format!("negative death rate {rate}")));
        }
        if self
            .entries
            .entry(county.to_string())
            .or_default()
            .insert(year, rate)
            .is_some()
        {
            return Err(Error::Integrity(format!(
                "duplicate death rate for county {county} in {year}"
            )));
        }
        Ok(())
    }

    pub fn rate(&self, county: &str, year: i32) -> Option<f64> {
        self.entries.get(county)?.get(&year).copied()
    }

    pub fn contains_county(&self, county: &str) -> bool {
        self.entries.contains_key(county)
    }

    pub fn counties(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i32, f64)> {
        self.entries
            .iter()
            .flat_map(|(c, m)| m.iter().map(move |(y, r)| (c.as_str(), *y, *r)))
    }

    pub fn is_famine_year(&self, year: i32) -> bool {
        self.famine_years.contains(&year)
    }

    pub fn is_baseline_year(&self, year: i32) -> bool {
        (self.baseline_years.0..=self.baseline_years.1).contains(&year)
    }

    /// Baseline-year rates for a county, in year order.
    pub fn baseline_rates(&self, county: &str) -> Vec<f64> {
        (self.baseline_years.0..=self.baseline_years.1)
            .filter_map(|y| self.rate(county, y))
            .collect()
    }

    pub fn counties_without_baseline(&self) -> Vec<String> {
        self.counties()
            .into_iter()
            .filter(|c| self.baseline_rates(c).is_empty())
            .collect()
    }
}

/// Members of one family sharing a gender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyGenderGroup {
    pub family_id: String,
    pub gender: Gender,
    pub member_ids: Vec<String>,
    pub singleton: bool,
}

/// Table 1 style counts. `avg_same_gender_siblings` averages group size
/// (counting the person themself) over members of multi-member groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n_groups: usize,
    pub n_multi_member: usize,
    pub n_singletons: usize,
    pub n_persons_in_multi_member: usize,
    pub n_same_gender_pairs: usize,
    pub avg_same_gender_siblings: Option<f64>,
    pub convention: String,
}

/// Groups persons by `(family_id, gender)`. When `parent_key` is given
/// (aligned with `persons`), persons of one family with different parent
/// keys form separate groups, e.g. to split half-siblings.
pub fn build_groups(
    persons: &[PersonRecord],
    parent_key: Option<&[String]>,
) -> (Vec<FamilyGenderGroup>, GroupSummary) {
    let mut map: BTreeMap<(String, String, Gender), Vec<String>> = BTreeMap::new();
    for (i, p) in persons.iter().enumerate() {
        let parents = parent_key.map(|k| k[i].clone()).unwrap_or_default();
        map.entry((p.family_id.clone(), parents, p.gender))
            .or_default()
            .push(p.person_id.clone());
    }
    let mut groups = Vec::with_capacity(map.len());
    let mut multi = 0;
    let mut persons_multi = 0;
    let mut pairs = 0;
    for ((family_id, _, gender), member_ids) in map {
        let k = member_ids.len();
        if k > 1 {
            multi += 1;
            persons_multi += k;
            pairs += k * (k - 1) / 2;
        }
        groups.push(FamilyGenderGroup {
            family_id,
            gender,
            singleton: k == 1,
            member_ids,
        });
    }
    // Σ_members k / #members over multi-member groups = Σ k² / Σ k.
    let sum_sq: usize = groups
        .iter()
        .filter(|g| !g.singleton)
        .map(|g| g.member_ids.len() * g.member_ids.len())
        .sum();
    let summary = GroupSummary {
        n_groups: groups.len(),
        n_multi_member: multi,
        n_singletons: groups.len() - multi,
        n_persons_in_multi_member: persons_multi,
        n_same_gender_pairs: pairs,
        avg_same_gender_siblings: (persons_multi > 0)
            .then(|| sum_sq as f64 / persons_multi as f64),
        convention: "group size including self, averaged over members of multi-member groups"
            .into(),
    };
    (groups, summary)
}
