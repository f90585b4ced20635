//! CSV and JSON artifacts: persons, death rates, exposures, latents and
//! truth.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use gsfe_core::dgp::LatentDraw;
use gsfe_core::exposure::ExposureRecord;
use gsfe_core::panel::{validate_persons, DeathRateTable, Gender, PersonRecord, RowDiagnostic};
use gsfe_core::Error;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Column names used in a user's persons file, keyed by internal field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonSchema {
    pub person_id: String,
    pub family_id: String,
    pub gender: String,
    pub birth_year: String,
    pub birth_month: String,
    pub county_id: String,
    pub years_education: String,
    pub illiterate: String,
    /// Optional; every row counts as a survivor when the column is absent.
    pub survived: String,
}

impl Default for PersonSchema {
    fn default() -> Self {
        Self {
            person_id: "person_id".into(),
            family_id: "family_id".into(),
            gender: "gender".into(),
            birth_year: "birth_year".into(),
            birth_month: "birth_month".into(),
            county_id: "county_id".into(),
            years_education: "years_education".into(),
            illiterate: "illiterate".into(),
            survived: "survived".into(),
        }
    }
}

impl PersonSchema {
    fn required(&self) -> [&str; 8] {
        [
            &self.person_id,
            &self.family_id,
            &self.gender,
            &self.birth_year,
            &self.birth_month,
            &self.county_id,
            &self.years_education,
            &self.illiterate,
        ]
    }
}

/// Loaded persons with per-row rejections and the remaining columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PersonTable {
    pub persons: Vec<PersonRecord>,
    pub diagnostics: Vec<RowDiagnostic>,
    /// Columns outside the schema, aligned with `persons`.
    pub aux: BTreeMap<String, Vec<String>>,
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::parse(path, format!("{other:?}")),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn headers(path: &Path, rdr: &mut csv::Reader<fs::File>) -> Result<HashMap<String, usize>> {
    Ok(rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i))
        .collect())
}

fn missing_columns(index: &HashMap<String, usize>, required: &[&str]) -> Option<gsfe_core::Error> {
    let missing: Vec<&str> = required.iter().copied().filter(|c| !index.contains_key(*c)).collect();
    (!missing.is_empty()).then(|| Error::Schema(format!("missing column(s): {}", missing.join(", "))))
}

fn is_absent(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na")
}

fn parse_cell<T: std::str::FromStr>(value: &str, column: &str) -> std::result::Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("cannot parse `{value}` in column {column}"))
}

fn parse_person(
    rec: &csv::StringRecord,
    index: &HashMap<String, usize>,
    schema: &PersonSchema,
) -> std::result::Result<PersonRecord, String> {
    let get = |c: &str| rec.get(index[c]).unwrap_or("");
    let years_education = match get(&schema.years_education) {
        s if is_absent(s) => None,
        s => Some(parse_cell::<f64>(s, &schema.years_education)?),
    };
    let illiterate = match get(&schema.illiterate) {
        s if is_absent(s) => None,
        s => Some(parse_cell::<u8>(s, &schema.illiterate)?),
    };
    let survived = match index.get(&schema.survived).and_then(|i| rec.get(*i)) {
        None => true,
        Some(s) => match s {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(format!("cannot parse `{other}` in column {}", schema.survived)),
        },
    };
    let id = get(&schema.person_id);
    if id.is_empty() {
        return Err("empty person_id".into());
    }
    Ok(PersonRecord {
        person_id: id.into(),
        family_id: get(&schema.family_id).into(),
        gender: get(&schema.gender).parse::<Gender>()?,
        birth_year: parse_cell(get(&schema.birth_year), &schema.birth_year)?,
        birth_month: parse_cell(get(&schema.birth_month), &schema.birth_month)?,
        county_id: get(&schema.county_id).into(),
        years_education,
        illiterate,
        survived,
    })
}

/// Reads a persons file. Unparseable or invalid rows are rejected into
/// diagnostics with their line number; a missing column or a duplicated
/// person id is fatal.
pub fn load_persons(path: &Path, schema: &PersonSchema) -> Result<PersonTable> {
    let mut rdr = reader(path)?;
    let index = headers(path, &mut rdr)?;
    if let Some(e) = missing_columns(&index, &schema.required()) {
        return Err(e.into());
    }
    let mut known: Vec<&str> = schema.required().to_vec();
    known.push(&schema.survived);
    let mut extra: Vec<(String, usize)> = index
        .iter()
        .filter(|(h, _)| !known.contains(&h.as_str()))
        .map(|(h, i)| (h.clone(), *i))
        .collect();
    extra.sort_by_key(|(_, i)| *i);

    let mut parsed = Vec::new();
    let mut extra_values: HashMap<String, Vec<String>> = HashMap::new();
    let mut diagnostics = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        match parse_person(&rec, &index, schema) {
            Ok(p) => {
                extra_values.insert(
                    p.person_id.clone(),
                    extra.iter().map(|(_, i)| rec.get(*i).unwrap_or("").to_string()).collect(),
                );
                parsed.push((line, p));
            }
            Err(message) => diagnostics.push(RowDiagnostic { line, message }),
        }
    }
    let (persons, mut invalid) = validate_persons(parsed)?;
    diagnostics.append(&mut invalid);
    diagnostics.sort_by_key(|d| d.line);
    let mut aux: BTreeMap<String, Vec<String>> =
        extra.iter().map(|(h, _)| (h.clone(), Vec::with_capacity(persons.len()))).collect();
    for p in &persons {
        for ((h, _), v) in extra.iter().zip(&extra_values[&p.person_id]) {
            aux.get_mut(h).expect("column registered").push(v.clone());
        }
    }
    Ok(PersonTable {
        persons,
        diagnostics,
        aux,
    })
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::parse(path, e)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Writes persons with the canonical header followed by the extra columns.
pub fn write_persons(path: &Path, persons: &[PersonRecord], aux: &BTreeMap<String, Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    let mut header: Vec<&str> = vec![
        "person_id",
        "family_id",
        "gender",
        "birth_year",
        "birth_month",
        "county_id",
        "years_education",
        "illiterate",
        "survived",
    ];
    header.extend(aux.keys().map(String::as_str));
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for (i, p) in persons.iter().enumerate() {
        let mut row = vec![
            p.person_id.clone(),
            p.family_id.clone(),
            p.gender.as_str().to_string(),
            p.birth_year.to_string(),
            p.birth_month.to_string(),
            p.county_id.clone(),
            opt(p.years_education),
            opt(p.illiterate),
            u8::from(p.survived).to_string(),
        ];
        row.extend(aux.values().map(|v| v[i].clone()));
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads `county_id,year,death_rate`; counties without a baseline entry are
/// returned as diagnostics.
pub fn load_death_rates(path: &Path) -> Result<(DeathRateTable, Vec<RowDiagnostic>)> {
    let mut rdr = reader(path)?;
    let index = headers(path, &mut rdr)?;
    if let Some(e) = missing_columns(&index, &["county_id", "year", "death_rate"]) {
        return Err(e.into());
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let get = |c: &str| rec.get(index[c]).unwrap_or("");
        let year = parse_cell::<i32>(get("year"), "year").map_err(|message| Error::Row { line, message })?;
        let rate =
            parse_cell::<f64>(get("death_rate"), "death_rate").map_err(|message| Error::Row { line, message })?;
        rows.push((line, get("county_id").to_string(), year, rate));
    }
    Ok(DeathRateTable::from_rows(rows)?)
}

pub fn write_death_rates(path: &Path, table: &DeathRateTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["county_id", "year", "death_rate"])
        .map_err(|e| write_err(path, e))?;
    for (county, year, rate) in table.iter() {
        w.write_record([county.to_string(), year.to_string(), rate.to_string()])
            .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub const EXPOSURE_HEADER: [&str; 9] = [
    "person_id",
    "prenatal_edr",
    "edr_age1",
    "edr_age2",
    "edr_age3",
    "edr_age4",
    "edr_age5",
    "binary_treatment",
    "cf_1960_edr",
];

pub fn write_exposures(path: &Path, exposures: &[ExposureRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EXPOSURE_HEADER).map_err(|e| write_err(path, e))?;
    for e in exposures {
        let mut row = vec![e.person_id.clone(), e.prenatal_edr.to_string()];
        row.extend(e.postnatal_edr.iter().map(f64::to_string));
        row.push(e.binary_treatment.to_string());
        row.push(e.counterfactual_1960_edr.to_string());
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn load_exposures(path: &Path) -> Result<Vec<ExposureRecord>> {
    let mut rdr = reader(path)?;
    let index = headers(path, &mut rdr)?;
    if let Some(e) = missing_columns(&index, &EXPOSURE_HEADER) {
        return Err(e.into());
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = |message| Error::Row { line, message };
        let get = |c: &str| rec.get(index[c]).unwrap_or("");
        let num = |c: &str| parse_cell::<f64>(get(c), c).map_err(row);
        let mut postnatal = [0.0; 5];
        for (k, slot) in postnatal.iter_mut().enumerate() {
            *slot = num(EXPOSURE_HEADER[2 + k])?;
        }
        out.push(ExposureRecord {
            person_id: get("person_id").to_string(),
            prenatal_edr: num("prenatal_edr")?,
            postnatal_edr: postnatal,
            binary_treatment: parse_cell::<u8>(get("binary_treatment"), "binary_treatment").map_err(row)?,
            counterfactual_1960_edr: num("cf_1960_edr")?,
        });
    }
    Ok(out)
}

/// Exposure records in the order of `persons`; every person needs one.
pub fn align_exposures(persons: &[PersonRecord], exposures: Vec<ExposureRecord>) -> Result<Vec<ExposureRecord>> {
    let mut by_id: HashMap<String, ExposureRecord> = HashMap::with_capacity(exposures.len());
    for e in exposures {
        let id = e.person_id.clone();
        if by_id.insert(id.clone(), e).is_some() {
            return Err(Error::Integrity(format!("duplicate exposure record for `{id}`")).into());
        }
    }
    persons
        .iter()
        .map(|p| {
            by_id
                .remove(&p.person_id)
                .ok_or_else(|| Error::Integrity(format!("no exposure record for person `{}`", p.person_id)).into())
        })
        .collect()
}

pub fn write_latents(path: &Path, latents: &[LatentDraw]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "person_id", "alpha_jg", "xi_jg", "eps_i", "eta_i", "u_ig", "v_ig", "beta_i", "f_star", "outcome",
    ])
    .map_err(|e| write_err(path, e))?;
    for l in latents {
        let row = [
            l.person_id.clone(),
            l.alpha_jg.to_string(),
            l.xi_jg.to_string(),
            l.eps_i.to_string(),
            l.eta_i.to_string(),
            l.u_ig.to_string(),
            l.v_ig.to_string(),
            l.beta_i.to_string(),
            l.f_star.to_string(),
            l.outcome.to_string(),
        ];
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| write_err(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
