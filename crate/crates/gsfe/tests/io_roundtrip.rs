use std::collections::BTreeMap;

use gsfe::io::{load_exposures, load_persons, write_exposures, write_persons, PersonSchema};
use gsfe_core::exposure::ExposureRecord;
use gsfe_core::panel::{Gender, PersonRecord};
use proptest::prelude::*;
use tempfile::TempDir;

fn person() -> impl Strategy<Value = (String, Gender, i32, u8, String, Option<f64>, Option<u8>, bool)> {
    (
        "[a-z]{1,6}",
        prop_oneof![Just(Gender::Male), Just(Gender::Female)],
        1900i32..2020,
        1u8..=12,
        "[A-Z]([a-z ,\"]{0,4}[a-z])?",
        prop::option::of(0.0f64..30.0),
        prop::option::of(0u8..=1),
        any::<bool>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn persons_survive_a_round_trip(
        rows in prop::collection::vec(person(), 0..30),
        // Cells are read back trimmed.
        extra in prop::collection::vec("[ -~]{0,8}".prop_map(|s| s.trim().to_string()), 30),
    ) {
        let persons: Vec<PersonRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (fam, gender, year, month, county, edu, ill, survived))| PersonRecord {
                person_id: format!("p{i}"),
                family_id: fam,
                gender,
                birth_year: year,
                birth_month: month,
                county_id: county,
                years_education: edu,
                illiterate: ill,
                survived,
            })
            .collect();
        let mut aux = BTreeMap::new();
        aux.insert("note".to_string(), extra[..persons.len()].to_vec());
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("persons.csv");
        write_persons(&path, &persons, &aux).unwrap();
        let table = load_persons(&path, &PersonSchema::default()).unwrap();
        prop_assert!(table.diagnostics.is_empty(), "{:?}", table.diagnostics);
        prop_assert_eq!(&table.persons, &persons);
        prop_assert_eq!(&table.aux, &aux);
    }

    #[test]
    fn exposures_survive_a_round_trip(values in prop::collection::vec((any::<f64>(), 0u8..=1), 0..30)) {
        let exposures: Vec<ExposureRecord> = values
            .iter()
            .enumerate()
            .map(|(i, (x, d))| {
                let x = if x.is_finite() { *x } else { 0.0 };
                ExposureRecord {
                    person_id: format!("p{i}"),
                    prenatal_edr: x,
                    postnatal_edr: [x / 3.0, -x, 0.0, x * 1e-300, 1.0 / 3.0],
                    binary_treatment: *d,
                    counterfactual_1960_edr: x / 7.0,
                }
            })
            .collect();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("exposures.csv");
        write_exposures(&path, &exposures).unwrap();
        prop_assert_eq!(load_exposures(&path).unwrap(), exposures);
    }
}
