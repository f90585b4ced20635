//! Column store handed to the estimator: named numeric columns (`NaN` marks
//! an absent value) and named categorical columns (dense codes).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Code used for an absent categorical value.
pub const MISSING_CODE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub codes: Vec<u32>,
    pub n_levels: usize,
}

impl Categorical {
    /// Dense codes assigned in sorted key order.
    pub fn from_keys<K: Ord + Clone>(keys: &[K]) -> Self {
        let mut index: BTreeMap<K, u32> = keys.iter().map(|k| (k.clone(), 0)).collect();
        for (i, v) in index.values_mut().enumerate() {
            *v = i as u32;
        }
        let codes = keys.iter().map(|k| index[k]).collect();
        Self {
            codes,
            n_levels: index.len(),
        }
    }

    pub fn from_optional_keys<K: Ord + Clone>(keys: &[Option<K>]) -> Self {
        let mut index: BTreeMap<K, u32> = keys.iter().flatten().map(|k| (k.clone(), 0)).collect();
        for (i, v) in index.values_mut().enumerate() {
            *v = i as u32;
        }
        let codes = keys
            .iter()
            .map(|k| k.as_ref().map_or(MISSING_CODE, |k| index[k]))
            .collect();
        Self {
            codes,
            n_levels: index.len(),
        }
    }

    /// Codes of the cross-classification of several categoricals.
    pub fn interact(parts: &[&Categorical]) -> Self {
        let n = parts.first().map_or(0, |c| c.codes.len());
        let keys: Vec<Option<Vec<u32>>> = (0..n)
            .map(|i| {
                let key: Vec<u32> = parts.iter().map(|c| c.codes[i]).collect();
                (!key.contains(&MISSING_CODE)).then_some(key)
            })
            .collect();
        Self::from_optional_keys(&keys)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    n_rows: usize,
    numeric: BTreeMap<String, Vec<f64>>,
    categorical: BTreeMap<String, Categorical>,
}

impl Frame {
    pub fn new(n_rows: usize) -> Self {
        Self {
            n_rows,
            ..Self::default()
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn add_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n_rows {
            return Err(Error::Spec(format!(
                "column `{name}` has {} rows, frame has {}",
                values.len(),
                self.n_rows
            )));
        }
        self.numeric.insert(name.to_string(), values);
        Ok(())
    }

    pub fn add_categorical(&mut self, name: &str, cat: Categorical) -> Result<()> {
        if cat.codes.len() != self.n_rows {
            return Err(Error::Spec(format!(
                "categorical `{name}` has {} rows, frame has {}",
                cat.codes.len(),
                self.n_rows
            )));
        }
        self.categorical.insert(name.to_string(), cat);
        Ok(())
    }

    pub fn has_numeric(&self, name: &str) -> bool {
        self.numeric.contains_key(name)
    }

    pub fn has_categorical(&self, name: &str) -> bool {
        self.categorical.contains_key(name)
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Spec(format!("unknown numeric column `{name}`")))
    }

    pub fn categorical(&self, name: &str) -> Result<&Categorical> {
        self.categorical
            .get(name)
            .ok_or_else(|| Error::Spec(format!("unknown categorical column `{name}`")))
    }

    pub fn numeric_names(&self) -> impl Iterator<Item = &str> {
        self.numeric.keys().map(String::as_str)
    }

    /// Adds `name = a · b`.
    pub fn add_product(&mut self, name: &str, a: &str, b: &str) -> Result<()> {
        let values: Vec<f64> = self
            .numeric(a)?
            .iter()
            .zip(self.numeric(b)?)
            .map(|(x, y)| x * y)
            .collect();
        self.add_numeric(name, values)
    }

    /// Adds the cross-classification of existing categoricals.
    pub fn add_interaction(&mut self, name: &str, parts: &[&str]) -> Result<()> {
        let cats = parts
            .iter()
            .map(|p| self.categorical(p))
            .collect::<Result<Vec<_>>>()?;
        let cat = Categorical::interact(&cats);
        self.add_categorical(name, cat)
    }

    /// Rows where `keep` is true; categorical codes are re-densified.
    pub fn filter(&self, keep: &[bool]) -> Frame {
        let n = keep.iter().filter(|k| **k).count();
        let mut out = Frame::new(n);
        for (name, col) in &self.numeric {
            let v = col
                .iter()
                .zip(keep)
                .filter(|(_, k)| **k)
                .map(|(x, _)| *x)
                .collect();
            out.numeric.insert(name.clone(), v);
        }
        for (name, cat) in &self.categorical {
            let keys: Vec<Option<u32>> = cat
                .codes
                .iter()
                .zip(keep)
                .filter(|(_, k)| **k)
                .map(|(c, _)| (*c != MISSING_CODE).then_some(*c))
                .collect();
            out.categorical
                .insert(name.clone(), Categorical::from_optional_keys(&keys));
        }
        out
    }
}
