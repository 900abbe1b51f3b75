//! Per-class commutativity tables.
//!
//! Each applicable method of a class becomes one access mode; two modes
//! commute exactly when the methods' transitive access vectors commute.
//! The table is a dense symmetric boolean matrix so a run-time check is
//! a single indexed lookup.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::schema::ClassModel;
use crate::tav_graph::compute_tavs;
use crate::vectors::{av_commutes, AccessVector};

/// Symmetric commutativity relation over the methods of one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommutativityTable {
    class: String,
    methods: Vec<String>,
    by_name: HashMap<String, usize>,
    matrix: Vec<Vec<bool>>,
}

impl CommutativityTable {
    pub fn class(&self) -> &str {
        &self.class
    }

    /// Method names in the class's canonical table order.
    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    /// Whether the modes of two methods commute on this class.
    pub fn modes_commute(&self, a: &str, b: &str) -> Result<bool> {
        let ia = self.ordinal(a)?;
        let ib = self.ordinal(b)?;
        Ok(self.matrix[ia][ib])
    }

    fn ordinal(&self, method: &str) -> Result<usize> {
        self.by_name
            .get(method)
            .copied()
            .ok_or_else(|| Error::UnknownMethod {
                class: self.class.clone(),
                method: method.to_string(),
            })
    }

    pub fn matrix(&self) -> &[Vec<bool>] {
        &self.matrix
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "class": self.class,
            "methods": self.methods,
            "matrix": self.matrix,
        })
    }
}

/// Build the commutativity table of `class` from its transitive access
/// vectors.
pub fn build_table(model: &ClassModel, class: &str) -> Result<CommutativityTable> {
    let tavs = compute_tavs(model, class)?;
    let methods: Vec<String> = model.methods(class)?.names().to_vec();
    build_from_tavs(class, &methods, &tavs)
}

/// Build a table from precomputed vectors (shared with batch builds).
fn build_from_tavs(
    class: &str,
    methods: &[String],
    tavs: &HashMap<String, AccessVector>,
) -> Result<CommutativityTable> {
    let vecs: Vec<&AccessVector> = methods.iter().map(|m| &tavs[m]).collect();
    let n = methods.len();
    let mut matrix = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i..n {
            let c = av_commutes(vecs[i], vecs[j]);
            matrix[i][j] = c;
            matrix[j][i] = c;
        }
    }
    Ok(CommutativityTable {
        class: class.to_string(),
        methods: methods.to_vec(),
        by_name: methods
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect(),
        matrix,
    })
}

/// Commutativity tables for every class of the model, keyed by class.
#[derive(Debug, Clone)]
pub struct TableSet {
    tables: HashMap<String, CommutativityTable>,
}

impl TableSet {
    pub fn build(model: &ClassModel) -> Result<TableSet> {
        let mut tables = HashMap::new();
        for class in model.class_names() {
            tables.insert(class.to_string(), build_table(model, class)?);
        }
        Ok(TableSet { tables })
    }

    pub fn table(&self, class: &str) -> Result<&CommutativityTable> {
        self.tables
            .get(class)
            .ok_or_else(|| Error::UnknownClass(class.to_string()))
    }
}
