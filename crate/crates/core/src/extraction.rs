//! Per-method facts extracted from bodies: the direct access vector and
//! the sets of plain and prefixed self-calls.
//!
//! For a method applicable to a class but defined higher up, the facts
//! are those of the defining class, with the direct access vector padded
//! to the subclass's full field set by joining an all-Null vector.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::schema::{ClassModel, Statement};
use crate::vectors::{AccessVector, Mode};

/// A (class, method) pair: a prefixed-call target or a vertex of a
/// late-binding resolution graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodRef {
    pub class: String,
    pub method: String,
}

impl MethodRef {
    pub fn new(class: impl Into<String>, method: impl Into<String>) -> Self {
        MethodRef {
            class: class.into(),
            method: method.into(),
        }
    }
}

impl std::fmt::Display for MethodRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.class, self.method)
    }
}

/// Extracted facts for one method as applicable to one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodFacts {
    /// Direct access vector over `FIELDS(C)`.
    pub dav: AccessVector,
    /// Plain self-call targets.
    pub dsc: BTreeSet<String>,
    /// Prefixed self-call targets.
    pub psc: BTreeSet<MethodRef>,
}

fn resolve(model: &ClassModel, class: &str, method: &str) -> Result<String> {
    model
        .methods(class)?
        .defining_class(method)
        .map(str::to_string)
        .ok_or_else(|| Error::UnknownMethod {
            class: class.to_string(),
            method: method.to_string(),
        })
}

/// Direct access vector of `method` as applicable to `class`.
///
/// For a method defined in `class` itself, each field of `FIELDS(class)`
/// is Write when it is an assignment target anywhere in the body, Read
/// when it otherwise appears in a read list, a `use`, or as the target
/// of a field send, and Null when it appears nowhere. For an inherited
/// method, the defining class's vector is joined with an all-Null vector
/// over the subclass's fields.
pub fn extract_dav(model: &ClassModel, class: &str, method: &str) -> Result<AccessVector> {
    let defining = resolve(model, class, method)?;
    if defining != class {
        let base = extract_dav(model, &defining, method)?;
        return Ok(AccessVector::all_null_shared(model.field_names_shared(class)?).join(&base));
    }

    let (_, def) = model.method_body(class, method)?;
    let mut vector = AccessVector::all_null_shared(model.field_names_shared(class)?);
    for stmt in &def.body {
        match &stmt.node {
            Statement::Assign { target, reads } => {
                vector.raise(target, Mode::Write);
                for r in reads {
                    if r != target {
                        vector.raise(r, Mode::Read);
                    }
                }
            }
            Statement::Use { reads } => {
                for r in reads {
                    vector.raise(r, Mode::Read);
                }
            }
            Statement::FieldSend { field, .. } => {
                vector.raise(field, Mode::Read);
            }
            Statement::SelfSend { .. } | Statement::PrefixedSend { .. } => {}
        }
    }
    Ok(vector)
}

/// Plain self-call targets of `method` as applicable to `class`.
pub fn extract_dsc(model: &ClassModel, class: &str, method: &str) -> Result<BTreeSet<String>> {
    let defining = resolve(model, class, method)?;
    let (_, def) = model.method_body(&defining, method)?;
    let mut out = BTreeSet::new();
    for stmt in &def.body {
        if let Statement::SelfSend { method: target } = &stmt.node {
            out.insert(target.clone());
        }
    }
    Ok(out)
}

/// Prefixed self-call targets of `method` as applicable to `class`.
pub fn extract_psc(model: &ClassModel, class: &str, method: &str) -> Result<BTreeSet<MethodRef>> {
    let defining = resolve(model, class, method)?;
    let (_, def) = model.method_body(&defining, method)?;
    let mut out = BTreeSet::new();
    for stmt in &def.body {
        if let Statement::PrefixedSend {
            class: target_class,
            method: target,
        } = &stmt.node
        {
            out.insert(MethodRef::new(target_class.clone(), target.clone()));
        }
    }
    Ok(out)
}

/// All three facts for `(class, method)` in one body scan.
pub fn extract_facts(model: &ClassModel, class: &str, method: &str) -> Result<MethodFacts> {
    let defining = resolve(model, class, method)?;
    let (_, def) = model.method_body(&defining, method)?;
    facts_of_definition(model, class, &defining, def)
}

/// Facts for every method applicable to `class`, parallel to
/// `methods(class).names()`. One pass over the resolved definitions so
/// large tables avoid per-name lookups.
pub fn extract_all_facts(model: &ClassModel, class: &str) -> Result<Vec<MethodFacts>> {
    let resolved = model.resolved_methods(class).to_vec();
    let mut out = Vec::with_capacity(resolved.len());
    for (ci, mi) in resolved {
        let def_class = model.class_by_index(ci);
        let def = &def_class.methods[mi as usize];
        out.push(facts_of_definition(model, class, &def_class.name, def)?);
    }
    Ok(out)
}

fn facts_of_definition(
    model: &ClassModel,
    class: &str,
    defining: &str,
    def: &crate::schema::MethodDef,
) -> Result<MethodFacts> {
    let mut dav = AccessVector::all_null_shared(model.field_names_shared(defining)?);
    let mut dsc = BTreeSet::new();
    let mut psc = BTreeSet::new();
    for stmt in &def.body {
        match &stmt.node {
            Statement::Assign { target, reads } => {
                dav.raise(target, Mode::Write);
                for r in reads {
                    if r != target {
                        dav.raise(r, Mode::Read);
                    }
                }
            }
            Statement::Use { reads } => {
                for r in reads {
                    dav.raise(r, Mode::Read);
                }
            }
            Statement::FieldSend { field, .. } => {
                dav.raise(field, Mode::Read);
            }
            Statement::SelfSend { method: target } => {
                dsc.insert(target.clone());
            }
            Statement::PrefixedSend {
                class: target_class,
                method: target,
            } => {
                psc.insert(MethodRef::new(target_class.clone(), target.clone()));
            }
        }
    }
    if defining != class {
        dav = AccessVector::all_null_shared(model.field_names_shared(class)?).join(&dav);
    }
    Ok(MethodFacts { dav, dsc, psc })
}
