//! Schema language: parsing, validation, and the resolved class model.
//!
//! A schema is a set of classes related by simple or multiple inheritance.
//! Each class declares fields (base-typed or references to other classes)
//! and methods whose bodies are flat statement sequences: assignments,
//! field uses, self-directed sends, superclass-prefixed sends, and sends
//! to a field. Control structures are deliberately absent; the analysis
//! only needs to see which fields and methods a body can touch.
//!
//! [`ClassModel`] is immutable once built and resolves, per class, the
//! ancestor linearization, the full field list `FIELDS(C)`, and the
//! effective method table `METHODS(C)`.

mod parser;

pub use parser::parse_schema;

use rustc_hash::{FxHashMap, FxHashSet};
use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Pos, Result};

/// Declared type of a field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldKind {
    Int,
    Bool,
    Float,
    Str,
    /// Reference to instances of the named class.
    Ref(String),
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldKind::Int => write!(f, "int"),
            FieldKind::Bool => write!(f, "bool"),
            FieldKind::Float => write!(f, "float"),
            FieldKind::Str => write!(f, "string"),
            FieldKind::Ref(c) => write!(f, "ref {c}"),
        }
    }
}

/// A field declaration as written in one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub kind: FieldKind,
    pub pos: Pos,
}

/// One abstract statement of a method body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    /// `target := expr(reads...);`
    Assign { target: String, reads: Vec<String> },
    /// `use(reads...);`
    Use { reads: Vec<String> },
    /// `send method to self;`
    SelfSend { method: String },
    /// `send class.method to self;`
    PrefixedSend { class: String, method: String },
    /// `send method to field;`
    FieldSend { field: String, method: String },
}

/// Statement with its source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub node: Statement,
    pub pos: Pos,
}

/// A method definition as written in one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDef {
    pub name: String,
    pub body: Vec<Stmt>,
    pub pos: Pos,
}

/// A class declaration: supers, own fields, own methods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub name: String,
    pub supers: Vec<String>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDef>,
    pub pos: Pos,
}

/// A field as seen from some class: the name plus where it was declared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldRef {
    pub name: String,
    pub declared_in: String,
    pub kind: FieldKind,
}

/// Effective method table of a class: applicable method names in
/// canonical order, each mapped to its defining class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodTable {
    order: Vec<String>,
    defining: FxHashMap<String, String>,
}

impl MethodTable {
    /// Applicable method names, ancestor-first declaration order.
    pub fn names(&self) -> &[String] {
        &self.order
    }

    /// Class whose definition is used for `method`, if applicable.
    pub fn defining_class(&self, method: &str) -> Option<&str> {
        self.defining.get(method).map(String::as_str)
    }

    pub fn contains(&self, method: &str) -> bool {
        self.defining.contains_key(method)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Validated schema with per-class resolution caches.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    classes: Vec<ClassDef>,
    by_name: FxHashMap<String, usize>,
    ancestors: FxHashMap<String, Vec<String>>,
    subclasses: FxHashMap<String, BTreeSet<String>>,
    fields: FxHashMap<String, Vec<FieldRef>>,
    methods: FxHashMap<String, MethodTable>,
    /// Per class index: own method name to position in `methods`.
    own_method_index: Vec<FxHashMap<String, usize>>,
    /// Per class, parallel to `methods[class].names()`: the defining
    /// class and method definition as indices into `classes`.
    resolved_methods: FxHashMap<String, Vec<(u32, u32)>>,
    /// `FIELDS(C)` names behind one shared allocation per class, so all
    /// access vectors of a class share one index set.
    shared_field_names: FxHashMap<String, Arc<Vec<String>>>,
}

impl ClassModel {
    /// Class names in declaration order.
    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.name.as_str())
    }

    pub fn contains_class(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn class_def(&self, name: &str) -> Option<&ClassDef> {
        self.by_name.get(name).map(|&i| &self.classes[i])
    }

    fn require_class(&self, name: &str) -> Result<()> {
        if self.contains_class(name) {
            Ok(())
        } else {
            Err(Error::UnknownClass(name.to_string()))
        }
    }

    /// Ancestor linearization of `class`, nearest first, excluding the
    /// class itself. Left-to-right depth-first over the supers with
    /// duplicate removal keeping the last occurrence.
    pub fn ancestors(&self, class: &str) -> Result<&[String]> {
        self.require_class(class)?;
        Ok(&self.ancestors[class])
    }

    /// All classes that have `class` among their ancestors.
    pub fn subclasses(&self, class: &str) -> Result<&BTreeSet<String>> {
        self.require_class(class)?;
        Ok(&self.subclasses[class])
    }

    /// The domain rooted at `class`: the class itself, then its
    /// subclasses in name order.
    pub fn domain(&self, class: &str) -> Result<Vec<String>> {
        let mut out = vec![class.to_string()];
        out.extend(self.subclasses(class)?.iter().cloned());
        Ok(out)
    }

    /// `FIELDS(C)`: own and inherited fields, ancestor-first in
    /// declaration order.
    pub fn fields(&self, class: &str) -> Result<&[FieldRef]> {
        self.require_class(class)?;
        Ok(&self.fields[class])
    }

    /// Field names of `FIELDS(C)` in canonical order.
    pub fn field_names(&self, class: &str) -> Result<Vec<String>> {
        Ok(self.fields(class)?.iter().map(|f| f.name.clone()).collect())
    }

    /// `FIELDS(C)` names behind a shared allocation.
    pub fn field_names_shared(&self, class: &str) -> Result<Arc<Vec<String>>> {
        self.require_class(class)?;
        Ok(Arc::clone(&self.shared_field_names[class]))
    }

    /// `METHODS(C)`: the effective method table.
    pub fn methods(&self, class: &str) -> Result<&MethodTable> {
        self.require_class(class)?;
        Ok(&self.methods[class])
    }

    /// Resolve `method` on `class` to its defining class and definition.
    pub fn method_body(&self, class: &str, method: &str) -> Result<(&str, &MethodDef)> {
        let table = self.methods(class)?;
        let defining = table
            .defining_class(method)
            .ok_or_else(|| Error::UnknownMethod {
                class: class.to_string(),
                method: method.to_string(),
            })?;
        let ci = self.by_name[defining];
        let mi = self.own_method_index[ci][method];
        Ok((defining, &self.classes[ci].methods[mi]))
    }

    /// For each method of `METHODS(class)` in table order: indices of
    /// the defining class and of the definition within it.
    pub(crate) fn resolved_methods(&self, class: &str) -> &[(u32, u32)] {
        &self.resolved_methods[class]
    }

    pub(crate) fn class_by_index(&self, idx: u32) -> &ClassDef {
        &self.classes[idx as usize]
    }

    /// Render the model back to canonical schema source.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for class in &self.classes {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("class ");
            out.push_str(&class.name);
            if !class.supers.is_empty() {
                out.push_str(" inherits ");
                out.push_str(&class.supers.join(", "));
            }
            out.push_str(" {\n");
            if !class.fields.is_empty() {
                out.push_str("  fields {\n");
                for f in &class.fields {
                    out.push_str(&format!("    {}: {};\n", f.name, f.kind));
                }
                out.push_str("  }\n");
            }
            for m in &class.methods {
                out.push_str(&format!("  method {} {{\n", m.name));
                for s in &m.body {
                    out.push_str("    ");
                    out.push_str(&render_stmt(&s.node));
                    out.push('\n');
                }
                out.push_str("  }\n");
            }
            out.push_str("}\n");
        }
        out
    }
}

fn render_stmt(s: &Statement) -> String {
    match s {
        Statement::Assign { target, reads } => {
            format!("{} := expr({});", target, reads.join(", "))
        }
        Statement::Use { reads } => format!("use({});", reads.join(", ")),
        Statement::SelfSend { method } => format!("send {method} to self;"),
        Statement::PrefixedSend { class, method } => {
            format!("send {class}.{method} to self;")
        }
        Statement::FieldSend { field, method } => format!("send {method} to {field};"),
    }
}

/// Concatenation dedup that keeps the last occurrence of each element.
fn dedup_keep_last(seq: Vec<String>) -> Vec<String> {
    let mut last: FxHashMap<&String, usize> =
        FxHashMap::with_capacity_and_hasher(seq.len(), Default::default());
    for (i, s) in seq.iter().enumerate() {
        last.insert(s, i);
    }
    seq.iter()
        .enumerate()
        .filter(|(i, s)| last[*s] == *i)
        .map(|(_, s)| s.clone())
        .collect()
}

pub(crate) fn build_model(classes: Vec<ClassDef>) -> Result<ClassModel> {
    // Name index; duplicate class names are rejected.
    let mut by_name: FxHashMap<String, usize> =
        FxHashMap::with_capacity_and_hasher(classes.len(), Default::default());
    for (i, c) in classes.iter().enumerate() {
        if by_name.insert(c.name.clone(), i).is_some() {
            return Err(Error::DuplicateClass {
                pos: c.pos,
                class: c.name.clone(),
            });
        }
    }

    // One definition per method name within a class.
    for c in &classes {
        let mut seen: FxHashSet<&str> = FxHashSet::default();
        for m in &c.methods {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::DuplicateMethod {
                    pos: m.pos,
                    class: c.name.clone(),
                    method: m.name.clone(),
                });
            }
        }
    }

    // Supers must be declared (anywhere in the schema) and distinct.
    for c in &classes {
        let mut seen = FxHashSet::default();
        for s in &c.supers {
            if !by_name.contains_key(s) {
                return Err(Error::UndeclaredSuperclass {
                    pos: c.pos,
                    class: c.name.clone(),
                    superclass: s.clone(),
                });
            }
            if !seen.insert(s.clone()) {
                return Err(Error::DuplicateSuperclass {
                    pos: c.pos,
                    class: c.name.clone(),
                    superclass: s.clone(),
                });
            }
        }
    }

    // Kahn's algorithm: acyclicity check plus a parents-first order.
    let n = classes.len();
    let mut indegree = vec![0usize; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in classes.iter().enumerate() {
        for s in &c.supers {
            let p = by_name[s];
            children[p].push(i);
            indegree[i] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(i) = queue.pop() {
        topo.push(i);
        for &ch in &children[i] {
            indegree[ch] -= 1;
            if indegree[ch] == 0 {
                queue.push(ch);
            }
        }
    }
    if topo.len() != n {
        let stuck = (0..n)
            .filter(|&i| indegree[i] > 0)
            .map(|i| classes[i].name.clone())
            .min()
            .expect("some class is on a cycle");
        return Err(Error::InheritanceCycle { class: stuck });
    }

    // Ancestor linearization per class, parents before children.
    let mut ancestors: FxHashMap<String, Vec<String>> = FxHashMap::default();
    for &i in &topo {
        let c = &classes[i];
        let mut seq = Vec::new();
        for s in &c.supers {
            seq.push(s.clone());
            seq.extend(ancestors[s].iter().cloned());
        }
        ancestors.insert(c.name.clone(), dedup_keep_last(seq));
    }

    // Subclass sets by inverting the ancestor relation.
    let mut subclasses: FxHashMap<String, BTreeSet<String>> = classes
        .iter()
        .map(|c| (c.name.clone(), BTreeSet::new()))
        .collect();
    for c in &classes {
        for a in &ancestors[&c.name] {
            subclasses
                .get_mut(a)
                .expect("ancestor is a declared class")
                .insert(c.name.clone());
        }
    }

    // FIELDS(C): ancestor-first (most remote first), declaration order,
    // rejecting duplicate names anywhere in one hierarchy.
    let mut fields: FxHashMap<String, Vec<FieldRef>> = FxHashMap::default();
    for c in &classes {
        let mut list: Vec<FieldRef> = Vec::new();
        let mut seen: FxHashMap<String, String> = FxHashMap::default();
        let chain = ancestors[&c.name]
            .iter()
            .rev()
            .chain(std::iter::once(&c.name));
        for owner in chain {
            let def = &classes[by_name[owner]];
            for f in &def.fields {
                if let Some(other) = seen.insert(f.name.clone(), owner.clone()) {
                    if &other != owner {
                        return Err(Error::DuplicateField {
                            pos: f.pos,
                            class: owner.clone(),
                            field: f.name.clone(),
                            other_class: other,
                        });
                    }
                    continue; // same declaration reached through a diamond
                }
                list.push(FieldRef {
                    name: f.name.clone(),
                    declared_in: owner.clone(),
                    kind: f.kind.clone(),
                });
            }
        }
        fields.insert(c.name.clone(), list);
    }

    // Own-method index per class (also the duplicate check's data).
    let own_method_index: Vec<FxHashMap<String, usize>> = classes
        .iter()
        .map(|c| {
            let mut idx = FxHashMap::with_capacity_and_hasher(c.methods.len(), Default::default());
            for (i, m) in c.methods.iter().enumerate() {
                idx.insert(m.name.clone(), i);
            }
            idx
        })
        .collect();

    // METHODS(C): names ordered ancestor-first; definitions resolved to
    // the nearest class along the linearization.
    let mut methods: FxHashMap<String, MethodTable> = FxHashMap::default();
    for c in &classes {
        let mut order: Vec<String> = Vec::new();
        let mut seen: FxHashSet<&str> = FxHashSet::default();
        let mut defining: FxHashMap<String, String> = FxHashMap::default();
        let own_count: usize = std::iter::once(&c.name)
            .chain(ancestors[&c.name].iter())
            .map(|cls| classes[by_name[cls]].methods.len())
            .sum();
        order.reserve(own_count);
        seen.reserve(own_count);
        defining.reserve(own_count);
        let chain: Vec<&String> = ancestors[&c.name]
            .iter()
            .rev()
            .chain(std::iter::once(&c.name))
            .collect();
        for owner in &chain {
            let def = &classes[by_name[*owner]];
            for m in &def.methods {
                if seen.insert(m.name.as_str()) {
                    order.push(m.name.clone());
                }
            }
        }
        // Nearest definition: the class itself, then the linearization.
        let lookup: Vec<&String> = std::iter::once(&c.name)
            .chain(ancestors[&c.name].iter())
            .collect();
        for name in &order {
            let owner = lookup
                .iter()
                .find(|cls| own_method_index[by_name[**cls]].contains_key(name.as_str()))
                .expect("method name came from the chain");
            defining.insert(name.clone(), (*owner).clone());
        }
        methods.insert(c.name.clone(), MethodTable { order, defining });
    }

    let mut resolved_methods: FxHashMap<String, Vec<(u32, u32)>> = FxHashMap::default();
    for c in &classes {
        let table = &methods[&c.name];
        let resolved = table
            .order
            .iter()
            .map(|name| {
                let ci = by_name[&table.defining[name]];
                let mi = own_method_index[ci][name];
                (ci as u32, mi as u32)
            })
            .collect();
        resolved_methods.insert(c.name.clone(), resolved);
    }

    let shared_field_names: FxHashMap<String, Arc<Vec<String>>> = fields
        .iter()
        .map(|(class, list)| {
            let names: Vec<String> = list.iter().map(|f| f.name.clone()).collect();
            (class.clone(), Arc::new(names))
        })
        .collect();

    let model = ClassModel {
        classes,
        by_name,
        ancestors,
        subclasses,
        fields,
        methods,
        own_method_index,
        resolved_methods,
        shared_field_names,
    };
    validate_bodies(&model)?;
    Ok(model)
}

/// Statement-level checks: field visibility, self-send resolution,
/// prefixed-send targets, and reference field classes.
fn validate_bodies(model: &ClassModel) -> Result<()> {
    for class in &model.classes {
        for f in &class.fields {
            if let FieldKind::Ref(target) = &f.kind {
                if !model.contains_class(target) {
                    return Err(Error::UnknownRefClass {
                        pos: f.pos,
                        field: f.name.clone(),
                        class: target.clone(),
                    });
                }
            }
        }

        let visible: FxHashSet<&str> = model.fields[&class.name]
            .iter()
            .map(|f| f.name.as_str())
            .collect();
        let table = &model.methods[&class.name];
        let ancestor_set: FxHashSet<&str> = model.ancestors[&class.name]
            .iter()
            .map(String::as_str)
            .collect();

        let check_field = |name: &str, pos: Pos| -> Result<()> {
            if visible.contains(name) {
                Ok(())
            } else {
                Err(Error::UnknownField {
                    pos,
                    class: class.name.clone(),
                    field: name.to_string(),
                })
            }
        };

        for method in &class.methods {
            for stmt in &method.body {
                match &stmt.node {
                    Statement::Assign { target, reads } => {
                        check_field(target, stmt.pos)?;
                        for r in reads {
                            check_field(r, stmt.pos)?;
                        }
                    }
                    Statement::Use { reads } => {
                        for r in reads {
                            check_field(r, stmt.pos)?;
                        }
                    }
                    Statement::FieldSend { field, .. } => {
                        check_field(field, stmt.pos)?;
                    }
                    Statement::SelfSend { method: target } => {
                        if !table.contains(target) {
                            return Err(Error::UnknownSelfSend {
                                pos: stmt.pos,
                                class: class.name.clone(),
                                method: target.clone(),
                            });
                        }
                    }
                    Statement::PrefixedSend {
                        class: target_class,
                        method: target,
                    } => {
                        if !ancestor_set.contains(target_class.as_str()) {
                            return Err(Error::PrefixedSendNotAncestor {
                                pos: stmt.pos,
                                class: class.name.clone(),
                                target: target_class.clone(),
                            });
                        }
                        if !model.methods[target_class].contains(target) {
                            return Err(Error::PrefixedSendUnknownMethod {
                                pos: stmt.pos,
                                target: target_class.clone(),
                                method: target.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
