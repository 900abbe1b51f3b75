use thiserror::Error;

/// Source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Errors raised by parsing, validation, analysis, and lock management.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },

    #[error("{pos}: duplicate class `{class}`")]
    DuplicateClass { pos: Pos, class: String },

    #[error("{pos}: class `{class}` inherits undeclared class `{superclass}`")]
    UndeclaredSuperclass {
        pos: Pos,
        class: String,
        superclass: String,
    },

    #[error("{pos}: class `{class}` lists superclass `{superclass}` more than once")]
    DuplicateSuperclass {
        pos: Pos,
        class: String,
        superclass: String,
    },

    #[error("inheritance cycle through class `{class}`")]
    InheritanceCycle { class: String },

    #[error("{pos}: class `{class}` defines method `{method}` more than once")]
    DuplicateMethod {
        pos: Pos,
        class: String,
        method: String,
    },

    #[error(
        "{pos}: field `{field}` of class `{class}` collides with the field \
         declared in `{other_class}`"
    )]
    DuplicateField {
        pos: Pos,
        class: String,
        field: String,
        other_class: String,
    },

    #[error("{pos}: reference field `{field}` names unknown class `{class}`")]
    UnknownRefClass {
        pos: Pos,
        field: String,
        class: String,
    },

    #[error("{pos}: `{field}` is not a field visible in class `{class}`")]
    UnknownField {
        pos: Pos,
        class: String,
        field: String,
    },

    #[error("{pos}: self-send to `{method}`, which is not a method of class `{class}`")]
    UnknownSelfSend {
        pos: Pos,
        class: String,
        method: String,
    },

    #[error("{pos}: prefixed send to `{target}`, which is not an ancestor of class `{class}`")]
    PrefixedSendNotAncestor {
        pos: Pos,
        class: String,
        target: String,
    },

    #[error("{pos}: prefixed send to `{target}.{method}`, but `{target}` has no such method")]
    PrefixedSendUnknownMethod {
        pos: Pos,
        target: String,
        method: String,
    },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("class `{class}` has no method `{method}`")]
    UnknownMethod { class: String, method: String },

    #[error("method `{method}` is not applicable to class `{class}`")]
    MethodNotApplicable { class: String, method: String },

    #[error("unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("instance `{instance}` of class `{class}` is outside the domain rooted at `{domain}`")]
    InstanceOutsideDomain {
        instance: String,
        class: String,
        domain: String,
    },

    #[error("instance `{instance}` is declared with class `{first}` but used with `{second}`")]
    InconsistentInstanceClass {
        instance: String,
        first: String,
        second: String,
    },

    #[error("unknown transaction `{0}`")]
    UnknownTransaction(String),

    #[error("transaction `{txn}` is already {state}")]
    TransactionFinished { txn: String, state: String },

    #[error("{pos}: instance `{instance}` used before declaration")]
    UndeclaredInstance { pos: Pos, instance: String },

    #[error("{pos}: transaction `{txn}` has actions after its commit/abort")]
    ActionAfterTerminal { pos: Pos, txn: String },

    #[error("{pos}: transaction `{txn}` is missing a terminal commit or abort")]
    MissingTerminal { pos: Pos, txn: String },

    #[error("scenario declares {got} transactions, above the supported maximum of {max}")]
    TooManyTransactions { got: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
