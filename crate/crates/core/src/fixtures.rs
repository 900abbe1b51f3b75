//! Bundled demonstration assets: the two-level hierarchy schema and its
//! four-transaction scenario, shared by the CLI, tests, and golden
//! outputs.

/// Two classes, six fields, four methods; exercises inheritance,
/// overriding-by-extension, and self-directed calls.
pub const HIERARCHY_SCHEMA: &str = include_str!("../fixtures/hierarchy.schema");

/// One-instance, extent, and both domain access patterns over the
/// hierarchy schema.
pub const HIERARCHY_SCENARIO: &str = include_str!("../fixtures/hierarchy.scenario");
