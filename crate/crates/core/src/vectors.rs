//! The mode lattice and the access-vector algebra built on it.
//!
//! A [`Mode`] is one of `Null < Read < Write`; the join of two modes is
//! their maximum. An [`AccessVector`] is a bag of modes indexed by a
//! field set. Joining two vectors collects all fields and takes the most
//! restrictive mode on common ones; two vectors commute when every
//! common field carries a compatible mode pair.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// Access mode on a single field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Null,
    Read,
    Write,
}

impl Mode {
    /// Least upper bound; `max` on the total order.
    pub fn join(self, other: Mode) -> Mode {
        self.max(other)
    }

    /// Classical compatibility: only Read/Write and Write/Write clash.
    pub fn compatible(self, other: Mode) -> bool {
        self == Mode::Null || other == Mode::Null || (self == Mode::Read && other == Mode::Read)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Null => write!(f, "Null"),
            Mode::Read => write!(f, "Read"),
            Mode::Write => write!(f, "Write"),
        }
    }
}

/// Join of two modes, exposed as a free function for symmetry with
/// [`av_join`].
pub fn mode_join(a: Mode, b: Mode) -> Mode {
    a.join(b)
}

/// Compatibility of two modes.
pub fn mode_compatible(a: Mode, b: Mode) -> bool {
    a.compatible(b)
}

/// A bag of modes indexed by field names.
///
/// Only non-Null entries are stored; any indexed field without an entry
/// is Null. The index set keeps its order for rendering (vectors
/// produced by the analysis follow `FIELDS(C)`) and is behind an `Arc`
/// so vectors over one class share a single allocation.
#[derive(Debug, Clone)]
pub struct AccessVector {
    order: Arc<Vec<String>>,
    /// (position in `order`, mode), sorted by position, Null omitted.
    modes: Vec<(u32, Mode)>,
}

impl AccessVector {
    /// Empty vector over an empty index set.
    pub fn empty() -> Self {
        AccessVector {
            order: Arc::new(Vec::new()),
            modes: Vec::new(),
        }
    }

    /// All-Null vector over the given index set.
    pub fn all_null<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AccessVector {
            order: Arc::new(fields.into_iter().map(Into::into).collect()),
            modes: Vec::new(),
        }
    }

    /// All-Null vector over a shared index set.
    pub fn all_null_shared(fields: Arc<Vec<String>>) -> Self {
        AccessVector {
            order: fields,
            modes: Vec::new(),
        }
    }

    /// Vector from explicit (field, mode) pairs; the pair order is the
    /// index order, and a repeated field keeps its strongest mode.
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, Mode)>,
        S: Into<String>,
    {
        let mut v = AccessVector::empty();
        for (field, mode) in pairs {
            v.raise(&field.into(), mode);
        }
        v
    }

    /// Vector over a shared index set from a dense mode row.
    pub(crate) fn from_dense(order: Arc<Vec<String>>, row: &[Mode]) -> Self {
        debug_assert_eq!(order.len(), row.len());
        AccessVector {
            order,
            modes: row
                .iter()
                .enumerate()
                .filter(|(_, &m)| m != Mode::Null)
                .map(|(i, &m)| (i as u32, m))
                .collect(),
        }
    }

    /// Indexed fields in display order.
    pub fn fields(&self) -> &[String] {
        &self.order
    }

    fn slot_of(&self, field: &str) -> Option<u32> {
        self.order.iter().position(|f| f == field).map(|i| i as u32)
    }

    pub fn contains_field(&self, field: &str) -> bool {
        self.slot_of(field).is_some()
    }

    fn mode_at(&self, slot: u32) -> Mode {
        match self.modes.binary_search_by_key(&slot, |&(s, _)| s) {
            Ok(i) => self.modes[i].1,
            Err(_) => Mode::Null,
        }
    }

    /// Mode of a field; Null when absent from the index.
    pub fn mode_of(&self, field: &str) -> Mode {
        self.slot_of(field).map_or(Mode::Null, |s| self.mode_at(s))
    }

    /// Raise `field` to at least `mode`, adding it to the index if new.
    pub fn raise(&mut self, field: &str, mode: Mode) {
        let slot = match self.slot_of(field) {
            Some(s) => s,
            None => {
                Arc::make_mut(&mut self.order).push(field.to_string());
                (self.order.len() - 1) as u32
            }
        };
        if mode == Mode::Null {
            return;
        }
        match self.modes.binary_search_by_key(&slot, |&(s, _)| s) {
            Ok(i) => self.modes[i].1 = self.modes[i].1.join(mode),
            Err(i) => self.modes.insert(i, (slot, mode)),
        }
    }

    /// Join with `other`: union of the index sets, `mode_join` on common
    /// fields. Fields of `self` keep their positions; fields only in
    /// `other` are appended in `other`'s order.
    pub fn join(&self, other: &AccessVector) -> AccessVector {
        let mut out = self.clone();
        if Arc::ptr_eq(&self.order, &other.order) {
            // Same index set: merge the sorted mode lists directly.
            out.modes = merge_modes(&self.modes, &other.modes);
            return out;
        }
        for (i, field) in other.order.iter().enumerate() {
            out.raise(field, other.mode_at(i as u32));
        }
        out
    }

    /// Commutativity: every field indexed by both carries a compatible
    /// mode pair. Vacuously true on disjoint index sets.
    pub fn commutes_with(&self, other: &AccessVector) -> bool {
        if Arc::ptr_eq(&self.order, &other.order) {
            return compatible_modes(&self.modes, &other.modes);
        }
        // Null is compatible with everything, so only stored entries of
        // the smaller side need a lookup in the other.
        let (small, big) = if self.modes.len() <= other.modes.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.modes.iter().all(|&(slot, mode)| {
            let field = &small.order[slot as usize];
            mode.compatible(big.mode_of(field))
        })
    }

    /// Componentwise order: every indexed field of `self` is indexed by
    /// `other` with a mode at least as restrictive.
    pub fn leq(&self, other: &AccessVector) -> bool {
        let same_index = Arc::ptr_eq(&self.order, &other.order);
        if !same_index {
            for f in self.order.iter() {
                if !other.contains_field(f) {
                    return false;
                }
            }
        }
        self.modes.iter().all(|&(slot, mode)| {
            let theirs = if same_index {
                other.mode_at(slot)
            } else {
                other.mode_of(&self.order[slot as usize])
            };
            mode <= theirs
        })
    }

    /// True when no indexed field is Write.
    pub fn is_read_only(&self) -> bool {
        self.modes.iter().all(|&(_, m)| m != Mode::Write)
    }

    /// JSON rendering: ordered list of `{field, mode}` objects.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.order
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    serde_json::json!({
                        "field": f,
                        "mode": self.mode_at(i as u32).to_string(),
                    })
                })
                .collect(),
        )
    }
}

fn merge_modes(a: &[(u32, Mode)], b: &[(u32, Mode)]) -> Vec<(u32, Mode)> {
    let mut out = Vec::with_capacity(a.len().max(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1.join(b[j].1)));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn compatible_modes(a: &[(u32, Mode)], b: &[(u32, Mode)]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if !a[i].1.compatible(b[j].1) {
                    return false;
                }
                i += 1;
                j += 1;
            }
        }
    }
    true
}

/// Equality is semantic: same index set, same field modes. Display
/// order is presentation only.
impl PartialEq for AccessVector {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.order, &other.order) {
            return self.modes == other.modes;
        }
        let a: BTreeSet<&str> = self.order.iter().map(String::as_str).collect();
        let b: BTreeSet<&str> = other.order.iter().map(String::as_str).collect();
        if a != b {
            return false;
        }
        if self.modes.len() != other.modes.len() {
            return false;
        }
        self.modes
            .iter()
            .all(|&(slot, mode)| other.mode_of(&self.order[slot as usize]) == mode)
    }
}

impl Eq for AccessVector {}

impl fmt::Display for AccessVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, field) in self.order.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} {}", self.mode_at(i as u32), field)?;
        }
        write!(f, ")")
    }
}

/// Join of two access vectors.
pub fn av_join(a: &AccessVector, b: &AccessVector) -> AccessVector {
    a.join(b)
}

/// Commutativity of two access vectors.
pub fn av_commutes(a: &AccessVector, b: &AccessVector) -> bool {
    a.commutes_with(b)
}
