//! Strict two-phase lock manager over an inheritance graph.
//!
//! Access modes are method names: an instance lock is a mode, a class
//! lock is a mode plus a flag saying whether it covers all instances of
//! the class (hierarchical) or merely announces instance locks below
//! (intentional). Requests come in four shapes, from one instance up
//! to a whole domain of classes, and lock their
//! footprint atomically. Conflicts are decided by the per-class
//! commutativity tables; two intentional class locks never conflict at
//! the class, the real test happening at instance granularity.
//!
//! A transaction's locks are released only by its single terminal
//! commit or abort. Blocked requests queue FIFO and are re-scanned on
//! every release; the wait-for graph is available for deadlock checks.
//!
//! Every public operation takes `&mut self` and runs to completion, so
//! wrapping a [`LockTable`] in a mutex gives concurrent callers a
//! linearizable history.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::commutativity::TableSet;
use crate::error::{Error, Result};
use crate::schema::ClassModel;

/// An instance together with its proper (most-derived) class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId {
    pub id: String,
    pub class: String,
}

impl InstanceId {
    pub fn new(id: impl Into<String>, class: impl Into<String>) -> Self {
        InstanceId {
            id: id.into(),
            class: class.into(),
        }
    }
}

/// One of the four access patterns a transaction can request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccessRequest {
    /// One method on one instance.
    OneInstance {
        instance: InstanceId,
        method: String,
    },
    /// One method on the deep extent of a class.
    Extent { class: String, method: String },
    /// One method on named instances of the domain rooted at a class.
    DomainSome {
        class: String,
        method: String,
        instances: Vec<InstanceId>,
    },
    /// One method on every instance of the domain rooted at a class.
    DomainAll { class: String, method: String },
}

/// A class lock: mode plus the hierarchical flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassLock {
    pub holder: String,
    pub class: String,
    pub mode: String,
    pub hierarchical: bool,
}

/// An instance lock: a bare mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceLock {
    pub holder: String,
    pub instance: InstanceId,
    pub mode: String,
}

/// Lock shapes a request expands to, before any holder is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    /// (class, mode, hierarchical) triples.
    pub class_locks: Vec<(String, String, bool)>,
    /// (instance, mode) pairs.
    pub instance_locks: Vec<(InstanceId, String)>,
}

impl Footprint {
    /// Number of lock-table operations processing this footprint takes.
    pub fn len(&self) -> usize {
        self.class_locks.len() + self.instance_locks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Expand a request to the locks it must take.
///
/// One instance: an intentional class lock on the proper class plus the
/// instance lock. Extent and whole-domain requests: a hierarchical lock
/// on every class of the domain and nothing at instance level. Some-of-
/// domain: an intentional lock on every class of the domain plus one
/// lock per named instance.
pub fn footprint(model: &ClassModel, req: &AccessRequest) -> Result<Footprint> {
    let applicable = |class: &str, method: &str| -> Result<()> {
        if model.methods(class)?.contains(method) {
            Ok(())
        } else {
            Err(Error::MethodNotApplicable {
                class: class.to_string(),
                method: method.to_string(),
            })
        }
    };

    match req {
        AccessRequest::OneInstance { instance, method } => {
            applicable(&instance.class, method)?;
            Ok(Footprint {
                class_locks: vec![(instance.class.clone(), method.clone(), false)],
                instance_locks: vec![(instance.clone(), method.clone())],
            })
        }
        AccessRequest::Extent { class, method } | AccessRequest::DomainAll { class, method } => {
            let mut class_locks = Vec::new();
            for c in model.domain(class)? {
                applicable(&c, method)?;
                class_locks.push((c, method.clone(), true));
            }
            Ok(Footprint {
                class_locks,
                instance_locks: Vec::new(),
            })
        }
        AccessRequest::DomainSome {
            class,
            method,
            instances,
        } => {
            let domain = model.domain(class)?;
            let mut class_locks = Vec::new();
            for c in &domain {
                applicable(c, method)?;
                class_locks.push((c.clone(), method.clone(), false));
            }
            let mut instance_locks = Vec::new();
            for inst in instances {
                if !domain.contains(&inst.class) {
                    return Err(Error::InstanceOutsideDomain {
                        instance: inst.id.clone(),
                        class: inst.class.clone(),
                        domain: class.clone(),
                    });
                }
                instance_locks.push((inst.clone(), method.clone()));
            }
            Ok(Footprint {
                class_locks,
                instance_locks,
            })
        }
    }
}

/// Conflict between two class locks held by different transactions:
/// at least one must be hierarchical and the modes must not commute.
pub fn class_locks_conflict(tables: &TableSet, a: &ClassLock, b: &ClassLock) -> Result<bool> {
    debug_assert_eq!(a.class, b.class);
    if a.holder == b.holder {
        return Ok(false);
    }
    if !(a.hierarchical || b.hierarchical) {
        return Ok(false);
    }
    Ok(!tables.table(&a.class)?.modes_commute(&a.mode, &b.mode)?)
}

/// Conflict between two instance locks held by different transactions:
/// the modes must not commute at the instance's proper class.
pub fn instance_locks_conflict(
    tables: &TableSet,
    a: &InstanceLock,
    b: &InstanceLock,
) -> Result<bool> {
    debug_assert_eq!(a.instance.id, b.instance.id);
    if a.holder == b.holder {
        return Ok(false);
    }
    Ok(!tables
        .table(&a.instance.class)?
        .modes_commute(&a.mode, &b.mode)?)
}

/// Outcome of an acquire call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Acquire {
    Granted,
    /// The request queued; the set holds the transactions it waits on.
    Blocked(BTreeSet<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TxnStatus {
    Active,
    Committed,
    Aborted,
}

#[derive(Debug, Clone)]
struct TxnState {
    status: TxnStatus,
    /// Ordinal of the transaction's first lock activity; larger is younger.
    started_at: u64,
}

#[derive(Debug, Clone)]
struct PendingRequest {
    txn: String,
    request: AccessRequest,
    footprint: Footprint,
    blockers: BTreeSet<String>,
}

/// One record of the lock-table event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub seq: u64,
    pub txn: String,
    pub action: String,
    pub resource: String,
    pub outcome: String,
}

impl Event {
    /// The JSON-lines wire form.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seq": self.seq,
            "txn": self.txn,
            "action": self.action,
            "resource": self.resource,
            "outcome": self.outcome,
        })
    }
}

/// Counters over lock-table activity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LockStats {
    /// Lock-table operations performed by granted acquires, one per
    /// footprint entry.
    pub operations: u64,
    /// Times a request locked a resource its transaction already held
    /// under a different mode.
    pub upgrade_events: u64,
}

/// How a transaction finishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReleaseOutcome {
    Commit,
    Abort,
}

/// The shared lock table: granted locks, FIFO pending queue, wait-for
/// edges, event log.
#[derive(Debug, Clone, Default)]
pub struct LockTable {
    class_locks: Vec<ClassLock>,
    instance_locks: Vec<InstanceLock>,
    pending: VecDeque<PendingRequest>,
    txns: HashMap<String, TxnState>,
    instance_classes: HashMap<String, String>,
    events: Vec<Event>,
    stats: LockStats,
    seq: u64,
    txn_counter: u64,
}

impl LockTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> LockStats {
        self.stats
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn granted_class_locks(&self) -> &[ClassLock] {
        &self.class_locks
    }

    pub fn granted_instance_locks(&self) -> &[InstanceLock] {
        &self.instance_locks
    }

    /// Transactions a blocked transaction currently waits on.
    pub fn waiting_on(&self, txn: &str) -> BTreeSet<String> {
        self.pending
            .iter()
            .filter(|p| p.txn == txn)
            .flat_map(|p| p.blockers.iter().cloned())
            .collect()
    }

    pub fn is_blocked(&self, txn: &str) -> bool {
        self.pending.iter().any(|p| p.txn == txn)
    }

    fn log(&mut self, txn: &str, action: &str, resource: String, outcome: String) {
        let seq = self.seq;
        self.seq += 1;
        self.events.push(Event {
            seq,
            txn: txn.to_string(),
            action: action.to_string(),
            resource,
            outcome,
        });
    }

    fn ensure_active(&mut self, txn: &str) -> Result<()> {
        if !self.txns.contains_key(txn) {
            let ordinal = self.txn_counter;
            self.txn_counter += 1;
            self.txns.insert(
                txn.to_string(),
                TxnState {
                    status: TxnStatus::Active,
                    started_at: ordinal,
                },
            );
        }
        match self.txns[txn].status {
            TxnStatus::Active => Ok(()),
            TxnStatus::Committed => Err(Error::TransactionFinished {
                txn: txn.to_string(),
                state: "committed".into(),
            }),
            TxnStatus::Aborted => Err(Error::TransactionFinished {
                txn: txn.to_string(),
                state: "aborted".into(),
            }),
        }
    }

    /// Record the proper class of every instance named by a footprint,
    /// rejecting contradictory uses of one instance id.
    fn register_instances(&mut self, fp: &Footprint) -> Result<()> {
        for (inst, _) in &fp.instance_locks {
            match self.instance_classes.get(&inst.id) {
                Some(existing) if existing != &inst.class => {
                    return Err(Error::InconsistentInstanceClass {
                        instance: inst.id.clone(),
                        first: existing.clone(),
                        second: inst.class.clone(),
                    });
                }
                Some(_) => {}
                None => {
                    self.instance_classes
                        .insert(inst.id.clone(), inst.class.clone());
                }
            }
        }
        Ok(())
    }

    /// Transactions whose granted locks conflict with the footprint.
    fn blockers_of(
        &self,
        tables: &TableSet,
        txn: &str,
        fp: &Footprint,
    ) -> Result<(BTreeSet<String>, Option<String>)> {
        let mut blockers = BTreeSet::new();
        let mut first_conflict = None;
        for (class, mode, hierarchical) in &fp.class_locks {
            let want = ClassLock {
                holder: txn.to_string(),
                class: class.clone(),
                mode: mode.clone(),
                hierarchical: *hierarchical,
            };
            for held in self.class_locks.iter().filter(|l| &l.class == class) {
                if class_locks_conflict(tables, held, &want)? {
                    blockers.insert(held.holder.clone());
                    first_conflict.get_or_insert_with(|| format!("class:{class}"));
                }
            }
        }
        for (inst, mode) in &fp.instance_locks {
            let want = InstanceLock {
                holder: txn.to_string(),
                instance: inst.clone(),
                mode: mode.clone(),
            };
            for held in self
                .instance_locks
                .iter()
                .filter(|l| l.instance.id == inst.id)
            {
                if instance_locks_conflict(tables, held, &want)? {
                    blockers.insert(held.holder.clone());
                    first_conflict.get_or_insert_with(|| format!("instance:{}", inst.id));
                }
            }
        }
        Ok((blockers, first_conflict))
    }

    /// Install the footprint's locks for `txn`, skipping exact
    /// duplicates and counting operations and upgrade events.
    fn install(&mut self, txn: &str, fp: &Footprint) {
        for (class, mode, hierarchical) in &fp.class_locks {
            self.stats.operations += 1;
            let lock = ClassLock {
                holder: txn.to_string(),
                class: class.clone(),
                mode: mode.clone(),
                hierarchical: *hierarchical,
            };
            let held_other = self
                .class_locks
                .iter()
                .any(|l| l.holder == txn && &l.class == class && *l != lock);
            let held_same = self
                .class_locks
                .iter()
                .any(|l| l.holder == txn && &l.class == class && *l == lock);
            if !held_same {
                if held_other {
                    self.stats.upgrade_events += 1;
                }
                self.class_locks.push(lock);
            }
            self.log(
                txn,
                "lock",
                format!("class:{class}"),
                format!(
                    "granted {mode}{}",
                    if *hierarchical {
                        " hierarchical"
                    } else {
                        " intentional"
                    }
                ),
            );
        }
        for (inst, mode) in &fp.instance_locks {
            self.stats.operations += 1;
            let lock = InstanceLock {
                holder: txn.to_string(),
                instance: inst.clone(),
                mode: mode.clone(),
            };
            let held_other = self
                .instance_locks
                .iter()
                .any(|l| l.holder == txn && l.instance.id == inst.id && *l != lock);
            let held_same = self
                .instance_locks
                .iter()
                .any(|l| l.holder == txn && l.instance.id == inst.id && *l == lock);
            if !held_same {
                if held_other {
                    self.stats.upgrade_events += 1;
                }
                self.instance_locks.push(lock);
            }
            self.log(
                txn,
                "lock",
                format!("instance:{}", inst.id),
                format!("granted {mode}"),
            );
        }
    }

    /// Acquire all locks of a request atomically, or queue it.
    ///
    /// The request is granted when no footprint lock conflicts with a
    /// lock held by another transaction; re-acquisition of held locks
    /// always succeeds and a transaction never waits on itself.
    pub fn acquire(
        &mut self,
        model: &ClassModel,
        tables: &TableSet,
        txn: &str,
        request: &AccessRequest,
    ) -> Result<Acquire> {
        self.ensure_active(txn)?;
        let fp = footprint(model, request)?;
        self.register_instances(&fp)?;
        let (blockers, conflict_at) = self.blockers_of(tables, txn, &fp)?;
        if blockers.is_empty() {
            self.install(txn, &fp);
            Ok(Acquire::Granted)
        } else {
            self.log(
                txn,
                "wait",
                conflict_at.expect("blocked requests have a conflicting resource"),
                format!(
                    "blocked by {}",
                    blockers.iter().cloned().collect::<Vec<_>>().join(", ")
                ),
            );
            self.pending.push_back(PendingRequest {
                txn: txn.to_string(),
                request: request.clone(),
                footprint: fp,
                blockers: blockers.clone(),
            });
            Ok(Acquire::Blocked(blockers))
        }
    }

    /// Release every lock of `txn` and grant whatever newly fits.
    ///
    /// The pending queue is re-scanned in FIFO order once; each request
    /// that no longer conflicts is granted on the spot, and the blocker
    /// sets of those still waiting are refreshed.
    pub fn release_all(
        &mut self,
        tables: &TableSet,
        txn: &str,
        outcome: ReleaseOutcome,
    ) -> Result<Vec<(String, AccessRequest)>> {
        let state = self
            .txns
            .get_mut(txn)
            .ok_or_else(|| Error::UnknownTransaction(txn.to_string()))?;
        if state.status != TxnStatus::Active {
            return Err(Error::TransactionFinished {
                txn: txn.to_string(),
                state: match state.status {
                    TxnStatus::Committed => "committed".into(),
                    _ => "aborted".into(),
                },
            });
        }
        state.status = match outcome {
            ReleaseOutcome::Commit => TxnStatus::Committed,
            ReleaseOutcome::Abort => TxnStatus::Aborted,
        };

        self.class_locks.retain(|l| l.holder != txn);
        self.instance_locks.retain(|l| l.holder != txn);
        // A finished transaction abandons any queued request.
        self.pending.retain(|p| p.txn != txn);
        self.log(
            txn,
            match outcome {
                ReleaseOutcome::Commit => "commit",
                ReleaseOutcome::Abort => "abort",
            },
            "all".into(),
            "released".into(),
        );

        let mut granted = Vec::new();
        let mut still_pending = VecDeque::new();
        let queue = std::mem::take(&mut self.pending);
        for mut p in queue {
            let (blockers, _) = self.blockers_of(tables, &p.txn, &p.footprint)?;
            if blockers.is_empty() {
                self.install(&p.txn, &p.footprint);
                granted.push((p.txn.clone(), p.request.clone()));
            } else {
                p.blockers = blockers;
                still_pending.push_back(p);
            }
        }
        self.pending = still_pending;
        Ok(granted)
    }

    /// Find a cycle in the wait-for graph, if any.
    ///
    /// The returned cycle lists each transaction once, rotated so the
    /// smallest name leads.
    pub fn detect_deadlock(&self) -> Option<Vec<String>> {
        let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for p in &self.pending {
            edges
                .entry(p.txn.as_str())
                .or_default()
                .extend(p.blockers.iter().map(String::as_str));
        }

        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
        let succs = |n: &str| -> Vec<&str> {
            edges
                .get(n)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default()
        };
        for &start in edges.keys() {
            if marks.contains_key(start) {
                continue;
            }
            let mut path: Vec<(&str, Vec<&str>)> = vec![(start, succs(start))];
            marks.insert(start, Mark::Open);
            while let Some((cur, rest)) = path.last_mut() {
                let cur = *cur;
                if let Some(next) = rest.pop() {
                    match marks.get(next).copied() {
                        Some(Mark::Open) => {
                            let mut cycle: Vec<String> = path
                                .iter()
                                .map(|(n, _)| n.to_string())
                                .skip_while(|n| n != next)
                                .collect();
                            let lead = cycle
                                .iter()
                                .enumerate()
                                .min_by_key(|&(_, n)| n.clone())
                                .map(|(i, _)| i)
                                .unwrap_or(0);
                            cycle.rotate_left(lead);
                            return Some(cycle);
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(next, Mark::Open);
                            let s = succs(next);
                            path.push((next, s));
                        }
                    }
                } else {
                    marks.insert(cur, Mark::Done);
                    path.pop();
                }
            }
        }
        None
    }

    /// The youngest transaction of a set: the one that started last.
    pub fn youngest_of<'a>(&self, txns: impl IntoIterator<Item = &'a str>) -> Option<String> {
        txns.into_iter()
            .max_by_key(|t| self.txns.get(*t).map(|s| s.started_at).unwrap_or(0))
            .map(str::to_string)
    }
}
