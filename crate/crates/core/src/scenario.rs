//! Scenario files and their evaluation: pairwise transaction conflicts,
//! maximal compatible sets, and a deterministic replay through the lock
//! manager.

use std::collections::{BTreeMap, BTreeSet};

use crate::commutativity::TableSet;
use crate::error::{Error, Pos, Result};
use crate::lex::{tokenize, Cursor, TokenKind};
use crate::lockmgr::{
    class_locks_conflict, footprint, instance_locks_conflict, AccessRequest, Acquire, ClassLock,
    Event, InstanceId, InstanceLock, LockTable, ReleaseOutcome,
};
use crate::schema::ClassModel;

/// Hard cap on transactions per scenario; maximal-set enumeration is
/// exponential in their number.
pub const MAX_TRANSACTIONS: usize = 16;

/// How a transaction ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Commit,
    Abort,
}

/// One declared transaction: ordered requests plus a terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxnDecl {
    pub name: String,
    pub requests: Vec<AccessRequest>,
    pub terminal: Terminal,
}

/// A parsed scenario: instance declarations and transactions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub instances: Vec<InstanceId>,
    pub transactions: Vec<TxnDecl>,
}

/// Parse a scenario against a validated schema.
pub fn parse_scenario(model: &ClassModel, text: &str) -> Result<Scenario> {
    let mut cur = Cursor::new(tokenize(text)?);
    let mut instances: Vec<InstanceId> = Vec::new();
    let mut by_id: BTreeMap<String, String> = BTreeMap::new();

    while cur.eat_keyword("instance") {
        let (id, _) = cur.expect_ident("instance name")?;
        let id = id.to_string();
        cur.expect_keyword("of")?;
        let (class, class_pos) = cur.expect_ident("class name")?;
        let class = class.to_string();
        cur.expect(TokenKind::Semi, "`;`")?;
        require_class(model, &class, class_pos)?;
        match by_id.get(&id) {
            // Repeating an identical declaration is harmless.
            Some(first) if first == &class => {}
            Some(first) => {
                return Err(Error::InconsistentInstanceClass {
                    instance: id,
                    first: first.clone(),
                    second: class,
                });
            }
            None => {
                by_id.insert(id.clone(), class.clone());
                instances.push(InstanceId::new(id, class));
            }
        }
    }

    let mut transactions: Vec<TxnDecl> = Vec::new();
    while cur.eat_keyword("txn") {
        let (name, txn_pos) = cur.expect_ident("transaction name")?;
        let name = name.to_string();
        cur.expect(TokenKind::LBrace, "`{`")?;
        let mut requests = Vec::new();
        let mut terminal: Option<Terminal> = None;
        loop {
            if cur.eat(TokenKind::RBrace) {
                break;
            }
            let (word, pos) = cur.expect_ident("action")?;
            if terminal.is_some() {
                return Err(Error::ActionAfterTerminal {
                    pos,
                    txn: name.clone(),
                });
            }
            match word {
                "commit" => {
                    cur.expect(TokenKind::Semi, "`;`")?;
                    terminal = Some(Terminal::Commit);
                }
                "abort" => {
                    cur.expect(TokenKind::Semi, "`;`")?;
                    terminal = Some(Terminal::Abort);
                }
                "one" => {
                    let (method, _) = cur.expect_ident("method name")?;
                    let method = method.to_string();
                    cur.expect_keyword("on")?;
                    let (inst, ipos) = cur.expect_ident("instance name")?;
                    cur.expect(TokenKind::Semi, "`;`")?;
                    let class = lookup_instance(&by_id, inst, ipos)?;
                    requests.push(AccessRequest::OneInstance {
                        instance: InstanceId::new(inst, class),
                        method,
                    });
                }
                "extent" => {
                    let (method, _) = cur.expect_ident("method name")?;
                    let method = method.to_string();
                    cur.expect_keyword("on")?;
                    let (class, cpos) = cur.expect_ident("class name")?;
                    let class = class.to_string();
                    cur.expect(TokenKind::Semi, "`;`")?;
                    require_class(model, &class, cpos)?;
                    requests.push(AccessRequest::Extent { class, method });
                }
                "some" => {
                    let (method, _) = cur.expect_ident("method name")?;
                    let method = method.to_string();
                    cur.expect_keyword("on")?;
                    cur.expect_keyword("domain")?;
                    let (class, cpos) = cur.expect_ident("class name")?;
                    let class = class.to_string();
                    cur.expect_keyword("using")?;
                    let mut insts = Vec::new();
                    loop {
                        let (inst, ipos) = cur.expect_ident("instance name")?;
                        let iclass = lookup_instance(&by_id, inst, ipos)?;
                        insts.push(InstanceId::new(inst, iclass));
                        if !cur.eat(TokenKind::Comma) {
                            break;
                        }
                    }
                    cur.expect(TokenKind::Semi, "`;`")?;
                    require_class(model, &class, cpos)?;
                    requests.push(AccessRequest::DomainSome {
                        class,
                        method,
                        instances: insts,
                    });
                }
                "all" => {
                    let (method, _) = cur.expect_ident("method name")?;
                    let method = method.to_string();
                    cur.expect_keyword("on")?;
                    cur.expect_keyword("domain")?;
                    let (class, cpos) = cur.expect_ident("class name")?;
                    let class = class.to_string();
                    cur.expect(TokenKind::Semi, "`;`")?;
                    require_class(model, &class, cpos)?;
                    requests.push(AccessRequest::DomainAll { class, method });
                }
                other => {
                    return Err(Error::Syntax {
                        pos,
                        msg: format!("unknown action `{other}`"),
                    });
                }
            }
        }
        let terminal = terminal.ok_or(Error::MissingTerminal {
            pos: txn_pos,
            txn: name.clone(),
        })?;
        transactions.push(TxnDecl {
            name,
            requests,
            terminal,
        });
    }

    if !cur.at_eof() {
        let t = cur.next();
        return Err(Error::Syntax {
            pos: t.pos,
            msg: format!(
                "expected `instance`, `txn`, or end of file, found {}",
                t.describe()
            ),
        });
    }
    if transactions.len() > MAX_TRANSACTIONS {
        return Err(Error::TooManyTransactions {
            got: transactions.len(),
            max: MAX_TRANSACTIONS,
        });
    }

    let scenario = Scenario {
        instances,
        transactions,
    };
    // Every request must expand to a valid footprint.
    for txn in &scenario.transactions {
        for req in &txn.requests {
            footprint(model, req)?;
        }
    }
    Ok(scenario)
}

fn lookup_instance(by_id: &BTreeMap<String, String>, id: &str, pos: Pos) -> Result<String> {
    by_id
        .get(id)
        .cloned()
        .ok_or_else(|| Error::UndeclaredInstance {
            pos,
            instance: id.to_string(),
        })
}

fn require_class(model: &ClassModel, class: &str, pos: Pos) -> Result<()> {
    if model.contains_class(class) {
        Ok(())
    } else {
        Err(Error::Syntax {
            pos,
            msg: format!("unknown class `{class}`"),
        })
    }
}

/// Why two transactions conflict: the first resource and mode pair that
/// fails the commutativity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictCause {
    /// `class:NAME` or `instance:NAME`.
    pub resource: String,
    pub mode_a: String,
    pub mode_b: String,
}

/// One replay step of the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStep {
    Granted {
        txn: String,
        request: usize,
    },
    Blocked {
        txn: String,
        request: usize,
        on: BTreeSet<String>,
    },
    Resumed {
        txn: String,
        request: usize,
    },
    Committed {
        txn: String,
    },
    Aborted {
        txn: String,
        deadlock: bool,
    },
}

/// Everything `run_scenario` reports.
#[derive(Debug, Clone)]
pub struct ConcurrencyReport {
    pub transactions: Vec<String>,
    /// Symmetric matrix; `conflicts[i][j]` holds the cause when
    /// transactions i and j cannot run concurrently.
    pub conflicts: Vec<Vec<Option<ConflictCause>>>,
    /// Maximal mutually-compatible transaction sets, lexicographic.
    pub maximal_sets: Vec<Vec<String>>,
    pub trace: Vec<TraceStep>,
    /// Lock-table event log of the replay.
    pub events: Vec<Event>,
}

impl ConcurrencyReport {
    pub fn conflict_between(&self, a: &str, b: &str) -> Option<&ConflictCause> {
        let ia = self.transactions.iter().position(|t| t == a)?;
        let ib = self.transactions.iter().position(|t| t == b)?;
        self.conflicts[ia][ib].as_ref()
    }
}

/// All locks a transaction would ever hold, across its requests.
fn whole_footprint(
    model: &ClassModel,
    txn: &TxnDecl,
) -> Result<(Vec<ClassLock>, Vec<InstanceLock>)> {
    let mut class_locks = Vec::new();
    let mut instance_locks = Vec::new();
    for req in &txn.requests {
        let fp = footprint(model, req)?;
        for (class, mode, hierarchical) in fp.class_locks {
            class_locks.push(ClassLock {
                holder: txn.name.clone(),
                class,
                mode,
                hierarchical,
            });
        }
        for (inst, mode) in fp.instance_locks {
            instance_locks.push(InstanceLock {
                holder: txn.name.clone(),
                instance: inst,
                mode,
            });
        }
    }
    Ok((class_locks, instance_locks))
}

/// First conflicting resource between two transactions' footprints.
fn pair_conflict(
    model: &ClassModel,
    tables: &TableSet,
    a: &TxnDecl,
    b: &TxnDecl,
) -> Result<Option<ConflictCause>> {
    let (a_classes, a_insts) = whole_footprint(model, a)?;
    let (b_classes, b_insts) = whole_footprint(model, b)?;
    for la in &a_classes {
        for lb in b_classes.iter().filter(|l| l.class == la.class) {
            if class_locks_conflict(tables, la, lb)? {
                return Ok(Some(ConflictCause {
                    resource: format!("class:{}", la.class),
                    mode_a: la.mode.clone(),
                    mode_b: lb.mode.clone(),
                }));
            }
        }
    }
    for la in &a_insts {
        for lb in b_insts.iter().filter(|l| l.instance.id == la.instance.id) {
            if instance_locks_conflict(tables, la, lb)? {
                return Ok(Some(ConflictCause {
                    resource: format!("instance:{}", la.instance.id),
                    mode_a: la.mode.clone(),
                    mode_b: lb.mode.clone(),
                }));
            }
        }
    }
    Ok(None)
}

/// Maximal cliques of the compatibility graph by subset enumeration;
/// scenario sizes are capped, so exhaustive search is fine.
fn maximal_compatible_sets(names: &[String], compatible: &[Vec<bool>]) -> Vec<Vec<String>> {
    let n = names.len();
    if n == 0 {
        return Vec::new();
    }
    let mut cliques: Vec<u32> = Vec::new();
    for set in 1u32..(1u32 << n) {
        let members: Vec<usize> = (0..n).filter(|i| set & (1 << i) != 0).collect();
        let ok = members
            .iter()
            .enumerate()
            .all(|(k, &i)| members[k + 1..].iter().all(|&j| compatible[i][j]));
        if ok {
            cliques.push(set);
        }
    }
    let mut maximal: Vec<Vec<String>> = cliques
        .iter()
        .filter(|&&s| !cliques.iter().any(|&t| t != s && t & s == s))
        .map(|&s| {
            (0..n)
                .filter(|i| s & (1 << i) != 0)
                .map(|i| names[i].clone())
                .collect()
        })
        .collect();
    maximal.sort();
    maximal
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunState {
    Ready,
    Waiting,
    Done,
}

/// Evaluate a scenario: pairwise conflicts from footprint overlap,
/// maximal compatible sets by enumeration, and a trace from a
/// deterministic round-robin replay through the lock manager.
pub fn run_scenario(
    model: &ClassModel,
    tables: &TableSet,
    scenario: &Scenario,
) -> Result<ConcurrencyReport> {
    let names: Vec<String> = scenario
        .transactions
        .iter()
        .map(|t| t.name.clone())
        .collect();
    let n = names.len();

    let mut conflicts: Vec<Vec<Option<ConflictCause>>> = vec![vec![None; n]; n];
    // Symmetric fill; both (i, j) and (j, i) are written.
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in i + 1..n {
            let cause = pair_conflict(
                model,
                tables,
                &scenario.transactions[i],
                &scenario.transactions[j],
            )?;
            if let Some(c) = cause {
                conflicts[j][i] = Some(ConflictCause {
                    resource: c.resource.clone(),
                    mode_a: c.mode_b.clone(),
                    mode_b: c.mode_a.clone(),
                });
                conflicts[i][j] = Some(c);
            }
        }
    }

    let compatible: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| conflicts[i][j].is_none()).collect())
        .collect();
    let maximal_sets = maximal_compatible_sets(&names, &compatible);

    let (trace, events) = replay(model, tables, scenario)?;

    Ok(ConcurrencyReport {
        transactions: names,
        conflicts,
        maximal_sets,
        trace,
        events,
    })
}

/// Round-robin replay: each active transaction issues its next request
/// in declaration order; blocked ones stall until granted or aborted by
/// deadlock resolution (the youngest transaction on a wait-for cycle
/// aborts).
fn replay(
    model: &ClassModel,
    tables: &TableSet,
    scenario: &Scenario,
) -> Result<(Vec<TraceStep>, Vec<Event>)> {
    let mut lt = LockTable::new();
    let mut trace = Vec::new();
    let txns = &scenario.transactions;
    let mut next_req: Vec<usize> = vec![0; txns.len()];
    let mut state: Vec<RunState> = vec![RunState::Ready; txns.len()];

    let index_of = |name: &str| -> usize {
        txns.iter()
            .position(|t| t.name == name)
            .expect("replay only sees scenario transactions")
    };

    loop {
        let mut progressed = false;
        for idx in 0..txns.len() {
            if state[idx] != RunState::Ready {
                continue;
            }
            progressed = true;
            let txn = &txns[idx];
            if next_req[idx] < txn.requests.len() {
                let req = &txn.requests[next_req[idx]];
                match lt.acquire(model, tables, &txn.name, req)? {
                    Acquire::Granted => {
                        trace.push(TraceStep::Granted {
                            txn: txn.name.clone(),
                            request: next_req[idx],
                        });
                        next_req[idx] += 1;
                    }
                    Acquire::Blocked(on) => {
                        trace.push(TraceStep::Blocked {
                            txn: txn.name.clone(),
                            request: next_req[idx],
                            on,
                        });
                        state[idx] = RunState::Waiting;
                        if let Some(cycle) = lt.detect_deadlock() {
                            let victim = lt
                                .youngest_of(cycle.iter().map(String::as_str))
                                .expect("cycle is non-empty");
                            let vidx = index_of(&victim);
                            let granted = lt.release_all(tables, &victim, ReleaseOutcome::Abort)?;
                            trace.push(TraceStep::Aborted {
                                txn: victim,
                                deadlock: true,
                            });
                            state[vidx] = RunState::Done;
                            for (name, _) in &granted {
                                let g = index_of(name);
                                trace.push(TraceStep::Resumed {
                                    txn: name.clone(),
                                    request: next_req[g],
                                });
                                next_req[g] += 1;
                                state[g] = RunState::Ready;
                            }
                        }
                    }
                }
            } else {
                let outcome = match txn.terminal {
                    Terminal::Commit => ReleaseOutcome::Commit,
                    Terminal::Abort => ReleaseOutcome::Abort,
                };
                let granted = lt.release_all(tables, &txn.name, outcome)?;
                trace.push(match txn.terminal {
                    Terminal::Commit => TraceStep::Committed {
                        txn: txn.name.clone(),
                    },
                    Terminal::Abort => TraceStep::Aborted {
                        txn: txn.name.clone(),
                        deadlock: false,
                    },
                });
                state[idx] = RunState::Done;
                for (name, _) in &granted {
                    let g = index_of(name);
                    trace.push(TraceStep::Resumed {
                        txn: name.clone(),
                        request: next_req[g],
                    });
                    next_req[g] += 1;
                    state[g] = RunState::Ready;
                }
            }
        }
        if !progressed {
            break;
        }
    }

    debug_assert!(
        state.iter().all(|s| *s == RunState::Done),
        "replay finished with stalled transactions"
    );
    Ok((trace, lt.events().to_vec()))
}
