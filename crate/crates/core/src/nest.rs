//! Children, favorite children and nests of critical puzzle pieces.
//!
//! Everything here is symbolic. A critical piece is addressed by its depth
//! `n` (it is `Y^n`), and `f^t(0) in Y^m` is decided by arc membership of
//! the angle `d^(t-1) theta_c`.

use std::fmt;

use crate::combinatorics::{Label, SymbolicPuzzle};
use crate::error::{Error, Result};

/// Default iterate budget for orbit scans.
pub const DEFAULT_ORBIT_BUDGET: usize = 100_000;
/// Default depth budget for nests.
pub const DEFAULT_DEPTH_BUDGET: usize = 200;

/// A return of the critical orbit to a critical piece.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReturnEvent {
    pub time: usize,
    pub from_label: Label,
    pub to_label: Label,
    /// The return lands in the first child of `to_label`.
    pub is_central: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ChildKind {
    pub first: bool,
    pub good: bool,
    pub spoiled: bool,
    pub favorite: bool,
}

impl ChildKind {
    pub fn name(&self) -> &'static str {
        match (self.favorite, self.spoiled, self.first, self.good) {
            (true, ..) => "favorite",
            (_, true, ..) => "spoiled",
            (_, _, true, _) => "first",
            (_, _, _, true) => "good",
            _ => "plain",
        }
    }

    /// Favorite implies good, unspoiled and not first; spoiled means a good
    /// first child.
    pub fn is_consistent(&self) -> bool {
        (!self.favorite || (self.good && !self.spoiled && !self.first))
            && (self.spoiled == (self.first && self.good))
    }
}

impl fmt::Display for ChildKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `f^map_time` maps `child` onto `parent` as a degree-`d` branched cover.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChildRecord {
    pub child: Label,
    pub parent: Label,
    pub map_time: usize,
    pub kind: ChildKind,
}

/// One level of the favorite nest: `Q^i`, its first child `P^i`, and how
/// `Q^{i+1}` was reached.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestEntry {
    pub q_label: Label,
    pub p_label: Label,
    /// First return time of `0` to `Q^i`.
    pub first_return: usize,
    /// `k` and `l` of the favorite-child construction, when `Q^{i+1}` exists.
    pub k: Option<usize>,
    pub l: Option<usize>,
    /// Map time of `Q^{i+1}` onto `Q^i`.
    pub favorite_time: Option<usize>,
}

impl NestEntry {
    pub fn q_depth(&self) -> usize {
        self.q_label.depth
    }

    pub fn p_depth(&self) -> usize {
        self.p_label.depth
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NestStop {
    Complete,
    NotRecurrent { depth: usize },
    NeverEscapes { depth: usize },
    BudgetExhausted { operation: String, budget: usize },
    DepthBudget { depth: usize },
    Undefined { depth: usize },
}

impl NestStop {
    fn from_error(e: Error) -> Result<Self> {
        Ok(match e {
            Error::NotRecurrent { depth } => NestStop::NotRecurrent { depth },
            Error::NeverEscapes { depth } => NestStop::NeverEscapes { depth },
            Error::BudgetExhausted { operation, budget } => NestStop::BudgetExhausted { operation, budget },
            Error::CombinatoricsUndefined { depth } => NestStop::Undefined { depth },
            other => return Err(other),
        })
    }

    pub fn describe(&self) -> String {
        match self {
            NestStop::Complete => "complete".into(),
            NestStop::NotRecurrent { depth } => format!("critical orbit never returns to Y^{depth}"),
            NestStop::NeverEscapes { depth } => {
                format!("central cascade never escapes the piece of depth {depth}; possibly renormalizable, inconclusive")
            }
            NestStop::BudgetExhausted { operation, budget } => format!("{operation} exceeded budget {budget}"),
            NestStop::DepthBudget { depth } => format!("depth budget reached at depth {depth}"),
            NestStop::Undefined { depth } => format!("combinatorics undefined from depth {depth}"),
        }
    }
}

/// The favorite nest `Q^0 ⊃ P^0 ⊃ Q^1 ⊃ ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestRecord {
    pub seed_l: usize,
    pub seed_q: usize,
    pub entries: Vec<NestEntry>,
    pub stop: NestStop,
}

impl NestRecord {
    /// Strict nesting, first-child and favorite-child checks on every entry.
    pub fn check_invariants(&self, puzzle: &SymbolicPuzzle, budget: usize) -> Result<Vec<String>> {
        let mut failures = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.q_label.contains_label(&e.p_label) && e.p_depth() > e.q_depth()) {
                failures.push(format!("P^{i} not strictly inside Q^{i}"));
            }
            let fc = first_child(puzzle, &e.q_label, budget)?;
            if fc.child != e.p_label {
                failures.push(format!("P^{i} is not the first child of Q^{i}"));
            }
            if let Some(next) = self.entries.get(i + 1) {
                if !(e.p_label.contains_label(&next.q_label) && next.q_depth() > e.p_depth()) {
                    failures.push(format!("Q^{} not strictly inside P^{i}", i + 1));
                }
                let rec = ChildRecord {
                    child: next.q_label.clone(),
                    parent: e.q_label.clone(),
                    map_time: next.q_depth() - e.q_depth(),
                    kind: ChildKind::default(),
                };
                let kind = classify_child(puzzle, &rec, budget)?;
                if !(kind.good && !kind.spoiled && !kind.first && kind.is_consistent()) {
                    failures.push(format!("Q^{} is {kind}, not a good unspoiled later child", i + 1));
                }
            }
        }
        Ok(failures)
    }
}

fn require_critical(puzzle: &SymbolicPuzzle, y: &Label) -> Result<()> {
    if puzzle.critical_label(y.depth)? != *y {
        return Err(Error::InvalidInput(format!("{y} is not a critical piece")));
    }
    Ok(())
}

/// Proves absence of returns when the orbit has cycled. The angle orbit is
/// eventually periodic, so times beyond `preperiod + period` add nothing.
fn orbit_horizon(puzzle: &SymbolicPuzzle) -> usize {
    let (pre, per) = puzzle.orbit_type();
    pre + per + 1
}

fn first_visit_after(puzzle: &SymbolicPuzzle, y: &Label, after: usize, budget: usize) -> Result<Option<usize>> {
    let horizon = after + orbit_horizon(puzzle);
    let end = horizon.min(after + budget);
    for t in after + 1..=end {
        if puzzle.orbit_in(t, y)? {
            return Ok(Some(t));
        }
    }
    if end < horizon {
        return Err(Error::budget("orbit scan", budget));
    }
    Ok(None)
}

/// Least `t >= 1` with `f^t(0) in Y`.
pub fn first_return_time(puzzle: &SymbolicPuzzle, y: &Label, budget: usize) -> Result<usize> {
    require_critical(puzzle, y)?;
    first_visit_after(puzzle, y, 0, budget)?.ok_or(Error::NotRecurrent { depth: y.depth })
}

/// The central component of the first return map to `V`.
pub fn first_child(puzzle: &SymbolicPuzzle, v: &Label, budget: usize) -> Result<ChildRecord> {
    let t = first_return_time(puzzle, v, budget)?;
    let child = puzzle.critical_label(v.depth + t)?;
    let u = child.clone();
    let good = puzzle.orbit_in(t, &u)?;
    Ok(ChildRecord {
        child,
        parent: v.clone(),
        map_time: t,
        kind: ChildKind {
            first: true,
            good,
            spoiled: good,
            favorite: false,
        },
    })
}

/// Good, spoiled and first flags for a child record. The favorite flag is
/// set when the child equals `favorite_child(parent)`.
pub fn classify_child(puzzle: &SymbolicPuzzle, rec: &ChildRecord, budget: usize) -> Result<ChildKind> {
    let fc = first_child(puzzle, &rec.parent, budget)?;
    let first = rec.child == fc.child;
    let good = puzzle.orbit_in(rec.map_time, &fc.child)?;
    let spoiled = first && good;
    let favorite = !first
        && good
        && match favorite_child(puzzle, &rec.parent, budget) {
            Ok(fav) => fav.child == rec.child,
            Err(e) if e.is_inconclusive() => false,
            Err(e) => return Err(e),
        };
    Ok(ChildKind {
        first,
        good,
        spoiled,
        favorite,
    })
}

/// Children of `V` with map time at most `max_time`, oldest first.
pub fn children(puzzle: &SymbolicPuzzle, v: &Label, max_time: usize) -> Result<Vec<ChildRecord>> {
    oldest_children(puzzle, v, max_time, usize::MAX)
}

/// At most `count` oldest children of `V` with map time at most `max_time`.
pub fn oldest_children(puzzle: &SymbolicPuzzle, v: &Label, max_time: usize, count: usize) -> Result<Vec<ChildRecord>> {
    require_critical(puzzle, v)?;
    let n = v.depth;
    let mut out = Vec::new();
    let mut fc: Option<Label> = None;
    for t in 1..=max_time {
        if out.len() >= count {
            break;
        }
        if !puzzle.is_child_time(n, t)? {
            continue;
        }
        let child = puzzle.critical_label(n + t)?;
        let first = fc.is_none();
        if first {
            fc = Some(child.clone());
        }
        let good = puzzle.orbit_in(t, fc.as_ref().unwrap())?;
        out.push(ChildRecord {
            child,
            parent: v.clone(),
            map_time: t,
            kind: ChildKind {
                first,
                good,
                spoiled: first && good,
                favorite: false,
            },
        });
    }
    Ok(out)
}

/// Return times of the critical orbit to `Q` (the iterates `R_Q^j(0)`),
/// together with the `k`, `l` of the favorite-child construction.
fn favorite_times(puzzle: &SymbolicPuzzle, q: &Label, p: &Label, budget: usize) -> Result<(usize, usize, usize)> {
    // After two full horizons the visit pattern repeats, so absence is proven.
    let horizon = 2 * orbit_horizon(puzzle);
    let limit = horizon.min(budget);
    let mut visits = 0usize;
    let mut k = None;
    for s in 1..=limit {
        if !puzzle.orbit_in(s, q)? {
            continue;
        }
        visits += 1;
        let in_p = puzzle.orbit_in(s, p)?;
        match k {
            None if !in_p => k = Some(visits),
            Some(kk) if in_p => return Ok((kk, visits - kk, s)),
            _ => {}
        }
    }
    Err(match (k, limit < horizon) {
        (None, _) => Error::NeverEscapes { depth: p.depth },
        (Some(_), true) => Error::budget("favorite child orbit scan", budget),
        (Some(_), false) => Error::NotRecurrent { depth: p.depth },
    })
}

/// The oldest good unspoiled child, built from the first escape from the
/// first child `P` and the next return to `P`. Cross-checked against an
/// explicit scan of the children.
pub fn favorite_child(puzzle: &SymbolicPuzzle, q: &Label, budget: usize) -> Result<ChildRecord> {
    let (rec, _, _) = favorite_child_with_moments(puzzle, q, budget)?;
    Ok(rec)
}

fn favorite_child_with_moments(
    puzzle: &SymbolicPuzzle,
    q: &Label,
    budget: usize,
) -> Result<(ChildRecord, usize, usize)> {
    let fc = first_child(puzzle, q, budget)?;
    let (k, l, s) = favorite_times(puzzle, q, &fc.child, budget)?;
    let child = puzzle.critical_label(q.depth + s)?;
    if !puzzle.is_child_time(q.depth, s)? {
        return Err(Error::InvalidInput(format!(
            "favorite construction produced a non-child at time {s}"
        )));
    }
    // Oldest good non-first child by direct scan.
    let mut oldest = None;
    for t in fc.map_time + 1..=s {
        if puzzle.is_child_time(q.depth, t)? && puzzle.orbit_in(t, &fc.child)? {
            oldest = Some(t);
            break;
        }
    }
    if oldest != Some(s) {
        return Err(Error::InvalidInput(format!(
            "favorite child at time {s} disagrees with oldest good child scan {oldest:?}"
        )));
    }
    Ok((
        ChildRecord {
            child,
            parent: q.clone(),
            map_time: s,
            kind: ChildKind {
                first: false,
                good: true,
                spoiled: false,
                favorite: true,
            },
        },
        k,
        l,
    ))
}

/// Whether the first return to `V` is central.
pub fn return_event(puzzle: &SymbolicPuzzle, v: &Label, budget: usize) -> Result<ReturnEvent> {
    let fc = first_child(puzzle, v, budget)?;
    Ok(ReturnEvent {
        time: fc.map_time,
        from_label: fc.child.clone(),
        to_label: v.clone(),
        is_central: fc.kind.good,
    })
}

/// `(V^i, W^i)` pairs of the modified principal nest starting at `V^0`,
/// for at most `levels` levels or until a budget stops it.
pub fn modified_principal_nest(
    puzzle: &SymbolicPuzzle,
    v0: &Label,
    levels: usize,
    budget: usize,
) -> Result<(Vec<(Label, Label)>, NestStop)> {
    require_critical(puzzle, v0)?;
    let mut out = Vec::new();
    let mut v = v0.clone();
    for _ in 0..levels {
        let w = match first_child(puzzle, &v, budget) {
            Ok(r) => r.child,
            Err(e) => return Ok((out, NestStop::from_error(e)?)),
        };
        out.push((v.clone(), w.clone()));
        let scan = budget.min(DEFAULT_DEPTH_BUDGET * 4);
        let kids = match oldest_children(puzzle, &w, scan, 2) {
            Ok(k) => k,
            Err(e) => return Ok((out, NestStop::from_error(e)?)),
        };
        let next = match kids.first() {
            Some(first) if !first.kind.spoiled => Some(first.child.clone()),
            Some(_) => kids.get(1).map(|r| r.child.clone()),
            None => None,
        };
        match next {
            Some(n) => v = n,
            None => {
                return Ok((
                    out,
                    NestStop::BudgetExhausted {
                        operation: "children scan".into(),
                        budget: scan,
                    },
                ))
            }
        }
        if v.depth > DEFAULT_DEPTH_BUDGET {
            return Ok((out, NestStop::DepthBudget { depth: v.depth }));
        }
    }
    Ok((out, NestStop::Complete))
}

/// Least `l >= 1` with `f^{lq}(0)` outside `Y^1`.
pub fn seed_l(puzzle: &SymbolicPuzzle, budget: usize) -> Result<usize> {
    let q = puzzle.portrait().q();
    let y1 = puzzle.critical_label(1)?;
    let horizon = orbit_horizon(puzzle);
    for l in 1.. {
        if l * q > budget {
            return Err(Error::budget("seed scan", budget));
        }
        if !puzzle.orbit_in(l * q, &y1)? {
            return Ok(l);
        }
        if l * q > horizon + q {
            return Err(Error::NeverEscapes { depth: 1 });
        }
    }
    unreachable!()
}

/// Favorite nest with at most `m` entries, seeded at `Q^0 = Y^{lq}`.
pub fn favorite_nest(puzzle: &SymbolicPuzzle, m: usize, budget: usize, depth_budget: usize) -> Result<NestRecord> {
    let q = puzzle.portrait().q();
    let l = seed_l(puzzle, budget)?;
    let mut record = NestRecord {
        seed_l: l,
        seed_q: q,
        entries: Vec::new(),
        stop: NestStop::Complete,
    };
    let mut qlab = match puzzle.critical_label(l * q) {
        Ok(x) => x,
        Err(e) => {
            record.stop = NestStop::from_error(e)?;
            return Ok(record);
        }
    };
    while record.entries.len() < m {
        if qlab.depth > depth_budget {
            record.stop = NestStop::DepthBudget { depth: qlab.depth };
            break;
        }
        let fc = match first_child(puzzle, &qlab, budget) {
            Ok(r) => r,
            Err(e) => {
                record.stop = NestStop::from_error(e)?;
                break;
            }
        };
        let mut entry = NestEntry {
            q_label: qlab.clone(),
            p_label: fc.child.clone(),
            first_return: fc.map_time,
            k: None,
            l: None,
            favorite_time: None,
        };
        if record.entries.len() + 1 == m {
            record.entries.push(entry);
            break;
        }
        match favorite_child_with_moments(puzzle, &qlab, budget) {
            Ok((fav, k, l)) => {
                entry.k = Some(k);
                entry.l = Some(l);
                entry.favorite_time = Some(fav.map_time);
                record.entries.push(entry);
                qlab = fav.child;
            }
            Err(e) => {
                record.entries.push(entry);
                record.stop = NestStop::from_error(e)?;
                break;
            }
        }
    }
    Ok(record)
}
