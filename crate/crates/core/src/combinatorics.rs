//! Symbolic puzzle: pieces as unions of angle arcs, pulled back exactly.
//!
//! A depth-`n` piece is described by the external angles of the rays that
//! enter it below the truncating equipotential, as a union of open arcs. The
//! pullback of a piece `P` is the full preimage when `P` contains the
//! critical value; otherwise it splits into `d` components separated by the
//! rays `(theta_c + k)/d` landing at the critical point.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use num_rational::BigRational;
use num_traits::Zero;

use crate::angle::{Angle, Arc, Portrait};
use crate::error::{Error, Result};

/// Symbolic address of a puzzle piece.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Label {
    pub depth: usize,
    /// Disjoint open arcs, sorted by start angle.
    pub arcs: Vec<Arc>,
}

impl Label {
    pub fn new(depth: usize, mut arcs: Vec<Arc>) -> Self {
        arcs.sort_by(|a, b| a.start.cmp(&b.start));
        Label { depth, arcs }
    }

    /// Canonical key: the smallest boundary angle that opens an arc. Unique
    /// among labels of one depth.
    pub fn sector_id(&self) -> &Angle {
        &self.arcs[0].start
    }

    /// Sorted endpoints of all arcs.
    pub fn boundary_angles(&self) -> Vec<Angle> {
        let mut v: Vec<Angle> = self
            .arcs
            .iter()
            .flat_map(|a| [a.start.clone(), a.end()])
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn contains(&self, t: &Angle) -> bool {
        self.arcs.iter().any(|a| a.contains(t))
    }

    /// Whether every arc of `other` lies in an arc of `self`.
    pub fn contains_label(&self, other: &Label) -> bool {
        other
            .arcs
            .iter()
            .all(|o| self.arcs.iter().any(|a| a.contains_arc(o)))
    }

    /// Total angular measure.
    pub fn measure(&self) -> BigRational {
        self.arcs
            .iter()
            .fold(BigRational::zero(), |acc, a| acc + &a.len)
    }

    /// Invariance of the arc set under `t -> t + 1/d`.
    pub fn is_symmetric(&self, d: u32) -> bool {
        let shift = BigRational::new(1.into(), d.into());
        let mut rotated: Vec<Arc> = self
            .arcs
            .iter()
            .map(|a| Arc::new(Angle::from_ratio(a.start.as_ratio() + &shift), a.len.clone()))
            .collect();
        rotated.sort_by(|a, b| a.start.cmp(&b.start));
        rotated == self.arcs
    }

    /// Arcs of the image piece under `t -> d t`, one depth shallower.
    pub fn image(&self, d: u32) -> Label {
        let mut arcs: Vec<Arc> = self.arcs.iter().map(|a| a.image(d)).collect();
        arcs.sort_by(|a, b| a.start.cmp(&b.start));
        arcs.dedup();
        Label::new(self.depth.saturating_sub(1), arcs)
    }

    /// A point strictly inside the first arc.
    pub fn sample_angle(&self) -> Angle {
        self.arcs[0].midpoint()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Y[{}]", self.depth)?;
        for a in &self.arcs {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Component index of a preimage angle: which of the `d` sectors cut out by
/// the angles `(value + k)/d` contains it.
fn component_of(d: u32, value: &Angle, t: &Angle) -> usize {
    let base = Angle::from_ratio(value.as_ratio() / BigRational::from_integer(d.into()));
    let off = t.ccw_distance_from(&base) * BigRational::from_integer(d.into());
    off.floor().to_integer().try_into().unwrap_or(0)
}

/// Pullback of one piece. `along` selects the component when the piece does
/// not contain the critical value; it is ignored otherwise.
pub(crate) fn pullback_piece(d: u32, value: &Angle, piece: &Label, along: Option<&Angle>) -> Vec<Label> {
    let pre: Vec<Arc> = piece.arcs.iter().flat_map(|a| a.preimages(d)).collect();
    if piece.contains(value) {
        return vec![Label::new(piece.depth + 1, pre)];
    }
    let mut groups: BTreeMap<usize, Vec<Arc>> = BTreeMap::new();
    for a in pre {
        groups.entry(component_of(d, value, &a.start)).or_default().push(a);
    }
    match along {
        Some(t) => {
            let k = component_of(d, value, t);
            vec![Label::new(piece.depth + 1, groups.remove(&k).unwrap_or_default())]
        }
        None => groups
            .into_values()
            .map(|arcs| Label::new(piece.depth + 1, arcs))
            .collect(),
    }
}

/// Exact puzzle combinatorics for one portrait and one critical value angle.
///
/// Pieces are computed on demand and memoized; the struct is `Sync`.
pub struct SymbolicPuzzle {
    portrait: Portrait,
    value: Angle,
    /// Least `j` with `d^j * value` a portrait angle.
    hit: Option<usize>,
    orbit: (usize, usize),
    pieces: Mutex<HashMap<(usize, Angle), Label>>,
    critical: Mutex<Vec<Label>>,
    /// `d^j * value` for `j` below the cached length.
    orbit_cache: Mutex<Vec<Angle>>,
}

impl fmt::Debug for SymbolicPuzzle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolicPuzzle")
            .field("portrait", &self.portrait)
            .field("value", &self.value)
            .finish()
    }
}

impl Clone for SymbolicPuzzle {
    fn clone(&self) -> Self {
        SymbolicPuzzle::new(self.portrait.clone(), self.value.clone())
            .expect("validated at construction")
    }
}

impl SymbolicPuzzle {
    /// Fails with `ValueOutsideWake` unless `value` lies in the sector of the
    /// portrait that the critical value must occupy.
    pub fn new(portrait: Portrait, value: Angle) -> Result<Self> {
        let vs = portrait
            .value_sector_index()
            .ok_or_else(|| Error::InvalidInput(format!("portrait {portrait} has no value sector")))?;
        if portrait.contains(&value) {
            return Err(Error::CombinatoricsUndefined { depth: 0 });
        }
        if !portrait.sectors()[vs].contains(&value) {
            return Err(Error::ValueOutsideWake(format!(
                "value angle {value} is not in sector {} of {portrait}",
                portrait.sectors()[vs]
            )));
        }
        let d = portrait.degree;
        let (pre, per) = value.orbit_type(d);
        let mut t = value.clone();
        let mut hit = None;
        for j in 0..pre + per {
            if portrait.contains(&t) {
                hit = Some(j);
                break;
            }
            t = t.times(d);
        }
        let y0 = Label::new(0, vec![portrait.sectors()[0].clone()]);
        Ok(SymbolicPuzzle {
            portrait,
            value,
            hit,
            orbit: (pre, per),
            pieces: Mutex::new(HashMap::new()),
            critical: Mutex::new(vec![y0]),
            orbit_cache: Mutex::new(Vec::new()),
        })
    }

    pub fn portrait(&self) -> &Portrait {
        &self.portrait
    }

    pub fn degree(&self) -> u32 {
        self.portrait.degree
    }

    pub fn value_angle(&self) -> &Angle {
        &self.value
    }

    /// Depth up to which the combinatorics is well defined; `None` when the
    /// critical orbit never meets the portrait rays.
    /// `(preperiod, period)` of the value angle under `t -> d t`.
    pub fn orbit_type(&self) -> (usize, usize) {
        self.orbit
    }

    pub fn defined_depth(&self) -> Option<usize> {
        self.hit
    }

    /// Errors unless the value angle avoids depth-`n` boundaries.
    pub fn check_depth(&self, n: usize) -> Result<()> {
        match self.hit {
            Some(h) if n >= h => Err(Error::CombinatoricsUndefined { depth: h }),
            _ => Ok(()),
        }
    }

    /// Angle of `f^t(0)` for `t >= 1`: the orbit of the critical value.
    pub fn orbit_angle(&self, t: usize) -> Angle {
        assert!(t >= 1, "the critical point itself has no external angle");
        let (pre, per) = self.orbit;
        let mut j = t - 1;
        if j >= pre + per {
            j = pre + (j - pre) % per;
        }
        let mut cache = self.orbit_cache.lock().unwrap();
        if cache.is_empty() {
            cache.push(self.value.clone());
        }
        while cache.len() <= j {
            let next = cache.last().unwrap().times(self.degree());
            cache.push(next);
        }
        cache[j].clone()
    }

    /// Depth-`m` piece containing the ray of angle `t`.
    pub fn piece(&self, m: usize, t: &Angle) -> Result<Label> {
        let d = self.degree();
        let mut chain = Vec::with_capacity(m + 1);
        let mut x = t.clone();
        for _ in 0..=m {
            chain.push(x.clone());
            x = x.times(d);
        }
        for a in &chain {
            if self.portrait.contains(a) {
                return Err(Error::OnRay(t.to_string()));
            }
        }
        // Walk up from the deepest cached ancestor.
        let mut start = m + 1;
        let mut current = None;
        {
            let cache = self.pieces.lock().unwrap();
            for k in (0..=m).rev() {
                let j = m - k;
                if let Some(l) = cache.get(&(k, chain[j].clone())) {
                    start = k;
                    current = Some(l.clone());
                    break;
                }
            }
        }
        let mut label = match current {
            Some(l) => l,
            None => {
                start = 0;
                let s = self.portrait.sector_index(&chain[m])?;
                Label::new(0, vec![self.portrait.sectors()[s].clone()])
            }
        };
        let mut fresh = Vec::new();
        for k in start + 1..=m {
            let phi = &chain[m - k];
            self.check_depth(k - 1)?;
            label = pullback_piece(d, &self.value, &label, Some(phi)).remove(0);
            fresh.push(((k, phi.clone()), label.clone()));
        }
        if !fresh.is_empty() {
            let mut cache = self.pieces.lock().unwrap();
            cache.extend(fresh);
        }
        Ok(label)
    }

    /// Piece containing the critical value at depth `n`.
    pub fn value_label(&self, n: usize) -> Result<Label> {
        self.check_depth(n)?;
        self.piece(n, &self.value)
    }

    /// Critical piece `Y^n`.
    pub fn critical_label(&self, n: usize) -> Result<Label> {
        if n > 0 {
            self.check_depth(n - 1)?;
        }
        {
            let cache = self.critical.lock().unwrap();
            if let Some(l) = cache.get(n) {
                return Ok(l.clone());
            }
        }
        let have = self.critical.lock().unwrap().len();
        let mut built = Vec::new();
        for k in have..=n {
            let v = self.piece(k - 1, &self.value)?;
            built.push(pullback_piece(self.degree(), &self.value, &v, None).remove(0));
        }
        let mut cache = self.critical.lock().unwrap();
        for l in built {
            if cache.len() <= l.depth {
                cache.push(l);
            }
        }
        Ok(cache[n].clone())
    }

    /// Whether `f^t(0)` lies in `Y^n`; `t = 0` is always inside.
    pub fn orbit_in_critical(&self, t: usize, n: usize) -> Result<bool> {
        if t == 0 {
            return Ok(true);
        }
        self.check_depth(n + t - 1)?;
        Ok(self.critical_label(n)?.contains(&self.orbit_angle(t)))
    }

    /// Whether `f^t(0)` lies in the given piece.
    pub fn orbit_in(&self, t: usize, piece: &Label) -> Result<bool> {
        if t == 0 {
            return Ok(self.critical_label(piece.depth)? == *piece);
        }
        self.check_depth(piece.depth + t - 1)?;
        Ok(piece.contains(&self.orbit_angle(t)))
    }

    /// Full level at depth 0.
    pub fn level0(&self) -> Vec<Label> {
        self.portrait
            .sectors()
            .into_iter()
            .map(|s| Label::new(0, vec![s]))
            .collect()
    }

    /// Full level at depth `n`, by repeated pullback.
    pub fn level(&self, n: usize) -> Result<Vec<Label>> {
        let mut lvl = self.level0();
        for k in 0..n {
            lvl = pullback_labels(self, &lvl)?;
            debug_assert!(lvl.iter().all(|l| l.depth == k + 1));
        }
        Ok(lvl)
    }

    /// Boundary angles at depth `n`: all `n`-fold preimages of the portrait.
    pub fn boundary_angles(&self, n: usize) -> Vec<Angle> {
        let d = self.degree();
        let mut v = self.portrait.angles.clone();
        for _ in 0..n {
            let mut w: Vec<Angle> = v.iter().flat_map(|a| a.preimages(d)).collect();
            w.extend(self.portrait.angles.iter().cloned());
            w.sort();
            w.dedup();
            v = w;
        }
        v
    }

    /// Children of `Y^n` up to a return-time budget, listed in inclusion
    /// order (oldest first). Each entry is `(t, Y^{n+t})`.
    pub fn children(&self, n: usize, budget: usize) -> Result<Vec<(usize, Label)>> {
        let mut out = Vec::new();
        for t in 1..=budget {
            if self.is_child_time(n, t)? {
                out.push((t, self.critical_label(n + t)?));
            }
        }
        Ok(out)
    }

    /// `Y^{n+t}` is a child of `Y^n` exactly when `f^t(0)` is in `Y^n` and
    /// no earlier iterate `f^j(0)` is in `Y^{n+t-j}`.
    pub fn is_child_time(&self, n: usize, t: usize) -> Result<bool> {
        if t == 0 || !self.orbit_in_critical(t, n)? {
            return Ok(false);
        }
        for j in 1..t {
            if self.orbit_in_critical(j, n + t - j)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// One pullback step of a full level. Components are determined by the
/// critical value angle held in `puzzle`.
pub fn pullback_labels(puzzle: &SymbolicPuzzle, labels: &[Label]) -> Result<Vec<Label>> {
    let d = puzzle.degree();
    let n = labels.first().map(|l| l.depth).unwrap_or(0);
    puzzle.check_depth(n)?;
    let mut out: Vec<Label> = labels
        .iter()
        .flat_map(|l| pullback_piece(d, puzzle.value_angle(), l, None))
        .collect();
    out.sort_by(|a, b| a.sector_id().cmp(b.sector_id()));
    Ok(out)
}

/// Value labels for depths `0..=n`.
pub fn critical_value_labels(puzzle: &SymbolicPuzzle, n: usize) -> Result<BTreeMap<usize, Label>> {
    (0..=n).map(|k| Ok((k, puzzle.value_label(k)?))).collect()
}

/// Symbolic combinatorics up to a given depth.
#[derive(Clone, Debug)]
pub struct Combinatorics {
    pub portrait: Portrait,
    pub value_angle: Angle,
    pub max_depth: usize,
    /// Full levels, present up to `levels.len() - 1 <= max_depth`.
    pub levels: Vec<Vec<Label>>,
    pub critical_labels: BTreeMap<usize, Label>,
    pub value_labels: BTreeMap<usize, Label>,
}

impl Combinatorics {
    /// Builds labels to depth `n`; full levels only up to `full_levels`.
    pub fn build(puzzle: &SymbolicPuzzle, n: usize, full_levels: usize) -> Result<Self> {
        puzzle.check_depth(n)?;
        let mut levels = vec![puzzle.level0()];
        for _ in 0..n.min(full_levels) {
            let next = pullback_labels(puzzle, levels.last().unwrap())?;
            levels.push(next);
        }
        let critical_labels = (0..=n)
            .map(|k| Ok((k, puzzle.critical_label(k)?)))
            .collect::<Result<_>>()?;
        Ok(Combinatorics {
            portrait: puzzle.portrait().clone(),
            value_angle: puzzle.value_angle().clone(),
            max_depth: n,
            levels,
            critical_labels,
            value_labels: critical_value_labels(puzzle, n)?,
        })
    }

    /// Shallowest depth at which `self` and `other` differ, if any up to `n`.
    pub fn first_divergence(&self, other: &Combinatorics, n: usize) -> Result<Option<usize>> {
        let avail = self.max_depth.min(other.max_depth);
        if n > avail {
            return Err(Error::DepthUnavailable {
                requested: n,
                available: avail,
            });
        }
        if self.portrait != other.portrait {
            return Ok(Some(0));
        }
        for k in 0..=n {
            let lv = match (self.levels.get(k), other.levels.get(k)) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            };
            if !lv
                || self.critical_labels[&k] != other.critical_labels[&k]
                || self.value_labels[&k] != other.value_labels[&k]
            {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }
}

/// Same portrait and the same labels, critical and value pieces at every
/// depth up to `n`.
///
/// Full levels are compared where both sides built them. Beyond that the
/// level at depth `k + 1` is determined by the level at depth `k` and the
/// value piece at depth `k`, so comparing value pieces suffices.
pub fn same_combinatorics(a: &Combinatorics, b: &Combinatorics, n: usize) -> Result<bool> {
    Ok(a.first_divergence(b, n)?.is_none())
}
