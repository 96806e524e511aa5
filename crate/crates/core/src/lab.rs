//! Moduli of puzzle annuli, the quantity `m(Q)`, and checks of the two
//! modulus inequalities for children and favorite children.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::angle::Angle;
use crate::combinatorics::{Label, SymbolicPuzzle};
use crate::error::{Error, Result};
use crate::modulus::{modulus_with, AnnulusSpec, GridKind, ModulusEstimate, ModulusOptions};
use crate::nest::{first_child, ChildRecord, NestRecord};
use crate::puzzle::Puzzle;
use crate::scalar::Real;

/// Relative slack of the inequality checks.
pub const CHECK_SLACK: f64 = 0.05;

/// Grid defaults for puzzle annuli.
pub fn lab_options<T: Real>() -> ModulusOptions<T> {
    ModulusOptions::for_grid(256, GridKind::LogPolar)
}

/// Annulus between two realized pieces. Pieces sharing a boundary ray
/// touch, which leaves no annulus.
pub fn piece_annulus<T: Real>(puzzle: &Puzzle<T>, outer: &Label, inner: &Label) -> Result<AnnulusSpec<T>> {
    if !outer.contains_label(inner) || outer.depth >= inner.depth {
        return Err(Error::InvalidInput(format!("{inner} is not a deeper piece inside {outer}")));
    }
    let ob = outer.boundary_angles();
    if let Some(t) = inner.boundary_angles().iter().find(|t| ob.contains(t)) {
        return Err(Error::DegenerateAnnulus(format!("{inner} touches the boundary of {outer} along ray {t}")));
    }
    let o = puzzle.piece(outer)?;
    let i = puzzle.piece(inner)?;
    let tol = i.diameter() * T::lit(1e-6);
    let outer_feet = ob.iter().map(|t| puzzle.landing_point(t)).collect::<Result<Vec<_>>>()?;
    for t in inner.boundary_angles() {
        let z = puzzle.landing_point(&t)?;
        if outer_feet.iter().any(|w| (*w - z).norm() <= tol) {
            return Err(Error::DegenerateAnnulus(format!("{inner} touches the boundary of {outer} where ray {t} lands")));
        }
    }
    Ok(AnnulusSpec::new(o.boundary.clone(), i.boundary.clone())?.with_provenance(outer.clone(), inner.clone()))
}

/// `mod(outer \ inner)`.
pub fn piece_modulus<T: Real>(
    puzzle: &Puzzle<T>,
    outer: &Label,
    inner: &Label,
    opts: &ModulusOptions<T>,
) -> Result<ModulusEstimate<T>> {
    modulus_with(&piece_annulus(puzzle, outer, inner)?, opts)
}

/// Like [`piece_modulus`], with touching pieces measured as zero.
pub fn piece_modulus_or_zero<T: Real>(
    puzzle: &Puzzle<T>,
    outer: &Label,
    inner: &Label,
    opts: &ModulusOptions<T>,
) -> Result<ModulusEstimate<T>> {
    match piece_modulus(puzzle, outer, inner, opts) {
        Err(Error::DegenerateAnnulus(_)) => Ok(zero_estimate(opts)),
        r => r,
    }
}

/// Components of the first return map to a critical piece `Q`.
#[derive(Clone, Debug)]
pub struct ReturnDomains {
    /// The first child.
    pub central: ChildRecord,
    /// Off-centre components with their return times, by increasing time.
    pub others: Vec<(usize, Label)>,
    /// Enumeration stopped on the budget before `max_time`.
    pub exhausted: bool,
}

/// Largest frontier of not-yet-returned arcs kept by [`return_domains`].
pub const RETURN_FRONTIER_LIMIT: usize = 1 << 16;

/// Enumerates return domains of `Q` up to return time `max_time`, at most
/// `budget` off-centre ones, by increasing return time.
///
/// The angles of `Q` whose orbit has not come back by time `j` form finitely
/// many arcs. Each step maps their images forward once and splits them
/// against the arcs of `Q`; parts landing in `Q` are arcs of return domains,
/// the rest carry on. An empty frontier means every domain was listed.
pub fn return_domains(sym: &SymbolicPuzzle, q: &Label, max_time: usize, budget: usize) -> Result<ReturnDomains> {
    let d = BigRational::from_integer(BigInt::from(sym.degree()));
    let central = first_child(sym, q, max_time.max(1))?;
    let n = q.depth;
    let q_arcs: Vec<(BigRational, BigRational)> =
        q.arcs.iter().map(|a| (a.start.as_ratio().clone(), a.len.clone())).collect();
    let gaps = complement(&q_arcs);
    let mut others: Vec<(usize, Label)> = Vec::new();
    let mut exhausted = false;
    // (start of the arc of angles, image start at time j); the image length
    // is the arc length times d^j.
    let mut frontier: Vec<(BigRational, BigRational, BigRational)> =
        q_arcs.iter().map(|(s, l)| (s.clone(), s.clone(), l.clone())).collect();
    let mut scale = BigRational::one();
    'outer: for r in 1..=max_time {
        if frontier.is_empty() {
            break;
        }
        if frontier.len() > RETURN_FRONTIER_LIMIT {
            exhausted = true;
            break;
        }
        let mut next = Vec::new();
        for (x0, img, len) in &frontier {
            // Pieces short enough that their image is a proper arc.
            let m = (&d * len).floor().to_integer() + BigInt::one();
            let plen = len / BigRational::from_integer(m.clone());
            let mut k = BigInt::from(0);
            while k < m {
                let off = &plen * BigRational::from_integer(k.clone());
                k += 1;
                let b_start = frac(&(&d * (img + &off)));
                let b_len = &d * &plen;
                let pull = |bo: &BigRational| x0 + (&off + bo / &d) / &scale;
                for (qs, ql) in &q_arcs {
                    for (bo, bl) in intersect(&b_start, &b_len, qs, ql) {
                        let phi = Angle::from_ratio(pull(&(&bo + &bl / BigRational::from_integer(BigInt::from(2)))));
                        let dom = match sym.piece(n + r, &phi) {
                            Ok(l) => l,
                            Err(Error::OnRay(_)) => continue,
                            Err(e) => return Err(e),
                        };
                        if dom == central.child || others.iter().any(|(_, o)| *o == dom) {
                            continue;
                        }
                        if others.len() >= budget {
                            exhausted = true;
                            break 'outer;
                        }
                        others.push((r, dom));
                    }
                }
                for (gs, gl) in &gaps {
                    for (bo, bl) in intersect(&b_start, &b_len, gs, gl) {
                        next.push((pull(&bo), frac(&(&b_start + &bo)), bl));
                    }
                }
            }
        }
        scale *= &d;
        frontier = next;
        if r == max_time && !frontier.is_empty() {
            exhausted = true;
        }
    }
    Ok(ReturnDomains {
        central,
        others,
        exhausted,
    })
}

fn frac(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// Arcs between consecutive arcs of a sorted disjoint list.
fn complement(arcs: &[(BigRational, BigRational)]) -> Vec<(BigRational, BigRational)> {
    let k = arcs.len();
    (0..k)
        .filter_map(|i| {
            let end = &arcs[i].0 + &arcs[i].1;
            let gap = frac(&(&arcs[(i + 1) % k].0 - &end));
            (gap > BigRational::zero()).then(|| (frac(&end), gap))
        })
        .collect()
}

/// Intersection of the arcs `[a, a + la)` and `[b, b + lb)`, both shorter
/// than a full turn, as offsets from `a` with lengths.
fn intersect(a: &BigRational, la: &BigRational, b: &BigRational, lb: &BigRational) -> Vec<(BigRational, BigRational)> {
    let o = frac(&(b - a));
    let mut out = Vec::new();
    for shift in [BigRational::zero(), -BigRational::one()] {
        let lo = &o + &shift;
        let hi = &lo + lb;
        let s = if lo > BigRational::zero() { lo } else { BigRational::zero() };
        let e = if &hi < la { hi } else { la.clone() };
        if e > s {
            let l = &e - &s;
            out.push((s, l));
        }
    }
    out
}

/// Upper bound for `m(Q)`: the least `mod(Q \ D)` over the examined return
/// domains.
#[derive(Clone, Debug)]
pub struct MEstimate<T> {
    pub estimate: ModulusEstimate<T>,
    /// Domain realizing the minimum.
    pub argmin: Label,
    /// Components examined, the central one included.
    pub visited: usize,
    /// Components whose modulus was actually solved.
    pub solved: usize,
    /// Components skipped because a round-annulus bound already exceeded
    /// the running minimum.
    pub skipped: usize,
    /// The true infimum ranges over infinitely many components; set when
    /// the enumeration hit its budget.
    pub budget_exhausted: bool,
}

impl<T: Real> MEstimate<T> {
    pub fn value(&self) -> T {
        self.estimate.value
    }
}

/// `m(Q)` over the first child and at most `budget` further return
/// domains with return time at most `max_time`.
pub fn m_of_piece<T: Real>(
    puzzle: &Puzzle<T>,
    q: &Label,
    max_time: usize,
    budget: usize,
    opts: &ModulusOptions<T>,
) -> Result<MEstimate<T>> {
    let doms = return_domains(puzzle.symbolic(), q, max_time, budget)?;
    let mut best = piece_modulus_or_zero(puzzle, q, &doms.central.child, opts)?;
    let mut argmin = doms.central.child.clone();
    let mut solved = 1;
    let mut skipped = 0;
    for (_, dom) in &doms.others {
        if best.value <= T::zero() {
            skipped += 1;
            continue;
        }
        let ann = match piece_annulus(puzzle, q, dom) {
            Ok(a) => a,
            Err(Error::DegenerateAnnulus(_)) => {
                solved += 1;
                best = zero_estimate(opts);
                argmin = dom.clone();
                continue;
            }
            Err(e) => return Err(e),
        };
        if ann.round_lower_bound() >= best.value {
            skipped += 1;
            continue;
        }
        let est = match modulus_with(&ann, opts) {
            Ok(e) => e,
            Err(Error::DegenerateAnnulus(_)) => zero_estimate(opts),
            Err(e) => return Err(e),
        };
        solved += 1;
        if est.value < best.value {
            best = est;
            argmin = dom.clone();
        }
    }
    Ok(MEstimate {
        estimate: best,
        argmin,
        visited: 1 + doms.others.len(),
        solved,
        skipped,
        budget_exhausted: doms.exhausted,
    })
}

fn zero_estimate<T: Real>(opts: &ModulusOptions<T>) -> ModulusEstimate<T> {
    ModulusEstimate {
        value: T::zero(),
        grid_sizes: opts.grids.clone(),
        per_grid: vec![T::zero(); opts.grids.len()],
        richardson_error: T::zero(),
        order: T::one(),
        converged: true,
        kind: opts.kind,
    }
}

/// One inequality check `lhs >= rhs - slack * rhs`.
#[derive(Clone, Debug)]
pub struct VerificationRow {
    pub check: String,
    pub pieces: Vec<Label>,
    pub lhs: f64,
    pub rhs: f64,
    /// `(lhs - rhs) / rhs`.
    pub margin: f64,
    pub slack: f64,
    /// `None` when the hypotheses do not hold and the row was skipped.
    pub passed: Option<bool>,
    pub note: String,
}

impl VerificationRow {
    fn measured(check: &str, pieces: Vec<Label>, lhs: f64, rhs: f64, note: String) -> Self {
        let margin = if rhs > 0.0 { (lhs - rhs) / rhs } else { f64::INFINITY };
        VerificationRow {
            check: check.into(),
            pieces,
            lhs,
            rhs,
            margin,
            slack: CHECK_SLACK,
            passed: Some(margin >= -CHECK_SLACK),
            note,
        }
    }

    pub fn skipped(check: &str, pieces: Vec<Label>, reason: String) -> Self {
        VerificationRow {
            check: check.into(),
            pieces,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            slack: CHECK_SLACK,
            passed: None,
            note: reason,
        }
    }
}

/// `m(V') >= mod(V \ U) / d` for the first child `U` of `V` and a child
/// `V'` of `V`. The left side is measured as the upper bound `m^(V')`; the
/// theorem implies the check for it as well.
pub fn verify_children_lemma<T: Real>(
    puzzle: &Puzzle<T>,
    child: &ChildRecord,
    max_time: usize,
    budget: usize,
    opts: &ModulusOptions<T>,
) -> Result<VerificationRow> {
    let sym = puzzle.symbolic();
    let v = &child.parent;
    if !sym.is_child_time(v.depth, child.map_time)? || sym.critical_label(v.depth + child.map_time)? != child.child {
        return Err(Error::InvalidInput(format!("{} is not a child of {v}", child.child)));
    }
    let u = first_child(sym, v, max_time)?.child;
    let rhs = piece_modulus_or_zero(puzzle, v, &u, opts)?.value.to_f64_lossy() / sym.degree() as f64;
    let m = m_of_piece(puzzle, &child.child, max_time, budget, opts)?;
    let note = format!(
        "m^ over {} components ({} solved){}",
        m.visited,
        m.solved,
        if m.budget_exhausted { ", budget exhausted" } else { "" }
    );
    Ok(VerificationRow::measured(
        "children_lemma",
        vec![v.clone(), u, child.child.clone()],
        m.value().to_f64_lossy(),
        rhs,
        note,
    ))
}

/// Critical pieces `V = Y^s`, `s <= depth(Q)`, whose first child lies in
/// `Q`; `V = Q` always qualifies.
pub fn lemma_y_candidates(sym: &SymbolicPuzzle, q: &Label, budget: usize) -> Result<Vec<Label>> {
    let mut out = Vec::new();
    for s in 0..=q.depth {
        let v = sym.critical_label(s)?;
        match first_child(sym, &v, budget) {
            Ok(fc) if q.contains_label(&fc.child) || fc.child == *q => out.push(v),
            Ok(_) => {}
            Err(e) if e.is_inconclusive() || matches!(e, Error::NotRecurrent { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// The four-piece nest `P' < Q' < P < Q` of the favorite-child lemma.
#[derive(Clone, Debug)]
pub struct NestFragment {
    pub q: Label,
    pub p: Label,
    pub q1: Label,
    pub p1: Label,
}

impl NestFragment {
    pub fn from_nest(nest: &NestRecord, i: usize) -> Option<Self> {
        let a = nest.entries.get(i)?;
        let b = nest.entries.get(i + 1)?;
        Some(NestFragment {
            q: a.q_label.clone(),
            p: a.p_label.clone(),
            q1: b.q_label.clone(),
            p1: b.p_label.clone(),
        })
    }
}

/// `mod(Q' \ P') >= m(V) / d^2`. The right side is measured as the upper
/// bound `m^(V)`, which makes this check stricter than the inequality
/// itself. Returns a skipped row when the hypotheses fail.
pub fn verify_lemma_y<T: Real>(
    puzzle: &Puzzle<T>,
    frag: &NestFragment,
    v: &Label,
    max_time: usize,
    budget: usize,
    opts: &ModulusOptions<T>,
) -> Result<VerificationRow> {
    let sym = puzzle.symbolic();
    let pieces = vec![frag.q.clone(), frag.p.clone(), frag.q1.clone(), frag.p1.clone(), v.clone()];
    if let Err(reason) = lemma_y_hypotheses(sym, frag, v, max_time)? {
        return Ok(VerificationRow::skipped("lemma_y", pieces, reason));
    }
    let lhs = piece_modulus_or_zero(puzzle, &frag.q1, &frag.p1, opts)?.value.to_f64_lossy();
    let m = m_of_piece(puzzle, v, max_time, budget, opts)?;
    let d = sym.degree() as f64;
    let note = format!(
        "m^(V) over {} components ({} solved){}",
        m.visited,
        m.solved,
        if m.budget_exhausted { ", budget exhausted" } else { "" }
    );
    Ok(VerificationRow::measured(
        "lemma_y",
        pieces,
        lhs,
        m.value().to_f64_lossy() / (d * d),
        note,
    ))
}

/// `Ok(Err(reason))` when the configuration does not meet the hypotheses.
pub fn lemma_y_hypotheses(
    sym: &SymbolicPuzzle,
    frag: &NestFragment,
    v: &Label,
    budget: usize,
) -> Result<std::result::Result<(), String>> {
    let fc_q = first_child(sym, &frag.q, budget)?.child;
    if fc_q != frag.p {
        return Ok(Err(format!("{} is not the first child of {}", frag.p, frag.q)));
    }
    let fc_q1 = first_child(sym, &frag.q1, budget)?.child;
    if fc_q1 != frag.p1 {
        return Ok(Err(format!("{} is not the first child of {}", frag.p1, frag.q1)));
    }
    match crate::nest::favorite_child(sym, &frag.q, budget) {
        Ok(f) if f.child == frag.q1 => {}
        Ok(f) => return Ok(Err(format!("favorite child of {} is {}, not {}", frag.q, f.child, frag.q1))),
        Err(e) => return Ok(Err(format!("favorite child of {}: {e}", frag.q))),
    }
    if !(v.depth <= frag.q.depth && (v == &frag.q || v.contains_label(&frag.q))) {
        return Ok(Err(format!("{v} does not contain {}", frag.q)));
    }
    if sym.critical_label(v.depth)? != *v {
        return Ok(Err(format!("{v} is not a critical piece")));
    }
    let u = first_child(sym, v, budget)?.child;
    if !(u == frag.q || frag.q.contains_label(&u)) {
        return Ok(Err(format!("first child {u} of {v} is not inside {}", frag.q)));
    }
    Ok(Ok(()))
}

/// Modulus of `Q^i \ P^i` per nest level.
#[derive(Clone, Debug)]
pub struct ProfileEntry<T> {
    pub level: usize,
    pub q_label: Label,
    pub p_label: Label,
    pub estimate: Option<ModulusEstimate<T>>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct MProfile<T> {
    pub entries: Vec<ProfileEntry<T>>,
    /// First level included in the floor.
    pub n0: usize,
    /// Least modulus over levels `>= n0`.
    pub floor: Option<T>,
    /// Least modulus over all measured levels.
    pub floor_all: Option<T>,
    /// Moduli decrease strictly from level `n0` on.
    pub monotone_decreasing: bool,
    /// Some level `> n0` falls below 10% of the level-`n0` value.
    pub decays_below_tenth: bool,
}

impl<T: Real> MProfile<T> {
    pub fn values(&self) -> Vec<Option<T>> {
        self.entries.iter().map(|e| e.estimate.as_ref().map(|m| m.value)).collect()
    }
}

/// Moduli along a favorite nest; construction errors are recorded per
/// level.
pub fn nest_moduli_profile<T: Real>(
    puzzle: &Puzzle<T>,
    nest: &NestRecord,
    n0: usize,
    opts: &ModulusOptions<T>,
) -> MProfile<T> {
    let entries: Vec<ProfileEntry<T>> = nest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let r = piece_modulus(puzzle, &e.q_label, &e.p_label, opts);
            let (estimate, error) = match r {
                Ok(m) => (Some(m), None),
                Err(err) => (None, Some(err.to_string())),
            };
            ProfileEntry {
                level: i,
                q_label: e.q_label.clone(),
                p_label: e.p_label.clone(),
                estimate,
                error,
            }
        })
        .collect();
    let vals: Vec<(usize, T)> = entries
        .iter()
        .filter_map(|e| e.estimate.as_ref().map(|m| (e.level, m.value)))
        .collect();
    let tail: Vec<T> = vals.iter().filter(|(l, _)| *l >= n0).map(|(_, v)| *v).collect();
    let min = |v: &[T]| v.iter().cloned().fold(None, |a: Option<T>, x| Some(a.map_or(x, |a| a.min(x))));
    let floor = min(&tail);
    let floor_all = min(&vals.iter().map(|(_, v)| *v).collect::<Vec<_>>());
    let monotone_decreasing = tail.len() >= 2 && tail.windows(2).all(|w| w[1] < w[0]);
    let decays_below_tenth = tail.first().is_some_and(|&first| tail.iter().skip(1).any(|&v| v < first * T::lit(0.1)));
    MProfile {
        entries,
        n0,
        floor,
        floor_all,
        monotone_decreasing,
        decays_below_tenth,
    }
}
