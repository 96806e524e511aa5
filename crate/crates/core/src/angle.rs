//! Exact angles in R/Z and the circle dynamics t -> d*t (mod 1).
//!
//! Angles are reduced fractions in `[0, 1)` backed by big integers. Every
//! combinatorial question in the crate is answered with these values, never
//! with floating point.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fractional part of a rational, in `[0, 1)`.
pub(crate) fn frac(r: &BigRational) -> BigRational {
    r - r.floor()
}

/// An external angle, measured in turns.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Angle(BigRational);

impl Angle {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Result<Self> {
        let denom = denom.into();
        if denom.is_zero() {
            return Err(Error::InvalidInput("angle with zero denominator".into()));
        }
        Ok(Self::from_ratio(BigRational::new(numer.into(), denom)))
    }

    /// Reduces any rational modulo one.
    pub fn from_ratio(r: BigRational) -> Self {
        Angle(frac(&r))
    }

    pub fn zero() -> Self {
        Angle(BigRational::zero())
    }

    /// Exact dyadic angle equal to the given `f64` reduced mod 1.
    pub fn from_f64_exact(x: f64) -> Result<Self> {
        BigRational::from_float(x)
            .map(Self::from_ratio)
            .ok_or_else(|| Error::InvalidInput(format!("non-finite angle {x}")))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `d * t mod 1`.
    pub fn times(&self, d: u32) -> Angle {
        self.times_pow(d, 1)
    }

    /// `d^n * t mod 1`, computed with a modular power on the numerator.
    pub fn times_pow(&self, d: u32, n: usize) -> Angle {
        let den = self.denom();
        let factor = BigInt::from(d).modpow(&BigInt::from(n), den);
        let num = (self.numer() * factor).mod_floor(den);
        Angle(BigRational::new(num, den.clone()))
    }

    /// The `d` preimages `(t + k)/d`, in increasing order.
    pub fn preimages(&self, d: u32) -> Vec<Angle> {
        let dd = BigInt::from(d);
        (0..d)
            .map(|k| Angle((&self.0 + BigInt::from(k)) / &dd))
            .collect()
    }

    /// Value in turns as a float; loses exactness.
    pub fn to_real<T: Real>(&self) -> T {
        T::lit(ratio_to_f64(&self.0))
    }

    /// Signed offset `self - other`, reduced into `[0, 1)`.
    pub fn ccw_distance_from(&self, other: &Angle) -> BigRational {
        frac(&(&self.0 - &other.0))
    }

    /// Whether `d^n t mod 1` eventually cycles (always true for rationals);
    /// returns `(preperiod, period)` of the orbit under `t -> d t`.
    pub fn orbit_type(&self, d: u32) -> (usize, usize) {
        let mut seen = std::collections::HashMap::new();
        let mut t = self.clone();
        let mut i = 0usize;
        loop {
            if let Some(&j) = seen.get(&t) {
                return (j, i - j);
            }
            seen.insert(t.clone(), i);
            t = t.times(d);
            i += 1;
        }
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(x) = r.to_f64() {
        return x;
    }
    // Very large operands: shift both down before converting.
    let n = r.numer();
    let m = r.denom();
    let shift = (m.bits().max(n.bits())).saturating_sub(1000);
    let n: BigInt = n >> shift;
    let m: BigInt = m >> shift;
    n.to_f64().unwrap_or(0.0) / m.to_f64().unwrap_or(1.0)
}

/// Spec-level operation: `d * t mod 1`.
pub fn times_d(d: u32, t: &Angle) -> Angle {
    t.times(d)
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Angle({self})")
    }
}

impl FromStr for Angle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse angle `{s}` (expected num/den)"));
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| bad())?;
                let d: BigInt = d.trim().parse().map_err(|_| bad())?;
                if d.sign() != Sign::Plus {
                    return Err(bad());
                }
                Angle::new(n, d)
            }
            None => {
                let n: BigInt = s.parse().map_err(|_| bad())?;
                Angle::new(n, 1)
            }
        }
    }
}

/// An open arc of the circle, running counterclockwise from `start` for
/// `len` turns, with `0 < len <= 1`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Arc {
    pub start: Angle,
    pub len: BigRational,
}

impl Arc {
    pub fn new(start: Angle, len: BigRational) -> Self {
        debug_assert!(len.is_positive() && len <= BigRational::one());
        Arc { start, len }
    }

    /// Arc from `a` counterclockwise to `b`; the full circle when `a == b`.
    pub fn between(a: &Angle, b: &Angle) -> Self {
        let mut len = b.ccw_distance_from(a);
        if len.is_zero() {
            len = BigRational::one();
        }
        Arc::new(a.clone(), len)
    }

    pub fn end(&self) -> Angle {
        Angle::from_ratio(self.start.as_ratio() + &self.len)
    }

    /// Open-arc membership.
    pub fn contains(&self, t: &Angle) -> bool {
        let x = t.ccw_distance_from(&self.start);
        x.is_positive() && x < self.len
    }

    /// Closed containment of another arc.
    pub fn contains_arc(&self, other: &Arc) -> bool {
        let off = other.start.ccw_distance_from(&self.start);
        &off + &other.len <= self.len
    }

    pub fn midpoint(&self) -> Angle {
        Angle::from_ratio(self.start.as_ratio() + &self.len / BigInt::from(2))
    }

    /// The `d` preimage arcs under `t -> d t`, each of length `len / d`.
    /// Requires `len <= 1`, which keeps every preimage arc proper.
    pub fn preimages(&self, d: u32) -> Vec<Arc> {
        let len = &self.len / BigInt::from(d);
        self.start
            .preimages(d)
            .into_iter()
            .map(|s| Arc::new(s, len.clone()))
            .collect()
    }

    /// Image arc under `t -> d t`; only meaningful when `d * len <= 1`.
    pub fn image(&self, d: u32) -> Arc {
        Arc::new(self.start.times(d), &self.len * BigInt::from(d))
    }
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.start, self.end())
    }
}

/// Cycle of external angles landing at the dividing fixed point.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Portrait {
    pub degree: u32,
    /// Increasing order in `[0, 1)`.
    pub angles: Vec<Angle>,
    /// Combinatorial rotation number `p/q`.
    pub rotation: (usize, usize),
}

impl Portrait {
    /// Validates a candidate cycle and computes its rotation number.
    pub fn from_cycle(degree: u32, angles: &[Angle]) -> Result<Self> {
        let q = angles.len();
        if degree < 2 {
            return Err(Error::InvalidInput("degree must be at least 2".into()));
        }
        if q < 2 {
            return Err(Error::InvalidInput("a portrait needs q >= 2 angles".into()));
        }
        let mut sorted = angles.to_vec();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != q {
            return Err(Error::InvalidInput("portrait angles must be distinct".into()));
        }
        let p = rotation_of(degree, &sorted).ok_or_else(|| {
            Error::InvalidInput("angles are not a cycle rotated by t -> d t".into())
        })?;
        Ok(Portrait {
            degree,
            angles: sorted,
            rotation: (p, q),
        })
    }

    pub fn q(&self) -> usize {
        self.angles.len()
    }

    pub fn contains(&self, t: &Angle) -> bool {
        self.angles.binary_search(t).is_ok()
    }

    /// Raw sectors: arc `i` runs from `angles[i]` to `angles[i+1]`.
    pub fn raw_sectors(&self) -> Vec<Arc> {
        let q = self.q();
        (0..q)
            .map(|i| Arc::between(&self.angles[i], &self.angles[(i + 1) % q]))
            .collect()
    }

    /// Raw index of the sector containing the critical point: it holds the
    /// rotated copies `a + k/d` of the portrait angles.
    fn critical_raw(&self) -> usize {
        let probe = Angle::from_ratio(
            self.angles[0].as_ratio() + BigRational::new(BigInt::one(), BigInt::from(self.degree)),
        );
        self.raw_sectors()
            .iter()
            .position(|s| s.contains(&probe))
            .expect("rotated portrait angle lies in some sector")
    }

    /// Sectors in canonical order: index 0 is the critical sector, the rest
    /// follow counterclockwise.
    pub fn sectors(&self) -> Vec<Arc> {
        let raw = self.raw_sectors();
        let c = self.critical_raw();
        let q = raw.len();
        (0..q).map(|i| raw[(c + i) % q].clone()).collect()
    }

    /// Canonical index of the sector containing `t`.
    pub fn sector_index(&self, t: &Angle) -> Result<usize> {
        if self.contains(t) {
            return Err(Error::OnRay(t.to_string()));
        }
        Ok(self
            .sectors()
            .iter()
            .position(|s| s.contains(t))
            .expect("angle off the portrait lies in a sector"))
    }

    /// Canonical index of the sector that must contain the critical value:
    /// the non-critical sector whose full preimage sits in the critical one.
    pub fn value_sector_index(&self) -> Option<usize> {
        let sectors = self.sectors();
        let crit = &sectors[0];
        let mut hits = (1..sectors.len()).filter(|&i| {
            sectors[i]
                .preimages(self.degree)
                .iter()
                .all(|a| crit.contains_arc(a))
        });
        let first = hits.next();
        match hits.next() {
            None => first,
            Some(_) => None,
        }
    }
}

impl fmt::Display for Portrait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.angles.iter().map(|a| a.to_string()).collect();
        write!(
            f,
            "{{{}}} rotation {}/{}",
            names.join(", "),
            self.rotation.0,
            self.rotation.1
        )
    }
}

/// If `t -> d t` permutes the sorted `angles` as a rotation, returns the shift.
fn rotation_of(d: u32, sorted: &[Angle]) -> Option<usize> {
    let q = sorted.len();
    let image0 = sorted[0].times(d);
    let p = sorted.iter().position(|a| *a == image0)?;
    for (i, a) in sorted.iter().enumerate() {
        if a.times(d) != sorted[(i + p) % q] {
            return None;
        }
    }
    Some(p)
}

/// All cycles of exact period `q` under `t -> d t` whose cyclic order is
/// rotated by `p` positions. Brute force over `k / (d^q - 1)`.
pub fn enumerate_portraits(d: u32, q: usize, p: usize) -> Result<Vec<Portrait>> {
    if d < 2 || q < 2 || p == 0 || p >= q || p.gcd(&q) != 1 {
        return Err(Error::InvalidInput(format!(
            "enumerate_portraits needs d >= 2, q >= 2, 0 < p < q, gcd(p, q) = 1; got d={d}, p/q={p}/{q}"
        )));
    }
    let den = BigInt::from(d).pow(q as u32) - 1u32;
    let den_u = den
        .to_u64()
        .ok_or_else(|| Error::InvalidInput("d^q too large to enumerate".into()))?;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for k in 1..den_u {
        let t = Angle::new(BigInt::from(k), den.clone())?;
        if seen.contains(&t) {
            continue;
        }
        let mut cycle = vec![t.clone()];
        let mut x = t.times(d);
        while x != t && cycle.len() <= q {
            cycle.push(x.clone());
            x = x.times(d);
        }
        for a in &cycle {
            seen.insert(a.clone());
        }
        if cycle.len() != q {
            continue;
        }
        let mut sorted = cycle.clone();
        sorted.sort();
        if rotation_of(d, &sorted) == Some(p) {
            out.push(Portrait {
                degree: d,
                angles: sorted,
                rotation: (p, q),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: i64, d: i64) -> Angle {
        Angle::new(n, d).unwrap()
    }

    #[test]
    fn times_d_examples() {
        assert_eq!(times_d(2, &a(1, 3)), a(2, 3));
        assert_eq!(times_d(2, &a(2, 3)), a(1, 3));
        assert_eq!(times_d(3, &a(1, 4)), a(3, 4));
    }

    #[test]
    fn times_pow_matches_repeated_times() {
        let t = a(5, 56);
        let mut x = t.clone();
        for n in 0..20 {
            assert_eq!(t.times_pow(2, n), x);
            x = x.times(2);
        }
    }

    #[test]
    fn parse_and_display() {
        let t: Angle = "9/56".parse().unwrap();
        assert_eq!(t.to_string(), "9/56");
        let u: Angle = " 3/6 ".parse().unwrap();
        assert_eq!(u, a(1, 2));
        assert_eq!("0".parse::<Angle>().unwrap(), Angle::zero());
        assert_eq!("7/4".parse::<Angle>().unwrap(), a(3, 4));
        assert!("1/0".parse::<Angle>().is_err());
        assert!("x/3".parse::<Angle>().is_err());
    }

    #[test]
    fn arcs() {
        let arc = Arc::between(&a(2, 3), &a(1, 3));
        assert!(arc.contains(&Angle::zero()));
        assert!(!arc.contains(&a(1, 2)));
        assert!(!arc.contains(&a(2, 3)));
        assert_eq!(arc.end(), a(1, 3));
        let pre = Arc::between(&a(1, 3), &a(2, 3)).preimages(2);
        assert_eq!(pre[0], Arc::between(&a(1, 6), &a(1, 3)));
        assert_eq!(pre[1], Arc::between(&a(2, 3), &a(5, 6)));
        assert!(arc.contains_arc(&Arc::between(&a(5, 6), &a(1, 6))));
        assert!(!arc.contains_arc(&Arc::between(&a(1, 3), &a(2, 3))));
    }

    #[test]
    fn portrait_enumeration() {
        let p2 = enumerate_portraits(2, 2, 1).unwrap();
        assert_eq!(p2.len(), 1);
        assert_eq!(p2[0].angles, vec![a(1, 3), a(2, 3)]);
        let p31 = enumerate_portraits(2, 3, 1).unwrap();
        assert!(p31.iter().any(|p| p.angles == vec![a(1, 7), a(2, 7), a(4, 7)]));
        let p32 = enumerate_portraits(2, 3, 2).unwrap();
        assert!(p32.iter().any(|p| p.angles == vec![a(3, 7), a(5, 7), a(6, 7)]));
        assert!(enumerate_portraits(2, 4, 2).is_err());
    }

    #[test]
    fn sector_indices() {
        let p = Portrait::from_cycle(2, &[a(1, 3), a(2, 3)]).unwrap();
        assert_eq!(p.sector_index(&Angle::zero()).unwrap(), 0);
        assert_eq!(p.sector_index(&a(1, 2)).unwrap(), 1);
        assert!(matches!(p.sector_index(&a(1, 3)), Err(Error::OnRay(_))));
        assert_eq!(p.value_sector_index(), Some(1));

        let r = Portrait::from_cycle(2, &[a(1, 7), a(2, 7), a(4, 7)]).unwrap();
        assert_eq!(r.sectors()[0], Arc::between(&a(4, 7), &a(1, 7)));
        assert_eq!(r.sectors()[r.sector_index(&a(3, 7)).unwrap()], Arc::between(&a(2, 7), &a(4, 7)));
        assert_eq!(r.sectors()[r.value_sector_index().unwrap()], Arc::between(&a(1, 7), &a(2, 7)));
    }
}
