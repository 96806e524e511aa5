//! Independent oracles and fixtures shared by the integration tests.
//!
//! Nothing here calls into the library's combinatorics or solvers except to
//! build fixtures; oracle values are recomputed from first principles.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc as Shared;

use num_bigint::BigInt;
use num_complex::Complex;
use puzzlekit::combinatorics::Label;
use puzzlekit::dynamics::{apply_map, classify_alpha_portrait};
use puzzlekit::geometry::directed_hausdorff;
use puzzlekit::{Angle, Parameter, Puzzle, PuzzleConfig, PuzzlePiece, SymbolicPuzzle};

/// Real Fibonacci-type maps: `(gap, c, binary digits of the value angle)`.
/// The `c` values come from a 60-digit bisection on the kneading sequence.
pub const FIB: [(usize, f64, usize); 3] = [
    (2, -1.8705286321646448, 160),
    (3, -1.969553097112151, 220),
    (4, -1.9925196612905338, 220),
];

/// Kneading sequence of the real map whose closest returns follow
/// `S_k = S_{k-1} + S_{max(k-gap, 0)}`. Symbol 1 means `f^i(0) < 0`.
pub fn kneading(gap: usize, n: usize) -> Vec<u8> {
    let mut s = vec![1usize];
    let mut nu = vec![1u8];
    let mut k = 1usize;
    while nu.len() < n {
        let back = s[k.saturating_sub(gap)];
        let mut block = nu[..back].to_vec();
        *block.last_mut().unwrap() ^= 1;
        nu.extend(block);
        s.push(s[k - 1] + s[k.saturating_sub(gap)]);
        k += 1;
    }
    nu.truncate(n);
    nu
}

/// External angle of the critical value with `n` binary digits, read off
/// the kneading sequence: the digits are the running parity of the symbols.
pub fn fib_angle(gap: usize, n: usize) -> Angle {
    let nu = kneading(gap, n);
    let mut bits = String::from("0");
    let mut u = 0u8;
    for v in &nu[..n - 1] {
        u ^= v;
        bits.push(if u == 1 { '1' } else { '0' });
    }
    let num = BigInt::parse_bytes(bits.as_bytes(), 2).unwrap() + 1;
    Angle::new(num, BigInt::from(1) << n).unwrap()
}

/// Real `c` in `[-2, -1.4]` whose critical itinerary starts with the gap
/// kneading sequence, by bisection in `f64`.
pub fn bisect_real_parameter(gap: usize) -> f64 {
    let nu = kneading(gap, 300);
    let (mut lo, mut hi) = (-2.0f64, -1.4f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let mut x = 0.0f64;
        let mut parity = 0u8;
        let mut verdict = None;
        for &want in &nu {
            x = x * x + mid;
            let b = u8::from(x < 0.0);
            if b != want {
                verdict = Some(b ^ parity);
                break;
            }
            parity ^= b;
        }
        match verdict {
            None => return mid,
            Some(0) => hi = mid,
            Some(_) => lo = mid,
        }
    }
    0.5 * (lo + hi)
}

/// Period-`q` cycles of doubling with rotation `p/q`, as sorted numerator
/// lists over `2^q - 1`.
pub fn brute_portraits(q: u32, p: usize) -> BTreeSet<Vec<u64>> {
    let den = (1u64 << q) - 1;
    let dbl = |k: u64| (2 * k) % den;
    let mut out = BTreeSet::new();
    for k in 1..den {
        let mut cyc = vec![k];
        let mut j = dbl(k);
        while j != k {
            cyc.push(j);
            j = dbl(j);
        }
        if cyc.len() != q as usize {
            continue;
        }
        cyc.sort_unstable();
        let q = cyc.len();
        if (0..q).all(|i| dbl(cyc[i]) == cyc[(i + p) % q]) {
            out.insert(cyc);
        }
    }
    out
}

/// Brute-force return domains of the critical piece `y`: first return times
/// of the midpoints of a uniform dyadic grid of angles inside `y`, kept when
/// the time is at most `max_time`.
pub fn sampled_return_domains(sym: &SymbolicPuzzle, y: &Label, grid_bits: u32, max_time: usize) -> HashSet<(usize, Label)> {
    let den = BigInt::from(1) << (grid_bits + 1);
    let mut out = HashSet::new();
    for k in 0..(1u64 << grid_bits) {
        let phi = Angle::new(BigInt::from(2 * k + 1), den.clone()).unwrap();
        if !y.contains(&phi) {
            continue;
        }
        let mut t = phi.clone();
        for r in 1..=max_time {
            t = t.times(sym.degree());
            if y.contains(&t) {
                if let Ok(dom) = sym.piece(y.depth + r, &phi) {
                    out.insert((r, dom));
                }
                break;
            }
        }
    }
    out
}

/// Exact modulus of the round annulus `r < |z| < R`.
pub fn round_modulus(r: f64, big_r: f64) -> f64 {
    (big_r / r).ln() / std::f64::consts::TAU
}

pub struct Fixture {
    pub param: Parameter,
    pub sym: Shared<SymbolicPuzzle>,
    pub puzzle: Puzzle,
}

/// Parameter `c` with the value angle `angle`; the portrait and `α` come
/// from the library's own landing detection.
pub fn fixture(c: Complex<f64>, angle: Angle) -> Fixture {
    let param = Parameter::new(2, c).unwrap();
    let (alpha, portrait) = classify_alpha_portrait(&param, 10).unwrap();
    let sym = Shared::new(SymbolicPuzzle::new(portrait, angle).unwrap());
    let puzzle = Puzzle::new(param.clone(), alpha.location, sym.clone(), PuzzleConfig::default()).unwrap();
    Fixture { param, sym, puzzle }
}

pub fn fib_fixture(gap: usize) -> Fixture {
    let (_, c, bits) = FIB.iter().copied().find(|f| f.0 == gap).unwrap();
    fixture(Complex::new(c, 0.0), fib_angle(gap, bits))
}

/// Distance from `f` of the boundary vertices of `piece` to the boundary of
/// its image piece, with the tolerance of five sampling steps.
pub fn image_defect(puzzle: &Puzzle, piece: &PuzzlePiece) -> (f64, f64) {
    let target = puzzle.piece(&piece.label.image(puzzle.param.degree)).unwrap();
    let img: Vec<Complex<f64>> = piece.boundary.iter().map(|&z| apply_map(&puzzle.param, z)).collect();
    let dist = directed_hausdorff(&img, std::slice::from_ref(&target.boundary));
    (dist, 5.0 * target.sampling_step.max(piece.sampling_step))
}

/// A point strictly inside a piece: the vertex centroid, or else the first
/// chord midpoint that is inside.
pub fn interior_point(p: &PuzzlePiece) -> Complex<f64> {
    let n = p.boundary.len();
    let centroid = p.boundary.iter().sum::<Complex<f64>>() / n as f64;
    if p.contains(centroid) {
        return centroid;
    }
    (0..n)
        .map(|i| (p.boundary[i] + p.boundary[(i + n / 2) % n]) * 0.5)
        .find(|&m| p.contains(m))
        .expect("no interior probe found")
}
