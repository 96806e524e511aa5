mod support;

use num_complex::Complex;
use proptest::prelude::*;
use puzzlekit::lab::{
    lab_options, piece_modulus, return_domains, verify_children_lemma, verify_lemma_y, NestFragment,
};
use puzzlekit::modulus::richardson;
use puzzlekit::nest::{children, first_child, DEFAULT_ORBIT_BUDGET};
use puzzlekit::{
    favorite_nest, m_of_piece, modulus, modulus_with, AnnulusSpec, AnnulusSpec32, Error, GridKind, ModulusOptions,
};
use support::{fib_fixture, round_modulus};

type C = Complex<f64>;

fn square(side: f64, center: C) -> Vec<C> {
    let h = side / 2.0;
    // Four points per side so affine images stay well sampled.
    let corners = [C::new(-h, -h), C::new(h, -h), C::new(h, h), C::new(-h, h)];
    let mut out = Vec::new();
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        for k in 0..4 {
            out.push(center + a + (b - a) * (k as f64 / 4.0));
        }
    }
    out
}

fn frame(outer: f64, inner: f64) -> AnnulusSpec {
    AnnulusSpec::new(square(outer, C::new(0.0, 0.0)), square(inner, C::new(0.0, 0.0))).unwrap()
}

fn log_polar(n: usize) -> ModulusOptions<f64> {
    ModulusOptions::for_grid(n, GridKind::LogPolar)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn round_annulus_examples() {
    let wide = AnnulusSpec::round(C::new(0.0, 0.0), 1.0, std::f64::consts::TAU.exp(), 256).unwrap();
    let m = modulus_with(&wide, &log_polar(256)).unwrap();
    assert!(rel(m.value, 1.0) < 0.02, "{}", m.value);
    let narrow = AnnulusSpec::round(C::new(0.0, 0.0), 1.0, 2.0, 256).unwrap();
    for opts in [log_polar(256), ModulusOptions::for_grid(512, GridKind::Cartesian)] {
        let m = modulus_with(&narrow, &opts).unwrap();
        assert!(rel(m.value, 0.11032) < 0.02, "{:?}: {}", opts.kind, m.value);
        assert_eq!(m.grid_sizes.len(), 3);
        assert!(m.richardson_error.is_finite());
    }
}

#[test]
fn cartesian_round_annuli() {
    for lr in [0.5f64, 1.0, 2.0, 3.0] {
        let a = AnnulusSpec::round(C::new(0.3, -0.2), 0.9 * (-lr).exp(), 0.9, 512).unwrap();
        let m = modulus(&a, 512).unwrap();
        let exact = lr / std::f64::consts::TAU;
        assert!(rel(m.value, exact) < 0.02, "log(R/r) = {lr}: {} vs {exact}", m.value);
        assert!(m.converged);
    }
}

/// The same frame at four times the resolution, extrapolated, is the
/// reference value. The log-polar route must agree with it as well.
#[test]
fn square_frame_against_fine_grid() {
    let a = frame(4.0, 1.0);
    let coarse = modulus(&a, 128).unwrap();
    let fine = modulus(&a, 512).unwrap();
    assert!(rel(coarse.value, fine.value) < 0.02, "{} vs {}", coarse.value, fine.value);
    let lp = modulus_with(&a, &log_polar(256)).unwrap();
    assert!(rel(lp.value, fine.value) < 0.01, "{} vs {}", lp.value, fine.value);
    // The frame sits between the inscribed and circumscribed round annuli.
    assert!(fine.value > round_modulus(0.5 * 2f64.sqrt(), 2.0));
    assert!(fine.value < round_modulus(0.5, 2.0 * 2f64.sqrt()));
}

#[test]
fn richardson_on_a_second_order_sequence() {
    let exact = 0.75;
    let v: Vec<f64> = [32.0, 64.0, 128.0].iter().map(|n: &f64| exact + 3.0 / (n * n)).collect();
    let (ext, err, order) = richardson(&v);
    assert!((ext - exact).abs() < 1e-12);
    assert!((order - 2.0).abs() < 1e-9);
    assert!(err < 2e-4);
    // Differences that grow are not extrapolated.
    let (ext, err, order) = richardson(&[0.1617f64, 0.1615, 0.1608]);
    assert_eq!((ext, order), (0.1608, 0.0));
    assert!((err - 0.0007).abs() < 1e-12);
}

#[test]
fn degenerate_and_invalid_annuli() {
    let outer = square(2.0, C::new(0.0, 0.0));
    assert!(matches!(AnnulusSpec::new(outer.clone(), square(3.0, C::new(0.0, 0.0))), Err(Error::InvalidInput(_))));
    assert!(matches!(AnnulusSpec::new(outer.clone(), square(1.0, C::new(5.0, 0.0))), Err(Error::InvalidInput(_))));
    // Inner square reaching the outer edge.
    let touching = AnnulusSpec::new(outer, square(1.0, C::new(0.5 - 1e-9, 0.0))).unwrap();
    assert!(matches!(modulus(&touching, 64), Err(Error::DegenerateAnnulus(_))));
    assert!(modulus_with(&frame(4.0, 1.0), &ModulusOptions { grids: vec![], ..ModulusOptions::default() }).is_err());
}

#[test]
fn grotzsch_superadditivity() {
    let opts = log_polar(256);
    let whole = modulus_with(&frame(4.0, 1.0), &opts).unwrap().value;
    let inner = modulus_with(&frame(2.0, 1.0), &opts).unwrap().value;
    let outer = modulus_with(&frame(4.0, 2.0), &opts).unwrap().value;
    assert!(whole >= (inner + outer) * 0.97, "{whole} < {inner} + {outer}");
}

#[test]
fn f32_round_annulus() {
    let a = AnnulusSpec32::round(Complex::new(0.0f32, 0.0), 1.0, 4.0, 128).unwrap();
    let m = modulus_with(&a, &ModulusOptions::for_grid(128, GridKind::LogPolar)).unwrap();
    let exact = (4.0f32).ln() / std::f32::consts::TAU;
    assert!((m.value - exact).abs() / exact < 0.02, "{}", m.value);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn round_annuli_are_exact(lr in 0.5f64..3.0, r in 0.05f64..2.0, cx in -1.0f64..1.0) {
        let a = AnnulusSpec::round(C::new(cx, 0.5), r, r * lr.exp(), 256).unwrap();
        let m = modulus_with(&a, &log_polar(128)).unwrap();
        prop_assert!(rel(m.value, lr / std::f64::consts::TAU) < 0.02);
    }

    #[test]
    fn conformal_invariance(s in 0.2f64..5.0, th in 0.0f64..6.3, bx in -3.0f64..3.0, by in -3.0f64..3.0) {
        let a = frame(3.0, 1.0);
        let opts = log_polar(256);
        let m0 = modulus_with(&a, &opts).unwrap().value;
        let m1 = modulus_with(&a.affine(Complex::from_polar(s, th), C::new(bx, by)), &opts).unwrap().value;
        prop_assert!(rel(m1, m0) < 0.01, "{} vs {}", m1, m0);
    }

    #[test]
    fn monotone_in_the_outer_curve(inner in 0.3f64..1.0, gap in 0.3f64..2.0, extra in 0.1f64..2.0) {
        let opts = log_polar(128);
        let small = modulus_with(&frame(inner + gap, inner), &opts).unwrap().value;
        let big = modulus_with(&frame(inner + gap + extra, inner), &opts).unwrap().value;
        prop_assert!(small <= big * 1.02, "{} > {}", small, big);
    }
}

/// Return domains of a critical piece: each maps onto the piece under
/// its return time and meets the piece at no earlier time. Every return
/// found by scanning a grid of angles is listed.
#[test]
fn return_domains_match_orbit_scan() {
    let fx = fib_fixture(2);
    let sym = &fx.sym;
    let d = sym.degree();
    for n in [0, 2, 7] {
        let q = sym.critical_label(n).unwrap();
        let max_time = 10;
        let doms = return_domains(sym, &q, max_time, 1 << 20).unwrap();
        let mut listed: Vec<(usize, puzzlekit::Label)> = doms.others.clone();
        listed.push((doms.central.map_time, doms.central.child.clone()));
        for (r, dom) in &doms.others {
            assert_eq!(dom.depth, n + r);
            assert!(q.contains_label(dom));
            let mut img = dom.clone();
            for _ in 1..*r {
                img = img.image(d);
                assert!(!q.contains_label(&img) && img != q);
            }
            assert_eq!(img.image(d), q);
        }
        let times: Vec<usize> = doms.others.iter().map(|(r, _)| *r).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let sampled = support::sampled_return_domains(sym, &q, 14, max_time);
        for s in &sampled {
            assert!(listed.contains(s), "depth {n}: sampled domain {:?} not listed", s);
        }
        assert!(sampled.len() * 2 >= listed.len().min(8), "grid too coarse for depth {n}");
    }
}

#[test]
fn m_of_piece_is_a_running_minimum() {
    let fx = fib_fixture(2);
    let sym = &fx.sym;
    let opts = lab_options();
    let q = sym.critical_label(2).unwrap();
    let u = first_child(sym, &q, DEFAULT_ORBIT_BUDGET).unwrap().child;
    let central = piece_modulus(&fx.puzzle, &q, &u, &opts).unwrap().value;
    let mut last = f64::INFINITY;
    for budget in [0, 2, 6] {
        let m = m_of_piece(&fx.puzzle, &q, 24, budget, &opts).unwrap();
        assert!(m.value() <= central + 1e-12);
        assert!(m.value() <= last + 1e-12, "budget {budget}: {} > {last}", m.value());
        assert!(m.visited <= budget + 1);
        assert_eq!(m.solved + m.skipped, m.visited);
        last = m.value();
    }
    assert!(last >= 0.0);
}

#[test]
fn children_lemma_on_a_fibonacci_piece() {
    let fx = fib_fixture(2);
    let sym = &fx.sym;
    let v = sym.critical_label(2).unwrap();
    let kids = children(sym, &v, 20).unwrap();
    let child = kids.iter().find(|k| !k.kind.first).unwrap();
    let row = verify_children_lemma(&fx.puzzle, child, 24, 4, &lab_options()).unwrap();
    assert_eq!(row.passed, Some(true), "{row:?}");
    assert!(row.rhs > 0.0);
    let mut fake = child.clone();
    fake.map_time += 1;
    assert!(matches!(
        verify_children_lemma(&fx.puzzle, &fake, 24, 4, &lab_options()),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn lemma_y_gates_its_hypotheses() {
    let fx = fib_fixture(2);
    let sym = &fx.sym;
    let nest = favorite_nest(sym, 4, DEFAULT_ORBIT_BUDGET, 200).unwrap();
    let frag = NestFragment::from_nest(&nest, 1).unwrap();
    // The first child of Y^2 is Y^5, which is not inside Q = Y^7.
    let v = sym.critical_label(2).unwrap();
    let row = verify_lemma_y(&fx.puzzle, &frag, &v, 40, 4, &lab_options()).unwrap();
    assert_eq!(row.passed, None, "{row:?}");
    assert!(row.note.contains("not inside"), "{}", row.note);
    let mut broken = NestFragment::from_nest(&nest, 0).unwrap();
    broken.p = broken.q1.clone();
    let q = broken.q.clone();
    let row = verify_lemma_y(&fx.puzzle, &broken, &q, 40, 4, &lab_options()).unwrap();
    assert_eq!(row.passed, None);
    assert!(row.note.contains("first child"), "{}", row.note);
}

