mod support;

use std::collections::BTreeSet;

use approx::assert_abs_diff_eq;
use num_complex::Complex;
use proptest::prelude::*;
use puzzlekit::dynamics::{
    apply_map, classify_alpha_portrait, classify_beta, equipotential, fixed_points, green, trace_ray, trace_ray_with,
    value_angle_outside, RayOptions,
};
use puzzlekit::geometry::winding_number;
use puzzlekit::{classify_alpha, Angle, Error, Parameter, Parameter32};

type C = Complex<f64>;

fn par(d: u32, re: f64, im: f64) -> Parameter {
    Parameter::new(d, C::new(re, im)).unwrap()
}

fn a(n: i64, d: i64) -> Angle {
    Angle::new(n, d).unwrap()
}

const RABBIT: (f64, f64) = (-0.12256116687665362, 0.7448617666197442);

fn golden_alpha() -> C {
    C::new((1.0 - 5f64.sqrt()) / 2.0, 0.0)
}

/// `G(z)` via `log|z| + sum 2^-(k+1) log|1 + c u_k^2|` with `u_k = 1/z_k`,
/// which never overflows.
fn green_oracle(c: C, z: C, terms: usize) -> f64 {
    let mut g = z.norm().ln();
    let mut u = C::new(1.0, 0.0) / z;
    let mut w = 0.5;
    for _ in 0..terms {
        let u2 = u * u;
        let s = C::new(1.0, 0.0) + c * u2;
        g += w * s.norm().ln();
        u = u2 / s;
        w *= 0.5;
    }
    g
}

#[test]
fn apply_map_examples() {
    assert_eq!(apply_map(&par(2, 0.0, 0.0), C::new(2.0, 0.0)), C::new(4.0, 0.0));
    assert_eq!(apply_map(&par(3, 0.0, 1.0), C::new(0.0, 0.0)), C::new(0.0, 1.0));
    let z = golden_alpha();
    assert_abs_diff_eq!((apply_map(&par(2, -1.0, 0.0), z) - z).norm(), 0.0, epsilon = 1e-15);
    assert!(Parameter::new(1, C::new(0.0, 0.0)).is_err());
}

#[test]
fn green_examples() {
    let r = |p: &Parameter| p.escape_radius();
    let p0 = par(2, 0.0, 0.0);
    assert_abs_diff_eq!(green(&p0, C::new(2.0, 0.0), 1000, r(&p0)), 2f64.ln(), epsilon = 1e-12);
    assert_eq!(green(&p0, C::new(0.5, 0.0), 1000, r(&p0)), 0.0);
    let p = par(2, -1.0, 0.0);
    let z = C::new(10.0, 0.0);
    let oracle = green_oracle(p.c, z, 200);
    assert_abs_diff_eq!(oracle, 2.297534414863125, epsilon = 1e-12);
    assert_abs_diff_eq!(green(&p, z, 1000, r(&p)), oracle, epsilon = 1e-9);
}

#[test]
fn green_matches_oracle_off_axis() {
    for (c, z) in [
        (C::new(-1.0, 0.0), C::new(0.3, 1.9)),
        (C::new(RABBIT.0, RABBIT.1), C::new(-1.2, 0.4)),
        (C::new(0.0, 1.0), C::new(2.0, -2.0)),
        (C::new(-1.9, 0.0), C::new(0.0, 1.5)),
    ] {
        let p = Parameter::new(2, c).unwrap();
        let g = green(&p, z, 10_000, p.escape_radius());
        assert_abs_diff_eq!(g, green_oracle(c, z, 200), epsilon = 1e-9);
    }
}

#[test]
fn rays_of_z_squared_are_radial() {
    let p = par(2, 0.0, 0.0);
    let tr = trace_ray_with(
        &p,
        &a(0, 1),
        &RayOptions {
            h_start: 2.0,
            h_stop: 0.01,
            stop_on_landing: false,
            ..RayOptions::default()
        },
    )
    .unwrap();
    assert!(tr.points.len() > 10);
    for (z, h) in tr.points.iter().zip(&tr.potentials) {
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(z.re, h.exp(), epsilon = 1e-9 * h.exp());
    }
    let tr = trace_ray_with(
        &p,
        &a(1, 2),
        &RayOptions {
            h_start: 2.0,
            h_stop: 0.01,
            stop_on_landing: false,
            ..RayOptions::default()
        },
    )
    .unwrap();
    for (z, h) in tr.points.iter().zip(&tr.potentials) {
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(z.re, -h.exp(), epsilon = 1e-9 * h.exp());
    }
}

#[test]
fn basilica_ray_lands_at_alpha() {
    let p = par(2, -1.0, 0.0);
    let tr = trace_ray(&p, &a(1, 3), 2.0, 1e-40, 8).unwrap();
    assert!(tr.landed);
    assert!(tr.potentials.windows(2).all(|w| w[1] < w[0]));
    let land = tr.landing_point.unwrap();
    assert!((land - golden_alpha()).norm() < 1e-6, "{land}");
}

#[test]
fn ray_arguments_are_validated() {
    let p = par(2, -1.0, 0.0);
    assert!(matches!(trace_ray(&p, &a(1, 3), 0.5, 1.0, 8), Err(Error::InvalidInput(_))));
    assert!(matches!(trace_ray(&p, &a(1, 3), 1.0, 0.0, 8), Err(Error::InvalidInput(_))));
}

#[test]
fn ray_that_cannot_land_by_h_stop_reports_not_landed() {
    let p = par(2, -1.0, 0.0);
    assert!(matches!(trace_ray(&p, &a(1, 3), 2.0, 0.5, 8), Err(Error::NotLanded { .. })));
}

fn sorted(mut v: Vec<C>) -> Vec<C> {
    v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    v
}

#[test]
fn fixed_point_examples() {
    let f = fixed_points(&par(2, 0.0, 0.0)).unwrap();
    let z = sorted(f.iter().map(|x| x.location).collect());
    assert_abs_diff_eq!(z[0].norm(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!((z[1] - C::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
    for x in &f {
        assert_abs_diff_eq!((x.multiplier - x.location * 2.0).norm(), 0.0, epsilon = 1e-12);
    }

    let f = fixed_points(&par(2, -1.0, 0.0)).unwrap();
    let s5 = 5f64.sqrt();
    let z = sorted(f.iter().map(|x| x.location).collect());
    assert_abs_diff_eq!((z[0] - C::new((1.0 - s5) / 2.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!((z[1] - C::new((1.0 + s5) / 2.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
    let m: Vec<f64> = sorted(f.iter().map(|x| x.multiplier).collect()).iter().map(|m| m.re).collect();
    assert_abs_diff_eq!(m[0], 1.0 - s5, epsilon = 1e-12);
    assert_abs_diff_eq!(m[1], 1.0 + s5, epsilon = 1e-12);

    let f = fixed_points(&par(3, 0.0, 0.0)).unwrap();
    let z = sorted(f.iter().map(|x| x.location).collect());
    for (got, want) in z.iter().zip([-1.0, 0.0, 1.0]) {
        assert_abs_diff_eq!((got - C::new(want, 0.0)).norm(), 0.0, epsilon = 1e-12);
    }
}

#[test]
fn classify_alpha_basilica() {
    let info = classify_alpha(&par(2, -1.0, 0.0), 3).unwrap();
    assert!((info.location - golden_alpha()).norm() < 1e-12);
    assert!(info.multiplier.norm() > 1.0);
    assert_eq!(info.landing_angles, vec![a(1, 3), a(2, 3)]);
    // Oracle: the unique doubling cycle with rotation 1/2.
    assert_eq!(support::brute_portraits(2, 1), [vec![1u64, 2]].into_iter().collect::<BTreeSet<_>>());
}

#[test]
fn classify_alpha_in_the_third_limb() {
    let (info, portrait) = classify_alpha_portrait(&par(2, RABBIT.0, RABBIT.1), 10).unwrap();
    assert_eq!(portrait.rotation, (1, 3));
    assert_eq!(info.landing_angles, vec![a(1, 7), a(2, 7), a(4, 7)]);
    assert!(support::brute_portraits(3, 1).contains(&vec![1u64, 2, 4]));
    let disc = (C::new(1.0, 0.0) - p_c(RABBIT) * 4.0).sqrt();
    let roots = [(C::new(1.0, 0.0) - disc) / 2.0, (C::new(1.0, 0.0) + disc) / 2.0];
    assert!(roots.iter().any(|r| (r - info.location).norm() < 1e-10));

    let (_, conj) = classify_alpha_portrait(&par(2, RABBIT.0, -RABBIT.1), 10).unwrap();
    assert_eq!(conj.angles, vec![a(3, 7), a(5, 7), a(6, 7)]);
    assert_eq!(conj.rotation, (2, 3));
}

fn p_c(c: (f64, f64)) -> C {
    C::new(c.0, c.1)
}

#[test]
fn classify_alpha_rejects_the_main_component() {
    assert!(matches!(
        classify_alpha(&par(2, 0.1, 0.0), 10),
        Err(Error::InMainComponent { .. })
    ));
    assert!(matches!(
        classify_alpha(&par(3, 0.0, 0.0), 10),
        Err(Error::InMainComponent { .. })
    ));
}

#[test]
fn beta_carries_the_zero_ray() {
    let b = classify_beta(&par(2, -1.0, 0.0)).unwrap().unwrap();
    assert_abs_diff_eq!((b.location - C::new((1.0 + 5f64.sqrt()) / 2.0, 0.0)).norm(), 0.0, epsilon = 1e-10);
}

#[test]
fn equipotential_examples() {
    let ring = equipotential(&par(2, 0.0, 0.0), 2f64.ln(), 64).unwrap();
    assert_eq!(ring.len(), 64);
    for z in &ring {
        assert_abs_diff_eq!(z.norm(), 2.0, epsilon = 1e-9);
    }
    for d in [2u32, 3, 5] {
        for z in equipotential(&par(d, 0.0, 0.0), 0.3, 32).unwrap() {
            assert_abs_diff_eq!(z.norm(), 0.3f64.exp(), epsilon = 1e-9);
        }
    }
    let p = par(2, -1.0, 0.0);
    let curve = equipotential(&p, 1.0, 128).unwrap();
    for fp in fixed_points(&p).unwrap() {
        assert_eq!(winding_number(&curve, fp.location), 1);
    }
    assert!(equipotential(&p, 0.0, 16).is_err());
}

#[test]
fn value_angle_on_the_real_parameter_ray() {
    assert_eq!(value_angle_outside(&par(2, -2.1, 0.0)).unwrap(), a(1, 2));
    assert_eq!(value_angle_outside(&par(2, 0.5, 0.0)).unwrap(), a(0, 1));
    assert!(value_angle_outside(&par(2, -1.0, 0.0)).is_err());
}

#[test]
fn value_angle_near_a_real_parameter_follows_its_kneading() {
    let (_, c, bits) = support::FIB[0];
    let t = support::fib_angle(2, bits);
    let theta = value_angle_outside(&par(2, c, 1e-6)).unwrap();
    // Agreement in the leading binary digits.
    let diff = (theta.to_real::<f64>() - t.to_real::<f64>()).abs();
    assert!(diff < 1e-4, "{theta} vs {t}");
}

#[test]
fn f32_agrees_with_f64() {
    let p32 = Parameter32::new(2, Complex::new(-1.0f32, 0.0)).unwrap();
    let p64 = par(2, -1.0, 0.0);
    let z = Complex::new(1.5f32, 0.5);
    let g32 = green(&p32, z, 1000, p32.escape_radius());
    let g64 = green(&p64, C::new(1.5, 0.5), 1000, p64.escape_radius());
    assert_abs_diff_eq!(g32 as f64, g64, epsilon = 1e-5);
    let info = classify_alpha(&p32, 3).unwrap();
    assert_eq!(info.landing_angles, vec![a(1, 3), a(2, 3)]);
    assert!(((info.location.re as f64) - golden_alpha().re).abs() < 1e-5);
    let tr = trace_ray_with(
        &p32,
        &a(1, 3),
        &RayOptions {
            h_start: 2.0f32,
            h_stop: 0.05,
            stop_on_landing: false,
            ..RayOptions::default()
        },
    )
    .unwrap();
    let tr64 = trace_ray_with(
        &p64,
        &a(1, 3),
        &RayOptions {
            h_start: 2.0,
            h_stop: 0.05,
            stop_on_landing: false,
            ..RayOptions::default()
        },
    )
    .unwrap();
    let z32 = tr.last_point();
    let z64 = tr64.last_point();
    assert!((C::new(z32.re as f64, z32.im as f64) - z64).norm() < 1e-4);
}

fn sample_c() -> impl Strategy<Value = C> {
    prop_oneof![
        Just(C::new(-1.0, 0.0)),
        Just(C::new(RABBIT.0, RABBIT.1)),
        Just(C::new(0.0, 1.0)),
        Just(C::new(support::FIB[0].1, 0.0)),
        (-1.8f64..-0.8, -0.2f64..0.2).prop_map(|(x, y)| C::new(x, y)),
    ]
}

fn ray_angle() -> impl Strategy<Value = Angle> {
    (0i64..997).prop_map(|k| a(k, 997))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ray_points_sit_on_their_equipotential(c in sample_c(), t in ray_angle()) {
        let p = Parameter::new(2, c).unwrap();
        let tr = trace_ray_with(&p, &t, &RayOptions {
            h_start: 2.0,
            h_stop: 1e-3,
            stop_on_landing: false,
            keep_partial: true,
            ..RayOptions::default()
        }).unwrap();
        prop_assert!(tr.potentials.windows(2).all(|w| w[1] < w[0]));
        for (z, h) in tr.points.iter().zip(&tr.potentials) {
            let g = green_oracle(c, *z, 200);
            prop_assert!((g - h).abs() < 1e-8 * h.max(1.0), "G={} h={}", g, h);
        }
    }

    #[test]
    fn rays_are_equivariant(c in sample_c(), t in ray_angle()) {
        let p = Parameter::new(2, c).unwrap();
        let opts = |h: f64| RayOptions { h_start: h, h_stop: 0.01 * h, stop_on_landing: false, keep_partial: true, ..RayOptions::default() };
        // Starting heights in ratio d put both traces on matching potential grids.
        let tr = trace_ray_with(&p, &t, &opts(4.0)).unwrap();
        let img = trace_ray_with(&p, &t.times(2), &opts(8.0)).unwrap();
        let mut matched = 0;
        for ((z, h), (w, hw)) in tr.points.iter().zip(&tr.potentials).zip(img.points.iter().zip(&img.potentials)) {
            if (hw - 2.0 * h).abs() > 1e-12 * hw {
                continue;
            }
            matched += 1;
            let fz = apply_map(&p, *z);
            prop_assert!((fz - w).norm() < 1e-6 * (1.0 + w.norm()), "h={}: {} vs {}", h, fz, w);
        }
        prop_assert!(matched >= 20, "only {} samples on matching potentials", matched);
    }

    #[test]
    fn fixed_point_residuals(d in 2u32..6, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let p = Parameter::new(d, C::new(re, im)).unwrap();
        let f = fixed_points(&p).unwrap();
        prop_assert_eq!(f.len(), d as usize);
        for x in f {
            let z = x.location;
            prop_assert!((apply_map(&p, z) - z).norm() < 1e-10 * (1.0 + z.norm().powi(d as i32)));
        }
    }

    #[test]
    fn alpha_cycle_is_invariant(c in sample_c()) {
        let p = Parameter::new(2, c).unwrap();
        match classify_alpha_portrait(&p, 6) {
            Ok((info, portrait)) => {
                prop_assert_eq!(info.landing_angles.len(), portrait.q());
                prop_assert!(portrait.q() >= 2);
                prop_assert!(info.multiplier.norm() > 1.0);
                let own: BTreeSet<Angle> = info.landing_angles.iter().cloned().collect();
                let img: BTreeSet<Angle> = info.landing_angles.iter().map(|t| t.times(2)).collect();
                prop_assert_eq!(own, img);
            }
            Err(Error::InMainComponent { .. }) | Err(Error::PortraitNotFound { .. }) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
