//! Acceptance criteria 1-8, one line each. Exits non-zero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::time::Instant;

use clap::Parser;
use num_bigint::BigInt;
use num_complex::Complex;
use serde_json::Value;

use puzzlekit::dynamics::{apply_map, classify_alpha};
use puzzlekit::geometry::self_intersections;
use puzzlekit::modulus::{modulus_with, GridKind, ModulusOptions};
use puzzlekit::nest::DEFAULT_ORBIT_BUDGET;
use puzzlekit::{critical_value_labels, favorite_nest, Angle, AnnulusSpec, Parameter, Portrait, SymbolicPuzzle};
use puzzlekit_cli::{execute, Cli};

type Check = Result<String, String>;

fn cli(args: &[&str]) -> (Value, String) {
    let cli = Cli::try_parse_from(std::iter::once("puzzlekit").chain(args.iter().copied())).unwrap();
    let out = execute(&cli);
    let text = serde_json::to_string_pretty(&out.report).unwrap();
    (out.report, text)
}

fn fib_args(gap: usize) -> (String, String) {
    let (_, c, bits) = support::FIB.iter().copied().find(|f| f.0 == gap).unwrap();
    (format!("{c},0"), support::fib_angle(gap, bits).to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn round_annuli() -> Check {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    let opts = ModulusOptions::for_grid(512, GridKind::LogPolar);
    for i in 1..=10 {
        let lr = 0.5 * i as f64;
        let a = AnnulusSpec::round(Complex::new(0.25, -0.1), 0.8, 0.8 * lr.exp(), 512).map_err(|e| e.to_string())?;
        let t = Instant::now();
        let m = modulus_with(&a, &opts).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let exact = lr / std::f64::consts::TAU;
        let err = (m.value - exact).abs() / exact;
        ensure(err < 0.02, || format!("log(R/r) = {lr}: {} vs {exact}", m.value))?;
        ensure(secs < 10.0, || format!("log(R/r) = {lr}: {secs:.1} s"))?;
        worst = worst.max(err);
        slowest = slowest.max(secs);
    }
    Ok(format!("10 annuli, worst relative error {worst:.2e}, slowest solve {slowest:.2} s"))
}

fn portraits() -> Check {
    let cases: [(&str, (f64, f64), u32, usize); 4] = [
        ("1/2", (-1.0, 0.0), 2, 1),
        ("1/3", (-0.12256116687665362, 0.7448617666197442), 3, 1),
        ("2/3", (-0.12256116687665362, -0.7448617666197442), 3, 2),
        ("1/4", (0.2822713907669139, 0.5300606175785253), 4, 1),
    ];
    let mut parts = Vec::new();
    for (name, (re, im), q, p) in cases {
        let t = Instant::now();
        let param = Parameter::new(2, Complex::new(re, im)).map_err(|e| e.to_string())?;
        let info = classify_alpha(&param, 10).map_err(|e| e.to_string())?;
        let den = (1u64 << q) - 1;
        let mut got: Vec<u64> = info
            .landing_angles
            .iter()
            .map(|a| {
                let scaled = a.numer() * BigInt::from(den) / a.denom();
                u64::try_from(scaled).unwrap()
            })
            .collect();
        got.sort_unstable();
        let brute = support::brute_portraits(q, p);
        ensure(brute.len() == 1 && brute.contains(&got), || format!("rotation {name}: {got:?} vs {brute:?}"))?;
        let secs = t.elapsed().as_secs_f64();
        ensure(secs < 30.0, || format!("rotation {name}: {secs:.1} s"))?;
        parts.push(format!("{name}: {got:?}/{den}"));
    }
    Ok(parts.join(", "))
}

fn symbolic_geometric() -> Check {
    let mut compared = 0;
    for gap in [2, 3, 4] {
        let fx = support::fib_fixture(gap);
        let values = critical_value_labels(&fx.sym, 15).map_err(|e| e.to_string())?;
        let mut z = Complex::new(0.0, 0.0);
        for k in 1..=15usize {
            z = apply_map(&fx.param, z);
            let path = fx.puzzle.locate_path(z, 15).map_err(|e| format!("gap {gap}, f^{k}(0): {e}"))?;
            for (n, got) in path.iter().enumerate() {
                let want = if k == 1 {
                    values[&n].clone()
                } else {
                    fx.sym.piece(n, &fx.sym.orbit_angle(k)).map_err(|e| e.to_string())?
                };
                ensure(*got == want, || format!("gap {gap}, f^{k}(0), depth {n}: {got} vs {want}"))?;
                compared += 1;
            }
        }
    }
    Ok(format!("3 parameters, {compared} labels of f^k(0), k <= 15, depth <= 15, all equal"))
}

fn verify_reports() -> Result<Vec<(usize, Value)>, String> {
    let mut out = Vec::new();
    for gap in [2, 3] {
        let (c, a) = fib_args(gap);
        let (r, _) = cli(&["verify", "--c", &c, "--seed-angle", &a, "--levels", "4", "--domains", "8"]);
        if let Some(e) = r.get("error") {
            return Err(format!("gap {gap}: {e}"));
        }
        out.push((gap, r));
    }
    Ok(out)
}

fn inequalities(reports: &[(usize, Value)]) -> Check {
    let mut parts = Vec::new();
    for (gap, r) in reports {
        let s = &r["summary"];
        let n = r["nest"]["entries"].as_array().map_or(0, |v| v.len());
        ensure(n >= 3, || format!("gap {gap}: nest has {n} levels"))?;
        ensure(s["failed"] == 0, || format!("gap {gap}: {s}"))?;
        ensure(s["passed"].as_u64().unwrap_or(0) > 0, || format!("gap {gap}: nothing measured"))?;
        let margins: Vec<f64> = r["rows"]
            .as_array()
            .unwrap()
            .iter()
            .filter_map(|row| row["margin"].as_f64())
            .collect();
        let least = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        parts.push(format!(
            "gap {gap}: {} passed, {} inconclusive, {} skipped, least margin {least:.3}",
            s["passed"], s["inconclusive"], s["skipped"]
        ));
    }
    Ok(parts.join("; "))
}

fn nest_invariants() -> Check {
    let mut levels = 0;
    let mut nests = 0;
    let mut inconclusive = 0;
    let mut check = |sym: &SymbolicPuzzle, m: usize| -> Result<(), String> {
        let nest = match favorite_nest(sym, m, DEFAULT_ORBIT_BUDGET, 200) {
            Ok(n) => n,
            Err(e) if e.is_inconclusive() => {
                inconclusive += 1;
                return Ok(());
            }
            Err(e) => return Err(e.to_string()),
        };
        let failures = nest.check_invariants(sym, DEFAULT_ORBIT_BUDGET).map_err(|e| e.to_string())?;
        ensure(failures.is_empty(), || format!("{}: {failures:?}", sym.value_angle()))?;
        for e in &nest.entries {
            ensure(e.q_depth() < e.p_depth(), || format!("{}: P^i not deeper than Q^i", sym.value_angle()))?;
        }
        for w in nest.entries.windows(2) {
            ensure(w[0].p_depth() < w[1].q_depth(), || format!("{}: Q^(i+1) not deeper than P^i", sym.value_angle()))?;
        }
        if !nest.entries.is_empty() {
            levels += nest.entries.len();
            nests += 1;
        }
        Ok(())
    };
    let basilica = Portrait::from_cycle(2, &[Angle::new(1, 3).unwrap(), Angle::new(2, 3).unwrap()]).unwrap();
    for gap in [2, 3, 4] {
        let (_, _, bits) = support::FIB.iter().copied().find(|f| f.0 == gap).unwrap();
        check(&SymbolicPuzzle::new(basilica.clone(), support::fib_angle(gap, bits)).unwrap(), 10)?;
    }
    // Dyadic value angles spread over the basilica and rabbit wakes.
    let wakes = [
        (vec![(1, 3), (2, 3)], (1, 3), (2, 3)),
        (vec![(1, 7), (2, 7), (4, 7)], (1, 7), (2, 7)),
    ];
    for (cycle, lo, hi) in wakes {
        let angles: Vec<Angle> = cycle.iter().map(|&(n, d)| Angle::new(n, d).unwrap()).collect();
        let portrait = Portrait::from_cycle(2, &angles).unwrap();
        let den = BigInt::from(1u64 << 40);
        let start = BigInt::from(lo.0) * &den / lo.1 + 1;
        let width = BigInt::from(hi.0) * &den / hi.1 - &start;
        for i in 1..=40u64 {
            // Golden-ratio stepping through the wake.
            let frac = (i as f64 * 0.6180339887498949).fract();
            let off = BigInt::from((frac * 1e9) as u64) * &width / 1_000_000_000u64;
            let t = Angle::new(&start + off, den.clone()).unwrap();
            if let Ok(sym) = SymbolicPuzzle::new(portrait.clone(), t) {
                check(&sym, 6)?;
            }
        }
    }
    Ok(format!(
        "{nests} non-empty nests with {levels} levels, all invariants hold; {inconclusive} inconclusive seeds"
    ))
}

fn moduli_profile(reports: &[(usize, Value)]) -> Check {
    let mut parts = Vec::new();
    for (gap, r) in reports {
        let p = &r["moduli_profile"];
        let measured = p["levels"].as_array().unwrap().iter().filter(|l| l["modulus"].is_number()).count();
        if measured < 4 {
            parts.push(format!("gap {gap}: {measured} measured levels, not applicable"));
            continue;
        }
        let floor = p["floor"].as_f64().unwrap_or(0.0);
        ensure(floor > 0.0, || format!("gap {gap}: floor {floor}"))?;
        ensure(p["decays_below_tenth"] == false, || format!("gap {gap}: decays below 10%"))?;
        parts.push(format!("gap {gap}: floor {floor:.4} over {measured} levels, no decay"));
    }
    ensure(parts.iter().any(|p| p.contains("floor")), || "no parameter with 4 measured levels".into())?;
    Ok(parts.join("; "))
}

fn equivariance() -> Check {
    let mut pieces = 0;
    let mut worst: f64 = 0.0;
    for gap in [2, 3, 4] {
        let fx = support::fib_fixture(gap);
        let levels = fx.puzzle.refine_to_depth(6).map_err(|e| e.to_string())?;
        let mut check = |p: &puzzlekit::PuzzlePiece| -> Result<(), String> {
            ensure(self_intersections(&p.boundary) == 0, || format!("gap {gap}: {} not simple", p.label))?;
            if p.depth > 0 {
                let (dist, tol) = support::image_defect(&fx.puzzle, p);
                ensure(dist < tol, || format!("gap {gap}: {} image off by {dist:.2e} > {tol:.2e}", p.label))?;
                worst = worst.max(dist / tol);
            }
            pieces += 1;
            Ok(())
        };
        for k in 0..levels.len() {
            for p in &levels[k].pieces {
                check(p)?;
                if k == 0 {
                    continue;
                }
                let parents: Vec<_> = levels[k - 1].pieces.iter().filter(|q| q.label.contains_label(&p.label)).collect();
                ensure(parents.len() == 1, || format!("gap {gap}: {} has {} parents", p.label, parents.len()))?;
                let probe = support::interior_point(p);
                let holders = levels[k - 1].pieces.iter().filter(|q| q.contains(probe)).count();
                ensure(holders == 1 && parents[0].contains(probe), || format!("gap {gap}: {} not nested", p.label))?;
            }
        }
        for z in [Complex::new(0.0, 0.0), fx.param.c] {
            let path = fx.puzzle.locate_path(z, 15).map_err(|e| e.to_string())?;
            for w in path.windows(2) {
                ensure(w[0].contains_label(&w[1]), || format!("gap {gap}: {} not inside {}", w[1], w[0]))?;
                let p = fx.puzzle.piece(&w[1]).map_err(|e| e.to_string())?;
                check(&p)?;
            }
        }
    }
    Ok(format!("{pieces} pieces to depth 15, worst image distance {worst:.2e} of the tolerance"))
}

fn comparator() -> Check {
    let (c, a) = fib_args(2);
    let same = ["compare", "--c", &c, "--seed-angle", &a, "--c2", &c, "--seed-angle2", &a, "--depth", "15", "--skip-moduli"];
    let (r1, t1) = cli(&same);
    let (_, t2) = cli(&same);
    let cmp = &r1["comparison"];
    ensure(cmp["first_divergence"].is_null() && cmp["agreement_depth"] == 15, || format!("self comparison: {cmp}"))?;
    ensure(t1 == t2, || "reruns differ".into())?;
    let diff = [
        "compare", "--c", "-1,0", "--seed-angle", "1/2", "--c2", "-0.12256116687665362,0.7448617666197442",
        "--seed-angle2", "9/56", "--depth", "1", "--skip-moduli",
    ];
    let (r, t3) = cli(&diff);
    let (_, t4) = cli(&diff);
    ensure(r["comparison"]["first_divergence"] == 0, || format!("different wakes: {}", r["comparison"]))?;
    ensure(t3 == t4, || "reruns differ".into())?;
    Ok("self comparison agrees to depth 15, basilica vs rabbit diverge at depth 0, reruns byte-identical".into())
}

fn main() {
    let started = Instant::now();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, r: Check| {
        match r {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {why}");
            }
        }
    };
    report(1, "modulus solver on round annuli", round_annuli());
    report(2, "rotation portraits", portraits());
    report(3, "symbolic and geometric labels", symbolic_geometric());
    let verified = verify_reports();
    report(
        4,
        "modulus inequalities",
        verified.as_ref().map_err(Clone::clone).and_then(|r| inequalities(r)),
    );
    report(5, "nest invariants", nest_invariants());
    report(
        6,
        "nest moduli floor",
        verified.as_ref().map_err(Clone::clone).and_then(|r| moduli_profile(r)),
    );
    report(7, "equivariance and refinement", equivariance());
    report(8, "comparator", comparator());
    println!("acceptance: {} of 8 passed in {:.0} s", 8 - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
