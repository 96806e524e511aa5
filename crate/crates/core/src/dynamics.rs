//! Iteration of `z^d + c`, Green's function, external rays and fixed points.

use num_complex::Complex;
use num_rational::BigRational;
use rayon::prelude::*;

use crate::angle::{enumerate_portraits, Angle, Portrait};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// The polynomial `z^d + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Parameter<T> {
    pub degree: u32,
    pub c: Complex<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(degree: u32, c: Complex<T>) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidInput(format!("degree must be at least 2, got {degree}")));
        }
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::InvalidInput("parameter c must be finite".into()));
        }
        Ok(Parameter { degree, c })
    }

    #[inline]
    pub fn apply(&self, z: Complex<T>) -> Complex<T> {
        z.powu(self.degree) + self.c
    }

    #[inline]
    pub fn derivative(&self, z: Complex<T>) -> Complex<T> {
        z.powu(self.degree - 1) * T::from_u32(self.degree).unwrap()
    }

    pub fn d(&self) -> T {
        T::from_u32(self.degree).unwrap()
    }

    /// Smallest radius allowed for [`green`]: `max(2, |c|^(1/(d-1)) + 1)`.
    pub fn min_escape_radius(&self) -> T {
        let r = self.c.norm().powf(T::one() / (self.d() - T::one())) + T::one();
        r.max(T::lit(2.0))
    }

    /// A comfortable escape radius (at least 10).
    pub fn escape_radius(&self) -> T {
        (self.min_escape_radius() * T::lit(2.0)).max(T::lit(10.0))
    }

    /// `f^n(z)`.
    pub fn iterate(&self, z: Complex<T>, n: usize) -> Complex<T> {
        (0..n).fold(z, |w, _| self.apply(w))
    }
}

/// `z^d + c`.
pub fn apply_map<T: Real>(p: &Parameter<T>, z: Complex<T>) -> Complex<T> {
    p.apply(z)
}

/// Green's function `G(z) = lim d^-n log|f^n(z)|`, evaluated with one tail
/// term once the orbit is past `escape_radius` and large enough for the
/// tail to be negligible. Returns zero when `z` does not escape within
/// `max_iter` iterations.
pub fn green<T: Real>(p: &Parameter<T>, z: Complex<T>, max_iter: usize, escape_radius: T) -> T {
    let d = p.d();
    // Past this radius the dropped tail is below double precision; capped so
    // that z^d stays finite.
    let big = T::lit(1e8).min(T::max_value().powf(T::one() / (d * T::lit(2.0))));
    let stop = escape_radius.max(big);
    let mut z = z;
    let mut scale = T::one();
    let mut limit = max_iter;
    let mut i = 0;
    while i <= limit {
        let r = z.norm();
        if r > escape_radius && (r > stop || i == limit) {
            // log|z^d + c| = d log|z| + log|1 + c/z^d|
            let zd = z.powu(p.degree);
            let corr = if zd.norm().is_finite() {
                (Complex::new(T::one(), T::zero()) + p.c / zd).norm().ln()
            } else {
                T::zero()
            };
            return scale * (r.ln() + corr / d);
        }
        if r > escape_radius && limit == max_iter {
            // a few more steps reach `stop` from any escaped point
            limit = i + 8;
        }
        i += 1;
        z = p.apply(z);
        scale = scale / d;
        if scale == T::zero() {
            break;
        }
    }
    T::zero()
}

/// Tuning knobs for [`trace_ray_with`].
#[derive(Clone, Debug)]
pub struct RayOptions<T> {
    pub h_start: T,
    pub h_stop: T,
    pub steps_per_halving: usize,
    /// Three consecutive points within this distance count as landed.
    pub landing_tol: T,
    /// Stop as soon as the landing criterion holds.
    pub stop_on_landing: bool,
    /// Return the points traced so far instead of `RayLost`.
    pub keep_partial: bool,
}

impl<T: Real> Default for RayOptions<T> {
    fn default() -> Self {
        RayOptions {
            h_start: T::lit(4.0),
            h_stop: T::lit(1e-30).max(T::min_positive_value() * T::lit(1e6)),
            steps_per_halving: 8,
            landing_tol: T::lit(1e-7),
            stop_on_landing: true,
            keep_partial: false,
        }
    }
}

/// Points of one external ray, by decreasing potential.
#[derive(Clone, Debug)]
pub struct RayTrace<T> {
    pub angle: Angle,
    pub points: Vec<Complex<T>>,
    pub potentials: Vec<T>,
    pub landed: bool,
    pub landing_point: Option<Complex<T>>,
}

impl<T: Real> RayTrace<T> {
    /// Point of the trace at the given potential, by log-linear interpolation
    /// between neighbouring samples; `None` if outside the traced range.
    pub fn point_at(&self, h: T) -> Option<Complex<T>> {
        let i = self.potentials.iter().position(|&x| x <= h)?;
        if self.potentials[i] == h || i == 0 {
            return (self.potentials[i] == h).then(|| self.points[i]);
        }
        let (h0, h1) = (self.potentials[i - 1].ln(), self.potentials[i].ln());
        let s = (h.ln() - h0) / (h1 - h0);
        Some(self.points[i - 1] + (self.points[i] - self.points[i - 1]) * s)
    }

    /// Part of the trace with potential at most `h`, led by the exact point
    /// at potential `h` when it can be interpolated.
    pub fn below(&self, h: T) -> Vec<Complex<T>> {
        let mut out = Vec::new();
        if let Some(p) = self.point_at(h) {
            out.push(p);
        }
        for (z, &x) in self.points.iter().zip(&self.potentials) {
            if x < h {
                out.push(*z);
            }
        }
        out
    }

    pub fn last_point(&self) -> Complex<T> {
        *self.points.last().expect("non-empty trace")
    }

    pub fn last_potential(&self) -> T {
        *self.potentials.last().expect("non-empty trace")
    }
}

/// Newton solver for `f^n(z) = target` along a ray or an equipotential.
pub(crate) struct BoettcherSolver<'a, T> {
    p: &'a Parameter<T>,
    /// `log R` of the radius at which `z` approximates the Böttcher map.
    log_r: T,
}

impl<'a, T: Real> BoettcherSolver<'a, T> {
    pub(crate) fn new(p: &'a Parameter<T>) -> Self {
        // Böttcher coordinate error is about |c| / R^d relative; push it
        // below rounding.
        let floor = (p.c.norm() / T::epsilon()).powf(T::one() / p.d());
        let r = p.escape_radius().max(T::lit(1e3)).max(floor);
        BoettcherSolver { p, log_r: r.ln() }
    }

    /// Iterations needed so that potential `h` is pushed beyond `log R`.
    pub(crate) fn depth_for(&self, h: T) -> usize {
        if h >= self.log_r {
            return 0;
        }
        let n = (self.log_r / h).ln() / self.p.d().ln();
        n.ceil().to_usize().unwrap_or(0)
    }

    /// `exp(d^n (h + 2 pi i t))`, with the phase of `d^n t` taken exactly.
    pub(crate) fn target(&self, t: &Angle, h: T, n: usize) -> Complex<T> {
        let phase: T = t.times_pow(self.p.degree, n).to_real();
        let modulus = (h * self.p.d().powi(n as i32)).exp();
        Complex::from_polar(modulus, phase * T::TAU())
    }

    /// Newton iteration from `z0`. Steps longer than `max_step` are
    /// shortened. Returns `None` without convergence.
    pub(crate) fn solve(&self, z0: Complex<T>, target: Complex<T>, n: usize, max_step: T) -> Option<Complex<T>> {
        let mut z = z0;
        let tol = T::epsilon() * T::lit(64.0);
        let mut prev = T::infinity();
        for _ in 0..64 {
            let mut w = z;
            let mut dw = Complex::new(T::one(), T::zero());
            for _ in 0..n {
                dw = self.p.derivative(w) * dw;
                w = self.p.apply(w);
            }
            if !(w.re.is_finite() && w.im.is_finite() && dw.re.is_finite() && dw.im.is_finite()) {
                return None;
            }
            if dw.norm() == T::zero() {
                return None;
            }
            let mut step = (w - target) / dw;
            let sn = step.norm();
            if !sn.is_finite() {
                return None;
            }
            if sn > max_step {
                step = step * (max_step / sn);
            }
            z = z - step;
            if sn <= tol * (T::one() + z.norm()) || sn <= max_step * T::lit(1e-10) {
                return Some(z);
            }
            // Near critical points rounding in f^n sets the floor; stalled
            // steps far below the step scale count as converged.
            if sn <= max_step * T::lit(1e-2) && sn >= prev * T::lit(0.5) {
                return Some(z);
            }
            prev = sn;
        }
        None
    }
}

/// Traces the ray of angle `t` from `h_start` down to `h_stop`.
///
/// Fails with `NotLanded` when the landing criterion never triggers; use
/// [`trace_ray_with`] with `stop_on_landing` to keep partial traces.
pub fn trace_ray<T: Real>(
    p: &Parameter<T>,
    t: &Angle,
    h_start: T,
    h_stop: T,
    steps_per_halving: usize,
) -> Result<RayTrace<T>> {
    let opts = RayOptions {
        h_start,
        h_stop,
        steps_per_halving,
        ..RayOptions::default()
    };
    let tr = trace_ray_with(p, t, &opts)?;
    if !tr.landed {
        return Err(Error::NotLanded {
            angle: t.to_string(),
            potential: h_stop.to_f64_lossy(),
        });
    }
    Ok(tr)
}

/// Ray tracing returning whatever was traced; `landed` reports the
/// landing criterion.
pub fn trace_ray_with<T: Real>(p: &Parameter<T>, t: &Angle, opts: &RayOptions<T>) -> Result<RayTrace<T>> {
    if !(opts.h_start > opts.h_stop && opts.h_stop > T::zero()) {
        return Err(Error::InvalidInput("trace_ray needs h_start > h_stop > 0".into()));
    }
    let s = opts.steps_per_halving.max(1);
    let solver = BoettcherSolver::new(p);
    let ratio = T::lit(0.5).powf(T::one() / T::from_usize_lossy(s));
    let lost = |h: T| Error::RayLost {
        angle: t.to_string(),
        potential: h.to_f64_lossy(),
    };

    // Start where z is an accurate Böttcher coordinate.
    let mut h = opts.h_start.max(solver.log_r);
    let ang: T = t.to_real();
    let mut z = Complex::from_polar(h.exp(), ang * T::TAU());
    let mut spacing = z.norm();
    let mut prev_spacing: T;

    let mut tr = RayTrace {
        angle: t.clone(),
        points: Vec::new(),
        potentials: Vec::new(),
        landed: false,
        landing_point: None,
    };
    if h <= opts.h_start {
        tr.points.push(z);
        tr.potentials.push(h);
    }
    // Potential schedule; the first value below h_start is h_start itself.
    while h > opts.h_stop {
        let mut next = h * ratio;
        if h > opts.h_start && next < opts.h_start {
            next = opts.h_start;
        }
        if next < opts.h_stop {
            next = opts.h_stop;
        }
        // Sub-steps for rejected solves.
        let mut sub = 1usize;
        let znew = loop {
            let mut zz = z;
            let mut hh = h;
            let mut ok = true;
            let f = (next / h).powf(T::one() / T::from_usize_lossy(sub));
            let mut local_spacing = spacing;
            for _ in 0..sub {
                hh = hh * f;
                let n = solver.depth_for(hh);
                let target = solver.target(t, hh, n);
                let max_step = local_spacing * T::lit(2.0) + T::epsilon() * (T::one() + zz.norm());
                match solver.solve(zz, target, n, max_step) {
                    Some(w) if (w - zz).norm() <= local_spacing * T::lit(8.0) + T::epsilon() * T::lit(16.0) => {
                        local_spacing = (w - zz).norm().max(T::epsilon());
                        zz = w;
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                break Some(zz);
            }
            sub *= 2;
            if sub > 1 << 12 {
                break None;
            }
        };
        // Solves stall once the ray is within rounding of its landing
        // point; that ends the trace rather than losing it.
        let znew = match znew {
            Some(w) => w,
            None if spacing <= T::epsilon() * T::lit(1e4) * (T::one() + z.norm()) => {
                tr.landed = true;
                if tr.landing_point.is_none() {
                    tr.landing_point = Some(z);
                }
                break;
            }
            None if opts.keep_partial && !tr.points.is_empty() => break,
            None => return Err(lost(next)),
        };
        prev_spacing = spacing;
        spacing = (znew - z).norm();
        z = znew;
        h = next;
        if h <= opts.h_start {
            tr.points.push(z);
            tr.potentials.push(h);
        }
        let n = tr.points.len();
        if n >= 3 && spacing < opts.landing_tol && prev_spacing < opts.landing_tol {
            tr.landed = true;
            tr.landing_point = Some(extrapolate_landing(&tr.points[n - 3..]));
            if opts.stop_on_landing {
                break;
            }
        }
        // Below rounding level the samples carry no information.
        if spacing <= T::epsilon() * T::lit(16.0) * (T::one() + z.norm()) && n >= 3 {
            tr.landed = true;
            if tr.landing_point.is_none() {
                tr.landing_point = Some(extrapolate_landing(&tr.points[n - 3..]));
            }
            break;
        }
        // Keep the jump guard meaningful once the ray slows down.
        spacing = spacing.max(T::epsilon() * (T::one() + z.norm()));
    }
    if tr.points.is_empty() {
        return Err(lost(h));
    }
    Ok(tr)
}

/// Aitken extrapolation of three geometrically converging samples; the
/// last sample when the ratio is degenerate.
fn extrapolate_landing<T: Real>(z: &[Complex<T>]) -> Complex<T> {
    let (a, b, c) = (z[0], z[1], z[2]);
    let d1 = b - a;
    let d2 = c - b;
    let den = d2 - d1;
    if den.norm() <= T::epsilon() * (d1.norm() + d2.norm()) {
        return c;
    }
    let ratio = d2 / d1;
    if !(ratio.norm() < T::lit(0.999)) {
        return c;
    }
    c - d2 * d2 / den
}

/// Fixed point classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FixedPointKind {
    Alpha,
    Beta,
    Other,
}

#[derive(Clone, Debug)]
pub struct FixedPointInfo<T> {
    pub location: Complex<T>,
    pub multiplier: Complex<T>,
    pub kind: FixedPointKind,
    /// `|multiplier| <= 1`.
    pub non_repelling: bool,
    pub landing_angles: Vec<Angle>,
}

/// Roots of a monic polynomial given by coefficients `a[0] + a[1] z + ...`,
/// by Aberth iteration from perturbed roots of unity.
pub(crate) fn aberth<T: Real>(coeffs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let deg = coeffs.len() - 1;
    let eval = |z: Complex<T>| {
        let mut v = Complex::new(T::zero(), T::zero());
        let mut dv = Complex::new(T::zero(), T::zero());
        for a in coeffs.iter().rev() {
            dv = dv * z + v;
            v = v * z + a;
        }
        (v, dv)
    };
    // Cauchy bound for the starting radius.
    let lead = coeffs[deg].norm();
    let bound = T::one()
        + coeffs[..deg]
            .iter()
            .map(|a| a.norm() / lead)
            .fold(T::zero(), T::max);
    let mut roots: Vec<Complex<T>> = (0..deg)
        .map(|k| {
            let th = T::TAU() * (T::from_usize_lossy(k) + T::lit(0.4)) / T::from_usize_lossy(deg) + T::lit(0.3);
            Complex::from_polar(bound * T::lit(0.7), th)
        })
        .collect();
    let tol = T::epsilon() * T::lit(16.0);
    for _ in 0..500 {
        let mut max_step = T::zero();
        for i in 0..deg {
            let (v, dv) = eval(roots[i]);
            if v.norm() == T::zero() {
                continue;
            }
            let ratio = v / dv;
            let mut sum = Complex::new(T::zero(), T::zero());
            for j in 0..deg {
                if j != i {
                    sum = sum + Complex::new(T::one(), T::zero()) / (roots[i] - roots[j]);
                }
            }
            let step = ratio / (Complex::new(T::one(), T::zero()) - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                roots[i] = roots[i] - step;
                max_step = max_step.max(step.norm() / (T::one() + roots[i].norm()));
            }
        }
        if max_step < tol {
            break;
        }
    }
    Ok(roots)
}

/// All fixed points of `z^d + c`, kind `Other` until classified.
pub fn fixed_points<T: Real>(p: &Parameter<T>) -> Result<Vec<FixedPointInfo<T>>> {
    let d = p.degree as usize;
    let mut coeffs = vec![Complex::new(T::zero(), T::zero()); d + 1];
    coeffs[0] = p.c;
    coeffs[1] = Complex::new(-T::one(), T::zero());
    coeffs[d] = coeffs[d] + Complex::new(T::one(), T::zero());
    let roots = aberth(&coeffs)?;
    let mut out = Vec::with_capacity(d);
    for z in roots {
        // One Newton polish step on z^d - z + c.
        let fz = p.apply(z) - z;
        let dfz = p.derivative(z) - Complex::new(T::one(), T::zero());
        let z = if dfz.norm() > T::zero() { z - fz / dfz } else { z };
        let residual = (p.apply(z) - z).norm();
        let scale = T::one() + z.norm().powi(p.degree as i32);
        if !(residual <= T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) * scale) {
            return Err(Error::RootFindingFailed {
                residual: residual.to_f64_lossy(),
            });
        }
        let multiplier = p.derivative(z);
        out.push(FixedPointInfo {
            location: z,
            multiplier,
            kind: FixedPointKind::Other,
            non_repelling: multiplier.norm() <= T::one(),
            landing_angles: Vec::new(),
        });
    }
    out.sort_by(|a, b| {
        a.location
            .re
            .partial_cmp(&b.location.re)
            .unwrap()
            .then(a.location.im.partial_cmp(&b.location.im).unwrap())
    });
    Ok(out)
}

/// Ray options used when deciding where a periodic ray lands.
fn landing_options<T: Real>() -> RayOptions<T> {
    RayOptions {
        h_start: T::lit(4.0),
        h_stop: T::lit(1e-60).max(T::min_positive_value() * T::lit(1e12)),
        steps_per_halving: 8,
        landing_tol: T::lit(1e-9).max(T::epsilon() * T::lit(100.0)),
        stop_on_landing: true,
        keep_partial: false,
    }
}

/// Index of the fixed point at which the ray of `t` lands, if any. The
/// traced end point must be close to a fixed point, and Newton on
/// `f(z) = z` started there must return to the same fixed point.
fn ray_lands_at_fixed<T: Real>(p: &Parameter<T>, fps: &[FixedPointInfo<T>], t: &Angle) -> Result<Option<usize>> {
    let tr = trace_ray_with(p, t, &landing_options())?;
    let end = tr.last_point();
    let sep = separation(fps);
    let (idx, dist) = fps
        .iter()
        .enumerate()
        .map(|(i, f)| (i, (f.location - end).norm()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    if dist > sep * T::lit(0.05) {
        return Ok(None);
    }
    // Periodic refinement: the end point must sit in the basin of the fixed
    // point under Newton for f(z) - z, and the distance must be shrinking.
    let mut z = end;
    for _ in 0..50 {
        let g = p.apply(z) - z;
        let dg = p.derivative(z) - Complex::new(T::one(), T::zero());
        z = z - g / dg;
    }
    if (z - fps[idx].location).norm() > sep * T::lit(1e-3) {
        return Ok(None);
    }
    let k = tr.points.len();
    if k > 16 {
        let earlier = (tr.points[k - 16] - fps[idx].location).norm();
        if dist > earlier {
            return Ok(None);
        }
    }
    Ok(Some(idx))
}

fn separation<T: Real>(fps: &[FixedPointInfo<T>]) -> T {
    let mut s = T::infinity();
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            s = s.min((fps[i].location - fps[j].location).norm());
        }
    }
    if s.is_finite() {
        s
    } else {
        T::one()
    }
}

/// The dividing fixed point and its ray portrait.
///
/// Cycles are tried by increasing period `q` and, for each `q`, by rotation
/// numbers `p/q` in increasing order. For `d > 2` every portrait with the
/// same rotation number is tried and the first one whose rays all land at
/// one fixed point is kept.
pub fn classify_alpha<T: Real>(p: &Parameter<T>, q_max: usize) -> Result<FixedPointInfo<T>> {
    let (info, _) = classify_alpha_portrait(p, q_max)?;
    Ok(info)
}

/// [`classify_alpha`] also returning the portrait.
pub fn classify_alpha_portrait<T: Real>(p: &Parameter<T>, q_max: usize) -> Result<(FixedPointInfo<T>, Portrait)> {
    let fps = fixed_points(p)?;
    if let Some(f) = fps.iter().find(|f| f.non_repelling) {
        return Err(Error::InMainComponent {
            multiplier_abs: f.multiplier.norm().to_f64_lossy(),
        });
    }
    for q in 2..=q_max {
        for rot in 1..q {
            if num_integer::gcd(rot, q) != 1 {
                continue;
            }
            let candidates = enumerate_portraits(p.degree, q, rot)?;
            // First angle of every candidate in parallel, then the rest.
            let hits: Vec<Result<Option<usize>>> = candidates
                .par_iter()
                .map(|port| ray_lands_at_fixed(p, &fps, &port.angles[0]))
                .collect();
            for (port, hit) in candidates.iter().zip(hits) {
                let Some(idx) = hit? else { continue };
                let all: Vec<Result<Option<usize>>> = port.angles[1..]
                    .par_iter()
                    .map(|a| ray_lands_at_fixed(p, &fps, a))
                    .collect();
                let mut ok = true;
                for r in all {
                    if r? != Some(idx) {
                        ok = false;
                    }
                }
                if ok {
                    let mut info = fps[idx].clone();
                    info.kind = FixedPointKind::Alpha;
                    info.landing_angles = port.angles.clone();
                    return Ok((info, port.clone()));
                }
            }
        }
    }
    Err(Error::PortraitNotFound { q_max })
}

/// Fixed point where the ray of angle 0 lands.
pub fn classify_beta<T: Real>(p: &Parameter<T>) -> Result<Option<FixedPointInfo<T>>> {
    let fps = fixed_points(p)?;
    Ok(ray_lands_at_fixed(p, &fps, &Angle::zero())?.map(|i| {
        let mut f = fps[i].clone();
        f.kind = FixedPointKind::Beta;
        f.landing_angles = vec![Angle::zero()];
        f
    }))
}

/// Samples of the equipotential `{G = h}` at `n_points` equally spaced
/// angles, counterclockwise.
pub fn equipotential<T: Real>(p: &Parameter<T>, h: T, n_points: usize) -> Result<Vec<Complex<T>>> {
    if !(h > T::zero()) || n_points < 3 {
        return Err(Error::InvalidInput("equipotential needs h > 0 and at least 3 points".into()));
    }
    (0..n_points)
        .into_par_iter()
        .map(|k| {
            let t = Angle::new(k as i64, n_points as i64)?;
            let opts = RayOptions {
                h_start: h * T::lit(4.0),
                h_stop: h,
                steps_per_halving: 4,
                landing_tol: T::zero(),
                stop_on_landing: false,
                keep_partial: false,
            };
            Ok(trace_ray_with(p, &t, &opts)?.last_point())
        })
        .collect()
}

/// Climbs the gradient line of `G` through `z` up to potential `h_top` and
/// returns the argument there, in turns.
fn climb_argument<T: Real>(p: &Parameter<T>, z: Complex<T>, steps_per_doubling: usize) -> Option<T> {
    let solver = BoettcherSolver::new(p);
    let mut g = green(p, z, 100_000, p.escape_radius());
    if !(g > T::zero()) {
        return None;
    }
    let factor = T::lit(2.0).powf(T::one() / T::from_usize_lossy(steps_per_doubling.max(1)));
    let mut z = z;
    while g < solver.log_r {
        let n = solver.depth_for(g);
        let w = p.iterate(z, n);
        let gn = g * factor;
        let target = w * ((gn - g) * p.d().powi(n as i32)).exp();
        let spacing = z.norm() * T::lit(0.5) + T::lit(1e-3);
        z = solver.solve(z, target, n, spacing)?;
        g = gn;
    }
    let arg = z.im.atan2(z.re) / T::TAU();
    Some(arg - arg.floor())
}

/// External angle of the critical value for `c` outside the filled Julia
/// set, as an exact dyadic rational.
///
/// The angle of every iterate `f^k(c)` is estimated by climbing its gradient
/// line; the estimates fix the `d`-ary digits one at a time from the first
/// escaped iterate backwards.
pub fn value_angle_outside<T: Real>(p: &Parameter<T>) -> Result<Angle> {
    let r = p.escape_radius();
    let g = green(p, p.c, 100_000, r);
    if !(g > T::zero()) {
        return Err(Error::InvalidInput(
            "the critical value does not escape; a value angle must be supplied".into(),
        ));
    }
    let mut orbit = vec![p.c];
    while orbit.last().unwrap().norm() <= r * r {
        let z = p.apply(*orbit.last().unwrap());
        orbit.push(z);
        if orbit.len() > 100_000 {
            return Err(Error::budget("value angle escape", 100_000));
        }
    }
    let top = orbit.len() - 1;
    let est_top = climb_argument(p, orbit[top], 8)
        .ok_or_else(|| Error::NonConvergence("gradient climb from the escaped orbit".into()))?;
    let mut theta = Angle::from_f64_exact(est_top.to_f64_lossy())?;
    for k in (0..top).rev() {
        let est = climb_argument(p, orbit[k], 8)
            .ok_or_else(|| Error::NonConvergence(format!("gradient climb from f^{k}(c)")))?;
        let est = BigRational::from_float(est.to_f64_lossy()).unwrap_or_default();
        let est = Angle::from_ratio(est);
        theta = theta
            .preimages(p.degree)
            .into_iter()
            .min_by_key(|cand| {
                let d1 = cand.ccw_distance_from(&est);
                let d2 = est.ccw_distance_from(cand);
                d1.min(d2)
            })
            .unwrap();
    }
    Ok(theta)
}
