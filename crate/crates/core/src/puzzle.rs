//! Geometric puzzle pieces: polygons bounded by external rays and one
//! equipotential arc per angle arc of the label.

use std::collections::HashMap;
use std::sync::{Arc as Shared, Mutex};

use num_complex::Complex;
use num_rational::BigRational;
use rayon::prelude::*;

use crate::angle::{Angle, Portrait};
use crate::combinatorics::{Label, SymbolicPuzzle};
use crate::dynamics::{green, trace_ray_with, BoettcherSolver, Parameter, RayOptions, RayTrace};
use crate::error::{Error, Result};
use crate::geometry::{diameter_bound, distance_to_polyline, point_in_polygon};
use crate::scalar::Real;

/// Largest accepted straight closing segment of a ray, relative to the
/// piece diameter.
pub const MAX_LANDING_GAP: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct PuzzleConfig<T> {
    /// Height of the depth-0 equipotential.
    pub height: T,
    pub steps_per_halving: usize,
    /// Ray tracing stops at `ray_floor / d^k` for a depth-`k` ray.
    pub ray_floor: T,
    /// Equipotential samples per arc before refinement.
    pub arc_samples: usize,
    /// `OnBoundary` tolerance relative to the piece diameter.
    pub boundary_tol: T,
}

impl<T: Real> Default for PuzzleConfig<T> {
    fn default() -> Self {
        PuzzleConfig {
            height: T::one(),
            steps_per_halving: 8,
            ray_floor: T::lit(1e-40).max(T::min_positive_value() * T::lit(1e20)),
            arc_samples: 24,
            boundary_tol: T::lit(1e-7),
        }
    }
}

/// A realized piece.
#[derive(Clone, Debug)]
pub struct PuzzlePiece<T> {
    pub label: Label,
    pub depth: usize,
    /// Closed polyline; the closing segment is implicit.
    pub boundary: Vec<Complex<T>>,
    pub contains_critical_point: bool,
    /// Potential of the truncating equipotential, `h / d^depth`.
    pub height: T,
    /// Longest boundary segment.
    pub sampling_step: T,
    /// Largest straight gap between a traced ray end and its landing point,
    /// relative to the piece diameter.
    pub landing_gap: T,
    /// Boundary rays whose trace stopped on precision loss before the
    /// floor potential.
    pub partial_rays: usize,
}

impl<T: Real> PuzzlePiece<T> {
    pub fn contains(&self, z: Complex<T>) -> bool {
        point_in_polygon(&self.boundary, z)
    }

    pub fn diameter(&self) -> T {
        diameter_bound(&self.boundary)
    }
}

#[derive(Clone, Debug)]
pub struct PuzzleLevel<T> {
    pub depth: usize,
    pub pieces: Vec<Shared<PuzzlePiece<T>>>,
}

/// Geometric puzzle of one parameter, with caches for rays, landing points
/// and pieces.
pub struct Puzzle<T: Real> {
    pub param: Parameter<T>,
    pub alpha: Complex<T>,
    pub config: PuzzleConfig<T>,
    symbolic: Shared<SymbolicPuzzle>,
    rays: Mutex<HashMap<Angle, Shared<RayTrace<T>>>>,
    landings: Mutex<HashMap<Angle, Complex<T>>>,
    pieces: Mutex<HashMap<Label, Shared<PuzzlePiece<T>>>>,
    children: Mutex<HashMap<Label, Vec<Label>>>,
}

impl<T: Real> std::fmt::Debug for Puzzle<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Puzzle")
            .field("param", &self.param)
            .field("alpha", &self.alpha)
            .field("symbolic", &self.symbolic)
            .finish()
    }
}

impl<T: Real> Puzzle<T> {
    /// `alpha` must be the landing point of the portrait rays.
    pub fn new(param: Parameter<T>, alpha: Complex<T>, symbolic: Shared<SymbolicPuzzle>, config: PuzzleConfig<T>) -> Result<Self> {
        if symbolic.degree() != param.degree {
            return Err(Error::InvalidInput("portrait degree differs from the parameter degree".into()));
        }
        if !(config.height > T::zero()) {
            return Err(Error::InvalidInput("equipotential height must be positive".into()));
        }
        Ok(Puzzle {
            param,
            alpha,
            config,
            symbolic,
            rays: Mutex::new(HashMap::new()),
            landings: Mutex::new(HashMap::new()),
            pieces: Mutex::new(HashMap::new()),
            children: Mutex::new(HashMap::new()),
        })
    }

    pub fn symbolic(&self) -> &SymbolicPuzzle {
        &self.symbolic
    }

    pub fn portrait(&self) -> &Portrait {
        self.symbolic.portrait()
    }

    pub fn height_at(&self, depth: usize) -> T {
        self.config.height / self.param.d().powi(depth as i32)
    }

    /// Number of forward steps taking `t` onto the portrait.
    fn ray_depth(&self, t: &Angle) -> Result<usize> {
        let d = self.param.degree;
        let mut x = t.clone();
        for k in 0..=10_000 {
            if self.portrait().contains(&x) {
                return Ok(k);
            }
            x = x.times(d);
        }
        Err(Error::InvalidInput(format!("{t} is not a preimage of the portrait")))
    }

    /// Traced ray of a boundary angle, from above the depth-0 height down to
    /// the depth-scaled floor. Cached.
    pub fn ray(&self, t: &Angle) -> Result<Shared<RayTrace<T>>> {
        if let Some(r) = self.rays.lock().unwrap().get(t) {
            return Ok(r.clone());
        }
        let k = self.ray_depth(t)?;
        let scale = self.param.d().powi(k as i32);
        let opts = RayOptions {
            h_start: self.config.height * T::lit(2.0),
            h_stop: self.config.ray_floor / scale,
            steps_per_halving: self.config.steps_per_halving,
            landing_tol: T::zero(),
            stop_on_landing: false,
            keep_partial: true,
        };
        let tr = Shared::new(trace_ray_with(&self.param, t, &opts)?);
        self.rays.lock().unwrap().insert(t.clone(), tr.clone());
        Ok(tr)
    }

    /// Traces many rays in parallel, filling the cache.
    pub fn prefetch_rays(&self, angles: &[Angle]) -> Result<()> {
        let missing: Vec<Angle> = {
            let cache = self.rays.lock().unwrap();
            let mut v: Vec<Angle> = angles.iter().filter(|a| !cache.contains_key(*a)).cloned().collect();
            v.sort();
            v.dedup();
            v
        };
        missing.par_iter().map(|a| self.ray(a).map(|_| ())).collect::<Result<Vec<()>>>()?;
        Ok(())
    }

    /// Landing point of a boundary ray: `alpha` pulled back along the ray's
    /// forward orbit, choosing at each step the preimage nearest to the
    /// forward image of the traced end point.
    pub fn landing_point(&self, t: &Angle) -> Result<Complex<T>> {
        if let Some(z) = self.landings.lock().unwrap().get(t) {
            return Ok(*z);
        }
        let k = self.ray_depth(t)?;
        let end = self.ray(t)?.last_point();
        let mut orbit = Vec::with_capacity(k + 1);
        let mut w = end;
        for _ in 0..k {
            orbit.push(w);
            w = self.param.apply(w);
        }
        let mut l = self.alpha;
        for j in (0..k).rev() {
            l = nearest_preimage(&self.param, l, orbit[j]);
        }
        self.landings.lock().unwrap().insert(t.clone(), l);
        Ok(l)
    }

    /// Point of the ray of `t` at potential `h`, polished by Newton.
    fn ray_top(&self, t: &Angle, h: T) -> Result<Complex<T>> {
        let z0 = self.ray(t)?.point_at(h).ok_or_else(|| Error::RayLost {
            angle: t.to_string(),
            potential: h.to_f64_lossy(),
        })?;
        let solver = BoettcherSolver::new(&self.param);
        let n = solver.depth_for(h);
        let nudge = (z0.norm() + T::one()) * T::lit(1e-3);
        Ok(solver.solve(z0, solver.target(t, h, n), n, nudge).unwrap_or(z0))
    }

    /// Ray of `t` from potential `h` down to its landing point, with the
    /// length of the closing straight segment and whether the trace was cut
    /// short.
    fn ray_down(&self, t: &Angle, h: T) -> Result<(Vec<Complex<T>>, T, bool)> {
        let tr = self.ray(t)?;
        if tr.last_potential() > h * T::lit(0.5) {
            return Err(Error::RayLost {
                angle: t.to_string(),
                potential: tr.last_potential().to_f64_lossy(),
            });
        }
        let top = self.ray_top(t, h)?;
        let land = self.landing_point(t)?;
        // Samples this close to the landing point are rounding noise and
        // can fold back on the neighbouring ray.
        let near = (top - land).norm() * T::lit(1e-8);
        let mut v = vec![top];
        v.extend(
            tr.points
                .iter()
                .zip(&tr.potentials)
                .filter(|(z, &x)| x < h * (T::one() - T::lit(1e-9)) && (**z - land).norm() > near)
                .map(|(z, _)| *z),
        );
        let gap = (land - tr.last_point()).norm();
        v.push(land);
        Ok((v, gap, !tr.landed))
    }

    /// Points of `{G = h}` from angle `a` counterclockwise through `len`
    /// turns, excluding the final angle.
    fn equipotential_arc(&self, a: &Angle, len: &BigRational, h: T) -> Result<Vec<Complex<T>>> {
        let solver = BoettcherSolver::new(&self.param);
        let n = solver.depth_for(h);
        let m = self.config.arc_samples.max(2);
        let start = self.ray_top(a, h)?;
        let b = Angle::from_ratio(a.as_ratio() + len);
        let mut pts = vec![start];
        let mut z = start;
        let step_len = len / BigRational::from_integer((m as i64).into());
        let mut prev_t = a.clone();
        for i in 1..m {
            let t = Angle::from_ratio(a.as_ratio() + &step_len * BigRational::from_integer((i as i64).into()));
            let (seg, zt) = self.continue_equipotential(&prev_t, z, &t, h, n, &solver, 0)?;
            pts.extend(seg);
            pts.push(zt);
            z = zt;
            prev_t = t;
        }
        let (seg, _) = self.continue_equipotential(&prev_t, z, &b, h, n, &solver, 0)?;
        pts.extend(seg);
        Ok(pts)
    }

    /// Newton continuation from `(t0, z0)` to angle `t1`, bisecting the angle
    /// step when a solve fails or jumps. Returns the intermediate points and
    /// the point at `t1`.
    #[allow(clippy::too_many_arguments)]
    fn continue_equipotential(
        &self,
        t0: &Angle,
        z0: Complex<T>,
        t1: &Angle,
        h: T,
        n: usize,
        solver: &BoettcherSolver<'_, T>,
        depth: usize,
    ) -> Result<(Vec<Complex<T>>, Complex<T>)> {
        let dt = t1.ccw_distance_from(t0);
        let dtf = T::lit(crate::angle::ratio_to_f64(&dt));
        let expected = self.angular_speed(z0, n) * dtf;
        let target = solver.target(t1, h, n);
        let max_step = expected * T::lit(2.0) + T::epsilon() * (T::one() + z0.norm());
        // The target phase turns d^n times faster than t; larger steps can
        // converge onto a neighbouring branch, so they are split first.
        let phase_step = dtf * self.param.d().powi(n as i32);
        let tried = phase_step <= T::lit(0.125);
        if tried {
            match solver.solve(z0, target, n, max_step) {
                Some(z1) if (z1 - z0).norm() <= expected * T::lit(3.0) || depth >= 14 => return Ok((Vec::new(), z1)),
                None if depth >= 14 => {
                    return Err(Error::RayLost {
                        angle: t1.to_string(),
                        potential: h.to_f64_lossy(),
                    })
                }
                _ => {}
            }
        }
        let depth = depth + usize::from(tried);
        let mid = Angle::from_ratio(t0.as_ratio() + dt / BigRational::from_integer(2.into()));
        let (mut left, zm) = self.continue_equipotential(t0, z0, &mid, h, n, solver, depth + 1)?;
        let (right, z1) = self.continue_equipotential(&mid, zm, t1, h, n, solver, depth + 1)?;
        left.push(zm);
        left.extend(right);
        Ok((left, z1))
    }

    /// `|dz/dt|` along the equipotential through `z`, from
    /// `f^n(z) ~ exp(d^n (h + 2 pi i t))`.
    fn angular_speed(&self, z: Complex<T>, n: usize) -> T {
        let mut w = z;
        let mut dw = Complex::new(T::one(), T::zero());
        for _ in 0..n {
            dw = self.param.derivative(w) * dw;
            w = self.param.apply(w);
        }
        let v = T::TAU() * self.param.d().powi(n as i32) * w.norm() / dw.norm();
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    }

    /// Builds the polygon of a label at its own depth.
    pub fn piece(&self, label: &Label) -> Result<Shared<PuzzlePiece<T>>> {
        if let Some(p) = self.pieces.lock().unwrap().get(label) {
            return Ok(p.clone());
        }
        let depth = label.depth;
        let h = self.height_at(depth);
        let angles = label.boundary_angles();
        self.prefetch_rays(&angles)?;
        let m = label.arcs.len();
        let mut boundary = Vec::new();
        let mut gap = T::zero();
        let mut partial_rays = 0;
        for i in 0..m {
            let arc = &label.arcs[i];
            let b = arc.end();
            let next = &label.arcs[(i + 1) % m].start;
            boundary.extend(self.equipotential_arc(&arc.start, &arc.len, h)?);
            let lb = self.landing_point(&b)?;
            let ln = self.landing_point(next)?;
            let scale = (lb.norm() + T::one()) * T::lit(1e-6);
            if (lb - ln).norm() > scale {
                return Err(Error::LabelMismatch(format!(
                    "{label}: rays {b} and {next} land at different points ({lb} vs {ln})"
                )));
            }
            let (down, g1, p1) = self.ray_down(&b, h)?;
            let (mut up, g2, p2) = self.ray_down(next, h)?;
            gap = gap.max(g1).max(g2);
            partial_rays += p1 as usize + p2 as usize;
            boundary.extend(down);
            up.pop();
            boundary.extend(up.into_iter().rev());
            // The equipotential of the next arc starts at the same point.
            boundary.pop();
        }
        dedup_consecutive(&mut boundary);
        let n = boundary.len();
        let sampling_step = (0..n)
            .map(|i| (boundary[(i + 1) % n] - boundary[i]).norm())
            .fold(T::zero(), T::max);
        let contains_critical_point = self.symbolic.critical_label(depth)? == *label;
        let diameter = diameter_bound(&boundary);
        if gap > diameter * T::lit(MAX_LANDING_GAP) {
            return Err(Error::RayLost {
                angle: label.sector_id().to_string(),
                potential: (h * T::lit(0.1)).to_f64_lossy(),
            });
        }
        let piece = Shared::new(PuzzlePiece {
            label: label.clone(),
            depth,
            boundary,
            contains_critical_point,
            height: h,
            sampling_step,
            landing_gap: gap / diameter.max(T::min_positive_value()),
            partial_rays: partial_rays / 2,
        });
        self.pieces.lock().unwrap().insert(label.clone(), piece.clone());
        Ok(piece)
    }

    /// Depth-`(k+1)` labels inside a depth-`k` label: pull back the
    /// sub-labels of its image and keep the components inside it.
    pub fn sub_labels(&self, label: &Label) -> Result<Vec<Label>> {
        if let Some(v) = self.children.lock().unwrap().get(label) {
            return Ok(v.clone());
        }
        let sym = &self.symbolic;
        sym.check_depth(label.depth)?;
        let d = sym.degree();
        let out: Vec<Label> = if label.depth == 0 {
            sym.level(1)?
                .into_iter()
                .filter(|l| label.contains_label(l))
                .collect()
        } else {
            let img = label.image(d);
            let kids = self.sub_labels(&img)?;
            let mut v: Vec<Label> = kids
                .iter()
                .flat_map(|k| crate::combinatorics::pullback_piece(d, sym.value_angle(), k, None))
                .filter(|l| label.contains_label(l))
                .collect();
            v.sort_by(|a, b| a.sector_id().cmp(b.sector_id()));
            v
        };
        self.children.lock().unwrap().insert(label.clone(), out.clone());
        Ok(out)
    }

    pub fn build_level0(&self) -> Result<PuzzleLevel<T>> {
        let labels = self.symbolic.level0();
        let pieces = labels.iter().map(|l| self.piece(l)).collect::<Result<Vec<_>>>()?;
        Ok(PuzzleLevel { depth: 0, pieces })
    }

    /// Full levels `0..=n`. Each level is the union of the sub-labels of the
    /// previous one; the critical value must be located in its symbolic
    /// value piece at every depth.
    pub fn refine_to_depth(&self, n: usize) -> Result<Vec<PuzzleLevel<T>>> {
        self.symbolic.check_depth(n)?;
        let mut levels = vec![self.build_level0()?];
        for k in 1..=n {
            let labels: Vec<Label> = levels[k - 1]
                .pieces
                .iter()
                .map(|p| self.sub_labels(&p.label))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            let angles: Vec<Angle> = labels.iter().flat_map(|l| l.boundary_angles()).collect();
            self.prefetch_rays(&angles)?;
            let pieces = labels
                .par_iter()
                .map(|l| self.piece(l))
                .collect::<Result<Vec<_>>>()?;
            levels.push(PuzzleLevel { depth: k, pieces });
        }
        Ok(levels)
    }

    /// Label of the depth-`n` piece containing `z`, found by descending the
    /// refinement tree.
    pub fn locate(&self, z: Complex<T>, n: usize) -> Result<Label> {
        Ok(self.locate_path(z, n)?.pop().expect("path has depth 0"))
    }

    /// Labels of the pieces containing `z` at depths `0..=n`.
    pub fn locate_path(&self, z: Complex<T>, n: usize) -> Result<Vec<Label>> {
        let g = green(&self.param, z, 10_000, self.param.escape_radius());
        if g >= self.height_at(n) {
            return Err(Error::OutsideTruncation { depth: n });
        }
        let mut path = Vec::with_capacity(n + 1);
        let mut candidates = self.symbolic.level0();
        for k in 0..=n {
            let pieces = candidates
                .iter()
                .map(|l| self.piece(l))
                .collect::<Result<Vec<_>>>()?;
            let mut found = None;
            for p in &pieces {
                let tol = self.config.boundary_tol * p.diameter();
                if distance_to_polyline(&p.boundary, z, true) <= tol {
                    return Err(Error::OnBoundary {
                        depth: k,
                        tolerance: tol.to_f64_lossy(),
                    });
                }
                if found.is_none() && p.contains(z) {
                    found = Some(p.label.clone());
                }
            }
            let label = found.ok_or_else(|| {
                Error::LabelMismatch(format!("no depth-{k} piece contains {z} inside its parent"))
            })?;
            if k < n {
                candidates = self.sub_labels(&label)?;
            }
            path.push(label);
        }
        Ok(path)
    }
}

/// The `d`-th root of `w - c` nearest to `near`.
pub(crate) fn nearest_preimage<T: Real>(p: &Parameter<T>, w: Complex<T>, near: Complex<T>) -> Complex<T> {
    let v = w - p.c;
    let d = p.degree;
    let r = v.norm().powf(T::one() / p.d());
    let th = v.im.atan2(v.re) / p.d();
    (0..d)
        .map(|k| Complex::from_polar(r, th + T::TAU() * T::from_u32(k).unwrap() / p.d()))
        .min_by(|a, b| (a - near).norm().partial_cmp(&(b - near).norm()).unwrap())
        .unwrap()
}

fn dedup_consecutive<T: Real>(v: &mut Vec<Complex<T>>) {
    let close = |a: Complex<T>, b: Complex<T>| (a - b).norm() <= T::epsilon() * T::lit(64.0) * (T::one() + a.norm());
    v.dedup_by(|a, b| close(*a, *b));
    while v.len() > 1 && close(v[0], v[v.len() - 1]) {
        v.pop();
    }
}
