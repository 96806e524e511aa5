//! Conformal modulus of a polygonal annulus as the reciprocal Dirichlet
//! energy of its harmonic measure, on a uniform 5-point grid.
//!
//! Two grids are available. The Cartesian grid rasterizes the plane
//! directly. The log-polar grid is uniform in `log(z - z0) = s + i phi`
//! around a point `z0` inside the inner curve; the energy is conformally
//! invariant, so the same stencil applies, and annuli spanning several
//! scales stay resolved.

use num_complex::Complex;

use crate::combinatorics::Label;
use crate::error::{Error, Result};
use crate::geometry::{bounding_box, distance_to_polyline, point_in_polygon, self_intersections};
use crate::scalar::Real;

/// Cut edges shorter than this fraction of a cell are clamped.
const MIN_CUT: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct AnnulusSpec<T> {
    pub outer: Vec<Complex<T>>,
    pub inner: Vec<Complex<T>>,
    /// Labels of the outer and inner pieces, when the curves are puzzle
    /// pieces.
    pub provenance: Option<(Label, Label)>,
}

impl<T: Real> AnnulusSpec<T> {
    /// Checks that both curves are simple and that every inner vertex lies
    /// inside the outer curve.
    pub fn new(outer: Vec<Complex<T>>, inner: Vec<Complex<T>>) -> Result<Self> {
        if outer.len() < 3 || inner.len() < 3 {
            return Err(Error::InvalidInput("annulus curves need at least 3 vertices".into()));
        }
        if self_intersections(&outer) > 0 || self_intersections(&inner) > 0 {
            return Err(Error::InvalidInput("annulus curves must be simple".into()));
        }
        if !inner.iter().all(|&z| point_in_polygon(&outer, z)) {
            return Err(Error::InvalidInput("inner curve is not inside the outer curve".into()));
        }
        if outer.iter().any(|&z| point_in_polygon(&inner, z)) {
            return Err(Error::InvalidInput("outer curve enters the inner curve".into()));
        }
        Ok(AnnulusSpec {
            outer,
            inner,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, outer: Label, inner: Label) -> Self {
        self.provenance = Some((outer, inner));
        self
    }

    /// `r < |z - center| < big_r` with circles sampled by `n` vertices.
    pub fn round(center: Complex<T>, r: T, big_r: T, n: usize) -> Result<Self> {
        let circle = |rad: T| -> Vec<Complex<T>> {
            (0..n)
                .map(|k| center + Complex::from_polar(rad, T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(n)))
                .collect()
        };
        AnnulusSpec::new(circle(big_r), circle(r))
    }

    /// Image under `z -> a z + b`.
    pub fn affine(&self, a: Complex<T>, b: Complex<T>) -> Self {
        let map = |v: &[Complex<T>]| v.iter().map(|&z| a * z + b).collect();
        AnnulusSpec {
            outer: map(&self.outer),
            inner: map(&self.inner),
            provenance: self.provenance.clone(),
        }
    }

    /// A point inside the inner curve, far from it: the best of a sample
    /// grid over the inner bounding box.
    pub fn inner_center(&self) -> Complex<T> {
        let (lo, hi) = bounding_box(&self.inner);
        let k = 48;
        let mut best = (T::neg_infinity(), self.inner[0]);
        for i in 1..k {
            for j in 1..k {
                let z = Complex::new(
                    lo.re + (hi.re - lo.re) * T::from_usize_lossy(i) / T::from_usize_lossy(k),
                    lo.im + (hi.im - lo.im) * T::from_usize_lossy(j) / T::from_usize_lossy(k),
                );
                if point_in_polygon(&self.inner, z) {
                    let dist = distance_to_polyline(&self.inner, z, true);
                    if dist > best.0 {
                        best = (dist, z);
                    }
                }
            }
        }
        best.1
    }

    /// Grötzsch lower bound from the round annulus centred at
    /// `inner_center` that separates the two curves; zero when there is
    /// none.
    pub fn round_lower_bound(&self) -> T {
        let z0 = self.inner_center();
        let r = self.inner.iter().map(|z| (z - z0).norm()).fold(T::zero(), T::max);
        let big_r = distance_to_polyline(&self.outer, z0, true);
        if big_r > r && r > T::zero() {
            (big_r / r).ln() / T::TAU()
        } else {
            T::zero()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridKind {
    Cartesian,
    LogPolar,
}

impl GridKind {
    pub fn name(self) -> &'static str {
        match self {
            GridKind::Cartesian => "cartesian",
            GridKind::LogPolar => "log-polar",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModulusOptions<T> {
    /// Grid sizes, coarse to fine; consecutive sizes should double.
    pub grids: Vec<usize>,
    pub kind: GridKind,
    /// Relative CG residual.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for ModulusOptions<T> {
    fn default() -> Self {
        ModulusOptions {
            grids: vec![128, 256, 512],
            kind: GridKind::Cartesian,
            tol: T::lit(1e-10).max(T::epsilon() * T::lit(100.0)),
            max_iter: 100_000,
        }
    }
}

impl<T: Real> ModulusOptions<T> {
    /// `{n/4, n/2, n}` on the given grid.
    pub fn for_grid(n: usize, kind: GridKind) -> Self {
        ModulusOptions {
            grids: vec![(n / 4).max(8), (n / 2).max(16), n.max(32)],
            kind,
            ..ModulusOptions::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModulusEstimate<T> {
    /// Richardson-extrapolated modulus.
    pub value: T,
    pub grid_sizes: Vec<usize>,
    /// Raw modulus per grid size.
    pub per_grid: Vec<T>,
    pub richardson_error: T,
    /// Observed convergence order, clamped to `[0.5, 2.5]`; zero when the
    /// differences do not shrink and no extrapolation was done.
    pub order: T,
    pub converged: bool,
    pub kind: GridKind,
}

/// Modulus with Richardson extrapolation over `{n/4, n/2, n}` on a
/// Cartesian grid.
pub fn modulus<T: Real>(a: &AnnulusSpec<T>, grid_n: usize) -> Result<ModulusEstimate<T>> {
    modulus_with(a, &ModulusOptions::for_grid(grid_n, GridKind::Cartesian))
}

pub fn modulus_with<T: Real>(a: &AnnulusSpec<T>, opts: &ModulusOptions<T>) -> Result<ModulusEstimate<T>> {
    if opts.grids.is_empty() {
        return Err(Error::InvalidInput("no grid sizes".into()));
    }
    let mut per_grid = Vec::with_capacity(opts.grids.len());
    let mut all_converged = true;
    let mut prev: Option<Solution<T>> = None;
    for &n in &opts.grids {
        let raster = Raster::build(a, n, opts.kind)?;
        let sol = raster.solve(prev.as_ref(), opts)?;
        all_converged &= sol.converged;
        per_grid.push(T::one() / sol.energy);
        prev = Some(sol);
    }
    let (value, err, order) = richardson(&per_grid);
    let converged = all_converged && err <= value.abs() * T::lit(0.05);
    Ok(ModulusEstimate {
        value: value.max(T::zero()),
        grid_sizes: opts.grids.clone(),
        per_grid,
        richardson_error: err,
        order,
        converged,
        kind: opts.kind,
    })
}

/// Extrapolated value, error estimate and order from values on grids that
/// double in size.
pub fn richardson<T: Real>(v: &[T]) -> (T, T, T) {
    let n = v.len();
    if n == 1 {
        return (v[0], T::infinity(), T::one());
    }
    let two = T::lit(2.0);
    let (m2, m3) = (v[n - 2], v[n - 1]);
    let mut p = T::one();
    if n >= 3 {
        let m1 = v[n - 3];
        let r = (m1 - m2) / (m3 - m2 - T::min_positive_value());
        // r = (m1 - m2)/(m3 - m2) is -2^p for a clean power law.
        let ratio = -r;
        if ratio > T::one() && ratio.is_finite() {
            p = ratio.log2().max(T::lit(0.5)).min(T::lit(2.5));
        } else {
            // Differences that do not shrink are noise, not a power law.
            let spread = (m3 - m2).abs().max((m2 - m1).abs());
            return (m3, spread, T::zero());
        }
    }
    let ext = m3 + (m3 - m2) / (two.powf(p) - T::one());
    (ext, (ext - m3).abs(), p)
}

const INNER: u8 = 0;
const OUTER: u8 = 1;
const FREE: u8 = 2;

/// Grid nodes with their class and the cut fractions of boundary edges.
struct Raster<T> {
    kind: GridKind,
    nx: usize,
    ny: usize,
    /// Cartesian: lower-left corner; log-polar: centre.
    origin: Complex<T>,
    /// Cartesian: cell size; log-polar: `Delta s = Delta phi`.
    step: T,
    /// Log-polar: `s` of column 0.
    s0: T,
    class: Vec<u8>,
    /// Edge from node to its `+x` neighbour: cut fraction measured from the
    /// node, and from the neighbour.
    cut_x: Vec<(T, T)>,
    cut_y: Vec<(T, T)>,
}

struct Solution<T> {
    raster_kind: GridKind,
    nx: usize,
    ny: usize,
    origin: Complex<T>,
    step: T,
    s0: T,
    /// Node values, boundary nodes included.
    u: Vec<T>,
    energy: T,
    converged: bool,
}

impl<T: Real> Solution<T> {
    fn sample(&self, z: Complex<T>) -> Option<T> {
        let (x, y) = grid_coords(self.raster_kind, self.origin, self.step, self.s0, z);
        let (fx, fy) = (x.floor(), y.floor());
        let i = fx.to_isize()?;
        let j = fy.to_isize()?;
        let (tx, ty) = (x - fx, y - fy);
        let periodic = self.raster_kind == GridKind::LogPolar;
        let at = |i: isize, j: isize| -> Option<T> {
            if i < 0 || i as usize >= self.nx {
                return None;
            }
            let j = if periodic {
                j.rem_euclid(self.ny as isize) as usize
            } else if j < 0 || j as usize >= self.ny {
                return None;
            } else {
                j as usize
            };
            Some(self.u[j * self.nx + i as usize])
        };
        let v00 = at(i, j)?;
        let v10 = at(i + 1, j)?;
        let v01 = at(i, j + 1)?;
        let v11 = at(i + 1, j + 1)?;
        Some(
            v00 * (T::one() - tx) * (T::one() - ty)
                + v10 * tx * (T::one() - ty)
                + v01 * (T::one() - tx) * ty
                + v11 * tx * ty,
        )
    }
}

fn grid_coords<T: Real>(kind: GridKind, origin: Complex<T>, step: T, s0: T, z: Complex<T>) -> (T, T) {
    match kind {
        GridKind::Cartesian => ((z.re - origin.re) / step, (z.im - origin.im) / step),
        GridKind::LogPolar => {
            let w = z - origin;
            let mut phi = w.im.atan2(w.re);
            if phi < T::zero() {
                phi += T::TAU();
            }
            ((w.norm().ln() - s0) / step, phi / step)
        }
    }
}

/// Crossing parameters of a polygon with the line `p + t dir`, `t` real,
/// using a half-open rule at vertices.
fn line_crossings<T: Real>(poly: &[Complex<T>], p: Complex<T>, dir: Complex<T>, out: &mut Vec<T>) {
    let n = poly.len();
    let side = |z: Complex<T>| {
        let w = z - p;
        dir.re * w.im - dir.im * w.re
    };
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let (sa, sb) = (side(a), side(b));
        if (sa <= T::zero()) != (sb <= T::zero()) {
            let f = sa / (sa - sb);
            let z = a + (b - a) * f;
            let w = z - p;
            out.push((w.re * dir.re + w.im * dir.im) / dir.norm_sqr());
        }
    }
}

/// Angles in `[0, 2 pi)` where the polygon crosses `|z - c| = r`.
fn circle_crossings<T: Real>(poly: &[Complex<T>], c: Complex<T>, r: T, out: &mut Vec<T>) {
    let n = poly.len();
    let r2 = r * r;
    for k in 0..n {
        let a = poly[k] - c;
        let b = poly[(k + 1) % n] - c;
        let (ia, ib) = (a.norm_sqr() < r2, b.norm_sqr() < r2);
        let d = b - a;
        let qa = d.norm_sqr();
        if qa == T::zero() {
            continue;
        }
        let qb = (a.re * d.re + a.im * d.im) * T::lit(2.0);
        let qc = a.norm_sqr() - r2;
        let disc = qb * qb - T::lit(4.0) * qa * qc;
        if disc < T::zero() {
            continue;
        }
        let sq = disc.sqrt();
        let roots = [(-qb - sq) / (T::lit(2.0) * qa), (-qb + sq) / (T::lit(2.0) * qa)];
        let mut push = |t: T| {
            let z = a + d * t;
            let mut phi = z.im.atan2(z.re);
            if phi < T::zero() {
                phi += T::TAU();
            }
            out.push(phi);
        };
        if ia != ib {
            // Exactly one crossing; pick the root inside the segment.
            let t = if ia { roots[1] } else { roots[0] };
            push(t.max(T::zero()).min(T::one()));
        } else if !ia && disc > T::zero() && roots[0] > T::zero() && roots[1] < T::one() {
            // Chord entering and leaving the disk.
            push(roots[0]);
            push(roots[1]);
        }
    }
}

impl<T: Real> Raster<T> {
    fn build(a: &AnnulusSpec<T>, n: usize, kind: GridKind) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidInput("grid size must be at least 4".into()));
        }
        let raster = match kind {
            GridKind::Cartesian => Self::cartesian(a, n),
            GridKind::LogPolar => Self::log_polar(a, n),
        };
        raster.check_degenerate()?;
        Ok(raster)
    }

    fn empty(kind: GridKind, nx: usize, ny: usize, origin: Complex<T>, step: T, s0: T) -> Self {
        let inf = (T::infinity(), T::infinity());
        Raster {
            kind,
            nx,
            ny,
            origin,
            step,
            s0,
            class: vec![FREE; nx * ny],
            cut_x: vec![inf; nx * ny],
            cut_y: vec![inf; nx * ny],
        }
    }

    fn cartesian(a: &AnnulusSpec<T>, n: usize) -> Self {
        let (lo, hi) = bounding_box(&a.outer);
        let span = (hi.re - lo.re).max(hi.im - lo.im);
        let h = span / T::from_usize_lossy(n);
        let pad = T::lit(2.0) * h;
        let origin = Complex::new(lo.re - pad, lo.im - pad);
        let nx = ((hi.re - lo.re + T::lit(2.0) * pad) / h).ceil().to_usize().unwrap_or(n) + 1;
        let ny = ((hi.im - lo.im + T::lit(2.0) * pad) / h).ceil().to_usize().unwrap_or(n) + 1;
        let mut r = Self::empty(GridKind::Cartesian, nx, ny, origin, h, T::zero());
        let mut xs_in = Vec::new();
        let mut xs_out = Vec::new();
        // Rows: classification and x cuts.
        for j in 0..ny {
            let p = Complex::new(origin.re, origin.im + h * T::from_usize_lossy(j));
            let dir = Complex::new(h, T::zero());
            xs_in.clear();
            xs_out.clear();
            line_crossings(&a.inner, p, dir, &mut xs_in);
            line_crossings(&a.outer, p, dir, &mut xs_out);
            sort(&mut xs_in);
            sort(&mut xs_out);
            for i in 0..nx {
                let x = T::from_usize_lossy(i);
                let inside_in = count_above(&xs_in, x) % 2 == 1;
                let inside_out = count_above(&xs_out, x) % 2 == 1;
                r.class[j * nx + i] = classify(inside_in, inside_out);
            }
            for i in 0..nx - 1 {
                let x = T::from_usize_lossy(i);
                r.cut_x[j * nx + i] = cuts_between(&xs_in, &xs_out, x, x + T::one());
            }
        }
        // Columns: y cuts.
        for i in 0..nx {
            let p = Complex::new(origin.re + h * T::from_usize_lossy(i), origin.im);
            let dir = Complex::new(T::zero(), h);
            xs_in.clear();
            xs_out.clear();
            line_crossings(&a.inner, p, dir, &mut xs_in);
            line_crossings(&a.outer, p, dir, &mut xs_out);
            sort(&mut xs_in);
            sort(&mut xs_out);
            for j in 0..ny - 1 {
                let y = T::from_usize_lossy(j);
                r.cut_y[j * nx + i] = cuts_between(&xs_in, &xs_out, y, y + T::one());
            }
        }
        r
    }

    fn log_polar(a: &AnnulusSpec<T>, n: usize) -> Self {
        let c = a.inner_center();
        let delta = T::TAU() / T::from_usize_lossy(n);
        let r_min = distance_to_polyline(&a.inner, c, true).max(T::min_positive_value());
        let r_max = a.outer.iter().map(|z| (z - c).norm()).fold(T::zero(), T::max);
        let s0 = r_min.ln() - T::lit(2.0) * delta;
        let s1 = r_max.ln() + T::lit(2.0) * delta;
        let nx = ((s1 - s0) / delta).ceil().to_usize().unwrap_or(n) + 1;
        let ny = n;
        let mut r = Self::empty(GridKind::LogPolar, nx, ny, c, delta, s0);
        let mut v_in = Vec::new();
        let mut v_out = Vec::new();
        // Rays: classification and s cuts, in units of delta from s0.
        for j in 0..ny {
            let phi = delta * T::from_usize_lossy(j);
            let dir = Complex::new(phi.cos(), phi.sin());
            v_in.clear();
            v_out.clear();
            line_crossings(&a.inner, c, dir, &mut v_in);
            line_crossings(&a.outer, c, dir, &mut v_out);
            let to_grid = |v: &mut Vec<T>| {
                v.retain(|&t| t > T::zero());
                for t in v.iter_mut() {
                    *t = (t.ln() - s0) / delta;
                }
                sort(v);
            };
            to_grid(&mut v_in);
            to_grid(&mut v_out);
            for i in 0..nx {
                let x = T::from_usize_lossy(i);
                let inside_in = count_above(&v_in, x) % 2 == 1;
                let inside_out = count_above(&v_out, x) % 2 == 1;
                r.class[j * nx + i] = classify(inside_in, inside_out);
            }
            for i in 0..nx - 1 {
                let x = T::from_usize_lossy(i);
                r.cut_x[j * nx + i] = cuts_between(&v_in, &v_out, x, x + T::one());
            }
        }
        // Circles: phi cuts; the last row wraps to row 0.
        for i in 0..nx {
            let rad = (r.s0 + delta * T::from_usize_lossy(i)).exp();
            v_in.clear();
            v_out.clear();
            circle_crossings(&a.inner, c, rad, &mut v_in);
            circle_crossings(&a.outer, c, rad, &mut v_out);
            for v in [&mut v_in, &mut v_out] {
                for t in v.iter_mut() {
                    *t /= delta;
                }
                sort(v);
            }
            for j in 0..ny {
                let y = T::from_usize_lossy(j);
                r.cut_y[j * nx + i] = if j + 1 < ny {
                    cuts_between(&v_in, &v_out, y, y + T::one())
                } else {
                    // Wrap: crossings in [y, ny) or [0, 1) shifted by ny.
                    let ny_t = T::from_usize_lossy(ny);
                    let shift = |v: &Vec<T>| -> Vec<T> {
                        let mut w: Vec<T> = v.iter().map(|&t| if t < T::one() { t + ny_t } else { t }).collect();
                        sort(&mut w);
                        w
                    };
                    cuts_between(&shift(&v_in), &shift(&v_out), y, y + T::one())
                };
            }
        }
        r
    }

    fn neighbor_y(&self, i: usize, j: usize) -> Option<usize> {
        if j + 1 < self.ny {
            Some((j + 1) * self.nx + i)
        } else if self.kind == GridKind::LogPolar {
            Some(i)
        } else {
            None
        }
    }

    fn check_degenerate(&self) -> Result<()> {
        let mut free = 0usize;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                let c = self.class[k];
                free += (c == FREE) as usize;
                let mut nbrs = Vec::with_capacity(2);
                if i + 1 < self.nx {
                    nbrs.push(k + 1);
                }
                if let Some(m) = self.neighbor_y(i, j) {
                    nbrs.push(m);
                }
                for m in nbrs {
                    let d = self.class[m];
                    if (c == INNER && d == OUTER) || (c == OUTER && d == INNER) {
                        return Err(Error::DegenerateAnnulus(format!(
                            "inner and outer curves within one cell on a {}x{} {} grid",
                            self.nx,
                            self.ny,
                            self.kind.name()
                        )));
                    }
                }
            }
        }
        if free == 0 {
            return Err(Error::DegenerateAnnulus("no grid node inside the annulus".into()));
        }
        Ok(())
    }

    fn solve(&self, warm: Option<&Solution<T>>, opts: &ModulusOptions<T>) -> Result<Solution<T>> {
        let nn = self.nx * self.ny;
        let mut index = vec![usize::MAX; nn];
        let mut free_nodes = Vec::new();
        for k in 0..nn {
            if self.class[k] == FREE {
                index[k] = free_nodes.len();
                free_nodes.push(k);
            }
        }
        let m = free_nodes.len();
        let value_of = |c: u8| if c == OUTER { T::one() } else { T::zero() };
        // Off-diagonal entries (free index, conductance), at most 4 per row.
        let mut diag = vec![T::zero(); m];
        let mut rhs = vec![T::zero(); m];
        let mut offs: Vec<[(usize, T); 4]> = vec![[(usize::MAX, T::zero()); 4]; m];
        let mut noff = vec![0u8; m];
        // Edges with their fractions: (node a, node b, cut from a, cut from b).
        let min_cut = T::lit(MIN_CUT);
        let mut boundary_edges: Vec<(usize, T, T)> = Vec::new();
        let mut add_edge = |a: usize, b: usize, cut: (T, T)| {
            let (ca, cb) = (self.class[a], self.class[b]);
            match (ca == FREE, cb == FREE) {
                (true, true) => {
                    let (ia, ib) = (index[a], index[b]);
                    diag[ia] += T::one();
                    diag[ib] += T::one();
                    offs[ia][noff[ia] as usize] = (ib, T::one());
                    noff[ia] += 1;
                    offs[ib][noff[ib] as usize] = (ia, T::one());
                    noff[ib] += 1;
                }
                (true, false) | (false, true) => {
                    let (f, g, frac) = if ca == FREE { (a, cb, cut.0) } else { (b, ca, cut.1) };
                    let frac = if frac.is_finite() { frac } else { T::lit(0.5) };
                    let cond = T::one() / frac.max(min_cut).min(T::one());
                    let i = index[f];
                    diag[i] += cond;
                    rhs[i] += cond * value_of(g);
                    boundary_edges.push((i, cond, value_of(g)));
                }
                (false, false) => {}
            }
        };
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                if i + 1 < self.nx {
                    add_edge(k, k + 1, self.cut_x[k]);
                }
                if let Some(mm) = self.neighbor_y(i, j) {
                    add_edge(k, mm, self.cut_y[k]);
                }
            }
        }
        let apply = |x: &[T], y: &mut [T]| {
            for i in 0..m {
                let mut s = diag[i] * x[i];
                for &(o, c) in &offs[i][..noff[i] as usize] {
                    s -= c * x[o];
                }
                y[i] = s;
            }
        };
        // Initial guess.
        let mut x = vec![T::lit(0.5); m];
        if let Some(w) = warm {
            for (i, &k) in free_nodes.iter().enumerate() {
                let z = self.node_point(k);
                if let Some(v) = w.sample(z) {
                    x[i] = v.max(T::zero()).min(T::one());
                }
            }
        }
        // Jacobi-preconditioned conjugate gradients.
        let mut r = vec![T::zero(); m];
        apply(&x, &mut r);
        for i in 0..m {
            r[i] = rhs[i] - r[i];
        }
        let bnorm = rhs.iter().map(|v| *v * *v).sum::<T>().sqrt().max(T::min_positive_value());
        let mut z: Vec<T> = (0..m).map(|i| r[i] / diag[i]).collect();
        let mut p = z.clone();
        let mut rz: T = (0..m).map(|i| r[i] * z[i]).sum();
        let mut ap = vec![T::zero(); m];
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let rn = r.iter().map(|v| *v * *v).sum::<T>().sqrt();
            if rn <= opts.tol * bnorm {
                converged = true;
                break;
            }
            apply(&p, &mut ap);
            let pap: T = (0..m).map(|i| p[i] * ap[i]).sum();
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..m {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..m {
                z[i] = r[i] / diag[i];
            }
            let rz_new: T = (0..m).map(|i| r[i] * z[i]).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..m {
                p[i] = z[i] + beta * p[i];
            }
        }
        if !converged {
            let rn = r.iter().map(|v| *v * *v).sum::<T>().sqrt();
            if !(rn <= opts.tol.sqrt() * bnorm) {
                return Err(Error::NonConvergence(format!(
                    "CG residual {} after {} iterations",
                    (rn / bnorm).to_f64_lossy(),
                    opts.max_iter
                )));
            }
        }
        // Energy: interior edges once each, boundary edges from their list.
        let mut energy = T::zero();
        for i in 0..m {
            for &(o, c) in &offs[i][..noff[i] as usize] {
                if o > i {
                    let d = x[i] - x[o];
                    energy += c * d * d;
                }
            }
        }
        for &(i, c, g) in &boundary_edges {
            let d = x[i] - g;
            energy += c * d * d;
        }
        let mut u: Vec<T> = self.class.iter().map(|&c| value_of(c)).collect();
        for (i, &k) in free_nodes.iter().enumerate() {
            u[k] = x[i];
        }
        Ok(Solution {
            raster_kind: self.kind,
            nx: self.nx,
            ny: self.ny,
            origin: self.origin,
            step: self.step,
            s0: self.s0,
            u,
            energy,
            converged,
        })
    }

    fn node_point(&self, k: usize) -> Complex<T> {
        let i = T::from_usize_lossy(k % self.nx);
        let j = T::from_usize_lossy(k / self.nx);
        match self.kind {
            GridKind::Cartesian => Complex::new(self.origin.re + self.step * i, self.origin.im + self.step * j),
            GridKind::LogPolar => self.origin + Complex::from_polar((self.s0 + self.step * i).exp(), self.step * j),
        }
    }
}

fn classify(inside_inner: bool, inside_outer: bool) -> u8 {
    if inside_inner {
        INNER
    } else if inside_outer {
        FREE
    } else {
        OUTER
    }
}

fn sort<T: Real>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
}

/// Crossings strictly beyond `x` (the parity gives inside/outside).
fn count_above<T: Real>(v: &[T], x: T) -> usize {
    v.len() - v.partition_point(|&t| t <= x)
}

/// Fractions from `x0` to the first crossing in `(x0, x1)` and from `x1`
/// back to the last one, over both curves; infinite when there is none.
fn cuts_between<T: Real>(a: &[T], b: &[T], x0: T, x1: T) -> (T, T) {
    let mut first = T::infinity();
    let mut last = T::infinity();
    for v in [a, b] {
        let lo = v.partition_point(|&t| t <= x0);
        let hi = v.partition_point(|&t| t < x1);
        if lo < hi {
            first = first.min(v[lo] - x0);
            last = last.min(x1 - v[hi - 1]);
        }
    }
    (first, last)
}
