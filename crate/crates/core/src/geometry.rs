//! Planar predicates on closed polylines.

use num_complex::Complex;

use crate::scalar::Real;

/// Winding number of the closed polyline `poly` around `z`.
pub fn winding_number<T: Real>(poly: &[Complex<T>], z: Complex<T>) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b.re - a.re) * (z.im - a.im) - (z.re - a.re) * (b.im - a.im);
        if a.im <= z.im {
            if b.im > z.im && cross > T::zero() {
                wn += 1;
            }
        } else if b.im <= z.im && cross < T::zero() {
            wn -= 1;
        }
    }
    wn
}

/// Nonzero winding.
pub fn point_in_polygon<T: Real>(poly: &[Complex<T>], z: Complex<T>) -> bool {
    winding_number(poly, z) != 0
}

pub fn point_segment_distance<T: Real>(z: Complex<T>, a: Complex<T>, b: Complex<T>) -> T {
    let ab = b - a;
    let l2 = ab.norm_sqr();
    if l2 == T::zero() {
        return (z - a).norm();
    }
    let s = ((z - a).re * ab.re + (z - a).im * ab.im) / l2;
    let s = s.max(T::zero()).min(T::one());
    (z - (a + ab * s)).norm()
}

/// Distance from `z` to a closed polyline.
pub fn distance_to_polyline<T: Real>(poly: &[Complex<T>], z: Complex<T>, closed: bool) -> T {
    let n = poly.len();
    if n == 1 {
        return (poly[0] - z).norm();
    }
    let m = if closed { n } else { n - 1 };
    (0..m)
        .map(|i| point_segment_distance(z, poly[i], poly[(i + 1) % n]))
        .fold(T::infinity(), T::min)
}

/// Axis-aligned bounding box `(min, max)`.
pub fn bounding_box<T: Real>(poly: &[Complex<T>]) -> (Complex<T>, Complex<T>) {
    let mut lo = Complex::new(T::infinity(), T::infinity());
    let mut hi = Complex::new(T::neg_infinity(), T::neg_infinity());
    for z in poly {
        lo.re = lo.re.min(z.re);
        lo.im = lo.im.min(z.im);
        hi.re = hi.re.max(z.re);
        hi.im = hi.im.max(z.im);
    }
    (lo, hi)
}

pub fn diameter_bound<T: Real>(poly: &[Complex<T>]) -> T {
    let (lo, hi) = bounding_box(poly);
    (hi - lo).norm()
}

/// Longest segment of a closed polyline.
pub fn max_segment<T: Real>(poly: &[Complex<T>]) -> T {
    let n = poly.len();
    (0..n)
        .map(|i| (poly[(i + 1) % n] - poly[i]).norm())
        .fold(T::zero(), T::max)
}

/// Signed area (positive for counterclockwise).
pub fn signed_area<T: Real>(poly: &[Complex<T>]) -> T {
    let n = poly.len();
    let mut s = T::zero();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a.re * b.im - b.re * a.im;
    }
    s / T::lit(2.0)
}

fn orient<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>) -> T {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn segments_cross<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < T::zero() && o3 * o4 < T::zero()
}

/// Proper crossings between non-adjacent segments of a closed polyline.
/// Uses a uniform bucket grid, so it stays near-linear for well-spread
/// vertices.
pub fn self_intersections<T: Real>(poly: &[Complex<T>]) -> usize {
    let n = poly.len();
    if n < 4 {
        return 0;
    }
    let (lo, hi) = bounding_box(poly);
    let cells = ((n as f64).sqrt().ceil() as usize).clamp(1, 1024);
    let w = (hi.re - lo.re).max(T::min_positive_value());
    let h = (hi.im - lo.im).max(T::min_positive_value());
    let cell_of = |x: T, lo: T, span: T| -> usize {
        let v = ((x - lo) / span * T::from_usize_lossy(cells)).to_usize().unwrap_or(0);
        v.min(cells - 1)
    };
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (x0, x1) = (cell_of(a.re.min(b.re), lo.re, w), cell_of(a.re.max(b.re), lo.re, w));
        let (y0, y1) = (cell_of(a.im.min(b.im), lo.im, h), cell_of(a.im.max(b.im), lo.im, h));
        for x in x0..=x1 {
            for y in y0..=y1 {
                grid[y * cells + x].push(i);
            }
        }
    }
    let mut count = 0;
    let mut seen = std::collections::HashSet::new();
    for bucket in &grid {
        for (k, &i) in bucket.iter().enumerate() {
            for &j in &bucket[k + 1..] {
                let (i, j) = (i.min(j), i.max(j));
                if j == i + 1 || (i == 0 && j == n - 1) || !seen.insert((i, j)) {
                    continue;
                }
                if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// One-sided Hausdorff distance `sup_{a in from} dist(a, to)`, where `to`
/// is a union of closed polylines.
pub fn directed_hausdorff<T: Real>(from: &[Complex<T>], to: &[Vec<Complex<T>>]) -> T {
    from.iter()
        .map(|&z| {
            to.iter()
                .map(|poly| distance_to_polyline(poly, z, true))
                .fold(T::infinity(), T::min)
        })
        .fold(T::zero(), T::max)
}
