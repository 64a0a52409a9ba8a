use std::collections::HashMap;

use super::Vec2;

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed area (positive for counterclockwise loops).
pub fn polygon_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| cross(pts[i], pts[(i + 1) % n])).sum::<f64>() * 0.5
}

pub fn polygon_centroid(pts: &[Vec2]) -> Vec2 {
    let n = pts.len();
    // shift to the first vertex for accuracy on small cells
    let o = pts[0];
    let mut acc = Vec2::zeros();
    let mut twice_area = 0.0;
    for i in 0..n {
        let (p, q) = (pts[i] - o, pts[(i + 1) % n] - o);
        let c = cross(p, q);
        twice_area += c;
        acc += (p + q) * c;
    }
    o + acc / (3.0 * twice_area)
}

pub fn polygon_diameter(pts: &[Vec2]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

/// Even-odd point inclusion test.
pub fn point_in_polygon(p: Vec2, pts: &[Vec2]) -> bool {
    let n = pts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// True when the closed segments `ab` and `cd` properly cross or touch.
pub fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Vec2, q: Vec2, r: Vec2, o: f64| {
        o == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
}

/// Simple (non self-intersecting) with positive orientation. Consecutive
/// collinear vertices are allowed.
pub fn is_simple_ccw(pts: &[Vec2]) -> bool {
    let n = pts.len();
    if n < 3 || polygon_area(pts) <= 0.0 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in i + 1..n {
            // skip adjacent edges
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Whether `p` sees the whole polygon, i.e. lies in the kernel: left of (or
/// on) every edge line of a counterclockwise loop, up to `tol` times the edge
/// length.
pub fn in_kernel(p: Vec2, pts: &[Vec2], tol: f64) -> bool {
    let n = pts.len();
    (0..n).all(|i| {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let e = b - a;
        cross(e, p - a) >= -tol * e.norm_squared()
    })
}

/// Distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let l2 = e.norm_squared();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&e) / l2).clamp(0.0, 1.0);
    (p - (a + e * t)).norm()
}

/// Clips a convex counterclockwise polygon against `{x : (x - origin)·normal <= 0}`.
pub fn clip_halfplane(poly: &[Vec2], origin: Vec2, normal: Vec2) -> Vec<Vec2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    let scale = normal.norm();
    let tol = 1e-14 * scale;
    let side = |p: Vec2| {
        let s = (p - origin).dot(&normal);
        if s.abs() <= tol {
            0.0
        } else {
            s
        }
    };
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (sp, sq) = (side(p), side(q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Uniform bucket grid over a point cloud for neighborhood queries.
pub(crate) struct PointGrid {
    origin: Vec2,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl PointGrid {
    pub fn new(points: &[Vec2], target_per_axis: usize) -> Self {
        let (mut lo, mut hi) = (Vec2::repeat(f64::MAX), Vec2::repeat(f64::MIN));
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if points.is_empty() {
            lo = Vec2::zeros();
            hi = Vec2::repeat(1.0);
        }
        let ext = (hi - lo).max().max(1e-300);
        let cell = ext / target_per_axis.max(1) as f64;
        let mut grid = PointGrid {
            origin: lo,
            cell,
            buckets: HashMap::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let key = grid.key(*p);
            grid.buckets.entry(key).or_default().push(i);
        }
        grid
    }

    fn key(&self, p: Vec2) -> (i64, i64) {
        let q = (p - self.origin) / self.cell;
        (q.x.floor() as i64, q.y.floor() as i64)
    }

    /// Indices of points within the bounding box of `ab` inflated by `pad`.
    pub fn query_segment(&self, a: Vec2, b: Vec2, pad: f64) -> Vec<usize> {
        let lo = a.inf(&b) - Vec2::repeat(pad);
        let hi = a.sup(&b) + Vec2::repeat(pad);
        let (k0, k1) = (self.key(lo), self.key(hi));
        let mut out = Vec::new();
        for i in k0.0..=k1.0 {
            for j in k0.1..=k1.1 {
                if let Some(b) = self.buckets.get(&(i, j)) {
                    out.extend_from_slice(b);
                }
            }
        }
        out.sort_unstable();
        out
    }
}
