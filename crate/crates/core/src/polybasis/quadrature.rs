use nalgebra::DMatrix;

use super::monomial::ScaledMonomialBasis2D;
use crate::error::{Error, Result};
use crate::mesh::geometry::{in_kernel, polygon_area, polygon_centroid};
use crate::mesh::Vec2;

/// Physical quadrature points and weights on a cell or a facet.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    /// Highest total degree integrated exactly.
    pub exactness: usize,
    /// Segment rules only: coordinate of each point relative to the
    /// midpoint, in units of the segment length, taken from the reference
    /// nodes. Recomputing it from `points` loses digits on short segments.
    pub local: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre rule on the segment `ab`, exact to degree `exactness`;
/// the weights sum to the segment length.
pub fn segment_quadrature(a: Vec2, b: Vec2, exactness: usize) -> QuadratureRule {
    let n = (exactness + 2) / 2;
    let (x, w) = gauss_legendre(n.max(1));
    let len = (b - a).norm();
    QuadratureRule {
        points: x.iter().map(|&t| a + (b - a) * (0.5 * (t + 1.0))).collect(),
        weights: w.iter().map(|&wi| 0.5 * len * wi).collect(),
        exactness,
        local: x.iter().map(|&t| 0.5 * t).collect(),
    }
}

/// Collapsed (Duffy) tensor Gauss rule on the triangle `abc`. All weights
/// are positive.
fn push_triangle(a: Vec2, b: Vec2, c: Vec2, exactness: usize, rule: &mut QuadratureRule) {
    let area = 0.5 * ((b - a).x * (c - a).y - (b - a).y * (c - a).x);
    if area <= 0.0 {
        return;
    }
    // the collapse Jacobian adds one degree in the radial direction
    let (xu, wu) = gauss_legendre((exactness + 3) / 2);
    let (xv, wv) = gauss_legendre((exactness + 2) / 2);
    for (&u, &wui) in xu.iter().zip(&wu) {
        let u = 0.5 * (u + 1.0);
        for (&v, &wvi) in xv.iter().zip(&wv) {
            let v = 0.5 * (v + 1.0);
            let p = a * (1.0 - u) + (b * (1.0 - v) + c * v) * u;
            rule.points.push(p);
            rule.weights.push(0.25 * wui * wvi * 2.0 * area * u);
        }
    }
}

/// Rule on a simple counterclockwise polygon, exact for polynomials of degree
/// `<= exactness`. Cells whose centroid lies in the kernel are fanned from
/// the centroid; other cells are ear-clipped.
pub fn polygon_quadrature(pts: &[Vec2], exactness: usize) -> QuadratureRule {
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        exactness,
        local: Vec::new(),
    };
    let c = polygon_centroid(pts);
    if in_kernel(c, pts, 1e-12) {
        let n = pts.len();
        for i in 0..n {
            push_triangle(c, pts[i], pts[(i + 1) % n], exactness, &mut rule);
        }
    } else {
        for [a, b, t] in ear_clip(pts) {
            push_triangle(pts[a], pts[b], pts[t], exactness, &mut rule);
        }
    }
    rule
}

/// Ear-clipping triangulation of a simple counterclockwise polygon.
pub fn ear_clip(pts: &[Vec2]) -> Vec<[usize; 3]> {
    let cross = |o: Vec2, a: Vec2, b: Vec2| (a - o).x * (b - o).y - (a - o).y * (b - o).x;
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut tris = Vec::with_capacity(pts.len().saturating_sub(2));
    let scale = polygon_area(pts).abs().max(1e-300);
    while idx.len() > 3 {
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (ip, ic, inx) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (a, b, c) = (pts[ip], pts[ic], pts[inx]);
            let turn = cross(a, b, c);
            if turn.abs() <= 1e-14 * scale {
                // collinear vertex: drop it without emitting a triangle
                idx.remove(i);
                clipped = true;
                break;
            }
            if turn < 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ip
                    && j != ic
                    && j != inx
                    && cross(a, b, pts[j]) >= 0.0
                    && cross(b, c, pts[j]) >= 0.0
                    && cross(c, a, pts[j]) >= 0.0
            });
            if !blocked {
                tris.push([ip, ic, inx]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // numerically degenerate remainder: fan it
            for i in 1..idx.len() - 1 {
                tris.push([idx[0], idx[i], idx[i + 1]]);
            }
            return tris;
        }
    }
    if idx.len() == 3 {
        tris.push([idx[0], idx[1], idx[2]]);
    }
    tris
}

/// `H[α][β] = ∫ m_α m_β`. The rule must be exact to degree `2 * basis.degree`.
pub fn monomial_mass_matrix(basis: &ScaledMonomialBasis2D, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    let n = basis.len();
    let mut h = DMatrix::zeros(n, n);
    let mut v = vec![0.0; n];
    for (&p, &w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_into(p, &mut v);
        for i in 0..n {
            let wi = w * v[i];
            for j in i..n {
                h[(i, j)] += wi * v[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
    }
    if h.clone().cholesky().is_none() {
        return Err(Error::Contract(
            "monomial mass matrix is not positive definite".into(),
        ));
    }
    Ok(h)
}
