use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geometry::is_simple_ccw;
use super::{build_topology, PolyMesh, Vec2};
use crate::error::{Error, Result};

const MAX_RETRIES: usize = 100;

/// Octagonal mesh of the unit square with `2 n²` cells.
///
/// Each grid square is cut along its diagonal, the diagonal is split at its
/// midpoint (so every triangle becomes a quadrilateral), all of these nodes
/// are perturbed, and finally a midpoint is inserted on every edge.
///
/// Interior nodes move uniformly inside a disc of radius `perturb / n`;
/// boundary nodes slide along their side by at most the same amount and the
/// four corners stay put.
pub fn generate_octag(n: usize, perturb: f64, seed: u64) -> Result<PolyMesh> {
    if n == 0 {
        return Err(Error::Generation("octag needs n >= 1".into()));
    }
    if !(0.0..0.3).contains(&perturb) {
        return Err(Error::Generation(format!(
            "octag perturbation {perturb} outside [0, 0.3)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (base, quads) = structured_quads(n);
    for _ in 0..MAX_RETRIES {
        let pts = perturbed(&base, n, perturb, &mut rng);
        let ok = quads.iter().all(|q| {
            let poly: Vec<Vec2> = q.iter().map(|&i| pts[i]).collect();
            is_simple_ccw(&poly)
        });
        if ok {
            return insert_midpoints(pts, &quads);
        }
    }
    Err(Error::Generation(format!(
        "no valid octag perturbation after {MAX_RETRIES} attempts"
    )))
}

/// Grid nodes followed by one node per diagonal midpoint; two quadrilaterals
/// per grid square.
fn structured_quads(n: usize) -> (Vec<Vec2>, Vec<[usize; 4]>) {
    let h = 1.0 / n as f64;
    let node = |i: usize, j: usize| i + j * (n + 1);
    let mut pts = Vec::with_capacity((n + 1) * (n + 1) + n * n);
    for j in 0..=n {
        for i in 0..=n {
            pts.push(Vec2::new(i as f64 * h, j as f64 * h));
        }
    }
    let mut quads = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let m = pts.len();
            pts.push(Vec2::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
            let (p00, p10, p11, p01) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
            quads.push([p00, p10, p11, m]);
            quads.push([p00, m, p11, p01]);
        }
    }
    (pts, quads)
}

fn perturbed(base: &[Vec2], n: usize, perturb: f64, rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let r = perturb / n as f64;
    let on = |v: f64| v == 0.0 || v == 1.0;
    base.iter()
        .map(|&p| {
            if r == 0.0 {
                return p;
            }
            match (on(p.x), on(p.y)) {
                (true, true) => p,
                (true, false) => Vec2::new(p.x, p.y + rng.gen_range(-r..=r)),
                (false, true) => Vec2::new(p.x + rng.gen_range(-r..=r), p.y),
                (false, false) => {
                    let rad = r * rng.gen::<f64>().sqrt();
                    let ang = std::f64::consts::TAU * rng.gen::<f64>();
                    p + Vec2::new(rad * ang.cos(), rad * ang.sin())
                }
            }
        })
        .collect()
}

fn insert_midpoints(mut pts: Vec<Vec2>, quads: &[[usize; 4]]) -> Result<PolyMesh> {
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut cells = Vec::with_capacity(quads.len());
    for q in quads {
        let mut cell = Vec::with_capacity(8);
        for i in 0..4 {
            let (a, b) = (q[i], q[(i + 1) % 4]);
            let key = (a.min(b), a.max(b));
            let m = *mids.entry(key).or_insert_with(|| {
                pts.push((pts[a] + pts[b]) * 0.5);
                pts.len() - 1
            });
            cell.push(a);
            cell.push(m);
        }
        cells.push(cell);
    }
    build_topology(pts, cells)
}
