use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geometry::{clip_halfplane, polygon_centroid, PointGrid};
use super::{build_topology, PolyMesh, Vec2};
use crate::error::{Error, Result};

/// Vertices closer than this are the same Voronoi vertex.
const MERGE_TOL: f64 = 1e-10;
const MAX_RETRIES: usize = 100;

/// Voronoi tessellation of `n_cells` uniformly random seeds clipped to the
/// unit square, followed by `lloyd_iters` centroidal smoothing steps.
pub fn generate_voronoi(n_cells: usize, lloyd_iters: usize, seed: u64) -> Result<PolyMesh> {
    if n_cells == 0 {
        return Err(Error::Generation("voronoi needs at least one cell".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<Vec2> = (0..n_cells)
        .map(|_| Vec2::new(rng.gen(), rng.gen()))
        .collect();
    build_from_seeds(seeds, lloyd_iters, &mut rng)
}

/// Voronoi tessellation of the given seeds (which must lie in the unit square).
pub fn voronoi_from_seeds(seeds: &[Vec2], lloyd_iters: usize) -> Result<PolyMesh> {
    if seeds.is_empty() {
        return Err(Error::Generation("voronoi needs at least one seed".into()));
    }
    if let Some(p) = seeds
        .iter()
        .find(|p| !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y))
    {
        return Err(Error::Generation(format!("seed {p:?} outside the unit square")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    build_from_seeds(seeds.to_vec(), lloyd_iters, &mut rng)
}

fn build_from_seeds(
    mut seeds: Vec<Vec2>,
    lloyd_iters: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PolyMesh> {
    let mut cells = None;
    for it in 0..=lloyd_iters {
        let mut attempt = 0;
        while has_duplicates(&seeds) {
            attempt += 1;
            if attempt > MAX_RETRIES {
                return Err(Error::Generation("could not separate duplicate seeds".into()));
            }
            jitter_duplicates(&mut seeds, rng);
        }
        let polys = clipped_cells(&seeds);
        if it < lloyd_iters {
            seeds = polys.iter().map(|p| polygon_centroid(p)).collect();
        } else {
            cells = Some(polys);
        }
    }
    let polys = cells.expect("at least one pass");
    let (vertices, loops) = merge_vertices(&polys);
    let loops = insert_hanging_vertices(&vertices, loops);
    build_topology(vertices, loops)
}

fn bucket_key(p: Vec2, nb: usize) -> (usize, usize) {
    let f = |v: f64| ((v * nb as f64).floor().max(0.0) as usize).min(nb - 1);
    (f(p.x), f(p.y))
}

fn buckets(seeds: &[Vec2], nb: usize) -> Vec<Vec<usize>> {
    let mut b = vec![Vec::new(); nb * nb];
    for (i, &s) in seeds.iter().enumerate() {
        let (x, y) = bucket_key(s, nb);
        b[x + y * nb].push(i);
    }
    b
}

fn has_duplicates(seeds: &[Vec2]) -> bool {
    let nb = ((seeds.len() as f64).sqrt() as usize).max(1);
    let b = buckets(seeds, nb);
    b.iter().any(|list| {
        list.iter().enumerate().any(|(a, &i)| {
            list[a + 1..]
                .iter()
                .any(|&j| (seeds[i] - seeds[j]).norm() < 1e3 * MERGE_TOL)
        })
    })
}

fn jitter_duplicates(seeds: &mut [Vec2], rng: &mut ChaCha8Rng) {
    let n = seeds.len();
    for i in 0..n {
        for j in i + 1..n {
            if (seeds[i] - seeds[j]).norm() < 1e3 * MERGE_TOL {
                let d = Vec2::new(rng.gen_range(-1e-6..1e-6), rng.gen_range(-1e-6..1e-6));
                seeds[j] = (seeds[j] + d).map(|v| v.clamp(0.0, 1.0));
            }
        }
    }
}

/// Voronoi cell of each seed, computed by clipping the unit square with the
/// bisectors of nearby seeds. Rings of buckets are visited outward until no
/// farther seed can cut the current cell.
fn clipped_cells(seeds: &[Vec2]) -> Vec<Vec<Vec2>> {
    use rayon::prelude::*;

    let nb = ((seeds.len() as f64).sqrt() as usize).max(1);
    let cs = 1.0 / nb as f64;
    let b = buckets(seeds, nb);
    let square = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(1.0, 1.0),
        Vec2::new(0.0, 1.0),
    ];
    (0..seeds.len())
        .into_par_iter()
        .map(|i| {
            let s = seeds[i];
            let (bx, by) = bucket_key(s, nb);
            let mut poly = square.clone();
            for r in 0..nb as i64 {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs().max(dy.abs()) != r {
                            continue;
                        }
                        let (x, y) = (bx as i64 + dx, by as i64 + dy);
                        if x < 0 || y < 0 || x >= nb as i64 || y >= nb as i64 {
                            continue;
                        }
                        for &j in &b[x as usize + y as usize * nb] {
                            if j == i {
                                continue;
                            }
                            let t = seeds[j];
                            poly = clip_halfplane(&poly, (s + t) * 0.5, t - s);
                        }
                    }
                }
                let reach = poly.iter().map(|v| (v - s).norm()).fold(0.0, f64::max);
                if r as f64 * cs >= 2.0 * reach {
                    break;
                }
            }
            dedup_loop(poly)
        })
        .collect()
}

fn dedup_loop(mut poly: Vec<Vec2>) -> Vec<Vec2> {
    poly.dedup_by(|a, b| (*a - *b).norm() < MERGE_TOL);
    while poly.len() > 1 && (poly[0] - poly[poly.len() - 1]).norm() < MERGE_TOL {
        poly.pop();
    }
    poly
}

fn merge_vertices(polys: &[Vec<Vec2>]) -> (Vec<Vec2>, Vec<Vec<usize>>) {
    let key = |p: Vec2| ((p.x / MERGE_TOL).floor() as i64, (p.y / MERGE_TOL).floor() as i64);
    let mut table: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut loops = Vec::with_capacity(polys.len());
    for poly in polys {
        let mut ids = Vec::with_capacity(poly.len());
        for &p in poly {
            let (kx, ky) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = table.get(&(kx + dx, ky + dy)) {
                        if let Some(&v) = list.iter().find(|&&v| (vertices[v] - p).norm() < MERGE_TOL) {
                            found = Some(v);
                            break 'search;
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                vertices.push(p);
                table.entry((kx, ky)).or_default().push(vertices.len() - 1);
                vertices.len() - 1
            });
            if ids.last() != Some(&id) {
                ids.push(id);
            }
        }
        while ids.len() > 1 && ids.first() == ids.last() {
            ids.pop();
        }
        loops.push(ids);
    }
    (vertices, loops)
}

/// Splits cell edges at vertices of neighboring cells that lie on them, so
/// that nearly degenerate Voronoi vertices produce a conforming mesh.
fn insert_hanging_vertices(vertices: &[Vec2], loops: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let nb = ((vertices.len() as f64).sqrt() as usize).max(1);
    let grid = PointGrid::new(vertices, nb);
    loops
        .into_iter()
        .map(|cell| {
            let n = cell.len();
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (cell[i], cell[(i + 1) % n]);
                out.push(a);
                let (pa, pb) = (vertices[a], vertices[b]);
                let e = pb - pa;
                let l2 = e.norm_squared();
                let mut hanging: Vec<(f64, usize)> = grid
                    .query_segment(pa, pb, MERGE_TOL)
                    .into_iter()
                    .filter(|&v| v != a && v != b)
                    .filter_map(|v| {
                        let d = vertices[v] - pa;
                        let t = d.dot(&e) / l2;
                        let off = (d - e * t).norm();
                        (t > 0.0 && t < 1.0 && off < MERGE_TOL).then_some((t, v))
                    })
                    .collect();
                hanging.sort_by(|x, y| x.0.total_cmp(&y.0));
                out.extend(hanging.into_iter().map(|(_, v)| v));
            }
            out
        })
        .collect()
}
