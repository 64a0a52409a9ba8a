//! Global polynomial solutions are reproduced exactly.

use std::sync::Arc;

use rand::SeedableRng;
use vemcip::forms::ModelParams;
use vemcip::mesh::{generate_octag, generate_voronoi, PolyMesh, Vec2};
use vemcip::system::{assemble, solve, Discretization};
use vemcip::vemspace::interpolate;
use vemcip::verification::{error_h1, error_l2, ConstantField, ExactSolution, ManufacturedProblem, Polynomial};

fn norms(disc: &Discretization, u: &dyn ExactSolution) -> (f64, f64) {
    let ex = disc.data_exactness();
    let mut h1 = 0.0;
    let mut l2 = 0.0;
    for c in 0..disc.mesh.num_cells() {
        let rule = vemcip::polybasis::cell_quadrature(disc.mesh, c, ex);
        h1 += rule.integrate(|x| u.grad(x).norm_squared());
        l2 += rule.integrate(|x| u.value(x).powi(2));
    }
    (h1.sqrt(), l2.sqrt())
}

fn check(mesh: &PolyMesh, k: usize, eps: f64, seed: u64) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let poly = Arc::new(Polynomial::random(k as u32, &mut rng));
    let problem = ManufacturedProblem::new(
        "poly",
        poly.clone(),
        Arc::new(ConstantField(Vec2::new(0.8, -0.6))),
        eps,
        1.0,
    );
    let params = ModelParams { eps, ..ModelParams::default() };
    let disc = Discretization::new(mesh, k).unwrap();
    let system = assemble(&disc, &params, &problem).unwrap();

    // the interpolant satisfies the discrete equations
    let ui = interpolate(mesh, &disc.dofmap, &|x| poly.value(x), disc.data_exactness());
    let r = system.matrix.mul_vec(&ui) - &system.rhs;
    assert!(r.norm() <= 1e-9 * system.rhs.norm(), "k={k} eps={eps}: residual {:e}", r.norm() / system.rhs.norm());

    let sol = solve(&system).unwrap();
    assert!(sol.residual <= 1e-10);
    assert!((&sol.x - &ui).amax() <= 1e-8 * ui.amax());
    let (h1, l2) = norms(&disc, poly.as_ref());
    let eh1 = error_h1(&disc, &sol.x, poly.as_ref()) / h1;
    let el2 = error_l2(&disc, &sol.x, poly.as_ref()) / l2;
    assert!(eh1 <= 1e-8 && el2 <= 1e-8, "k={k} eps={eps}: {eh1:e} {el2:e}");
}

#[test]
fn patch_test_octag() {
    let mesh = generate_octag(4, 0.1, 3).unwrap();
    for k in 1..=3 {
        for eps in [1.0, 1e-5] {
            check(&mesh, k, eps, 10 + k as u64);
        }
    }
}

#[test]
fn patch_test_voronoi() {
    let mesh = generate_voronoi(64, 2, 3).unwrap();
    for k in 1..=3 {
        for eps in [1.0, 1e-5] {
            check(&mesh, k, eps, 20 + k as u64);
        }
    }
}
