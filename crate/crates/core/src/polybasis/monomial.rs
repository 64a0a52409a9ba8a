use crate::mesh::Vec2;

/// Number of bivariate monomials of total degree `<= k`; zero for negative `k`.
pub fn dim_p2(k: isize) -> usize {
    if k < 0 {
        0
    } else {
        let k = k as usize;
        (k + 1) * (k + 2) / 2
    }
}

/// Exponents `(a, b)` of `x^a y^b` in graded-lex order:
/// `1, x, y, x², xy, y², ...`.
pub fn exponents(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_p2(k as isize));
    for d in 0..=k {
        for a in (0..=d).rev() {
            out.push((a, d - a));
        }
    }
    out
}

/// Position of `x^a y^b` in the graded-lex order.
pub fn exponent_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + (d - a)
}

/// Scaled monomials `((x - x_E) / h_E)^α` with `|α| <= degree`.
#[derive(Debug, Clone)]
pub struct ScaledMonomialBasis2D {
    pub degree: usize,
    pub center: Vec2,
    pub h: f64,
    exps: Vec<(usize, usize)>,
}

impl ScaledMonomialBasis2D {
    pub fn new(degree: usize, center: Vec2, h: f64) -> Self {
        ScaledMonomialBasis2D {
            degree,
            center,
            h,
            exps: exponents(degree),
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exps
    }

    fn powers(&self, x: Vec2) -> (Vec<f64>, Vec<f64>) {
        let s = (x - self.center) / self.h;
        let mut px = vec![1.0; self.degree + 1];
        let mut py = vec![1.0; self.degree + 1];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * s.x;
            py[i] = py[i - 1] * s.y;
        }
        (px, py)
    }

    pub fn eval_into(&self, x: Vec2, out: &mut [f64]) {
        let (px, py) = self.powers(x);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exps) {
            *o = px[a] * py[b];
        }
    }

    pub fn eval(&self, x: Vec2) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.eval_into(x, &mut v);
        v
    }

    pub fn grad(&self, x: Vec2) -> Vec<Vec2> {
        let (px, py) = self.powers(x);
        let inv = 1.0 / self.h;
        self.exps
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 };
                let dy = if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 };
                Vec2::new(dx * inv, dy * inv)
            })
            .collect()
    }

    /// Evaluates the polynomial with the given coefficients.
    pub fn eval_poly(&self, coeffs: &[f64], x: Vec2) -> f64 {
        let (px, py) = self.powers(x);
        coeffs
            .iter()
            .zip(&self.exps)
            .map(|(c, &(a, b))| c * px[a] * py[b])
            .sum()
    }

    pub fn grad_poly(&self, coeffs: &[f64], x: Vec2) -> Vec2 {
        self.grad(x)
            .iter()
            .zip(coeffs)
            .fold(Vec2::zeros(), |acc, (g, c)| acc + g * *c)
    }
}

/// Scaled monomials `((s - s_e) / h_e)^ℓ`, `ℓ < count`, in the arc-length
/// coordinate of a straight facet running from `start` along `tangent`.
#[derive(Debug, Clone)]
pub struct ScaledMonomialBasis1D {
    pub count: usize,
    pub midpoint: Vec2,
    pub tangent: Vec2,
    pub h: f64,
}

impl ScaledMonomialBasis1D {
    pub fn new(count: usize, midpoint: Vec2, tangent: Vec2, h: f64) -> Self {
        ScaledMonomialBasis1D {
            count,
            midpoint,
            tangent,
            h,
        }
    }

    /// Local coordinate `(s - s_e) / h_e` of a point on the facet.
    pub fn coord(&self, x: Vec2) -> f64 {
        (x - self.midpoint).dot(&self.tangent) / self.h
    }

    pub fn eval_into(&self, x: Vec2, out: &mut [f64]) {
        self.eval_local_into(self.coord(x), out);
    }

    /// Values at the local coordinate `t`, as stored in a facet rule.
    pub fn eval_local_into(&self, t: f64, out: &mut [f64]) {
        let mut p = 1.0;
        for o in out.iter_mut().take(self.count) {
            *o = p;
            p *= t;
        }
    }

    pub fn eval(&self, x: Vec2) -> Vec<f64> {
        let mut v = vec![0.0; self.count];
        self.eval_into(x, &mut v);
        v
    }

    pub fn eval_local(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.count];
        self.eval_local_into(t, &mut v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order() {
        assert_eq!(
            exponents(2),
            vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        );
        for (i, &(a, b)) in exponents(4).iter().enumerate() {
            assert_eq!(exponent_index(a, b), i);
        }
        assert_eq!(dim_p2(3), 10);
        assert_eq!(dim_p2(-1), 0);
    }

    #[test]
    fn values_at_center() {
        let b = ScaledMonomialBasis2D::new(3, Vec2::new(0.3, 0.7), 0.2);
        let v = b.eval(Vec2::new(0.3, 0.7));
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|&x| x == 0.0));
        let g = b.grad(Vec2::new(0.9, -0.1));
        assert_eq!(g[0], Vec2::zeros());
        assert!((g[1].x - 5.0).abs() < 1e-14 && g[1].y == 0.0);
    }

    #[test]
    fn gradients_match_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = 0.37;
        let b = ScaledMonomialBasis2D::new(3, Vec2::new(0.1, -0.2), h);
        let step = 1e-7 * h;
        for _ in 0..10 {
            let x = Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let g = b.grad(x);
            let ex = Vec2::new(step, 0.0);
            let ey = Vec2::new(0.0, step);
            let (vxp, vxm) = (b.eval(x + ex), b.eval(x - ex));
            let (vyp, vym) = (b.eval(x + ey), b.eval(x - ey));
            for i in 0..b.len() {
                let fd = Vec2::new(
                    (vxp[i] - vxm[i]) / (2.0 * step),
                    (vyp[i] - vym[i]) / (2.0 * step),
                );
                assert!((fd - g[i]).norm() < 1e-6, "monomial {i}: {fd:?} vs {:?}", g[i]);
            }
        }
    }

    #[test]
    fn one_dimensional_basis() {
        let b = ScaledMonomialBasis1D::new(3, Vec2::new(0.5, 0.0), Vec2::new(1.0, 0.0), 2.0);
        assert_eq!(b.eval(Vec2::new(1.5, 0.0)), vec![1.0, 0.5, 0.25]);
        assert_eq!(b.eval(Vec2::new(0.5, 0.0)), vec![1.0, 0.0, 0.0]);
    }
}
