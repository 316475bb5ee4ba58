use crate::{Error, Result};

/// Highest exactness degree [`quadrature_rule`] can provide.
pub const MAX_QUADRATURE_DEGREE: usize = 24;

/// Symmetric quadrature rule on the reference triangle
/// `{(x, y): x, y >= 0, x + y <= 1}`. Points are barycentric
/// `(1 - x - y, x, y)`; weights sum to the reference area 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn barycentric(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Points in reference `(x, y)` coordinates.
    pub fn reference_points(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|l| [l[1], l[2]]).collect()
    }
}

/// Returns a symmetric rule integrating all polynomials of total degree
/// `<= exactness` exactly.
///
/// Degrees up to 6 use classical fully symmetric rules (centroid, 3-point,
/// 6-point, 7-point Radon, 12-point). Higher degrees symmetrize a collapsed
/// Gauss-Legendre product rule over the six vertex permutations.
pub fn quadrature_rule(exactness: usize) -> Result<QuadratureRule> {
    if exactness > MAX_QUADRATURE_DEGREE {
        return Err(Error::Unsupported(format!(
            "quadrature exactness {exactness} exceeds the supported maximum {MAX_QUADRATURE_DEGREE}"
        )));
    }
    let mut rule = Orbits::default();
    match exactness {
        0 | 1 => rule.s3(1.0),
        2 => rule.s21(1.0 / 6.0, 1.0 / 3.0),
        3 | 4 => {
            rule.s21(0.445948490915965, 0.223381589678011);
            rule.s21(0.091576213509771, 0.109951743655322);
        }
        5 => {
            let r = 15f64.sqrt();
            rule.s3(9.0 / 40.0);
            rule.s21((6.0 - r) / 21.0, (155.0 - r) / 1200.0);
            rule.s21((6.0 + r) / 21.0, (155.0 + r) / 1200.0);
        }
        6 => {
            rule.s21(0.249286745170910, 0.116786275726379);
            rule.s21(0.063089014491502, 0.050844906370207);
            rule.s111(0.053145049844817, 0.310352451033784, 0.082851075618374);
        }
        _ => return Ok(symmetrized_collapsed(exactness)),
    }
    // tabulated weights are normalized to unit area
    let Orbits { points, weights } = rule;
    let weights = weights.into_iter().map(|w| 0.5 * w).collect();
    Ok(QuadratureRule {
        points,
        weights,
        degree: exactness,
    })
}

#[derive(Default)]
struct Orbits {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl Orbits {
    fn s3(&mut self, w: f64) {
        self.points.push([1.0 / 3.0; 3]);
        self.weights.push(w);
    }

    fn s21(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn s111(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

fn symmetrized_collapsed(exactness: usize) -> QuadratureRule {
    // the collapsed map x = a (1 - b), y = b has Jacobian (1 - b), so the
    // b-integrand has degree exactness + 1
    let n = (exactness + 3) / 2;
    let (g, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(6 * n * n);
    let mut weights = Vec::with_capacity(6 * n * n);
    for (a, wa) in g.iter().zip(&w) {
        for (b, wb) in g.iter().zip(&w) {
            let x = a * (1.0 - b);
            let y = *b;
            let l = [1.0 - x - y, x, y];
            let weight = wa * wb * (1.0 - b) / 6.0;
            for p in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                points.push([l[p[0]], l[p[1]], l[p[2]]]);
                weights.push(weight);
            }
        }
    }
    QuadratureRule {
        points,
        weights,
        degree: exactness,
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (z * p1 - p0) / (z * z - 1.0))
}
