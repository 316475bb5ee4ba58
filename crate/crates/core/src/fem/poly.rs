//! Monomial bases on the reference triangle.

/// Exponents `(a, b)` of the monomials `x^a y^b` with `a + b <= degree`,
/// ordered by total degree.
pub fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
    for d in 0..=degree {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

fn ipow(x: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, _| acc * x)
}

/// Values and first derivatives of every monomial at `p`.
pub fn eval_monomials(exps: &[(usize, usize)], p: [f64; 2]) -> Vec<(f64, [f64; 2])> {
    let [x, y] = p;
    exps.iter()
        .map(|&(a, b)| {
            let v = ipow(x, a) * ipow(y, b);
            let dx = if a > 0 {
                a as f64 * ipow(x, a - 1) * ipow(y, b)
            } else {
                0.0
            };
            let dy = if b > 0 {
                b as f64 * ipow(x, a) * ipow(y, b - 1)
            } else {
                0.0
            };
            (v, [dx, dy])
        })
        .collect()
}

/// Legendre polynomial of order `n` shifted to `[0, 1]`.
pub fn shifted_legendre(n: usize, s: f64) -> f64 {
    let z = 2.0 * s - 1.0;
    let (mut p0, mut p1) = (1.0, z);
    match n {
        0 => 1.0,
        1 => z,
        _ => {
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}
