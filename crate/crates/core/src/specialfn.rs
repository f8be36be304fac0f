//! Scalar special functions: Gamma, Jacobi polynomials, disk polynomials and
//! dimensions of the bi-degree harmonic spaces.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest argument with a finite Gamma value.
pub const GAMMA_MAX: f64 = 171.624;

/// sin(pi x) with argument reduction so that integers give exact zeros.
pub fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round();
    // r in [-1, 1]
    let (r, s) = if r < 0.0 { (-r, -1.0) } else { (r, 1.0) };
    let r = if r > 0.5 { 1.0 - r } else { r };
    s * (PI * r).sin()
}

fn lanczos_sum(z: f64) -> f64 {
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    a
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// Gamma function for real arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gamma argument {x}")));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::GammaPole(x));
    }
    if x > GAMMA_MAX {
        return Err(Error::GammaOverflow(x));
    }
    if x < 0.5 {
        let s = sin_pi(x);
        let g = gamma_fn(1.0 - x)?;
        let v = PI / (s * g);
        if !v.is_finite() {
            return Err(Error::GammaOverflow(x));
        }
        return Ok(v);
    }
    if x == x.round() && x <= 30.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return Ok(f);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    let half = t.powf((z + 0.5) / 2.0);
    Ok((2.0 * PI).sqrt() * half * (-t).exp() * half * lanczos_sum(z))
}

/// 1/Gamma(x), zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x > GAMMA_MAX {
        return 0.0;
    }
    match gamma_fn(x) {
        Ok(g) => 1.0 / g,
        Err(_) => 0.0,
    }
}

/// ln Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma needs x > 0, got {x}")));
    }
    if x < 0.5 {
        // ln G(x) = ln(pi / sin(pi x)) - ln G(1 - x)
        return Ok((PI / sin_pi(x)).ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// Ratio Gamma(a)/Gamma(b) computed in log space when both are positive and large.
pub fn gamma_ratio(a: f64, b: f64) -> Result<f64> {
    if a > 0.0 && b > 0.0 && (a > 100.0 || b > 100.0) {
        return Ok((ln_gamma(a)? - ln_gamma(b)?).exp());
    }
    Ok(gamma_fn(a)? * rgamma(b))
}

fn check_jacobi_params(a: f64, b: f64) -> Result<()> {
    if !(a > -1.0) || !(b > -1.0) {
        return Err(Error::Domain(format!("jacobi parameters must exceed -1: a={a}, b={b}")));
    }
    Ok(())
}

/// Jacobi polynomial P_m^{(a,b)}(x) by the three-term recurrence.
pub fn jacobi_poly(m: usize, a: f64, b: f64, x: f64) -> Result<f64> {
    check_jacobi_params(a, b)?;
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&x) {
        return Err(Error::Domain(format!("jacobi argument {x} outside [-1,1]")));
    }
    Ok(jacobi_unchecked(m, a, b, x))
}

/// Recurrence without domain checks; valid for any real x.
pub fn jacobi_unchecked(m: usize, a: f64, b: f64, x: f64) -> f64 {
    jacobi_with_prev(m, a, b, x).0
}

/// Returns (P_m, P_{m-1}); P_{-1} is taken as 0.
fn jacobi_with_prev(m: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    if m == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = 0.5 * ((a + b + 2.0) * x + (a - b));
    for k in 1..m {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * (k + 1.0) * (k + a + b + 1.0) * s;
        let c2 = (s + 1.0) * (a * a - b * b);
        let c3 = s * (s + 1.0) * (s + 2.0);
        let c4 = 2.0 * (k + a) * (k + b) * (s + 2.0);
        let p2 = ((c2 + c3 * x) * p1 - c4 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// P_m^{(a,b)}(x) together with its derivative.
pub fn jacobi_and_derivative(m: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    if m == 0 {
        return (1.0, 0.0);
    }
    let p = jacobi_unchecked(m, a, b, x);
    let d = 0.5 * (m as f64 + a + b + 1.0) * jacobi_unchecked(m - 1, a + 1.0, b + 1.0, x);
    (p, d)
}

/// P_m^{(a,b)}(1) = binom(m + a, m).
pub fn jacobi_at_one(m: usize, a: f64) -> f64 {
    let mut v = 1.0;
    for j in 1..=m {
        v *= (a + j as f64) / j as f64;
    }
    v
}

/// z^a for a >= 0 and conj(z)^{|a|} for a < 0.
pub fn zpow(z: Complex64, a: i32) -> Complex64 {
    if a >= 0 {
        z.powu(a as u32)
    } else {
        z.conj().powu((-a) as u32)
    }
}

/// Disk polynomial of bi-degree (k,l) for the sphere in C^n, normalized to 1 at z = 1.
pub fn disk_poly(n: usize, k: u32, l: u32, z: Complex64) -> Result<Complex64> {
    if n < 2 {
        return Err(Error::Domain(format!("disk polynomials need n >= 2, got {n}")));
    }
    let r2 = z.norm_sqr();
    if r2.sqrt() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("|z| = {} exceeds 1", r2.sqrt())));
    }
    Ok(disk_poly_unchecked(n, k, l, z))
}

pub fn disk_poly_unchecked(n: usize, k: u32, l: u32, z: Complex64) -> Complex64 {
    let d = k as i32 - l as i32;
    let mn = k.min(l) as usize;
    let a = (n - 2) as f64;
    let b = d.unsigned_abs() as f64;
    let r2 = z.norm_sqr().min(1.0);
    let jac = jacobi_unchecked(mn, a, b, 2.0 * r2 - 1.0) / jacobi_at_one(mn, a);
    zpow(z, d) * jac
}

/// Exact binomial coefficient; panics on overflow of u128 (far beyond supported ranges).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// ln binom(x, k) for real x >= k >= 0.
pub fn ln_binomial(x: f64, k: f64) -> Result<f64> {
    Ok(ln_gamma(x + 1.0)? - ln_gamma(k + 1.0)? - ln_gamma(x - k + 1.0)?)
}

/// Dimension of the bi-degree (k,l) harmonic space on S^{2n-1}.
pub fn harmonic_dim(n: usize, k: u32, l: u32) -> u64 {
    assert!(n >= 2, "harmonic_dim needs n >= 2");
    let n = n as u64;
    let (k, l) = (k as u64, l as u64);
    let num = (k + l + n - 1) as u128 * binomial(k + n - 2, k) * binomial(l + n - 2, l);
    (num / (n - 1) as u128) as u64
}

/// Dimension of the degree-m harmonic space on the sphere of R^d.
pub fn real_harmonic_dim(d: u64, m: u64) -> u64 {
    let a = binomial(d + m - 1, m);
    let b = if m >= 2 { binomial(d + m - 3, m - 2) } else { 0 };
    (a - b) as u64
}

/// Volume of S^{2n-1}.
pub fn sphere_volume(n: usize) -> f64 {
    let mut f = 1.0;
    for j in 2..n {
        f *= j as f64;
    }
    2.0 * PI.powi(n as i32) / f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gamma_reference_values() {
        let refs = [
            (0.5, 1.7724538509055160273),
            (2.5, 1.3293403881791370205),
            (-0.5, -3.5449077018110320546),
            (0.001, 999.4237724845954453),
            (0.1, 9.5135076986687312858),
            (1.3, 0.89747069630627718175),
            (3.7, 4.1706517837966040301),
            (-1.5, 2.3632718012073547031),
            (-2.25, -1.7428148657282526509),
            (-3.999, 41.729532875503479218),
            (7.5, 1871.2543057977883465),
            (12.25, 73711509.046769949091),
            (25.5, 3.0867705405286967828e+24),
            (49.9, 4.1180110342530352191e+62),
            (-0.75, -4.8341465442958777492),
            (-3.5, 0.27008820585226910892),
        ];
        for (x, v) in refs {
            let g = gamma_fn(x).unwrap();
            assert!(rel(g, v) < 1e-12, "x={x}: {g} vs {v}, rel {}", rel(g, v));
        }
        assert!(rel(gamma_fn(170.5).unwrap(), 5.5620924145599996107e+305) < 1e-11);
    }

    #[test]
    fn gamma_errors() {
        assert_eq!(gamma_fn(0.0), Err(Error::GammaPole(0.0)));
        assert_eq!(gamma_fn(-3.0), Err(Error::GammaPole(-3.0)));
        assert!(matches!(gamma_fn(200.0), Err(Error::GammaOverflow(_))));
        assert_eq!(rgamma(-2.0), 0.0);
        assert_eq!(gamma_fn(5.0).unwrap(), 24.0);
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.2, 0.7, 1.5, 10.3, 40.0] {
            assert!((ln_gamma(x).unwrap() - gamma_fn(x).unwrap().ln()).abs() < 1e-12);
        }
        assert!(rel(ln_gamma(300.5).unwrap(), 1412.0535420412702) < 1e-13);
    }

    #[test]
    fn jacobi_examples() {
        assert_eq!(jacobi_poly(0, 0.3, 0.7, 0.2).unwrap(), 1.0);
        assert!((jacobi_poly(1, 0.0, 2.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((jacobi_poly(2, 0.0, 0.0, 0.0).unwrap() + 0.5).abs() < 1e-15);
        assert!(jacobi_poly(1, -1.0, 0.0, 0.0).is_err());
        // degree two closed form
        let (a, b, x): (f64, f64, f64) = (0.5, 1.5, 0.3);
        let p2 = 0.125
            * ((a + b + 3.0) * (a + b + 4.0) * (x - 1.0).powi(2)
                + 4.0 * (a + 2.0) * (a + b + 3.0) * (x - 1.0)
                + 4.0 * (a + 1.0) * (a + 2.0));
        assert!((jacobi_poly(2, a, b, x).unwrap() - p2).abs() < 1e-13);
        // a + b = -1 at the start of the recurrence
        let v = jacobi_poly(3, -0.5, -0.5, 0.4).unwrap();
        // Chebyshev: P_3^{(-1/2,-1/2)} = (5/16) T_3
        let t3 = 4.0 * 0.4f64.powi(3) - 3.0 * 0.4;
        assert!((v - 0.3125 * t3).abs() < 1e-14);
    }

    #[test]
    fn jacobi_derivative_fd() {
        let (m, a, b, x) = (5, 1.0, 2.0, 0.37);
        let (_, d) = jacobi_and_derivative(m, a, b, x);
        let h = 1e-5;
        let fd = (jacobi_unchecked(m, a, b, x + h) - jacobi_unchecked(m, a, b, x - h)) / (2.0 * h);
        assert!((d - fd).abs() < 1e-7);
    }

    #[test]
    fn disk_poly_examples() {
        let z = Complex64::new(0.3, -0.4);
        assert!((disk_poly(2, 0, 0, z).unwrap() - 1.0).norm() < 1e-15);
        assert!((disk_poly(2, 1, 0, z).unwrap() - z).norm() < 1e-15);
        let v = disk_poly(2, 1, 1, z).unwrap();
        assert!((v - Complex64::new(2.0 * z.norm_sqr() - 1.0, 0.0)).norm() < 1e-15);
        assert!(disk_poly(2, 1, 1, Complex64::new(1.1, 0.0)).is_err());
        for n in 2..4 {
            for k in 0..5 {
                for l in 0..5 {
                    let one = disk_poly(n, k, l, Complex64::new(1.0, 0.0)).unwrap();
                    assert!((one - 1.0).norm() < 1e-13);
                    let c = Complex64::from_polar(1.0, 0.7);
                    let lhs = disk_poly(n, k, l, c * z).unwrap();
                    let rhs = c.powu(k) * c.conj().powu(l) * disk_poly(n, k, l, z).unwrap();
                    assert!((lhs - rhs).norm() < 1e-13);
                    let cj = disk_poly(n, k, l, z.conj()).unwrap();
                    assert!((cj - disk_poly(n, l, k, z).unwrap()).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn harmonic_dim_examples_and_sums() {
        assert_eq!(harmonic_dim(2, 0, 0), 1);
        assert_eq!(harmonic_dim(2, 2, 3), 6);
        assert_eq!(harmonic_dim(3, 1, 1), 8);
        for n in 2..=3u64 {
            for m in 0..=24u32 {
                let s: u64 = (0..=m).map(|k| harmonic_dim(n as usize, k, m - k)).sum();
                assert_eq!(s, real_harmonic_dim(2 * n, m as u64), "n={n} m={m}");
            }
        }
        assert_eq!(real_harmonic_dim(4, 5), 36);
    }

    #[test]
    fn sphere_volumes() {
        assert!((sphere_volume(2) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_volume(3) - PI.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn sin_pi_exact_zeros() {
        assert_eq!(sin_pi(3.0), 0.0);
        assert!((sin_pi(0.5) - 1.0).abs() < 1e-16);
        assert!((sin_pi(-2.5) + 1.0).abs() < 1e-16);
    }
}
