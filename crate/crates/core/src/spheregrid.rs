//! Quadrature on S^1, on S^{2n-1} for n = 2, 3, and on the weighted unit disc,
//! together with the order-fixed summation used by every reduction in the crate.
//!
//! Sphere rules are product rules in the coordinates t_j = |u_j|^2 (uniform on
//! the simplex) and the phases arg u_j. The surface measure is 2^{1-n} dt dphi.

use crate::error::{Error, Result};
use crate::specialfn::{jacobi_and_derivative, ln_gamma};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Leaf size of the summation tree.
pub const SUM_BLOCK: usize = 512;

// ---------------------------------------------------------------- summation

/// Neumaier-compensated sum, sequential and in input order.
pub fn neumaier<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

fn tree(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => tree(&v[..n / 2]) + tree(&v[n / 2..]),
    }
}

/// Deterministic sum of `len` terms produced by `term(i)`. Blocks are summed in
/// parallel and combined by a fixed pairwise tree, so the result does not depend
/// on the thread count.
pub fn det_sum_by<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let nb = len.div_ceil(SUM_BLOCK);
    let blocks: Vec<f64> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let lo = b * SUM_BLOCK;
            let hi = (lo + SUM_BLOCK).min(len);
            neumaier((lo..hi).map(&term))
        })
        .collect();
    tree(&blocks)
}

pub fn det_sum(v: &[f64]) -> f64 {
    det_sum_by(v.len(), |i| v[i])
}

pub fn det_sum_c_by<F>(len: usize, term: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let nb = len.div_ceil(SUM_BLOCK);
    let blocks: Vec<(f64, f64)> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let lo = b * SUM_BLOCK;
            let hi = (lo + SUM_BLOCK).min(len);
            let vals: Vec<Complex64> = (lo..hi).map(&term).collect();
            (neumaier(vals.iter().map(|z| z.re)), neumaier(vals.iter().map(|z| z.im)))
        })
        .collect();
    let re: Vec<f64> = blocks.iter().map(|b| b.0).collect();
    let im: Vec<f64> = blocks.iter().map(|b| b.1).collect();
    Complex64::new(tree(&re), tree(&im))
}

/// Sequential compensated complex sum for short inner loops.
pub fn csum<I: IntoIterator<Item = Complex64>>(xs: I) -> Complex64 {
    let v: Vec<Complex64> = xs.into_iter().collect();
    Complex64::new(neumaier(v.iter().map(|z| z.re)), neumaier(v.iter().map(|z| z.im)))
}

// ---------------------------------------------------------------- 1-D rules

/// Gauss-Jacobi nodes and weights on [-1,1] for the weight (1-x)^a (1+x)^b.
pub fn gauss_jacobi(m: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0 {
        return Err(Error::Domain("Gauss rule needs at least one node".into()));
    }
    if !(a > -1.0) || !(b > -1.0) {
        return Err(Error::Domain(format!("Gauss-Jacobi exponents must exceed -1: {a}, {b}")));
    }
    let mut jm = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        jm[(k, k)] = diag;
        if k + 1 < m {
            let j = kf + 1.0;
            let s1 = 2.0 * j + a + b;
            let off2 = if j == 1.0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
            } else {
                4.0 * j * (j + a) * (j + b) * (j + a + b) / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0))
            };
            jm[(k, k + 1)] = off2.sqrt();
            jm[(k + 1, k)] = off2.sqrt();
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mut x: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    x.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let lnc = ln_gamma(m as f64 + a + 1.0)? + ln_gamma(m as f64 + b + 1.0)?
        - ln_gamma(m as f64 + a + b + 1.0)?
        - ln_gamma(m as f64 + 1.0)?
        + (a + b + 1.0) * 2f64.ln();
    let mut w = Vec::with_capacity(m);
    for xi in x.iter_mut() {
        for _ in 0..3 {
            let (p, d) = jacobi_and_derivative(m, a, b, *xi);
            if d != 0.0 {
                *xi -= p / d;
            }
        }
        let (_, d) = jacobi_and_derivative(m, a, b, *xi);
        w.push((lnc - (1.0 - *xi * *xi).ln() - 2.0 * d.abs().ln()).exp());
    }
    Ok((x, w))
}

pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi(m, 0.0, 0.0).expect("Legendre rule")
}

/// Gauss rule on [0,1] for the weight t^a (1-t)^b.
pub fn gauss_jacobi_unit(m: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_jacobi(m, b, a)?;
    let scale = 2f64.powf(-a - b - 1.0);
    Ok((x.iter().map(|x| 0.5 * (x + 1.0)).collect(), w.iter().map(|w| w * scale).collect()))
}

/// Gauss-Legendre on [lo, hi].
pub fn gauss_legendre_on(m: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let h = 0.5 * (hi - lo);
    (x.iter().map(|x| lo + h * (x + 1.0)).collect(), w.iter().map(|w| w * h).collect())
}

/// Piecewise Gauss-Legendre over the circle [start, start + 2 pi) split at the
/// given break angles. Without breaks the rule is a single arc.
pub fn circle_piecewise(breaks: &[f64], per_arc: usize) -> (Vec<f64>, Vec<f64>) {
    let two_pi = 2.0 * PI;
    let mut b: Vec<f64> = breaks.iter().map(|t| t.rem_euclid(two_pi)).collect();
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
    if b.is_empty() {
        b.push(0.0);
    }
    let (gx, gw) = gauss_legendre(per_arc);
    let mut th = Vec::with_capacity(b.len() * per_arc);
    let mut wt = Vec::with_capacity(b.len() * per_arc);
    for i in 0..b.len() {
        let lo = b[i];
        let hi = if i + 1 < b.len() { b[i + 1] } else { b[0] + two_pi };
        let h = 0.5 * (hi - lo);
        for (x, w) in gx.iter().zip(&gw) {
            th.push(lo + h * (x + 1.0));
            wt.push(w * h);
        }
    }
    (th, wt)
}

// ---------------------------------------------------------------- circle

#[derive(Debug, Clone, PartialEq)]
pub struct CircleRule {
    pub m: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn circle_rule(m: usize) -> Result<CircleRule> {
    if m < 4 || m % 2 != 0 {
        return Err(Error::Domain(format!("circle rule needs an even M >= 4, got {m}")));
    }
    let nodes = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
    Ok(CircleRule { m, nodes, weights: vec![2.0 * PI / m as f64; m] })
}

impl CircleRule {
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        integrate_weighted(&self.weights, f)
    }
}

// ---------------------------------------------------------------- sphere

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Full product rule with explicit phases.
    Full,
    /// Phases integrated out: valid only for torus-invariant integrands.
    TorusReduced,
}

/// Product quadrature rule on S^{2n-1}.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub n: usize,
    pub id: String,
    pub symmetry: Symmetry,
    /// Simplex coordinates (t_1, ..., t_n) for each simplex node.
    pub simplex: Vec<[f64; 3]>,
    /// Lebesgue weights on the simplex, summing to 1/(n-1)!.
    pub simplex_w: Vec<f64>,
    /// Gauss nodes per simplex coordinate.
    pub tnodes: usize,
    /// Phase counts per coordinate (Full only).
    pub phases: Vec<usize>,
    points: Vec<Complex64>,
    weights: Vec<f64>,
}

const MAX_NODES: usize = 1 << 22;

fn simplex_nodes(n: usize, t: usize) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    match n {
        2 => {
            let (x, w) = gauss_jacobi_unit(t, 0.0, 0.0)?;
            Ok((x.iter().map(|&t| [t, 1.0 - t, 0.0]).collect(), w))
        }
        3 => {
            let (s, ws) = gauss_jacobi_unit(t, 0.0, 1.0)?;
            let (r, wr) = gauss_jacobi_unit(t, 0.0, 0.0)?;
            let mut pts = Vec::with_capacity(t * t);
            let mut wts = Vec::with_capacity(t * t);
            for (si, wsi) in s.iter().zip(&ws) {
                for (ri, wri) in r.iter().zip(&wr) {
                    pts.push([(1.0 - si) * ri, *si, (1.0 - si) * (1.0 - ri)]);
                    wts.push(wsi * wri);
                }
            }
            Ok((pts, wts))
        }
        _ => Err(Error::Unsupported(format!("sphere rules need n in {{2,3}}, got {n}"))),
    }
}

impl SphereRule {
    /// Full product rule with `t` Gauss nodes per simplex coordinate and the
    /// given phase counts.
    pub fn product(n: usize, t: usize, phases: &[usize]) -> Result<Self> {
        if phases.len() != n {
            return Err(Error::Domain(format!("need {n} phase counts, got {}", phases.len())));
        }
        if phases.iter().any(|&p| p < 1) || t < 1 {
            return Err(Error::Domain("grid sizes must be positive".into()));
        }
        let (simplex, simplex_w) = simplex_nodes(n, t)?;
        let nphase: usize = phases.iter().product();
        let total = simplex.len() * nphase;
        if total > MAX_NODES {
            return Err(Error::Resolution(format!(
                "{total} nodes exceed the materialization limit; use a torus-reduced rule"
            )));
        }
        let id = format!(
            "s{}:{}x{}",
            2 * n - 1,
            t,
            phases.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("x")
        );
        let dphi: f64 = phases.iter().map(|&p| 2.0 * PI / p as f64).product();
        let scale = 2f64.powi(1 - n as i32) * dphi;
        let mut points = Vec::with_capacity(total * n);
        let mut weights = Vec::with_capacity(total);
        let cis = |j: usize, p: usize| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / p as f64);
        for (tc, tw) in simplex.iter().zip(&simplex_w) {
            let r: Vec<f64> = (0..n).map(|j| tc[j].max(0.0).sqrt()).collect();
            for idx in 0..nphase {
                let mut rem = idx;
                let mut ph = vec![0usize; n];
                for j in (0..n).rev() {
                    ph[j] = rem % phases[j];
                    rem /= phases[j];
                }
                for j in 0..n {
                    points.push(cis(ph[j], phases[j]) * r[j]);
                }
                weights.push(tw * scale);
            }
        }
        Ok(SphereRule {
            n,
            id,
            symmetry: Symmetry::Full,
            simplex,
            simplex_w,
            tnodes: t,
            phases: phases.to_vec(),
            points,
            weights,
        })
    }

    /// Rule on the simplex only, for torus-invariant integrands.
    pub fn torus_reduced(n: usize, t: usize) -> Result<Self> {
        let (simplex, simplex_w) = simplex_nodes(n, t)?;
        let scale = 2f64.powi(1 - n as i32) * (2.0 * PI).powi(n as i32);
        let mut points = Vec::with_capacity(simplex.len() * n);
        let mut weights = Vec::with_capacity(simplex.len());
        for (tc, tw) in simplex.iter().zip(&simplex_w) {
            for j in 0..n {
                points.push(Complex64::new(tc[j].max(0.0).sqrt(), 0.0));
            }
            weights.push(tw * scale);
        }
        Ok(SphereRule {
            n,
            id: format!("s{}t:{}", 2 * n - 1, t),
            symmetry: Symmetry::TorusReduced,
            simplex,
            simplex_w,
            tnodes: t,
            phases: vec![],
            points,
            weights,
        })
    }

    /// Default rule for the dimension: s3:48x64x64 or s5t:24.
    pub fn default_for(n: usize) -> Result<Self> {
        match n {
            2 => Self::product(2, 48, &[64, 64]),
            3 => Self::torus_reduced(3, 24),
            _ => Err(Error::Unsupported(format!("n = {n}"))),
        }
    }

    /// Parses ids like `s3:48x64x64`, `s5:8x16x16x16`, `s3t:48`, `s5t:24`.
    pub fn from_id(id: &str) -> Result<Self> {
        let (head, tail) = id
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("grid id `{id}` lacks ':'")))?;
        let (n, reduced) = match head {
            "s3" => (2, false),
            "s5" => (3, false),
            "s3t" => (2, true),
            "s5t" => (3, true),
            _ => return Err(Error::Parse(format!("unknown grid kind `{head}`"))),
        };
        let nums: Vec<usize> = tail
            .split('x')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("grid id `{id}`: {e}")))?;
        if reduced {
            if nums.len() != 1 {
                return Err(Error::Parse(format!("grid id `{id}`: expected one size")));
            }
            Self::torus_reduced(n, nums[0])
        } else {
            match nums.len() {
                2 => Self::product(n, nums[0], &vec![nums[1]; n]),
                l if l == n + 1 => Self::product(n, nums[0], &nums[1..]),
                _ => Err(Error::Parse(format!("grid id `{id}`: wrong number of sizes"))),
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[Complex64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> impl Iterator<Item = &[Complex64]> {
        self.points.chunks(self.n)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nphase(&self) -> usize {
        self.phases.iter().product::<usize>().max(1)
    }

    /// Samples a function at every node (in parallel, ordered).
    pub fn sample<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[Complex64]) -> T + Sync,
    {
        (0..self.len()).into_par_iter().map(|i| f(self.point(i))).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::Domain(format!("{} samples for {} nodes", f.len(), self.len())));
        }
        integrate_weighted(&self.weights, f)
    }

    pub fn integrate_c(&self, f: &[Complex64]) -> Result<Complex64> {
        if f.len() != self.len() {
            return Err(Error::Domain(format!("{} samples for {} nodes", f.len(), self.len())));
        }
        if let Some(i) = f.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { node: i, value: f[i].norm() });
        }
        Ok(det_sum_c_by(f.len(), |i| f[i] * self.weights[i]))
    }

    pub fn volume(&self) -> f64 {
        det_sum(&self.weights)
    }
}

/// Weighted sum with a finiteness check naming the offending node.
pub fn integrate_weighted(w: &[f64], f: &[f64]) -> Result<f64> {
    if let Some(i) = f.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { node: i, value: f[i] });
    }
    Ok(det_sum_by(f.len(), |i| w[i] * f[i]))
}

/// Closed-form moment of |u_1|^{2 a_1} ... |u_n|^{2 a_n} over S^{2n-1}.
pub fn sphere_moment(a: &[u32]) -> f64 {
    let n = a.len();
    let s: u32 = a.iter().sum();
    let mut ln = (1.0 - n as f64) * 2f64.ln() + n as f64 * (2.0 * PI).ln();
    for &ai in a {
        ln += ln_gamma(ai as f64 + 1.0).unwrap();
    }
    ln -= ln_gamma((s as usize + n) as f64).unwrap();
    ln.exp()
}

// ---------------------------------------------------------------- disc

/// Product rule on the unit disc for integrals of F(z)(1-|z|^2)^alpha dA.
///
/// With `singular_p` set, radial nodes follow the Gauss-Jacobi weight
/// t^{p/2}(1-t)^alpha (t = |z|^2) and the stored weights are divided by
/// t^{p/2}, so callers still pass the full integrand including |z|^p.
#[derive(Debug, Clone)]
pub struct DiscRule {
    pub alpha: u32,
    pub singular_p: Option<f64>,
    pub t: Vec<f64>,
    pub tw: Vec<f64>,
    pub theta: Vec<f64>,
    pub thw: Vec<f64>,
}

impl DiscRule {
    pub fn new(alpha: u32, singular_p: Option<f64>, radial: usize, angular: usize) -> Result<Self> {
        Self::with_breaks(alpha, singular_p, radial, &[], angular)
    }

    /// Angular nodes: uniform when `breaks` is empty, otherwise piecewise
    /// Gauss-Legendre with `angular` nodes per arc.
    pub fn with_breaks(
        alpha: u32,
        singular_p: Option<f64>,
        radial: usize,
        breaks: &[f64],
        angular: usize,
    ) -> Result<Self> {
        let q = singular_p.unwrap_or(0.0);
        if !(q > -2.0) && singular_p.is_some() {
            return Err(Error::Domain(format!("radial exponent {q} must exceed -2")));
        }
        let (t, mut tw) = gauss_jacobi_unit(radial, q / 2.0, alpha as f64)?;
        for (ti, wi) in t.iter().zip(tw.iter_mut()) {
            *wi *= 0.5 / ti.powf(q / 2.0);
        }
        let (theta, thw) = if breaks.is_empty() {
            let c = circle_rule(angular.max(4) + angular % 2)?;
            (c.nodes, c.weights)
        } else {
            circle_piecewise(breaks, angular)
        };
        Ok(DiscRule { alpha, singular_p, t, tw, theta, thw })
    }

    /// Integral of F(z)(1-|z|^2)^alpha over the disc with dA the area measure.
    pub fn integrate<F: Fn(Complex64) -> Complex64 + Sync>(&self, f: F) -> Complex64 {
        let nt = self.theta.len();
        det_sum_c_by(self.t.len() * nt, |idx| {
            let (i, j) = (idx / nt, idx % nt);
            let z = Complex64::from_polar(self.t[i].sqrt(), self.theta[j]);
            f(z) * (self.tw[i] * self.thw[j])
        })
    }

    /// Zonal reduction: integral over S^{2n-1} of F(v.u) for the dimension n = alpha + 2.
    pub fn zonal<F: Fn(Complex64) -> Complex64 + Sync>(&self, f: F) -> Complex64 {
        let n = self.alpha as usize + 2;
        let mut fact = 1.0;
        for j in 2..=(n - 2) {
            fact *= j as f64;
        }
        self.integrate(f) * (2.0 * PI.powi(n as i32 - 1) / fact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_exactness() {
        let (x, w) = gauss_legendre(10);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for k in 0..20 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((s - exact).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn jacobi_unit_moments() {
        // int_0^1 t^a (1-t)^b t^k dt = B(a+k+1, b+1)
        let (a, b) = (-0.5, 1.0);
        let (t, w) = gauss_jacobi_unit(12, a, b).unwrap();
        for k in 0..20 {
            let s: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(k)).sum();
            let exact = (ln_gamma(a + k as f64 + 1.0).unwrap() + ln_gamma(b + 1.0).unwrap()
                - ln_gamma(a + b + k as f64 + 2.0).unwrap())
            .exp();
            assert!((s - exact).abs() < 1e-13 * exact.max(1.0), "k={k}: {s} vs {exact}");
        }
    }

    #[test]
    fn circle_examples() {
        let c = circle_rule(64).unwrap();
        assert!((c.integrate(&vec![1.0; 64]).unwrap() - 2.0 * PI).abs() < 1e-14);
        let f: Vec<f64> = c.nodes.iter().map(|t| (2.0 * t).cos()).collect();
        assert!(c.integrate(&f).unwrap().abs() < 1e-14);
        let f: Vec<f64> = c.nodes.iter().map(|t| (2.0 * t).sin()).collect();
        assert!(c.integrate(&f).unwrap().abs() < 1e-14);
        let c = circle_rule(256).unwrap();
        let f: Vec<f64> = c.nodes.iter().map(|t| t.cos().abs().max(t.sin().abs())).collect();
        assert!((c.integrate(&f).unwrap() - 4.0 * 2f64.sqrt()).abs() < 5e-4);
        assert!(circle_rule(3).is_err());
        assert!(circle_rule(7).is_err());
    }

    #[test]
    fn sphere_examples() {
        let r = SphereRule::product(2, 8, &[8, 8]).unwrap();
        assert!((r.volume() - 2.0 * PI * PI).abs() < 1e-12);
        let f = r.sample(|u| u[0].norm_sqr());
        assert!((r.integrate(&f).unwrap() - PI * PI).abs() < 1e-12);
        let r3 = SphereRule::product(3, 5, &[4, 4, 4]).unwrap();
        assert!((r3.volume() - PI.powi(3)).abs() < 1e-12);
        let f = r3.sample(|u| u[0].norm_sqr());
        assert!((r3.integrate(&f).unwrap() - PI.powi(3) / 3.0).abs() < 1e-12);
        let rt = SphereRule::torus_reduced(3, 6).unwrap();
        assert!((rt.volume() - PI.powi(3)).abs() < 1e-12);
        assert!(SphereRule::product(4, 3, &[4, 4, 4, 4]).is_err());
        assert!(r.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn sphere_ids() {
        let r = SphereRule::from_id("s3:6x8x8").unwrap();
        assert_eq!(r.id, "s3:6x8x8");
        assert_eq!(r.len(), 6 * 64);
        let r = SphereRule::from_id("s5:3x4").unwrap();
        assert_eq!(r.id, "s5:3x4x4x4");
        let r = SphereRule::from_id("s5t:7").unwrap();
        assert_eq!(r.len(), 49);
        assert!(SphereRule::from_id("s4:3x3").is_err());
    }

    #[test]
    fn sphere_monomial_exactness() {
        // z^a zbar^b integrates to the Dirichlet moment when a = b, else 0
        let r = SphereRule::product(2, 5, &[6, 6]).unwrap();
        for a1 in 0..3i32 {
            for a2 in 0..3i32 {
                for b1 in 0..3i32 {
                    for b2 in 0..3i32 {
                        let f: Vec<Complex64> = r.sample(|u| {
                            u[0].powi(a1) * u[1].powi(a2) * u[0].conj().powi(b1) * u[1].conj().powi(b2)
                        });
                        let v = r.integrate_c(&f).unwrap();
                        let exact = if a1 == b1 && a2 == b2 {
                            sphere_moment(&[a1 as u32, a2 as u32])
                        } else {
                            0.0
                        };
                        assert!((v - exact).norm() < 1e-10, "{a1}{a2}{b1}{b2}: {v}");
                    }
                }
            }
        }
        let r3 = SphereRule::product(3, 4, &[5, 5, 5]).unwrap();
        let f = r3.sample(|u| u[0].norm_sqr().powi(2) * u[2].norm_sqr() * u[1].norm_sqr());
        assert!((r3.integrate(&f).unwrap() - sphere_moment(&[2, 1, 1])).abs() < 1e-10);
    }

    #[test]
    fn nonfinite_named() {
        let r = SphereRule::product(2, 2, &[4, 4]).unwrap();
        let mut f = vec![1.0; r.len()];
        f[5] = f64::NAN;
        assert!(matches!(r.integrate(&f), Err(Error::NonFinite { node: 5, .. })));
    }

    #[test]
    fn disc_examples() {
        let d = DiscRule::new(0, None, 8, 16).unwrap();
        let one = d.zonal(|_| Complex64::new(1.0, 0.0));
        assert!((one.re - 2.0 * PI * PI).abs() < 1e-12);
        let sq = d.zonal(|z| Complex64::new(z.norm_sqr(), 0.0));
        assert!((sq.re - PI * PI).abs() < 1e-12);
        let z = d.zonal(|z| z);
        assert!(z.norm() < 1e-12);
        // alpha = 1: int (1-|z|^2) dA = pi/2
        let d1 = DiscRule::new(1, None, 6, 8).unwrap();
        let v = d1.integrate(|_| Complex64::new(1.0, 0.0));
        assert!((v.re - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn disc_singular_endpoint() {
        let p = -1.0;
        let d = DiscRule::new(0, Some(p), 6, 8).unwrap();
        // integral over S^3 of |v.u|^{-1}: 2 pi^2 int t^{-1/2} dt = 4 pi^2
        let v = d.zonal(|z| Complex64::new(z.norm().powf(p), 0.0));
        assert!((v.re - 4.0 * PI * PI).abs() < 1e-10 * 4.0 * PI * PI);
        let p = -1.6;
        let d = DiscRule::new(0, Some(p), 6, 8).unwrap();
        let v = d.integrate(|z| Complex64::new(z.norm().powf(p), 0.0));
        // pi * int t^{p/2} dt
        assert!((v.re - PI / (1.0 + p / 2.0)).abs() < 1e-10);
    }

    #[test]
    fn summation_deterministic() {
        let v: Vec<f64> = (0..100_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 - 0.5).collect();
        let a = det_sum(&v);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| det_sum(&v));
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((neumaier([1e16, 1.0, -1e16]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_circle() {
        let (t, w) = circle_piecewise(&[PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0], 8);
        let s: f64 = t.iter().zip(&w).map(|(t, w)| w * t.cos().abs().max(t.sin().abs())).sum();
        assert!((s - 4.0 * 2f64.sqrt()).abs() < 1e-13);
    }
}
