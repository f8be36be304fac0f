//! Bi-degree spectral analysis and synthesis on S^{2n-1}, multiplier tables and
//! their application.
//!
//! Components are stored as coefficients in a fixed weight basis:
//!
//! * n = 2, full rules: `zpow(u1,a) zpow(u2,b) P_j^{(|a|,|b|)}(1 - 2|u1|^2)` of
//!   bi-degree ((m+a+b)/2, (m-a-b)/2) with m = |a|+|b|+2j.
//! * n = 2, torus-reduced rules: the invariant part `P_k(1 - 2|u1|^2)`.
//! * n = 3, torus-invariant: orthogonal polynomials on the simplex in
//!   (|u1|^2, |u2|^2), one block of size k+1 for bi-degree (k,k).
//!
//! Component samples are produced on demand, so storage stays proportional to
//! the number of coefficients rather than to the grid.

use crate::error::{Error, Result};
use crate::specialfn::{disk_poly_unchecked, harmonic_dim, jacobi_unchecked, ln_gamma, zpow};
use crate::spheregrid::{csum, det_sum_by, neumaier, SphereRule, Symmetry};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Weight2,
    Invariant2,
    Invariant3,
}

impl Basis {
    pub fn n(self) -> usize {
        match self {
            Basis::Weight2 | Basis::Invariant2 => 2,
            Basis::Invariant3 => 3,
        }
    }

    /// Basis for analysis on a rule.
    pub fn for_rule(rule: &SphereRule) -> Result<Basis> {
        match (rule.n, rule.symmetry) {
            (2, Symmetry::Full) => Ok(Basis::Weight2),
            (2, Symmetry::TorusReduced) => Ok(Basis::Invariant2),
            (3, _) => Ok(Basis::Invariant3),
            (n, _) => Err(Error::Unsupported(format!("spectra for n = {n}"))),
        }
    }

    /// Number of basis elements in the (k,l) block.
    pub fn block_len(self, k: u32, l: u32) -> usize {
        match self {
            Basis::Weight2 => (k + l + 1) as usize,
            Basis::Invariant2 => usize::from(k == l),
            Basis::Invariant3 => {
                if k == l {
                    k as usize + 1
                } else {
                    0
                }
            }
        }
    }
}

/// Weight-basis radial factor of the n = 2 basis at t = |u1|^2.
fn w2_radial(a: i32, b: i32, j: usize, t: f64) -> f64 {
    let (aa, bb) = (a.unsigned_abs() as f64, b.unsigned_abs() as f64);
    t.max(0.0).powf(aa / 2.0) * (1.0 - t).max(0.0).powf(bb / 2.0) * jacobi_unchecked(j, aa, bb, 1.0 - 2.0 * t)
}

/// (a, b, j) of the idx-th element of the n = 2 block (k,l).
fn w2_index(k: u32, l: u32, idx: usize) -> (i32, i32, usize) {
    let a = idx as i32 - l as i32;
    let b = k as i32 - l as i32 - a;
    let m = (k + l) as i32;
    let j = ((m - a.abs() - b.abs()) / 2) as usize;
    (a, b, j)
}

/// Scaled Legendre q_i(z, w) = w^i P_i(z / w), regular at w = 0.
fn scaled_legendre(imax: usize, z: f64, w: f64) -> Vec<f64> {
    let mut q = Vec::with_capacity(imax + 1);
    q.push(1.0);
    if imax >= 1 {
        q.push(z);
    }
    for i in 1..imax {
        let fi = i as f64;
        let next = ((2.0 * fi + 1.0) * z * q[i] - fi * w * w * q[i - 1]) / (fi + 1.0);
        q.push(next);
    }
    q
}

/// Simplex orthogonal polynomial D_{i,j}(x, y) with x = t1, y = t2.
fn dubiner(i: usize, j: usize, x: f64, y: f64) -> f64 {
    let w = 1.0 - y;
    let q = scaled_legendre(i, 2.0 * x - w, w);
    q[i] * jacobi_unchecked(j, 2.0 * i as f64 + 1.0, 0.0, 2.0 * y - 1.0)
}

/// Value of the idx-th element of block (k,l) at u.
pub fn basis_eval(basis: Basis, k: u32, l: u32, idx: usize, u: &[Complex64]) -> Complex64 {
    match basis {
        Basis::Weight2 => {
            let (a, b, j) = w2_index(k, l, idx);
            let t = u[0].norm_sqr();
            zpow(u[0], a) * zpow(u[1], b) * jacobi_unchecked(j, a.unsigned_abs() as f64, b.unsigned_abs() as f64, 1.0 - 2.0 * t)
        }
        Basis::Invariant2 => Complex64::new(jacobi_unchecked(k as usize, 0.0, 0.0, 1.0 - 2.0 * u[0].norm_sqr()), 0.0),
        Basis::Invariant3 => {
            let i = idx;
            let j = k as usize - i;
            Complex64::new(dubiner(i, j, u[0].norm_sqr(), u[1].norm_sqr()), 0.0)
        }
    }
}

/// Analytic squared L2 norm of a basis element over S^{2n-1}.
pub fn basis_norm2(basis: Basis, k: u32, l: u32, idx: usize) -> f64 {
    match basis {
        Basis::Weight2 | Basis::Invariant2 => {
            let (a, b, j) = if basis == Basis::Weight2 { w2_index(k, l, idx) } else { (0, 0, k as usize) };
            let (al, be, jf) = (a.unsigned_abs() as f64, b.unsigned_abs() as f64, j as f64);
            let lg = ln_gamma(jf + al + 1.0).unwrap() + ln_gamma(jf + be + 1.0).unwrap()
                - ln_gamma(jf + al + be + 1.0).unwrap()
                - ln_gamma(jf + 1.0).unwrap();
            2.0 * PI * PI * lg.exp() / (2.0 * jf + al + be + 1.0)
        }
        Basis::Invariant3 => {
            let i = idx as f64;
            let j = k as f64 - i;
            2.0 * PI.powi(3) / ((2.0 * i + 1.0) * 2.0 * (i + j + 1.0))
        }
    }
}

/// Band-limited function on S^{2n-1} stored by bi-degree components.
#[derive(Debug, Clone, PartialEq)]
pub struct BiDegreeSpectrum {
    pub n: usize,
    pub kmax: u32,
    pub basis: Basis,
    pub rule_id: String,
    pub components: BTreeMap<(u32, u32), Vec<Complex64>>,
    /// Sup-norm analysis residual on the analysis rule (0 when constructed directly).
    pub residual: f64,
}

impl BiDegreeSpectrum {
    pub fn zero(basis: Basis, kmax: u32, rule_id: &str) -> Self {
        BiDegreeSpectrum {
            n: basis.n(),
            kmax,
            basis,
            rule_id: rule_id.to_string(),
            components: BTreeMap::new(),
            residual: 0.0,
        }
    }

    pub fn constant(basis: Basis, kmax: u32, rule_id: &str, c: f64) -> Self {
        let mut s = Self::zero(basis, kmax, rule_id);
        s.components.insert((0, 0), vec![Complex64::new(c, 0.0)]);
        s
    }

    /// All bi-degrees with k + l <= kmax that the basis can represent.
    pub fn bidegrees(basis: Basis, kmax: u32) -> Vec<(u32, u32)> {
        let mut v = Vec::new();
        for m in 0..=kmax {
            for k in 0..=m {
                if basis.block_len(k, m - k) > 0 {
                    v.push((k, m - k));
                }
            }
        }
        v
    }

    pub fn get(&self, k: u32, l: u32) -> Option<&[Complex64]> {
        self.components.get(&(k, l)).map(|v| v.as_slice())
    }

    /// Evaluates the (k,l) component at u.
    pub fn eval_component(&self, k: u32, l: u32, u: &[Complex64]) -> Complex64 {
        match self.components.get(&(k, l)) {
            None => ZERO,
            Some(c) => csum(c.iter().enumerate().map(|(i, ci)| ci * basis_eval(self.basis, k, l, i, u))),
        }
    }

    /// Evaluates the full expansion at an arbitrary point of the sphere.
    pub fn eval(&self, u: &[Complex64]) -> Complex64 {
        match self.basis {
            Basis::Weight2 => self.eval_w2(u),
            Basis::Invariant2 => {
                let x = 1.0 - 2.0 * u[0].norm_sqr();
                csum(self.components.iter().map(|(&(k, _), c)| c[0] * jacobi_unchecked(k as usize, 0.0, 0.0, x)))
            }
            Basis::Invariant3 => {
                let mut acc = Vec::new();
                for (&(k, l), c) in &self.components {
                    for (i, ci) in c.iter().enumerate() {
                        acc.push(ci * basis_eval(self.basis, k, l, i, u));
                    }
                }
                csum(acc)
            }
        }
    }

    fn eval_w2(&self, u: &[Complex64]) -> Complex64 {
        let km = self.kmax as i32;
        let t = u[0].norm_sqr();
        let x = 1.0 - 2.0 * t;
        let mut acc = Vec::new();
        for a in -km..=km {
            for b in -(km - a.abs())..=(km - a.abs()) {
                let jmax = ((km - a.abs() - b.abs()) / 2) as usize;
                let pre = zpow(u[0], a) * zpow(u[1], b);
                let (al, be) = (a.unsigned_abs() as f64, b.unsigned_abs() as f64);
                let mut p0 = 1.0;
                let mut p1 = 0.5 * ((al + be + 2.0) * x + (al - be));
                for j in 0..=jmax {
                    let pj = if j == 0 { 1.0 } else { p1 };
                    let m = a.abs() + b.abs() + 2 * j as i32;
                    let k = ((m + a + b) / 2) as u32;
                    let l = ((m - a - b) / 2) as u32;
                    if let Some(c) = self.components.get(&(k, l)) {
                        acc.push(c[(a + l as i32) as usize] * pre * pj);
                    }
                    if j >= 1 {
                        let kf = j as f64;
                        let s = 2.0 * kf + al + be;
                        let c1 = 2.0 * (kf + 1.0) * (kf + al + be + 1.0) * s;
                        let c2 = (s + 1.0) * (al * al - be * be);
                        let c3 = s * (s + 1.0) * (s + 2.0);
                        let c4 = 2.0 * (kf + al) * (kf + be) * (s + 2.0);
                        let p2 = ((c2 + c3 * x) * p1 - c4 * p0) / c1;
                        p0 = p1;
                        p1 = p2;
                    }
                }
            }
        }
        csum(acc)
    }

    /// Samples of the full expansion on a rule.
    pub fn samples(&self, rule: &SphereRule) -> Result<Vec<Complex64>> {
        self.check_rule(rule)?;
        if self.basis == Basis::Weight2 && rule.symmetry == Symmetry::Full {
            return Ok(self.synth_w2_product(rule, None));
        }
        Ok(rule.sample(|u| self.eval(u)))
    }

    /// Real parts of the samples.
    pub fn samples_re(&self, rule: &SphereRule) -> Result<Vec<f64>> {
        Ok(self.samples(rule)?.iter().map(|z| z.re).collect())
    }

    /// Samples of one component on a rule.
    pub fn component_samples(&self, k: u32, l: u32, rule: &SphereRule) -> Result<Vec<Complex64>> {
        self.check_rule(rule)?;
        if self.basis == Basis::Weight2 && rule.symmetry == Symmetry::Full {
            return Ok(self.synth_w2_product(rule, Some((k, l))));
        }
        Ok(rule.sample(|u| self.eval_component(k, l, u)))
    }

    fn check_rule(&self, rule: &SphereRule) -> Result<()> {
        if rule.n != self.n {
            return Err(Error::Domain(format!("spectrum n={} on rule n={}", self.n, rule.n)));
        }
        if self.basis == Basis::Weight2 && rule.symmetry == Symmetry::TorusReduced {
            let noninv = self.components.iter().any(|(&(k, l), c)| {
                c.iter().enumerate().any(|(i, ci)| {
                    let (a, b, _) = w2_index(k, l, i);
                    (a != 0 || b != 0) && ci.norm() > 0.0
                })
            });
            if noninv {
                return Err(Error::NotEvaluable("non-invariant spectrum on a torus-reduced rule".into()));
            }
        }
        Ok(())
    }

    fn synth_w2_product(&self, rule: &SphereRule, only: Option<(u32, u32)>) -> Vec<Complex64> {
        let km = self.kmax as i32;
        let w = (2 * km + 1) as usize;
        let (p1, p2) = (rule.phases[0], rule.phases[1]);
        let e1 = twiddles(p1, km, 1.0);
        let e2 = twiddles(p2, km, 1.0);
        let rows: Vec<Vec<Complex64>> = rule
            .simplex
            .par_iter()
            .map(|tc| {
                let t = tc[0];
                let mut h = vec![ZERO; w * w];
                for (&(k, l), c) in &self.components {
                    if let Some(o) = only {
                        if o != (k, l) {
                            continue;
                        }
                    }
                    for (i, ci) in c.iter().enumerate() {
                        if ci.norm() == 0.0 {
                            continue;
                        }
                        let (a, b, j) = w2_index(k, l, i);
                        h[(a + km) as usize * w + (b + km) as usize] += ci * w2_radial(a, b, j, t);
                    }
                }
                // R(i1, b) = sum_a H(a,b) e^{i a phi1}
                let mut r = vec![ZERO; p1 * w];
                for i1 in 0..p1 {
                    for ai in 0..w {
                        let e = e1[i1 * w + ai];
                        let row = &h[ai * w..(ai + 1) * w];
                        if row.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                            continue;
                        }
                        for bi in 0..w {
                            r[i1 * w + bi] += e * row[bi];
                        }
                    }
                }
                let mut out = vec![ZERO; p1 * p2];
                for i1 in 0..p1 {
                    for i2 in 0..p2 {
                        let mut s = ZERO;
                        for bi in 0..w {
                            s += r[i1 * w + bi] * e2[i2 * w + bi];
                        }
                        out[i1 * p2 + i2] = s;
                    }
                }
                out
            })
            .collect();
        rows.into_iter().flatten().collect()
    }

    /// Scales every component.
    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for c in out.components.values_mut() {
            for x in c.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    /// Sum of two spectra in the same basis.
    pub fn add(&self, other: &Self, s: f64) -> Result<Self> {
        if self.basis != other.basis {
            return Err(Error::Domain("adding spectra in different bases".into()));
        }
        let mut out = self.clone();
        out.kmax = self.kmax.max(other.kmax);
        for (key, c) in &other.components {
            let e = out.components.entry(*key).or_insert_with(|| vec![ZERO; c.len()]);
            for (x, y) in e.iter_mut().zip(c) {
                *x += y * s;
            }
        }
        out.residual = self.residual + s.abs() * other.residual;
        Ok(out)
    }

    /// Squared L2 norm of each component (analytic basis norms).
    pub fn component_norms2(&self) -> BTreeMap<(u32, u32), f64> {
        self.components
            .iter()
            .map(|(&(k, l), c)| {
                let s = neumaier(c.iter().enumerate().map(|(i, ci)| ci.norm_sqr() * basis_norm2(self.basis, k, l, i)));
                ((k, l), s)
            })
            .collect()
    }

    pub fn max_coeff(&self) -> f64 {
        self.components.values().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Sup of |coefficient| scaled by the basis sup over each degree m = k + l.
    pub fn degree_magnitudes(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.kmax as usize + 1];
        for (&(k, l), c) in &self.components {
            let m = (k + l) as usize;
            let s: f64 = c
                .iter()
                .enumerate()
                .map(|(i, ci)| ci.norm() * basis_sup(self.basis, k, l, i))
                .sum();
            v[m] += s;
        }
        v
    }

    /// JSON document with component samples on the given rule and coefficients.
    pub fn to_json(&self, rule: &SphereRule) -> Result<serde_json::Value> {
        let mut comps = Vec::new();
        for (&(k, l), c) in &self.components {
            let s = self.component_samples(k, l, rule)?;
            comps.push(json!({
                "k": k,
                "l": l,
                "coeffs": c.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "samples": s.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            }));
        }
        Ok(json!({
            "n": self.n,
            "kmax": self.kmax,
            "rule-id": rule.id,
            "basis": self.basis,
            "components": comps,
        }))
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("spectrum json: {m}"));
        let basis: Basis = serde_json::from_value(v["basis"].clone()).map_err(|_| bad("basis"))?;
        let kmax = v["kmax"].as_u64().ok_or_else(|| bad("kmax"))? as u32;
        let rule_id = v["rule-id"].as_str().unwrap_or("").to_string();
        let mut s = Self::zero(basis, kmax, &rule_id);
        for c in v["components"].as_array().ok_or_else(|| bad("components"))? {
            let k = c["k"].as_u64().ok_or_else(|| bad("k"))? as u32;
            let l = c["l"].as_u64().ok_or_else(|| bad("l"))? as u32;
            let coeffs: Vec<[f64; 2]> = serde_json::from_value(c["coeffs"].clone()).map_err(|_| bad("coeffs"))?;
            s.components.insert((k, l), coeffs.iter().map(|z| Complex64::new(z[0], z[1])).collect());
        }
        Ok(s)
    }
}

/// Upper bound for |basis element| on the sphere.
fn basis_sup(basis: Basis, k: u32, l: u32, idx: usize) -> f64 {
    match basis {
        Basis::Weight2 => {
            let (a, b, j) = w2_index(k, l, idx);
            // |P_j^{(a,b)}| <= max(P_j(1), |P_j(-1)|) for a, b >= 0
            let pa = crate::specialfn::jacobi_at_one(j, a.unsigned_abs() as f64);
            let pb = crate::specialfn::jacobi_at_one(j, b.unsigned_abs() as f64);
            pa.max(pb)
        }
        Basis::Invariant2 => 1.0,
        Basis::Invariant3 => {
            let i = idx;
            let j = k as usize - i;
            crate::specialfn::jacobi_at_one(j, 2.0 * i as f64 + 1.0).max(1.0)
        }
    }
}

fn twiddles(p: usize, km: i32, sign: f64) -> Vec<Complex64> {
    let w = (2 * km + 1) as usize;
    let mut e = vec![ZERO; p * w];
    for i in 0..p {
        for (ai, a) in (-km..=km).enumerate() {
            let ang = sign * 2.0 * PI * ((a as i64 * i as i64).rem_euclid(p as i64)) as f64 / p as f64;
            e[i * w + ai] = Complex64::from_polar(1.0, ang);
        }
    }
    e
}

/// Bi-degree analysis of node samples on a rule.
pub fn analyze(rule: &SphereRule, f: &[Complex64], kmax: u32) -> Result<BiDegreeSpectrum> {
    if f.len() != rule.len() {
        return Err(Error::Domain(format!("{} samples for {} nodes", f.len(), rule.len())));
    }
    if let Some(i) = f.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { node: i, value: f[i].norm() });
    }
    let basis = Basis::for_rule(rule)?;
    let kdeg = match basis {
        Basis::Weight2 => kmax as usize,
        _ => (kmax / 2) as usize,
    };
    if 2 * rule.tnodes < kdeg + 1 {
        return Err(Error::Resolution(format!(
            "kmax = {kmax} needs at least {} simplex nodes, rule {} has {}",
            kdeg.div_ceil(2),
            rule.id,
            rule.tnodes
        )));
    }
    if basis == Basis::Weight2 && rule.phases.iter().any(|&p| p <= 2 * kmax as usize) {
        return Err(Error::Resolution(format!("kmax = {kmax} needs more than {} phases, rule {}", 2 * kmax, rule.id)));
    }
    let mut spec = BiDegreeSpectrum::zero(basis, kmax, &rule.id);
    match basis {
        Basis::Weight2 => analyze_w2(rule, f, kmax, &mut spec),
        Basis::Invariant2 | Basis::Invariant3 => analyze_invariant(rule, f, kmax, &mut spec),
    }
    let synth = spec.samples(rule)?;
    spec.residual = f.iter().zip(&synth).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(spec)
}

pub fn analyze_real(rule: &SphereRule, f: &[f64], kmax: u32) -> Result<BiDegreeSpectrum> {
    let c: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    analyze(rule, &c, kmax)
}

/// Analysis of a callable sampled on the rule.
pub fn analyze_fn<F>(rule: &SphereRule, kmax: u32, f: F) -> Result<BiDegreeSpectrum>
where
    F: Fn(&[Complex64]) -> f64 + Sync,
{
    analyze_real(rule, &rule.sample(f), kmax)
}

fn analyze_w2(rule: &SphereRule, f: &[Complex64], kmax: u32, spec: &mut BiDegreeSpectrum) {
    let km = kmax as i32;
    let w = (2 * km + 1) as usize;
    let (p1, p2) = (rule.phases[0], rule.phases[1]);
    let e1 = twiddles(p1, km, -1.0);
    let e2 = twiddles(p2, km, -1.0);
    let norm = 1.0 / (p1 * p2) as f64;
    // per t-row DFT G_i(a, b)
    let g: Vec<Vec<Complex64>> = (0..rule.simplex.len())
        .into_par_iter()
        .map(|it| {
            let row = &f[it * p1 * p2..(it + 1) * p1 * p2];
            let mut s = vec![ZERO; p1 * w];
            for i1 in 0..p1 {
                for bi in 0..w {
                    let mut acc = ZERO;
                    for i2 in 0..p2 {
                        acc += row[i1 * p2 + i2] * e2[i2 * w + bi];
                    }
                    s[i1 * w + bi] = acc;
                }
            }
            let mut out = vec![ZERO; w * w];
            for ai in 0..w {
                for bi in 0..w {
                    let mut acc = ZERO;
                    for i1 in 0..p1 {
                        acc += s[i1 * w + bi] * e1[i1 * w + ai];
                    }
                    out[ai * w + bi] = acc * norm;
                }
            }
            out
        })
        .collect();
    let tw = &rule.simplex_w;
    for (k, l) in BiDegreeSpectrum::bidegrees(Basis::Weight2, kmax) {
        let len = Basis::Weight2.block_len(k, l);
        let mut c = Vec::with_capacity(len);
        for idx in 0..len {
            let (a, b, j) = w2_index(k, l, idx);
            let col = (a + km) as usize * w + (b + km) as usize;
            let ys: Vec<f64> = rule.simplex.iter().map(|tc| w2_radial(a, b, j, tc[0])).collect();
            let num = csum(ys.iter().enumerate().map(|(i, y)| g[i][col] * (tw[i] * y)));
            let den = neumaier(ys.iter().enumerate().map(|(i, y)| tw[i] * y * y));
            c.push(num / den);
        }
        spec.components.insert((k, l), c);
    }
}

fn analyze_invariant(rule: &SphereRule, f: &[Complex64], kmax: u32, spec: &mut BiDegreeSpectrum) {
    let np = rule.nphase();
    let avg: Vec<Complex64> = (0..rule.simplex.len())
        .map(|i| csum(f[i * np..(i + 1) * np].iter().copied()) / np as f64)
        .collect();
    let basis = spec.basis;
    let tw = &rule.simplex_w;
    for (k, l) in BiDegreeSpectrum::bidegrees(basis, kmax) {
        let len = basis.block_len(k, l);
        let mut c = Vec::with_capacity(len);
        for idx in 0..len {
            let ys: Vec<f64> = rule
                .simplex
                .iter()
                .map(|tc| {
                    let u = [
                        Complex64::new(tc[0].max(0.0).sqrt(), 0.0),
                        Complex64::new(tc[1].max(0.0).sqrt(), 0.0),
                        Complex64::new(tc[2].max(0.0).sqrt(), 0.0),
                    ];
                    basis_eval(basis, k, l, idx, &u[..rule.n]).re
                })
                .collect();
            let num = csum(ys.iter().enumerate().map(|(i, y)| avg[i] * (tw[i] * y)));
            let den = neumaier(ys.iter().enumerate().map(|(i, y)| tw[i] * y * y));
            c.push(num / den);
        }
        spec.components.insert((k, l), c);
    }
}

/// Projection of node samples onto bi-degree (k,l), returned as node samples.
pub fn project_bidegree(rule: &SphereRule, f: &[Complex64], k: u32, l: u32) -> Result<Vec<Complex64>> {
    let spec = analyze(rule, f, k + l)?;
    spec.component_samples(k, l, rule)
}

/// Literal reproducing-kernel projection
/// (dim/vol) * sum_v w_v disk_poly(n,k,l, u.v) f(v), evaluated at `outputs`.
/// Quadratic cost; intended as a reference on small rules.
pub fn project_bidegree_kernel(
    rule: &SphereRule,
    f: &[Complex64],
    k: u32,
    l: u32,
    outputs: &[Vec<Complex64>],
) -> Result<Vec<Complex64>> {
    if rule.symmetry != Symmetry::Full {
        return Err(Error::NotEvaluable("kernel projection needs a full rule".into()));
    }
    let n = rule.n;
    let c = harmonic_dim(n, k, l) as f64 / crate::specialfn::sphere_volume(n);
    let w = rule.weights();
    Ok(outputs
        .par_iter()
        .map(|u| {
            let s = det_sum_c_by_seq(rule.len(), |i| {
                let v = rule.point(i);
                disk_poly_unchecked(n, k, l, hermitian(u, v)) * f[i] * w[i]
            });
            s * c
        })
        .collect())
}

fn det_sum_c_by_seq<F: Fn(usize) -> Complex64>(len: usize, term: F) -> Complex64 {
    csum((0..len).map(term))
}

/// Hermitian product x.y = sum x_j conj(y_j).
pub fn hermitian(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

// ---------------------------------------------------------------- multipliers

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TableKind {
    Identity,
    J { c: String, p: f64 },
    F { q: f64 },
    T { mu: String },
    Composite(Vec<TableKind>),
    Scaled(Box<TableKind>, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ClosedForm,
    Quadrature,
}

/// Map (k,l) -> multiplier for a transform acting diagonally on bi-degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierTable {
    pub n: usize,
    pub kmax: u32,
    pub kind: TableKind,
    pub provenance: Provenance,
    pub entries: BTreeMap<(u32, u32), Complex64>,
}

impl MultiplierTable {
    pub fn identity(n: usize, kmax: u32) -> Self {
        let mut entries = BTreeMap::new();
        for m in 0..=kmax {
            for k in 0..=m {
                entries.insert((k, m - k), Complex64::new(1.0, 0.0));
            }
        }
        MultiplierTable { n, kmax, kind: TableKind::Identity, provenance: Provenance::ClosedForm, entries }
    }

    pub fn get(&self, k: u32, l: u32) -> Option<Complex64> {
        self.entries.get(&(k, l)).copied()
    }

    /// Entrywise product on the common support.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Domain("composing tables of different dimension".into()));
        }
        let entries = self
            .entries
            .iter()
            .filter_map(|(key, a)| other.entries.get(key).map(|b| (*key, a * b)))
            .collect();
        let prov = if self.provenance == Provenance::ClosedForm && other.provenance == Provenance::ClosedForm {
            Provenance::ClosedForm
        } else {
            Provenance::Quadrature
        };
        Ok(MultiplierTable {
            n: self.n,
            kmax: self.kmax.min(other.kmax),
            kind: TableKind::Composite(vec![self.kind.clone(), other.kind.clone()]),
            provenance: prov,
            entries,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut t = self.clone();
        for v in t.entries.values_mut() {
            *v *= s;
        }
        t.kind = TableKind::Scaled(Box::new(self.kind.clone()), s);
        t
    }

    /// Largest |entries(l,k) - conj(entries(k,l))| relative to the table scale.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.entries.values().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let mut worst: f64 = 0.0;
        for (&(k, l), v) in &self.entries {
            if let Some(w) = self.entries.get(&(l, k)) {
                worst = worst.max((w - v.conj()).norm() / scale);
            }
        }
        worst
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|(&(k, l), z)| json!({"k": k, "l": l, "re": z.re, "im": z.im}))
            .collect();
        json!({
            "n": self.n,
            "kmax": self.kmax,
            "kind": self.kind,
            "provenance": self.provenance,
            "entries": entries,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,l,re,im\n");
        for (&(k, l), z) in &self.entries {
            s.push_str(&format!("{k},{l},{:.16e},{:.16e}\n", z.re, z.im));
        }
        s
    }
}

/// Scales each component by its multiplier. Components without an entry are
/// accepted only when numerically zero.
pub fn apply_multipliers(spec: &BiDegreeSpectrum, table: &MultiplierTable) -> Result<BiDegreeSpectrum> {
    if table.n != spec.n {
        return Err(Error::Domain(format!("table n={} for spectrum n={}", table.n, spec.n)));
    }
    if table.kmax < spec.kmax {
        return Err(Error::Resolution(format!("table kmax {} below spectrum kmax {}", table.kmax, spec.kmax)));
    }
    let scale = spec.max_coeff().max(1e-300);
    let mut out = spec.clone();
    out.components.clear();
    for (&(k, l), c) in &spec.components {
        match table.get(k, l) {
            Some(lam) => {
                out.components.insert((k, l), c.iter().map(|z| z * lam).collect());
            }
            None => {
                if c.iter().any(|z| z.norm() > 1e-12 * scale) {
                    return Err(Error::MissingEntry { k, l });
                }
            }
        }
    }
    let lmax = table.entries.values().map(|z| z.norm()).fold(0.0, f64::max);
    out.residual = spec.residual * lmax;
    Ok(out)
}

/// Inner product <f, g> = integral f conj(g) of two spectra in the same basis.
pub fn spectral_inner(f: &BiDegreeSpectrum, g: &BiDegreeSpectrum) -> Result<Complex64> {
    if f.basis != g.basis {
        return Err(Error::Domain("inner product of spectra in different bases".into()));
    }
    let mut acc = Vec::new();
    for (&(k, l), c) in &f.components {
        if let Some(d) = g.components.get(&(k, l)) {
            for (i, (x, y)) in c.iter().zip(d).enumerate() {
                acc.push(x * y.conj() * basis_norm2(f.basis, k, l, i));
            }
        }
    }
    Ok(csum(acc))
}

/// Compensated weighted inner product of node samples.
pub fn grid_inner(rule: &SphereRule, f: &[Complex64], g: &[Complex64]) -> Complex64 {
    let w = rule.weights();
    crate::spheregrid::det_sum_c_by(f.len(), |i| f[i] * g[i].conj() * w[i])
}

/// Real weighted inner product.
pub fn grid_inner_re(rule: &SphereRule, f: &[f64], g: &[f64]) -> f64 {
    let w = rule.weights();
    det_sum_by(f.len(), |i| f[i] * g[i] * w[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s3() -> SphereRule {
        SphereRule::product(2, 10, &[20, 20]).unwrap()
    }

    pub(crate) fn random_spectrum(basis: Basis, kmax: u32, seed: u64, rule_id: &str) -> BiDegreeSpectrum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = BiDegreeSpectrum::zero(basis, kmax, rule_id);
        for (k, l) in BiDegreeSpectrum::bidegrees(basis, kmax) {
            let c = (0..basis.block_len(k, l))
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            s.components.insert((k, l), c);
        }
        s
    }

    #[test]
    fn basis_norms_match_quadrature() {
        let r = s3();
        for (k, l) in [(0, 0), (2, 1), (3, 3), (4, 0)] {
            for idx in 0..Basis::Weight2.block_len(k, l) {
                let f = r.sample(|u| basis_eval(Basis::Weight2, k, l, idx, u).norm_sqr());
                let q = r.integrate(&f).unwrap();
                assert!((q - basis_norm2(Basis::Weight2, k, l, idx)).abs() < 1e-10 * q, "{k}{l}{idx}");
            }
        }
        let r3 = SphereRule::torus_reduced(3, 10).unwrap();
        for k in 0..5 {
            for idx in 0..=k as usize {
                let f = r3.sample(|u| basis_eval(Basis::Invariant3, k, k, idx, u).powi(2).re);
                let q = r3.integrate(&f).unwrap();
                assert!((q - basis_norm2(Basis::Invariant3, k, k, idx)).abs() < 1e-10 * q);
            }
        }
    }

    #[test]
    fn basis_bidegree_covariance() {
        let u = [Complex64::new(0.3, 0.4), Complex64::new(-0.5, 0.2)];
        let nrm = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
        let u = [u[0] / nrm, u[1] / nrm];
        let c = Complex64::from_polar(1.0, 0.9);
        for (k, l) in [(2, 1), (0, 3), (4, 4), (5, 1)] {
            for idx in 0..Basis::Weight2.block_len(k, l) {
                let a = basis_eval(Basis::Weight2, k, l, idx, &[c * u[0], c * u[1]]);
                let b = c.powu(k) * c.conj().powu(l) * basis_eval(Basis::Weight2, k, l, idx, &u);
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn round_trip_band_limited() {
        let r = SphereRule::product(2, 8, &[20, 20]).unwrap();
        let s = random_spectrum(Basis::Weight2, 8, 7, &r.id);
        let f = s.samples(&r).unwrap();
        let back = analyze(&r, &f, 8).unwrap();
        assert!(back.residual < 1e-9, "residual {}", back.residual);
        for (key, c) in &s.components {
            for (x, y) in c.iter().zip(&back.components[key]) {
                assert!((x - y).norm() < 1e-9);
            }
        }
        // generic evaluation agrees with the product-grid synthesis
        for i in [0, 17, 333, r.len() - 1] {
            assert!((s.eval(r.point(i)) - f[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn projection_examples() {
        let r = s3();
        let f: Vec<Complex64> = r.sample(|u| Complex64::new((u[0] * u[0]).re, 0.0));
        let p = project_bidegree(&r, &f, 2, 0).unwrap();
        for i in (0..r.len()).step_by(97) {
            let u = r.point(i);
            assert!((p[i] - u[0] * u[0] * 0.5).norm() < 1e-12);
        }
        let one = vec![Complex64::new(1.0, 0.0); r.len()];
        let p = project_bidegree(&r, &one, 0, 0).unwrap();
        assert!(p.iter().all(|z| (z - 1.0).norm() < 1e-12));
        let p = project_bidegree(&r, &one, 1, 1).unwrap();
        assert!(p.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn kernel_projection_matches_spectral() {
        let r = SphereRule::product(2, 6, &[12, 12]).unwrap();
        let s = random_spectrum(Basis::Weight2, 4, 3, &r.id);
        let f = s.samples(&r).unwrap();
        let outs: Vec<Vec<Complex64>> = [5usize, 200, 701].iter().map(|&i| r.point(i).to_vec()).collect();
        for (k, l) in [(0, 0), (1, 0), (2, 1), (1, 3), (2, 2)] {
            let kern = project_bidegree_kernel(&r, &f, k, l, &outs).unwrap();
            for (u, v) in outs.iter().zip(&kern) {
                let direct = s.eval_component(k, l, u);
                assert!((direct - v).norm() < 1e-9, "({k},{l}) {direct} vs {v}");
            }
        }
    }

    #[test]
    fn odd_function_has_no_even_components() {
        let r = s3();
        let f: Vec<Complex64> = r.sample(|u| Complex64::new(u[0].re, 0.0));
        let s = analyze(&r, &f, 6).unwrap();
        for (&(k, l), c) in &s.components {
            if (k + l) % 2 == 0 {
                assert!(c.iter().all(|z| z.norm() < 1e-10));
            }
        }
    }

    #[test]
    fn parseval() {
        let r = SphereRule::product(2, 16, &[32, 32]).unwrap();
        let f: Vec<Complex64> = r.sample(|u| Complex64::new((1.0 + 0.3 * u[0].re * u[1].im).exp(), 0.0));
        let s = analyze(&r, &f, 10).unwrap();
        let synth = s.samples(&r).unwrap();
        let res: Vec<Complex64> = f.iter().zip(&synth).map(|(a, b)| a - b).collect();
        let total = grid_inner(&r, &f, &f).re;
        let parts: f64 = s.component_norms2().values().sum::<f64>() + grid_inner(&r, &res, &res).re;
        assert!((total - parts).abs() < 1e-6 * total);
    }

    #[test]
    fn invariant_rules() {
        let r = SphereRule::torus_reduced(2, 12).unwrap();
        let f: Vec<Complex64> = r.sample(|u| Complex64::new(1.0 / (1.0 + u[0].norm_sqr()), 0.0));
        let s = analyze(&r, &f, 20).unwrap();
        assert!(s.residual < 1e-6);
        let r3 = SphereRule::torus_reduced(3, 10).unwrap();
        let s3 = random_spectrum(Basis::Invariant3, 10, 5, &r3.id);
        let f = s3.samples(&r3).unwrap();
        let back = analyze(&r3, &f, 10).unwrap();
        assert!(back.residual < 1e-10);
        // full n = 3 rule: phase average then the same coefficients
        let full = SphereRule::product(3, 10, &[4, 4, 4]).unwrap();
        let ff = s3.samples(&full).unwrap();
        let back2 = analyze(&full, &ff, 10).unwrap();
        for (key, c) in &s3.components {
            for (x, y) in c.iter().zip(&back2.components[key]) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn invariant3_matches_kernel_projection() {
        // the simplex basis spans the (k,k) harmonics: check via the kernel on a full rule
        let full = SphereRule::product(3, 6, &[8, 8, 8]).unwrap();
        let s = random_spectrum(Basis::Invariant3, 6, 11, &full.id);
        let f = s.samples(&full).unwrap();
        let outs: Vec<Vec<Complex64>> = [3usize, 1000].iter().map(|&i| full.point(i).to_vec()).collect();
        for k in 0..=3 {
            let kern = project_bidegree_kernel(&full, &f, k, k, &outs).unwrap();
            for (u, v) in outs.iter().zip(&kern) {
                assert!((s.eval_component(k, k, u) - v).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn resolution_errors() {
        let r = SphereRule::product(2, 3, &[8, 8]).unwrap();
        let f = vec![Complex64::new(1.0, 0.0); r.len()];
        assert!(matches!(analyze(&r, &f, 6), Err(Error::Resolution(_))));
        assert!(matches!(analyze(&r, &f, 4), Err(Error::Resolution(_))));
        assert!(analyze(&r, &f, 3).is_ok());
    }

    #[test]
    fn multipliers_apply_and_commute() {
        let r = s3();
        let s = random_spectrum(Basis::Weight2, 6, 1, &r.id);
        let id = MultiplierTable::identity(2, 6);
        assert_eq!(apply_multipliers(&s, &id).unwrap().components, s.components);
        let mut t1 = MultiplierTable::identity(2, 6);
        let mut t2 = MultiplierTable::identity(2, 6);
        for (i, v) in t1.entries.values_mut().enumerate() {
            *v = Complex64::new(1.0 + i as f64, 0.5);
        }
        for (i, v) in t2.entries.values_mut().enumerate() {
            *v = Complex64::new(2.0 - 0.1 * i as f64, 0.0);
        }
        let a = apply_multipliers(&apply_multipliers(&s, &t1).unwrap(), &t2).unwrap();
        let b = apply_multipliers(&apply_multipliers(&s, &t2).unwrap(), &t1).unwrap();
        for (key, c) in &a.components {
            for (x, y) in c.iter().zip(&b.components[key]) {
                assert!((x - y).norm() < 1e-10 * x.norm().max(1.0));
            }
        }
        t1.entries.remove(&(1, 2));
        assert_eq!(apply_multipliers(&s, &t1), Err(Error::MissingEntry { k: 1, l: 2 }));
        let small = MultiplierTable::identity(2, 4);
        assert!(apply_multipliers(&s, &small).is_err());
    }

    #[test]
    fn json_round_trip() {
        let r = SphereRule::product(2, 4, &[8, 8]).unwrap();
        let s = random_spectrum(Basis::Weight2, 3, 2, &r.id);
        let v = s.to_json(&r).unwrap();
        assert_eq!(v["rule-id"], "s3:4x8x8");
        let back = BiDegreeSpectrum::from_json(&v).unwrap();
        assert_eq!(back.components, s.components);
    }

    #[test]
    fn empty_spectrum_is_zero() {
        let r = SphereRule::product(2, 4, &[8, 8]).unwrap();
        let s = BiDegreeSpectrum::zero(Basis::Weight2, 3, &r.id);
        assert!(s.samples(&r).unwrap().iter().all(|z| z.norm() == 0.0));
    }
}
