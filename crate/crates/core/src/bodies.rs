//! Planar bodies C, star and convex bodies in C^n, surface-area-measure data,
//! circle measures, and validity checks.

use crate::error::{Error, Result};
use crate::harmonics::{analyze_real, BiDegreeSpectrum};
use crate::spheregrid::{circle_piecewise, csum, det_sum_by, neumaier, SphereRule, Symmetry};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use std::f64::consts::PI;
use std::sync::Arc;

pub type RealFn = Arc<dyn Fn(&[Complex64]) -> f64 + Send + Sync>;


// ---------------------------------------------------------------- circle measures

/// Finite signed measure on S^1: density samples on uniform nodes plus atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMeasure {
    /// Density values at angles 2 pi j / M (dmu = density dtheta).
    pub density: Option<Vec<f64>>,
    /// (angle, weight) pairs.
    pub atoms: Vec<(f64, f64)>,
    pub even: bool,
    pub label: String,
}

impl CircleMeasure {
    pub fn uniform(value: f64, m: usize, label: &str) -> Self {
        CircleMeasure { density: Some(vec![value; m]), atoms: vec![], even: true, label: label.into() }
    }

    pub fn atoms(atoms: Vec<(f64, f64)>, label: &str) -> Self {
        let mut m = CircleMeasure { density: None, atoms, even: false, label: label.into() };
        m.even = m.check_even(1e-12);
        m
    }

    pub fn density_nodes(&self) -> Vec<f64> {
        match &self.density {
            None => vec![],
            Some(d) => (0..d.len()).map(|j| 2.0 * PI * j as f64 / d.len() as f64).collect(),
        }
    }

    /// Integral of g(e^{i theta}) dmu.
    pub fn integrate<G: Fn(f64) -> Complex64>(&self, g: G) -> Complex64 {
        let mut terms = Vec::new();
        if let Some(d) = &self.density {
            let h = 2.0 * PI / d.len() as f64;
            for (j, dj) in d.iter().enumerate() {
                terms.push(g(2.0 * PI * j as f64 / d.len() as f64) * (dj * h));
            }
        }
        for &(a, w) in &self.atoms {
            terms.push(g(a) * w);
        }
        csum(terms)
    }

    pub fn total_mass(&self) -> f64 {
        self.integrate(|_| Complex64::new(1.0, 0.0)).re
    }

    pub fn total_variation(&self) -> f64 {
        let mut tv = self.atoms.iter().map(|a| a.1.abs()).sum::<f64>();
        if let Some(d) = &self.density {
            tv += d.iter().map(|x| x.abs()).sum::<f64>() * 2.0 * PI / d.len() as f64;
        }
        tv
    }

    /// c_0 = (1/2pi) mu(S^1), c_m = (1/pi) int c^m dmu.
    pub fn coeff(&self, m: i32) -> Complex64 {
        let v = self.integrate(|t| Complex64::from_polar(1.0, m as f64 * t));
        if m == 0 {
            v / (2.0 * PI)
        } else {
            v / PI
        }
    }

    /// Push-forward by c -> e^{i alpha} c.
    pub fn rotate(&self, alpha: f64) -> Result<Self> {
        let mut out = self.clone();
        out.atoms = self.atoms.iter().map(|&(a, w)| ((a + alpha).rem_euclid(2.0 * PI), w)).collect();
        if let Some(d) = &self.density {
            let m = d.len();
            let shift = alpha / (2.0 * PI / m as f64);
            if (shift - shift.round()).abs() > 1e-9 {
                return Err(Error::NotEvaluable(format!("rotation by {alpha} is off the density grid")));
            }
            let s = (shift.round() as i64).rem_euclid(m as i64) as usize;
            out.density = Some((0..m).map(|j| d[(j + m - s) % m]).collect());
        }
        Ok(out)
    }

    /// Push-forward by complex conjugation.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.atoms = self.atoms.iter().map(|&(a, w)| ((-a).rem_euclid(2.0 * PI), w)).collect();
        if let Some(d) = &self.density {
            let m = d.len();
            out.density = Some((0..m).map(|j| d[(m - j) % m]).collect());
        }
        out.label = format!("conj({})", self.label);
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.atoms.iter_mut().for_each(|a| a.1 *= s);
        if let Some(d) = &mut out.density {
            d.iter_mut().for_each(|x| *x *= s);
        }
        out
    }

    pub fn check_even(&self, tol: f64) -> bool {
        if let Some(d) = &self.density {
            let m = d.len();
            if m % 2 != 0 {
                return false;
            }
            let scale = d.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
            if (0..m).any(|j| (d[j] - d[(j + m / 2) % m]).abs() > tol * scale) {
                return false;
            }
        }
        self.atoms.iter().all(|&(a, w)| {
            self.atoms.iter().any(|&(b, v)| {
                let d = (a + PI - b).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d) < 1e-9 && (w - v).abs() <= tol * w.abs().max(1.0)
            })
        })
    }
}

// ---------------------------------------------------------------- planar bodies

#[derive(Debug, Clone, PartialEq)]
pub enum PlanarKind {
    Disc,
    /// Vertices in counter-clockwise order.
    Polygon(Vec<Complex64>),
    /// h(theta) = sum_m a_m e^{i m theta} (trigonometric interpolant of samples).
    Sampled(Vec<Complex64>),
}

/// Origin-symmetric convex body C in the complex plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarBody {
    pub kind: PlanarKind,
    pub label: String,
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{what}: `{s}`")))
}

impl PlanarBody {
    pub fn disc() -> Self {
        PlanarBody { kind: PlanarKind::Disc, label: "disc".into() }
    }

    /// Regular k-gon with vertices at the k-th roots of unity.
    pub fn ngon(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidBody(format!("ngon:{k} is degenerate")));
        }
        let v = (0..k).map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / k as f64)).collect();
        Self::polygon(v, &format!("ngon:{k}"))
    }

    /// Polygon from vertices; validates convex position and origin symmetry.
    pub fn polygon(mut v: Vec<Complex64>, label: &str) -> Result<Self> {
        if v.len() < 3 {
            return Err(Error::InvalidBody("polygon needs at least 3 vertices".into()));
        }
        v.sort_by(|a, b| a.arg().rem_euclid(2.0 * PI).partial_cmp(&b.arg().rem_euclid(2.0 * PI)).unwrap());
        let body = PlanarBody { kind: PlanarKind::Polygon(v), label: label.into() };
        body.validate()?;
        Ok(body)
    }

    /// From support samples at uniform angles.
    pub fn sampled(samples: &[f64], label: &str) -> Result<Self> {
        let m = samples.len();
        if m < 4 || m % 2 != 0 {
            return Err(Error::InvalidBody(format!("need an even number >= 4 of support samples, got {m}")));
        }
        let half = (m / 2) as i32;
        let mut a = Vec::with_capacity(m + 1);
        for k in -half..=half {
            let s = csum(samples.iter().enumerate().map(|(j, h)| {
                Complex64::from_polar(*h, -(k as f64) * 2.0 * PI * j as f64 / m as f64)
            })) / m as f64;
            // split the Nyquist term evenly
            a.push(if k.abs() == half { s * 0.5 } else { s });
        }
        let body = PlanarBody { kind: PlanarKind::Sampled(a), label: label.into() };
        body.validate()?;
        Ok(body)
    }

    /// Parses `disc`, `ngon:k`, `ngon:k@angle`, `polygon:x,y;x,y;...`, `support-samples:FILE`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "disc" {
            return Ok(Self::disc());
        }
        if let Some(rest) = spec.strip_prefix("ngon:") {
            let (k, rot) = match rest.split_once('@') {
                Some((k, r)) => (k, parse_f64(r, "rotation")?),
                None => (rest, 0.0),
            };
            let k: usize = k.parse().map_err(|_| Error::Parse(format!("ngon count `{k}`")))?;
            if k % 2 != 0 {
                return Err(Error::InvalidBody(format!("ngon:{k} is not origin-symmetric")));
            }
            let mut b = Self::ngon(k)?;
            if rot != 0.0 {
                b = b.rotate(rot);
                b.label = spec.to_string();
            }
            return Ok(b);
        }
        if let Some(rest) = spec.strip_prefix("polygon:") {
            let mut v = Vec::new();
            for pair in rest.split(';') {
                let (x, y) = pair.split_once(',').ok_or_else(|| Error::Parse(format!("vertex `{pair}`")))?;
                v.push(Complex64::new(parse_f64(x, "vertex")?, parse_f64(y, "vertex")?));
            }
            return Self::polygon(v, spec);
        }
        if let Some(path) = spec.strip_prefix("support-samples:") {
            let text = std::fs::read_to_string(path)?;
            let j: serde_json::Value = serde_json::from_str(&text)?;
            let s: Vec<f64> = serde_json::from_value(j["samples"].clone())
                .map_err(|_| Error::Parse(format!("{path}: missing samples")))?;
            return Self::sampled(&s, spec);
        }
        Err(Error::Parse(format!("unknown planar body `{spec}`")))
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            PlanarKind::Disc => Ok(()),
            PlanarKind::Polygon(v) => {
                let k = v.len();
                for i in 0..k {
                    let a = v[i];
                    let b = v[(i + 1) % k];
                    let c = v[(i + 2) % k];
                    let cross = ((b - a).conj() * (c - b)).im;
                    if cross <= 1e-12 {
                        return Err(Error::InvalidBody(format!("{}: vertices not in strictly convex position", self.label)));
                    }
                }
                for a in v {
                    if !v.iter().any(|b| (a + b).norm() < 1e-9) {
                        return Err(Error::InvalidBody(format!("{}: not origin-symmetric", self.label)));
                    }
                }
                if (0..720).any(|j| self.support(2.0 * PI * j as f64 / 720.0) <= 0.0) {
                    return Err(Error::InvalidBody(format!("{}: origin not interior", self.label)));
                }
                Ok(())
            }
            PlanarKind::Sampled(a) => {
                let half = (a.len() / 2) as i32;
                let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
                for k in (-half..=half).filter(|k| k % 2 != 0) {
                    if a[(k + half) as usize].norm() > 1e-9 * scale {
                        return Err(Error::InvalidBody(format!("{}: not origin-symmetric", self.label)));
                    }
                }
                let fine = 8 * a.len();
                let mut hmin = f64::INFINITY;
                let mut curv_min = f64::INFINITY;
                for j in 0..fine {
                    let t = 2.0 * PI * j as f64 / fine as f64;
                    hmin = hmin.min(self.support(t));
                    let c = csum((-half..=half).map(|k| {
                        a[(k + half) as usize] * (1.0 - (k * k) as f64) * Complex64::from_polar(1.0, k as f64 * t)
                    }));
                    curv_min = curv_min.min(c.re);
                }
                if hmin <= 0.0 {
                    return Err(Error::InvalidBody(format!("{}: support not positive", self.label)));
                }
                if curv_min < -1e-9 * scale.max(1.0) {
                    return Err(Error::InvalidBody(format!("{}: h'' + h < 0 (not convex)", self.label)));
                }
                Ok(())
            }
        }
    }

    /// Support function at angle theta.
    pub fn support(&self, theta: f64) -> f64 {
        match &self.kind {
            PlanarKind::Disc => 1.0,
            PlanarKind::Polygon(v) => {
                let d = Complex64::from_polar(1.0, theta);
                v.iter().map(|z| (z * d.conj()).re).fold(f64::NEG_INFINITY, f64::max)
            }
            PlanarKind::Sampled(a) => {
                let half = (a.len() / 2) as i32;
                csum((-half..=half).map(|k| a[(k + half) as usize] * Complex64::from_polar(1.0, k as f64 * theta))).re
            }
        }
    }

    /// 1-homogeneous support function h_C(z).
    pub fn support_z(&self, z: Complex64) -> f64 {
        match &self.kind {
            PlanarKind::Disc => z.norm(),
            PlanarKind::Polygon(v) => v.iter().map(|w| (w * z.conj()).re).fold(f64::NEG_INFINITY, f64::max),
            PlanarKind::Sampled(_) => {
                let r = z.norm();
                if r == 0.0 {
                    0.0
                } else {
                    r * self.support(z.arg())
                }
            }
        }
    }

    /// Angles where h_C fails to be smooth (outer normals of polygon edges).
    pub fn kinks(&self) -> Vec<f64> {
        match &self.kind {
            PlanarKind::Polygon(v) => {
                let k = v.len();
                let mut out: Vec<f64> = (0..k)
                    .map(|i| {
                        let e = v[(i + 1) % k] - v[i];
                        (e * Complex64::new(0.0, -1.0)).arg().rem_euclid(2.0 * PI)
                    })
                    .collect();
                out.sort_by(|a, b| a.partial_cmp(b).unwrap());
                out
            }
            _ => vec![],
        }
    }

    /// Largest s with h(e^{2 pi i/s} c) = h(c); None for the disc.
    pub fn symmetry_order(&self) -> Option<u32> {
        match &self.kind {
            PlanarKind::Disc => None,
            PlanarKind::Polygon(v) => {
                let k = v.len() as u32;
                (1..=k).rev().filter(|s| k % s == 0).find(|&s| {
                    let r = Complex64::from_polar(1.0, 2.0 * PI / s as f64);
                    v.iter().all(|a| v.iter().any(|b| (a * r - b).norm() < 1e-9))
                })
            }
            PlanarKind::Sampled(a) => {
                let half = (a.len() / 2) as i32;
                let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let nz: Vec<i32> = (-half..=half).filter(|&k| k != 0 && a[(k + half) as usize].norm() > 1e-12 * scale).collect();
                if nz.is_empty() {
                    return None;
                }
                let mut g = 0i32;
                for k in nz {
                    g = gcd(g, k.abs());
                }
                Some(g as u32)
            }
        }
    }

    /// e^{i alpha} C.
    pub fn rotate(&self, alpha: f64) -> Self {
        let r = Complex64::from_polar(1.0, alpha);
        let kind = match &self.kind {
            PlanarKind::Disc => PlanarKind::Disc,
            PlanarKind::Polygon(v) => {
                let mut w: Vec<Complex64> = v.iter().map(|z| z * r).collect();
                w.sort_by(|a, b| a.arg().rem_euclid(2.0 * PI).partial_cmp(&b.arg().rem_euclid(2.0 * PI)).unwrap());
                PlanarKind::Polygon(w)
            }
            PlanarKind::Sampled(a) => {
                let half = (a.len() / 2) as i32;
                PlanarKind::Sampled(
                    (-half..=half).map(|k| a[(k + half) as usize] * Complex64::from_polar(1.0, -(k as f64) * alpha)).collect(),
                )
            }
        };
        PlanarBody { kind, label: format!("rot({},{alpha})", self.label) }
    }

    /// i C.
    pub fn times_i(&self) -> Self {
        let mut b = self.rotate(PI / 2.0);
        b.label = format!("i*{}", self.label);
        b
    }

    /// Complex conjugate body.
    pub fn conj(&self) -> Self {
        let kind = match &self.kind {
            PlanarKind::Disc => PlanarKind::Disc,
            PlanarKind::Polygon(v) => {
                let mut w: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
                w.sort_by(|a, b| a.arg().rem_euclid(2.0 * PI).partial_cmp(&b.arg().rem_euclid(2.0 * PI)).unwrap());
                PlanarKind::Polygon(w)
            }
            PlanarKind::Sampled(a) => PlanarKind::Sampled(a.iter().rev().copied().collect()),
        };
        PlanarBody { kind, label: format!("conj({})", self.label) }
    }

    /// Quadrature nodes on the circle adapted to the kinks of h_C.
    pub fn circle_nodes(&self, per_arc: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.kinks();
        if k.is_empty() {
            let m = 2 * per_arc.max(8);
            let h = 2.0 * PI / m as f64;
            ((0..m).map(|j| j as f64 * h).collect(), vec![h; m])
        } else {
            circle_piecewise(&k, per_arc)
        }
    }

    /// Coefficients c_m[h_C^p] for m = -mmax..=mmax (index m + mmax).
    pub fn fourier_coeffs(&self, p: f64, mmax: u32) -> Vec<Complex64> {
        let mm = mmax as i32;
        let sym = self.symmetry_order();
        let keep = |m: i32| -> bool {
            if m == 0 {
                return true;
            }
            if m % 2 != 0 {
                return false;
            }
            match sym {
                None => false,
                Some(s) => m % s as i32 == 0,
            }
        };
        let (th, w) = self.circle_nodes(48 + mmax as usize);
        let hp: Vec<f64> = th.iter().map(|&t| self.support(t).powf(p)).collect();
        (-mm..=mm)
            .map(|m| {
                if !keep(m) {
                    return Complex64::new(0.0, 0.0);
                }
                if matches!(self.kind, PlanarKind::Disc) {
                    return Complex64::new(1.0, 0.0);
                }
                let s = csum(th.iter().zip(&w).zip(&hp).map(|((t, wi), h)| Complex64::from_polar(h * wi, m as f64 * t)));
                if m == 0 {
                    s / (2.0 * PI)
                } else {
                    s / PI
                }
            })
            .collect()
    }

    /// Planar surface-area measure: atoms at outer normals for polygons, density
    /// h'' + h otherwise (sampled on `m` nodes).
    pub fn surface_measure(&self, m: usize) -> CircleMeasure {
        match &self.kind {
            PlanarKind::Disc => CircleMeasure::uniform(1.0, m, &format!("S({})", self.label)),
            PlanarKind::Polygon(v) => {
                let k = v.len();
                let atoms = (0..k)
                    .map(|i| {
                        let e = v[(i + 1) % k] - v[i];
                        ((e * Complex64::new(0.0, -1.0)).arg().rem_euclid(2.0 * PI), e.norm())
                    })
                    .collect::<Vec<(f64, f64)>>();
                let mut atoms = atoms;
                atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                CircleMeasure::atoms(atoms, &format!("S({})", self.label))
            }
            PlanarKind::Sampled(a) => {
                let half = (a.len() / 2) as i32;
                let d = (0..m)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / m as f64;
                        csum((-half..=half).map(|k| {
                            a[(k + half) as usize] * (1.0 - (k * k) as f64) * Complex64::from_polar(1.0, k as f64 * t)
                        }))
                        .re
                    })
                    .collect();
                CircleMeasure { density: Some(d), atoms: vec![], even: true, label: format!("S({})", self.label) }
            }
        }
    }

    /// Perimeter from the support function (int h dtheta).
    pub fn perimeter(&self) -> f64 {
        let (th, w) = self.circle_nodes(64);
        neumaier(th.iter().zip(&w).map(|(t, w)| w * self.support(*t)))
    }
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// ---------------------------------------------------------------- star bodies

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BodyFlags {
    pub origin_symmetric: bool,
    pub s1_invariant: bool,
    pub torus_invariant: bool,
}

#[derive(Clone)]
enum Radial {
    Fn(RealFn),
    Spectral { spec: Arc<BiDegreeSpectrum>, power: f64 },
}

/// Star body in C^n given by its radial function.
#[derive(Clone)]
pub struct StarBody {
    pub n: usize,
    pub label: String,
    radial: Radial,
    /// Support function when the body is convex and h is known.
    pub support: Option<RealFn>,
    pub flags: BodyFlags,
    pub provenance: serde_json::Value,
}

impl std::fmt::Debug for StarBody {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StarBody").field("n", &self.n).field("label", &self.label).field("flags", &self.flags).finish()
    }
}

/// Complex l_q norm.
pub fn lq_norm(u: &[Complex64], q: f64) -> f64 {
    if q.is_infinite() {
        return u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    u.iter().map(|z| z.norm().powf(q)).sum::<f64>().powf(1.0 / q)
}

pub fn conjugate_exponent(q: f64) -> f64 {
    q / (q - 1.0)
}

/// Named test harmonics for perturbations.
pub fn named_harmonic(name: &str, n: usize) -> Result<RealFn> {
    let nf = n as f64;
    let f: RealFn = match name {
        "re_z1sq" => Arc::new(|u: &[Complex64]| (u[0] * u[0]).re),
        "im_z1sq" => Arc::new(|u: &[Complex64]| (u[0] * u[0]).im),
        "re_z1z2bar" => Arc::new(|u: &[Complex64]| (u[0] * u[1].conj()).re),
        "abs_z1sq" => Arc::new(move |u: &[Complex64]| u[0].norm_sqr() - 1.0 / nf),
        "bump8" => Arc::new(|u: &[Complex64]| u[0].norm_sqr().powi(4)),
        _ => return Err(Error::Parse(format!("unknown harmonic `{name}`"))),
    };
    Ok(f)
}

impl StarBody {
    pub fn from_fn(n: usize, label: &str, radial: RealFn, flags: BodyFlags) -> Self {
        StarBody { n, label: label.into(), radial: Radial::Fn(radial), support: None, flags, provenance: json!({}) }
    }

    /// Body with rho^power equal to a band-limited spectrum.
    pub fn from_spectrum_power(label: &str, spec: BiDegreeSpectrum, power: f64, flags: BodyFlags) -> Self {
        StarBody {
            n: spec.n,
            label: label.into(),
            radial: Radial::Spectral { spec: Arc::new(spec), power },
            support: None,
            flags,
            provenance: json!({}),
        }
    }

    pub fn with_support(mut self, h: RealFn) -> Self {
        self.support = Some(h);
        self
    }

    pub fn ball(n: usize) -> Self {
        let all = BodyFlags { origin_symmetric: true, s1_invariant: true, torus_invariant: true };
        Self::from_fn(n, "ball", Arc::new(|_| 1.0), all).with_support(Arc::new(|_| 1.0))
    }

    /// Complex l_q unit ball: rho = ||u||_q^{-1}, h = ||u||_{q'}.
    pub fn lq(n: usize, q: f64) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(Error::InvalidBody(format!("l_q ball needs q >= 1, got {q}")));
        }
        let qp = conjugate_exponent(q);
        let all = BodyFlags { origin_symmetric: true, s1_invariant: true, torus_invariant: true };
        Ok(Self::from_fn(n, &format!("lq:{q}"), Arc::new(move |u| 1.0 / lq_norm(u, q)), all)
            .with_support(Arc::new(move |u| lq_norm(u, qp))))
    }

    /// Polar of the l_q ball, i.e. the l_{q'} ball.
    pub fn lq_polar(n: usize, q: f64) -> Result<Self> {
        let mut b = Self::lq(n, conjugate_exponent(q))?;
        b.label = format!("lq-polar:{q}");
        Ok(b)
    }

    /// Parses the body mini-language.
    pub fn parse(spec: &str, n: usize) -> Result<Self> {
        let spec = spec.trim();
        if !(2..=3).contains(&n) {
            return Err(Error::Unsupported(format!("n = {n}")));
        }
        let qval = |s: &str| -> Result<f64> { parse_f64(s.strip_prefix("q=").unwrap_or(s), "q") };
        if spec == "ball" {
            return Ok(Self::ball(n));
        }
        if let Some(r) = spec.strip_prefix("lq-polar:") {
            return Self::lq_polar(n, qval(r)?);
        }
        if let Some(r) = spec.strip_prefix("lq:") {
            return Self::lq(n, qval(r)?);
        }
        if let Some(r) = spec.strip_prefix("perturb:") {
            let mut base = "ball".to_string();
            let mut p = -1.0;
            let mut harm = "re_z1sq".to_string();
            let mut eps = 0.0;
            for kv in r.split(',') {
                let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("`{kv}` is not key=value")))?;
                match k.trim() {
                    "base" => base = v.trim().to_string(),
                    "p" => p = parse_f64(v, "p")?,
                    "harm" => harm = v.trim().to_string(),
                    "eps" => eps = parse_f64(v, "eps")?,
                    other => return Err(Error::Parse(format!("unknown perturb key `{other}`"))),
                }
            }
            let l = Self::parse(&base, n)?;
            let y = named_harmonic(&harm, n)?;
            let rule = check_rule(n)?;
            let mut k = perturb_radial_power(&l, p, y, &harm, eps, &rule)?;
            k.label = spec.to_string();
            return Ok(k);
        }
        if let Some(path) = spec.strip_prefix("radial-grid:") {
            let (rule, samples) = load_grid(path, n)?;
            if let Some(i) = samples.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::InvalidBody(format!("{path}: non-positive radial sample at node {i}")));
            }
            let kmax = grid_kmax(&rule);
            let spec_r = analyze_real(&rule, &samples, kmax)?;
            let flags = BodyFlags { origin_symmetric: false, s1_invariant: rule.symmetry == Symmetry::TorusReduced, torus_invariant: rule.symmetry == Symmetry::TorusReduced };
            let mut b = Self::from_spectrum_power(spec, spec_r, 1.0, flags);
            b.flags.origin_symmetric = b.detect_symmetric(&rule);
            b.flags.s1_invariant |= b.detect_s1(&rule);
            return Ok(b);
        }
        if let Some(path) = spec.strip_prefix("support-grid:") {
            let (rule, samples) = load_grid(path, n)?;
            if let Some(i) = samples.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::InvalidBody(format!("{path}: non-positive support sample at node {i}")));
            }
            let kmax = grid_kmax(&rule);
            let hs = Arc::new(analyze_real(&rule, &samples, kmax)?);
            let h: RealFn = {
                let hs = hs.clone();
                Arc::new(move |u| hs.eval(u).re)
            };
            let vrule = Arc::new(SphereRule::product(n, 8, &vec![16; n]).or_else(|_| SphereRule::product(n, 6, &vec![8; n]))?);
            let hh = h.clone();
            let rho: RealFn = Arc::new(move |u| radial_from_support(&hh, &vrule, u));
            let mut b = Self::from_fn(n, spec, rho, BodyFlags::default()).with_support(h);
            b.flags.origin_symmetric = b.detect_symmetric(&rule);
            b.flags.s1_invariant = b.detect_s1(&rule);
            return Ok(b);
        }
        Err(Error::Parse(format!("unknown body `{spec}`")))
    }

    pub fn radial(&self, u: &[Complex64]) -> f64 {
        match &self.radial {
            Radial::Fn(f) => f(u),
            Radial::Spectral { spec, power } => spec.eval(u).re.powf(1.0 / power),
        }
    }

    /// rho^s without an intermediate root when the body is spectral.
    pub fn radial_pow(&self, u: &[Complex64], s: f64) -> f64 {
        match &self.radial {
            Radial::Spectral { spec, power } if (*power - s).abs() < 1e-15 => spec.eval(u).re,
            _ => self.radial(u).powf(s),
        }
    }

    pub fn radial_fn(&self) -> RealFn {
        let b = self.clone();
        Arc::new(move |u| b.radial(u))
    }

    pub fn radial_on(&self, rule: &SphereRule) -> Vec<f64> {
        rule.sample(|u| self.radial(u))
    }

    pub fn radial_pow_on(&self, rule: &SphereRule, s: f64) -> Vec<f64> {
        if let Radial::Spectral { spec, power } = &self.radial {
            if crate::harmonics::Basis::for_rule(rule).is_ok_and(|b| b == spec.basis) {
                if let Ok(v) = spec.samples_re(rule) {
                    if (*power - s).abs() < 1e-15 {
                        return v;
                    }
                    return v.iter().map(|x| x.powf(s / power)).collect();
                }
            }
        }
        rule.sample(|u| self.radial_pow(u, s))
    }

    /// Spectrum of rho^power if the body is stored that way.
    pub fn power_spectrum(&self) -> Option<(&BiDegreeSpectrum, f64)> {
        match &self.radial {
            Radial::Spectral { spec, power } => Some((spec, *power)),
            _ => None,
        }
    }

    /// lambda K.
    pub fn dilate(&self, lambda: f64) -> Self {
        let inner = self.clone();
        let mut b = Self::from_fn(self.n, &format!("{}*{lambda}", self.label), Arc::new(move |u| lambda * inner.radial(u)), self.flags);
        if let Some(h) = &self.support {
            let h = h.clone();
            b.support = Some(Arc::new(move |u| lambda * h(u)));
        }
        b
    }

    fn detect_symmetric(&self, rule: &SphereRule) -> bool {
        (0..rule.len()).step_by(7).all(|i| {
            let u = rule.point(i);
            let m: Vec<Complex64> = u.iter().map(|z| -z).collect();
            (self.radial(u) - self.radial(&m)).abs() < 1e-9 * self.radial(u)
        })
    }

    fn detect_s1(&self, rule: &SphereRule) -> bool {
        s1_defect(self, rule, 8) < 1e-9
    }

    pub fn with_provenance(mut self, v: serde_json::Value) -> Self {
        self.provenance = v;
        self
    }
}

/// max over sampled c and nodes of |rho(cu) - rho(u)|.
pub fn s1_defect(k: &StarBody, rule: &SphereRule, nc: usize) -> f64 {
    let idx: Vec<usize> = (0..rule.len()).step_by((rule.len() / 500).max(1)).collect();
    idx.par_iter()
        .map(|&i| {
            let u = rule.point(i);
            let r0 = k.radial(u);
            (1..nc)
                .map(|j| {
                    let c = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / nc as f64 + 0.1234);
                    let cu: Vec<Complex64> = u.iter().map(|z| z * c).collect();
                    (k.radial(&cu) - r0).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn grid_kmax(rule: &SphereRule) -> u32 {
    let by_t = 2 * rule.tnodes as u32 - 1;
    match rule.symmetry {
        Symmetry::Full => by_t.min((rule.phases.iter().min().copied().unwrap_or(2) as u32 - 1) / 2),
        Symmetry::TorusReduced => 2 * by_t.min(64),
    }
}

/// Loads {n, rule-id, samples} grid files.
pub fn load_grid(path: &str, n: usize) -> Result<(SphereRule, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let j: serde_json::Value = serde_json::from_str(&text)?;
    let rid = j["rule-id"].as_str().ok_or_else(|| Error::Parse(format!("{path}: missing rule-id")))?;
    let rule = SphereRule::from_id(rid)?;
    if let Some(nn) = j["n"].as_u64() {
        if nn as usize != n || rule.n != n {
            return Err(Error::Parse(format!("{path}: dimension mismatch")));
        }
    }
    let samples: Vec<f64> = serde_json::from_value(j["samples"].clone()).map_err(|_| Error::Parse(format!("{path}: samples")))?;
    if samples.len() != rule.len() {
        return Err(Error::Parse(format!("{path}: {} samples for {} nodes", samples.len(), rule.len())));
    }
    Ok((rule, samples))
}

/// Grid document for node samples.
pub fn grid_json(rule: &SphereRule, samples: &[f64]) -> serde_json::Value {
    json!({"n": rule.n, "rule-id": rule.id, "samples": samples})
}

/// Smallish rule for validity checks.
pub fn check_rule(n: usize) -> Result<SphereRule> {
    match n {
        2 => SphereRule::product(2, 16, &[32, 32]),
        3 => SphereRule::product(3, 6, &[8, 8, 8]),
        _ => Err(Error::Unsupported(format!("n = {n}"))),
    }
}

/// rho_K^{2n+p} = rho_L^{2n+p} + eps Y, checked for positivity on `rule`.
pub fn perturb_radial_power(l: &StarBody, p: f64, y: RealFn, yname: &str, eps: f64, rule: &SphereRule) -> Result<StarBody> {
    let n = l.n;
    let e = 2.0 * n as f64 + p;
    if !(e > 0.0) {
        return Err(Error::Domain(format!("2n + p = {e} must be positive")));
    }
    // positivity on the sample rule, plus the bound on admissible eps
    let vals: Vec<(f64, f64)> = rule.sample(|u| (l.radial(u).powf(e), y(u)));
    let mut bound = f64::INFINITY;
    for &(b, yv) in &vals {
        if yv * eps.signum() < 0.0 {
            bound = bound.min(b / yv.abs());
        }
    }
    if eps.abs() >= bound || vals.iter().any(|&(b, yv)| !(b + eps * yv > 0.0)) {
        return Err(Error::Positivity { bound });
    }
    let ysup = vals.iter().map(|v| v.1.abs()).fold(0.0, f64::max);
    let bmin = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    // |d rho / d eps| <= sup|Y| / (e * (min base - |eps| sup|Y|)^{(e-1)/e})
    let lip = ysup / (e * (bmin - eps.abs() * ysup).powf((e - 1.0) / e));
    let ll = l.clone();
    let yy = y.clone();
    let rho: RealFn = Arc::new(move |u| (ll.radial(u).powf(e) + eps * yy(u)).powf(1.0 / e));
    let mut flags = l.flags;
    let yeven = (0..rule.len()).step_by(11).all(|i| {
        let u = rule.point(i);
        let m: Vec<Complex64> = u.iter().map(|z| -z).collect();
        (y(u) - y(&m)).abs() < 1e-12
    });
    flags.origin_symmetric &= yeven || eps == 0.0;
    let mut k = StarBody::from_fn(n, &format!("perturb({},{yname},{eps})", l.label), rho, flags);
    if eps == 0.0 {
        k.support = l.support.clone();
    }
    let probe = StarBody::from_fn(n, "", y.clone(), BodyFlags::default());
    let ys1 = s1_defect(&probe, rule, 6) < 1e-12;
    k.flags.s1_invariant = l.flags.s1_invariant && (ys1 || eps == 0.0);
    k.flags.torus_invariant = l.flags.torus_invariant && eps == 0.0;
    Ok(k.with_provenance(json!({"base": l.label, "p": p, "harmonic": yname, "eps": eps, "lipschitz": lip})))
}

// ---------------------------------------------------------------- support / radial conversion

fn real_dot(u: &[Complex64], v: &[Complex64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

fn normalize(v: &mut [Complex64]) {
    let r = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= r);
}

/// rho_K(u) = min_v h(v) / <u,v> over the grid, refined by a local pattern search.
pub fn radial_from_support(h: &RealFn, vgrid: &SphereRule, u: &[Complex64]) -> f64 {
    let n = u.len();
    let g = |v: &[Complex64]| {
        let d = real_dot(u, v);
        if d <= 1e-12 {
            f64::INFINITY
        } else {
            h(v) / d
        }
    };
    // start from u itself and the best grid node
    let mut best: Vec<Complex64> = u.to_vec();
    let mut fbest = g(&best);
    for v in vgrid.points() {
        let f = g(v);
        if f < fbest {
            fbest = f;
            best = v.to_vec();
        }
    }
    let mut step = 0.2;
    while step > 1e-9 {
        let mut improved = false;
        for d in 0..2 * n {
            for s in [1.0, -1.0] {
                let mut v = best.clone();
                let j = d / 2;
                if d % 2 == 0 {
                    v[j].re += s * step;
                } else {
                    v[j].im += s * step;
                }
                normalize(&mut v);
                let f = g(&v);
                if f < fbest {
                    fbest = f;
                    best = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    fbest
}

/// Polar body K° with rho = 1/h_K.
pub fn polar_pair(k: &StarBody) -> Result<StarBody> {
    let h = k.support.clone().ok_or_else(|| Error::NotEvaluable(format!("{} has no support function", k.label)))?;
    let hh = h.clone();
    let rho: RealFn = Arc::new(move |u| {
        let v = hh(u);
        if v > 0.0 {
            1.0 / v
        } else {
            f64::NAN
        }
    });
    let kk = k.clone();
    let mut p = StarBody::from_fn(k.n, &format!("polar({})", k.label), rho, k.flags);
    p.support = Some(Arc::new(move |u| 1.0 / kk.radial(u)));
    Ok(p)
}

// ---------------------------------------------------------------- surface measures

#[derive(Clone)]
pub enum Density {
    Fn(RealFn),
    Grid { rule: Arc<SphereRule>, samples: Vec<f64> },
    Spectral(Arc<BiDegreeSpectrum>),
}

/// Surface-area measure data on S^{2n-1}.
#[derive(Clone)]
pub struct SurfaceMeasureData {
    pub n: usize,
    pub density: Option<Density>,
    pub atoms: Vec<(Vec<Complex64>, f64)>,
    pub even: bool,
    pub label: String,
}

impl std::fmt::Debug for SurfaceMeasureData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurfaceMeasureData").field("n", &self.n).field("label", &self.label).field("atoms", &self.atoms.len()).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureChecks {
    pub even_defect: f64,
    pub centroid_norm: f64,
    pub min_second_moment_eig: f64,
    pub min_density: f64,
}

impl SurfaceMeasureData {
    pub fn uniform(n: usize) -> Self {
        SurfaceMeasureData { n, density: Some(Density::Fn(Arc::new(|_| 1.0))), atoms: vec![], even: true, label: "uniform".into() }
    }

    pub fn from_fn(n: usize, label: &str, f: RealFn) -> Self {
        SurfaceMeasureData { n, density: Some(Density::Fn(f)), atoms: vec![], even: true, label: label.into() }
    }

    /// Density at an arbitrary point (None for grid-only densities off the grid).
    pub fn density_at(&self, u: &[Complex64]) -> Option<f64> {
        match &self.density {
            None => Some(0.0),
            Some(Density::Fn(f)) => Some(f(u)),
            Some(Density::Spectral(s)) => Some(s.eval(u).re),
            Some(Density::Grid { .. }) => None,
        }
    }

    /// Density samples on a rule.
    pub fn density_on(&self, rule: &SphereRule) -> Result<Vec<f64>> {
        match &self.density {
            None => Ok(vec![0.0; rule.len()]),
            Some(Density::Fn(f)) => Ok(rule.sample(|u| f(u))),
            Some(Density::Spectral(s)) => s.samples_re(rule),
            Some(Density::Grid { rule: r, samples }) => {
                if r.id == rule.id {
                    Ok(samples.clone())
                } else {
                    Err(Error::NotEvaluable(format!("density given on {} requested on {}", r.id, rule.id)))
                }
            }
        }
    }

    /// Integral of g against S_K.
    pub fn integrate(&self, rule: &SphereRule, g: &[f64]) -> Result<f64> {
        let d = self.density_on(rule)?;
        let w = rule.weights();
        let dens = det_sum_by(d.len(), |i| w[i] * d[i] * g[i]);
        Ok(dens)
    }

    pub fn checks(&self, rule: &SphereRule) -> Result<MeasureChecks> {
        let d = self.density_on(rule)?;
        if rule.symmetry == Symmetry::TorusReduced {
            // torus-invariant measures are even and centered; the second moment is
            // diagonal with entries int |u_j|^2 / 2
            let w = rule.weights();
            let mass = det_sum_by(d.len(), |i| w[i] * d[i]).abs().max(1e-300);
            let eig = (0..self.n)
                .map(|j| det_sum_by(d.len(), |i| w[i] * d[i] * rule.point(i)[j].norm_sqr()) / 2.0)
                .fold(f64::INFINITY, f64::min);
            return Ok(MeasureChecks {
                even_defect: 0.0,
                centroid_norm: 0.0,
                min_second_moment_eig: eig / mass,
                min_density: d.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
        let w = rule.weights();
        let n2 = 2 * self.n;
        let coords = |u: &[Complex64]| -> Vec<f64> { u.iter().flat_map(|z| [z.re, z.im]).collect() };
        let mut centroid = vec![0.0; n2];
        let mut second = vec![0.0; n2 * n2];
        let mut terms: Vec<(Vec<f64>, f64)> = (0..rule.len()).map(|i| (coords(rule.point(i)), w[i] * d[i])).collect();
        for (u, a) in &self.atoms {
            terms.push((coords(u), *a));
        }
        for a in 0..n2 {
            centroid[a] = neumaier(terms.iter().map(|(x, m)| x[a] * m));
            for b in 0..n2 {
                second[a * n2 + b] = neumaier(terms.iter().map(|(x, m)| x[a] * x[b] * m));
            }
        }
        let mass = neumaier(terms.iter().map(|t| t.1)).abs().max(1e-300);
        let mat = nalgebra::DMatrix::from_row_slice(n2, n2, &second);
        let eig = nalgebra::SymmetricEigen::new(mat).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let mut even_defect: f64 = 0.0;
        if let Some(dd) = &self.density {
            let dmax = d.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
            for i in (0..rule.len()).step_by(5) {
                let u = rule.point(i);
                let m: Vec<Complex64> = u.iter().map(|z| -z).collect();
                let other = match dd {
                    Density::Fn(f) => f(&m),
                    Density::Spectral(s) => s.eval(&m).re,
                    Density::Grid { .. } => continue,
                };
                even_defect = even_defect.max((other - d[i]).abs() / dmax);
            }
        }
        Ok(MeasureChecks {
            even_defect,
            centroid_norm: centroid.iter().map(|x| x * x).sum::<f64>().sqrt() / mass,
            min_second_moment_eig: eig / mass,
            min_density: d.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }
}

/// Householder basis of the real tangent space u^perp in R^{2n}.
pub fn tangent_basis(u: &[Complex64]) -> Vec<Vec<f64>> {
    let x: Vec<f64> = u.iter().flat_map(|z| [z.re, z.im]).collect();
    let d = x.len();
    let k = (0..d).max_by(|&a, &b| x[a].abs().partial_cmp(&x[b].abs()).unwrap()).unwrap();
    let s = if x[k] >= 0.0 { 1.0 } else { -1.0 };
    // w = x + s e_k ; H = I - 2 w w^T / |w|^2 maps e_k to -s x
    let mut w = x.clone();
    w[k] += s;
    let ww: f64 = w.iter().map(|a| a * a).sum();
    (0..d)
        .filter(|&j| j != k)
        .map(|j| (0..d).map(|i| f64::from(u8::from(i == j)) - 2.0 * w[i] * w[j] / ww).collect())
        .collect()
}

fn from_real(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Determinant of a small dense matrix (LU with partial pivoting).
pub fn det(m: &[f64], d: usize) -> f64 {
    nalgebra::DMatrix::from_row_slice(d, d, m).determinant()
}

/// Density det(Hess_S h + h Id) at u from the 1-homogeneous extension of h, by
/// fourth-order central differences along tangent directions.
pub fn curvature_density_at(h: &(dyn Fn(&[Complex64]) -> f64 + Sync), u: &[Complex64], step: f64) -> f64 {
    let x: Vec<f64> = u.iter().flat_map(|z| [z.re, z.im]).collect();
    let hh = |y: &[f64]| -> f64 {
        let r = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        let v: Vec<f64> = y.iter().map(|a| a / r).collect();
        r * h(&from_real(&v))
    };
    let e = tangent_basis(u);
    let d = e.len();
    let f0 = hh(&x);
    let second = |dir: &[f64]| -> f64 {
        let at = |s: f64| -> f64 {
            let y: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + s * b).collect();
            hh(&y)
        };
        (-at(2.0 * step) + 16.0 * at(step) - 30.0 * f0 + 16.0 * at(-step) - at(-2.0 * step)) / (12.0 * step * step)
    };
    let mut q = vec![0.0; d * d];
    let diag: Vec<f64> = (0..d).map(|a| second(&e[a])).collect();
    for a in 0..d {
        q[a * d + a] = diag[a];
        for b in (a + 1)..d {
            let plus: Vec<f64> = e[a].iter().zip(&e[b]).map(|(p, r)| p + r).collect();
            let minus: Vec<f64> = e[a].iter().zip(&e[b]).map(|(p, r)| p - r).collect();
            let v = (second(&plus) - second(&minus)) / 4.0;
            q[a * d + b] = v;
            q[b * d + a] = v;
        }
    }
    det(&q, d)
}

/// Surface density of the convex body with support function h, sampled on a rule.
pub fn surface_density_from_support(h: RealFn, n: usize, rule: &SphereRule) -> Result<SurfaceMeasureData> {
    surface_density_from_support_step(h, n, rule, 2e-3)
}

/// Same with an explicit difference step.
pub fn surface_density_from_support_step(h: RealFn, n: usize, rule: &SphereRule, step: f64) -> Result<SurfaceMeasureData> {
    if rule.n != n {
        return Err(Error::Domain("rule dimension mismatch".into()));
    }
    let samples: Vec<f64> = rule.sample(|u| curvature_density_at(&*h, u, step));
    let scale = samples.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if let Some(i) = samples.iter().position(|&s| !(s > -1e-9 * scale)) {
        return Err(Error::Curvature { node: i, value: samples[i] });
    }
    Ok(SurfaceMeasureData {
        n,
        density: Some(Density::Grid { rule: Arc::new(rule.clone()), samples }),
        atoms: vec![],
        even: true,
        label: "curvature-density".into(),
    })
}

// ---------------------------------------------------------------- geometry checks

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub worst: f64,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub positivity: Check,
    pub convexity: Check,
    pub s1_invariance: Option<Check>,
}

impl GeometryReport {
    pub fn all_pass(&self) -> bool {
        self.positivity.pass && self.convexity.pass && self.s1_invariance.as_ref().is_none_or(|c| c.pass)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let c = |c: &Check| json!({"name": c.name, "pass": c.pass, "worst": c.worst, "witness": c.witness});
        json!({
            "positivity": c(&self.positivity),
            "convexity": c(&self.convexity),
            "s1_invariance": self.s1_invariance.as_ref().map(c),
        })
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    loop {
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                Complex64::new(a, b)
            })
            .collect();
        let r = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            v.iter_mut().for_each(|z| *z /= r);
            return v;
        }
    }
}

/// Star-positivity, sampled midpoint convexity and S^1-invariance.
pub fn geometry_checks(k: &StarBody, pairs: usize, seed: u64) -> Result<GeometryReport> {
    let rule = check_rule(k.n)?;
    let rho = k.radial_on(&rule);
    let (imin, rmin) = rho.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &r)| if r < acc.1 { (i, r) } else { acc });
    let positivity = Check {
        name: "star-positivity".into(),
        pass: rmin > 0.0 && rho.iter().all(|r| r.is_finite()),
        worst: rmin,
        witness: Some(format!("node {imin}")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let u = random_unit(&mut rng, k.n);
        let v = if i % 2 == 0 {
            random_unit(&mut rng, k.n)
        } else {
            let scale = 10f64.powf(rng.gen_range(-3.0..-0.5));
            let mut d = random_unit(&mut rng, k.n);
            for (dj, uj) in d.iter_mut().zip(&u) {
                *dj = uj + *dj * scale;
            }
            normalize(&mut d);
            d
        };
        work.push((u, v));
    }
    let results: Vec<(f64, usize)> = work
        .par_iter()
        .enumerate()
        .map(|(i, (u, v))| {
            let (ru, rv) = (k.radial(u), k.radial(v));
            let m: Vec<Complex64> = u.iter().zip(v).map(|(a, b)| (a * ru + b * rv) * 0.5).collect();
            let r = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if r < 1e-9 * ru.max(rv) {
                return (0.0, i);
            }
            let mh: Vec<Complex64> = m.iter().map(|z| z / r).collect();
            (r / k.radial(&mh) - 1.0, i)
        })
        .collect();
    let (worst, wi) = results.iter().fold((f64::NEG_INFINITY, 0), |acc, &(v, i)| if v > acc.0 { (v, i) } else { acc });
    let convexity = Check {
        name: "sampled-convex".into(),
        pass: worst <= 1e-10,
        worst,
        witness: if worst > 1e-10 { Some(format!("pair {wi}: {:?} / {:?}", work[wi].0, work[wi].1)) } else { None },
    };
    let s1 = if k.flags.s1_invariant {
        let d = s1_defect(k, &rule, 8);
        Some(Check { name: "s1-invariance".into(), pass: d < 1e-9, worst: d, witness: None })
    } else {
        None
    };
    Ok(GeometryReport { positivity, convexity, s1_invariance: s1 })
}

/// Bisection for the largest eps in (0, eps_hi] such that the perturbation is
/// sampled-convex; returns (eps, report at eps).
pub fn largest_convex_eps(
    l: &StarBody,
    p: f64,
    y: RealFn,
    eps_hi: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let rule = check_rule(l.n)?;
    let ok = |e: f64| -> bool {
        match perturb_radial_power(l, p, y.clone(), "Y", e, &rule) {
            Ok(k) => geometry_checks(&k, pairs, seed).map(|r| r.all_pass()).unwrap_or(false),
            Err(_) => false,
        }
    };
    if ok(eps_hi) {
        return Ok(eps_hi);
    }
    let (mut lo, mut hi) = (0.0, eps_hi);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_examples() {
        let d = PlanarBody::parse("disc").unwrap();
        assert_eq!(d.support(1.3), 1.0);
        let sq = PlanarBody::parse("ngon:4").unwrap();
        assert!((sq.support(PI / 4.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(PlanarBody::parse("ngon:3"), Err(Error::InvalidBody(_))));
        assert_eq!(sq.symmetry_order(), Some(4));
        assert_eq!(PlanarBody::parse("ngon:6").unwrap().symmetry_order(), Some(6));
        assert_eq!(d.symmetry_order(), None);
        assert!(PlanarBody::parse("polygon:1,0;0,1;-1,0;0,-1").is_ok());
        assert!(PlanarBody::parse("polygon:1,0;0,1;-1,0;0,-2").is_err());
    }

    #[test]
    fn planar_coefficients() {
        let d = PlanarBody::disc();
        let c = d.fourier_coeffs(-1.0, 6);
        assert_eq!(c[6], Complex64::new(1.0, 0.0));
        assert!(c.iter().enumerate().all(|(i, z)| i == 6 || z.norm() == 0.0));
        let sq = PlanarBody::ngon(4).unwrap();
        let c = sq.fourier_coeffs(1.0, 8);
        assert_eq!(c[8 + 2], Complex64::new(0.0, 0.0));
        assert!((c[8].re - 2.0 * 2f64.sqrt() / PI).abs() < 1e-13);
        // c_4 for h = max |cos|,|sin| (real, symmetric)
        assert!(c[8 + 4].norm() > 1e-3);
        assert!((c[8 + 4] - c[8 - 4].conj()).norm() < 1e-14);
    }

    #[test]
    fn rotated_polygon_coefficients() {
        let a = 0.3;
        let sq = PlanarBody::ngon(4).unwrap();
        let r = sq.rotate(a);
        let c0 = sq.fourier_coeffs(-0.5, 8);
        let c1 = r.fourier_coeffs(-0.5, 8);
        for m in -8i32..=8 {
            let expect = c0[(m + 8) as usize] * Complex64::from_polar(1.0, m as f64 * a);
            assert!((c1[(m + 8) as usize] - expect).norm() < 1e-13, "m={m}");
        }
        let cj = r.conj().fourier_coeffs(-0.5, 8);
        for m in -8i32..=8 {
            assert!((cj[(m + 8) as usize] - c1[(8 - m) as usize]).norm() < 1e-13);
        }
    }

    #[test]
    fn surface_measures() {
        let sq = PlanarBody::ngon(4).unwrap();
        let s = sq.surface_measure(64);
        assert_eq!(s.atoms.len(), 4);
        for (k, &(a, w)) in s.atoms.iter().enumerate() {
            assert!((a - (PI / 4.0 + k as f64 * PI / 2.0)).abs() < 1e-14);
            assert!((w - 2f64.sqrt()).abs() < 1e-14);
        }
        assert!((s.total_mass() - sq.perimeter()).abs() < 1e-12);
        let si = sq.times_i().surface_measure(64);
        let mut a: Vec<f64> = si.atoms.iter().map(|x| x.0).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((a[0] - PI / 4.0).abs() < 1e-12);
        let hex = PlanarBody::ngon(6).unwrap();
        assert!((hex.surface_measure(64).total_mass() - hex.perimeter()).abs() < 1e-12);
        let dm = PlanarBody::disc().surface_measure(64);
        assert!((dm.total_mass() - 2.0 * PI).abs() < 1e-13);
        assert!(dm.check_even(1e-12) && s.check_even(1e-12));
    }

    #[test]
    fn sampled_body() {
        let m = 64;
        let h: Vec<f64> = (0..m).map(|j| 1.0 + 0.05 * (4.0 * 2.0 * PI * j as f64 / m as f64).cos()).collect();
        let b = PlanarBody::sampled(&h, "s").unwrap();
        assert!((b.support(0.1) - (1.0 + 0.05 * 0.4f64.cos())).abs() < 1e-13);
        assert_eq!(b.symmetry_order(), Some(4));
        let bad: Vec<f64> = (0..m).map(|j| 1.0 + 0.2 * (4.0 * 2.0 * PI * j as f64 / m as f64).cos()).collect();
        assert!(PlanarBody::sampled(&bad, "s").is_err());
        let odd: Vec<f64> = (0..m).map(|j| 1.0 + 0.05 * (2.0 * PI * j as f64 / m as f64).cos()).collect();
        assert!(PlanarBody::sampled(&odd, "s").is_err());
    }

    #[test]
    fn star_examples() {
        let b = StarBody::parse("ball", 2).unwrap();
        assert!(b.flags.s1_invariant);
        let l4 = StarBody::parse("lq:4", 2).unwrap();
        let one = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!((l4.radial(&one) - 1.0).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        let d = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        assert!((l4.radial(&d) - 2f64.powf(0.25)).abs() < 1e-14);
        assert!(StarBody::parse("lq:q=4", 3).is_ok());
        assert!(StarBody::parse("nonsense", 2).is_err());
    }

    #[test]
    fn perturbation_examples() {
        let ball = StarBody::ball(2);
        let rule = check_rule(2).unwrap();
        let y = named_harmonic("re_z1sq", 2).unwrap();
        let k0 = perturb_radial_power(&ball, -1.0, y.clone(), "re_z1sq", 0.0, &rule).unwrap();
        let u = [Complex64::new(0.6, 0.2), Complex64::new(0.3, (1.0f64 - 0.49).sqrt())];
        assert!((k0.radial(&u) - 1.0).abs() < 1e-15);
        let k = perturb_radial_power(&ball, -1.0, y.clone(), "re_z1sq", 0.1, &rule).unwrap();
        let e1 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!((k.radial(&e1) - 1.1f64.powf(1.0 / 3.0)).abs() < 1e-14);
        assert!((k.radial(&e1) - 1.03228).abs() < 1e-5);
        assert!(matches!(perturb_radial_power(&ball, -1.0, y.clone(), "re_z1sq", 2.0, &rule), Err(Error::Positivity { .. })));
        let parsed = StarBody::parse("perturb:base=ball,p=-1,harm=re_z1sq,eps=0.1", 2).unwrap();
        assert!((parsed.radial(&e1) - k.radial(&e1)).abs() < 1e-15);
        assert!(!parsed.flags.s1_invariant);
        let lip = k.provenance["lipschitz"].as_f64().unwrap();
        let k2 = perturb_radial_power(&ball, -1.0, y, "re_z1sq", 0.1001, &rule).unwrap();
        assert!((k2.radial(&e1) - k.radial(&e1)).abs() <= lip * 1e-4 * 1.0001);
    }

    #[test]
    fn polar_and_radial_from_support() {
        let l4 = StarBody::lq(2, 4.0).unwrap();
        let s = 0.5f64.sqrt();
        let d = [Complex64::new(s, 0.0), Complex64::new(0.0, s)];
        // K = B_4: h_K = l_{4/3} norm; K° = B_{4/3}: rho = 1/h_K
        let p = polar_pair(&l4).unwrap();
        assert!((p.radial(&d) - 1.0 / lq_norm(&d, 4.0 / 3.0)).abs() < 1e-14);
        // rho_K from h_K by minimization agrees with the closed form
        let vg = SphereRule::product(2, 8, &[16, 16]).unwrap();
        let h = l4.support.clone().unwrap();
        for u in [d.to_vec(), vec![Complex64::new(0.8, 0.1), Complex64::new(-0.2, (1.0f64 - 0.69).sqrt())]] {
            let r = radial_from_support(&h, &vg, &u);
            assert!((r - l4.radial(&u)).abs() < 1e-6, "{r} vs {}", l4.radial(&u));
        }
        // the polar of lq-polar:4 is B_4 again
        let lp = StarBody::lq_polar(2, 4.0).unwrap();
        let pp = polar_pair(&lp).unwrap();
        let dd = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        assert!((1.0 / lp.support.as_ref().unwrap()(&dd) - 2f64.powf(0.25)).abs() < 1e-14);
        assert!((pp.radial(&dd) - l4.radial(&dd)).abs() < 1e-14);
    }

    #[test]
    fn curvature_density() {
        let rule = SphereRule::product(2, 6, &[8, 8]).unwrap();
        let r = 1.7;
        let s = surface_density_from_support(Arc::new(move |_| r), 2, &rule).unwrap();
        let d = s.density_on(&rule).unwrap();
        assert!(d.iter().all(|x| (x - r * r * r).abs() < 1e-8));
        // linearization: h = 1 + eps Re(u1^2) gives 1 - 5 eps Re(u1^2)
        let eps = 1e-3;
        let s = surface_density_from_support(Arc::new(move |u| 1.0 + eps * (u[0] * u[0]).re), 2, &rule).unwrap();
        let d = s.density_on(&rule).unwrap();
        for (i, u) in rule.points().enumerate() {
            let y = (u[0] * u[0]).re;
            let err = (d[i] - (1.0 - 5.0 * eps * y)).abs();
            assert!(err < 10.0 * eps * eps, "node {i}: {err}");
        }
    }

    #[test]
    fn curvature_volume_identity() {
        // V = (1/4) int h s versus the radial volume of the same body
        let eps = 0.05;
        let h: RealFn = Arc::new(move |u| 1.0 + eps * (u[0] * u[0]).re);
        let rule = SphereRule::product(2, 12, &[24, 24]).unwrap();
        let s = surface_density_from_support(h.clone(), 2, &rule).unwrap();
        let hv = rule.sample(|u| h(u));
        let v1 = s.integrate(&rule, &hv).unwrap() / 4.0;
        let vg = SphereRule::product(2, 8, &[16, 16]).unwrap();
        let rho4: Vec<f64> = rule.sample(|u| radial_from_support(&h, &vg, u).powi(4));
        let v2 = rule.integrate(&rho4).unwrap() / 4.0;
        assert!((v1 - v2).abs() < 1e-3 * v2, "{v1} vs {v2}");
    }

    #[test]
    fn measure_checks() {
        let rule = SphereRule::product(2, 8, &[16, 16]).unwrap();
        let m = SurfaceMeasureData::uniform(2);
        let c = m.checks(&rule).unwrap();
        assert!(c.centroid_norm < 1e-12 && c.even_defect == 0.0);
        assert!((c.min_second_moment_eig - 0.25).abs() < 1e-12);
    }

    #[test]
    fn geometry_examples() {
        let ball = StarBody::ball(2);
        assert!(geometry_checks(&ball, 20_000, 1).unwrap().all_pass());
        let k = StarBody::parse("perturb:base=ball,p=-1,harm=re_z1sq,eps=0.1", 2).unwrap();
        assert!(geometry_checks(&k, 20_000, 1).unwrap().convexity.pass);
        let bump = StarBody::from_fn(2, "bump", Arc::new(|u| 1.0 + 0.9 * u[0].norm_sqr().powi(4)), BodyFlags::default());
        let r = geometry_checks(&bump, 20_000, 1).unwrap();
        assert!(!r.convexity.pass && r.convexity.witness.is_some());
    }
}
