//! Multiplier transforms (J_{C,p}, F_q, T_mu), the circle measure nu_{C,p}, the
//! body operators I_{C,p}, Pi_C, Gamma_C and the L_p-embedding test.

use crate::bodies::{BodyFlags, CircleMeasure, Density, PlanarBody, PlanarKind, StarBody, SurfaceMeasureData};
use crate::error::{Error, Result};
use crate::harmonics::{
    analyze, analyze_real, apply_multipliers, Basis, BiDegreeSpectrum, MultiplierTable, Provenance, TableKind,
};
use crate::specialfn::{gamma_fn, rgamma};
use crate::spheregrid::{circle_rule, csum, det_sum_c_by, gauss_jacobi_unit, DiscRule, SphereRule, Symmetry};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;
use std::collections::BTreeMap;
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn check_p(p: f64) -> Result<()> {
    if !(p > -2.0 && p <= 1.0) || p == 0.0 {
        return Err(Error::Domain(format!("p = {p} outside (-2,1] minus 0")));
    }
    Ok(())
}

// ---------------------------------------------------------------- closed forms

/// alpha_{k,l}^{(n,p)}.
pub fn alpha(n: usize, p: f64, k: u32, l: u32) -> Result<f64> {
    let (kf, lf, nf) = (k as f64, l as f64, n as f64);
    let a = (p + kf - lf) / 2.0 + 1.0;
    let b = (p - kf + lf) / 2.0 + 1.0;
    let ga = gamma_fn(a).map_err(|_| Error::MultiplierPole { k, l })?;
    let gb = gamma_fn(b).map_err(|_| Error::MultiplierPole { k, l })?;
    Ok(PI.powi(n as i32) * ga * gb * rgamma((p + kf + lf) / 2.0 + nf) * rgamma((p - kf - lf) / 2.0 + 1.0))
}

/// lambda_m[F_q] on S^{2n-1} for even m.
pub fn f_multiplier(n: usize, q: f64, m: u32) -> Result<f64> {
    if m % 2 != 0 {
        return Err(Error::Domain(format!("F_q multiplier at odd degree {m}")));
    }
    let nf = n as f64;
    let mf = m as f64;
    let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let g = gamma_fn((mf + q) / 2.0 + nf).map_err(|_| Error::MultiplierPole { k: m, l: 0 })?;
    Ok(sign * 2f64.powf(2.0 * nf + q) * PI.powi(n as i32) * g * rgamma((mf - q) / 2.0))
}

/// Coefficient c_k[nu_{C,p}] from c_k[h_C^p].
pub fn nu_coeff_factor(p: f64, k: i32) -> Result<f64> {
    f_multiplier(1, p, k.unsigned_abs())
}

fn entry_kmax(kmax: u32) -> impl Iterator<Item = (u32, u32)> {
    (0..=kmax).flat_map(|m| (0..=m).map(move |k| (k, m - k)))
}

/// Multipliers of J_{C,p}.
pub fn j_table(c: &PlanarBody, p: f64, n: usize, kmax: u32) -> Result<MultiplierTable> {
    check_p(p)?;
    let coeffs = c.fourier_coeffs(p, kmax);
    let mm = kmax as i32;
    let mut entries = BTreeMap::new();
    for (k, l) in entry_kmax(kmax) {
        let d = k as i32 - l as i32;
        let cm = coeffs[(d + mm) as usize];
        let lam = if cm == ZERO {
            ZERO
        } else {
            let a = alpha(n, p, k, l)?;
            if k == l {
                cm * (2.0 * a)
            } else {
                cm * a
            }
        };
        entries.insert((k, l), lam);
    }
    Ok(MultiplierTable {
        n,
        kmax,
        kind: TableKind::J { c: c.label.clone(), p },
        provenance: Provenance::ClosedForm,
        entries,
    })
}

/// Multipliers of F_q (even total degrees only).
pub fn f_table(q: f64, n: usize, kmax: u32) -> Result<MultiplierTable> {
    if q == q.round() && (q as i64) % 2 == 0 {
        return Err(Error::Domain(format!("F_q undefined for even integer q = {q}")));
    }
    let mut entries = BTreeMap::new();
    for (k, l) in entry_kmax(kmax).filter(|(k, l)| (k + l) % 2 == 0) {
        let lam = f_multiplier(n, q, k + l).map_err(|_| Error::MultiplierPole { k, l })?;
        entries.insert((k, l), Complex64::new(lam, 0.0));
    }
    Ok(MultiplierTable { n, kmax, kind: TableKind::F { q }, provenance: Provenance::ClosedForm, entries })
}

/// Multipliers of T_mu from a coefficient function m -> c_m[mu].
pub fn t_table_from<F: Fn(i32) -> Complex64>(label: &str, coeff: F, n: usize, kmax: u32) -> MultiplierTable {
    let mut entries = BTreeMap::new();
    for (k, l) in entry_kmax(kmax) {
        let lam = if k == l {
            coeff(0) * (2.0 * PI)
        } else {
            coeff(k as i32 - l as i32) * PI
        };
        entries.insert((k, l), lam);
    }
    MultiplierTable { n, kmax, kind: TableKind::T { mu: label.into() }, provenance: Provenance::ClosedForm, entries }
}

pub fn t_table(mu: &CircleMeasure, n: usize, kmax: u32) -> MultiplierTable {
    let mut t = t_table_from(&mu.label, |m| mu.coeff(m), n, kmax);
    if mu.density.is_some() {
        t.provenance = Provenance::Quadrature;
    }
    t
}

/// (2 pi)^{-2} F_{-2n-p} o T_{nu_{C,p}}, the factorized form of J_{C,p}.
pub fn factorized_j_table(c: &PlanarBody, p: f64, n: usize, kmax: u32) -> Result<MultiplierTable> {
    let nu = nu_measure(c, p, kmax)?;
    let t = t_table_from(&format!("nu({},{p})", c.label), |m| nu.coeff(m), n, kmax);
    let f = f_table(-2.0 * n as f64 - p, n, kmax)?;
    Ok(f.compose(&t)?.scaled(1.0 / (4.0 * PI * PI)))
}

// ---------------------------------------------------------------- nu_{C,p}

/// The circle measure nu_{C,p} = F_p h_C^p: exact coefficients and a realization.
#[derive(Debug, Clone)]
pub struct NuMeasure {
    pub c: PlanarBody,
    pub p: f64,
    pub mmax: u32,
    /// c_m[nu] for m = -mmax..=mmax.
    pub coeffs: Vec<Complex64>,
    pub measure: CircleMeasure,
    /// "atoms", "density" (closed form) or "fejer" (smoothed truncated series).
    pub realization: String,
    /// Largest coefficient deviation between closed-form realization and formula.
    pub consistency: Option<f64>,
    /// Minimum of -p times the realized density/atoms, relative to scale.
    pub signed_min: f64,
}

impl NuMeasure {
    pub fn coeff(&self, m: i32) -> Complex64 {
        let mm = self.mmax as i32;
        if m.abs() > mm {
            ZERO
        } else {
            self.coeffs[(m + mm) as usize]
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: Vec<_> = (-(self.mmax as i32)..=self.mmax as i32)
            .map(|m| json!({"m": m, "re": self.coeff(m).re, "im": self.coeff(m).im}))
            .collect();
        json!({
            "C": self.c.label,
            "p": self.p,
            "mmax": self.mmax,
            "realization": self.realization,
            "coeffs": coeffs,
            "atoms": self.measure.atoms.iter().map(|(a, w)| json!([a, w])).collect::<Vec<_>>(),
            "density": self.measure.density,
            "consistency": self.consistency,
            "signed_min": self.signed_min,
            "total_mass": self.measure.total_mass(),
        })
    }
}

const NU_DENSITY_NODES: usize = 512;

pub fn nu_measure(c: &PlanarBody, p: f64, mmax: u32) -> Result<NuMeasure> {
    check_p(p)?;
    let hc = c.fourier_coeffs(p, mmax);
    let mm = mmax as i32;
    let mut coeffs = Vec::with_capacity(hc.len());
    for m in -mm..=mm {
        let h = hc[(m + mm) as usize];
        coeffs.push(if h == ZERO { ZERO } else { h * nu_coeff_factor(p, m)? });
    }
    let label = format!("nu({},{p})", c.label);
    let ic = c.times_i();
    let polygon = matches!(c.kind, PlanarKind::Polygon(_));
    let (measure, realization) = if p == 1.0 {
        // nu_{C,1} = -2 pi S(iC, .)
        (ic.surface_measure(NU_DENSITY_NODES).scaled(-2.0 * PI), if polygon { "atoms" } else { "density" })
    } else if p == -1.0 {
        // d nu_{C,-1} = 2 pi rho_{iC°} dc, rho_{iC°} = 1 / h_{iC}
        let d: Vec<f64> = (0..NU_DENSITY_NODES)
            .map(|j| 2.0 * PI / ic.support(2.0 * PI * j as f64 / NU_DENSITY_NODES as f64))
            .collect();
        (CircleMeasure { density: Some(d), atoms: vec![], even: true, label: label.clone() }, "density")
    } else {
        // Fejer means of the truncated series keep the sign of the measure
        let m_nodes = (4 * mmax as usize).max(64);
        let d: Vec<f64> = (0..m_nodes)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m_nodes as f64;
                let s = csum((-mm..=mm).map(|m| {
                    let fej = 1.0 - m.abs() as f64 / (mm as f64 + 1.0);
                    let w = if m == 0 { 1.0 } else { 0.5 };
                    coeffs[(m + mm) as usize] * (w * fej) * Complex64::from_polar(1.0, -(m as f64) * t)
                }));
                s.re
            })
            .collect();
        (CircleMeasure { density: Some(d), atoms: vec![], even: true, label: label.clone() }, "fejer")
    };
    let mut measure = measure;
    measure.label = label;
    // consistency of closed-form realizations with the coefficient formula
    let consistency = if realization != "fejer" {
        let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let exact = |m: i32| -> Complex64 {
            if p == -1.0 {
                // piecewise Gauss-Legendre between kinks of 1/h_{iC}
                let (th, w) = ic.circle_nodes(64);
                let v = csum(th.iter().zip(&w).map(|(t, wi)| Complex64::from_polar(2.0 * PI * wi / ic.support(*t), m as f64 * t)));
                if m == 0 {
                    v / (2.0 * PI)
                } else {
                    v / PI
                }
            } else {
                measure.coeff(m)
            }
        };
        let dev = (-mm..=mm).map(|m| (exact(m) - coeffs[(m + mm) as usize]).norm()).fold(0.0, f64::max);
        Some(dev / scale)
    } else {
        None
    };
    // sign law: -p nu >= 0
    let scale = measure.total_variation().max(1e-300);
    let mut signed_min = f64::INFINITY;
    for &(_, w) in &measure.atoms {
        signed_min = signed_min.min(-p * w / scale);
    }
    if let Some(d) = &measure.density {
        let dm = d.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
        for x in d {
            signed_min = signed_min.min(-p * x / dm);
        }
    }
    if signed_min < -1e-9 {
        return Err(Error::Sign(format!("-p nu({}, {p}) has minimum {signed_min:.3e}", c.label)));
    }
    if let Some(dev) = consistency {
        if dev > 1e-8 {
            return Err(Error::Sign(format!("nu({}, {p}) closed form deviates from coefficients by {dev:.3e}", c.label)));
        }
    }
    Ok(NuMeasure { c: c.clone(), p, mmax, coeffs, measure, realization: realization.into(), consistency, signed_min })
}

// ---------------------------------------------------------------- T_mu

/// T_mu f(u) = int f(cu) dmu(c) at the given points, f callable.
pub fn apply_t<F>(f: F, mu: &CircleMeasure, points: &[Vec<Complex64>]) -> Vec<Complex64>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    points
        .par_iter()
        .map(|u| {
            mu.integrate(|t| {
                let c = Complex64::from_polar(1.0, t);
                let cu: Vec<Complex64> = u.iter().map(|z| z * c).collect();
                f(&cu)
            })
        })
        .collect()
}

/// T_mu on node samples of a uniform-phase product rule; every angle of mu must
/// be a multiple of the phase step so rotated nodes are nodes.
pub fn apply_t_grid(rule: &SphereRule, f: &[Complex64], mu: &CircleMeasure) -> Result<Vec<Complex64>> {
    if rule.symmetry != Symmetry::Full || rule.phases.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::NotEvaluable(format!("rule {} is not S^1-resolved", rule.id)));
    }
    if f.len() != rule.len() {
        return Err(Error::Domain("sample count mismatch".into()));
    }
    let np = rule.phases[0];
    let step = 2.0 * PI / np as f64;
    let shift_of = |a: f64| -> Result<usize> {
        let s = a / step;
        if (s - s.round()).abs() > 1e-9 {
            return Err(Error::NotEvaluable(format!("rotation by {a} is not a grid symmetry of {}", rule.id)));
        }
        Ok((s.round() as i64).rem_euclid(np as i64) as usize)
    };
    let mut terms: Vec<(usize, f64)> = Vec::new();
    for &(a, w) in &mu.atoms {
        terms.push((shift_of(a)?, w));
    }
    if let Some(d) = &mu.density {
        let h = 2.0 * PI / d.len() as f64;
        for (j, dj) in d.iter().enumerate() {
            terms.push((shift_of(j as f64 * h)?, dj * h));
        }
    }
    let nph = rule.nphase();
    let n = rule.n;
    let rotate_index = |i: usize, s: usize| -> usize {
        // multiply every coordinate phase index by the same shift
        let base = i - i % nph;
        let mut rem = i % nph;
        let mut idx = vec![0usize; n];
        for j in (0..n).rev() {
            idx[j] = rem % np;
            rem /= np;
        }
        let mut out = 0;
        for j in 0..n {
            out = out * np + (idx[j] + s) % np;
        }
        base + out
    };
    Ok((0..rule.len())
        .into_par_iter()
        .map(|i| csum(terms.iter().map(|&(s, w)| f[rotate_index(i, s)] * w)))
        .collect())
}

// ---------------------------------------------------------------- J quadrature

/// Parameters of the adapted J quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JQuadrature {
    /// Gauss-Jacobi nodes in t = |v.u|^2.
    pub nt: usize,
    /// Gauss-Legendre nodes per arc between kinks of h_C (or half the uniform count).
    pub per_arc: usize,
    /// Nodes for the orthogonal directions: phases for n = 2, simplex nodes for n = 3.
    pub nomega: usize,
}

impl Default for JQuadrature {
    fn default() -> Self {
        JQuadrature { nt: 24, per_arc: 24, nomega: 24 }
    }
}

/// Unitary frame with first column u (columns returned).
pub fn unitary_frame(u: &[Complex64]) -> Vec<Vec<Complex64>> {
    let n = u.len();
    let mut cols: Vec<Vec<Complex64>> = vec![u.to_vec()];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u[a].norm().partial_cmp(&u[b].norm()).unwrap());
    for &j in &order {
        if cols.len() == n {
            break;
        }
        let mut v = vec![ZERO; n];
        v[j] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for c in &cols {
                let d: Complex64 = v.iter().zip(c).map(|(a, b)| a * b.conj()).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= d * ci;
                }
            }
        }
        let r = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if r > 1e-8 {
            v.iter_mut().for_each(|z| *z /= r);
            cols.push(v);
        }
    }
    cols
}

struct JNodes {
    t: Vec<f64>,
    tw: Vec<f64>,
    theta: Vec<f64>,
    thw_hp: Vec<f64>,
    omega: Vec<Vec<Complex64>>,
    ow: Vec<f64>,
}

fn j_nodes(c: &PlanarBody, p: f64, n: usize, q: &JQuadrature) -> Result<JNodes> {
    let (t, tw) = gauss_jacobi_unit(q.nt, p / 2.0, n as f64 - 2.0)?;
    let (theta, thw) = c.circle_nodes(q.per_arc);
    let thw_hp: Vec<f64> = theta.iter().zip(&thw).map(|(th, w)| w * c.support(*th).powf(p)).collect();
    let (omega, ow) = match n {
        2 => {
            let cr = circle_rule(q.nomega.max(4) + q.nomega % 2)?;
            (cr.nodes.iter().map(|a| vec![Complex64::from_polar(1.0, *a)]).collect(), cr.weights)
        }
        3 => {
            let r = SphereRule::product(2, q.nomega.div_ceil(2).max(2), &[q.nomega.max(4), q.nomega.max(4)])?;
            (r.points().map(|v| v.to_vec()).collect(), r.weights().to_vec())
        }
        _ => return Err(Error::Unsupported(format!("n = {n}"))),
    };
    Ok(JNodes { t, tw, theta, thw_hp, omega, ow })
}

/// J_{C,p} f(u) = int h_C(v.u)^p f(v) dv at each point, by a frame adapted to u:
/// v = U (sqrt(t) e^{i theta}, sqrt(1-t) omega) with dv = 1/2 (1-t)^{n-2} dt dtheta domega.
pub fn apply_j_quadrature<F>(
    c: &PlanarBody,
    p: f64,
    n: usize,
    f: F,
    points: &[Vec<Complex64>],
    q: &JQuadrature,
) -> Result<Vec<Complex64>>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    check_p(p)?;
    let nodes = j_nodes(c, p, n, q)?;
    let (nt, nth, nom) = (nodes.t.len(), nodes.theta.len(), nodes.omega.len());
    let total = nt * nth * nom;
    let out: Vec<Complex64> = points
        .par_iter()
        .map(|u| {
            let fr = unitary_frame(u);
            let mut v = vec![ZERO; n];
            let terms: Vec<Complex64> = (0..total)
                .map(|idx| {
                    let i = idx / (nth * nom);
                    let j = (idx / nom) % nth;
                    let k = idx % nom;
                    let a = Complex64::from_polar(nodes.t[i].sqrt(), nodes.theta[j]);
                    let b = (1.0 - nodes.t[i]).max(0.0).sqrt();
                    for (r, vr) in v.iter_mut().enumerate() {
                        let mut s = fr[0][r] * a;
                        for (m, om) in nodes.omega[k].iter().enumerate() {
                            s += fr[m + 1][r] * (om * b);
                        }
                        *vr = s;
                    }
                    f(&v) * (0.5 * nodes.tw[i] * nodes.thw_hp[j] * nodes.ow[k])
                })
                .collect();
            crate::spheregrid::det_sum_c_by(terms.len(), |i| terms[i])
        })
        .collect();
    if let Some(i) = out.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { node: i, value: out[i].norm() });
    }
    Ok(out)
}

/// Plain sphere-rule route for grid-sampled f. Output points whose kernel
/// touches zero at a node (p < 0) are jittered; the count is returned.
pub fn apply_j_rule(
    c: &PlanarBody,
    p: f64,
    rule: &SphereRule,
    f: &[Complex64],
    points: &[Vec<Complex64>],
) -> Result<(Vec<Complex64>, usize)> {
    check_p(p)?;
    if rule.symmetry != Symmetry::Full {
        return Err(Error::NotEvaluable("plain J route needs a full rule".into()));
    }
    let w = rule.weights();
    let results: Vec<(Complex64, bool)> = points
        .par_iter()
        .map(|u0| {
            let mut u = u0.clone();
            let mut jittered = false;
            for attempt in 0..4 {
                let hit = p < 0.0
                    && rule.points().any(|v| crate::harmonics::hermitian(v, &u).norm() < 1e-12);
                if !hit {
                    break;
                }
                jittered = true;
                let a = 1e-7 * (attempt + 1) as f64;
                u[0] *= Complex64::from_polar(1.0, a);
            }
            let s = det_sum_c_by(rule.len(), |i| {
                let z = crate::harmonics::hermitian(rule.point(i), &u);
                f[i] * (w[i] * c.support_z(z).powf(p))
            });
            (s, jittered)
        })
        .collect();
    let count = results.iter().filter(|r| r.1).count();
    Ok((results.into_iter().map(|r| r.0).collect(), count))
}

/// lambda_{k,l}[J_{C,p}] by the zonal reduction on a disc rule.
pub fn j_multiplier_zonal(c: &PlanarBody, p: f64, n: usize, k: u32, l: u32, radial: usize, per_arc: usize) -> Result<Complex64> {
    check_p(p)?;
    let kinks = c.kinks();
    let rule = DiscRule::with_breaks(n as u32 - 2, Some(p), radial, &kinks, per_arc)?;
    Ok(rule.zonal(|z| {
        let hp = c.support_z(z).powf(p);
        crate::specialfn::disk_poly_unchecked(n, k, l, z) * hp
    }))
}

// ---------------------------------------------------------------- spectral plumbing

/// Options for the spectral routes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOptions {
    pub kmax: u32,
    pub rule_id: Option<String>,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { kmax: 16, rule_id: None }
    }
}

/// Analysis rule for a function with the given symmetry.
pub fn analysis_rule(n: usize, torus_invariant: bool, opts: &SpectralOptions) -> Result<SphereRule> {
    if let Some(id) = &opts.rule_id {
        let r = SphereRule::from_id(id)?;
        if r.n != n {
            return Err(Error::Domain(format!("rule {id} is not for n = {n}")));
        }
        if r.symmetry == Symmetry::TorusReduced && !torus_invariant {
            return Err(Error::NotEvaluable(format!("torus-reduced rule {id} for a non-invariant input")));
        }
        return Ok(r);
    }
    let k = opts.kmax as usize;
    match (n, torus_invariant) {
        // oversample so the top retained coefficients are not aliased
        (2, true) => SphereRule::torus_reduced(2, (k + 16).max(24)),
        (2, false) => {
            if k <= 24 {
                SphereRule::default_for(2)
            } else {
                SphereRule::product(2, k / 2 + 8, &[2 * k + 16, 2 * k + 16])
            }
        }
        (3, true) => SphereRule::torus_reduced(3, (k + 8).max(24)),
        (3, false) => Err(Error::Unsupported("spectral routes in C^3 need torus-invariant inputs".into())),
        _ => Err(Error::Unsupported(format!("n = {n}"))),
    }
}

/// Analysis of a real function given by samples on the analysis rule.
pub fn analyze_samples(rule: &SphereRule, f: &[f64], kmax: u32) -> Result<BiDegreeSpectrum> {
    analyze_real(rule, f, kmax)
}

/// Support function (or other real function) held as a spectrum.
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    pub label: String,
    pub spectrum: BiDegreeSpectrum,
    pub rule: SphereRule,
    /// Values on the analysis rule.
    pub values: Vec<f64>,
}

impl SpectralFunction {
    pub fn eval(&self, u: &[Complex64]) -> f64 {
        self.spectrum.eval(u).re
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(json!({
            "label": self.label,
            "grid-id": self.rule.id,
            "spectrum": self.spectrum.to_json(&self.rule)?,
            "values": self.values,
            "min": self.min(),
            "max": self.max(),
        }))
    }
}

/// I_{C,p} K with rho^{-p} kept as a spectrum.
#[derive(Debug, Clone)]
pub struct IntersectionResult {
    pub body: StarBody,
    /// rho^{-p} of the result.
    pub power: SpectralFunction,
    pub input_residual: f64,
}

/// rho_{I K}^{-p} = J_{C,p}(rho_K^{2n+p}) / (2n+p), spectral route.
pub fn intersection_body(c: &PlanarBody, p: f64, k: &StarBody, opts: &SpectralOptions) -> Result<IntersectionResult> {
    check_p(p)?;
    let n = k.n;
    let e = 2.0 * n as f64 + p;
    let rule = analysis_rule(n, k.flags.torus_invariant, opts)?;
    let f = k.radial_pow_on(&rule, e);
    let s = analyze_real(&rule, &f, opts.kmax)?;
    intersection_from_spectrum(c, p, &s, &rule, &k.label, k.flags)
}

/// Same as `intersection_body` for a given spectrum of rho_K^{2n+p}.
pub fn intersection_from_spectrum(
    c: &PlanarBody,
    p: f64,
    s: &BiDegreeSpectrum,
    rule: &SphereRule,
    label: &str,
    flags: BodyFlags,
) -> Result<IntersectionResult> {
    let n = s.n;
    let e = 2.0 * n as f64 + p;
    let table = j_table(c, p, n, s.kmax)?;
    let g = apply_multipliers(s, &table)?.scale(Complex64::new(1.0 / e, 0.0));
    let values = g.samples_re(rule)?;
    if let Some(i) = values.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("J rho^(2n+p) is non-positive ({:.3e}) at node {i}", values[i])));
    }
    let mut out_flags = flags;
    if matches!(c.kind, PlanarKind::Disc) {
        out_flags.s1_invariant = true;
    }
    let blabel = format!("I[{},{p}]({label})", c.label);
    let body = StarBody::from_spectrum_power(&blabel, g.clone(), -p, out_flags);
    Ok(IntersectionResult {
        body,
        power: SpectralFunction { label: blabel, spectrum: g, rule: rule.clone(), values },
        input_residual: s.residual,
    })
}

/// rho_{I K} at points by the quadrature route.
pub fn intersection_body_quadrature(
    c: &PlanarBody,
    p: f64,
    k: &StarBody,
    points: &[Vec<Complex64>],
    q: &JQuadrature,
) -> Result<Vec<f64>> {
    let e = 2.0 * k.n as f64 + p;
    let j = apply_j_quadrature(c, p, k.n, |v| Complex64::new(k.radial_pow(v, e), 0.0), points, q)?;
    j.iter()
        .enumerate()
        .map(|(i, z)| {
            let g = z.re / e;
            if g > 0.0 {
                Ok(g.powf(-1.0 / p))
            } else {
                Err(Error::Domain(format!("J rho^(2n+p) is non-positive at point {i}")))
            }
        })
        .collect()
}

fn check_measure(sk: &SurfaceMeasureData, rule: &SphereRule) -> Result<()> {
    if !sk.even {
        return Err(Error::InvalidBody(format!("surface measure {} is not even", sk.label)));
    }
    let c = sk.checks(rule)?;
    if c.even_defect > 1e-8 {
        return Err(Error::InvalidBody(format!("surface measure {} is not even (defect {:.2e})", sk.label, c.even_defect)));
    }
    if c.centroid_norm > 1e-8 {
        return Err(Error::InvalidBody(format!("surface measure {} is not centered", sk.label)));
    }
    Ok(())
}

/// Rule on which a surface measure lives (grid densities) or a default one.
pub fn measure_rule(sk: &SurfaceMeasureData, torus_invariant: bool, opts: &SpectralOptions) -> Result<SphereRule> {
    match &sk.density {
        Some(Density::Grid { rule, .. }) => Ok((**rule).clone()),
        _ => analysis_rule(sk.n, torus_invariant, opts),
    }
}

/// h_{Pi_C K} = 1/2 J_{C,1} S_K (spectral route for the density, exact atom sums).
pub fn projection_body(c: &PlanarBody, sk: &SurfaceMeasureData, torus_invariant: bool, opts: &SpectralOptions) -> Result<SpectralFunction> {
    let rule = measure_rule(sk, torus_invariant, opts)?;
    check_measure(sk, &rule)?;
    let d = sk.density_on(&rule)?;
    let s = analyze_real(&rule, &d, opts.kmax)?;
    let table = j_table(c, 1.0, sk.n, opts.kmax)?.scaled(0.5);
    let mut h = apply_multipliers(&s, &table)?;
    if !sk.atoms.is_empty() {
        // atoms: 1/2 sum w_a h_C(v_a . u), analyzed on the same rule
        let at = rule.sample(|u| {
            0.5 * sk.atoms.iter().map(|(v, w)| w * c.support_z(crate::harmonics::hermitian(v, u))).sum::<f64>()
        });
        let sa = analyze_real(&rule, &at, opts.kmax)?;
        h = h.add(&sa, 1.0)?;
    }
    let values = h.samples_re(&rule)?;
    Ok(SpectralFunction { label: format!("Pi[{}]({})", c.label, sk.label), spectrum: h, rule, values })
}

/// Fourier route -(1/4 pi) T_{S(iC,.)} F_{-2n-1} S_K.
pub fn projection_body_fourier(c: &PlanarBody, sk: &SurfaceMeasureData, torus_invariant: bool, opts: &SpectralOptions) -> Result<SpectralFunction> {
    let rule = measure_rule(sk, torus_invariant, opts)?;
    check_measure(sk, &rule)?;
    let n = sk.n;
    let d = sk.density_on(&rule)?;
    let s = analyze_real(&rule, &d, opts.kmax)?;
    let sic = c.times_i().surface_measure(NU_DENSITY_NODES);
    let t = t_table(&sic, n, opts.kmax);
    let f = f_table(-2.0 * n as f64 - 1.0, n, opts.kmax)?;
    let table = f.compose(&t)?.scaled(-1.0 / (4.0 * PI));
    let h = apply_multipliers(&s, &table)?;
    let values = h.samples_re(&rule)?;
    Ok(SpectralFunction { label: format!("PiF[{}]({})", c.label, sk.label), spectrum: h, rule, values })
}

/// h_{Pi_C K}(u) at points by quadrature, for callable densities.
pub fn projection_body_quadrature(c: &PlanarBody, sk: &SurfaceMeasureData, points: &[Vec<Complex64>], q: &JQuadrature) -> Result<Vec<f64>> {
    if sk.density_at(&points.first().cloned().unwrap_or_default()).is_none() && !points.is_empty() {
        return Err(Error::NotEvaluable("grid density off its grid".into()));
    }
    let j = apply_j_quadrature(c, 1.0, sk.n, |v| Complex64::new(sk.density_at(v).unwrap_or(0.0), 0.0), points, q)?;
    Ok(points
        .iter()
        .zip(&j)
        .map(|(u, z)| {
            0.5 * z.re
                + 0.5 * sk.atoms.iter().map(|(v, w)| w * c.support_z(crate::harmonics::hermitian(v, u))).sum::<f64>()
        })
        .collect())
}

/// h_{Gamma_C K} = J_{C,1}(rho_K^{2n+1}) / ((2n+1) V(K)).
pub fn centroid_body(c: &PlanarBody, k: &StarBody, opts: &SpectralOptions) -> Result<SpectralFunction> {
    let n = k.n;
    let rule = analysis_rule(n, k.flags.torus_invariant, opts)?;
    let e = 2.0 * n as f64 + 1.0;
    let f = k.radial_pow_on(&rule, e);
    let s = analyze_real(&rule, &f, opts.kmax)?;
    let vol = rule.integrate(&k.radial_pow_on(&rule, 2.0 * n as f64))? / (2 * n) as f64;
    let table = j_table(c, 1.0, n, opts.kmax)?.scaled(1.0 / (e * vol));
    let h = apply_multipliers(&s, &table)?;
    let values = h.samples_re(&rule)?;
    Ok(SpectralFunction { label: format!("Gamma[{}]({})", c.label, k.label), spectrum: h, rule, values })
}

// ---------------------------------------------------------------- embedding

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Embeds,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Embeds => "embeds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbedReport {
    pub body: String,
    pub n: usize,
    pub p: f64,
    pub kmax: u32,
    pub grid_id: String,
    pub min: f64,
    pub max: f64,
    pub witness: Vec<Complex64>,
    pub error_bar: f64,
    pub residual: f64,
    pub verdict: Verdict,
    /// (1/Gamma(-p/2)) F_p rho^{-p}.
    pub functional: SpectralFunction,
}

impl EmbedReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "body": self.body,
            "n": self.n,
            "p": self.p,
            "kmax": self.kmax,
            "grid-id": self.grid_id,
            "min": self.min,
            "max": self.max,
            "witness": self.witness.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "error_bar": self.error_bar,
            "residual": self.residual,
            "verdict": self.verdict.as_str(),
        })
    }
}

/// (1/Gamma(-p/2)) F_p f for a spectrum f, on a rule.
pub fn fourier_functional(s: &BiDegreeSpectrum, p: f64, rule: &SphereRule, label: &str) -> Result<SpectralFunction> {
    let g = 1.0 / gamma_fn(-p / 2.0)?;
    let table = f_table(p, s.n, s.kmax)?.scaled(g);
    let out = apply_multipliers(s, &table)?;
    let values = out.samples_re(rule)?;
    Ok(SpectralFunction { label: label.into(), spectrum: out, rule: rule.clone(), values })
}

/// Truncation error bar: sup of the two highest retained even degree blocks.
fn tail_bar(sf: &SpectralFunction) -> Result<f64> {
    let kmax = sf.spectrum.kmax;
    let top = kmax - kmax % 2;
    let mut tail = sf.spectrum.clone();
    tail.components.retain(|&(k, l), _| k + l + 2 >= top && (k + l) % 2 == 0);
    let v = tail.samples_re(&sf.rule)?;
    Ok(v.iter().map(|x| x.abs()).fold(0.0, f64::max))
}

/// L_p embedding test of an origin-symmetric star body.
pub fn embed_test(k: &StarBody, p: f64, opts: &SpectralOptions) -> Result<EmbedReport> {
    if p == 0.0 || !(p > -2.0 * k.n as f64) || (p > 0.0 && p == p.round() && (p as i64) % 2 == 0) {
        return Err(Error::Domain(format!("embedding exponent p = {p}")));
    }
    if !k.flags.origin_symmetric {
        return Err(Error::InvalidBody(format!("{} is not origin-symmetric", k.label)));
    }
    let rule = analysis_rule(k.n, k.flags.torus_invariant, opts)?;
    let f = k.radial_pow_on(&rule, -p);
    embed_test_samples(&k.label, &rule, &f, p, opts.kmax)
}

/// Embedding test for samples of rho^{-p} on a rule.
pub fn embed_test_samples(label: &str, rule: &SphereRule, f: &[f64], p: f64, kmax: u32) -> Result<EmbedReport> {
    let s = analyze_real(rule, f, kmax)?;
    let fscale = f.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    let sf = fourier_functional(&s, p, rule, &format!("F[{p}]({label})"))?;
    let (imin, min) = sf.values.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
    let max = sf.max();
    let scale = sf.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let error_bar = tail_bar(&sf)?.max(1e-12 * scale);
    let verdict = if s.residual > 1e-3 * fscale {
        Verdict::Inconclusive
    } else if min < -5.0 * error_bar {
        Verdict::Fails
    } else if min >= -error_bar {
        Verdict::Embeds
    } else {
        Verdict::Inconclusive
    };
    Ok(EmbedReport {
        body: label.into(),
        n: rule.n,
        p,
        kmax,
        grid_id: rule.id.clone(),
        min,
        max,
        witness: rule.point(imin).to_vec(),
        error_bar,
        residual: s.residual,
        verdict,
        functional: sf,
    })
}

/// max |F_{-2n-p} F_p f - (2 pi)^{2n} f| / |f| on the rule, and the constant.
pub fn fourier_inversion_defect(s: &BiDegreeSpectrum, p: f64, rule: &SphereRule) -> Result<(f64, f64)> {
    let n = s.n;
    let a = f_table(p, n, s.kmax)?;
    let b = f_table(-2.0 * n as f64 - p, n, s.kmax)?;
    let both = apply_multipliers(&apply_multipliers(s, &a)?, &b)?;
    let c = (2.0 * PI).powi(2 * n as i32);
    let x = s.samples(rule)?;
    let y = both.samples(rule)?;
    let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let err = x.iter().zip(&y).map(|(a, b)| (b - a * c).norm()).fold(0.0, f64::max) / (c * scale);
    Ok((err, c))
}

/// Analysis of a complex function (thin re-export for callers outside harmonics).
pub fn analyze_complex(rule: &SphereRule, f: &[Complex64], kmax: u32) -> Result<BiDegreeSpectrum> {
    analyze(rule, f, kmax)
}

pub fn basis_of(rule: &SphereRule) -> Result<Basis> {
    Basis::for_rule(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specialfn::disk_poly_unchecked;
    use std::sync::Arc;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn j_table_examples() {
        let d = PlanarBody::disc();
        let t = j_table(&d, -1.0, 2, 4).unwrap();
        assert!(rel(t.get(0, 0).unwrap(), Complex64::new(4.0 * PI * PI, 0.0)) < 1e-14);
        assert!(rel(t.get(1, 1).unwrap(), Complex64::new(-4.0 * PI * PI / 3.0, 0.0)) < 1e-14);
        assert_eq!(t.get(2, 0).unwrap(), ZERO);
        let sq = PlanarBody::ngon(4).unwrap();
        let t = j_table(&sq, -1.0, 2, 12).unwrap();
        for ((k, l), v) in &t.entries {
            let d = *k as i32 - *l as i32;
            if d % 4 != 0 {
                assert_eq!(*v, ZERO, "({k},{l})");
            }
        }
        assert!(t.get(4, 0).unwrap().norm() > 0.0);
        assert!(matches!(j_table(&d, -2.5, 2, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn j_factors_through_fourier() {
        for c in [PlanarBody::disc(), PlanarBody::ngon(4).unwrap(), PlanarBody::ngon(6).unwrap(), PlanarBody::ngon(4).unwrap().rotate(0.3)] {
            for p in [-1.5, -1.0, -0.5, 0.5, 1.0] {
                for n in [2usize, 3] {
                    let j = j_table(&c, p, n, 24).unwrap();
                    let f = factorized_j_table(&c, p, n, 24).unwrap();
                    for ((k, l), v) in &j.entries {
                        if (k + l) % 2 != 0 {
                            continue;
                        }
                        let w = f.get(*k, *l).unwrap();
                        let scale = v.norm().max(1e-300);
                        assert!((v - w).norm() <= 1e-10 * scale || (v.norm() < 1e-300 && w.norm() < 1e-300), "{} p={p} n={n} ({k},{l}) {v} {w}", c.label);
                    }
                }
            }
        }
    }

    #[test]
    fn zonal_quadrature_matches_multipliers() {
        for c in [PlanarBody::disc(), PlanarBody::ngon(4).unwrap()] {
            for p in [-1.0, -0.5, 0.5, 1.0] {
                let t = j_table(&c, p, 2, 8).unwrap();
                for ((k, l), lam) in &t.entries {
                    let q = j_multiplier_zonal(&c, p, 2, *k, *l, 24, 32).unwrap();
                    let scale = t.entries.values().map(|z| z.norm()).fold(0.0, f64::max);
                    assert!((q - lam).norm() < 1e-10 * scale, "{} p={p} ({k},{l}) {q} {lam}", c.label);
                }
            }
        }
    }

    #[test]
    fn adapted_quadrature_examples() {
        let d = PlanarBody::disc();
        let q = JQuadrature { nt: 12, per_arc: 16, nomega: 16 };
        let pts = vec![
            vec![Complex64::new(1.0, 0.0), ZERO],
            vec![Complex64::new(0.6, 0.3), Complex64::new(0.2, -(1.0f64 - 0.49).sqrt())],
        ];
        let one = apply_j_quadrature(&d, -1.0, 2, |_| Complex64::new(1.0, 0.0), &pts, &q).unwrap();
        for v in &one {
            assert!(rel(*v, Complex64::new(4.0 * PI * PI, 0.0)) < 1e-12);
        }
        let e = pts[1].clone();
        let f = |v: &[Complex64]| disk_poly_unchecked(2, 1, 1, crate::harmonics::hermitian(v, &e));
        let j = apply_j_quadrature(&d, -1.0, 2, f, &pts, &q).unwrap();
        for (u, v) in pts.iter().zip(&j) {
            let expect = f(u) * (-4.0 * PI * PI / 3.0);
            assert!((v - expect).norm() < 1e-10);
        }
        // square kills (2,0)
        let sq = PlanarBody::ngon(4).unwrap();
        let g = |v: &[Complex64]| v[0] * v[0];
        let j = apply_j_quadrature(&sq, -1.0, 2, g, &pts, &q).unwrap();
        assert!(j.iter().all(|z| z.norm() < 3e-5));
        // n = 3 constant
        let p3 = vec![vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.64f64.sqrt()), ZERO]];
        let j3 = apply_j_quadrature(&d, -1.0, 3, |_| Complex64::new(1.0, 0.0), &p3, &JQuadrature { nt: 8, per_arc: 8, nomega: 8 }).unwrap();
        let lam = j_table(&d, -1.0, 3, 0).unwrap().get(0, 0).unwrap();
        assert!(rel(j3[0], lam) < 1e-12);
    }

    #[test]
    fn nu_examples() {
        let d = PlanarBody::disc();
        let nu = nu_measure(&d, -1.0, 8).unwrap();
        assert!(rel(nu.coeff(0), Complex64::new(2.0 * PI, 0.0)) < 1e-14);
        let dens = nu.measure.density.as_ref().unwrap();
        assert!(dens.iter().all(|x| (x - 2.0 * PI).abs() < 1e-13));
        let sq = PlanarBody::ngon(4).unwrap();
        let nu = nu_measure(&sq, 1.0, 16).unwrap();
        assert_eq!(nu.realization, "atoms");
        for (k, &(a, w)) in nu.measure.atoms.iter().enumerate() {
            assert!((w + 2.0 * PI * 2f64.sqrt()).abs() < 1e-12);
            assert!((a - (PI / 4.0 + k as f64 * PI / 2.0)).abs() < 1e-12, "{a}");
        }
        assert!(nu.consistency.unwrap() < 1e-8);
        let nu = nu_measure(&d, 1.0, 8).unwrap();
        assert!(nu.measure.density.as_ref().unwrap().iter().all(|x| (x + 2.0 * PI).abs() < 1e-13));
        for c in [sq.clone(), PlanarBody::ngon(6).unwrap(), sq.rotate(0.3)] {
            for p in [-1.5, -1.0, -0.5, 0.5, 1.0] {
                let nu = nu_measure(&c, p, 32).unwrap();
                assert!(nu.signed_min >= -1e-9);
            }
        }
        // p = -1 polygon consistency through the closed form
        assert!(nu_measure(&sq, -1.0, 16).unwrap().consistency.unwrap() < 1e-8);
    }

    #[test]
    fn t_examples() {
        let pts = vec![vec![Complex64::new(0.6, 0.3), Complex64::new(0.2, -(1.0f64 - 0.49).sqrt())]];
        let uni = CircleMeasure::uniform(1.0, 32, "dc");
        let f = |u: &[Complex64]| u[0] * u[0];
        assert!(apply_t(f, &uni, &pts)[0].norm() < 1e-14);
        let two = CircleMeasure::atoms(vec![(0.0, 1.0), (PI, 1.0)], "pm");
        let g = |u: &[Complex64]| u[0] * u[1].conj() + u[0] * u[0];
        let v = apply_t(g, &two, &pts)[0];
        assert!((v - g(&pts[0]) * 2.0).norm() < 1e-14);
        let e = pts[0].clone();
        let z = |u: &[Complex64]| disk_poly_unchecked(2, 1, 1, crate::harmonics::hermitian(u, &e));
        let v = apply_t(z, &uni, &pts)[0];
        assert!((v - z(&pts[0]) * (2.0 * PI)).norm() < 1e-13);
        // grid route agrees with the multiplier route
        let rule = SphereRule::product(2, 8, &[16, 16]).unwrap();
        let mu = CircleMeasure::atoms(vec![(PI / 4.0, 0.7), (PI / 2.0, -0.2), (3.0 * PI / 2.0, 0.4)], "mix");
        let samples: Vec<Complex64> = rule.sample(|u| u[0] * u[0] * u[1].conj() + u[1] * u[1] * 0.3 + u[0].norm_sqr());
        let grid = apply_t_grid(&rule, &samples, &mu).unwrap();
        let spec = analyze(&rule, &samples, 4).unwrap();
        let via = apply_multipliers(&spec, &t_table(&mu, 2, 4)).unwrap().samples(&rule).unwrap();
        for (a, b) in grid.iter().zip(&via) {
            assert!((a - b).norm() < 1e-12);
        }
        let off = CircleMeasure::atoms(vec![(0.1, 1.0)], "off");
        assert!(matches!(apply_t_grid(&rule, &samples, &off), Err(Error::NotEvaluable(_))));
    }

    #[test]
    fn intersection_examples() {
        let d = PlanarBody::disc();
        let ball = StarBody::ball(2);
        let r = intersection_body(&d, -1.0, &ball, &SpectralOptions::default()).unwrap();
        let u = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        assert!((r.body.radial(&u) - 4.0 * PI * PI / 3.0).abs() < 1e-10);
        let big = ball.dilate(2.0);
        let r2 = intersection_body(&d, -1.0, &big, &SpectralOptions { kmax: 8, rule_id: Some("s3:8x20x20".into()) }).unwrap();
        assert!((r2.body.radial(&u) / r.body.radial(&u) - 8.0).abs() < 1e-10);
        let sq = PlanarBody::ngon(4).unwrap();
        let k = StarBody::parse("perturb:base=ball,p=-1,harm=re_z1sq,eps=0.1", 2).unwrap();
        let opts = SpectralOptions { kmax: 8, rule_id: Some("s3:8x20x20".into()) };
        let a = intersection_body(&sq, -1.0, &k, &opts).unwrap();
        let b = intersection_body(&sq, -1.0, &ball, &opts).unwrap();
        let diff = a.power.values.iter().zip(&b.power.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
        let pts: Vec<Vec<Complex64>> = (0..6).map(|i| opts_point(i)).collect();
        let q = intersection_body_quadrature(&sq, -1.0, &k, &pts, &JQuadrature { nt: 12, per_arc: 16, nomega: 16 }).unwrap();
        for (u, v) in pts.iter().zip(&q) {
            assert!((v - b.body.radial(u)).abs() < 1e-9 * v);
        }
    }

    fn opts_point(i: usize) -> Vec<Complex64> {
        let a = 0.3 + 0.17 * i as f64;
        let t: f64 = 0.1 + 0.13 * i as f64;
        vec![Complex64::from_polar(t.sqrt(), a), Complex64::from_polar((1.0 - t).sqrt(), 2.0 * a + 0.5)]
    }

    #[test]
    fn projection_and_centroid_examples() {
        let d = PlanarBody::disc();
        let sq = PlanarBody::ngon(4).unwrap();
        let uni = SurfaceMeasureData::uniform(2);
        let opts = SpectralOptions { kmax: 4, rule_id: Some("s3t:8".into()) };
        let h = projection_body(&d, &uni, true, &opts).unwrap();
        assert!(h.values.iter().all(|v| (v - 2.0 * PI * PI / 3.0).abs() < 1e-12));
        let h = projection_body(&sq, &uni, true, &opts).unwrap();
        assert!(h.values.iter().all(|v| (v - 4.0 * 2f64.sqrt() * PI / 3.0).abs() < 1e-12));
        let hf = projection_body_fourier(&sq, &uni, true, &opts).unwrap();
        assert!(hf.values.iter().zip(&h.values).all(|(a, b)| (a - b).abs() < 1e-10));
        let pts: Vec<Vec<Complex64>> = (0..4).map(opts_point).collect();
        let hq = projection_body_quadrature(&sq, &uni, &pts, &JQuadrature::default()).unwrap();
        assert!(hq.iter().all(|v| (v - 4.0 * 2f64.sqrt() * PI / 3.0).abs() < 1e-10));
        let g = centroid_body(&d, &StarBody::ball(2), &opts).unwrap();
        assert!(g.values.iter().all(|v| (v - 8.0 / 15.0).abs() < 1e-12));
        let mut odd = SurfaceMeasureData::from_fn(2, "odd", Arc::new(|u| 1.0 + 0.1 * u[0].re));
        odd.even = true;
        let full = SpectralOptions { kmax: 4, rule_id: Some("s3:8x20x20".into()) };
        assert!(matches!(projection_body(&d, &odd, false, &full), Err(Error::InvalidBody(_))));
    }

    #[test]
    fn embed_examples() {
        let ball = StarBody::ball(2);
        let r = embed_test(&ball, -1.0, &SpectralOptions { kmax: 8, rule_id: None }).unwrap();
        assert_eq!(r.verdict, Verdict::Embeds);
        assert!((r.min - 4.0 * PI * PI / PI.sqrt()).abs() < 1e-10);
        let l4 = StarBody::lq(2, 4.0).unwrap();
        let r = embed_test(&l4, -1.0, &SpectralOptions { kmax: 64, rule_id: None }).unwrap();
        assert_eq!(r.verdict, Verdict::Embeds, "{:?}", (r.min, r.error_bar));
    }

    #[test]
    fn inversion() {
        let rule = SphereRule::product(2, 8, &[20, 20]).unwrap();
        let f: Vec<f64> = rule.sample(|u| 1.0 + (u[0] * u[0] * u[1].conj() * u[1].conj()).re + u[0].norm_sqr().powi(2));
        let s = analyze_real(&rule, &f, 8).unwrap();
        for p in [-1.5, -1.0, 0.5] {
            let (err, c) = fourier_inversion_defect(&s, p, &rule).unwrap();
            assert!(err < 1e-12, "{err}");
            assert!((c - 16.0 * PI.powi(4)).abs() < 1e-9);
        }
    }
}
