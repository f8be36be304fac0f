//! Volumes, dual mixed volumes, first mixed volumes and the two Minkowski-type
//! inequalities.

use crate::bodies::{StarBody, SurfaceMeasureData};
use crate::error::{Error, Result};
use crate::spheregrid::{neumaier, SphereRule};
use num_complex::Complex64;
use serde_json::json;

/// Default rule for integrals over a body with the given symmetry.
pub fn volume_rule(k: &StarBody) -> Result<SphereRule> {
    match (k.n, k.flags.torus_invariant) {
        (2, true) => SphereRule::torus_reduced(2, 64),
        (3, true) => SphereRule::torus_reduced(3, 40),
        (n, _) => SphereRule::default_for(n),
    }
}

/// V(K) = (1/2n) int rho_K^{2n}.
pub fn volume(k: &StarBody, rule: &SphereRule) -> Result<f64> {
    let m = 2 * k.n;
    Ok(rule.integrate(&k.radial_pow_on(rule, m as f64))? / m as f64)
}

/// Volume on the default rule for the body.
pub fn volume_auto(k: &StarBody) -> Result<f64> {
    volume(k, &volume_rule(k)?)
}

/// Dual mixed volume (1/m) int rho_K^{m-p} rho_L^p.
pub fn dual_mixed_volume(p: f64, k: &StarBody, l: &StarBody, rule: &SphereRule) -> Result<f64> {
    if p == 0.0 {
        return Err(Error::Domain("dual mixed volume needs p != 0".into()));
    }
    if k.n != l.n || rule.n != k.n {
        return Err(Error::Domain("bodies of different dimension".into()));
    }
    let m = (2 * k.n) as f64;
    let a = k.radial_on(rule);
    let b = l.radial_on(rule);
    let f: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.powf(m - p) * y.powf(p)).collect();
    Ok(rule.integrate(&f)? / m)
}

/// Same with the radial samples already at hand.
pub fn dual_mixed_volume_samples(p: f64, n: usize, rho_k: &[f64], rho_l: &[f64], rule: &SphereRule) -> Result<f64> {
    let m = (2 * n) as f64;
    let f: Vec<f64> = rho_k.iter().zip(rho_l).map(|(x, y)| x.powf(m - p) * y.powf(p)).collect();
    Ok(rule.integrate(&f)? / m)
}

/// V_1(K,L) = (1/2n) int h_L dS_K, with h_L sampled on the density rule and a
/// callable for atoms.
pub fn mixed_volume_v1(
    sk: &SurfaceMeasureData,
    rule: &SphereRule,
    hl_samples: &[f64],
    hl: &dyn Fn(&[Complex64]) -> f64,
) -> Result<f64> {
    if let Some(i) = hl_samples.iter().position(|&h| !(h > 0.0)) {
        return Err(Error::Domain(format!("support function not positive at node {i}")));
    }
    let dens = sk.integrate(rule, hl_samples)?;
    let atoms = neumaier(sk.atoms.iter().map(|(v, w)| w * hl(v)));
    Ok((dens + atoms) / (2 * sk.n) as f64)
}

/// Certified bound V(K) <= V_1(K,L)^{2n/(2n-1)} V(L)^{-1/(2n-1)}.
pub fn certified_volume_bound(v1: f64, vl: f64, n: usize) -> f64 {
    let m = (2 * n) as f64;
    v1.powf(m / (m - 1.0)) * vl.powf(-1.0 / (m - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InequalityKind {
    DualLpMinkowski { p: f64 },
    MinkowskiFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub kind: InequalityKind,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs - lhs; non-negative when the inequality holds.
    pub margin: f64,
    /// Deviation from being dilates (or homothetic), 0 at equality.
    pub dilate_residual: Option<f64>,
    /// Certified bound on V(K) (Minkowski-first chain only).
    pub certified_bound: Option<f64>,
    pub certified_less: Option<bool>,
}

impl InequalityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.margin >= -tol * self.lhs.abs().max(self.rhs.abs())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self.kind {
            InequalityKind::DualLpMinkowski { p } => json!({"kind": "dual-Lp-Minkowski", "p": p}),
            InequalityKind::MinkowskiFirst => json!({"kind": "Minkowski-first"}),
        };
        json!({
            "kind": kind,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "dilate_residual": self.dilate_residual,
            "certified_bound": self.certified_bound,
            "certified_less": self.certified_less,
        })
    }
}

/// Relative spread of rho_K / rho_L (zero iff dilates on the rule).
pub fn dilate_residual(rho_k: &[f64], rho_l: &[f64]) -> f64 {
    let r: Vec<f64> = rho_k.iter().zip(rho_l).map(|(a, b)| a / b).collect();
    let mean = neumaier(r.iter().copied()) / r.len() as f64;
    r.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max) / mean
}

/// p Ve_p(K,L) <= p V(K)^{(m-p)/m} V(L)^{p/m}.
pub fn verify_dual_lp(p: f64, k: &StarBody, l: &StarBody, rule: &SphereRule) -> Result<InequalityReport> {
    let a = k.radial_on(rule);
    let b = l.radial_on(rule);
    verify_dual_lp_samples(p, k.n, &a, &b, rule)
}

pub fn verify_dual_lp_samples(p: f64, n: usize, a: &[f64], b: &[f64], rule: &SphereRule) -> Result<InequalityReport> {
    let m = (2 * n) as f64;
    let vp = dual_mixed_volume_samples(p, n, a, b, rule)?;
    let vk = dual_mixed_volume_samples(1.0, n, a, a, rule)?;
    let vl = dual_mixed_volume_samples(1.0, n, b, b, rule)?;
    let lhs = p * vp;
    let rhs = p * vk.powf((m - p) / m) * vl.powf(p / m);
    Ok(InequalityReport {
        kind: InequalityKind::DualLpMinkowski { p },
        lhs,
        rhs,
        margin: rhs - lhs,
        dilate_residual: Some(dilate_residual(a, b)),
        certified_bound: None,
        certified_less: None,
    })
}

/// V_1(K,L) >= V(K)^{(m-1)/m} V(L)^{1/m}. With V(K) unknown, reports the
/// certified bound on V(K) and whether it is below V(L).
pub fn verify_minkowski_first(n: usize, v1: f64, vk: Option<f64>, vl: f64) -> InequalityReport {
    let m = (2 * n) as f64;
    let bound = certified_volume_bound(v1, vl, n);
    match vk {
        Some(vk) => {
            let lhs = vk.powf((m - 1.0) / m) * vl.powf(1.0 / m);
            InequalityReport {
                kind: InequalityKind::MinkowskiFirst,
                lhs,
                rhs: v1,
                margin: v1 - lhs,
                dilate_residual: None,
                certified_bound: Some(bound),
                certified_less: Some(bound < vl),
            }
        }
        None => InequalityReport {
            kind: InequalityKind::MinkowskiFirst,
            lhs: f64::NAN,
            rhs: v1,
            margin: f64::NAN,
            dilate_residual: None,
            certified_bound: Some(bound),
            certified_less: Some(bound < vl),
        },
    }
}

/// Monotonicity of Ve_p in L along L -> lambda L (sampled check).
pub fn dual_mixed_volume_monotone(p: f64, k: &StarBody, l: &StarBody, rule: &SphereRule) -> Result<bool> {
    let a = dual_mixed_volume(p, k, l, rule)?;
    let b = dual_mixed_volume(p, k, &l.dilate(1.1), rule)?;
    Ok(if p > 0.0 { b > a } else { b < a })
}
