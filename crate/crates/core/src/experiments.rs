//! End-to-end pipelines: injectivity counterexamples, adjointness checks,
//! embedding scans, image counterexamples and the summary table built from
//! their records.

use crate::bodies::{
    check_rule, geometry_checks, lq_norm, perturb_radial_power, surface_density_from_support_step, BodyFlags,
    PlanarBody, RealFn, StarBody, SurfaceMeasureData,
};
use crate::error::{Error, Result};
use crate::geometry::certified_volume_bound;
use crate::harmonics::{analyze_real, apply_multipliers, basis_eval, Basis, BiDegreeSpectrum};
use crate::operators::{
    embed_test, embed_test_samples, f_table, intersection_body, intersection_body_quadrature, intersection_from_spectrum,
    j_table, projection_body, projection_body_quadrature, EmbedReport, JQuadrature, SpectralOptions, Verdict,
};
use crate::spheregrid::{neumaier, SphereRule};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

// ---------------------------------------------------------------- records

/// One checked statement: `value` compared against `tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub error_bar: f64,
    /// One of `<=`, `>=`, `>5bar`, `in`.
    pub relation: String,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Claim {
    /// value <= tol.
    pub fn below(name: &str, value: f64, tol: f64, bar: f64) -> Self {
        Claim { name: name.into(), value, tolerance: tol, error_bar: bar, relation: "<=".into(), upper: None, pass: value <= tol }
    }

    /// value >= tol.
    pub fn above(name: &str, value: f64, tol: f64, bar: f64) -> Self {
        Claim { name: name.into(), value, tolerance: tol, error_bar: bar, relation: ">=".into(), upper: None, pass: value >= tol }
    }

    /// Strict positivity beyond five error bars.
    pub fn strict(name: &str, value: f64, bar: f64) -> Self {
        Claim {
            name: name.into(),
            value,
            tolerance: 5.0 * bar,
            error_bar: bar,
            relation: ">5bar".into(),
            upper: None,
            pass: value > 5.0 * bar,
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64, bar: f64) -> Self {
        Claim {
            name: name.into(),
            value,
            tolerance: lo,
            error_bar: bar,
            relation: "in".into(),
            upper: Some(hi),
            pass: value >= lo && value <= hi,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Claim::above(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "upper": self.upper,
            "error_bar": self.error_bar,
            "relation": self.relation,
            "pass": self.pass,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let f = |k: &str| v.get(k).and_then(Value::as_f64).ok_or_else(|| Error::Parse(format!("claim lacks {k}")));
        Ok(Claim {
            name: v.get("name").and_then(Value::as_str).unwrap_or_default().into(),
            value: f("value")?,
            tolerance: f("tolerance")?,
            error_bar: f("error_bar")?,
            relation: v.get("relation").and_then(Value::as_str).unwrap_or("<=").into(),
            upper: v.get("upper").and_then(Value::as_f64),
            pass: v.get("pass").and_then(Value::as_bool).unwrap_or(false),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordVerdict {
    Pass,
    Fail,
    Aborted,
    Inconclusive,
}

impl RecordVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordVerdict::Pass => "pass",
            RecordVerdict::Fail => "fail",
            RecordVerdict::Aborted => "aborted",
            RecordVerdict::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(RecordVerdict::Pass),
            "fail" => Ok(RecordVerdict::Fail),
            "aborted" => Ok(RecordVerdict::Aborted),
            "inconclusive" => Ok(RecordVerdict::Inconclusive),
            _ => Err(Error::Parse(format!("unknown verdict `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub id: String,
    pub inputs: Value,
    pub grids: Vec<String>,
    pub claims: Vec<Claim>,
    pub verdict: RecordVerdict,
    pub seed: u64,
    pub runtime_s: f64,
    pub artifacts: Value,
}

impl ExperimentRecord {
    fn new(id: &str, inputs: Value, seed: u64) -> Self {
        ExperimentRecord {
            id: id.into(),
            inputs,
            grids: vec![],
            claims: vec![],
            verdict: RecordVerdict::Inconclusive,
            seed,
            runtime_s: 0.0,
            artifacts: json!({}),
        }
    }

    fn grid(&mut self, id: &str) {
        if !self.grids.iter().any(|g| g == id) {
            self.grids.push(id.into());
        }
    }

    fn artifact(&mut self, key: &str, v: Value) {
        if let Value::Object(m) = &mut self.artifacts {
            m.insert(key.into(), v);
        }
    }

    /// Pass iff every claim passes (aborted records keep their verdict).
    fn settle(&mut self) {
        if self.verdict != RecordVerdict::Aborted {
            self.verdict = if self.claims.iter().all(|c| c.pass) { RecordVerdict::Pass } else { RecordVerdict::Fail };
        }
    }

    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.verdict == RecordVerdict::Pass
    }

    pub fn to_json(&self, with_runtime: bool) -> Value {
        let mut v = json!({
            "id": self.id,
            "inputs": self.inputs,
            "grids": self.grids,
            "claims": self.claims.iter().map(Claim::to_json).collect::<Vec<_>>(),
            "verdict": self.verdict.as_str(),
            "seed": self.seed,
            "artifacts": self.artifacts,
        });
        if with_runtime {
            v["runtime_s"] = json!(self.runtime_s);
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let claims = v
            .get("claims")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("record lacks claims".into()))?
            .iter()
            .map(Claim::from_json)
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentRecord {
            id: v.get("id").and_then(Value::as_str).ok_or_else(|| Error::Parse("record lacks id".into()))?.into(),
            inputs: v.get("inputs").cloned().unwrap_or(Value::Null),
            grids: v
                .get("grids")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(|g| g.as_str().map(String::from)).collect())
                .unwrap_or_default(),
            claims,
            verdict: RecordVerdict::parse(v.get("verdict").and_then(Value::as_str).unwrap_or("inconclusive"))?,
            seed: v.get("seed").and_then(Value::as_u64).unwrap_or(0),
            runtime_s: v.get("runtime_s").and_then(Value::as_f64).unwrap_or(0.0),
            artifacts: v.get("artifacts").cloned().unwrap_or(json!({})),
        })
    }
}

/// Pretty JSON with sorted keys and floats written with 17 significant digits.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            // short numeric rows stay on one line
            if a.iter().all(|x| x.is_number()) {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, depth, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_value(x, depth + 1, out);
                if i + 1 < a.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&m[*k], depth + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

/// Fixed seed per experiment id (FNV-1a).
pub fn seed_for(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

// ---------------------------------------------------------------- shared helpers

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    I,
    Pi,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::I => "I",
            OpKind::Pi => "Pi",
        }
    }
}

fn c64(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn sup_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}

fn points_of(rule: &SphereRule) -> Vec<Vec<Complex64>> {
    rule.points().map(|u| u.to_vec()).collect()
}

/// Smallest even m <= mmax with c_m[h_C^p] = 0.
pub fn killed_index(c: &PlanarBody, p: f64, mmax: u32) -> Option<u32> {
    let co = c.fourier_coeffs(p, mmax);
    let c0 = co[mmax as usize].norm();
    (2..=mmax).step_by(2).find(|&m| co[(mmax + m) as usize].norm() <= 1e-13 * c0)
}

/// Re(u_1^d).
fn zonal_re(d: u32) -> RealFn {
    Arc::new(move |u| u[0].powu(d).re)
}

fn volume_of(f_power: &[f64], e: f64, n: usize, rule: &SphereRule) -> Result<f64> {
    let m = 2.0 * n as f64;
    let v: Vec<f64> = f_power.iter().map(|x| x.powf(m / e)).collect();
    Ok(rule.integrate(&v)? / m)
}

// ---------------------------------------------------------------- injectivity

/// Injectivity-set counterexample in C^2 for I_{C,p} or Pi_C.
pub fn injectivity_counterexample(op: OpKind, c: &PlanarBody, p: f64, eps: f64, seed: u64) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let n = 2;
    let p = if op == OpKind::Pi { 1.0 } else { p };
    let d = killed_index(c, p, 16).ok_or_else(|| Error::Domain("injectivity set is everything for this C".into()))?;
    let id = format!("inj-{}-{}", op.as_str(), c.label);
    let inputs = json!({"op": op.as_str(), "C": c.label, "p": p, "n": n, "eps": eps, "harmonic": format!("re_z1^{d}")});
    let mut rec = ExperimentRecord::new(&id, inputs, seed);
    match op {
        OpKind::I => injectivity_i(&mut rec, c, p, d, eps)?,
        OpKind::Pi => injectivity_pi(&mut rec, c, d, eps)?,
    }
    rec.settle();
    rec.runtime_s = start.elapsed().as_secs_f64();
    Ok(rec)
}

fn spectral_opts(kmax: u32) -> SpectralOptions {
    let t = kmax as usize / 2 + 4;
    let ph = 2 * kmax as usize + 8;
    SpectralOptions { kmax, rule_id: Some(format!("s3:{t}x{ph}x{ph}")) }
}

fn injectivity_i(rec: &mut ExperimentRecord, c: &PlanarBody, p: f64, d: u32, eps: f64) -> Result<()> {
    let n = 2;
    let e = 2.0 * n as f64 + p;
    let ball = StarBody::ball(n);
    let y = zonal_re(d);
    let crule = check_rule(n)?;
    let k = perturb_radial_power(&ball, p, y.clone(), &format!("re_z1^{d}"), eps, &crule)?;
    let geo = geometry_checks(&k, 100_000, rec.seed)?;
    rec.artifact("geometry", geo.to_json());
    if !geo.all_pass() {
        rec.verdict = RecordVerdict::Aborted;
        rec.claims.push(Claim::flag("geometry-checks", false));
        return Ok(());
    }
    rec.claims.push(Claim::below("geometry-convexity-defect", geo.convexity.worst, 1e-10, 0.0));

    // spectral route on a small full rule (inputs are band-limited)
    let opts = spectral_opts((2 * d + 4).max(8));
    let ik = intersection_body(c, p, &k, &opts)?;
    let il = intersection_body(c, p, &ball, &opts)?;
    rec.grid(&ik.power.rule.id);
    let rk: Vec<f64> = ik.power.values.iter().map(|g| g.powf(-1.0 / p)).collect();
    let rl: Vec<f64> = il.power.values.iter().map(|g| g.powf(-1.0 / p)).collect();
    let scale = sup_abs(rl.iter().copied());
    let spec_slack = sup_abs(rk.iter().zip(&rl).map(|(a, b)| a - b)) / scale;
    rec.claims.push(Claim::below("equality-slack-spectral", spec_slack, 1e-10, 0.0));

    // quadrature route at check points
    let prule = SphereRule::product(n, 4, &[8, 8])?;
    rec.grid(&prule.id);
    let pts = points_of(&prule);
    let jq = JQuadrature { nt: 12, per_arc: 24, nomega: 16 };
    let qk = intersection_body_quadrature(c, p, &k, &pts, &jq)?;
    let ql = intersection_body_quadrature(c, p, &ball, &pts, &jq)?;
    let qscale = sup_abs(ql.iter().copied());
    let q_slack = sup_abs(qk.iter().zip(&ql).map(|(a, b)| a - b)) / qscale;
    rec.claims.push(Claim::below("equality-slack-quadrature", q_slack, 1e-6, 0.0));

    // volumes on two rules
    let ra = SphereRule::default_for(n)?;
    let rb = SphereRule::product(n, 24, &[32, 32])?;
    rec.grid(&ra.id);
    rec.grid(&rb.id);
    let margin_on = |eps: f64, rule: &SphereRule| -> Result<(f64, f64)> {
        let f: Vec<f64> = rule.sample(|u| 1.0 + eps * y(u));
        let vk = volume_of(&f, e, n, rule)?;
        let vl = rule.volume() / (2 * n) as f64;
        Ok((-p * (vk - vl), vk - vl))
    };
    let (ma, dv) = margin_on(eps, &ra)?;
    let (mb, _) = margin_on(eps, &rb)?;
    let bar = (ma - mb).abs() + 1e-14;
    rec.claims.push(Claim::strict("volume-reversal-margin", ma, bar));
    let (mh, _) = margin_on(eps / 2.0, &ra)?;
    let ratio = ma / mh;
    rec.claims.push(Claim::within("jensen-curvature-ratio", ratio, 3.6, 4.4, 0.0));
    rec.artifact(
        "volumes",
        json!({"volume_difference": dv, "margin": ma, "margin_half_eps": mh, "error_bar": bar, "scale": scale}),
    );
    Ok(())
}

fn injectivity_pi(rec: &mut ExperimentRecord, c: &PlanarBody, d: u32, eps: f64) -> Result<()> {
    let n = 2;
    let y = zonal_re(d);
    let yy = y.clone();
    let sk = SurfaceMeasureData::from_fn(n, &format!("1+{eps}re_z1^{d}"), Arc::new(move |u| 1.0 + eps * yy(u)));
    let unif = SurfaceMeasureData::uniform(n);
    let crule = check_rule(n)?;
    let mins = sk.density_on(&crule)?.iter().copied().fold(f64::INFINITY, f64::min);
    rec.claims.push(Claim::above("surface-density-min", mins, 0.0, 0.0));

    let opts = spectral_opts((2 * d + 4).max(8));
    let hk = projection_body(c, &sk, false, &opts)?;
    let hl = projection_body(c, &unif, false, &opts)?;
    rec.grid(&hk.rule.id);
    let scale = sup_abs(hl.values.iter().copied());
    let spec_slack = sup_abs(hk.values.iter().zip(&hl.values).map(|(a, b)| a - b)) / scale;
    rec.claims.push(Claim::below("equality-slack-spectral", spec_slack, 1e-10, 0.0));

    let prule = SphereRule::product(n, 4, &[8, 8])?;
    rec.grid(&prule.id);
    let pts = points_of(&prule);
    let jq = JQuadrature { nt: 12, per_arc: 24, nomega: 16 };
    let qk = projection_body_quadrature(c, &sk, &pts, &jq)?;
    let ql = projection_body_quadrature(c, &unif, &pts, &jq)?;
    let q_slack = sup_abs(qk.iter().zip(&ql).map(|(a, b)| a - b)) / sup_abs(ql.iter().copied());
    rec.claims.push(Claim::below("equality-slack-quadrature", q_slack, 1e-6, 0.0));

    // chain with L = ball: V_1(K, ball) = V(ball), which bounds V(K) <= V(ball) only weakly
    let ra = SphereRule::product(n, 24, &[48, 48])?;
    let rb = SphereRule::product(n, 16, &[32, 32])?;
    rec.grid(&ra.id);
    rec.grid(&rb.id);
    let vball = PI * PI / 2.0;
    let v1_ball = sk.integrate(&ra, &vec![1.0; ra.len()])? / 4.0;
    rec.claims.push(Claim::below("chain-with-ball-defect", (v1_ball - vball).abs() / vball, 1e-12, 0.0));

    // comparison body M with S_M close to S_K gives a strict certificate
    let lin = (2 * n - 1) as f64 - (d * (d + 2 * n as u32 - 2)) as f64;
    let margin_at = |eps: f64| -> Result<(f64, f64, Value)> {
        let eta = eps / lin;
        let hm: RealFn = {
            let y = y.clone();
            Arc::new(move |u| 1.0 + eta * y(u))
        };
        let sk_fn = {
            let y = y.clone();
            move |u: &[Complex64]| 1.0 + eps * y(u)
        };
        let vm_on = |rule: &SphereRule, step: f64| -> Result<f64> {
            let sm = surface_density_from_support_step(hm.clone(), n, rule, step)?;
            let h = rule.sample(|u| hm(u));
            Ok(sm.integrate(rule, &h)? / 4.0)
        };
        let vm = vm_on(&ra, 2e-3)?;
        let vm_step = vm_on(&ra, 1e-3)?;
        let vm_rule = vm_on(&rb, 2e-3)?;
        let h = ra.sample(|u| hm(u) * sk_fn(u));
        let v1 = ra.integrate(&h)? / 4.0;
        let bound = certified_volume_bound(v1, vm, n);
        let margin = vball - bound;
        let bar = 1.5 * ((vm - vm_step).abs() + (vm - vm_rule).abs()) + 1e-14;
        Ok((margin, bar, json!({"eta": eta, "V1_K_M": v1, "V_M": vm, "bound": bound, "V_ball": vball})))
    };
    let (margin, bar, info) = margin_at(eps)?;
    rec.claims.push(Claim::strict("certified-volume-margin", margin, bar));
    let (mh, _, _) = margin_at(eps / 2.0)?;
    rec.claims.push(Claim::within("margin-curvature-ratio", margin / mh, 3.5, 4.5, 0.0));
    rec.artifact("certificate", info);
    rec.artifact("volumes", json!({"margin": margin, "margin_half_eps": mh, "error_bar": bar, "scale": scale}));
    Ok(())
}

// ---------------------------------------------------------------- adjointness

/// Random even polynomial 1 + amp Re(sum c_j u^a conj(u)^b) / sum |c_j| in C^2.
pub fn random_band_limited(rng: &mut ChaCha8Rng, amp: f64) -> RealFn {
    let mut terms: Vec<([u32; 4], Complex64)> = Vec::new();
    for _ in 0..6 {
        let deg = if rng.gen_bool(0.5) { 2 } else { 4 };
        let mut e = [0u32; 4];
        for _ in 0..deg {
            e[rng.gen_range(0..4)] += 1;
        }
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        terms.push((e, c));
    }
    let norm: f64 = terms.iter().map(|t| t.1.norm()).sum();
    Arc::new(move |u: &[Complex64]| {
        let s: Complex64 = terms
            .iter()
            .map(|(e, c)| c * u[0].powu(e[0]) * u[1].powu(e[1]) * u[0].conj().powu(e[2]) * u[1].conj().powu(e[3]))
            .sum();
        1.0 + amp * s.re / norm
    })
}

fn body_from_power(label: &str, f: RealFn, e: f64) -> StarBody {
    let flags = BodyFlags { origin_symmetric: true, s1_invariant: false, torus_invariant: false };
    StarBody::from_fn(2, label, Arc::new(move |u| f(u).powf(1.0 / e)), flags)
}

/// Adjointness identities and the affirmative chain for bodies in the image.
pub fn adjointness_suite(c: &PlanarBody, p: f64, trials: usize, seed: u64) -> Result<ExperimentRecord> {
    if trials < 1 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let start = Instant::now();
    let n = 2;
    let e = 2.0 * n as f64 + p;
    let cb = c.conj();
    let id = format!("adjoint-{}", c.label);
    let mut rec = ExperimentRecord::new(&id, json!({"C": c.label, "p": p, "n": n, "trials": trials}), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // dual mixed volume adjointness by the quadrature route
    let rule = SphereRule::product(n, 6, &[12, 12])?;
    rec.grid(&rule.id);
    let pts = points_of(&rule);
    let jq = JQuadrature { nt: 8, per_arc: 16, nomega: 12 };
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let fk = random_band_limited(&mut rng, 0.4);
        let fl = random_band_limited(&mut rng, 0.4);
        let jl = crate::operators::apply_j_quadrature(&cb, p, n, |v| c64(fl(v)), &pts, &jq)?;
        let jk = crate::operators::apply_j_quadrature(c, p, n, |v| c64(fk(v)), &pts, &jq)?;
        let a: Vec<f64> = pts.iter().zip(&jl).map(|(u, z)| fk(u) * z.re / e).collect();
        let b: Vec<f64> = pts.iter().zip(&jk).map(|(u, z)| fl(u) * z.re / e).collect();
        let lhs = rule.integrate(&a)? / 4.0;
        let rhs = rule.integrate(&b)? / 4.0;
        worst = worst.max((lhs - rhs).abs() / lhs.abs());
    }
    rec.claims.push(Claim::below("dual-mixed-adjointness", worst, 1e-5, 0.0));

    // V_1 adjointness with finite-difference surface densities
    let full = SphereRule::product(n, 16, &[52, 52])?;
    rec.grid(&full.id);
    let opts = SpectralOptions { kmax: 24, rule_id: Some(full.id.clone()) };
    let mut worst1 = 0.0f64;
    for _ in 0..trials {
        let hk = random_band_limited(&mut rng, 0.02);
        let hk0 = random_band_limited(&mut rng, 0.02);
        let sk = surface_density_from_support_step(hk, n, &full, 2e-3)?;
        let sk0 = surface_density_from_support_step(hk0, n, &full, 2e-3)?;
        let pk0 = projection_body(&cb, &sk0, false, &opts)?;
        let pk = projection_body(c, &sk, false, &opts)?;
        let lhs = sk.integrate(&full, &pk0.values)? / 4.0;
        let rhs = sk0.integrate(&full, &pk.values)? / 4.0;
        worst1 = worst1.max((lhs - rhs).abs() / lhs.abs());
    }
    rec.claims.push(Claim::below("mixed-volume-adjointness", worst1, 1e-4, 0.0));

    // affirmative chain: K = I_{conj C} K0, L dilated until I K is inside I L
    let sopts = SpectralOptions { kmax: 16, rule_id: Some("s3:12x40x40".into()) };
    rec.grid("s3:12x40x40");
    let vol = |b: &StarBody| -> Result<f64> { Ok(full.integrate(&b.radial_pow_on(&full, 4.0))? / 4.0) };
    let rho_of = |g: &[f64]| -> Vec<f64> { g.iter().map(|x| x.powf(-1.0 / p)).collect() };
    let mut min_slack = f64::INFINITY;
    let mut min_margin = f64::INFINITY;
    let chains = trials.min(3);
    for _ in 0..chains {
        let k0 = body_from_power("K0", random_band_limited(&mut rng, 0.3), e);
        let k = intersection_body(&cb, p, &k0, &sopts)?.body;
        let l = body_from_power("L", random_band_limited(&mut rng, 0.3), e);
        let ik = rho_of(&intersection_body(c, p, &k, &sopts)?.power.values);
        let il = rho_of(&intersection_body(c, p, &l, &sopts)?.power.values);
        let s = ik.iter().zip(&il).map(|(a, b)| a / b).fold(0.0, f64::max);
        let lam = s.powf(-p / e);
        let ld = l.dilate(lam);
        let ild = rho_of(&intersection_body(c, p, &ld, &sopts)?.power.values);
        let scale = sup_abs(ild.iter().copied());
        min_slack = min_slack.min(ild.iter().zip(&ik).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min) / scale);
        let (vk, vl) = (vol(&k)?, vol(&ld)?);
        min_margin = min_margin.min(-p * (vl - vk) / vl);
    }
    rec.claims.push(Claim::above("engineered-inclusion-slack", min_slack, -1e-9, 0.0));
    rec.claims.push(Claim::above("affirmative-volume-margin", min_margin, -1e-9, 0.0));

    // equality case: L0 = K0 plus a harmonic killed by J_{conj C}
    let d = killed_index(&cb, p, 16).unwrap_or(2);
    let fk0 = random_band_limited(&mut rng, 0.3);
    let y = zonal_re(d);
    let fl0: RealFn = {
        let (fk0, y) = (fk0.clone(), y.clone());
        Arc::new(move |u| fk0(u) + 0.05 * y(u))
    };
    let k0 = body_from_power("K0", fk0.clone(), e);
    let l0 = body_from_power("L0", fl0, e);
    let prule = SphereRule::product(n, 4, &[8, 8])?;
    let cpts = points_of(&prule);
    let jq2 = JQuadrature { nt: 12, per_arc: 24, nomega: 16 };
    let rk = intersection_body_quadrature(&cb, p, &k0, &cpts, &jq2)?;
    let rl = intersection_body_quadrature(&cb, p, &l0, &cpts, &jq2)?;
    let eq_res = sup_abs(rk.iter().zip(&rl).map(|(a, b)| a - b)) / sup_abs(rk.iter().copied());
    rec.claims.push(Claim::below("equality-case-residual", eq_res, 1e-5, 0.0));
    let k = intersection_body(&cb, p, &k0, &sopts)?.body;
    let l = if d <= sopts.kmax { intersection_body(&cb, p, &l0, &sopts)?.body } else { k.clone() };
    let (vk, vl) = (vol(&k)?, vol(&l)?);
    rec.claims.push(Claim::below("equality-case-volume", (vk - vl).abs() / vk, 1e-5, 0.0));

    // a J_C-null perturbation of K keeps I_C K and moves the volume the predicted way
    let kk = k.clone();
    let yk = y.clone();
    let kn = StarBody::from_fn(
        2,
        "K+null",
        Arc::new(move |u| (kk.radial_pow(u, e) + 0.05 * yk(u)).powf(1.0 / e)),
        BodyFlags { origin_symmetric: true, ..Default::default() },
    );
    let dk = killed_index(c, p, 16);
    if dk == Some(d) {
        let rb = SphereRule::product(n, 24, &[32, 32])?;
        let m_on = |r: &SphereRule| -> Result<f64> {
            let a = r.integrate(&kn.radial_pow_on(r, 4.0))? / 4.0;
            let b = r.integrate(&k.radial_pow_on(r, 4.0))? / 4.0;
            Ok(-p * (a - b))
        };
        let (ma, mb) = (m_on(&full)?, m_on(&rb)?);
        rec.claims.push(Claim::strict("null-perturbation-margin", ma, (ma - mb).abs() + 1e-14));
    }

    // trivial K = L
    let kt = body_from_power("K", random_band_limited(&mut rng, 0.3), e);
    let a = intersection_body(c, p, &kt, &sopts)?.power.values;
    let b = intersection_body(c, p, &kt.clone(), &sopts)?.power.values;
    let t = sup_abs(a.iter().zip(&b).map(|(x, y)| x - y));
    rec.claims.push(Claim::below("trivial-pair-defect", t, 0.0, 0.0));

    rec.settle();
    rec.runtime_s = start.elapsed().as_secs_f64();
    Ok(rec)
}

// ---------------------------------------------------------------- embedding scans

/// Embedding test over bodies and exponents; `expect` sets what counts as a pass.
pub fn embedding_scan(
    id: &str,
    bodies: &[&str],
    ps: &[f64],
    n: usize,
    kmax: u32,
    expect: Verdict,
    seed: u64,
) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let mut rec = ExperimentRecord::new(
        id,
        json!({"bodies": bodies, "p": ps, "n": n, "kmax": kmax, "expect": expect.as_str()}),
        seed,
    );
    let opts = SpectralOptions { kmax, rule_id: None };
    let mut table = Vec::new();
    for spec in bodies {
        let k = StarBody::parse(spec, n)?;
        for &p in ps {
            let r = embed_test(&k, p, &opts)?;
            rec.grid(&r.grid_id.clone());
            let name = format!("embed[{spec},p={p}]");
            let claim = match expect {
                Verdict::Embeds => {
                    let mut c = Claim::above(&name, r.min, -r.error_bar, r.error_bar);
                    c.pass &= r.verdict == Verdict::Embeds;
                    c
                }
                Verdict::Fails => {
                    let mut c = Claim::strict(&name, -r.min, r.error_bar);
                    c.pass &= r.verdict == Verdict::Fails;
                    c
                }
                Verdict::Inconclusive => Claim::flag(&name, true),
            };
            rec.claims.push(claim);
            table.push(r.to_json());
        }
    }
    rec.artifact("table", Value::Array(table));
    rec.settle();
    rec.runtime_s = start.elapsed().as_secs_f64();
    Ok(rec)
}

/// Search for an S^1-invariant convex body in C^2 that fails to embed in L_p, p > 0:
/// the l_q family first, then seeded random band-limited invariant bodies.
pub fn embedding_search_positive(ps: &[f64], seed: u64) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let n = 2;
    let kmax = 64;
    let mut rec = ExperimentRecord::new("embed-search-C2-pos", json!({"p": ps, "n": n, "kmax": kmax}), seed);
    let opts = SpectralOptions { kmax, rule_id: None };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::new();
    for &p in ps {
        let mut hit: Option<EmbedReport> = None;
        for spec in ["lq:3", "lq:4", "lq:6", "lq:8"] {
            let r = embed_test(&StarBody::parse(spec, n)?, p, &opts)?;
            rec.grid(&r.grid_id.clone());
            if r.verdict == Verdict::Fails {
                hit = Some(r);
                break;
            }
        }
        if hit.is_none() {
            for i in 0..20 {
                let k = random_invariant_body(&mut rng, i)?;
                if !geometry_checks(&k, 20_000, seed)?.all_pass() {
                    continue;
                }
                let r = embed_test(&k, p, &opts)?;
                if r.verdict == Verdict::Fails {
                    hit = Some(r);
                    break;
                }
            }
        }
        let name = format!("non-embedding-found[p={p}]");
        match &hit {
            Some(r) => {
                rec.claims.push(Claim::strict(&name, -r.min, r.error_bar));
                found.push(r.to_json());
            }
            None => rec.claims.push(Claim::flag(&name, false)),
        }
    }
    rec.artifact("found", Value::Array(found));
    rec.settle();
    if rec.verdict == RecordVerdict::Fail {
        // a failed search is not evidence either way
        rec.verdict = RecordVerdict::Inconclusive;
    }
    rec.runtime_s = start.elapsed().as_secs_f64();
    Ok(rec)
}

fn random_invariant_body(rng: &mut ChaCha8Rng, i: usize) -> Result<StarBody> {
    let rule = SphereRule::torus_reduced(2, 24)?;
    let mut s = BiDegreeSpectrum::constant(Basis::Invariant2, 8, &rule.id, 1.0);
    for k in 1..=4u32 {
        let a = rng.gen_range(-0.05..0.05) / (k * k) as f64;
        s.components.insert((k, k), vec![c64(a)]);
    }
    let flags = BodyFlags { origin_symmetric: true, s1_invariant: true, torus_invariant: true };
    Ok(StarBody::from_spectrum_power(&format!("random-invariant-{i}"), s, -1.0, flags))
}

// ---------------------------------------------------------------- image counterexamples

#[derive(Debug, Clone, PartialEq)]
pub struct ImageParams {
    pub op: OpKind,
    pub n: usize,
    pub q: f64,
    pub p: f64,
    pub c: PlanarBody,
    pub delta: f64,
    pub kmax: u32,
    /// Degree of the polynomial whose square is the bump.
    pub degree: u32,
}

impl ImageParams {
    pub fn new(op: OpKind, n: usize, q: f64, p: f64) -> Self {
        ImageParams {
            op,
            n,
            q,
            p: if op == OpKind::Pi { 1.0 } else { p },
            c: PlanarBody::disc(),
            delta: if op == OpKind::Pi { 0.2 } else { 0.05 },
            kmax: if n == 2 { 64 } else { 32 },
            degree: 3,
        }
    }

    fn rules(&self) -> Result<(SphereRule, SphereRule)> {
        let pad = if self.n == 2 { 16 } else { 8 };
        let t = self.kmax as usize + pad;
        Ok((SphereRule::torus_reduced(self.n, t)?, SphereRule::torus_reduced(self.n, t - 8)?))
    }
}

/// Inclusion slack and volumes for the I-case from radial power samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCheck {
    /// min of the inclusion defect, relative to `scale`.
    pub slack: f64,
    pub scale: f64,
    /// Strict volume reversal margin (positive when the reversal holds).
    pub margin: f64,
    pub values: Value,
}

/// I-case: rho^{2n+p} samples of K and L on a torus-reduced rule.
pub fn verify_i_image(c: &PlanarBody, p: f64, rule: &SphereRule, fk: &[f64], fl: &[f64], kmax: u32) -> Result<ImageCheck> {
    let n = rule.n;
    let e = 2.0 * n as f64 + p;
    let flags = BodyFlags { origin_symmetric: true, s1_invariant: true, torus_invariant: true };
    let gk = intersection_from_spectrum(c, p, &analyze_real(rule, fk, kmax)?, rule, "K", flags)?.power.values;
    let gl = intersection_from_spectrum(c, p, &analyze_real(rule, fl, kmax)?, rule, "L", flags)?.power.values;
    let rk: Vec<f64> = gk.iter().map(|g| g.powf(-1.0 / p)).collect();
    let rl: Vec<f64> = gl.iter().map(|g| g.powf(-1.0 / p)).collect();
    let scale = sup_abs(rl.iter().copied());
    let slack = rl.iter().zip(&rk).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min) / scale;
    let vk = volume_of(fk, e, n, rule)?;
    let vl = volume_of(fl, e, n, rule)?;
    Ok(ImageCheck { slack, scale, margin: -p * (vk - vl), values: json!({"V_K": vk, "V_L": vl}) })
}

/// Pi-case: surface densities of K and L and h_L on a torus-reduced rule.
pub fn verify_pi_image(c: &PlanarBody, rule: &SphereRule, sk: &[f64], sl: &[f64], hl: &[f64], kmax: u32) -> Result<ImageCheck> {
    let n = rule.n;
    let table = j_table(c, 1.0, n, kmax)?.scaled(0.5);
    let hk = apply_multipliers(&analyze_real(rule, sk, kmax)?, &table)?.samples_re(rule)?;
    let hpl = apply_multipliers(&analyze_real(rule, sl, kmax)?, &table)?.samples_re(rule)?;
    let scale = sup_abs(hpl.iter().copied());
    let slack = hk.iter().zip(&hpl).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min) / scale;
    let m = (2 * n) as f64;
    let a: Vec<f64> = hl.iter().zip(sk).map(|(h, s)| h * s).collect();
    let b: Vec<f64> = hl.iter().zip(sl).map(|(h, s)| h * s).collect();
    let v1 = rule.integrate(&a)? / m;
    let vl = rule.integrate(&b)? / m;
    let bound = certified_volume_bound(v1, vl, n);
    Ok(ImageCheck { slack, scale, margin: vl - bound, values: json!({"V1_K_L": v1, "V_L": vl, "bound": bound}) })
}

/// Lowest generalized eigenvector of <G q, q> / <q, q> over invariant
/// polynomials of bi-degree up to (d,d); returns the samples of q^2 / max q^2
/// and the Rayleigh quotient.
fn bump_from_functional(rule: &SphereRule, g: &[f64], d: u32) -> Result<(Vec<f64>, f64)> {
    let basis = Basis::for_rule(rule)?;
    let mut funcs: Vec<Vec<f64>> = Vec::new();
    for k in 0..=d {
        for idx in 0..basis.block_len(k, k) {
            funcs.push(rule.sample(|u| basis_eval(basis, k, k, idx, u).re));
        }
    }
    let m = funcs.len();
    let w = rule.weights();
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut b = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let aij = neumaier((0..rule.len()).map(|r| w[r] * g[r] * funcs[i][r] * funcs[j][r]));
            let bij = neumaier((0..rule.len()).map(|r| w[r] * funcs[i][r] * funcs[j][r]));
            a[(i, j)] = aij;
            a[(j, i)] = aij;
            b[(i, j)] = bij;
            b[(j, i)] = bij;
        }
    }
    let ch = b.cholesky().ok_or_else(|| Error::Domain("bump basis is degenerate on the rule".into()))?;
    let linv = ch.l().try_inverse().ok_or_else(|| Error::Domain("bump basis is degenerate".into()))?;
    let s = &linv * &a * linv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(s);
    let (imin, lam) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let y = eig.eigenvectors.column(imin).into_owned();
    let coef = linv.transpose() * y;
    let q: Vec<f64> = (0..rule.len()).map(|r| (0..m).map(|i| coef[i] * funcs[i][r]).sum()).collect();
    let qmax = q.iter().map(|x| x * x).fold(0.0, f64::max);
    Ok((q.iter().map(|x| x * x / qmax).collect(), lam))
}

/// Image counterexample: L smoothed from the l_q ball (I) or the l_q norm as
/// support function (Pi), a bump on the negativity set of the Fourier
/// functional, and K from L moved along F_p of the bump.
pub fn image_counterexample(params: &ImageParams, seed: u64) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let ImageParams { op, n, q, p, delta, kmax, degree, .. } = params.clone();
    let c = &params.c;
    let id = format!("image-{}-n{n}-q{q}-p{p}", op.as_str());
    let inputs = json!({"op": op.as_str(), "n": n, "q": q, "p": p, "C": c.label, "delta": delta, "kmax": kmax, "bump_degree": degree});
    let mut rec = ExperimentRecord::new(&id, inputs, seed);
    let (rule, rule2) = params.rules()?;
    rec.grid(&rule.id);
    rec.grid(&rule2.id);

    // the function whose Fourier functional must change sign
    let base = move |u: &[Complex64]| lq_norm(u, q) + delta;
    let w: Vec<f64> = match op {
        OpKind::I => rule.sample(|u| base(u).powf(p)),
        OpKind::Pi => rule.sample(base),
    };
    let label = match op {
        OpKind::I => format!("rho_L^(-p), L = smoothed B_{q}"),
        OpKind::Pi => format!("h_L = |.|_{q} + {delta}"),
    };
    let embed = embed_test_samples(&label, &rule, &w, p, kmax)?;
    rec.artifact("embed", embed.to_json());
    rec.claims.push(Claim::strict("functional-negative", -embed.min, embed.error_bar));
    if embed.verdict != Verdict::Fails {
        rec.verdict = RecordVerdict::Aborted;
        rec.artifact("reason", json!("no negativity set: the Fourier functional is nonnegative within the error bar"));
        rec.runtime_s = start.elapsed().as_secs_f64();
        return Ok(rec);
    }
    let g = &embed.functional.values;
    let (phi, quotient) = bump_from_functional(&rule, g, degree)?;
    let gphi = rule.integrate(&g.iter().zip(&phi).map(|(a, b)| a * b).collect::<Vec<_>>())?;
    let neg_frac = rule.integrate(&g.iter().map(|&x| if x < 0.0 { 1.0 } else { 0.0 }).collect::<Vec<_>>())? / rule.volume();
    rec.artifact("bump", json!({"rayleigh_quotient": quotient, "functional_pairing": gphi, "negativity_fraction": neg_frac}));
    if !(gphi < 0.0) {
        rec.verdict = RecordVerdict::Aborted;
        rec.artifact("reason", json!("bump does not pair negatively with the functional"));
        rec.runtime_s = start.elapsed().as_secs_f64();
        return Ok(rec);
    }
    let kphi = 4 * degree;
    let sphi = analyze_real(&rule, &phi, kphi)?;
    if sphi.residual > 1e-9 {
        return Err(Error::Resolution(format!("bump analysis residual {:.2e}", sphi.residual)));
    }
    let psi = Arc::new(apply_multipliers(&sphi, &f_table(p, n, kphi)?)?);
    let psi_on = |r: &SphereRule| psi.samples_re(r);
    let (psi1, psi2) = (psi_on(&rule)?, psi_on(&rule2)?);
    let psup = sup_abs(psi1.iter().copied());

    let e = 2.0 * n as f64 + p;
    match op {
        OpKind::I => {
            let fl_on = |r: &SphereRule| r.sample(|u| base(u).powf(-e));
            let (fl1, fl2) = (fl_on(&rule), fl_on(&rule2));
            let mut eps = 0.5 * fl1.iter().copied().fold(f64::INFINITY, f64::min) / psup;
            let mut geo = None;
            for _ in 0..16 {
                let ps = psi.clone();
                let rho: RealFn = Arc::new(move |u| (base(u).powf(-e) - eps * ps.eval(u).re).powf(1.0 / e));
                let flags = BodyFlags { origin_symmetric: true, s1_invariant: true, torus_invariant: true };
                let k = StarBody::from_fn(n, "K", rho, flags);
                let r = geometry_checks(&k, 100_000, seed)?;
                if r.all_pass() {
                    geo = Some(r);
                    break;
                }
                eps *= 0.5;
            }
            let Some(geo) = geo else {
                rec.verdict = RecordVerdict::Aborted;
                rec.artifact("reason", json!("no eps passed the geometry checks"));
                rec.runtime_s = start.elapsed().as_secs_f64();
                return Ok(rec);
            };
            rec.artifact("geometry", geo.to_json());
            rec.claims.push(Claim::below("geometry-convexity-defect", geo.convexity.worst, 1e-10, 0.0));
            let fk_of = |fl: &[f64], ps: &[f64], eps: f64| -> Vec<f64> { fl.iter().zip(ps).map(|(a, b)| a - eps * b).collect() };
            let fk1 = fk_of(&fl1, &psi1, eps);
            let c1 = verify_i_image(c, p, &rule, &fk1, &fl1, kmax)?;
            let c2 = verify_i_image(c, p, &rule2, &fk_of(&fl2, &psi2, eps), &fl2, kmax)?;
            let ch = verify_i_image(c, p, &rule, &fk_of(&fl1, &psi1, eps / 2.0), &fl1, kmax)?;
            let bar = (c1.margin - c2.margin).abs() + 1e-14 * c1.values["V_L"].as_f64().unwrap_or(1.0);
            rec.claims.push(Claim::above("inclusion-slack", c1.slack, -1e-8, 0.0));
            rec.claims.push(Claim::strict("volume-reversal-margin", c1.margin, bar));
            rec.claims.push(Claim::within("margin-slope-ratio", c1.margin / ch.margin, 1.8, 2.2, 0.0));
            rec.artifact(
                "check",
                json!({"eps": eps, "slack": c1.slack, "scale": c1.scale, "margin": c1.margin, "error_bar": bar, "values": c1.values}),
            );
            rec.artifact("stored", json!({"rule": rule.id, "kmax": kmax, "f_K": fk1, "f_L": fl1, "margin": c1.margin, "slack": c1.slack}));
        }
        OpKind::Pi => {
            let hfn: RealFn = Arc::new(base);
            let s_on = |r: &SphereRule, step: f64| -> Result<Vec<f64>> {
                surface_density_from_support_step(hfn.clone(), n, r, step)?.density_on(r)
            };
            let (sl1, sl2) = (s_on(&rule, 2e-3)?, s_on(&rule2, 2e-3)?);
            let sl_fine = s_on(&rule, 1e-3)?;
            let (hl1, hl2) = (rule.sample(base), rule2.sample(base));
            let smin = sl1.iter().copied().fold(f64::INFINITY, f64::min);
            let eps = 0.5 * smin / psup;
            let sk_of = |sl: &[f64], ps: &[f64], eps: f64| -> Vec<f64> { sl.iter().zip(ps).map(|(a, b)| a - eps * b).collect() };
            let sk1 = sk_of(&sl1, &psi1, eps);
            let skmin = sk1.iter().copied().fold(f64::INFINITY, f64::min);
            rec.claims.push(Claim::above("surface-density-min", skmin, 0.0, 0.0));
            let c1 = verify_pi_image(c, &rule, &sk1, &sl1, &hl1, kmax)?;
            let c2 = verify_pi_image(c, &rule2, &sk_of(&sl2, &psi2, eps), &sl2, &hl2, kmax)?;
            let ch = verify_pi_image(c, &rule, &sk_of(&sl1, &psi1, eps / 2.0), &sl1, &hl1, kmax)?;
            // V(L) enters the bound; its finite-difference error is bounded by a step change
            let m = (2 * n) as f64;
            let vl_fine = rule.integrate(&hl1.iter().zip(&sl_fine).map(|(h, s)| h * s).collect::<Vec<_>>())? / m;
            let vl = c1.values["V_L"].as_f64().unwrap_or(0.0);
            let bar = (c1.margin - c2.margin).abs() + 1.5 * (vl - vl_fine).abs() + 1e-14 * vl;
            rec.claims.push(Claim::above("inclusion-slack", c1.slack, -1e-8, 0.0));
            rec.claims.push(Claim::strict("certified-volume-margin", c1.margin, bar));
            rec.claims.push(Claim::within("margin-slope-ratio", c1.margin / ch.margin, 1.8, 2.2, 0.0));
            rec.artifact(
                "check",
                json!({"eps": eps, "slack": c1.slack, "scale": c1.scale, "margin": c1.margin, "error_bar": bar, "values": c1.values}),
            );
            rec.artifact(
                "stored",
                json!({"rule": rule.id, "kmax": kmax, "S_K": sk1, "s_L": sl1, "h_L": hl1, "margin": c1.margin, "slack": c1.slack}),
            );
        }
    }
    rec.settle();
    rec.runtime_s = start.elapsed().as_secs_f64();
    Ok(rec)
}

/// Recomputes slack and margin from the bodies stored in an image record and
/// returns the largest deviation from the stored values.
pub fn reverify_image(rec: &ExperimentRecord) -> Result<f64> {
    let st = rec.artifacts.get("stored").ok_or_else(|| Error::Parse(format!("{} has no stored bodies", rec.id)))?;
    let rule = SphereRule::from_id(st["rule"].as_str().unwrap_or_default())?;
    let kmax = st["kmax"].as_u64().unwrap_or(0) as u32;
    let vec_of = |k: &str| -> Result<Vec<f64>> {
        st.get(k)
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse(format!("stored body lacks {k}")))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::Parse("non-numeric sample".into())))
            .collect()
    };
    let c = PlanarBody::parse(rec.inputs["C"].as_str().unwrap_or("disc"))?;
    let p = rec.inputs["p"].as_f64().unwrap_or(-1.0);
    let chk = match rec.inputs["op"].as_str() {
        Some("I") => verify_i_image(&c, p, &rule, &vec_of("f_K")?, &vec_of("f_L")?, kmax)?,
        Some("Pi") => verify_pi_image(&c, &rule, &vec_of("S_K")?, &vec_of("s_L")?, &vec_of("h_L")?, kmax)?,
        _ => return Err(Error::Parse("unknown operator in record".into())),
    };
    let f = |k: &str| st[k].as_f64().unwrap_or(f64::NAN);
    let dm = (chk.margin - f("margin")).abs() / f("margin").abs().max(1e-300);
    let ds = (chk.slack - f("slack")).abs();
    Ok(dm.max(ds))
}

// ---------------------------------------------------------------- registry

/// Experiment ids with a one-line description.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("inj-I-square", "I_{C,-1} injectivity counterexample, C = square"),
    ("inj-I-square-p1", "I_{C,1} injectivity counterexample, C = square"),
    ("inj-I-disc", "I_{D,-1} injectivity counterexample, C = disc"),
    ("inj-Pi-square", "Pi_C injectivity counterexample, C = square"),
    ("adjoint-disc", "adjointness identities and affirmative chain, C = disc"),
    ("adjoint-square", "adjointness identities and affirmative chain, C = rotated square"),
    ("embed-B4-C3", "l_4 ball in C^3 at p = -1"),
    ("embed-lq-C2", "l_q balls in C^2 for p in (-2,0)"),
    ("embed-ball", "Euclidean ball in C^2 and C^3"),
    ("embed-search-C2-pos", "search for non-embedding invariant bodies in C^2, p > 0"),
    ("image-I-n3", "I-image counterexample in C^3, q = 4, p = -1"),
    ("image-Pi-n3", "Pi-image counterexample in C^3, q = 4"),
    ("image-I-n2-disc", "I-image pipeline in C^2, p = -1 (expected to abort)"),
    ("image-I-n2-pos", "I-image counterexample in C^2, q = 4, p = 1/2"),
    ("image-Pi-n2", "Pi-image counterexample in C^2, q = 4"),
];

/// Overrides for experiment runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpConfig {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

pub fn run_experiment(id: &str, cfg: &ExpConfig) -> Result<ExperimentRecord> {
    let seed = cfg.seed.unwrap_or_else(|| seed_for(id));
    let square = PlanarBody::ngon(4)?;
    let mut rec = match id {
        "inj-I-square" => injectivity_counterexample(OpKind::I, &square, -1.0, 0.1, seed)?,
        "inj-I-square-p1" => injectivity_counterexample(OpKind::I, &square, 1.0, 0.1, seed)?,
        "inj-I-disc" => injectivity_counterexample(OpKind::I, &PlanarBody::disc(), -1.0, 0.1, seed)?,
        "inj-Pi-square" => injectivity_counterexample(OpKind::Pi, &square, 1.0, 0.1, seed)?,
        "adjoint-disc" => adjointness_suite(&PlanarBody::disc(), -1.0, cfg.trials.unwrap_or(20), seed)?,
        "adjoint-square" => adjointness_suite(&PlanarBody::parse("ngon:4@0.3")?, -1.0, cfg.trials.unwrap_or(20), seed)?,
        "embed-B4-C3" => embedding_scan(id, &["lq:4"], &[-1.0], 3, 32, Verdict::Fails, seed)?,
        "embed-lq-C2" => embedding_scan(id, &["lq:2.5", "lq:3", "lq:4"], &[-1.5, -1.0, -0.5], 2, 64, Verdict::Embeds, seed)?,
        "embed-ball" => {
            let a = embedding_scan(id, &["ball"], &[-1.0, 0.5, 1.0], 2, 16, Verdict::Embeds, seed)?;
            let b = embedding_scan(id, &["ball"], &[-1.0, 1.0], 3, 16, Verdict::Embeds, seed)?;
            merge(a, b)
        }
        "embed-search-C2-pos" => embedding_search_positive(&[0.5, 1.0], seed)?,
        "image-I-n3" => image_counterexample(&ImageParams::new(OpKind::I, 3, 4.0, -1.0), seed)?,
        "image-Pi-n3" => image_counterexample(&ImageParams::new(OpKind::Pi, 3, 4.0, 1.0), seed)?,
        "image-I-n2-disc" => image_counterexample(&ImageParams::new(OpKind::I, 2, 4.0, -1.0), seed)?,
        "image-I-n2-pos" => image_counterexample(&ImageParams::new(OpKind::I, 2, 4.0, 0.5), seed)?,
        "image-Pi-n2" => image_counterexample(&ImageParams::new(OpKind::Pi, 2, 4.0, 1.0), seed)?,
        _ => return Err(Error::Parse(format!("unknown experiment `{id}`"))),
    };
    rec.id = id.into();
    Ok(rec)
}

fn merge(mut a: ExperimentRecord, b: ExperimentRecord) -> ExperimentRecord {
    a.claims.extend(b.claims);
    for g in b.grids {
        a.grid(&g);
    }
    if let (Some(x), Some(y)) = (a.artifacts.get("table").cloned(), b.artifacts.get("table")) {
        let mut t = x.as_array().cloned().unwrap_or_default();
        t.extend(y.as_array().cloned().unwrap_or_default());
        a.artifact("table", Value::Array(t));
    }
    a.inputs = json!({"parts": [a.inputs.clone(), b.inputs]});
    a.runtime_s += b.runtime_s;
    a.settle();
    a
}

// ---------------------------------------------------------------- summary

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub operator: String,
    pub n: String,
    pub p: String,
    pub status: String,
    pub evidence: Vec<String>,
}

/// The answer table, assembled only from the given records.
pub fn answer_summary(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let get = |id: &str| records.iter().find(|r| r.id == id);
    let status_of = |ids: &[&str], rule: &dyn Fn(&[Option<&ExperimentRecord>]) -> &'static str| -> (String, Vec<String>) {
        let rs: Vec<Option<&ExperimentRecord>> = ids.iter().map(|i| get(i)).collect();
        let ev = ids.iter().zip(&rs).filter(|(_, r)| r.is_some()).map(|(i, _)| i.to_string()).collect();
        if rs.iter().any(|r| r.is_none()) {
            ("not-run".into(), ev)
        } else {
            (rule(&rs).into(), ev)
        }
    };
    let counter = |rs: &[Option<&ExperimentRecord>]| -> &'static str {
        if rs.iter().all(|r| r.is_some_and(|r| r.passed())) {
            "counterexample-found"
        } else {
            "search-inconclusive"
        }
    };
    let mut rows = Vec::new();
    let mut push = |op: &str, n: &str, p: &str, (status, evidence): (String, Vec<String>)| {
        rows.push(SummaryRow { operator: op.into(), n: n.into(), p: p.into(), status, evidence });
    };
    push(
        "I_{D,p}",
        "2",
        "p<0",
        status_of(&["embed-lq-C2", "image-I-n2-disc"], &|rs| {
            let scan = rs[0].is_some_and(|r| r.passed());
            let abort = rs[1].is_some_and(|r| r.verdict == RecordVerdict::Aborted);
            if scan && abort {
                "affirmative-evidence"
            } else {
                "search-inconclusive"
            }
        }),
    );
    push("I_{D,p}", "2", "p>0", status_of(&["embed-search-C2-pos", "image-I-n2-pos"], &counter));
    push("Pi_D", "2", "p=1", status_of(&["embed-search-C2-pos", "image-Pi-n2"], &counter));
    push("I_{C,p}, C not injective", "2", "p<0", status_of(&["inj-I-square"], &counter));
    push("I_{C,p}, C not injective", "2", "p>0", status_of(&["inj-I-square-p1"], &counter));
    push("Pi_C, C not injective", "2", "p=1", status_of(&["inj-Pi-square"], &counter));
    push("I_{C,p}", "3", "p<0", status_of(&["embed-B4-C3", "image-I-n3"], &counter));
    push("Pi_C", "3", "p=1", status_of(&["image-Pi-n3"], &counter));
    push("any", ">=4", "any", ("out-of-desk-scope".into(), vec![]));
    rows
}

pub fn summary_json(rows: &[SummaryRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| json!({"operator": r.operator, "n": r.n, "p": r.p, "status": r.status, "evidence": r.evidence}))
            .collect(),
    )
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("operator,n,p,status,evidence\n");
    for r in rows {
        s.push_str(&format!("\"{}\",{},{},{},{}\n", r.operator, r.n, r.p, r.status, r.evidence.join(";")));
    }
    s
}
