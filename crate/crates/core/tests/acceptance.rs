//! Acceptance checks. Runs without the libtest harness so that every criterion
//! prints its PASS/FAIL line; exits non-zero if any criterion fails.

use cxbody_core::bodies::{PlanarBody, StarBody, SurfaceMeasureData};
use cxbody_core::experiments::{canonical_json, random_band_limited, reverify_image, run_experiment, ExpConfig, ExperimentRecord};
use cxbody_core::geometry::volume_auto;
use cxbody_core::harmonics::analyze_real;
use cxbody_core::operators::{
    apply_j_quadrature, centroid_body, f_multiplier, factorized_j_table, fourier_inversion_defect, intersection_body, j_table, projection_body,
    JQuadrature, SpectralOptions,
};
use cxbody_core::specialfn::disk_poly;
use cxbody_core::spheregrid::{gauss_legendre_on, SphereRule};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

type Check = Result<(bool, String), String>;

fn claim_value(rec: &ExperimentRecord, name: &str) -> Result<f64, String> {
    rec.claim(name).map(|c| c.value).ok_or_else(|| format!("{} lacks claim {name}", rec.id))
}

fn run(id: &str, cfg: &ExpConfig) -> Result<ExperimentRecord, String> {
    run_experiment(id, cfg).map_err(|e| format!("{id}: {e}"))
}

/// int_0^{2 pi} h_{ngon:k}(theta)^p e^{i m theta} d theta, arc by arc.
fn ngon_moments(k: usize, p: f64, mmax: i32) -> Vec<Complex64> {
    let (x, w) = gauss_legendre_on(40, -PI / k as f64, PI / k as f64);
    (-mmax..=mmax)
        .map(|m| {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..k {
                // on this arc the active vertex is e^{2 pi i j/k}
                let phi = 2.0 * PI * j as f64 / k as f64;
                for (t, wi) in x.iter().zip(&w) {
                    s += Complex64::from_polar(wi * t.cos().powf(p), m as f64 * (t + phi));
                }
            }
            s
        })
        .collect()
}

fn moments(c: &str, p: f64, mmax: i32) -> Vec<Complex64> {
    match c {
        "disc" => (-mmax..=mmax).map(|m| Complex64::new(if m == 0 { 2.0 * PI } else { 0.0 }, 0.0)).collect(),
        _ => ngon_moments(c.trim_start_matches("ngon:").parse().unwrap(), p, mmax),
    }
}

fn close(a: Complex64, b: Complex64, scale: f64) -> f64 {
    let d = (a - b).norm();
    let m = a.norm().max(b.norm());
    if m > 1e-12 * scale {
        d / m
    } else {
        d / scale
    }
}

fn c1_factorization() -> Check {
    let mut secs = 0.0;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for c in ["disc", "ngon:4", "ngon:6"] {
        let body = PlanarBody::parse(c).map_err(|e| e.to_string())?;
        for p in [-1.5, -1.0, -0.5, 0.5, 1.0] {
            for n in [2usize, 3] {
                let start = Instant::now();
                let tab = j_table(&body, p, n, 24).map_err(|e| e.to_string())?;
                let fac = factorized_j_table(&body, p, n, 24).map_err(|e| e.to_string())?;
                secs += start.elapsed().as_secs_f64();
                let mom = moments(c, p, 24);
                let scale = tab.entries.values().map(|z| z.norm()).fold(0.0, f64::max);
                for (&(k, l), lam) in &tab.entries {
                    if (k + l) % 2 != 0 {
                        continue;
                    }
                    let m = k as i32 - l as i32;
                    let t = mom[(m + 24) as usize] * f_multiplier(1, p, m.unsigned_abs()).map_err(|e| e.to_string())?;
                    let f = f_multiplier(n, -2.0 * n as f64 - p, k + l).map_err(|e| e.to_string())?;
                    let rhs = t * f;
                    let lhs = lam * (4.0 * PI * PI);
                    worst = worst.max(close(lhs, rhs, scale * 4.0 * PI * PI));
                    worst = worst.max(close(*lam, fac.get(k, l).ok_or("missing factorized entry")?, scale));
                    count += 1;
                }
            }
        }
    }
    Ok((worst < 1e-10 && secs < 1.0, format!("{count} entries, worst relative error {worst:.2e}, both sides built in {secs:.3} s")))
}

fn c2_quadrature() -> Check {
    let start = Instant::now();
    let q = JQuadrature::default();
    let points = vec![
        vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        vec![Complex64::from_polar(0.6, 0.4), Complex64::from_polar(0.8, 0.7)],
    ];
    let mut worst: f64 = 0.0;
    for c in ["disc", "ngon:4", "ngon:4@0.3"] {
        let body = PlanarBody::parse(c).map_err(|e| e.to_string())?;
        for p in [-1.0, -0.5, 0.5, 1.0] {
            let tab = j_table(&body, p, 2, 8).map_err(|e| e.to_string())?;
            let scale = tab.entries.values().map(|z| z.norm()).fold(0.0, f64::max);
            for (&(k, l), lam) in &tab.entries {
                let zonal = |v: &[Complex64]| disk_poly(2, k, l, v[0]).unwrap();
                let got = apply_j_quadrature(&body, p, 2, zonal, &points, &q).map_err(|e| e.to_string())?;
                for (u, g) in points.iter().zip(&got) {
                    let want = lam * zonal(u);
                    worst = worst.max((g - want).norm() / lam.norm().max(1e-3 * scale));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst < 1e-4 && secs < 120.0, format!("worst relative error {worst:.2e}, {secs:.1} s")))
}

fn c3_inversion() -> Check {
    let rule = SphereRule::default_for(2).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut constant = 0.0;
    for _ in 0..8 {
        let f = random_band_limited(&mut rng, 0.5);
        let s = analyze_real(&rule, &rule.sample(|u| f(u)), 8).map_err(|e| e.to_string())?;
        for p in [-1.5, -1.0, -0.5, 0.5, 1.0, 1.5] {
            let (err, c) = fourier_inversion_defect(&s, p, &rule).map_err(|e| e.to_string())?;
            worst = worst.max(err);
            constant = c;
        }
    }
    let expected = (2.0 * PI).powi(4);
    Ok((
        worst < 1e-8 && (constant - expected).abs() < 1e-9 * expected,
        format!("worst error {worst:.2e}; constant (2 pi)^(2n) = {constant:.10}, the (2 pi)^n form is off by (2 pi)^n"),
    ))
}

fn spread(v: &[f64], target: f64) -> f64 {
    v.iter().map(|x| (x / target - 1.0).abs()).fold(0.0, f64::max)
}

fn c4_closed_forms() -> Check {
    let opts = SpectralOptions::default();
    let disc = PlanarBody::disc();
    let ball = StarBody::ball(2);
    let ib = intersection_body(&disc, -1.0, &ball, &opts).map_err(|e| e.to_string())?;
    let rule = SphereRule::default_for(2).map_err(|e| e.to_string())?;
    let e1 = spread(&ib.body.radial_on(&rule), 4.0 * PI * PI / 3.0);
    let pb = projection_body(&disc, &SurfaceMeasureData::uniform(2), false, &opts).map_err(|e| e.to_string())?;
    let e2 = spread(&pb.values, 2.0 * PI * PI / 3.0);
    let cb = centroid_body(&disc, &ball, &opts).map_err(|e| e.to_string())?;
    let e3 = spread(&cb.values, 8.0 / 15.0);
    let v = volume_auto(&StarBody::lq(2, 4.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let e4 = (v / (PI.powi(3) / 4.0) - 1.0).abs();
    let worst = e1.max(e2).max(e3).max(e4);
    Ok((worst < 1e-6, format!("I {e1:.1e}, Pi {e2:.1e}, Gamma {e3:.1e}, V(B_4) {e4:.1e}")))
}

fn c5_adjointness() -> Check {
    let cfg = ExpConfig { trials: Some(20), seed: None };
    let mut parts = vec![];
    let mut ok = true;
    for id in ["adjoint-disc", "adjoint-square"] {
        let rec = run(id, &cfg)?;
        let a = claim_value(&rec, "dual-mixed-adjointness")?;
        let b = claim_value(&rec, "mixed-volume-adjointness")?;
        ok &= a < 1e-5 && b < 1e-4 && rec.passed();
        parts.push(format!("{id}: dual {a:.1e}, first {b:.1e}, verdict {}", rec.verdict.as_str()));
    }
    Ok((ok, parts.join("; ")))
}

fn c6_injectivity_i() -> Check {
    let start = Instant::now();
    let rec = run("inj-I-square", &ExpConfig::default())?;
    let secs = start.elapsed().as_secs_f64();
    let slack = claim_value(&rec, "equality-slack-quadrature")?;
    let dv = rec.artifacts["volumes"]["volume_difference"].as_f64().ok_or("no volume_difference")?;
    // second-order estimate eps^2 pi^2 / 54 at eps = 0.1
    let est = 0.01 * PI * PI / 54.0;
    let ok = slack < 1e-6 && (1.5e-3..=2.2e-3).contains(&dv) && secs < 300.0 && rec.passed();
    Ok((ok, format!("slack {slack:.1e}, V(K) - V(ball) = {dv:.5e} (estimate {est:.5e}), {secs:.1} s")))
}

fn c7_injectivity_pi() -> Check {
    let rec = run("inj-Pi-square", &ExpConfig::default())?;
    let slack = claim_value(&rec, "equality-slack-quadrature")?;
    let c = rec.claim("certified-volume-margin").ok_or("no certified-volume-margin")?;
    let ok = slack < 1e-6 && c.value > 5.0 * c.error_bar && rec.passed();
    Ok((ok, format!("slack {slack:.1e}, margin {:.4e} vs bar {:.1e}", c.value, c.error_bar)))
}

fn c8_embedding() -> Check {
    let start = Instant::now();
    let b4 = run("embed-B4-C3", &ExpConfig::default())?;
    let secs = start.elapsed().as_secs_f64();
    let t = &b4.artifacts["table"][0];
    let (min, bar) = (t["min"].as_f64().ok_or("no min")?, t["error_bar"].as_f64().ok_or("no error_bar")?);
    let lq = run("embed-lq-C2", &ExpConfig::default())?;
    let worst = lq.claims.iter().map(|c| c.value + c.error_bar).fold(f64::INFINITY, f64::min);
    let ok = min < 0.0 && -min > 5.0 * bar && secs <= 600.0 && b4.passed() && lq.passed() && worst >= 0.0;
    Ok((
        ok,
        format!("B_4 in C^3: min {min:.4e}, bar {bar:.1e}, {secs:.1} s; l_q in C^2: {} cases, verdict {}", lq.claims.len(), lq.verdict.as_str()),
    ))
}

fn c9_images() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut parts = vec![];
    let mut ok = true;
    for (id, margin) in [("image-I-n3", "volume-reversal-margin"), ("image-Pi-n3", "certified-volume-margin")] {
        let rec = run(id, &ExpConfig::default())?;
        let path = dir.path().join(format!("{id}.json"));
        std::fs::write(&path, canonical_json(&rec.to_json(true))).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let back = ExperimentRecord::from_json(&serde_json::from_str(&text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let dev = reverify_image(&back).map_err(|e| e.to_string())?;
        let slack = claim_value(&back, "inclusion-slack")?;
        let m = back.claim(margin).ok_or("no margin claim")?;
        ok &= back.passed() && dev <= 1e-10 && slack >= -1e-8 && m.value > 5.0 * m.error_bar;
        parts.push(format!("{id}: slack {slack:.1e}, margin {:.3e} vs bar {:.1e}, reload deviation {dev:.1e}", m.value, m.error_bar));
    }
    Ok((ok, parts.join("; ")))
}

fn c10_determinism() -> Check {
    let cfg = ExpConfig { trials: Some(2), seed: None };
    let mut parts = vec![];
    let mut ok = true;
    for id in ["inj-I-square", "adjoint-square", "embed-lq-C2", "image-I-n3"] {
        let mut outs = vec![];
        for t in [1, 4, 8] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().map_err(|e| e.to_string())?;
            let rec = pool.install(|| run(id, &cfg))?;
            outs.push(canonical_json(&rec.to_json(false)));
        }
        let same = outs.windows(2).all(|w| w[0] == w[1]);
        ok &= same;
        parts.push(format!("{id} {}", if same { "identical" } else { "differs" }));
    }
    Ok((ok, parts.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("multiplier factorization", c1_factorization),
        ("quadrature vs closed form", c2_quadrature),
        ("Fourier inversion", c3_inversion),
        ("closed-form bodies", c4_closed_forms),
        ("adjointness identities", c5_adjointness),
        ("I injectivity counterexample", c6_injectivity_i),
        ("Pi injectivity counterexample", c7_injectivity_pi),
        ("embedding scans", c8_embedding),
        ("image counterexamples", c9_images),
        ("thread-count determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
