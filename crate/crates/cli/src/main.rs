//! `cxbody`: command-line front end for the complex body operators.
//!
//! Exit codes: 0 when every requested check passes, 2 when inconclusive,
//! 1 on errors or failed checks, 64 on usage errors.

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use cxbody_core::bodies::{load_grid, named_harmonic, Density, PlanarBody, StarBody, SurfaceMeasureData};
use cxbody_core::experiments::{
    answer_summary, canonical_json, reverify_image, run_experiment, summary_csv, summary_json, ExpConfig, ExperimentRecord,
    RecordVerdict, EXPERIMENTS,
};
use cxbody_core::geometry::{dual_mixed_volume, mixed_volume_v1, verify_dual_lp, verify_minkowski_first, volume};
use cxbody_core::operators::{
    centroid_body, embed_test, f_table, factorized_j_table, intersection_body, intersection_body_quadrature, j_table,
    nu_measure, projection_body, t_table, JQuadrature, SpectralOptions, Verdict,
};
use cxbody_core::spheregrid::SphereRule;
use cxbody_core::{Error, Result};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const EXIT_OK: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "cxbody", version, about = "Complex intersection, projection and centroid bodies")]
struct Cli {
    /// key=value file with defaults for any flag; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: CXBODY_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the artifact to a file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableKind {
    J,
    F,
    T,
    /// F_{-2n-p} T_nu / (2 pi)^2.
    Factorized,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    kmax: u32,
    /// Sphere grid id, e.g. s3:48x64x64 or s5t:24.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_enum, ignore_case = true, default_value_t = Format::Json)]
    out: Format,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Multiplier tables of J_{C,p}, F_q or T_nu.
    #[command(args_override_self = true)]
    Multipliers {
        #[arg(long, value_enum, ignore_case = true, default_value_t = TableKind::J)]
        kind: TableKind,
        #[arg(long = "C", default_value = "disc")]
        c: String,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        p: f64,
        /// Exponent of F_q (defaults to p).
        #[arg(long, allow_hyphen_values = true)]
        q: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// The circle measure nu_{C,p}.
    #[command(args_override_self = true)]
    Nu {
        #[arg(long = "C", default_value = "disc")]
        c: String,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        p: f64,
        #[arg(long, default_value_t = 32)]
        mmax: u32,
    },
    /// Complex L_p intersection body.
    #[command(args_override_self = true)]
    Ibody {
        #[arg(long = "C", default_value = "disc")]
        c: String,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        p: f64,
        #[arg(long = "K", default_value = "ball")]
        k: String,
        /// Also evaluate by the adapted quadrature at the nodes of this grid.
        #[arg(long)]
        check_grid: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Complex projection body from a surface-area measure.
    #[command(args_override_self = true)]
    Pbody {
        #[arg(long = "C", default_value = "disc")]
        c: String,
        /// `uniform`, `harm:NAME:EPS` (density 1 + EPS Y) or `density-grid:FILE`.
        #[arg(long = "SK", default_value = "uniform")]
        sk: String,
        #[command(flatten)]
        common: Common,
    },
    /// Complex centroid body.
    #[command(args_override_self = true)]
    Cbody {
        #[arg(long = "C", default_value = "disc")]
        c: String,
        #[arg(long = "K", default_value = "ball")]
        k: String,
        #[command(flatten)]
        common: Common,
    },
    /// L_p embedding test.
    #[command(args_override_self = true)]
    Embed {
        #[arg(long = "K", default_value = "ball")]
        k: String,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        p: f64,
        /// Expected verdict; a mismatch is a failed check.
        #[arg(long)]
        expect: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Volume of a star body.
    #[command(args_override_self = true)]
    Vol {
        #[arg(long = "K", default_value = "ball")]
        k: String,
        #[command(flatten)]
        common: Common,
    },
    /// Dual mixed volume.
    #[command(args_override_self = true)]
    Dmv {
        #[arg(long = "K", default_value = "ball")]
        k: String,
        #[arg(long = "L", default_value = "ball")]
        l: String,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        p: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Dual L_p Minkowski or Minkowski's first inequality.
    #[command(args_override_self = true)]
    Ineq {
        /// `dual-lp` or `minkowski-first`.
        #[arg(long, default_value = "dual-lp")]
        kind: String,
        #[arg(long = "K", default_value = "ball")]
        k: String,
        #[arg(long = "L", default_value = "ball")]
        l: String,
        /// Surface measure of K for `minkowski-first`.
        #[arg(long = "SK", default_value = "uniform")]
        sk: String,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        p: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Experiments.
    Exp {
        #[command(subcommand)]
        action: ExpAction,
    },
    /// Answer table assembled from persisted experiment records.
    #[command(args_override_self = true)]
    Summary {
        /// Directory with `<id>.json` records.
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        #[arg(long, value_enum, ignore_case = true, default_value_t = Format::Json)]
        out: Format,
    },
}

#[derive(Subcommand, Debug)]
enum ExpAction {
    /// Run one experiment or `all`.
    #[command(args_override_self = true)]
    Run {
        id: String,
        /// Directory for `<id>.json` records (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List experiment ids.
    List,
    /// Recompute slack and margins from a persisted image record.
    Verify {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

// ---------------------------------------------------------------- config merging

fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splices `--key value` pairs from the config file in front of the user's
/// flags for the selected subcommand, so that explicit flags override them.
fn merge_config(argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let mut config = None;
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--config" {
            config = argv.get(i + 1).cloned();
            break;
        }
        if let Some(v) = argv[i].strip_prefix("--config=") {
            config = Some(v.to_string());
            break;
        }
        i += 1;
    }
    let Some(path) = config else { return Ok(argv) };
    let pairs = read_config(Path::new(&path)).map_err(|e| e.to_string())?;
    let cmd = Cli::command();
    let verbs: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let Some(vpos) = argv.iter().skip(1).position(|a| verbs.contains(a)).map(|p| p + 1) else {
        return Ok(argv);
    };
    let mut sub = cmd.find_subcommand(&argv[vpos]).cloned();
    let mut insert = vpos + 1;
    if argv[vpos] == "exp" {
        if let Some(action) = argv.get(vpos + 1) {
            sub = sub.and_then(|s| s.find_subcommand(action).cloned());
            insert = vpos + 2;
            // keep positionals of `exp run` ahead of the spliced flags
            if action == "run" && argv.get(insert).is_some_and(|a| !a.starts_with('-')) {
                insert += 1;
            }
        }
    }
    let Some(sub) = sub else { return Ok(argv) };
    let known: Vec<String> = sub.get_arguments().filter_map(|a| a.get_long().map(String::from)).collect();
    let mut extra = Vec::new();
    for (k, v) in pairs {
        if k == "threads" && !argv.iter().any(|a| a == "--threads") {
            extra.push("--threads".to_string());
            extra.push(v);
        } else if known.contains(&k) {
            extra.push(format!("--{k}"));
            extra.push(v);
        }
    }
    let insert = insert.min(argv.len());
    let mut out = argv[..insert].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[insert..]);
    Ok(out)
}

/// Resolved flag values of the innermost subcommand, for reports.
fn resolved(m: &clap::ArgMatches) -> Value {
    let mut cur = m;
    while let Some((_, sm)) = cur.subcommand() {
        cur = sm;
    }
    let mut map = BTreeMap::new();
    for id in cur.ids() {
        let id = id.as_str();
        // argument groups are named after their structs
        if id.starts_with(|c: char| c.is_ascii_uppercase()) {
            continue;
        }
        if let Ok(Some(raw)) = cur.try_get_raw(id) {
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            map.insert(id.to_string(), if vals.len() == 1 { json!(vals[0]) } else { json!(vals) });
        }
    }
    json!(map)
}

// ---------------------------------------------------------------- helpers

struct Output {
    path: Option<PathBuf>,
}

impl Output {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(Error::from),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn json(&self, v: &Value) -> Result<()> {
        self.emit(&canonical_json(v))
    }
}

fn opts(c: &Common) -> SpectralOptions {
    SpectralOptions { kmax: c.kmax, rule_id: c.grid.clone() }
}

fn rule_for(c: &Common, torus: bool) -> Result<SphereRule> {
    match &c.grid {
        Some(id) => SphereRule::from_id(id),
        None => cxbody_core::operators::analysis_rule(c.n, torus, &opts(c)),
    }
}

fn parse_measure(spec: &str, n: usize) -> Result<SurfaceMeasureData> {
    if spec == "uniform" {
        return Ok(SurfaceMeasureData::uniform(n));
    }
    if let Some(r) = spec.strip_prefix("harm:") {
        let (name, eps) = r.split_once(':').ok_or_else(|| Error::Parse(format!("`{spec}`: expected harm:NAME:EPS")))?;
        let eps: f64 = eps.parse().map_err(|e| Error::Parse(format!("`{spec}`: {e}")))?;
        let y = named_harmonic(name, n)?;
        return Ok(SurfaceMeasureData::from_fn(n, spec, Arc::new(move |u| 1.0 + eps * y(u))));
    }
    if let Some(path) = spec.strip_prefix("density-grid:") {
        let (rule, samples) = load_grid(path, n)?;
        return Ok(SurfaceMeasureData {
            n,
            density: Some(Density::Grid { rule: Arc::new(rule), samples }),
            atoms: vec![],
            even: true,
            label: spec.into(),
        });
    }
    Err(Error::Parse(format!("unknown surface measure `{spec}`")))
}

fn kv_csv(pairs: &[(&str, f64)]) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in pairs {
        s.push_str(&format!("{k},{}\n", cxbody_core::experiments::fmt_f64(*v)));
    }
    s
}

fn write_record(dir: &Path, rec: &ExperimentRecord) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{}.json", rec.id)), canonical_json(&rec.to_json(true)))?;
    Ok(())
}

fn load_records(dir: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut out = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.extension().is_some_and(|e| e == "json") {
            let v: Value = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
            out.push(ExperimentRecord::from_json(&v)?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- verbs

fn run(cli: Cli, config: Value) -> Result<u8> {
    let out = Output { path: cli.output.clone() };
    match cli.verb {
        Verb::Multipliers { kind, c, p, q, common } => {
            let cb = PlanarBody::parse(&c)?;
            let (n, kmax) = (common.n, common.kmax);
            let table = match kind {
                TableKind::J => j_table(&cb, p, n, kmax)?,
                TableKind::F => f_table(q.unwrap_or(p), n, kmax)?,
                TableKind::T => t_table(&nu_measure(&cb, p, kmax.max(8))?.measure, n, kmax),
                TableKind::Factorized => factorized_j_table(&cb, p, n, kmax)?,
            };
            match common.out {
                Format::Json => out.json(&json!({"config": config, "table": table.to_json()}))?,
                Format::Csv => out.emit(&table.to_csv())?,
            }
            Ok(EXIT_OK)
        }
        Verb::Nu { c, p, mmax } => {
            let nu = nu_measure(&PlanarBody::parse(&c)?, p, mmax)?;
            out.json(&json!({"config": config, "nu": nu.to_json()}))?;
            Ok(EXIT_OK)
        }
        Verb::Ibody { c, p, k, check_grid, common } => {
            let cb = PlanarBody::parse(&c)?;
            let body = StarBody::parse(&k, common.n)?;
            let r = intersection_body(&cb, p, &body, &opts(&common))?;
            let rho: Vec<f64> = r.power.values.iter().map(|g| g.powf(-1.0 / p)).collect();
            let mut v = json!({
                "config": config,
                "grid-id": r.power.rule.id,
                "values": rho,
                "power": r.power.to_json()?,
                "error-bars": {"input_residual": r.input_residual},
                "provenance": "spectral",
            });
            if let Some(g) = check_grid {
                let rule = SphereRule::from_id(&g)?;
                let pts: Vec<Vec<_>> = rule.points().map(|u| u.to_vec()).collect();
                let qv = intersection_body_quadrature(&cb, p, &body, &pts, &JQuadrature::default())?;
                v["quadrature"] = json!({"grid-id": g, "values": qv});
            }
            out.json(&v)?;
            Ok(EXIT_OK)
        }
        Verb::Pbody { c, sk, common } => {
            let cb = PlanarBody::parse(&c)?;
            let m = parse_measure(&sk, common.n)?;
            let h = projection_body(&cb, &m, false, &opts(&common))?;
            out.json(&json!({
                "config": config,
                "grid-id": h.rule.id,
                "values": h.values,
                "min": h.min(),
                "max": h.max(),
                "error-bars": {"analysis_residual": h.spectrum.residual},
                "provenance": "spectral",
            }))?;
            Ok(EXIT_OK)
        }
        Verb::Cbody { c, k, common } => {
            let cb = PlanarBody::parse(&c)?;
            let body = StarBody::parse(&k, common.n)?;
            let h = centroid_body(&cb, &body, &opts(&common))?;
            out.json(&json!({
                "config": config,
                "grid-id": h.rule.id,
                "values": h.values,
                "min": h.min(),
                "max": h.max(),
                "error-bars": {"analysis_residual": h.spectrum.residual},
                "provenance": "spectral",
            }))?;
            Ok(EXIT_OK)
        }
        Verb::Embed { k, p, expect, common } => {
            let body = StarBody::parse(&k, common.n)?;
            let r = embed_test(&body, p, &opts(&common))?;
            out.json(&json!({"config": config, "report": r.to_json()}))?;
            let code = match (r.verdict, expect.as_deref()) {
                (Verdict::Inconclusive, _) => EXIT_INCONCLUSIVE,
                (v, Some(e)) if v.as_str() != e => EXIT_FAIL,
                _ => EXIT_OK,
            };
            Ok(code)
        }
        Verb::Vol { k, common } => {
            let body = StarBody::parse(&k, common.n)?;
            let rule = match &common.grid {
                Some(id) => SphereRule::from_id(id)?,
                None => cxbody_core::geometry::volume_rule(&body)?,
            };
            let v = volume(&body, &rule)?;
            match common.out {
                Format::Json => out.json(&json!({"config": config, "grid-id": rule.id, "volume": v}))?,
                Format::Csv => out.emit(&kv_csv(&[("volume", v)]))?,
            }
            Ok(EXIT_OK)
        }
        Verb::Dmv { k, l, p, common } => {
            let kb = StarBody::parse(&k, common.n)?;
            let lb = StarBody::parse(&l, common.n)?;
            let torus = kb.flags.torus_invariant && lb.flags.torus_invariant;
            let rule = rule_for(&common, torus)?;
            let v = dual_mixed_volume(p, &kb, &lb, &rule)?;
            match common.out {
                Format::Json => out.json(&json!({"config": config, "grid-id": rule.id, "dual_mixed_volume": v}))?,
                Format::Csv => out.emit(&kv_csv(&[("dual_mixed_volume", v)]))?,
            }
            Ok(EXIT_OK)
        }
        Verb::Ineq { kind, k, l, sk, p, tol, common } => {
            let lb = StarBody::parse(&l, common.n)?;
            let report = match kind.as_str() {
                "dual-lp" => {
                    let kb = StarBody::parse(&k, common.n)?;
                    let torus = kb.flags.torus_invariant && lb.flags.torus_invariant;
                    let rule = rule_for(&common, torus)?;
                    verify_dual_lp(p, &kb, &lb, &rule)?
                }
                "minkowski-first" => {
                    let m = parse_measure(&sk, common.n)?;
                    let h = lb.support.clone().ok_or_else(|| Error::NotEvaluable(format!("{l} has no support function")))?;
                    let rule = match &m.density {
                        Some(Density::Grid { rule, .. }) => (**rule).clone(),
                        _ => rule_for(&common, false)?,
                    };
                    let hs = rule.sample(|u| h(u));
                    let v1 = mixed_volume_v1(&m, &rule, &hs, &*h)?;
                    let vl = volume(&lb, &rule)?;
                    verify_minkowski_first(common.n, v1, None, vl)
                }
                other => return Err(Error::Parse(format!("unknown inequality `{other}`"))),
            };
            out.json(&json!({"config": config, "report": report.to_json()}))?;
            let ok = if report.margin.is_nan() { report.certified_bound.is_some() } else { report.holds(tol) };
            Ok(if ok { EXIT_OK } else { EXIT_FAIL })
        }
        Verb::Exp { action } => match action {
            ExpAction::List => {
                let mut s = String::new();
                for (id, d) in EXPERIMENTS {
                    s.push_str(&format!("{id}\t{d}\n"));
                }
                out.emit(&s)?;
                Ok(EXIT_OK)
            }
            ExpAction::Run { id, out: dir, trials, seed } => {
                let cfg = ExpConfig { trials, seed };
                let ids: Vec<&str> = if id == "all" { EXPERIMENTS.iter().map(|e| e.0).collect() } else { vec![id.as_str()] };
                let mut code = EXIT_OK;
                let mut all = Vec::new();
                for id in ids {
                    let rec = run_experiment(id, &cfg)?;
                    code = code.max(match rec.verdict {
                        RecordVerdict::Pass => EXIT_OK,
                        RecordVerdict::Aborted | RecordVerdict::Inconclusive => EXIT_INCONCLUSIVE,
                        RecordVerdict::Fail => EXIT_FAIL,
                    });
                    eprintln!("{id}: {} ({:.1} s)", rec.verdict.as_str(), rec.runtime_s);
                    match &dir {
                        Some(d) => write_record(d, &rec)?,
                        None => all.push(rec.to_json(true)),
                    }
                }
                if dir.is_none() {
                    let v = if all.len() == 1 { all.pop().unwrap_or(Value::Null) } else { Value::Array(all) };
                    out.json(&v)?;
                }
                Ok(code)
            }
            ExpAction::Verify { file, tol } => {
                let v: Value = serde_json::from_str(&std::fs::read_to_string(&file)?)?;
                let rec = ExperimentRecord::from_json(&v)?;
                let dev = reverify_image(&rec)?;
                out.json(&json!({"id": rec.id, "deviation": dev, "tolerance": tol, "pass": dev <= tol}))?;
                Ok(if dev <= tol { EXIT_OK } else { EXIT_FAIL })
            }
        },
        Verb::Summary { runs, out: fmt } => {
            let recs = load_records(&runs)?;
            let rows = answer_summary(&recs);
            match fmt {
                Format::Json => out.json(&json!({"config": config, "summary": summary_json(&rows)}))?,
                Format::Csv => out.emit(&summary_csv(&rows))?,
            }
            Ok(EXIT_OK)
        }
    }
}

fn init_threads(flag: Option<usize>) -> std::result::Result<(), String> {
    let env = std::env::var("CXBODY_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok());
    if let Some(t) = flag.or(env) {
        rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAIL);
    }
    let config = resolved(&matches);
    match run(cli, config) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
