//! `rotlab` command line: chain construction, verification sections, reports
//! and CSV series.
//!
//! Exit codes: 0 when every check passes, 1 on a verification failure, 2 on
//! usage or construction errors. Data files never carry timestamps; run
//! metadata goes to a `.meta.json` sidecar next to them.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::analysis::{
    correlation, deviation_at_resonance, deviation_profile, profile_csv, weak_rotation_estimate, Kind, PAIRING_NOTE,
};
use crate::error::{Error, Result};
use crate::field::TruncatedField;
use crate::flow::{cross_validate, integrate_ode, rk4_error_bound, sample_closed_form, solve_closed_form, ClosedFormTrajectory};
use crate::liouville::{build_resonant_sequence, chain_json, verify_chain, LiouvilleSpec};
use crate::precision::{format_sig, parse_rational, rational_string, BigRational, PrecisionPolicy, RealHp};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SeriesKind {
    Trajectory,
    Deviation,
    Field,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ConfigArgs {
    /// Flat key=value file with the same keys as the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub base: Option<u64>,
    /// Liouville truncation order.
    #[arg(long = "K", global = true)]
    pub k: Option<usize>,
    /// Number of resonant modes.
    #[arg(long = "M", global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub bits: Option<u32>,
    /// Comma-separated horizon ladder, e.g. 1e6,1e12,1e20.
    #[arg(long = "T", global = true)]
    pub t: Option<String>,
    #[arg(long = "k-max", global = true)]
    pub k_max: Option<u32>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Parser, Debug)]
#[command(name = "rotlab", version, about = "Weak-but-not-strong rotation on the 3-torus, verified in exact arithmetic")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build and verify the resonant chain.
    Sequence,
    /// Smoothness majorants, tail bound and sampled field checks.
    FieldCheck,
    /// Closed form against RK4.
    Simulate {
        #[arg(long, default_value = "100")]
        t_end: String,
        #[arg(long, default_value = "1/100")]
        step: String,
        #[arg(long, default_value = "1e-8")]
        tol: String,
    },
    /// x3 at each resonance time with certified lower bounds.
    Deviation,
    /// Time averages of x3 against the resonant sines and cosines.
    Correlation {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        kind: Option<String>,
    },
    /// Every section in one report.
    Report,
    /// CSV series on a grid: lin:START:STOP:STEP, geom:START:STOP:RATIO or list:a,b,...
    Series {
        #[arg(value_enum)]
        what: SeriesKind,
        #[arg(long)]
        grid: String,
    },
}

/// Resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub base: u64,
    pub k: usize,
    pub m: usize,
    pub bits: u32,
    pub t_ladder: Vec<BigRational>,
    pub k_max: u32,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn spec(&self) -> LiouvilleSpec {
        LiouvilleSpec {
            base: self.base,
            truncation: self.k,
        }
    }

    pub fn policy(&self) -> Result<PrecisionPolicy> {
        PrecisionPolicy::new(self.bits, self.k, self.m)
    }

    fn to_json(&self) -> Value {
        json!({
            "base": self.base,
            "K": self.k,
            "M": self.m,
            "bits": self.bits,
            "T": self.t_ladder.iter().map(rational_string).collect::<Vec<_>>(),
            "k_max": self.k_max,
        })
    }
}

fn parse_ladder(s: &str) -> Result<Vec<BigRational>> {
    let ladder: Vec<BigRational> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_rational)
        .collect::<Result<_>>()?;
    if ladder.is_empty() {
        return Err(Error::Parse("empty T ladder".into()));
    }
    if ladder.iter().any(|t| !t.is_positive()) {
        return Err(Error::Parse("T ladder entries must be positive".into()));
    }
    Ok(ladder)
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        let key = k.trim().trim_start_matches("--").to_string();
        const KEYS: [&str; 8] = ["base", "K", "M", "bits", "T", "k-max", "out", "format"];
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse(format!("{}:{}: unknown key {key:?}", path.display(), i + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("bad value for {key}: {v:?}")))
}

/// Flags override the config file, which overrides the defaults.
pub fn resolve_config(args: &ConfigArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(p) => parse_config_file(p)?,
        None => BTreeMap::new(),
    };
    let get = |key: &str| file.get(key).map(String::as_str);
    let base = match (args.base, get("base")) {
        (Some(b), _) => b,
        (None, Some(v)) => parse_value("base", v)?,
        (None, None) => 10,
    };
    let m = match (args.m, get("M")) {
        (Some(m), _) => m,
        (None, Some(v)) => parse_value("M", v)?,
        (None, None) => 3,
    };
    let k = match (args.k, get("K")) {
        (Some(k), _) => k,
        (None, Some(v)) => parse_value("K", v)?,
        (None, None) => m + 2,
    };
    let bits = match (args.bits, get("bits")) {
        (Some(b), _) => b,
        (None, Some(v)) => parse_value("bits", v)?,
        (None, None) => 512,
    };
    let t_ladder = match (&args.t, get("T")) {
        (Some(t), _) => parse_ladder(t)?,
        (None, Some(v)) => parse_ladder(v)?,
        (None, None) => parse_ladder("1e6,1e12,1e20")?,
    };
    let k_max = match (args.k_max, get("k-max")) {
        (Some(k), _) => k,
        (None, Some(v)) => parse_value("k-max", v)?,
        (None, None) => 5,
    };
    let out = args.out.clone().or_else(|| get("out").map(PathBuf::from));
    let format = match (args.format, get("format")) {
        (Some(f), _) => f,
        (None, Some("json")) => Format::Json,
        (None, Some("csv")) => Format::Csv,
        (None, Some(v)) => return Err(Error::Parse(format!("bad value for format: {v:?}"))),
        (None, None) => Format::Json,
    };
    Ok(RunConfig {
        base,
        k,
        m,
        bits,
        t_ladder,
        k_max,
        out,
        format,
    })
}

fn fmt(x: &RealHp) -> String {
    format!("{x:.30}")
}

/// One named pass/fail block of a report.
#[derive(Clone, Debug)]
pub struct Section {
    pub name: &'static str,
    pub pass: bool,
    pub body: Value,
}

impl Section {
    fn to_json(&self) -> Value {
        json!({ "name": self.name, "pass": self.pass, "details": self.body })
    }
}

/// Working precision must absorb the cancellation in `z1 p_m - z2 q_m`
/// along the flow: `log2(p_m / |lambda_m|)` bits plus 32 guard bits.
pub fn precision_section(field: &TruncatedField) -> Section {
    let per_mode: Vec<Value> = field
        .modes
        .iter()
        .map(|md| {
            let ratio = BigRational::from_integer(md.p.clone()) / md.lambda.abs();
            let needed = ratio.numer().bits() as i64 - ratio.denom().bits() as i64 + 1 + 32;
            json!({ "m": md.m, "required_bits": needed, "ok": needed <= i64::from(field.bits) })
        })
        .collect();
    let pass = per_mode.iter().all(|v| v["ok"] == true);
    Section {
        name: "precision",
        pass,
        body: json!({ "bits": field.bits, "modes": per_mode }),
    }
}

pub fn chain_section(spec: &LiouvilleSpec, field: &TruncatedField) -> Section {
    let report = verify_chain(&field.modes, spec);
    let failed: Vec<Value> = report
        .failures()
        .map(|c| json!({ "check": c.name, "m": c.m }))
        .collect();
    Section {
        name: "chain",
        pass: report.pass(),
        body: json!({
            "r_K": rational_string(&field.r_k),
            "modes": chain_json(&field.modes),
            "checks": report.checks.len(),
            "failed": failed,
            "truncation_certificate": report.truncation_certificate.iter().map(|c| format_sig(c, 30)).collect::<Vec<_>>(),
        }),
    }
}

/// Deterministic rational sample points in `[0, 1)^3`.
fn sample_points(count: usize) -> Vec<[BigRational; 3]> {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        BigRational::new(BigInt::from(state % 1_000_003), BigInt::from(1_000_003))
    };
    (0..count).map(|_| [next(), next(), next()]).collect()
}

pub fn field_section(field: &TruncatedField, k_max: u32) -> Section {
    let mut pass = true;
    let bounds: Vec<Value> = (0..=k_max)
        .map(|k| {
            let b = field.smoothness_bound(k);
            pass &= b.comparison_holds;
            json!({
                "k": k,
                "majorant": fmt(&b.majorant),
                "majorant_rational": format_sig(&b.majorant_rational, 30),
                "large_m_terms": format_sig(&b.large_m_terms, 30),
                "comparison": format_sig(&b.comparison, 30),
                "comparison_holds": b.comparison_holds,
            })
        })
        .collect();
    let sup = RealHp::from_rational(&field.amplitude_sum(), field.bits);
    let mut periodic = true;
    let mut bounded = true;
    for z in sample_points(24) {
        let h = field.eval(&z);
        bounded &= h[2].abs() <= sup;
        let one = BigRational::one();
        let shifted1 = field.eval(&[&z[0] + &one, z[1].clone(), z[2].clone()]);
        let shifted2 = field.eval(&[z[0].clone(), &z[1] + &one, z[2].clone()]);
        periodic &= shifted1 == h && shifted2 == h;
    }
    pass &= periodic && bounded;
    let tail = field.tail_bound().ok();
    Section {
        name: "field",
        pass,
        body: json!({
            "M": field.mode_count(),
            "smoothness": bounds,
            "sup_third_component": fmt(&sup),
            "periodic_in_z1_z2": periodic,
            "bounded_by_amplitude_sum": bounded,
            "tail_bound": tail.as_ref().map(rational_string),
            "tail_bound_approx": tail.as_ref().map(|t| format_sig(t, 30)),
        }),
    }
}

pub fn flow_section(field: &TruncatedField, t_end: &BigRational, step: &BigRational, tol: &BigRational) -> Result<Section> {
    let traj = solve_closed_form(field)?;
    let series = integrate_ode(field, t_end, step, field.bits)?;
    let tol = RealHp::from_rational(tol, field.bits);
    let rep = cross_validate(&traj, &series, &tol)?;
    let a_priori = rk4_error_bound(field, t_end, step);
    Ok(Section {
        name: "flow",
        pass: rep.pass,
        body: json!({
            "trajectory": traj.descriptor(),
            "t_end": rational_string(t_end),
            "step": rational_string(step),
            "samples": rep.samples,
            "max_error": fmt(&rep.max_error),
            "worst_t": rational_string(&rep.worst_t),
            "tol": fmt(&rep.tol),
            "rk4_error_bound": fmt(&a_priori),
        }),
    })
}

pub fn weak_rotation_section(traj: &ClosedFormTrajectory, ladder: &[BigRational]) -> Result<Section> {
    let mut rows = Vec::new();
    let mut pass = true;
    let mut prev: Option<RealHp> = None;
    for t in ladder {
        let est = weak_rotation_estimate(traj, t)?;
        let exact = est.rho_exact[0] == traj.r_k && est.rho_exact[1].is_one();
        let decreasing = prev.as_ref().is_none_or(|p| est.third_component_bound < *p);
        pass &= exact && est.within_bound && decreasing;
        rows.push(json!({
            "T": rational_string(t),
            "rho_hat": est.rho_hat.iter().map(fmt).collect::<Vec<_>>(),
            "third_component_bound": fmt(&est.third_component_bound),
            "within_bound": est.within_bound,
            "exact_linear_components": exact,
            "bound_decreasing": decreasing,
        }));
        prev = Some(est.third_component_bound);
    }
    Ok(Section {
        name: "weak_rotation",
        pass,
        body: json!({ "ladder": rows }),
    })
}

pub fn deviation_section(traj: &ClosedFormTrajectory) -> Result<Section> {
    let mut rows = Vec::new();
    let mut pass = true;
    let mut prev: Option<RealHp> = None;
    for n in 1..=traj.mode_count() {
        let rep = deviation_at_resonance(traj, n)?;
        let increasing = prev.as_ref().is_none_or(|p| rep.x3_at_tn > *p);
        pass &= rep.pass() && increasing;
        rows.push(json!({
            "n": n,
            "t_n": rational_string(&rep.t_n),
            "t_n_approx": format_sig(&rep.t_n, 30),
            "resonant_phase": rational_string(&rep.resonant_phase),
            "amplitude": fmt(&rep.amplitude),
            "x3_at_tn": fmt(&rep.x3_at_tn),
            "certified_lower_bound": fmt(&rep.certified_lower_bound),
            "n_over_4pi": fmt(&rep.n_over_4pi),
            "exceeds_n_over_4pi": rep.exceeds_n_over_4pi,
            "increasing": increasing,
        }));
        prev = Some(rep.x3_at_tn);
    }
    Ok(Section {
        name: "deviation",
        pass,
        body: json!({ "ladder": rows }),
    })
}

pub fn correlation_section(
    traj: &ClosedFormTrajectory,
    ladder: &[BigRational],
    only_n: Option<usize>,
    only_kind: Option<Kind>,
) -> Result<Section> {
    let ns: Vec<usize> = match only_n {
        Some(n) => vec![n],
        None => (1..=traj.mode_count()).collect(),
    };
    let kinds: Vec<Kind> = match only_kind {
        Some(k) => vec![k],
        None => vec![Kind::Sin, Kind::Cos],
    };
    let mut rows = Vec::new();
    let mut pass = true;
    for &n in &ns {
        for &kind in &kinds {
            for t in ladder {
                let est = correlation(traj, n, t, kind)?;
                pass &= est.pass();
                rows.push(serde_json::to_value(est.record())?);
            }
        }
    }
    Ok(Section {
        name: "correlation",
        pass,
        body: json!({ "note": PAIRING_NOTE, "estimates": rows }),
    })
}

fn build_field(cfg: &RunConfig) -> Result<TruncatedField> {
    cfg.policy()?;
    let spec = cfg.spec();
    let modes = build_resonant_sequence(&spec, cfg.m)?;
    Ok(TruncatedField {
        r_k: crate::liouville::liouville_truncation(&spec),
        spec,
        modes,
        bits: cfg.bits,
    })
}

/// All report sections, computed concurrently and returned in fixed order.
pub fn report_sections(cfg: &RunConfig) -> Result<Vec<Section>> {
    let field = build_field(cfg)?;
    let spec = cfg.spec();
    let traj = solve_closed_form(&field)?;
    let hundred = BigRational::from_integer(100.into());
    let step = BigRational::new(1.into(), 100.into());
    let tol = parse_rational("1e-8")?;
    std::thread::scope(|s| {
        let h_flow = s.spawn(|| flow_section(&field, &hundred, &step, &tol));
        let h_corr = s.spawn(|| correlation_section(&traj, &cfg.t_ladder, None, None));
        let h_field = s.spawn(|| field_section(&field, cfg.k_max));
        let precision = precision_section(&field);
        let chain = chain_section(&spec, &field);
        let weak = weak_rotation_section(&traj, &cfg.t_ladder)?;
        let deviation = deviation_section(&traj)?;
        let field_s = h_field.join().expect("field section thread");
        let flow = h_flow.join().expect("flow section thread")?;
        let corr = h_corr.join().expect("correlation section thread")?;
        Ok(vec![precision, chain, field_s, flow, weak, deviation, corr])
    })
}

fn sections_json(cfg: &RunConfig, sections: &[Section]) -> Value {
    json!({
        "config": cfg.to_json(),
        "pass": sections.iter().all(|s| s.pass),
        "sections": sections.iter().map(Section::to_json).collect::<Vec<_>>(),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, rows);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, rows);
            }
        }
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Null => rows.push((prefix.to_string(), String::new())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

/// Long-form CSV `section,key,value` carrying the same content as the JSON.
fn sections_csv(cfg: &RunConfig, sections: &[Section]) -> String {
    let mut out = String::from("section,key,value\n");
    let mut rows = Vec::new();
    flatten("", &cfg.to_json(), &mut rows);
    for (k, v) in rows {
        out.push_str(&format!("config,{},{}\n", csv_field(&k), csv_field(&v)));
    }
    for s in sections {
        out.push_str(&format!("{},pass,{}\n", s.name, s.pass));
        let mut rows = Vec::new();
        flatten("", &s.body, &mut rows);
        for (k, v) in rows {
            out.push_str(&format!("{},{},{}\n", s.name, csv_field(&k), csv_field(&v)));
        }
    }
    out
}

/// Parses `lin:START:STOP:STEP`, `geom:START:STOP:RATIO` or `list:a,b,...`.
pub fn parse_grid(spec: &str) -> Result<Vec<BigRational>> {
    const MAX_POINTS: usize = 1_000_000;
    let bad = |msg: &str| Error::Parse(format!("grid {spec:?}: {msg}"));
    let (kind, rest) = spec.split_once(':').ok_or_else(|| bad("missing grid kind"))?;
    let grid = match kind {
        "list" => rest
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(parse_rational)
            .collect::<Result<Vec<_>>>()?,
        "lin" | "geom" => {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("expected START:STOP:STEP"));
            }
            let start = parse_rational(parts[0])?;
            let stop = parse_rational(parts[1])?;
            let inc = parse_rational(parts[2])?;
            if start > stop {
                return Err(bad("START exceeds STOP"));
            }
            let mut pts = Vec::new();
            let mut t = start.clone();
            if kind == "lin" {
                if !inc.is_positive() {
                    return Err(bad("STEP must be positive"));
                }
                while t <= stop {
                    pts.push(t.clone());
                    t += &inc;
                    if pts.len() > MAX_POINTS {
                        return Err(bad("too many points"));
                    }
                }
            } else {
                if !start.is_positive() || inc <= BigRational::one() {
                    return Err(bad("geometric grids need START > 0 and RATIO > 1"));
                }
                while t < stop {
                    pts.push(t.clone());
                    t *= &inc;
                    if pts.len() > MAX_POINTS {
                        return Err(bad("too many points"));
                    }
                }
                pts.push(stop);
            }
            pts
        }
        _ => return Err(bad("kind must be lin, geom or list")),
    };
    if grid.is_empty() {
        return Err(bad("empty grid"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("points must be strictly increasing"));
    }
    Ok(grid)
}

struct Output<'a> {
    stdout: &'a mut dyn Write,
    dir: Option<PathBuf>,
    command: &'static str,
    config: Value,
    started: Instant,
}

impl Output<'_> {
    fn emit(&mut self, name: &str, content: &str) -> Result<()> {
        match &self.dir {
            None => self.stdout.write_all(content.as_bytes())?,
            Some(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(name), content)?;
                let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                let meta = json!({
                    "command": self.command,
                    "artifact": name,
                    "tool_version": env!("CARGO_PKG_VERSION"),
                    "config": self.config,
                    "unix_time": unix,
                    "elapsed_ms": self.started.elapsed().as_millis() as u64,
                });
                fs::write(dir.join(format!("{name}.meta.json")), serde_json::to_string_pretty(&meta)? + "\n")?;
            }
        }
        Ok(())
    }
}

fn emit_sections(out: &mut Output<'_>, cfg: &RunConfig, stem: &str, sections: &[Section]) -> Result<bool> {
    match cfg.format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&sections_json(cfg, sections))? + "\n";
            out.emit(&format!("{stem}.json"), &text)?;
        }
        Format::Csv => out.emit(&format!("{stem}.csv"), &sections_csv(cfg, sections))?,
    }
    Ok(sections.iter().all(|s| s.pass))
}

fn first_failure(sections: &[Section]) -> Option<&'static str> {
    sections.iter().find(|s| !s.pass).map(|s| s.name)
}

fn execute(cli: &Cli, cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let command = match &cli.command {
        Command::Sequence => "sequence",
        Command::FieldCheck => "field-check",
        Command::Simulate { .. } => "simulate",
        Command::Deviation => "deviation",
        Command::Correlation { .. } => "correlation",
        Command::Report => "report",
        Command::Series { .. } => "series",
    };
    let mut out = Output {
        stdout,
        dir: cfg.out.clone(),
        command,
        config: cfg.to_json(),
        started: Instant::now(),
    };
    let field = build_field(cfg)?;
    let sections: Vec<Section> = match &cli.command {
        Command::Sequence => {
            let report = verify_chain(&field.modes, &cfg.spec());
            match cfg.format {
                Format::Json => {
                    let text = serde_json::to_string_pretty(&chain_json(&field.modes))? + "\n";
                    out.emit("chain.json", &text)?;
                }
                Format::Csv => {
                    let mut text = String::from("m,p,q,lambda,lambda_approx,amplitude_approx\n");
                    for rec in chain_json(&field.modes).as_array().into_iter().flatten() {
                        let cols: Vec<String> = ["m", "p", "q", "lambda", "lambda_approx", "amplitude_approx"]
                            .iter()
                            .map(|k| match &rec[*k] {
                                Value::String(s) => s.clone(),
                                v => v.to_string(),
                            })
                            .collect();
                        text.push_str(&cols.join(","));
                        text.push('\n');
                    }
                    out.emit("chain.csv", &text)?;
                }
            }
            if !report.pass() {
                let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
                writeln!(stderr, "chain verification failed: {}", names.join("; "))?;
                return Ok(EXIT_FAIL);
            }
            return Ok(EXIT_PASS);
        }
        Command::FieldCheck => vec![field_section(&field, cfg.k_max)],
        Command::Simulate { t_end, step, tol } => {
            let t_end = parse_rational(t_end)?;
            let step = parse_rational(step)?;
            let tol = parse_rational(tol)?;
            if cfg.format == Format::Csv {
                let series = integrate_ode(&field, &t_end, &step, cfg.bits)?;
                let traj = solve_closed_form(&field)?;
                let rep = cross_validate(&traj, &series, &RealHp::from_rational(&tol, cfg.bits))?;
                out.emit("simulate.csv", &series.to_csv())?;
                if !rep.pass {
                    writeln!(stderr, "verification failed in section `flow`")?;
                    return Ok(EXIT_FAIL);
                }
                return Ok(EXIT_PASS);
            }
            vec![flow_section(&field, &t_end, &step, &tol)?]
        }
        Command::Deviation => vec![deviation_section(&solve_closed_form(&field)?)?],
        Command::Correlation { n, kind } => {
            let kind = kind.as_deref().map(str::parse::<Kind>).transpose()?;
            vec![correlation_section(&solve_closed_form(&field)?, &cfg.t_ladder, *n, kind)?]
        }
        Command::Report => report_sections(cfg)?,
        Command::Series { what, grid } => {
            let grid = parse_grid(grid)?;
            let traj = solve_closed_form(&field)?;
            let (name, text) = match what {
                SeriesKind::Trajectory => ("series_trajectory.csv", sample_closed_form(&traj, &grid)?.to_csv()),
                SeriesKind::Deviation => ("series_deviation.csv", profile_csv(&deviation_profile(&traj, &grid)?)),
                SeriesKind::Field => {
                    let zero = BigRational::zero();
                    let pts: Vec<[BigRational; 3]> = grid.iter().map(|t| [&field.r_k * t, t.clone(), zero.clone()]).collect();
                    ("series_field.csv", field.samples_csv(&pts))
                }
            };
            out.emit(name, &text)?;
            return Ok(EXIT_PASS);
        }
    };
    let stem = command.replace('-', "_");
    emit_sections(&mut out, cfg, &stem, &sections)?;
    match first_failure(&sections) {
        None => Ok(EXIT_PASS),
        Some(name) => {
            writeln!(stderr, "verification failed in section `{name}`")?;
            Ok(EXIT_FAIL)
        }
    }
}

/// Runs the CLI on explicit arguments (the first is the program name) and
/// returns the process exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    let result = resolve_config(&cli.config).and_then(|cfg| execute(&cli, &cfg, stdout, stderr));
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}
