//! Config-driven front end for the `indexflow` library.
//!
//! Every subcommand reads one JSON config, runs the computation and writes
//! `report.json`, `trace.csv`, `plot.dat` and `meta.json` into the output
//! directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use indexflow::dirac1d::{random_family, yn_check, CircleDiracFamily, KernelBoundaryOptions, RandomFamilyOptions, YnOptions};
use indexflow::lagrangian::{LagrangianCurve, LagrangianFrame, SymplecticSpace};
use indexflow::linalg::eigenvalues_herm;
use indexflow::maslov::{
    maslov_pair_report, maslov_pair_via_signatures, maslov_single_report, maslov_single_via_signatures, MaslovOptions,
};
use indexflow::mollify::{mollify_auto, MollifyOptions};
use indexflow::path::{AnyPath, PiecewiseAnalyticPath, SampledPath};
use indexflow::sigflow::{
    eigen_trace, eigen_trace_sampled, find_degeneracies, partial_signatures, spectral_flow_direct, spectral_flow_report,
    spectral_flow_sampled, trace_to_csv,
};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sf,
    Signatures,
    Maslov,
    Pair,
    Yn,
    Approx,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sf => "sf",
            Command::Signatures => "signatures",
            Command::Maslov => "maslov",
            Command::Pair => "pair",
            Command::Yn => "yn",
            Command::Approx => "approx",
        }
    }

    /// Accepted spellings of the optional `kind` field.
    fn accepts_kind(self, kind: &str) -> bool {
        match self {
            Command::Maslov => kind == "maslov" || kind == "maslov-single",
            Command::Pair => kind == "pair" || kind == "maslov-pair",
            _ => kind == self.name(),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    /// Config problems, with the position in the file where known.
    Config(String),
    Numerical(indexflow::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<indexflow::Error> for CliError {
    fn from(e: indexflow::Error) -> Self {
        CliError::Numerical(e)
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

/// What a run produced; `mismatch` is set when a check command disagrees with itself.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub trace: Vec<(f64, Vec<f64>)>,
    pub mismatch: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.mismatch {
            2
        } else {
            0
        }
    }
}

/// Raw config text with the file name, for positioned error messages.
pub struct ConfigSource {
    pub name: String,
    pub text: String,
}

impl ConfigSource {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { name: path.display().to_string(), text })
    }

    fn parse<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        serde_json::from_str(&self.text)
            .map_err(|e| CliError::Config(format!("{}:{}:{}: {e}", self.name, e.line(), e.column())))
    }

    /// First line mentioning `"key"`, for errors found after deserialization.
    fn key_line(&self, key: &str) -> Option<usize> {
        let needle = format!("\"{key}\"");
        self.text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
    }

    fn field_error(&self, key: &str, e: impl fmt::Display) -> CliError {
        match self.key_line(key) {
            Some(line) => CliError::Config(format!("{}:{line}: in '{key}': {e}", self.name)),
            None => CliError::Config(format!("{}: in '{key}': {e}", self.name)),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SfConfig {
    kind: Option<String>,
    path: Value,
    tol: Option<f64>,
    seed: Option<u64>,
    /// Trace samples per analytic segment.
    trace_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignaturesConfig {
    kind: Option<String>,
    path: Value,
    /// Parameters to analyze; all degeneracies when absent.
    points: Option<Vec<f64>>,
    tol: Option<f64>,
    seed: Option<u64>,
    trace_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaslovConfig {
    kind: Option<String>,
    curve: Value,
    l0: Value,
    tol: Option<f64>,
    seed: Option<u64>,
    samples_per_segment: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairConfig {
    kind: Option<String>,
    /// Shared space for curves that do not name one.
    space: Option<Value>,
    curve0: Value,
    curve1: Value,
    tol: Option<f64>,
    seed: Option<u64>,
    samples_per_segment: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct YnConfig {
    kind: Option<String>,
    family: Value,
    /// Discretization resolution (also run at twice this).
    n: Option<usize>,
    /// Points of the uniform s-grid for the Cauchy data curves.
    s_points: Option<usize>,
    kernel_boundary: Option<bool>,
    /// Eigenvalues closest to zero kept in the trace.
    trace_eigenvalues: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomFamilyConfig {
    seed: Option<u64>,
    blocks: Option<usize>,
    degree: Option<usize>,
    scale: Option<f64>,
    planted: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApproxConfig {
    kind: Option<String>,
    path: Value,
    epsilon: f64,
    tol: Option<f64>,
    seed: Option<u64>,
    trace_points: Option<usize>,
}

struct Settings {
    tol: f64,
    seed: u64,
}

fn settings(src: &ConfigSource, tol: Option<f64>, seed: Option<u64>, ov: &Overrides) -> Result<Settings, CliError> {
    let tol = ov.tol.or(tol).unwrap_or(DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(src.field_error("tol", format!("tolerance must be positive, got {tol}")));
    }
    Ok(Settings { tol, seed: ov.seed.or(seed).unwrap_or(0) })
}

fn check_kind(src: &ConfigSource, cmd: Command, kind: &Option<String>) -> Result<(), CliError> {
    match kind {
        Some(k) if !cmd.accepts_kind(k) => {
            Err(src.field_error("kind", format!("config is for '{k}' but the command is '{}'", cmd.name())))
        }
        _ => Ok(()),
    }
}

fn maslov_options(st: &Settings, samples: Option<usize>) -> MaslovOptions {
    let mut o = MaslovOptions { tol: st.tol, seed: st.seed, ..MaslovOptions::default() };
    if let Some(s) = samples {
        o.samples_per_segment = s.max(2);
    }
    o
}

/// Runs `cmd` on the config and returns the report without touching the disk.
pub fn run(cmd: Command, src: &ConfigSource, ov: &Overrides) -> Result<Outcome, CliError> {
    match cmd {
        Command::Sf => run_sf(src, ov),
        Command::Signatures => run_signatures(src, ov),
        Command::Maslov => run_maslov(src, ov),
        Command::Pair => run_pair(src, ov),
        Command::Yn => run_yn(src, ov),
        Command::Approx => run_approx(src, ov),
    }
}

fn run_sf(src: &ConfigSource, ov: &Overrides) -> Result<Outcome, CliError> {
    let cfg: SfConfig = src.parse()?;
    check_kind(src, Command::Sf, &cfg.kind)?;
    let st = settings(src, cfg.tol, cfg.seed, ov)?;
    let path = AnyPath::from_json(&cfg.path).map_err(|e| src.field_error("path", e))?;
    let per = cfg.trace_points.unwrap_or(100).max(2);
    match path.analytic() {
        Some(p) => {
            let direct = spectral_flow_direct(&p, st.tol)?;
            let via = spectral_flow_report(&p, st.tol)?;
            let equal = direct == via.spectral_flow;
            let report = json!({
                "command": "sf",
                "seed": st.seed,
                "tol": st.tol,
                "domain": [p.domain().0, p.domain().1],
                "spectral_flow": direct,
                "via_signatures": via.spectral_flow,
                "equal": equal,
                "degeneracies": via.degeneracies,
                "null_branch_dims": via.null_branch_dims,
                "flagged_knots": via.flagged_knots,
            });
            Ok(Outcome { report, trace: eigen_trace(&p, per), mismatch: !equal })
        }
        None => {
            let AnyPath::Sampled(sp) = &path else { unreachable!("non-analytic paths are sampled") };
            let sf = spectral_flow_sampled(sp, st.tol)?;
            let report = json!({
                "command": "sf",
                "seed": st.seed,
                "tol": st.tol,
                "domain": [sp.domain().0, sp.domain().1],
                "spectral_flow": sf,
                "via_signatures": Value::Null,
            });
            Ok(Outcome { report, trace: eigen_trace_sampled(sp), mismatch: false })
        }
    }
}

fn run_signatures(src: &ConfigSource, ov: &Overrides) -> Result<Outcome, CliError> {
    let cfg: SignaturesConfig = src.parse()?;
    check_kind(src, Command::Signatures, &cfg.kind)?;
    let st = settings(src, cfg.tol, cfg.seed, ov)?;
    let path = AnyPath::from_json(&cfg.path).map_err(|e| src.field_error("path", e))?;
    let p = path
        .analytic()
        .ok_or_else(|| src.field_error("path", "partial signatures need an analytic path ('coeffs' or 'knots')"))?;
    let mut tables = Vec::new();
    match &cfg.points {
        Some(points) => {
            for &s0 in points {
                let j = p.segment_index(s0)?;
                tables.push((s0, partial_signatures(&p.segments()[j], s0, st.tol)?));
            }
        }
        None => {
            for seg in p.segments() {
                for (s0, _) in find_degeneracies(seg, st.tol)?.points {
                    if tables.last().is_some_and(|(prev, _)| *prev == s0) {
                        continue;
                    }
                    tables.push((s0, partial_signatures(seg, s0, st.tol)?));
                }
            }
        }
    }
    let entries: Vec<Value> = tables.iter().map(|(s0, t)| json!({"s0": s0, "table": t})).collect();
    let report = json!({"command": "signatures", "seed": st.seed, "tol": st.tol, "tables": entries});
    Ok(Outcome { report, trace: eigen_trace(&p, cfg.trace_points.unwrap_or(100).max(2)), mismatch: false })
}

fn run_maslov(src: &ConfigSource, ov: &Overrides) -> Result<Outcome, CliError> {
    let cfg: MaslovConfig = src.parse()?;
    check_kind(src, Command::Maslov, &cfg.kind)?;
    let st = settings(src, cfg.tol, cfg.seed, ov)?;
    let curve = LagrangianCurve::from_json(&cfg.curve, None).map_err(|e| src.field_error("curve", e))?;
    let l0 = LagrangianFrame::from_json(curve.space().clone(), &cfg.l0).map_err(|e| src.field_error("l0", e))?;
    let opts = maslov_options(&st, cfg.samples_per_segment);
    let direct = maslov_single_report(&curve, &l0, &opts)?;
    let via = if curve.is_analytic() { Some(maslov_single_via_signatures(&curve, &l0, &opts)?) } else { None };
    let mismatch = via.as_ref().is_some_and(|v| v.index != direct.index);
    let report = json!({
        "command": "maslov",
        "seed": st.seed,
        "tol": st.tol,
        "maslov": direct.index,
        "via_signatures": via.as_ref().map(|v| v.index),
        "equal": !mismatch,
        "direct": direct,
        "signatures": via,
    });
    Ok(Outcome { report, trace: direct.trace, mismatch })
}

fn run_pair(src: &ConfigSource, ov: &Overrides) -> Result<Outcome, CliError> {
    let cfg: PairConfig = src.parse()?;
    check_kind(src, Command::Pair, &cfg.kind)?;
    let st = settings(src, cfg.tol, cfg.seed, ov)?;
    let space = match &cfg.space {
        Some(v) => Some(SymplecticSpace::from_json(v).map_err(|e| src.field_error("space", e))?),
        None => None,
    };
    let g0 = LagrangianCurve::from_json(&cfg.curve0, space.as_ref()).map_err(|e| src.field_error("curve0", e))?;
    let g1 = LagrangianCurve::from_json(&cfg.curve1, space.as_ref().or(Some(g0.space())))
        .map_err(|e| src.field_error("curve1", e))?;
    let opts = maslov_options(&st, cfg.samples_per_segment);
    let direct = maslov_pair_report(&g0, &g1, &opts)?;
    let via = if g0.is_analytic() && g1.is_analytic() { Some(maslov_pair_via_signatures(&g0, &g1, &opts)?) } else { None };
    let mismatch = via.as_ref().is_some_and(|v| v.index != direct.index);
    let report = json!({
        "command": "pair",
        "seed": st.seed,
        "tol": st.tol,
        "maslov": direct.index,
        "via_signatures": via.as_ref().map(|v| v.index),
        "equal": !mismatch,
        "direct": direct,
        "signatures": via,
    });
    Ok(Outcome { report, trace: direct.trace, mismatch })
}

fn build_family(src: &ConfigSource, v: &Value, seed: u64) -> Result<(CircleDiracFamily, Option<u64>), CliError> {
    if let Some(r) = v.get("random") {
        let rc: RandomFamilyConfig = serde_json::from_value(r.clone()).map_err(|e| src.field_error("random", e))?;
        let d = RandomFamilyOptions::default();
        let opts = RandomFamilyOptions {
            blocks: rc.blocks.unwrap_or(d.blocks),
            degree: rc.degree.unwrap_or(d.degree),
            scale: rc.scale.unwrap_or(d.scale),
            planted: rc.planted,
            ..d
        };
        let family_seed = rc.seed.unwrap_or(seed);
        let fam = random_family(family_seed, &opts).map_err(|e| src.field_error("random", e))?;
        return Ok((fam, Some(family_seed)));
    }
    let fam = CircleDiracFamily::from_json(v).map_err(|e| src.field_error("family", e))?;
    Ok((fam, None))
}

fn run_yn(src: &ConfigSource, ov: &Overrides) -> Result<Outcome, CliError> {
    let cfg: YnConfig = src.parse()?;
    check_kind(src, Command::Yn, &cfg.kind)?;
    let st = settings(src, cfg.tol, cfg.seed, ov)?;
    let (family, family_seed) = build_family(src, &cfg.family, st.seed)?;
    let mut yopts = YnOptions { tol: st.tol, maslov: maslov_options(&st, None), ..YnOptions::default() };
    if let Some(n) = cfg.n {
        yopts.n = n;
    }
    let points = cfg.s_points.unwrap_or(201).max(2);
    let (a, b) = family.s_domain();
    let grid: Vec<f64> = (0..points)
        .map(|i| if i + 1 == points { b } else { a + (b - a) * i as f64 / (points - 1) as f64 })
        .collect();
    let yn = yn_check(&family, &grid, &yopts)?;
    let mut mismatch = !yn.equal;
    let mut kernel = Vec::new();
    if cfg.kernel_boundary.unwrap_or(true) {
        let kopts = KernelBoundaryOptions { n: yn.convergence.n, maslov: yopts.maslov.clone(), ..KernelBoundaryOptions::default() };
        for (s0, _) in family.boundary_degeneracies(400) {
            match family.kernel_boundary_map(s0, &kopts) {
                Ok(r) => {
                    mismatch |= !r.tables_equal;
                    kernel.push(serde_json::to_value(&r).expect("report serializes"));
                }
                Err(e @ indexflow::Error::ModelInconsistency(_)) => {
                    mismatch = true;
                    kernel.push(json!({"s0": s0, "error": e.to_string()}));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let k = cfg.trace_eigenvalues.unwrap_or(4).max(1);
    let trace = family.near_zero_trace(yn.convergence.n, &grid, k)?;
    let report = json!({
        "command": "yn",
        "seed": st.seed,
        "family_seed": family_seed,
        "tol": st.tol,
        "sf": yn.sf,
        "maslov": yn.maslov,
        "equal": yn.equal,
        "convergence": yn.convergence,
        "grid_points": yn.grid_points,
        "charts": yn.charts,
        "kernel_boundary": kernel,
    });
    Ok(Outcome { report, trace, mismatch })
}

fn run_approx(src: &ConfigSource, ov: &Overrides) -> Result<Outcome, CliError> {
    let cfg: ApproxConfig = src.parse()?;
    check_kind(src, Command::Approx, &cfg.kind)?;
    let st = settings(src, cfg.tol, cfg.seed, ov)?;
    if !(cfg.epsilon.is_finite() && cfg.epsilon > 0.0) {
        return Err(src.field_error("epsilon", format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    let sp = SampledPath::from_json(&cfg.path).map_err(|e| src.field_error("path", e))?;
    let m = mollify_auto(&sp, cfg.epsilon, &MollifyOptions::default())?;
    let smooth = PiecewiseAnalyticPath::single(m.path.clone());
    let (a, b) = sp.domain();
    let end_a = (m.path.eval(a)?.matrix() - sp.values()[0].matrix()).norm();
    let end_b = (m.path.eval(b)?.matrix() - sp.values().last().unwrap().matrix()).norm();
    let sf_sampled = spectral_flow_sampled(&sp, st.tol)?;
    let sf_smooth = spectral_flow_direct(&smooth, st.tol)?;
    let gap = |v: &[f64]| v.iter().fold(f64::INFINITY, |g, x| g.min(x.abs()));
    let nondegenerate = gap(&eigenvalues_herm(&sp.values()[0])) > st.tol
        && gap(&eigenvalues_herm(sp.values().last().unwrap())) > st.tol;
    let mismatch = nondegenerate && sf_sampled != sf_smooth;
    let report = json!({
        "command": "approx",
        "seed": st.seed,
        "tol": st.tol,
        "epsilon": cfg.epsilon,
        "alpha": m.alpha,
        "degree": m.degree,
        "sup_error": m.sup_error,
        "endpoint_error": end_a.max(end_b),
        "endpoints_nondegenerate": nondegenerate,
        "spectral_flow_sampled": sf_sampled,
        "spectral_flow_mollified": sf_smooth,
        "equal": sf_sampled == sf_smooth,
    });
    Ok(Outcome { report, trace: eigen_trace(&smooth, cfg.trace_points.unwrap_or(200).max(2)), mismatch })
}

/// One-line human summary of a report.
pub fn summary(r: &Value) -> String {
    match r["command"].as_str().unwrap_or("") {
        "sf" => format!("spectral flow = {} (via signatures: {})", r["spectral_flow"], r["via_signatures"]),
        "signatures" => format!("{} signature table(s)", r["tables"].as_array().map_or(0, |a| a.len())),
        "maslov" | "pair" => format!("maslov index = {} (via signatures: {})", r["maslov"], r["via_signatures"]),
        "yn" => format!("sf = {}, maslov = {}, equal = {}", r["sf"], r["maslov"], r["equal"]),
        "approx" => format!(
            "mollified spectral flow = {}, sampled = {}",
            r["spectral_flow_mollified"], r["spectral_flow_sampled"]
        ),
        _ => String::new(),
    }
}

/// Gnuplot-ready columns `s lambda_1 ... lambda_k` under one header comment.
pub fn emit_plotdata(trace: &[(f64, Vec<f64>)]) -> Result<String, CliError> {
    if trace.is_empty() {
        return Err(CliError::Config("cannot write plot data for an empty trace".into()));
    }
    let k = trace.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let mut out = String::from("# s");
    for i in 1..=k {
        out.push_str(&format!(" lambda_{i}"));
    }
    out.push('\n');
    for (s, v) in trace {
        out.push_str(&format!("{s:.12e}"));
        for x in v {
            out.push_str(&format!(" {x:.12e}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes the four artifacts and returns their paths.
pub fn write_artifacts(
    out: &Path,
    cmd: Command,
    config: &Path,
    outcome: &Outcome,
) -> Result<Vec<PathBuf>, CliError> {
    let plot = emit_plotdata(&outcome.trace)?;
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let meta = json!({
        "command": cmd.name(),
        "config": config.display().to_string(),
        "unix_time": unix,
        "version": env!("CARGO_PKG_VERSION"),
        "exit_code": outcome.exit_code(),
    });
    let files = [
        ("report.json", pretty(&outcome.report)),
        ("trace.csv", trace_to_csv(&outcome.trace)),
        ("plot.dat", plot),
        ("meta.json", pretty(&meta)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let p = out.join(name);
        fs::write(&p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        written.push(p);
    }
    Ok(written)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_data_has_header_and_columns() {
        let d = emit_plotdata(&[(0.0, vec![-1.0]), (0.5, vec![0.25])]).unwrap();
        let lines: Vec<&str> = d.lines().collect();
        assert_eq!(lines[0], "# s lambda_1");
        assert_eq!(lines.len(), 3);
        assert!(lines[1..].iter().all(|l| l.split_whitespace().count() == 2));
    }

    #[test]
    fn empty_trace_is_rejected() {
        assert!(emit_plotdata(&[]).is_err());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let src = ConfigSource { name: "c.json".into(), text: "{\n  \"path\": [1,\n}".into() };
        let err = run(Command::Sf, &src, &Overrides::default()).unwrap_err().to_string();
        assert!(err.contains("c.json:3:"), "{err}");
    }

    #[test]
    fn kind_must_match_command() {
        let src = ConfigSource { name: "c.json".into(), text: r#"{"kind": "yn", "path": {}}"#.into() };
        let err = run(Command::Sf, &src, &Overrides::default()).unwrap_err().to_string();
        assert!(err.contains("'kind'"), "{err}");
    }
}
