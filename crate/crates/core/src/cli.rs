//! Command-line front end: configuration loading, command dispatch and
//! report emission.
//!
//! Configuration is TOML with unknown keys rejected. Environment variables
//! `QTHS_<SECTION>__<KEY>` override single entries (values are parsed as TOML
//! literals, falling back to strings); `QTHS_OUT`, `QTHS_FORMAT`, `QTHS_SEED`
//! and `QTHS_JOBS` stand in for the corresponding flags. Exit status is 0
//! when every check passes, 1 when a check fails or a run aborts, and 2 for
//! usage and configuration errors.

use crate::error::{QthsError, Result};
use crate::estimates::{dyadic_sequence, lambda_sweep, rbound_from_stacks, sample_stacks, Estimate, NormSpec, RboundOptions, SweepData};
use crate::field::Field;
use crate::halfspace::{
    compare_with_spectral, fd_oracle_solve, interior_residual, solve_halfspace, DataKind, FdGrid, HalfSpaceData, HalfSpaceGrid, NormalGrid, SingleMode,
};
use crate::lopatinski::{identity_suite, scan_lower_bounds, BOUND_IDS};
use crate::multiplier::{catalog, catalog_grid_spec, estimate_claims};
use crate::sector::{build_scan_grid, calibrate_c0, calibration_probe_grid, random_spectral_points, GridSpec, ScanGrid, SectorParams};
use crate::wholespace::{random_mode_deviation, random_smooth_data, solve_wholespace, wholespace_residual, TorusGrid};
use crate::C64;
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ScanBounds,
    CheckMultipliers,
    CheckIdentities,
    SolveWholespace,
    SolveHalfspace,
    VerifyOracle,
    SweepLambda,
    EstimateRbound,
    CalibrateC0,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ScanBounds => "scan-bounds",
            Command::CheckMultipliers => "check-multipliers",
            Command::CheckIdentities => "check-identities",
            Command::SolveWholespace => "solve-wholespace",
            Command::SolveHalfspace => "solve-halfspace",
            Command::VerifyOracle => "verify-oracle",
            Command::SweepLambda => "sweep-lambda",
            Command::EstimateRbound => "estimate-rbound",
            Command::CalibrateC0 => "calibrate-c0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "qths", version, about = "Symbol scans, multiplier checks and resolvent solves for the linearized Q-tensor system")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML run configuration; defaults are used for missing keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// report directory [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// report format [default: json]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// root seed, overrides the configuration
    #[arg(long)]
    pub seed: Option<u64>,
    /// worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub grid: GridSpec,
    /// explicit λ samples as [re, im]; replaces the polar grid together with `xi`
    pub lambdas: Option<Vec<[f64; 2]>>,
    pub xi: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSet {
    pub a: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub c0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityConfig {
    pub points: usize,
    pub depth: u32,
    pub xi_min: f64,
    pub xi_max: f64,
    /// parameter sets to check; empty means `params`
    pub sets: Vec<ParamSet>,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig {
            points: 10_000,
            depth: 20,
            xi_min: 1e-3,
            xi_max: 1e3,
            sets: vec![
                ParamSet { a: 1.0, beta: 0.5, epsilon: PI / 3.0, c0: 1.0 },
                ParamSet { a: 1.0, beta: 2f64.sqrt(), epsilon: PI / 3.0, c0: 0.5 },
                ParamSet { a: 0.2, beta: 2.0, epsilon: 1.2, c0: 0.1 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiplierConfig {
    pub max_order: usize,
    pub grid: GridSpec,
    /// claim ids to check; empty means the whole catalog
    pub claims: Vec<String>,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        MultiplierConfig { max_order: 2, grid: catalog_grid_spec(), claims: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WholeSpaceConfig {
    pub count: usize,
    pub length: f64,
    pub lambda: [f64; 2],
    /// data live on the modes with |k|_∞ ≤ kmax
    pub kmax: i64,
    pub oracle_modes: usize,
}

impl Default for WholeSpaceConfig {
    fn default() -> Self {
        WholeSpaceConfig { count: 32, length: 2.0 * PI, lambda: [0.3, 0.2], kmax: 6, oracle_modes: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataChoice {
    /// Gaussian profiles on one tangential mode
    SingleMode,
    /// the zero-mean data used by the λ sweep
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HalfSpaceConfig {
    pub tangential_count: usize,
    pub length: f64,
    pub normal_cells: usize,
    pub x_max: f64,
    pub stretch: f64,
    pub doubled_points: usize,
    pub lambda: [f64; 2],
    pub data: DataChoice,
    pub interior: bool,
    pub boundary: bool,
}

impl Default for HalfSpaceConfig {
    fn default() -> Self {
        HalfSpaceConfig {
            tangential_count: 16,
            length: 2.0 * PI,
            normal_cells: 256,
            x_max: 16.0,
            stretch: 4.0,
            doubled_points: 512,
            lambda: [0.3, 0.2],
            data: DataChoice::SingleMode,
            interior: true,
            boundary: true,
        }
    }
}

impl HalfSpaceConfig {
    pub fn grid(&self, n: usize) -> Result<HalfSpaceGrid> {
        let tg = TorusGrid::cube(n - 1, self.length, self.tangential_count)?;
        HalfSpaceGrid::new(tg, NormalGrid::new(self.x_max, self.normal_cells, self.stretch)?, self.doubled_points)
    }

    pub fn data(&self, grid: &HalfSpaceGrid) -> HalfSpaceData {
        let n = grid.n();
        match self.data {
            DataChoice::SingleMode => {
                let s = SingleMode::new(n, self.interior, self.boundary);
                HalfSpaceData::sample(grid, |k, c, xt, x| s.value(k, c, xt, x))
            }
            DataChoice::Sweep => {
                let s = SweepData::new(n, 0.0, self.boundary);
                HalfSpaceData::sample(grid, |k, c, xt, x| if self.interior || matches!(k, DataKind::H | DataKind::DqBoundary) { s.value(k, c, xt, x) } else { C64::new(0.0, 0.0) })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// finite-difference resolutions (tangential = normal cells)
    pub levels: Vec<usize>,
    pub x_max: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { levels: vec![16, 32, 64], x_max: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub depth: u32,
    pub angle: f64,
    pub q: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { depth: 20, angle: 0.0, q: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RboundConfig {
    pub samples: usize,
    pub trials: usize,
    pub q: f64,
    /// number of seeds, starting at the root seed
    pub seeds: u64,
}

impl Default for RboundConfig {
    fn default() -> Self {
        RboundConfig { samples: 16, trials: 1000, q: 2.0, seeds: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub identity: f64,
    pub wholespace: f64,
    pub trace_u: f64,
    pub trace_dq: f64,
    pub oracle: f64,
    /// max ratio ≤ factor × median
    pub sweep_factor: f64,
    /// relative spread of the R-bound across seeds
    pub rbound_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { identity: 1e-8, wholespace: 1e-9, trace_u: 1e-6, trace_dq: 1e-4, oracle: 0.05, sweep_factor: 3.0, rbound_spread: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub params: SectorParams,
    pub scan: ScanConfig,
    pub identities: IdentityConfig,
    pub multipliers: MultiplierConfig,
    pub wholespace: WholeSpaceConfig,
    pub halfspace: HalfSpaceConfig,
    pub oracle: OracleConfig,
    pub sweep: SweepConfig,
    pub rbound: RboundConfig,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            params: SectorParams { n: 2, a: 1.0, beta: 1.0, epsilon: PI / 3.0, c0: 0.5 },
            scan: ScanConfig::default(),
            identities: IdentityConfig::default(),
            multipliers: MultiplierConfig::default(),
            wholespace: WholeSpaceConfig::default(),
            halfspace: HalfSpaceConfig::default(),
            oracle: OracleConfig::default(),
            sweep: SweepConfig::default(),
            rbound: RboundConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

const FLAG_ENV: [&str; 4] = ["OUT", "FORMAT", "SEED", "JOBS"];

fn env_literal(s: &str) -> toml::Value {
    match format!("v = {s}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(s.to_string())),
        Err(_) => toml::Value::String(s.to_string()),
    }
}

fn apply_env(table: &mut toml::Table, env: &[(String, String)]) -> Result<()> {
    for (key, value) in env {
        let Some(rest) = key.strip_prefix("QTHS_") else { continue };
        if FLAG_ENV.contains(&rest) || rest == "CONFIG" {
            continue;
        }
        let path: Vec<String> = rest.split("__").map(|s| s.to_ascii_lowercase()).collect();
        let mut cur = &mut *table;
        for seg in &path[..path.len() - 1] {
            let entry = cur.entry(seg.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry.as_table_mut().ok_or_else(|| QthsError::Config(format!("{key}: `{seg}` is not a section")))?;
        }
        cur.insert(path[path.len() - 1].clone(), env_literal(value));
    }
    Ok(())
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Parses TOML text over the defaults, applies environment overrides
    /// and validates.
    pub fn from_toml(text: &str, env: &[(String, String)]) -> Result<RunConfig> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| QthsError::Config(e.to_string()))?;
        let mut table = toml::Table::try_from(RunConfig::default()).map_err(|e| QthsError::Config(e.to_string()))?;
        merge(&mut table, user);
        apply_env(&mut table, env)?;
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| QthsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, env: &[(String, String)]) -> Result<RunConfig> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| QthsError::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        RunConfig::from_toml(&text, env)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(QthsError::Config(m));
        self.params.validate().map_err(|e| QthsError::Config(e.to_string()))?;
        for s in &self.identities.sets {
            SectorParams::new(self.params.n, s.a, s.beta, s.epsilon, s.c0).map_err(|e| QthsError::Config(format!("identity set: {e}")))?;
        }
        if self.scan.lambdas.is_some() != self.scan.xi.is_some() {
            return bad("scan.lambdas and scan.xi must be given together".into());
        }
        if self.multipliers.max_order > 3 {
            return bad("multipliers.max_order must be at most 3".into());
        }
        let known: Vec<String> = catalog().into_iter().map(|c| c.id).collect();
        if let Some(id) = self.multipliers.claims.iter().find(|id| !known.contains(id)) {
            return bad(format!("unknown multiplier claim `{id}`"));
        }
        self.halfspace.grid(self.params.n).map_err(|e| QthsError::Config(format!("halfspace grid: {e}")))?;
        TorusGrid::cube(self.params.n, self.wholespace.length, self.wholespace.count).map_err(|e| QthsError::Config(format!("wholespace grid: {e}")))?;
        if self.oracle.levels.is_empty() {
            return bad("oracle.levels must not be empty".into());
        }
        for q in [self.sweep.q, self.rbound.q] {
            NormSpec::lq(q).map_err(|e| QthsError::Config(e.to_string()))?;
        }
        if self.rbound.samples == 0 || self.rbound.samples > 64 || self.rbound.trials < 1000 || self.rbound.seeds == 0 {
            return bad("rbound needs 1..=64 samples, at least 1000 trials and one seed".into());
        }
        Ok(())
    }
}

/// One CSV row: point coordinates, quantity id, value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coords: Vec<f64>,
    pub quantity: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, coords: Vec<f64>, quantity: impl Into<String>, value: Option<f64>) {
        self.rows.push(Row { coords, quantity: quantity.into(), value });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub timestamp_unix: u64,
    pub pass: bool,
    pub results: Value,
    /// headline numbers kept as regression fixtures
    pub fixtures: BTreeMap<String, f64>,
    #[serde(skip)]
    pub table: Table,
}

impl Report {
    pub fn empty(command: &str, config: RunConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            timestamp_unix: 0,
            pass: true,
            results: Value::Null,
            fixtures: BTreeMap::new(),
            table: Table::default(),
        }
    }
}

/// Writes the report as one JSON document or as flat CSV rows.
pub fn emit(report: &Report, format: Format, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut cw = csv::Writer::from_writer(&mut w);
            let mut header = report.table.columns.clone();
            header.push("quantity".into());
            header.push("value".into());
            cw.write_record(&header)?;
            for r in &report.table.rows {
                let mut rec: Vec<String> = r.coords.iter().map(|v| format!("{v:e}")).collect();
                rec.push(r.quantity.clone());
                rec.push(r.value.map(|v| format!("{v:e}")).unwrap_or_default());
                cw.write_record(&rec)?;
            }
            cw.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Outcome {
    pass: bool,
    results: Value,
    fixtures: BTreeMap<String, f64>,
    table: Table,
    fields: Vec<(String, Field)>,
}

impl Outcome {
    fn new(pass: bool, results: Value, table: Table) -> Self {
        Outcome { pass, results, fixtures: BTreeMap::new(), table, fields: Vec::new() }
    }
}

fn lambda_of(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

fn scan_grid(cfg: &RunConfig) -> Result<ScanGrid> {
    match (&cfg.scan.lambdas, &cfg.scan.xi) {
        (Some(l), Some(x)) => ScanGrid::from_samples(l.iter().map(|v| lambda_of(*v)).collect(), x.clone(), &cfg.params, cfg.scan.grid.thresholds),
        _ => build_scan_grid(&cfg.params, &cfg.scan.grid),
    }
}

fn point_columns(n: usize) -> Vec<&'static str> {
    let mut c = vec!["lambda_re", "lambda_im", "xi_1"];
    if n == 3 {
        c.push("xi_2");
    }
    c
}

fn scan_bounds(cfg: &RunConfig) -> Result<Outcome> {
    let grid = scan_grid(cfg)?;
    let rep = scan_lower_bounds(&grid, &cfg.params)?;
    let mut table = Table::new(&point_columns(cfg.params.n));
    for (p, vals) in grid.points.iter().zip(&rep.values) {
        let mut coords = vec![p.lambda.re, p.lambda.im];
        coords.extend(&p.xi);
        for (id, v) in BOUND_IDS.iter().zip(vals) {
            table.push(coords.clone(), *id, *v);
        }
    }
    let mut out = Outcome::new(rep.pass, json!({ "points": grid.points.len(), "floor": rep.floor, "entries": rep.entries }), table);
    for e in &rep.entries {
        if let Some(v) = e.infimum {
            out.fixtures.insert(e.id.clone(), v);
        }
    }
    Ok(out)
}

fn check_multipliers(cfg: &RunConfig) -> Result<Outcome> {
    let mc = &cfg.multipliers;
    let claims: Vec<_> = catalog().into_iter().filter(|c| mc.claims.is_empty() || mc.claims.contains(&c.id)).collect();
    let reps = estimate_claims(&claims, &cfg.params, &mc.grid, mc.max_order)?;
    let mut cols = vec!["ell", "alpha_1"];
    if cfg.params.n == 3 {
        cols.push("alpha_2");
    }
    let mut table = Table::new(&cols);
    for r in &reps {
        for e in &r.entries {
            let mut coords = vec![e.ell as f64];
            coords.extend(e.alpha.iter().map(|&a| a as f64));
            table.push(coords.clone(), format!("{}/coarse", r.id), Some(e.sup_coarse));
            table.push(coords, format!("{}/fine", r.id), Some(e.sup_fine));
        }
    }
    let pass = reps.iter().all(|r| r.pass);
    let failed: Vec<&str> = reps.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
    Ok(Outcome::new(pass, json!({ "claims": reps.len(), "failed": failed, "reports": reps }), table))
}

fn check_identities(cfg: &RunConfig) -> Result<Outcome> {
    let ic = &cfg.identities;
    let p = cfg.params;
    let sets: Vec<SectorParams> = if ic.sets.is_empty() {
        vec![p]
    } else {
        ic.sets.iter().map(|s| SectorParams::new(p.n, s.a, s.beta, s.epsilon, s.c0)).collect::<Result<_>>()?
    };
    let mut table = Table::new(&["a", "beta"]);
    let mut suites = Vec::new();
    let mut out_fix = BTreeMap::new();
    for (k, sp) in sets.iter().enumerate() {
        let pts = random_spectral_points(sp, ic.points, ic.depth, (ic.xi_min, ic.xi_max), cfg.seed.wrapping_add(k as u64));
        let suite = identity_suite(&pts, sp, cfg.tolerances.identity)?;
        for e in &suite.identities {
            table.push(vec![sp.a, sp.beta], e.name.clone(), Some(e.max_residual));
        }
        let worst = suite.identities.iter().map(|e| e.max_residual).fold(0.0, f64::max);
        out_fix.insert(format!("set{k}/max-residual"), worst);
        suites.push(json!({ "params": sp, "suite": suite }));
    }
    let pass = suites.iter().all(|s| s["suite"]["pass"] == json!(true));
    let mut out = Outcome::new(pass, json!({ "sets": suites }), table);
    out.fixtures = out_fix;
    Ok(out)
}

fn solve_wholespace_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let wc = &cfg.wholespace;
    let grid = TorusGrid::cube(cfg.params.n, wc.length, wc.count)?;
    let (f, g) = random_smooth_data(&grid, wc.kmax, cfg.seed);
    let lambda = lambda_of(wc.lambda);
    let sol = solve_wholespace(&f, &g, lambda, &cfg.params, &grid)?;
    let residual = wholespace_residual(&sol, &f, &g, lambda, &cfg.params, &grid)?;
    let deviation = random_mode_deviation(&cfg.params, wc.oracle_modes, cfg.seed)?;
    let tol = cfg.tolerances.wholespace;
    let mut table = Table::new(&[]);
    table.push(vec![], "residual", Some(residual));
    table.push(vec![], "oracle-deviation", Some(deviation));
    let mut out = Outcome::new(residual <= tol && deviation <= tol, json!({ "residual": residual, "oracle_deviation": deviation, "oracle_modes": wc.oracle_modes }), table);
    out.fixtures.insert("residual".into(), residual);
    out.fixtures.insert("oracle-deviation".into(), deviation);
    out.fields = vec![("u".into(), sol.u), ("q".into(), sol.q), ("p".into(), sol.p)];
    Ok(out)
}

fn solve_halfspace_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let hc = &cfg.halfspace;
    let grid = hc.grid(cfg.params.n)?;
    let data = hc.data(&grid);
    let sol = solve_halfspace(&data, lambda_of(hc.lambda), &cfg.params, &grid)?;
    let d = sol.diagnostics;
    let residual = interior_residual(&sol, &data)?;
    let t = &cfg.tolerances;
    let pass = d.trace_u <= t.trace_u && d.trace_dq <= t.trace_dq;
    let mut table = Table::new(&[]);
    for (k, v) in [("trace-u", d.trace_u), ("trace-dq", d.trace_dq), ("trace-dq-exact", d.trace_dq_exact), ("interior-residual", residual), ("s0-drift", d.s0_drift)] {
        table.push(vec![], k, Some(v));
    }
    let mut out = Outcome::new(pass, json!({ "diagnostics": d, "interior_residual": residual }), table);
    out.fixtures.insert("trace-u".into(), d.trace_u);
    out.fixtures.insert("trace-dq".into(), d.trace_dq);
    out.fields = vec![("u".into(), sol.u), ("q".into(), sol.q), ("p".into(), sol.p)];
    Ok(out)
}

fn verify_oracle(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.params.n != 2 {
        return Err(QthsError::Config("verify-oracle supports N = 2 only".into()));
    }
    let hc = &cfg.halfspace;
    let grid = hc.grid(2)?;
    let data = hc.data(&grid);
    let lambda = lambda_of(hc.lambda);
    let sol = solve_halfspace(&data, lambda, &cfg.params, &grid)?;
    let src = |k: DataKind, c: usize, xt: &[f64], x: f64| -> C64 {
        match hc.data {
            DataChoice::SingleMode => SingleMode::new(2, hc.interior, hc.boundary).value(k, c, xt, x),
            DataChoice::Sweep => {
                if hc.interior || matches!(k, DataKind::H | DataKind::DqBoundary) {
                    SweepData::new(2, 0.0, hc.boundary).value(k, c, xt, x)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
        }
    };
    let mut errs = Vec::new();
    let mut table = Table::new(&["cells"]);
    for &n in &cfg.oracle.levels {
        let fd = fd_oracle_solve(&src, lambda, &cfg.params, &FdGrid::new(hc.length, n, cfg.oracle.x_max, n)?)?;
        let e = compare_with_spectral(&fd, &sol)?;
        table.push(vec![n as f64], "relative-l2", Some(e));
        errs.push(e);
    }
    let last = *errs.last().unwrap_or(&f64::INFINITY);
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let mut out = Outcome::new(last <= cfg.tolerances.oracle && monotone, json!({ "levels": cfg.oracle.levels, "errors": errs, "monotone": monotone }), table);
    out.fixtures.insert("finest-error".into(), last);
    Ok(out)
}

fn sweep_lambda(cfg: &RunConfig) -> Result<Outcome> {
    let sc = &cfg.sweep;
    let grid = cfg.halfspace.grid(cfg.params.n)?;
    let lams = dyadic_sequence(cfg.params.c0, sc.depth, sc.angle);
    let spec = NormSpec::lq(sc.q)?;
    let mut table = Table::new(&["lambda_re", "lambda_im"]);
    let mut reports = Vec::new();
    let mut out_fix = BTreeMap::new();
    for (kind, boundary, name) in [(Estimate::Full, true, "full"), (Estimate::Homogeneous, false, "homogeneous")] {
        let data = SweepData::new(cfg.params.n, 0.0, boundary).sample(&grid);
        let mut r = lambda_sweep(&data, &lams, &cfg.params, &grid, &spec, kind)?;
        r.pass = r.sup <= cfg.tolerances.sweep_factor * r.median;
        for e in &r.entries {
            table.push(vec![e.lambda_re, e.lambda_im], format!("{name}-ratio"), Some(e.ratio));
        }
        out_fix.insert(format!("{name}/rho0"), r.entries[0].ratio);
        out_fix.insert(format!("{name}/sup"), r.sup);
        reports.push(r);
    }
    let pass = reports.iter().all(|r| r.pass);
    let mut out = Outcome::new(pass, json!({ "reports": reports }), table);
    out.fixtures = out_fix;
    Ok(out)
}

/// The n-sample family spread over the dyadic sweep, with phase-shifted data.
pub fn rbound_family(params: &SectorParams, grid: &HalfSpaceGrid, samples: usize, depth: u32) -> Vec<(C64, HalfSpaceData)> {
    let lams = dyadic_sequence(params.c0, depth, 0.0);
    let last = samples.saturating_sub(1).max(1);
    (0..samples).map(|j| (lams[j * depth as usize / last], SweepData::new(params.n, 0.4 * j as f64, true).sample(grid))).collect()
}

fn estimate_rbound(cfg: &RunConfig) -> Result<Outcome> {
    let rc = &cfg.rbound;
    let grid = cfg.halfspace.grid(cfg.params.n)?;
    let fam = rbound_family(&cfg.params, &grid, rc.samples, cfg.sweep.depth);
    let (im, da) = sample_stacks(&fam, &cfg.params, &grid)?;
    let mut estimates = Vec::new();
    let mut table = Table::new(&["seed"]);
    for k in 0..rc.seeds {
        let seed = cfg.seed.wrapping_add(k);
        let e = rbound_from_stacks(&im, &da, &grid, &RboundOptions { trials: rc.trials, q: rc.q, seed })?;
        table.push(vec![seed as f64], "rbound", Some(e.value));
        estimates.push(e);
    }
    let vals: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let pass = vals.iter().all(|v| v.is_finite() && (v - mean).abs() <= cfg.tolerances.rbound_spread * mean);
    let mut out = Outcome::new(pass, json!({ "estimates": estimates, "mean": mean }), table);
    out.fixtures.insert("mean".into(), mean);
    Ok(out)
}

fn calibrate(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params;
    let probe = calibration_probe_grid(p.n, p.a, p.beta, p.epsilon, &cfg.scan.grid)?;
    let cal = calibrate_c0(p.n, p.a, p.beta, p.epsilon, &probe)?;
    let mut table = Table::new(&[]);
    table.push(vec![], "c0", Some(cal.c0));
    table.push(vec![], "margin", Some(cal.margin));
    let mut out = Outcome::new(true, json!({ "calibration": cal, "configured_c0_admissible": p.c0 <= cal.c0 }), table);
    out.fixtures.insert("c0".into(), cal.c0);
    Ok(out)
}

/// Runs one command and returns its report; field outputs are written to
/// `out` when given.
pub fn execute(command: Command, cfg: &RunConfig, out: Option<&Path>) -> Result<Report> {
    let o = match command {
        Command::ScanBounds => scan_bounds(cfg),
        Command::CheckMultipliers => check_multipliers(cfg),
        Command::CheckIdentities => check_identities(cfg),
        Command::SolveWholespace => solve_wholespace_cmd(cfg),
        Command::SolveHalfspace => solve_halfspace_cmd(cfg),
        Command::VerifyOracle => verify_oracle(cfg),
        Command::SweepLambda => sweep_lambda(cfg),
        Command::EstimateRbound => estimate_rbound(cfg),
        Command::CalibrateC0 => calibrate(cfg),
    }?;
    if let Some(dir) = out {
        for (name, f) in &o.fields {
            let mut w = BufWriter::new(File::create(dir.join(format!("{}-{name}.qths", command.name())))?);
            f.write_to(&mut w)?;
            w.flush()?;
        }
    }
    let timestamp_unix = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: command.name().to_string(),
        config: cfg.clone(),
        timestamp_unix,
        pass: o.pass,
        results: o.results,
        fixtures: o.fixtures,
        table: o.table,
    })
}

fn env_get<'a>(env: &'a [(String, String)], key: &str) -> Option<&'a str> {
    env.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn usage(msg: impl std::fmt::Display) -> i32 {
    eprintln!("qths: {msg}");
    2
}

/// Full CLI entry with explicit arguments and environment.
pub fn run(args: &[String], env: &[(String, String)]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let config_path = cli.config.clone().or_else(|| env_get(env, "QTHS_CONFIG").map(PathBuf::from));
    let mut cfg = match RunConfig::load(config_path.as_deref(), env) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let seed = match (cli.seed, env_get(env, "QTHS_SEED")) {
        (Some(s), _) => Some(s),
        (None, Some(s)) => match s.parse() {
            Ok(v) => Some(v),
            Err(_) => return usage(format!("QTHS_SEED = {s} is not an integer")),
        },
        _ => None,
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let format = match (cli.format, env_get(env, "QTHS_FORMAT")) {
        (Some(f), _) => f,
        (None, Some(s)) => match Format::from_str(s, true) {
            Ok(f) => f,
            Err(_) => return usage(format!("QTHS_FORMAT = {s} is not json or csv")),
        },
        _ => Format::Json,
    };
    let jobs = match (cli.jobs, env_get(env, "QTHS_JOBS")) {
        (Some(j), _) => Some(j),
        (None, Some(s)) => match s.parse() {
            Ok(v) => Some(v),
            Err(_) => return usage(format!("QTHS_JOBS = {s} is not an integer")),
        },
        _ => None,
    };
    if let Some(j) = jobs {
        if j == 0 {
            return usage("--jobs must be positive");
        }
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let out = cli.out.clone().or_else(|| env_get(env, "QTHS_OUT").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = std::fs::create_dir_all(&out) {
        return usage(format!("{}: {e}", out.display()));
    }
    let report = match execute(cli.command, &cfg, Some(&out)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("qths {}: {e}", cli.command.name());
            return 1;
        }
    };
    let ext = match format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    let path = out.join(format!("{}.{ext}", cli.command.name()));
    if let Err(e) = emit(&report, format, &path) {
        eprintln!("qths {}: {e}", cli.command.name());
        return 1;
    }
    println!("{}: {} ({})", cli.command.name(), if report.pass { "PASS" } else { "FAIL" }, path.display());
    if report.pass {
        0
    } else {
        1
    }
}

pub fn run_from_args() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with("QTHS_")).collect();
    run(&args, &env)
}
