//! The `superball` command-line front end.
//!
//! Every invocation is first turned into a [`RunConfig`], which is echoed
//! verbatim (with defaults filled in) into each output so a run can be
//! replayed with `superball run --config <file>`.
//!
//! Exit codes: 0 success, 2 invalid input, 3 computation failure,
//! 4 failed check (e.g. an invalid packing certificate).

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constants::{compute_constant_chain, density_bound_from_chain, pressure_bound_formula};
use crate::error::{Error, Result};
use crate::geometry::{mc_unit_ball_volume, BlockSpec, Region, SpaceParams};
use crate::gibbs::{exact_grand_partition, merge_estimates, ChainOptions, ModelParams, TraceRow};
use crate::lattice_graph::{self, OrderRule, PackOptions, PackingCertificate, Representative};
use crate::seed::derive_seed;
use crate::thermo::{self, PressureOptions};

/// Environment variable naming the directory that relative output paths are
/// resolved against.
pub const OUT_DIR_ENV: &str = "SUPERBALL_OUT_DIR";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    #[default]
    Torus,
    Ball,
}

/// Unit of lengths given on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LengthUnit {
    #[default]
    Absolute,
    /// Multiples of the unit-volume radius `r_unit`.
    RUnit,
}

impl LengthUnit {
    fn scale(self, space: &SpaceParams) -> f64 {
        match self {
            LengthUnit::Absolute => 1.0,
            LengthUnit::RUnit => space.r_unit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceArgs {
    /// Norm exponent p.
    #[arg(long)]
    pub p: f64,
    /// Block cuts, e.g. 0,2,5.
    #[arg(long, value_delimiter = ',', required = true)]
    pub cuts: Vec<usize>,
}

impl SpaceArgs {
    fn build(&self) -> Result<SpaceParams> {
        SpaceParams::new(self.p, BlockSpec::new(self.cuts.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionArgs {
    #[arg(long, value_enum, default_value_t)]
    pub region: RegionKind,
    /// Torus side or ball radius.
    #[arg(long)]
    pub size: f64,
    /// Unit of --size and --radius.
    #[arg(long, value_enum, default_value_t)]
    pub units: LengthUnit,
    /// Superball radius r (default: r_unit).
    #[arg(long)]
    pub radius: Option<f64>,
}

impl RegionArgs {
    fn model(&self, space: &SpaceParams, fugacity: f64) -> Result<ModelParams> {
        let scale = self.units.scale(space);
        let size = self.size * scale;
        let region = match self.region {
            RegionKind::Torus => Region::Torus { side: size },
            RegionKind::Ball => Region::Ball { radius: size },
        };
        let radius = self.radius.map_or(space.r_unit(), |r| r * scale);
        ModelParams::with_radius(space.clone(), region, fugacity, radius)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub p: f64,
    /// Dimensions for the density-bound table.
    #[arg(long = "n", value_delimiter = ',', default_values_t = [8u32, 16, 32, 48])]
    pub dims: Vec<u32>,
    /// Also evaluate the fugacity balance at this λ.
    #[arg(long)]
    pub fugacity: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Radius whose ball volume is reported.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Samples for the rejection-sampling cross-check (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub mc_samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 10_000)]
    pub burnin: u64,
    /// Free-volume probes per sample.
    #[arg(long, default_value_t = 64)]
    pub probes: u32,
    /// Steps between samples.
    #[arg(long, default_value_t = 10)]
    pub interval: u64,
    #[arg(long, default_value_t = 32)]
    pub batches: usize,
}

impl ChainArgs {
    fn options(&self) -> ChainOptions {
        ChainOptions {
            steps: self.steps,
            burn_in: self.burnin,
            fv_probes: self.probes,
            sample_interval: self.interval,
            batches: self.batches,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    #[arg(long)]
    pub fugacity: f64,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    /// CSV trace (one row per free-volume sample).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary (default: stdout).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Radius of the ambient ball B(0, R).
    #[arg(long = "R")]
    pub big_r: f64,
    /// Cube side (default: just below the smallness threshold).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Unit of --R and --eps.
    #[arg(long, value_enum, default_value_t)]
    pub units: LengthUnit,
    #[arg(long, value_enum, default_value_t)]
    pub order: OrderRule,
    #[arg(long, default_value_t = lattice_graph::DEFAULT_EDGE_CAP)]
    pub edge_cap: u64,
    /// Vertices sampled for the local sparsity statistic (0: all).
    #[arg(long, default_value_t = 2000)]
    pub sparsity_sample: usize,
    /// Certificate file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    /// Certificate to check.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    #[arg(long)]
    pub fugacity: f64,
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda0_ratio: f64,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    /// Number of centers t.
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ThermoCommand {
    /// Pressure by thermodynamic integration.
    Pressure(PressureArgs),
    /// Entropy density from the packing probability.
    Entropy(EntropyArgs),
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CommandConfig {
    /// Constant chain and density-bound table.
    Constants(ConstantsArgs),
    /// Superball volume and unit-volume radius.
    Volume(VolumeArgs),
    /// Grand canonical birth–death simulation.
    Simulate(SimulateArgs),
    /// Lattice-graph packing with certificate.
    Pack(PackArgs),
    /// Re-check a packing certificate.
    Verify(VerifyArgs),
    /// Pressure and entropy estimators.
    Thermo {
        #[command(subcommand)]
        which: ThermoCommand,
    },
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandConfig,
    pub format: OutputFormat,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RunArgs {
    /// JSON RunConfig, e.g. the `config` object of an earlier output.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
enum TopCommand {
    #[command(flatten)]
    Task(CommandConfig),
    /// Replay a saved RunConfig.
    Run(RunArgs),
}

#[derive(Debug, Parser)]
#[command(name = "superball", version, about = "Superball packings: constants, simulation and certified constructions")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t)]
    format: OutputFormat,
    #[command(subcommand)]
    command: TopCommand,
}

/// What a run produced besides files.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Text for stdout (may be empty when everything went to files).
    pub stdout: String,
    /// A failed check, reported after the output is written.
    pub violation: Option<String>,
    pub warnings: Vec<String>,
}

fn resolve_out(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes via a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let path = resolve_out(path);
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::input(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .map_err(|e| Error::input(format!("cannot write in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)
        .map_err(|e| Error::input(format!("write to {} failed: {e}", path.display())))?;
    tmp.persist(&path)
        .map_err(|e| Error::input(format!("cannot move output to {}: {e}", path.display())))?;
    Ok(())
}

fn envelope(config: &RunConfig, result: Value) -> Value {
    json!({
        "tool": "superball",
        "version": VERSION,
        "config": config,
        "result": result,
    })
}

fn flatten_text(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_text(&key, x, out);
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let parts: Vec<String> = items.iter().map(|x| x.to_string()).collect();
            out.push((prefix.to_string(), format!("[{}]", parts.join(", "))));
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten_text(&format!("{prefix}[{i}]"), x, out);
            }
        }
        _ => out.push((prefix.to_string(), v.to_string())),
    }
}

/// Aligned `key  value` lines for a JSON document.
pub fn render_text(v: &Value) -> String {
    let mut rows = Vec::new();
    flatten_text("", v, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, x) in rows {
        let _ = writeln!(s, "{k:<width$}  {x}");
    }
    s
}

fn render(config: &RunConfig, doc: &Value) -> String {
    match config.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(doc).expect("serializable document");
            s.push('\n');
            s
        }
        OutputFormat::Text => render_text(doc),
    }
}

/// Sends a document to `out` (atomically) or returns it for stdout.
fn emit(config: &RunConfig, doc: &Value, out: Option<&Path>) -> Result<String> {
    let text = render(config, doc);
    match out {
        Some(p) => {
            write_atomic(p, text.as_bytes())?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// Fills defaults that depend on other inputs so the echoed config is complete.
pub fn resolve(mut config: RunConfig) -> Result<RunConfig> {
    if let CommandConfig::Pack(args) = &mut config.command {
        if args.eps.is_none() {
            let space = args.space.build()?;
            let eps = lattice_graph::eps_threshold(&space) * (1.0 - 1e-6);
            args.eps = Some(eps / args.units.scale(&space));
        }
    }
    Ok(config)
}

/// Runs one resolved configuration.
pub fn run(config: &RunConfig) -> Result<Outcome> {
    let mut warnings = Vec::new();
    let mut violation = None;
    let stdout = match &config.command {
        CommandConfig::Constants(a) => run_constants(config, a)?,
        CommandConfig::Volume(a) => run_volume(config, a)?,
        CommandConfig::Simulate(a) => run_simulate(config, a)?,
        CommandConfig::Pack(a) => run_pack(config, a, &mut warnings)?,
        CommandConfig::Verify(a) => run_verify(config, a, &mut violation)?,
        CommandConfig::Thermo { which: ThermoCommand::Pressure(a) } => run_pressure(config, a)?,
        CommandConfig::Thermo { which: ThermoCommand::Entropy(a) } => run_entropy(config, a)?,
    };
    Ok(Outcome { stdout, violation, warnings })
}

fn run_constants(config: &RunConfig, a: &ConstantsArgs) -> Result<String> {
    let chain = compute_constant_chain(a.p)?;
    if a.dims.is_empty() || a.dims.contains(&0) {
        return Err(Error::input("dimensions must be positive"));
    }
    let mut table = Vec::new();
    for &n in &a.dims {
        let b = density_bound_from_chain(n, &chain);
        let at = a.fugacity.map(|l| b.at_fugacity(l)).transpose()?;
        table.push(json!({
            "bound": b,
            "pressure_formula_at_threshold": pressure_bound_formula(n, b.fugacity_threshold),
            "fugacity_balance": at,
        }));
    }
    let doc = envelope(config, json!({ "chain": chain, "density_bounds": table }));
    emit(config, &doc, a.out.as_deref())
}

fn run_volume(config: &RunConfig, a: &VolumeArgs) -> Result<String> {
    let space = a.space.build()?;
    if !(a.radius.is_finite() && a.radius > 0.0) {
        return Err(Error::input("radius must be positive"));
    }
    let mc = if a.mc_samples > 0 {
        let est = mc_unit_ball_volume(&space, a.mc_samples, a.seed)?;
        let z = (est.estimate - space.unit_ball_volume()) / est.se;
        Some(json!({ "oracle": est, "z_score": z }))
    } else {
        None
    };
    let doc = envelope(
        config,
        json!({
            "n": space.dim(),
            "p": space.p(),
            "p_exceeds_two": space.exceeds_two(),
            "unit_ball_volume": space.unit_ball_volume(),
            "r_unit": space.r_unit(),
            "radius": a.radius,
            "ball_volume": space.ball_volume(a.radius),
            "monte_carlo": mc,
        }),
    );
    emit(config, &doc, a.out.as_deref())
}

fn trace_csv(config: &RunConfig, rows: &[(usize, Vec<TraceRow>)]) -> Result<String> {
    let cfg = serde_json::to_string(config).map_err(|e| Error::computation(e.to_string()))?;
    let mut s = String::new();
    let _ = writeln!(s, "# superball {VERSION}");
    let _ = writeln!(s, "# config {cfg}");
    s.push_str("replica,step,count,fv_probe_hits,probes,move,accepted\n");
    for (rep, trace) in rows {
        for r in trace {
            let _ = writeln!(
                s,
                "{rep},{},{},{},{},{},{}",
                r.step,
                r.count,
                r.fv_probe_hits,
                r.probes,
                if r.birth { "birth" } else { "death" },
                u8::from(r.accepted)
            );
        }
    }
    Ok(s)
}

fn run_simulate(config: &RunConfig, a: &SimulateArgs) -> Result<String> {
    use rayon::prelude::*;
    let space = a.space.build()?;
    let params = a.region.model(&space, a.fugacity)?;
    let opts = a.chain.options();
    opts.validate()?;
    if a.replicas == 0 {
        return Err(Error::input("replicas must be at least 1"));
    }
    let want_trace = a.out.is_some();
    let runs: Vec<(crate::gibbs::ChainEstimate, Vec<TraceRow>)> = (0..a.replicas)
        .into_par_iter()
        .map(|i| {
            let seed = if a.replicas == 1 { a.seed } else { derive_seed(a.seed, i as u64) };
            let mut rows = Vec::new();
            let est = crate::gibbs::run_chain_traced(&params, &opts, seed, |r| {
                if want_trace {
                    rows.push(*r);
                }
            })?;
            Ok((est, rows))
        })
        .collect::<Result<_>>()?;
    let estimates: Vec<_> = runs.iter().map(|(e, _)| e.clone()).collect();
    let merged = merge_estimates(&estimates)?;
    if let Some(out) = &a.out {
        let rows: Vec<(usize, Vec<TraceRow>)> = runs.into_iter().map(|(_, r)| r).enumerate().collect();
        write_atomic(out, trace_csv(config, &rows)?.as_bytes())?;
    }
    let exact = exact_grand_partition(&params).ok();
    let doc = envelope(
        config,
        json!({
            "volume": params.volume(),
            "radius": params.radius,
            "r_unit": space.r_unit(),
            "estimate": merged,
            "replicas": if a.replicas > 1 { Some(&estimates) } else { None },
            "exact": exact,
        }),
    );
    emit(config, &doc, a.summary.as_deref())
}

fn run_pack(config: &RunConfig, a: &PackArgs, warnings: &mut Vec<String>) -> Result<String> {
    let space = a.space.build()?;
    let scale = a.units.scale(&space);
    let eps = a.eps.ok_or_else(|| Error::input("eps unresolved"))? * scale;
    let opts = PackOptions {
        order: a.order,
        representative: Representative::Center,
        edge_cap: a.edge_cap,
        sparsity_sample: (a.sparsity_sample > 0).then_some(a.sparsity_sample),
    };
    let (mut cert, report) = lattice_graph::pack(&space, a.big_r * scale, eps, &opts)?;
    warnings.extend(report.lattice.warnings.iter().cloned());
    cert.meta = Some(json!({
        "tool": "superball",
        "version": VERSION,
        "config": config,
        "report": report,
    }));
    let doc = serde_json::to_value(&cert).map_err(|e| Error::computation(e.to_string()))?;
    emit(config, &doc, a.out.as_deref())
}

fn run_verify(config: &RunConfig, a: &VerifyArgs, violation: &mut Option<String>) -> Result<String> {
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", a.input.display())))?;
    let cert: PackingCertificate = serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("malformed certificate {}: {e}", a.input.display())))?;
    let v = lattice_graph::verify_packing(&cert)?;
    if !v.valid {
        *violation = Some(format!(
            "certificate {} is not a valid packing (min distance {:?}, 2r = {}, all inside: {})",
            a.input.display(),
            v.min_pairwise_distance,
            2.0 * cert.radius,
            v.all_inside
        ));
    }
    let doc = envelope(config, serde_json::to_value(&v).map_err(|e| Error::computation(e.to_string()))?);
    emit(config, &doc, a.out.as_deref())
}

fn run_pressure(config: &RunConfig, a: &PressureArgs) -> Result<String> {
    let space = a.space.build()?;
    let params = a.region.model(&space, a.fugacity)?;
    let opts = PressureOptions {
        grid_size: a.grid,
        lambda0_ratio: a.lambda0_ratio,
        chain: a.chain.options(),
    };
    let res = thermo::pressure_estimate(&params, a.fugacity, &opts, a.seed)?;
    let exact = exact_grand_partition(&params).ok().map(|g| g.ln_z / g.volume);
    let doc = envelope(config, json!({ "estimate": res, "exact": exact }));
    emit(config, &doc, a.out.as_deref())
}

fn run_entropy(config: &RunConfig, a: &EntropyArgs) -> Result<String> {
    let space = a.space.build()?;
    let params = a.region.model(&space, 1.0)?;
    let res = thermo::entropy_estimate(&params, a.count, a.samples, a.seed)?;
    let exact = if params.dim() == 1 || params.holds_at_most_one() {
        let z = crate::gibbs::canonical_partition(a.count, &params, &Default::default())?;
        let t = a.count as f64;
        let ln_p = z.ln_value + statrs::function::gamma::ln_gamma(t + 1.0) - t * params.volume().ln();
        ln_p.is_finite().then_some(ln_p / t)
    } else {
        None
    };
    let doc = envelope(config, json!({ "estimate": res, "exact": exact }));
    emit(config, &doc, a.out.as_deref())
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("{} is not JSON: {e}", path.display())))?;
    // accept a bare RunConfig or any output envelope carrying one
    let cfg = match v.get("config") {
        Some(c) if v.get("tool").is_some() => c.clone(),
        _ => match v.pointer("/meta/config") {
            Some(c) => c.clone(),
            None => v,
        },
    };
    serde_json::from_value(cfg).map_err(|e| Error::input(format!("invalid config in {}: {e}", path.display())))
}

/// Parses arguments, runs, prints, and maps errors onto exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = match cli.command {
        TopCommand::Task(command) => Ok(RunConfig {
            command,
            format: cli.format,
            threads: cli.threads,
        }),
        TopCommand::Run(r) => load_config(&r.config),
    };
    let result = config.and_then(resolve).and_then(|config| {
        if let Some(t) = config.threads {
            if t == 0 {
                return Err(Error::input("--threads must be positive"));
            }
            // a second initialisation in the same process is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        run(&config)
    });
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", outcome.stdout);
            match outcome.violation {
                Some(msg) => {
                    eprintln!("violation: {msg}");
                    ExitCode::from(4)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

pub fn main() -> ExitCode {
    main_with_args(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        let cli = Cli::try_parse_from(args).unwrap();
        match cli.command {
            TopCommand::Task(command) => RunConfig { command, format: cli.format, threads: cli.threads },
            TopCommand::Run(_) => panic!("unexpected run"),
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = parse(&[
            "superball", "simulate", "--p", "1.5", "--cuts", "0,1,2", "--size", "8", "--units", "r-unit",
            "--fugacity", "2", "--steps", "1000", "--burnin", "100",
        ]);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let cfg = parse(&["superball", "constants", "--p", "2"]);
        let mut v = serde_json::to_value(&cfg).unwrap();
        v["command"]["constants"]["bogus"] = json!(1);
        assert!(serde_json::from_value::<RunConfig>(v.clone()).is_err());
        let mut w = serde_json::to_value(&cfg).unwrap();
        w["extra"] = json!(true);
        assert!(serde_json::from_value::<RunConfig>(w).is_err());
    }

    #[test]
    fn pack_eps_is_resolved() {
        let cfg = resolve(parse(&["superball", "pack", "--p", "1.5", "--cuts", "0,1,2", "--R", "3", "--units", "r-unit"])).unwrap();
        match cfg.command {
            CommandConfig::Pack(a) => {
                let e = a.eps.unwrap();
                assert!(e > 0.0 && e < 0.12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn text_rendering_is_aligned() {
        let s = render_text(&json!({"a": 1, "bb": {"c": [1, 2]}}));
        assert_eq!(s, "a     1\nbb.c  [1, 2]\n");
    }
}
