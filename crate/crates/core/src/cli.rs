//! Command-line front end.
//!
//! Every command prints one JSON [`RunReport`] on stdout. Exit codes: 0 when
//! every check passes, 1 when a check or pipeline stage fails, 2 when the
//! arguments or input files are invalid. Artifacts are written only under
//! `--out`; without it nothing touches the filesystem.
//!
//! All randomness derives from `--seed` (default [`DEFAULT_SEED`]).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::embeddings::{expander_obstruction, ExpanderCertificate};
use crate::formats::{
    load_ball, load_cp_map, load_groupoid_kernel, load_kernel, read_json, EmbeddingFile, KernelFile,
    SpaceOptions, SpaceRef, SpaceSpec,
};
use crate::groupoid::{check_groupoid_nt, check_groupoid_pd, ArrowSample};
use crate::kernels::{check_negative_type, check_positive_definite, schoenberg_transform, Kernel, DEFAULT_TOL};
use crate::pipeline::{run_pipeline, BaseKernel, PipelineConfig, DEFAULT_SCHEDULE_LEN, DEFAULT_TERMS};
use crate::random::{random_regular_graph, rng, sample_indices};
use crate::roe::{induced_kernel, verify_property_i, verify_property_ii, verify_property_iii, CpMap};
use crate::spaces::{GroupBall, DEFAULT_ELEMENT_CAP};

pub const SCHEMA_VERSION: &str = "1";
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(name = "coarsekit", version, about = "Kernel checks, embeddings and Roe-algebra truncations on finite metric spaces")]
pub struct Cli {
    /// Relative tolerance for eigenvalue checks.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Directory for report and artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Ball margin W (defaults to the radius).
    #[arg(long, global = true)]
    pub margin: Option<u32>,
    /// Cap on enumerated group elements.
    #[arg(long, global = true, default_value_t = DEFAULT_ELEMENT_CAP)]
    pub max_elements: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify kernel files.
    Check(CheckArgs),
    /// Proper NT kernel, Schoenberg family, synthesis, embedding, compression.
    Pipeline(PipelineArgs),
    /// Operators and completely positive maps on a group ball.
    #[command(subcommand)]
    Roe(RoeCommand),
    /// Poincaré certificates on seeded random regular graphs.
    Expander(ExpanderArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKindArg {
    Pd,
    Nt,
    GroupoidPd,
    GroupoidNt,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub kind: CheckKindArg,
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Number of base points sampled for groupoid checks (default: all interior points).
    #[arg(long)]
    pub sample_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Metric,
    Resistance,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Space file.
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TERMS)]
    pub terms: usize,
    #[arg(long, default_value_t = DEFAULT_SCHEDULE_LEN)]
    pub schedule_len: usize,
    #[arg(long, value_enum, default_value_t = KernelArg::Metric)]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 0)]
    pub basepoint: usize,
}

#[derive(Debug, Args)]
pub struct RoeInputs {
    /// Group-ball space file.
    #[arg(long)]
    pub space: PathBuf,
    /// CP map file.
    #[arg(long)]
    pub map: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum RoeCommand {
    /// `u(s,t) = ⟨δ_s, T(λ_{st⁻¹}) δ_t⟩`.
    InducedKernel(RoeInputs),
    /// Block positivity against scalar positivity on random samples.
    PropertyI {
        #[command(flatten)]
        inputs: RoeInputs,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        sample_size: usize,
    },
    /// Decay of `u` for a finite-rank map.
    PropertyIi(RoeInputs),
    /// Convergence table for a schedule of maps.
    PropertyIii {
        #[arg(long)]
        space: PathBuf,
        /// Explicit schedule; when absent, Schur multipliers by `e^{−d/k}`, `k = 1..schedule-len`.
        #[arg(long = "map")]
        maps: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        schedule_len: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u32, 2, 3])]
        radius: Vec<u32>,
    },
}

#[derive(Debug, Args)]
pub struct ExpanderArgs {
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Vertex counts to run instead of `--n`.
    #[arg(long, value_delimiter = ',')]
    pub family: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandEcho {
    pub name: String,
    pub params: BTreeMap<String, Json>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: &'static str,
    pub command: CommandEcho,
    pub input_digests: BTreeMap<String, String>,
    pub verdicts: Vec<Verdict>,
    pub tables: BTreeMap<String, Json>,
    /// Paths relative to `--out`.
    pub artifacts: Vec<String>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl RunReport {
    fn new(name: &str, params: BTreeMap<String, Json>, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: CommandEcho {
                name: name.to_string(),
                params,
            },
            input_digests: BTreeMap::new(),
            verdicts: Vec::new(),
            tables: BTreeMap::new(),
            artifacts: Vec::new(),
            seed,
            wall_clock_ms: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    fn verdict(&mut self, name: impl Into<String>, passed: bool, detail: impl Serialize) {
        self.verdicts.push(Verdict {
            name: name.into(),
            passed,
            detail: to_json(&detail),
        });
    }

    /// Pretty JSON without the wall clock, identical across reruns.
    pub fn body_json(&self) -> String {
        let mut body = self.clone();
        body.wall_clock_ms = None;
        serde_json::to_string_pretty(&body).expect("reports serialize")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

fn to_json(value: &impl Serialize) -> Json {
    serde_json::to_value(value).expect("values serialize")
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable input: exit 2.
    Input(String),
    /// A pipeline stage or required computation failed: exit 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct Context<'a> {
    cli: &'a Cli,
    options: SpaceOptions,
}

impl Context<'_> {
    fn params(&self, extra: &[(&str, Json)]) -> BTreeMap<String, Json> {
        let mut p: BTreeMap<String, Json> = extra.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        p.insert("tol".into(), json!(self.cli.tol));
        p.insert("margin".into(), json!(self.cli.margin));
        p.insert("max_elements".into(), json!(self.cli.max_elements));
        p
    }

    fn write_artifact(&self, report: &mut RunReport, name: &str, contents: &str) -> Result<(), CliError> {
        if let Some(dir) = &self.cli.out {
            fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| input(format!("{}: {e}", path.display())))?;
            report.artifacts.push(name.to_string());
        }
        Ok(())
    }

    fn ball(&self, path: &Path, report: &mut RunReport) -> Result<(Arc<GroupBall>, SpaceSpec), CliError> {
        report.input_digests.insert(path.display().to_string(), digest(path)?);
        load_ball(path, self.options).map_err(input)
    }
}

/// Parses arguments and runs the command; the caller prints and exits.
pub fn execute(cli: &Cli) -> Result<RunReport, CliError> {
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        return Err(input("--tol must be a positive number"));
    }
    let ctx = Context {
        cli,
        options: SpaceOptions {
            margin: cli.margin,
            max_elements: cli.max_elements,
        },
    };
    let started = Instant::now();
    let mut report = match &cli.command {
        Command::Check(args) => cmd_check(&ctx, args)?,
        Command::Pipeline(args) => cmd_pipeline(&ctx, args)?,
        Command::Roe(cmd) => cmd_roe(&ctx, cmd)?,
        Command::Expander(args) => cmd_expander(&ctx, args)?,
    };
    report.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    if cli.out.is_some() {
        let body = report.to_json();
        ctx.write_artifact(&mut report, "report.json", &body)?;
    }
    Ok(report)
}

fn cmd_check(ctx: &Context, args: &CheckArgs) -> Result<RunReport, CliError> {
    let kind = to_json(&args.kind);
    let files: Vec<Json> = args.files.iter().map(|f| json!(f.display().to_string())).collect();
    let params = ctx.params(&[("kind", kind), ("files", json!(files)), ("sample_size", json!(args.sample_size))]);
    let mut report = RunReport::new("check", params, ctx.cli.seed);
    let tol = ctx.cli.tol;
    for path in &args.files {
        let name = path.display().to_string();
        report.input_digests.insert(name.clone(), digest(path)?);
        let result = match args.kind {
            CheckKindArg::Pd | CheckKindArg::Nt => {
                let (k, _, _) = load_kernel(path, ctx.options).map_err(input)?;
                if args.kind == CheckKindArg::Pd {
                    check_positive_definite(&k, tol)
                } else {
                    check_negative_type(&k, tol)
                }
                .map_err(input)?
            }
            CheckKindArg::GroupoidPd | CheckKindArg::GroupoidNt => {
                let (g, ball, _) = load_groupoid_kernel(path, ctx.options).map_err(input)?;
                let n = ball.interior_len();
                let bases = match args.sample_size {
                    Some(k) if k < n => {
                        let mut s = sample_indices(&mut rng(ctx.cli.seed), n, k);
                        s.sort_unstable();
                        s
                    }
                    _ => (0..n).collect(),
                };
                if args.kind == CheckKindArg::GroupoidPd {
                    check_groupoid_pd(&g, &bases, &ArrowSample::Admissible, tol)
                } else {
                    check_groupoid_nt(&g, &bases, &ArrowSample::Admissible, tol)
                }
                .map_err(input)?
            }
        };
        report.verdict(name, result.verdict, &result);
    }
    Ok(report)
}

fn cmd_pipeline(ctx: &Context, args: &PipelineArgs) -> Result<RunReport, CliError> {
    let base = match args.kernel {
        KernelArg::Metric => BaseKernel::Metric,
        KernelArg::Resistance => BaseKernel::Resistance,
    };
    let params = ctx.params(&[
        ("space", json!(args.space.display().to_string())),
        ("terms", json!(args.terms)),
        ("schedule_len", json!(args.schedule_len)),
        ("kernel", to_json(&base)),
        ("basepoint", json!(args.basepoint)),
    ]);
    let mut report = RunReport::new("pipeline", params, ctx.cli.seed);
    report
        .input_digests
        .insert(args.space.display().to_string(), digest(&args.space)?);
    let spec: SpaceSpec = read_json(&args.space).map_err(input)?;
    let loaded = spec.build(ctx.options).map_err(input)?;
    if args.basepoint >= loaded.space().len() {
        return Err(input(format!("basepoint {} is outside the space", args.basepoint)));
    }
    let config = PipelineConfig {
        base,
        terms: args.terms,
        schedule_len: args.schedule_len,
        basepoint: args.basepoint,
        tol: ctx.cli.tol,
    };
    let out = run_pipeline(loaded.space(), loaded.graph(), &config).map_err(failed)?;
    for stage in &out.stages {
        report.verdict(stage.stage, stage.passed, &stage.detail);
    }
    report.tables.insert("schedule".into(), json!(out.schedule));
    report.tables.insert("selected".into(), json!(out.synthesis.selected));
    report.tables.insert("base_profile".into(), to_json(&out.base_profile));
    report
        .tables
        .insert("synthesized_profile".into(), to_json(&out.synthesized_profile));
    report.tables.insert("compression".into(), to_json(&out.compression));
    report.tables.insert(
        "embedding".into(),
        json!({"dim": out.embedding.dim(), "round_trip_error": out.round_trip_error}),
    );

    let space_ref = SpaceRef::Inline(spec);
    let kernel = KernelFile::from_kernel(space_ref.clone(), &out.synthesis.kernel);
    ctx.write_artifact(&mut report, "kernel.json", &pretty(&kernel))?;
    let embedding = EmbeddingFile::from_embedding(space_ref, &out.embedding);
    ctx.write_artifact(&mut report, "embedding.json", &pretty(&embedding))?;
    ctx.write_artifact(&mut report, "compression.csv", &out.compression.to_csv())?;
    Ok(report)
}

fn pretty(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("artifacts serialize")
}

fn cmd_roe(ctx: &Context, cmd: &RoeCommand) -> Result<RunReport, CliError> {
    let tol = ctx.cli.tol;
    match cmd {
        RoeCommand::InducedKernel(inputs) => {
            let mut report = roe_report(ctx, "roe induced-kernel", inputs, &[]);
            let (ball, spec) = ctx.ball(&inputs.space, &mut report)?;
            let map = load_map(&inputs.map, &ball, &mut report)?;
            let u = induced_kernel(&map, &ball).map_err(failed)?;
            let pd = check_positive_definite(&u.kernel, tol).map_err(failed)?;
            report.tables.insert("map_kind".into(), json!(map.kind()));
            report.verdict("induced", true, json!({"points": u.kernel.len()}));
            report.tables.insert("positive_definite".into(), to_json(&pd));
            let file = KernelFile::from_kernel(SpaceRef::Inline(spec), &u.kernel);
            ctx.write_artifact(&mut report, "induced_kernel.json", &pretty(&file))?;
            Ok(report)
        }
        RoeCommand::PropertyI {
            inputs,
            samples,
            sample_size,
        } => {
            let extra = [("samples", json!(samples)), ("sample_size", json!(sample_size))];
            let mut report = roe_report(ctx, "roe property-i", inputs, &extra);
            let (ball, _) = ctx.ball(&inputs.space, &mut report)?;
            let map = load_map(&inputs.map, &ball, &mut report)?;
            if !map.is_ucp() {
                return Err(input("property-i needs an identity or Schur map"));
            }
            let n = ball.interior_len();
            if *sample_size == 0 || *sample_size > n {
                return Err(input(format!("--sample-size must be in 1..={n}")));
            }
            let mut r = rng(ctx.cli.seed);
            let mut rows = Vec::with_capacity(*samples);
            let mut all_agree = true;
            let mut all_positive = true;
            for _ in 0..*samples {
                let sample = sample_indices(&mut r, n, *sample_size);
                let p = verify_property_i(&map, &ball, &sample, tol).map_err(failed)?;
                all_agree &= p.agree;
                all_positive &= p.block.verdict;
                rows.push(json!({
                    "sample": p.sample,
                    "block": p.block.verdict,
                    "block_eigenvalue": p.block.extremal_eigenvalue,
                    "scalar": p.scalar.verdict,
                    "scalar_eigenvalue": p.scalar.extremal_eigenvalue,
                }));
            }
            report.verdict("block_positive", all_positive, json!({"samples": samples}));
            report.verdict("verdicts_agree", all_agree, json!({"samples": samples}));
            report.tables.insert("samples".into(), json!(rows));
            Ok(report)
        }
        RoeCommand::PropertyIi(inputs) => {
            let mut report = roe_report(ctx, "roe property-ii", inputs, &[]);
            let (ball, _) = ctx.ball(&inputs.space, &mut report)?;
            let map = load_map(&inputs.map, &ball, &mut report)?;
            if !matches!(map, CpMap::FiniteRank(_)) {
                return Err(input("property-ii needs a finite_rank map"));
            }
            let p = verify_property_ii(&map, &ball, &crate::kernels::DEFAULT_EPS_GRID).map_err(failed)?;
            report.verdict("dominated", p.dominated, json!({"max_width": p.max_width}));
            report.verdict("vanishes_beyond_width", p.vanishes_beyond_width, json!({"max_width": p.max_width}));
            report.tables.insert("property_ii".into(), to_json(&p));
            Ok(report)
        }
        RoeCommand::PropertyIii {
            space,
            maps,
            schedule_len,
            radius,
        } => {
            let params = ctx.params(&[
                ("space", json!(space.display().to_string())),
                ("maps", json!(maps.iter().map(|m| m.display().to_string()).collect::<Vec<_>>())),
                ("schedule_len", json!(schedule_len)),
                ("radius", json!(radius)),
            ]);
            let mut report = RunReport::new("roe property-iii", params, ctx.cli.seed);
            let (ball, _) = ctx.ball(space, &mut report)?;
            let schedule = if maps.is_empty() {
                if *schedule_len == 0 {
                    return Err(input("--schedule-len must be positive"));
                }
                let d = Kernel::metric(ball.space().clone());
                (1..=*schedule_len)
                    .map(|k| {
                        let phi = schoenberg_transform(&d, 1.0 / k as f64).map_err(failed)?;
                        CpMap::schur(phi, &ball).map_err(failed)
                    })
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                maps.iter()
                    .map(|m| load_map(m, &ball, &mut report))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let table = verify_property_iii(&schedule, &ball, radius).map_err(failed)?;
            report.verdict("dominated", table.dominated, json!({"rows": table.rows.len()}));
            report.verdict("monotone", table.monotone, json!({"rows": table.rows.len()}));
            report.tables.insert("convergence".into(), to_json(&table.rows));
            ctx.write_artifact(&mut report, "convergence.csv", &table.to_csv())?;
            Ok(report)
        }
    }
}

fn roe_report(ctx: &Context, name: &str, inputs: &RoeInputs, extra: &[(&str, Json)]) -> RunReport {
    let mut all = vec![
        ("space", json!(inputs.space.display().to_string())),
        ("map", json!(inputs.map.display().to_string())),
    ];
    all.extend(extra.iter().cloned());
    RunReport::new(name, ctx.params(&all), ctx.cli.seed)
}

fn load_map(path: &Path, ball: &Arc<GroupBall>, report: &mut RunReport) -> Result<CpMap, CliError> {
    report.input_digests.insert(path.display().to_string(), digest(path)?);
    load_cp_map(path, ball).map_err(input)
}

/// Seed for the `trial`-th graph on `n` vertices.
fn graph_seed(seed: u64, n: usize, trial: usize) -> u64 {
    seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (trial as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Builds one seeded certificate; `None` if no connected regular graph was found.
pub fn expander_certificate(n: usize, degree: usize, seed: u64, tol: f64) -> Result<Option<ExpanderCertificate>, CliError> {
    let Some(graph) = random_regular_graph(&mut rng(seed), n, degree) else {
        return Ok(None);
    };
    let space = Arc::new(graph.metric().map_err(failed)?);
    let config = PipelineConfig {
        base: BaseKernel::Resistance,
        tol,
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&space, Some(&graph), &config).map_err(failed)?;
    expander_obstruction(&graph, &out.embedding).map(Some).map_err(failed)
}

fn cmd_expander(ctx: &Context, args: &ExpanderArgs) -> Result<RunReport, CliError> {
    let family = if args.family.is_empty() { vec![args.n] } else { args.family.clone() };
    let params = ctx.params(&[
        ("n", json!(args.n)),
        ("degree", json!(args.degree)),
        ("trials", json!(args.trials)),
        ("family", json!(family)),
    ]);
    let mut report = RunReport::new("expander", params, ctx.cli.seed);
    for &n in &family {
        if !(n * args.degree).is_multiple_of(2) || args.degree >= n || args.degree == 0 {
            return Err(input(format!(
                "no simple {}-regular graph on {n} vertices: need 0 < degree < n and n·degree even",
                args.degree
            )));
        }
    }
    if args.trials == 0 {
        return Err(input("--trials must be positive"));
    }
    let mut certificates = Vec::new();
    let mut strengths = Vec::new();
    for &n in &family {
        let mut best: Option<f64> = None;
        for trial in 0..args.trials {
            let cert = expander_certificate(n, args.degree, graph_seed(ctx.cli.seed, n, trial), ctx.cli.tol)?
                .ok_or_else(|| failed(format!("no connected {}-regular graph sampled on {n} vertices", args.degree)))?;
            report.verdict(format!("poincare n={n} trial={trial}"), cert.lhs <= cert.rhs * (1.0 + 1e-9), json!({"lhs": cert.lhs, "rhs": cert.rhs}));
            best = Some(best.map_or(cert.obstruction_strength, |b: f64| b.min(cert.obstruction_strength)));
            certificates.push(json!({"n": n, "trial": trial, "certificate": cert}));
        }
        strengths.push(json!({"n": n, "min_obstruction_strength": best}));
    }
    if family.len() > 1 {
        let values: Vec<f64> = strengths
            .iter()
            .map(|s| s["min_obstruction_strength"].as_f64().unwrap_or(f64::NAN))
            .collect();
        let monotone = values.windows(2).all(|w| w[0] <= w[1]);
        report.verdict("obstruction_strength_monotone", monotone, json!(values));
    }
    report.tables.insert("certificates".into(), json!(certificates));
    report.tables.insert("obstruction_strength".into(), json!(strengths));
    ctx.write_artifact(&mut report, "certificates.json", &pretty(&certificates))?;
    Ok(report)
}

/// Full entry point: parse, run, print. Returns the exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let _ = writeln!(stdout, "{}", report.to_json());
            if report.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with_args(std::iter::once("coarsekit").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn write(dir: &Path, name: &str, text: &str) -> String {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p.display().to_string()
    }

    #[test]
    fn check_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let ones = write(
            dir.path(),
            "ones.json",
            r#"{"space":{"kind":"explicit","d":[[0,1],[1,0]]},"values":[[1,1],[1,1]]}"#,
        );
        assert_eq!(run(&["check", "pd", &ones]).0, 0);
        let diag = write(
            dir.path(),
            "diag.json",
            r#"{"space":{"kind":"explicit","d":[[0,1],[1,0]]},"values":[[1,1],[1,0]]}"#,
        );
        let (code, out, _) = run(&["check", "nt", &diag]);
        assert_eq!(code, 1);
        assert!(out.contains("nonzero_diagonal") || out.contains("NonzeroDiagonal") || out.contains("witness"));
        let bad = write(dir.path(), "bad.json", "{");
        assert_eq!(run(&["check", "pd", &bad]).0, 2);
        assert_eq!(run(&["check", "pd", "/nonexistent/file.json"]).0, 2);
        assert_eq!(run(&["frobnicate"]).0, 2);
    }

    #[test]
    fn expander_parameter_errors() {
        assert_eq!(run(&["expander", "--n", "3", "--degree", "3"]).0, 2);
        assert_eq!(run(&["expander", "--n", "7", "--degree", "3"]).0, 2);
    }

    #[test]
    fn pipeline_writes_artifacts_only_under_out() {
        let dir = tempfile::tempdir().unwrap();
        let space = write(dir.path(), "z.json", r#"{"kind":"zn","n":1,"radius":3}"#);
        let (code, out, _) = run(&["pipeline", "--space", &space]);
        assert_eq!(code, 0);
        assert!(out.contains("\"artifacts\": []"));
        let out_dir = dir.path().join("run");
        let (code, _, _) = run(&["--out", out_dir.to_str().unwrap(), "pipeline", "--space", &space]);
        assert_eq!(code, 0);
        for name in ["kernel.json", "embedding.json", "compression.csv", "report.json"] {
            assert!(out_dir.join(name).exists(), "{name}");
        }
        let csv = fs::read_to_string(out_dir.join("compression.csv")).unwrap();
        assert!(csv.starts_with("r,rho_minus,rho_plus\n"));
    }
}
