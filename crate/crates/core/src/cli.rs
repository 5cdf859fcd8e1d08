//! Command line interface.
//!
//! Every command writes one document (JSON or CSV) to standard output or
//! `--output`. Documents carry no timing information, so identical arguments
//! produce identical bytes whatever the thread count.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cluster::{choose_truncation_order, estimate_at_order, ClusterExpansion, ExpansionResult};
use crate::model::{
    load_model, preset, validate_beta, GraphSpec, PresetKind, PresetParams, SpinModel,
};
use crate::oracle::{relative_error, ExactResult, ExactSpectrum, ORACLE_MAX_DIM};
use crate::{Complex, Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RESOURCE: i32 = 2;
pub const EXIT_COMPARE_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qclust", version, about = "Truncated cluster expansion for quantum spin partition functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Approximate log Z with the truncated cluster expansion.
    Estimate(RunArgs),
    /// Compute Z by exact diagonalization.
    Exact(RunArgs),
    /// Run both and check the relative error against epsilon.
    Compare(RunArgs),
    /// Evaluate the expansion on a grid of beta values from 0 to --beta.
    Sweep(SweepArgs),
    /// List the built-in model presets and graph forms.
    Presets(OutputArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model document (JSON).
    #[arg(long, value_name = "PATH", conflicts_with_all = ["preset", "graph", "param"])]
    pub model: Option<PathBuf>,
    /// Preset interaction: tfim, xxz or random_hermitian.
    #[arg(long, value_name = "NAME", requires = "graph")]
    pub preset: Option<PresetKind>,
    /// Graph for the preset: path:N, cycle:N, grid:RxC or random_regular:N:K.
    #[arg(long, value_name = "SPEC", requires = "preset")]
    pub graph: Option<GraphSpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Preset parameter override, e.g. --param h=0.5 (repeatable).
    #[arg(long, value_name = "KEY=VALUE", value_parser = parse_param)]
    pub param: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the document here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Inverse temperature as RE or RE,IM.
    #[arg(long, default_value = "0", value_parser = parse_beta, allow_hyphen_values = true)]
    pub beta: Complex,
    /// Target relative accuracy of Z.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Truncation order m; overrides the choice made from --epsilon.
    #[arg(long, value_name = "M")]
    pub order: Option<usize>,
    /// Evaluate outside the convergence region (results are not guaranteed).
    #[arg(long)]
    pub force_region: bool,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: u32,
    /// Report elapsed time on standard error.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of grid points, including beta = 0.
    #[arg(long, default_value_t = 11, value_parser = clap::value_parser!(u32).range(2..))]
    pub points: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("not a number: {v:?}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_beta(s: &str) -> std::result::Result<Complex, String> {
    let mut parts = s.split(',');
    let mut next = |name: &str| -> std::result::Result<f64, String> {
        match parts.next() {
            None => Ok(0.0),
            Some(p) => {
                let x: f64 = p.trim().parse().map_err(|_| format!("{name} part {p:?} is not a number"))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(format!("{name} part must be finite"))
                }
            }
        }
    };
    let re = next("real")?;
    let im = next("imaginary")?;
    if parts.next().is_some() {
        return Err("expected RE or RE,IM".into());
    }
    Ok(Complex::new(re, im))
}

/// A complex number in output documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex> for ComplexValue {
    fn from(z: Complex) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsDocument {
    /// Support vertex sets the polymers were grouped into.
    pub polymer_groups: usize,
    pub clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDocument {
    pub beta: ComplexValue,
    pub epsilon: f64,
    pub m: usize,
    /// `"epsilon"` when m was chosen from epsilon, `"user"` for --order.
    pub order_source: String,
    pub t_m: ComplexValue,
    pub apriori_error: f64,
    /// Whether beta lies in the region where the a-priori bound is proved.
    pub rigorous: bool,
    /// Whether the relative error of Z is guaranteed to be at most epsilon.
    pub epsilon_guaranteed: bool,
    pub log_z: ComplexValue,
    pub z: ComplexValue,
    pub diagnostics: DiagnosticsDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDocument {
    pub beta: ComplexValue,
    pub dim: usize,
    pub z: ComplexValue,
    pub log_z: ComplexValue,
    pub log_z_normalized: ComplexValue,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareDocument {
    pub estimate: EstimateDocument,
    pub exact: ExactDocument,
    pub relative_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub beta: ComplexValue,
    pub m: usize,
    pub t_m: ComplexValue,
    pub apriori_error: f64,
    pub rigorous: bool,
    pub exact_available: bool,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDocument {
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetEntry {
    pub name: String,
    pub parameters: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetsDocument {
    pub presets: Vec<PresetEntry>,
    pub graphs: Vec<String>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(Outcome { document, output, passed }) => {
            if let Err(e) = write_document(&document, output.as_ref()) {
                eprintln!("error: {e}");
                return EXIT_VALIDATION;
            }
            if passed {
                EXIT_OK
            } else {
                EXIT_COMPARE_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Resource(_) | Error::Numeric(_) => EXIT_RESOURCE,
        _ => EXIT_VALIDATION,
    }
}

struct Outcome {
    document: String,
    output: Option<PathBuf>,
    passed: bool,
}

fn write_document(document: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, document)?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(document.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Presets(out) => Ok(Outcome {
            document: presets_document(out.format),
            output: out.output.clone(),
            passed: true,
        }),
        Command::Estimate(args) => with_pool(args, || {
            let model = resolve_model(&args.model)?;
            let doc = run_estimate(&model, args)?;
            Ok((render(&doc, args.output.format, estimate_csv)?, true))
        }),
        Command::Exact(args) => with_pool(args, || {
            let model = resolve_model(&args.model)?;
            let exact = ExactSpectrum::new(&model)?;
            let doc = exact_document(&exact, args.beta)?;
            Ok((render(&doc, args.output.format, exact_csv)?, true))
        }),
        Command::Compare(args) => with_pool(args, || {
            let model = resolve_model(&args.model)?;
            let exact = ExactSpectrum::new(&model)?;
            let estimate = run_estimate(&model, args)?;
            let exact_doc = exact_document(&exact, args.beta)?;
            let result = exact.partition(args.beta)?;
            let relative_error = relative_error(estimate.t_m.into_complex(), &result);
            let pass = relative_error <= args.epsilon;
            let doc = CompareDocument {
                estimate,
                exact: exact_doc,
                relative_error,
                pass,
            };
            Ok((render(&doc, args.output.format, compare_csv)?, pass))
        }),
        Command::Sweep(sweep) => with_pool(&sweep.run, || {
            let model = resolve_model(&sweep.run.model)?;
            let doc = run_sweep(&model, &sweep.run, sweep.points as usize)?;
            Ok((render(&doc, sweep.run.output.format, sweep_csv)?, true))
        }),
    }
}

impl ComplexValue {
    fn into_complex(self) -> Complex {
        Complex::new(self.re, self.im)
    }
}

fn with_pool(args: &RunArgs, body: impl FnOnce() -> Result<(String, bool)> + Send) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads as usize)
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let (document, passed) = pool.install(body)?;
    if args.timing {
        eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    }
    Ok(Outcome {
        document,
        output: args.output.output.clone(),
        passed,
    })
}

pub fn resolve_model(args: &ModelArgs) -> Result<SpinModel> {
    match (&args.model, args.preset, args.graph) {
        (Some(path), None, None) => load_model(&std::fs::read_to_string(path)?),
        (None, Some(kind), Some(graph)) => {
            let params = args
                .param
                .iter()
                .fold(PresetParams::new(args.seed), |p, (k, v)| p.with(k, *v));
            preset(kind, graph, &params)
        }
        _ => Err(Error::Domain(
            "give exactly one model source: --model PATH or --preset NAME --graph SPEC".into(),
        )),
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

fn order_for(model: &SpinModel, args: &RunArgs) -> Result<(usize, &'static str)> {
    check_epsilon(args.epsilon)?;
    match args.order {
        Some(m) => Ok((m, "user")),
        None => Ok((choose_truncation_order(model.num_vertices(), args.epsilon)?, "epsilon")),
    }
}

fn estimate_document(
    result: &ExpansionResult,
    beta: Complex,
    epsilon: f64,
    order_source: &str,
) -> EstimateDocument {
    EstimateDocument {
        beta: beta.into(),
        epsilon,
        m: result.order,
        order_source: order_source.to_string(),
        t_m: result.t_m.into(),
        apriori_error: result.apriori_error,
        rigorous: result.rigorous,
        epsilon_guaranteed: result.rigorous && order_source == "epsilon",
        log_z: result.log_z.into(),
        z: result.log_z.exp().into(),
        diagnostics: DiagnosticsDocument {
            polymer_groups: result.diagnostics.polymers,
            clusters: result.diagnostics.clusters,
        },
    }
}

fn run_estimate(model: &SpinModel, args: &RunArgs) -> Result<EstimateDocument> {
    let (order, source) = order_for(model, args)?;
    let result = estimate_at_order(model, args.beta, order, args.force_region)?;
    Ok(estimate_document(&result, args.beta, args.epsilon, source))
}

fn exact_document(spectrum: &ExactSpectrum, beta: Complex) -> Result<ExactDocument> {
    let r: ExactResult = spectrum.partition(beta)?;
    Ok(ExactDocument {
        beta: beta.into(),
        dim: r.dim,
        z: r.z.into(),
        log_z: r.log_z_principal.into(),
        log_z_normalized: r.log_z_normalized.into(),
        eigenvalues: spectrum.eigenvalues().to_vec(),
    })
}

fn run_sweep(model: &SpinModel, args: &RunArgs, points: usize) -> Result<SweepDocument> {
    let (order, _) = order_for(model, args)?;
    let grid: Vec<Complex> = (0..points)
        .map(|j| args.beta * (j as f64 / (points - 1) as f64))
        .collect();
    if model.num_edges() > 0 && !args.force_region {
        let spec = validate_beta(model, args.beta)?;
        if !spec.in_region {
            return Err(Error::OutsideRegion {
                modulus: args.beta.norm(),
                bound: spec.radius_bound,
                max_degree: model.max_degree(),
            });
        }
    }
    let expansion = ClusterExpansion::build(model, order)?;
    let dim_ok = (0..model.num_vertices())
        .try_fold(1usize, |acc, _| acc.checked_mul(model.local_dim()).filter(|&x| x <= ORACLE_MAX_DIM))
        .is_some();
    let exact = if dim_ok { Some(ExactSpectrum::new(model)?) } else { None };
    let points = grid
        .into_iter()
        .map(|beta| {
            let r = expansion.evaluate(beta);
            let rel = match &exact {
                Some(s) => s.partition(beta).ok().map(|e| relative_error(r.t_m, &e)),
                None => None,
            };
            SweepPoint {
                beta: beta.into(),
                m: r.order,
                t_m: r.t_m.into(),
                apriori_error: r.apriori_error,
                rigorous: r.rigorous,
                exact_available: rel.is_some(),
                relative_error: rel,
            }
        })
        .collect();
    Ok(SweepDocument { points })
}

fn presets_document(format: Format) -> String {
    let presets: Vec<PresetEntry> = PresetKind::ALL
        .iter()
        .map(|k| PresetEntry {
            name: k.name().to_string(),
            parameters: k.parameters().iter().map(|&(n, v)| (n.to_string(), v)).collect(),
        })
        .collect();
    match format {
        Format::Json => {
            let doc = PresetsDocument {
                presets,
                graphs: GraphSpec::FORMS.iter().map(|s| s.to_string()).collect(),
            };
            to_json(&doc)
        }
        Format::Csv => {
            let mut s = String::from("name,parameters\n");
            for p in presets {
                let params: Vec<String> = p.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let _ = writeln!(s, "{},{}", p.name, params.join(";"));
            }
            s
        }
    }
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents always serialize");
    s.push('\n');
    s
}

fn render<T: Serialize>(doc: &T, format: Format, csv: fn(&T) -> String) -> Result<String> {
    Ok(match format {
        Format::Json => to_json(doc),
        Format::Csv => csv(doc),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn estimate_csv(d: &EstimateDocument) -> String {
    format!(
        "beta_re,beta_im,m,t_m_re,t_m_im,apriori_error,rigorous,log_z_re,log_z_im\n{},{},{},{},{},{},{},{},{}\n",
        d.beta.re, d.beta.im, d.m, d.t_m.re, d.t_m.im, d.apriori_error, d.rigorous, d.log_z.re, d.log_z.im
    )
}

fn exact_csv(d: &ExactDocument) -> String {
    format!(
        "beta_re,beta_im,dim,z_re,z_im,log_z_re,log_z_im\n{},{},{},{},{},{},{}\n",
        d.beta.re, d.beta.im, d.dim, d.z.re, d.z.im, d.log_z.re, d.log_z.im
    )
}

fn compare_csv(d: &CompareDocument) -> String {
    let e = &d.estimate;
    format!(
        "beta_re,beta_im,m,t_m_re,t_m_im,apriori_error,exact_log_z_re,exact_log_z_im,rel_error,pass\n\
         {},{},{},{},{},{},{},{},{},{}\n",
        e.beta.re,
        e.beta.im,
        e.m,
        e.t_m.re,
        e.t_m.im,
        e.apriori_error,
        d.exact.log_z.re,
        d.exact.log_z.im,
        d.relative_error,
        d.pass
    )
}

fn sweep_csv(d: &SweepDocument) -> String {
    let mut s = String::from("beta_re,beta_im,m,t_m_re,t_m_im,apriori_error,exact_available,rel_error\n");
    for p in &d.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.beta.re,
            p.beta.im,
            p.m,
            p.t_m.re,
            p.t_m.im,
            p.apriori_error,
            p.exact_available,
            opt(p.relative_error)
        );
    }
    s
}
