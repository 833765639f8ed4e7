//! `dplab`: train codecs, sweep the distortion-perception curve, and run
//! the exact oracles from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dplab_core::format::{csv_line, sig17};
use dplab_core::tradeoff::{mmse_endpoint, oracle_support, sweep_with_plans};
use dplab_core::{
    alpha_for_perception, augmented_support, builtin_source, constrained_oracle, fit_pair,
    perceptual_decoder_for, phase_csv, phase_sweep, predicted_distortion, sweep_csv, verify,
    Codec, DiscreteDistribution, Method, SourceSpec, TransportPlan, VerifyOptions,
};

const USAGE_EXIT: u8 = 2;

#[derive(Parser)]
#[command(name = "dplab", version, about = "Exact distortion-perception tradeoff experiments on discrete sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an encoder and its MMSE decoder; writes codec JSON.
    Mmse(CodecArgs),
    /// Add the conditional resampler to a codec; writes codec JSON.
    Perceptual(PerceptualArgs),
    /// Measured and predicted D and P along an α grid.
    Sweep(SweepArgs),
    /// Perception-constrained optimum over decoders for a fixed encoder.
    Oracle(OracleArgs),
    /// Augmented-objective solves over a λ grid.
    Theorem2(Theorem2Args),
    /// Run every numerical check; exit 0 if all pass, 1 otherwise.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exhaustive,
    Lloyd,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exhaustive => Method::Exhaustive,
            MethodArg::Lloyd => Method::Lloyd,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SourceArgs {
    /// `builtin:u4`, `builtin:u2`, `builtin:gauss33`, a JSON file, or inline JSON.
    #[arg(long, default_value = "builtin:u4")]
    source: String,
    /// Rate in bits; the codebook has 2^rate codes.
    #[arg(long, default_value_t = 1)]
    rate: u32,
    #[arg(long, value_enum, default_value = "exhaustive")]
    method: MethodArg,
    /// Seed for Lloyd initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CodecArgs {
    #[command(flatten)]
    src: SourceArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PerceptualArgs {
    #[command(flatten)]
    src: SourceArgs,
    /// Codec JSON from `mmse`; fitted from the source when absent.
    #[arg(long)]
    codec: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    src: SourceArgs,
    /// `start:stop:step` or a comma-separated list, within [0, 1].
    #[arg(long, default_value = "0:1:0.25")]
    alphas: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Include the optimal W₂² coupling behind every P value (JSON only).
    #[arg(long)]
    dump_plan: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    src: SourceArgs,
    #[arg(long, allow_negative_numbers = true)]
    perception: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Theorem2Args {
    #[command(flatten)]
    src: SourceArgs,
    /// Comma-separated, ascending, each ≥ 0.
    #[arg(long, default_value = "0,0.25,0.5,0.9,1,1.1,1.5,2", allow_negative_numbers = true)]
    lambdas: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    src: SourceArgs,
    /// Replaces every default tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Plain text when absent.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure reported on stderr with exit code 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn fail<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure(msg.into()))
}

fn load_source(spec: &str) -> Outcome<DiscreteDistribution> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return Ok(builtin_source(name)?);
    }
    let text = if spec.trim_start().starts_with('{') {
        spec.to_owned()
    } else {
        fs::read_to_string(spec).map_err(|e| Failure(format!("cannot read source {spec}: {e}")))?
    };
    let parsed = SourceSpec::from_json(&text).map_err(|e| Failure(format!("malformed source JSON: {e}")))?;
    Ok(parsed.build()?)
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn parse_alphas(spec: &str) -> Outcome<Vec<f64>> {
    let values = if let [start, stop, step] = spec.split(':').collect::<Vec<_>>()[..] {
        let (start, stop, step): (f64, f64, f64) = (start.trim().parse()?, stop.trim().parse()?, step.trim().parse()?);
        if !(step > 0.0) {
            return fail("alpha step must be > 0");
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if !(count >= 0.0) {
            return fail("alpha range is empty");
        }
        (0..=count as usize).map(|i| (start + i as f64 * step).min(stop)).collect()
    } else {
        parse_list(spec)?
    };
    if values.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return fail("alphas must lie in [0, 1]");
    }
    if values.windows(2).any(|w| w[1] < w[0]) {
        return fail("alphas must be ascending");
    }
    Ok(values)
}

fn parse_list(spec: &str) -> Outcome<Vec<f64>> {
    spec.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| Failure(format!("bad number {v:?}: {e}"))))
        .collect()
}

fn fitted_codec(src: &SourceArgs, source: &DiscreteDistribution) -> Outcome<Codec> {
    let pair = fit_pair(source, src.rate, src.method.into(), src.seed)?;
    Ok(Codec {
        encoder: pair.encoder,
        gd: pair.decoder,
        gp: None,
    })
}

fn cmd_mmse(args: CodecArgs) -> Outcome<ExitCode> {
    let source = load_source(&args.src.source)?;
    let codec = fitted_codec(&args.src, &source)?;
    emit(args.out.as_deref(), &(codec.to_json() + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_perceptual(args: PerceptualArgs) -> Outcome<ExitCode> {
    let source = load_source(&args.src.source)?;
    let mut codec = match &args.codec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure(format!("cannot read codec {}: {e}", path.display())))?;
            Codec::from_json(&text)?
        }
        None => fitted_codec(&args.src, &source)?,
    };
    codec.gp = Some(perceptual_decoder_for(&source, &codec.encoder)?);
    emit(args.out.as_deref(), &(codec.to_json() + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SweepRecord<'a> {
    #[serde(flatten)]
    point: &'a dplab_core::TradeoffPoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    plan: Option<PlanRecord<'a>>,
}

#[derive(Serialize)]
struct PlanRecord<'a> {
    source_support: &'a [Vec<f64>],
    output_support: &'a [Vec<f64>],
    output_probs: &'a [f64],
    pi: &'a [Vec<f64>],
}

impl<'a> From<&'a TransportPlan> for PlanRecord<'a> {
    fn from(p: &'a TransportPlan) -> Self {
        PlanRecord {
            source_support: p.row.points(),
            output_support: p.col.points(),
            output_probs: p.col.probs(),
            pi: &p.pi,
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Outcome<ExitCode> {
    if args.dump_plan && args.format != Format::Json {
        return fail("--dump-plan requires --format json");
    }
    let alphas = parse_alphas(&args.alphas)?;
    let source = load_source(&args.src.source)?;
    let codec = fitted_codec(&args.src, &source)?;
    let gp = perceptual_decoder_for(&source, &codec.encoder)?;
    let rows = sweep_with_plans(&source, &codec.encoder, &codec.gd, &gp, &alphas)?;
    let text = match args.format {
        Format::Csv => {
            let points: Vec<_> = rows.iter().map(|(p, _)| *p).collect();
            sweep_csv(&points)
        }
        Format::Json => {
            let records: Vec<SweepRecord> = rows
                .iter()
                .map(|(point, plan)| SweepRecord {
                    point,
                    plan: args.dump_plan.then(|| plan.into()),
                })
                .collect();
            to_json(&records)
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct OracleRecord {
    perception: f64,
    alpha: f64,
    d_star: f64,
    d_predicted: f64,
    perception_bound: f64,
    d_d: f64,
    p_d: f64,
    support: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
}

fn cmd_oracle(args: OracleArgs) -> Outcome<ExitCode> {
    if !(args.perception >= 0.0) {
        return fail("perception must be ≥ 0");
    }
    let source = load_source(&args.src.source)?;
    let codec = fitted_codec(&args.src, &source)?;
    let ep = mmse_endpoint(&source, &codec.encoder, &codec.gd)?;
    let alpha = if ep.p_d > 0.0 {
        alpha_for_perception(args.perception, ep.p_d)?
    } else {
        1.0
    };
    let support = oracle_support(&source, &codec.encoder, &codec.gd, &[alpha])?;
    let sol = constrained_oracle(&source, &codec.encoder, args.perception, &support)?;
    let rec = OracleRecord {
        perception: args.perception,
        alpha,
        d_star: sol.d_star,
        d_predicted: predicted_distortion(alpha, ep.d_d),
        perception_bound: sol.perception_bound,
        d_d: ep.d_d,
        p_d: ep.p_d,
        support: sol.decoder.out_support().to_vec(),
        rows: sol.decoder.rows().to_vec(),
    };
    let text = match args.format {
        Format::Json => to_json(&rec),
        Format::Csv => {
            csv_line(["perception,alpha,D_star,D_predicted,perception_bound,D_d,P_d"])
                + &csv_line(
                    [rec.perception, rec.alpha, rec.d_star, rec.d_predicted, rec.perception_bound, rec.d_d, rec.p_d]
                        .map(sig17),
                )
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_theorem2(args: Theorem2Args) -> Outcome<ExitCode> {
    let lambdas = parse_list(&args.lambdas)?;
    if lambdas.iter().any(|l| !(*l >= 0.0)) {
        return fail("lambda must be ≥ 0");
    }
    if lambdas.windows(2).any(|w| w[1] < w[0]) {
        return fail("lambdas must be ascending");
    }
    let source = load_source(&args.src.source)?;
    let codec = fitted_codec(&args.src, &source)?;
    let support = augmented_support(&source, &codec.gd);
    let rows = phase_sweep(&source, &codec.encoder, &codec.gd, &lambdas, &support)?;
    let text = match args.format {
        Format::Csv => phase_csv(&rows),
        Format::Json => to_json(&rows),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Outcome<ExitCode> {
    if let Some(t) = args.tol {
        if !(t >= 0.0) {
            return fail("tolerance must be ≥ 0");
        }
    }
    let source = load_source(&args.src.source)?;
    let opts = VerifyOptions {
        rate_bits: args.src.rate,
        method: args.src.method.into(),
        seed: args.src.seed,
        tol: args.tol,
    };
    let report = verify(&source, &opts)?;
    let text = match args.format {
        None => report.to_text(),
        Some(Format::Csv) => report.to_csv(),
        Some(Format::Json) => to_json(&report),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn configure_threads() -> Outcome<()> {
    let Ok(value) = std::env::var("DPLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Failure(format!("DPLAB_THREADS must be a positive integer, got {value:?}")))?;
    if n == 0 {
        return fail("DPLAB_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Mmse(a) => cmd_mmse(a),
        Command::Perceptual(a) => cmd_perceptual(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Theorem2(a) => cmd_theorem2(a),
        Command::Verify(a) => cmd_verify(a),
    });
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE_EXIT)
        }
    }
}
