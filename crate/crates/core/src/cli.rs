//! Command-line entry points: encode, decode, eval, ablate and synth.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::codec::CodecConfig;
use crate::container::{decode_stream, DecodeMode, PipelineConfig};
use crate::encode::{encode_sequence, EncoderConfig, Method};
use crate::error::{Error, Result};
use crate::eval::{ablate, ablation_to_csv, ablation_variants, eval_sweep, rows_to_csv, standard_variants, Variant};
use crate::frame::{read_sequence, synth_sequence, write_sequence, SequenceFormat, SynthKind, VideoSequence};
use crate::genprior::{GeneratorSpec, OptimizerConfig, DEFAULT_GENERATOR_SEED, DEFAULT_HIDDEN, DEFAULT_LATENT_DIM};
use crate::refine::RefineConfig;

/// Environment variable that replaces every default seed.
pub const SEED_ENV: &str = "HYBP_SEED";
const DEFAULT_SYNTH_SEED: u64 = 1;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const INTERNAL: u8 = 1;
    /// Also what clap uses for parse errors.
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const FORMAT: u8 = 4;
    pub const CHECKSUM: u8 = 5;
    pub const DIVERGENCE: u8 = 6;
    /// The stream was written, but some GOP exceeds its budget.
    pub const INFEASIBLE_BUDGET: u8 = 7;
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => exit::IO,
        Error::Format(_)
        | Error::TruncatedFrame { .. }
        | Error::Truncated { .. }
        | Error::CorruptUnit { .. }
        | Error::MissingReference
        | Error::Structure(_)
        | Error::BadMagic(_)
        | Error::UnsupportedVersion(_)
        | Error::Dimension { .. } => exit::FORMAT,
        Error::Checksum { .. } => exit::CHECKSUM,
        Error::Divergence(_) => exit::DIVERGENCE,
        Error::Precondition(_) | Error::QpRange { .. } => exit::USAGE,
        Error::CoefficientOverflow { .. } | Error::Pipeline(_) => exit::INTERNAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "hybp", version, about = "Hybrid generative-keyframe video codec")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a rawv or y4m sequence into a HYBP stream.
    Encode(EncodeArgs),
    /// Decode a HYBP stream to rawv or y4m.
    Decode(DecodeArgs),
    /// Compare methods over a bitrate sweep.
    Eval(EvalArgs),
    /// Full pipeline against its ablations at one bitrate.
    Ablate(AblateArgs),
    /// Write a synthetic test sequence.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("mode").multiple(false)))]
pub struct ModeFlags {
    /// Skip joint refinement of the latent.
    #[arg(long, group = "mode")]
    pub no_refine: bool,
    /// Run the generator at full resolution.
    #[arg(long, group = "mode")]
    pub no_two_stage: bool,
    /// Block codec only, with a lossless I unit per GOP.
    #[arg(long, group = "mode")]
    pub traditional_only: bool,
    /// Latent keyframe only; every frame shows the generated keyframe.
    #[arg(long, group = "mode")]
    pub prompt_only: bool,
}

impl ModeFlags {
    fn any(&self) -> bool {
        self.no_refine || self.no_two_stage || self.traditional_only || self.prompt_only
    }

    /// Applies the selected mode to `base`.
    fn apply(&self, mut cfg: EncoderConfig) -> (String, EncoderConfig) {
        cfg.method = if self.no_refine {
            Method::NoRefine
        } else if self.traditional_only {
            Method::Traditional
        } else if self.prompt_only {
            Method::PromptOnly
        } else {
            Method::Hybrid
        };
        if self.no_two_stage {
            cfg.generator.two_stage = false;
            return ("no-two-stage".into(), cfg);
        }
        (cfg.method.name().into(), cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CodingArgs {
    /// Frames per GOP.
    #[arg(long, default_value_t = 8)]
    pub gop: usize,
    /// Use B-frames between P-frames.
    #[arg(long)]
    pub b_frames: bool,
    #[arg(long, default_value_t = DEFAULT_LATENT_DIM)]
    pub latent_dim: usize,
    /// Hidden width of the generator.
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    pub hidden: usize,
    /// Generator seed [default: $HYBP_SEED, else 42].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = OptimizerConfig::default().iters)]
    pub invert_iters: usize,
    #[arg(long, default_value_t = RefineConfig::default().iters)]
    pub refine_iters: usize,
    /// Worker threads for GOP-parallel encoding.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub mode: ModeFlags,
}

impl CodingArgs {
    fn base_config(&self) -> Result<EncoderConfig> {
        let codec = CodecConfig { gop_length: self.gop, b_frames: self.b_frames, ..CodecConfig::default() };
        let generator = GeneratorSpec {
            seed: seed_or_default(self.seed, DEFAULT_GENERATOR_SEED)?,
            latent_dim: self.latent_dim,
            hidden: self.hidden,
            ..GeneratorSpec::new(0, 0)
        };
        Ok(EncoderConfig {
            codec,
            generator,
            invert: OptimizerConfig { iters: self.invert_iters, ..OptimizerConfig::default() },
            refine: RefineConfig { iters: self.refine_iters, ..RefineConfig::default() },
            method: Method::Hybrid,
            jobs: self.jobs,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Target bitrate in kbit/s.
    #[arg(long)]
    pub kbps: f64,
    /// Where to write the per-GOP allocation CSV [default: stdout].
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub coding: CodingArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output sequence; `.y4m` selects y4m, anything else rawv.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Stitch each keyframe into the legacy track before decoding.
    #[arg(long)]
    pub stitched: bool,
    /// Run keyframe generation and legacy decoding one after the other.
    #[arg(long)]
    pub sequential: bool,
    /// Where to write the per-GOP timing CSV [default: stdout].
    #[arg(long)]
    pub timing: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).multiple(false)))]
pub struct SourceArgs {
    /// Input sequence.
    #[arg(short, long, group = "source")]
    pub input: Option<PathBuf>,
    /// Generate a synthetic sequence of this kind instead.
    #[arg(long, group = "source")]
    pub synth: Option<SynthKind>,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    /// Synthetic content seed [default: $HYBP_SEED, else 1].
    #[arg(long)]
    pub synth_seed: Option<u64>,
}

impl SourceArgs {
    fn load(&self) -> Result<VideoSequence> {
        match (&self.input, self.synth) {
            (Some(path), _) => read_input(path),
            (None, Some(kind)) => synth_sequence(
                kind,
                self.width,
                self.height,
                self.frames,
                seed_or_default(self.synth_seed, DEFAULT_SYNTH_SEED)?,
            ),
            (None, None) => Err(Error::precondition("no input given")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Bitrates in kbit/s, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub kbps: Vec<f64>,
    /// Where to write the CSV [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub coding: CodingArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Bitrate in kbit/s.
    #[arg(long)]
    pub kbps: f64,
    /// Where to write the CSV [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub coding: CodingArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub frames: usize,
    #[arg(long, default_value_t = 30)]
    pub fps: u32,
    /// Content seed [default: $HYBP_SEED, else 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output sequence; `.y4m` selects y4m, anything else rawv.
    #[arg(short, long)]
    pub output: PathBuf,
}

fn seed_or_default(flag: Option<u64>, fallback: u64) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::precondition(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(fallback),
    }
}

fn read_input(path: &Path) -> Result<VideoSequence> {
    read_sequence(path, SequenceFormat::from_path(path))
}

/// Writes to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_encode(args: &EncodeArgs) -> Result<u8> {
    let seq = read_input(&args.input)?;
    let (_, cfg) = args.coding.mode.apply(args.coding.base_config()?);
    let enc = encode_sequence(&seq, args.kbps * 1000.0, &cfg)?;
    fs::write(&args.output, &enc.bytes)?;
    emit(args.csv.as_deref(), &enc.allocation_csv())?;
    let mut code = exit::SUCCESS;
    for g in enc.gops.iter().filter(|g| !g.within_budget) {
        eprintln!("warning: GOP {} takes {} bytes against a budget of {}", g.gop, g.total_bytes, g.budget_bytes);
        code = exit::INFEASIBLE_BUDGET;
    }
    Ok(code)
}

fn cmd_decode(args: &DecodeArgs) -> Result<u8> {
    let bytes = fs::read(&args.input)?;
    let mode = if args.stitched { DecodeMode::Stitched } else { DecodeMode::Direct };
    let (seq, timing) = decode_stream(&bytes, mode, PipelineConfig { pipelined: !args.sequential })?;
    write_sequence(&seq, &args.output, SequenceFormat::from_path(&args.output))?;
    emit(args.timing.as_deref(), &timing.to_csv())?;
    Ok(exit::SUCCESS)
}

fn cmd_eval(args: &EvalArgs) -> Result<u8> {
    let seq = args.source.load()?;
    let base = args.coding.base_config()?;
    let variants = if args.coding.mode.any() {
        let (name, cfg) = args.coding.mode.apply(base);
        vec![Variant::new(name, cfg)]
    } else {
        standard_variants(&base, false)
    };
    let rows = eval_sweep(&seq, &variants, &args.kbps)?;
    emit(args.output.as_deref(), &rows_to_csv(&rows))?;
    Ok(exit::SUCCESS)
}

fn cmd_ablate(args: &AblateArgs) -> Result<u8> {
    if args.coding.mode.any() {
        return Err(Error::precondition("ablate runs every mode; drop the mode flag"));
    }
    let seq = args.source.load()?;
    let rows = ablate(&seq, &ablation_variants(&args.coding.base_config()?), args.kbps)?;
    emit(args.output.as_deref(), &ablation_to_csv(&rows))?;
    Ok(exit::SUCCESS)
}

fn cmd_synth(args: &SynthArgs) -> Result<u8> {
    let seed = seed_or_default(args.seed, DEFAULT_SYNTH_SEED)?;
    let mut seq = synth_sequence(args.kind, args.width, args.height, args.frames, seed)?;
    if args.fps == 0 {
        return Err(Error::precondition("fps must be positive"));
    }
    seq.fps = args.fps;
    write_sequence(&seq, &args.output, SequenceFormat::from_path(&args.output))?;
    Ok(exit::SUCCESS)
}

/// Runs a parsed command and returns the exit code for a completed run.
pub fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Parses the process arguments, runs, and maps errors to exit codes.
pub fn main() -> std::process::ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return std::process::ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::SUCCESS });
        }
    };
    match run(&cli) {
        Ok(code) => std::process::ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(exit_code(&e))
        }
    }
}
