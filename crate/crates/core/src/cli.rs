//! Command-line interface.
//!
//! Every command that writes an artifact also writes a run manifest next to
//! it, at `<artifact>.manifest.json`.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::automaton::{AutomatonError, LatticeAutomaton};
use crate::dot::to_dot;
use crate::eval::{evaluate_with, read_words, sample_words_from, Classifier, EvalError, EvalOptions};
use crate::ipta::{build_ipta, check_coherence, IptaError};
use crate::lattice::Partition;
use crate::merge::{merge_loop, MergeConfig, MergeError};
use crate::rnn::{ElmanWeights, RnnError};
use crate::tomita::{gen_traces, LanguageId, LetterDist, SynthConfig};
use crate::trace::{TraceError, TraceHeader, TraceSet};
use crate::Word;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status of a run that found the traces incoherent.
pub const EXIT_INCOHERENT: i32 = 3;

/// Letter range for inputs sampled on behalf of an RNN.
const RNN_LETTER_RANGE: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Parser, Serialize)]
#[command(name = "ila", version, about = "Learn interval lattice automata from RNN traces")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write a trace file from a ground-truth language or RNN weights.
    Gen(GenArgs),
    /// Build the prefix tree from traces and merge similar states.
    Learn(LearnArgs),
    /// Measure fidelity of an automaton against a reference.
    Eval(EvalArgs),
    /// Export an automaton as Graphviz DOT.
    ExportDot(ExportDotArgs),
    /// Check that traces are coherent with a partition.
    Check(CheckArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// Ground-truth language, `tomita:K` or `tomita2:K`.
    #[arg(long, required_unless_present = "weights", conflicts_with = "weights")]
    pub lang: Option<LanguageId>,
    /// Elman weights file.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Input words for the RNN, one JSON array per line. Sampled when absent.
    #[arg(long, requires = "weights")]
    pub inputs: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub max_len: usize,
    /// Standard deviation of hidden-state noise (language mode).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LearnArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    /// Merge pairs scoring below this value.
    #[arg(long, required_unless_present = "ipta_only")]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Stop after building the prefix tree.
    #[arg(long)]
    pub ipta_only: bool,
    #[arg(long)]
    pub max_merges: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub ila: PathBuf,
    #[arg(long, required_unless_present = "weights", conflicts_with = "weights")]
    pub lang: Option<LanguageId>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Test words file; sampled when absent.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: PathBuf,
    /// Include every disagreement in the report.
    #[arg(long)]
    pub detail: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Aim for at least a quarter of positive test words.
    #[arg(long)]
    pub balance: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportDotArgs {
    #[arg(long)]
    pub ila: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    /// Write the verdict as JSON (and a manifest) to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error(transparent)]
    Ipta(#[from] IptaError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Rnn(#[from] RnnError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Ipta(IptaError::Coherence(_)) => EXIT_INCOHERENT,
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Record of one run, written next to its artifact.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub argv: Vec<String>,
    pub flags: &'a Command,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub duration_secs: f64,
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?).map_err(|source| CliError::Json {
        path: path.into(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| CliError::Json {
        path: path.into(),
        source,
    })?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

fn read_traces(path: &Path) -> Result<TraceSet, CliError> {
    TraceSet::read(open(path)?).map_err(|source| CliError::Trace {
        path: path.into(),
        source,
    })
}

fn read_words_file(path: &Path) -> Result<Vec<Word>, CliError> {
    read_words(open(path)?).map_err(|e| match e {
        EvalError::Io(source) => CliError::Io {
            path: path.into(),
            source,
        },
        EvalError::Json { source, .. } => CliError::Json {
            path: path.into(),
            source,
        },
        e => e.into(),
    })
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status. Diagnostics go to `err`, summaries to `out`.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cli, &argv, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let start = Instant::now();
    let (name, artifacts) = match &cli.command {
        Command::Gen(a) => ("gen", cmd_gen(a)?),
        Command::Learn(a) => ("learn", cmd_learn(a, out)?),
        Command::Eval(a) => ("eval", cmd_eval(a, out)?),
        Command::ExportDot(a) => ("export-dot", cmd_export_dot(a)?),
        Command::Check(a) => ("check", cmd_check(a, out)?),
    };
    let Some((inputs, output, seeds)) = artifacts else {
        return Ok(());
    };
    let manifest = RunManifest {
        tool: "ila",
        version: VERSION,
        command: name,
        argv: argv.to_vec(),
        flags: &cli.command,
        seeds,
        inputs,
        outputs: vec![output.clone()],
        duration_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&manifest_path(&output), &manifest)
}

/// Inputs, artifact and seeds of a finished command.
type Artifacts = Option<(Vec<PathBuf>, PathBuf, Vec<u64>)>;

fn cmd_gen(a: &GenArgs) -> Result<Artifacts, CliError> {
    if a.max_len == 0 {
        return Err(CliError::Usage("--max-len must be at least 1".into()));
    }
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(CliError::Usage(format!(
            "--noise must be a finite non-negative number, got {}",
            a.noise
        )));
    }
    let mut inputs = Vec::new();
    let set = match (&a.lang, &a.weights) {
        (Some(id), None) => gen_traces(*id, &SynthConfig::new(a.n, a.max_len, a.noise, a.seed)),
        (None, Some(path)) => {
            let w: ElmanWeights = read_json(path)?;
            inputs.push(path.clone());
            let words = match &a.inputs {
                Some(p) => {
                    inputs.push(p.clone());
                    read_words_file(p)?
                }
                None => {
                    let (lo, hi) = RNN_LETTER_RANGE;
                    let dist = LetterDist::Uniform {
                        dim: w.input_dim(),
                        lo,
                        hi,
                    };
                    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
                    (0..a.n).map(|_| dist.sample_word(&mut rng, a.max_len)).collect()
                }
            };
            let traces = words.iter().map(|word| w.run(word)).collect::<Result<Vec<_>, _>>()?;
            let header = TraceHeader {
                dim: Some(w.input_dim()),
                hidden_dim: Some(w.hidden_dim()),
                y0_default: Some(w.classify(&vec![0.0; w.hidden_dim()])?),
            };
            TraceSet::with_header(header, traces)
        }
        _ => {
            return Err(CliError::Usage(
                "exactly one of --lang and --weights is required".into(),
            ))
        }
    };
    let mut buf = Vec::new();
    set.write(&mut buf).map_err(|source| CliError::Trace {
        path: a.out.clone(),
        source,
    })?;
    write_file(&a.out, &buf)?;
    Ok(Some((inputs, a.out.clone(), vec![a.seed])))
}

fn cmd_learn(a: &LearnArgs, out: &mut dyn Write) -> Result<Artifacts, CliError> {
    let set = read_traces(&a.traces)?;
    let partition: Partition = read_json(&a.partition)?;
    let cfg = match (a.ipta_only, a.threshold) {
        (true, _) => None,
        (false, Some(d)) => Some(MergeConfig::new(d)?.with_max_merges(a.max_merges)),
        (false, None) => return Err(CliError::Usage("--threshold is required".into())),
    };
    let start = Instant::now();
    check_coherence(&set, &partition)?;
    let mut automaton = build_ipta(&set, &partition)?;
    info!("prefix tree: {} states", automaton.num_states());
    if let Some(cfg) = cfg {
        let stats = merge_loop(&mut automaton, &cfg)?;
        info!("{} merges", stats.merges);
    }
    info!("learned in {:.3} s", start.elapsed().as_secs_f64());
    write_json(&a.out, &automaton)?;
    let _ = writeln!(
        out,
        "states={} transitions={}",
        automaton.num_states(),
        automaton.num_transitions()
    );
    Ok(Some((
        vec![a.traces.clone(), a.partition.clone()],
        a.out.clone(),
        vec![],
    )))
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<Artifacts, CliError> {
    let automaton: LatticeAutomaton = read_json(&a.ila)?;
    let mut inputs = vec![a.ila.clone()];
    let weights: Option<ElmanWeights> = match &a.weights {
        Some(p) => {
            inputs.push(p.clone());
            Some(read_json(p)?)
        }
        None => None,
    };
    let (reference, dist): (&dyn Classifier, LetterDist) = match (&a.lang, &weights) {
        (Some(id), None) => (id, id.letter_dist()),
        (None, Some(w)) => {
            let (lo, hi) = RNN_LETTER_RANGE;
            (
                w,
                LetterDist::Uniform {
                    dim: w.input_dim(),
                    lo,
                    hi,
                },
            )
        }
        _ => {
            return Err(CliError::Usage(
                "exactly one of --lang and --weights is required".into(),
            ))
        }
    };
    let words = match &a.inputs {
        Some(p) => {
            inputs.push(p.clone());
            read_words_file(p)?
        }
        None => {
            if a.max_len == 0 {
                return Err(CliError::Usage("--max-len must be at least 1".into()));
            }
            sample_words_from(&dist, reference, a.n, a.max_len, a.seed, a.balance)?
        }
    };
    let opts = EvalOptions {
        jobs: a.jobs,
        detail: a.detail,
    };
    let report = evaluate_with(reference, &automaton, &words, &opts)?;
    write_json(&a.report, &report)?;
    let _ = writeln!(out, "{}", report.summary());
    Ok(Some((inputs, a.report.clone(), vec![a.seed])))
}

fn cmd_export_dot(a: &ExportDotArgs) -> Result<Artifacts, CliError> {
    let automaton: LatticeAutomaton = read_json(&a.ila)?;
    write_file(&a.out, to_dot(&automaton).as_bytes())?;
    Ok(Some((vec![a.ila.clone()], a.out.clone(), vec![])))
}

#[derive(Serialize)]
struct CheckVerdict {
    coherent: bool,
    traces: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    conflict: Option<String>,
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<Artifacts, CliError> {
    let set = read_traces(&a.traces)?;
    let partition: Partition = read_json(&a.partition)?;
    let result = check_coherence(&set, &partition);
    let conflict = match &result {
        Ok(()) => None,
        Err(IptaError::Coherence(c)) => Some(c.to_string()),
        Err(_) => return result.map(|_| None).map_err(Into::into),
    };
    let inputs = vec![a.traces.clone(), a.partition.clone()];
    if conflict.is_none() {
        let _ = writeln!(out, "coherent traces={}", set.traces.len());
    }
    let artifacts = match &a.out {
        Some(path) => {
            let verdict = CheckVerdict {
                coherent: conflict.is_none(),
                traces: set.traces.len(),
                conflict,
            };
            write_json(path, &verdict)?;
            Some((inputs, path.clone(), vec![]))
        }
        None => None,
    };
    result?;
    Ok(artifacts)
}
