//! Command-line driver for `fbd-core`.
//!
//! Every subcommand reads channel data (from `--input` or a synthetic
//! `--experiment`), runs one stage and writes plain-text results plus a
//! `report.json` into `--out`.

pub mod error;
pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fbd_core::seqcore::max_normalize_interferograms;
use fbd_core::synth::{make_experiment, recovery_score, Experiment, ExperimentId, ExperimentSpec};
use fbd_core::{
    appendix_check, build_interferograms, fbd_pipeline, fibd, fpr, ibd, lsbd, lspr, AltMinConfig, ChannelSet,
    HomotopySchedule, InterferogramSet, PipelineConfig, Sequence, SolveReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use error::{CliError, EXIT_IO, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_VALIDATION};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  usage error
  2  I/O error
  3  validation error (bad data, shapes or parameters)
  4  solver failure (divergence or singular solve)

A config file given with --config holds `key = value` lines named after the
long flags; flags on the command line take precedence.";

#[derive(Debug, Parser)]
#[command(name = "fbd", version, about = "Focused blind deconvolution", after_help = EXIT_CODES, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic experiment: d.csv, g.csv, s.csv and gij.csv.
    Synth(RunArgs),
    /// Focused interferometric deconvolution of the data cross-correlations.
    Fibd(RunArgs),
    /// Interferometric deconvolution without focusing.
    Ibd(RunArgs),
    /// Focused phase retrieval from response interferograms.
    Fpr(RunArgs),
    /// Least-squares phase retrieval without focusing.
    Lspr(RunArgs),
    /// Least-squares blind deconvolution of the channel data.
    Lsbd(RunArgs),
    /// FIBD, then FPR, then source deconvolution.
    Pipeline(RunArgs),
    /// Randomised check that smearing a nonnegative signal never focuses it.
    AppendixCheck(RunArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Synth(a) => ("synth", a),
            Command::Fibd(a) => ("fibd", a),
            Command::Ibd(a) => ("ibd", a),
            Command::Fpr(a) => ("fpr", a),
            Command::Lspr(a) => ("lspr", a),
            Command::Lsbd(a) => ("lsbd", a),
            Command::Pipeline(a) => ("pipeline", a),
            Command::AppendixCheck(a) => ("appendix-check", a),
        }
    }
}

const SUBCOMMANDS: [&str; 8] = [
    "synth",
    "fibd",
    "ibd",
    "fpr",
    "lspr",
    "lsbd",
    "pipeline",
    "appendix-check",
];

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    /// `key = value` file of default flag values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Channel file (data, or interferograms for fpr and lspr).
    #[arg(long, conflicts_with = "experiment")]
    pub input: Option<PathBuf>,

    /// Synthetic experiment: I, II, III, IV, V, V-front or layered.
    #[arg(long)]
    pub experiment: Option<String>,

    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,

    #[arg(long, env = "FBD_SEED", default_value_t = 1)]
    pub seed: u64,

    /// Response length minus one.
    #[arg(long)]
    pub tau: Option<usize>,

    /// Experiment record length minus one.
    #[arg(long)]
    pub t: Option<usize>,

    /// Experiment channel count.
    #[arg(long)]
    pub nr: Option<usize>,

    /// Experiment noise level in dB.
    #[arg(long)]
    pub snr: Option<f64>,

    /// Decreasing `alpha` weights; `inf` is the hard constraint.
    #[arg(long, default_value = "inf,0")]
    pub alphas: String,

    /// Decreasing `beta` weights for the front channel.
    #[arg(long, default_value = "inf,0")]
    pub betas: String,

    /// Front-loaded channel, zero-based.
    #[arg(long, default_value_t = 0)]
    pub front: usize,

    #[arg(long, default_value_t = AltMinConfig::default().epsilon)]
    pub epsilon: f64,

    #[arg(long, default_value_t = AltMinConfig::default().max_outer_iters)]
    pub max_iters: usize,

    /// Keep the source auto-correlation positive semidefinite.
    #[arg(long)]
    pub psd_projection: bool,

    #[arg(long)]
    pub no_line_search: bool,

    /// Finish the pipeline with an LSBD refinement.
    #[arg(long)]
    pub finalize: bool,

    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Trials for appendix-check.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

impl RunArgs {
    fn altmin(&self) -> AltMinConfig {
        AltMinConfig {
            epsilon: self.epsilon,
            max_outer_iters: self.max_iters,
            seed: self.seed,
            psd_projection: self.psd_projection,
            line_search: !self.no_line_search,
            ..AltMinConfig::default()
        }
    }

    fn experiment(&self) -> Result<Option<Experiment>, CliError> {
        let Some(name) = &self.experiment else {
            return Ok(None);
        };
        let id: ExperimentId = name.parse()?;
        let mut spec = ExperimentSpec::new(id, self.seed);
        spec.nr = self.nr.unwrap_or(spec.nr);
        spec.tau = self.tau.unwrap_or(spec.tau);
        spec.t = self.t.unwrap_or(spec.t);
        spec.snr_db = self.snr.or(spec.snr_db);
        Ok(Some(make_experiment(&spec)?))
    }

    fn tau(&self, exp: Option<&Experiment>) -> Result<usize, CliError> {
        self.tau
            .or(exp.map(|e| e.spec.tau))
            .ok_or_else(|| CliError::Usage("--tau is required with --input".into()))
    }

    fn channels(&self, exp: Option<&Experiment>) -> Result<ChannelSet, CliError> {
        match (&self.input, exp) {
            (Some(path), _) => io::read_channels(path),
            (None, Some(e)) => Ok(e.data.clone()),
            (None, None) => Err(CliError::Usage("give --input or --experiment".into())),
        }
    }
}

/// Expands `--config` into flags placed right after the subcommand, so
/// later command-line flags override them.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strings: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = strings.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strings.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else {
        return Ok(argv);
    };
    let Some(at) = strings.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let mut extra = Vec::new();
    for (n, line) in io::read(Path::new(&path))?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{path}:{}: expected `key = value`", n + 1)))?;
        let flag = format!("--{}", key.trim().replace('_', "-"));
        match value.trim() {
            "true" => extra.push(flag),
            "false" => {}
            v => extra.extend([flag, v.to_string()]),
        }
    }
    let mut out: Vec<OsString> = argv[..=at].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend(argv[at + 1..].iter().cloned());
    Ok(out)
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    seed: u64,
    config: &'a RunArgs,
    #[serde(skip_serializing_if = "Option::is_none")]
    experiment: Option<&'a ExperimentSpec>,
    /// Recovery score against the experiment truth, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    stages: &'a [SolveReport],
}

struct Outputs<'a> {
    dir: &'a Path,
    command: &'a str,
    args: &'a RunArgs,
    exp: Option<&'a Experiment>,
}

impl Outputs<'_> {
    fn file(&self, name: &str, text: &str) -> Result<(), CliError> {
        io::write(&self.dir.join(name), text)
    }

    fn report(&self, score: Option<f64>, stages: &[SolveReport]) -> Result<(), CliError> {
        let report = Report {
            command: self.command,
            seed: self.args.seed,
            config: self.args,
            experiment: self.exp.map(|e| &e.spec),
            score,
            stages,
        };
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
        self.file("report.json", &json)
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match expand_config(argv).map(Cli::try_parse_from) {
        Ok(Ok(cli)) => cli,
        Ok(Err(e)) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
        Err(e) => return report_error(&e),
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("error[{}]: {e}", e.category());
    e.exit_code()
}

fn execute(command: &Command) -> Result<(), CliError> {
    let (name, args) = command.parts();
    if let Some(n) = args.threads {
        // a pool installed by an earlier run in the same process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    if name == "appendix-check" {
        return appendix(args);
    }
    let alphas: HomotopySchedule = args.alphas.parse()?;
    let betas: HomotopySchedule = args.betas.parse()?;
    let exp = args.experiment()?;
    let exp = exp.as_ref();
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let out = Outputs {
        dir: &args.out,
        command: name,
        args,
        exp,
    };
    let cfg = args.altmin();
    let seed = args.seed;

    match name {
        "synth" => {
            let e = exp.ok_or_else(|| CliError::Usage("synth needs --experiment".into()))?;
            out.file("d.csv", &io::format_channels(&e.data))?;
            out.file("g.csv", &io::format_channels(&e.truth))?;
            out.file("s.csv", &io::format_channels(&ChannelSet::new(vec![e.source.clone()])?))?;
            out.file("gij.csv", &io::format_interferograms(&e.truth_interferograms()))?;
            out.report(None, &[])
        }
        "fibd" | "ibd" => {
            let d = args.channels(exp)?;
            let tau = args.tau(exp)?;
            let dij = max_normalize_interferograms(&build_interferograms(&d, d.span() - 1)?)?;
            let (sa, gij, report) = if name == "fibd" {
                fibd(&dij, tau, &alphas, &cfg, seed)?
            } else {
                ibd(&dij, tau, &cfg, seed)?
            };
            let score = exp
                .map(|e| recovery_score(&gij.as_channel_set(), &e.truth_interferograms().as_channel_set()))
                .transpose()?;
            out.file("gij.csv", &io::format_interferograms(&gij))?;
            out.file("sa.csv", &io::format_autocorr(&sa))?;
            summary(name, score, &report);
            out.report(score, &[report])
        }
        "fpr" | "lspr" => {
            let gij: InterferogramSet = match (&args.input, exp) {
                (Some(path), _) => io::read_interferograms(path)?,
                (None, Some(e)) => e.truth_interferograms(),
                (None, None) => return Err(CliError::Usage("give --input or --experiment".into())),
            };
            let (g, report) = if name == "fpr" {
                fpr(&gij, args.front, &betas, &cfg, seed)?
            } else {
                lspr(&gij, &cfg, seed)?
            };
            let score = exp.map(|e| recovery_score(&g, &e.truth)).transpose()?;
            out.file("ghat.csv", &io::format_channels(&g))?;
            summary(name, score, &report);
            out.report(score, &[report])
        }
        "lsbd" | "pipeline" => {
            let d = args.channels(exp)?;
            let tau = args.tau(exp)?;
            let result = if name == "lsbd" {
                lsbd(&d, tau, &cfg, seed)?
            } else {
                let pc = PipelineConfig {
                    front_channel: args.front,
                    alphas,
                    betas,
                    altmin: cfg,
                    seed,
                    finalize: args.finalize,
                };
                fbd_pipeline(&d, tau, &pc)?
            };
            let score = exp.map(|e| recovery_score(&result.responses, &e.truth)).transpose()?;
            out.file("ghat.csv", &io::format_channels(&result.responses))?;
            out.file(
                "shat.csv",
                &io::format_channels(&ChannelSet::new(vec![result.source.clone()])?),
            )?;
            if name == "pipeline" {
                out.file("gij.csv", &io::format_interferograms(&result.interferograms))?;
                out.file("sa.csv", &io::format_autocorr(&result.source_autocorr))?;
            }
            for r in &result.reports {
                summary(&r.stage, None, r);
            }
            if let Some(s) = score {
                println!("{name}: score {s:.4}");
            }
            out.report(score, &result.reports)
        }
        _ => unreachable!("subcommand list is closed"),
    }
}

fn summary(stage: &str, score: Option<f64>, r: &SolveReport) {
    let iters: usize = r.legs.iter().map(|l| l.outer_iterations).sum();
    let mut line = format!(
        "{stage}: misfit {:.3e} after {iters} iterations in {:.2} s",
        r.final_misfit, r.wall_time_secs
    );
    if let Some(s) = score {
        line.push_str(&format!(", score {s:.4}"));
    }
    println!("{line}");
}

/// Outcome of [`appendix_trials`].
#[derive(Debug, Clone, Serialize)]
pub struct AppendixSummary {
    pub trials: usize,
    /// Smallest `J_G - J_F` over all trials.
    pub min_gap: f64,
    /// Trials with `phi` a shifted delta.
    pub deltas: usize,
    /// Trials whose gap is within `1e-9` of zero.
    pub equalities: usize,
    /// Equalities with `phi` not a delta.
    pub false_equalities: usize,
    /// Largest relative difference of the `l1` norms.
    pub max_l1_rel: f64,
}

impl AppendixSummary {
    pub fn holds(&self) -> bool {
        self.min_gap >= -1e-12
            && self.false_equalities == 0
            && self.equalities == self.deltas
            && self.max_l1_rel <= 1e-12
    }
}

/// Random nonnegative `(f, phi)` pairs; one in five `phi` is a shifted delta.
pub fn appendix_trials(trials: usize, seed: u64) -> Result<AppendixSummary, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = AppendixSummary {
        trials,
        min_gap: f64::INFINITY,
        deltas: 0,
        equalities: 0,
        false_equalities: 0,
        max_l1_rel: 0.0,
    };
    for trial in 0..trials {
        let f: Vec<f64> = (0..rng.random_range(1..=40))
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let is_delta = trial % 5 == 0;
        let phi: Vec<f64> = if is_delta {
            let mut v = vec![0.0; rng.random_range(1..=6)];
            let k = v.len() - 1;
            v[k] = rng.random_range(0.1..3.0);
            v
        } else {
            (0..rng.random_range(2..=12))
                .map(|_| rng.random_range(0.05..1.0))
                .collect()
        };
        let origin = rng.random_range(-5..5i64) as isize;
        let r = appendix_check(&Sequence::new(origin, f)?, &Sequence::new(0, phi)?)?;
        s.min_gap = s.min_gap.min(r.gap());
        s.deltas += usize::from(is_delta);
        if r.gap().abs() <= 1e-9 {
            s.equalities += 1;
            s.false_equalities += usize::from(!is_delta);
        }
        s.max_l1_rel = s.max_l1_rel.max((r.l1_f - r.l1_g).abs() / r.l1_f);
    }
    Ok(s)
}

fn appendix(args: &RunArgs) -> Result<(), CliError> {
    let s = appendix_trials(args.trials, args.seed)?;
    println!(
        "appendix-check: {} trials, min(J_G - J_F) = {:.3e}, equalities {} of {} deltas, non-delta equalities {}, max l1 relative difference {:.1e}: {}",
        s.trials,
        s.min_gap,
        s.equalities,
        s.deltas,
        s.false_equalities,
        s.max_l1_rel,
        if s.holds() { "holds" } else { "VIOLATED" }
    );
    if s.holds() {
        Ok(())
    } else {
        Err(CliError::Format("focusing property violated".into()))
    }
}
