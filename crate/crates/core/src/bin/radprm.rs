use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use radprm::corpus::AblationMask;
use radprm::labeling::OracleBackend;
use radprm::pipeline::{exit_code, run, Command, Overrides, PipelineConfig, Verifier};
use radprm::selection::AggregationMethod;

#[derive(Parser)]
#[command(name = "radprm", version, about = "Sentence-level verification of generated radiology reports")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML pipeline configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    oracle: Option<OracleArg>,
    /// Aggregation methods (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    method: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pct_grid: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Drop one context field from the verifier prompt.
    #[arg(long, global = true, value_enum)]
    ablate: Option<FieldArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Synthetic,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Indication,
    Technique,
    Comparison,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifierArg {
    Prm,
    Mlp,
    Attn,
}

impl From<VerifierArg> for Verifier {
    fn from(v: VerifierArg) -> Self {
        match v {
            VerifierArg::Prm => Verifier::Prm,
            VerifierArg::Mlp => Verifier::Mlp,
            VerifierArg::Attn => Verifier::Attn,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic corpus.
    Synth,
    /// Weakly label generated sentences with the entailment oracle.
    Label,
    /// Downsample the majority class.
    Balance,
    TrainPrm,
    TrainMlp,
    TrainAttn,
    /// Score the test split with a trained verifier.
    Verify {
        #[arg(long, value_enum, default_value = "prm")]
        verifier: VerifierArg,
    },
    /// Sentence metrics with bootstrap intervals.
    Eval {
        #[arg(long, value_enum, default_value = "prm")]
        verifier: VerifierArg,
    },
    /// Percentile rejection curves.
    Reject,
    /// Best-of-N sweep.
    Bon,
    /// Context-field ablation table.
    Ablate,
    /// Markdown summary of the run directory.
    Report,
    /// Print the effective configuration as TOML.
    Config,
}

fn overrides(g: &GlobalArgs) -> Result<Overrides, String> {
    let methods = match &g.method {
        None => None,
        Some(names) => Some(
            names
                .iter()
                .map(|n| AggregationMethod::parse(n).ok_or_else(|| format!("unknown method `{n}`")))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    Ok(Overrides {
        seed: g.seed,
        oracle: g.oracle.map(|o| match o {
            OracleArg::Synthetic => OracleBackend::Synthetic,
            OracleArg::Remote => OracleBackend::Remote,
        }),
        methods,
        pct_grid: g.pct_grid.clone(),
        n_grid: g.n_grid.clone(),
        ablate: g.ablate.map(|f| match f {
            FieldArg::Indication => AblationMask::drop_indication(),
            FieldArg::Technique => AblationMask::drop_technique(),
            FieldArg::Comparison => AblationMask::drop_comparison(),
        }),
        out: g.out.clone(),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut config = match &cli.global.config {
        Some(p) => match PipelineConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => PipelineConfig::default(),
    };
    match overrides(&cli.global) {
        Ok(o) => config.apply(&o),
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    }
    config.resolve();
    let command = match cli.command {
        Cmd::Synth => Command::Synth,
        Cmd::Label => Command::Label,
        Cmd::Balance => Command::Balance,
        Cmd::TrainPrm => Command::TrainPrm,
        Cmd::TrainMlp => Command::TrainMlp,
        Cmd::TrainAttn => Command::TrainAttn,
        Cmd::Verify { verifier } => Command::Verify(verifier.into()),
        Cmd::Eval { verifier } => Command::Eval(verifier.into()),
        Cmd::Reject => Command::Reject,
        Cmd::Bon => Command::Bon,
        Cmd::Ablate => Command::Ablate,
        Cmd::Report => Command::Report,
        Cmd::Config => {
            print!("{}", config.to_toml_string());
            return ExitCode::SUCCESS;
        }
    };
    match run(command, &config) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error ({}): {e}", command.name());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
