//! The whole chain, driven through the library instead of the CLI:
//! synth, label, balance, train, verify, eval, reject, bon, ablate, report.

use radprm::pipeline::{run, Command, PipelineConfig, Verifier};

fn main() -> radprm::Result<()> {
    let mut config = PipelineConfig::from_toml_str(include_str!("../configs/toy.toml"))?;
    config.paths.out = std::env::temp_dir().join("radprm-pipeline-example");
    config.resolve();
    let chain = [
        Command::Synth,
        Command::Label,
        Command::Balance,
        Command::TrainPrm,
        Command::Verify(Verifier::Prm),
        Command::Eval(Verifier::Prm),
        Command::Reject,
        Command::Bon,
        Command::Ablate,
        Command::Report,
    ];
    for cmd in chain {
        for path in run(cmd, &config)? {
            println!("{:<10} {}", cmd.name(), path.display());
        }
    }
    let report = std::fs::read_to_string(config.paths.out.join("report.md")).expect("report written");
    println!("\n{report}");
    Ok(())
}
