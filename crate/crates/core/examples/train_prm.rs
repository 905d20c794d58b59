//! Train the toy sequential verifier on a synthetic corpus and print a
//! per-sentence probability trace for one held-out report.
//!
//! `cargo run --release --example train_prm`

use radprm::labeling::{balance, label_corpus, SyntheticOracle};
use radprm::metrics::auroc;
use radprm::prm::{build_examples, train, verify, PrmArch, PrmDataset, TrainConfig, VerifyOptions};
use radprm::selection::{aggregate, AggregationMethod, ScoreInputs};
use radprm::synth::{make_synthetic, SyntheticSpec};

fn main() -> radprm::Result<()> {
    let corpus = make_synthetic(&SyntheticSpec {
        num_studies: 600,
        candidates_per_study: 0,
        ..Default::default()
    })?;
    let labels = label_corpus(&corpus.studies, &corpus.generated, &SyntheticOracle)?;
    let kept = balance(&labels, 1.0, 1)?;
    let mut examples = build_examples(&corpus.studies, &corpus.generated, &labels, Some(&kept))?;
    let test = examples.split_off(examples.len() * 9 / 10);
    let validation = examples.split_off(examples.len() * 8 / 9);
    let dataset = PrmDataset {
        train: examples,
        validation,
    };
    let config = TrainConfig::toy();
    let (model, history) = train(PrmArch::toy(), &dataset, &config)?;
    for r in &history.records {
        println!("step {:>4}  train {:.4}  val {:?}  auroc {:?}", r.step, r.train_loss, r.val_loss, r.val_auroc);
    }

    let opts = VerifyOptions {
        limits: config.limits(),
        ..Default::default()
    };
    let (mut probs, mut ys) = (Vec::new(), Vec::new());
    for e in &test {
        let r = verify(&model, &e.context, &e.sentences, None, &opts)?;
        probs.extend_from_slice(&r.probs);
        ys.extend_from_slice(&e.labels);
    }
    println!("held-out AUROC {:.3} over {} sentences", auroc(&probs, &ys)?, probs.len());

    let e = &test[0];
    let r = verify(&model, &e.context, &e.sentences, None, &opts)?;
    for ((s, p), y) in e.sentences.iter().zip(&r.probs).zip(&e.labels) {
        println!("{p:.3}  gold={y}  {s}");
    }
    let inputs = ScoreInputs {
        probs: &r.probs,
        ..Default::default()
    };
    for m in [AggregationMethod::MinProb, AggregationMethod::AvgProb, AggregationMethod::ProdProb] {
        println!("{m}: {:.3}", aggregate(m, &inputs)?);
    }
    Ok(())
}
