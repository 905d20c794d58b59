//! Grey-box baselines: an MLP over token-statistic summaries and an attention
//! classifier over token embeddings.

use radprm::baselines::{extract_features, train_attn, train_mlp, AttnConfig, MlpConfig};
use radprm::labeling::{label_corpus, SyntheticOracle};
use radprm::metrics::{auroc, classification_metrics, pairs_from};
use radprm::synth::{make_synthetic, SyntheticSpec};

fn main() -> radprm::Result<()> {
    let corpus = make_synthetic(&SyntheticSpec {
        num_studies: 400,
        candidates_per_study: 0,
        ..Default::default()
    })?;
    let labels = label_corpus(&corpus.studies, &corpus.generated, &SyntheticOracle)?;
    let mut feats = Vec::new();
    for report in &corpus.generated {
        for s in &report.sentences {
            feats.push(extract_features(s)?.to_array());
        }
    }
    // labels are sorted by study id, as are the synthetic reports
    let ys: Vec<u8> = labels.iter().map(|l| l.label).collect();
    let cut = feats.len() * 4 / 5;

    let mlp = train_mlp(&feats[..cut], &ys[..cut], &MlpConfig::default())?;
    let p = mlp.predict(&feats[cut..]);
    let m = classification_metrics(&pairs_from(&p, &ys[cut..], 0.5), 0.5);
    println!("mlp   accuracy {:.3}  mcc {:.3}  auroc {:.3}", m.accuracy, m.mcc, auroc(&p, &ys[cut..])?);

    let seqs: Vec<_> = corpus.embeddings.iter().map(|e| e.vectors.clone()).collect();
    let val = cut + (seqs.len() - cut) / 2;
    let cfg = AttnConfig {
        proj_dim: 32,
        heads: 4,
        max_epochs: 10,
        learning_rate: 1e-3,
        ..Default::default()
    };
    let (attn, hist) = train_attn(&seqs[..cut], &ys[..cut], &seqs[cut..val], &ys[cut..val], &cfg)?;
    let p = attn.predict(&seqs[val..])?;
    println!(
        "attn  auroc {:.3} (best epoch {}, early stop {})",
        auroc(&p, &ys[val..])?,
        hist.best_epoch,
        hist.stopped_early
    );
    Ok(())
}
