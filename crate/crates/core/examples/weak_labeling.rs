//! Weak sentence labels from an entailment oracle, then class balancing.

use radprm::labeling::{balance, label_corpus, label_sentence, SyntheticOracle};
use radprm::synth::{make_synthetic, SyntheticSpec};

fn main() -> radprm::Result<()> {
    let gt = vec!["There is a small pleural effusion.".to_string(), "No pneumothorax.".to_string()];
    for hypothesis in ["No pneumothorax.", "There is pneumothorax.", "There is cardiomegaly."] {
        let l = label_sentence("demo", 0, hypothesis, &gt, &SyntheticOracle)?;
        println!("{hypothesis:<28} label={} entailed_by={:?}", l.label, l.entailing_gt_index);
    }

    let corpus = make_synthetic(&SyntheticSpec {
        num_studies: 300,
        candidates_per_study: 0,
        ..Default::default()
    })?;
    let labels = label_corpus(&corpus.studies, &corpus.generated, &SyntheticOracle)?;
    let correct = labels.iter().filter(|l| l.label == 1).count();
    println!("\n{} sentences, {} correct, {} hallucinated", labels.len(), correct, labels.len() - correct);
    let kept = balance(&labels, 1.0, 7)?;
    let kept_correct = kept.iter().filter(|l| l.label == 1).count();
    println!("after balancing: {kept_correct} correct, {} hallucinated", kept.len() - kept_correct);
    Ok(())
}
