//! Sentence metrics with bootstrap intervals, text overlap and finding F1.

use radprm::metrics::{
    auroc, bleu, bootstrap, finding_f1, pairs_from, rouge_l, rouge_n, sentence_report, toy_finding_labeler,
    BootstrapConfig, Lexicon,
};

fn main() -> radprm::Result<()> {
    println!("AUROC of the textbook case: {}", auroc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1])?);

    let probs = [0.92, 0.15, 0.71, 0.64, 0.33, 0.88, 0.05, 0.49, 0.77, 0.21];
    let labels = [1, 0, 1, 0, 0, 1, 0, 1, 1, 0];
    let pairs = pairs_from(&probs, &labels, 0.5);
    let cfg = BootstrapConfig {
        seed: 42,
        ..Default::default()
    };
    for (name, e) in sentence_report(&pairs, 0.5, cfg)? {
        println!("{name:<9} {:.3}  [{:.3}, {:.3}]  n={}", e.point, e.lo, e.hi, e.n);
    }
    let mean_prob = bootstrap(&probs, |d| Ok(d.iter().sum::<f64>() / d.len() as f64), cfg)?;
    println!("mean prob {:.3} [{:.3}, {:.3}]", mean_prob.point, mean_prob.lo, mean_prob.hi);

    let (c, r) = ("the cat sat", "the cat sat down");
    println!("\nBLEU {:.4}  ROUGE-1 {:.9}  ROUGE-L {:.4}", bleu(c, r, true), rouge_n(c, r, 1), rouge_l(c, r));

    let lex = Lexicon::standard();
    let gen = toy_finding_labeler("There is a small pleural effusion. No pneumothorax.", &lex)?;
    let gt = toy_finding_labeler("Pleural effusion is present. There is cardiomegaly.", &lex)?;
    println!("finding F1 (micro) {:.3}", finding_f1(&[gen], &[gt])?);
    Ok(())
}
