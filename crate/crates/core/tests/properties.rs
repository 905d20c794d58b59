use std::collections::HashMap;

use proptest::prelude::*;

use radprm::corpus::{parse_prompt, render_prompt, AblationMask, ClinicalContext};
use radprm::labeling::{balance, LabeledSentence};
use radprm::metrics::{bleu, rouge_l, rouge_n};
use radprm::selection::{aggregate, rejected_count, retained_ids, weighted_bon, AggregationMethod, ScoreInputs, ScoredReport};

fn score(method: AggregationMethod, probs: &[f64]) -> f64 {
    aggregate(
        method,
        &ScoreInputs {
            probs,
            log_prob: Some(-1.0),
            ..Default::default()
        },
    )
    .unwrap()
}

fn phrase() -> impl Strategy<Value = String> {
    "[a-z]{1,8}( [a-z]{1,8}){0,3}\\.".prop_map(|s| {
        let mut c = s.chars();
        let first = c.next().unwrap().to_ascii_uppercase();
        std::iter::once(first).chain(c).collect()
    })
}

fn context() -> impl Strategy<Value = ClinicalContext> {
    (phrase(), phrase(), phrase(), phrase()).prop_map(|(preamble, indication, technique, comparison)| ClinicalContext {
        study_id: String::new(),
        preamble,
        indication,
        technique,
        comparison,
    })
}

proptest! {
    #[test]
    fn min_geo_avg_ordering(probs in prop::collection::vec(1e-9f64..=1.0, 1..20)) {
        let min = score(AggregationMethod::MinProb, &probs);
        let geo = score(AggregationMethod::ProdProb, &probs);
        let avg = score(AggregationMethod::AvgProb, &probs);
        prop_assert!(min <= geo && geo <= avg, "{min} {geo} {avg}");
    }

    #[test]
    fn prob_aggregates_ignore_order(mut probs in prop::collection::vec(0.0f64..=1.0, 1..20), seed in any::<u64>()) {
        let before: Vec<f64> = [AggregationMethod::MinProb, AggregationMethod::AvgProb, AggregationMethod::ProdProb]
            .iter().map(|&m| score(m, &probs)).collect();
        let k = (seed as usize) % probs.len();
        probs.rotate_left(k);
        probs.reverse();
        let after: Vec<f64> = [AggregationMethod::MinProb, AggregationMethod::AvgProb, AggregationMethod::ProdProb]
            .iter().map(|&m| score(m, &probs)).collect();
        prop_assert_eq!(before[0], after[0]);
        for (a, b) in before.iter().zip(&after).skip(1) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn weighted_choice_is_in_heaviest_group(
        entries in prop::collection::vec((0.0f64..1.0, 0u8..3), 1..16)
    ) {
        let scores: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let vectors: Vec<Vec<u8>> = entries.iter().map(|e| vec![e.1]).collect();
        let chosen = weighted_bon(&scores, &vectors).unwrap();
        let mut totals: HashMap<u8, f64> = HashMap::new();
        for (s, v) in scores.iter().zip(&vectors) {
            *totals.entry(v[0]).or_default() += s;
        }
        let best = totals.values().copied().fold(f64::MIN, f64::max);
        prop_assert!(totals[&vectors[chosen][0]] >= best - 1e-12);
        for (i, v) in vectors.iter().enumerate() {
            if v == &vectors[chosen] {
                prop_assert!(scores[i] <= scores[chosen]);
            }
        }
    }

    #[test]
    fn rejection_counts(k in 1usize..400, pct in 0u32..100) {
        let reports: Vec<ScoredReport> = (0..k)
            .map(|i| ScoredReport { study_id: format!("s{i:04}"), score: ((i * 37) % 11) as f64 })
            .collect();
        let dropped = (pct as usize * k).div_ceil(100);
        prop_assert_eq!(rejected_count(f64::from(pct), k), dropped);
        let kept = retained_ids(&reports, f64::from(pct)).unwrap();
        prop_assert_eq!(kept.len(), k - dropped);
        let min_kept = kept.iter().map(|id| reports.iter().find(|r| &r.study_id == id).unwrap().score)
            .fold(f64::INFINITY, f64::min);
        let dropped_max = reports.iter().filter(|r| !kept.contains(&r.study_id.as_str()))
            .map(|r| r.score).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(dropped_max <= min_kept);
    }

    #[test]
    fn prompt_round_trip(ctx in context()) {
        let text = render_prompt(&ctx, AblationMask::IDENTITY);
        prop_assert_eq!(parse_prompt(&text).unwrap(), ctx);
    }

    #[test]
    fn dropping_a_field_removes_only_that_field(ctx in context(), which in 0usize..3) {
        let mask = [AblationMask::drop_indication(), AblationMask::drop_technique(), AblationMask::drop_comparison()][which];
        let back = parse_prompt(&render_prompt(&ctx, mask)).unwrap();
        let mut want = ctx.clone();
        match which {
            0 => want.indication.clear(),
            1 => want.technique.clear(),
            _ => want.comparison.clear(),
        }
        prop_assert_eq!(back, want);
    }

    #[test]
    fn text_metrics_in_unit_range(a in "[a-e]{1,3}( [a-e]{1,3}){0,10}", b in "[a-e]{1,3}( [a-e]{1,3}){0,10}") {
        for v in [bleu(&a, &b, true), bleu(&a, &b, false), rouge_n(&a, &b, 1), rouge_n(&a, &b, 2), rouge_l(&a, &b)] {
            prop_assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn balance_respects_ratio(labels in prop::collection::vec(0u8..2, 2..200), ratio in 1.0f64..3.0, seed in any::<u64>()) {
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let items: Vec<LabeledSentence> = labels.iter().enumerate().map(|(i, &y)| LabeledSentence {
            study_id: format!("s{i:03}"),
            sentence_index: 0,
            text: String::new(),
            label: y,
            entailing_gt_index: None,
        }).collect();
        let out = balance(&items, ratio, seed).unwrap();
        let pos = out.iter().filter(|l| l.label == 1).count();
        let neg = out.len() - pos;
        let (major, minor) = (pos.max(neg), pos.min(neg));
        prop_assert!(major as f64 <= ratio * minor as f64 + 1e-9);
        prop_assert_eq!(minor, labels.iter().filter(|&&y| y == 1).count().min(labels.iter().filter(|&&y| y == 0).count()));
        prop_assert_eq!(out, balance(&items, ratio, seed).unwrap());
    }
}
