//! Acceptance checks. Run with `cargo test --test acceptance`; prints one
//! `[PASS]`/`[FAIL]` line per criterion and exits non-zero on any failure.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radprm::corpus::{parse_prompt, render_prompt, AblationMask, ClinicalContext};
use radprm::metrics::{auroc, bleu, bootstrap, classification_metrics, pairs_from, rouge_l, rouge_n, BootstrapConfig};
use radprm::pipeline::{run, Command, PipelineConfig, Verifier};
use radprm::prm::{
    encode_training, grad_check, load_checkpoint, prm_loss, save_checkpoint, verify, EncodeLimits, PrmArch, PrmModel,
    VerifyOptions,
};
use radprm::selection::{aggregate, reject, weighted_bon, AggregationMethod, ScoreInputs, ScoredReport};
use radprm::synth::{make_synthetic, SyntheticCorpus, SyntheticSpec};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn small_corpus(n: usize, seed: u64) -> SyntheticCorpus {
    make_synthetic(&SyntheticSpec {
        num_studies: n,
        candidates_per_study: 0,
        seed,
        ..SyntheticSpec::default()
    })
    .expect("synthetic corpus")
}

// 1
fn gradient_check() -> Outcome {
    let start = Instant::now();
    let model = ok(PrmModel::new(PrmArch::toy(), 7))?;
    let corpus = small_corpus(4, 5);
    let vocab = model.vocabulary();
    let mut batch = Vec::new();
    for (k, g) in corpus.generated.iter().take(3).enumerate() {
        let sents: Vec<String> = g.texts().iter().map(|s| s.to_string()).collect();
        let labels: Vec<u8> = corpus.corrupted[k].iter().map(|&c| u8::from(!c)).collect();
        let ctx = &corpus.studies[k].context;
        batch.push(ok(encode_training(&vocab, ctx, &sents, &labels, AblationMask::IDENTITY, EncodeLimits::default()))?);
    }
    let report = ok(grad_check(&model, &batch, 1e-5, 256, 11))?;
    let elapsed = start.elapsed();
    ensure!(report.coords >= 200, "only {} coordinates checked", report.coords);
    ensure!(report.max_relative_error < 1e-4, "max relative error {:e}", report.max_relative_error);
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "{} coords, max rel err {:.2e}, {:.1}s",
        report.coords,
        report.max_relative_error,
        elapsed.as_secs_f64()
    ))
}

// 2
fn loss_values() -> Outcome {
    let a = ok(prm_loss(&[0.5; 4], &[0, 1, 1, 0]))?;
    let b = ok(prm_loss(&[0.5; 4], &[1, 1, 1, 1]))?;
    let c = ok(prm_loss(&[0.9], &[1]))?;
    let want = 4.0 * 2f64.ln();
    ensure!((a - want).abs() < 1e-9 && (b - want).abs() < 1e-9, "{a} / {b} vs {want}");
    ensure!((c + 0.9f64.ln()).abs() < 1e-9, "{c} vs {}", -0.9f64.ln());
    Ok(format!("4ln2 -> {a:.12}, -ln0.9 -> {c:.12}"))
}

/// Shared 2,000-study pipeline run used by the learning and ablation checks.
struct LargeRun {
    dir: tempfile::TempDir,
    elapsed: Duration,
}

impl LargeRun {
    fn new() -> Result<Self, String> {
        let dir = ok(tempfile::tempdir())?;
        let mut cfg = PipelineConfig::default();
        cfg.paths.out = dir.path().to_path_buf();
        cfg.synth.num_studies = 2000;
        cfg.synth.hallucination_rate = 0.5;
        cfg.synth.plant_strength = 0.9;
        cfg.synth.candidates_per_study = 0;
        cfg.resolve();
        let start = Instant::now();
        for cmd in [
            Command::Synth,
            Command::Label,
            Command::Balance,
            Command::TrainPrm,
            Command::Verify(Verifier::Prm),
            Command::Eval(Verifier::Prm),
            Command::TrainMlp,
            Command::Verify(Verifier::Mlp),
            Command::Eval(Verifier::Mlp),
            Command::Ablate,
        ] {
            run(cmd, &cfg).map_err(|e| format!("{}: {e}", cmd.name()))?;
        }
        Ok(Self {
            dir,
            elapsed: start.elapsed(),
        })
    }

    fn metric(&self, file: &str, name: &str) -> Result<f64, String> {
        let text = ok(std::fs::read_to_string(self.dir.path().join(file)))?;
        let v: serde_json::Value = ok(serde_json::from_str(&text))?;
        v[name]["point"].as_f64().ok_or_else(|| format!("{file} has no `{name}`"))
    }
}

// 3
fn end_to_end(run: &Result<LargeRun, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let auc = run.metric("metrics_prm.json", "auroc")?;
    let mcc = run.metric("metrics_prm.json", "mcc")?;
    let mlp = run.metric("metrics_mlp.json", "accuracy")?;
    let detail = format!(
        "PRM AUROC {auc:.3} MCC {mcc:.3}, MLP accuracy {mlp:.3}, {:.0}s",
        run.elapsed.as_secs_f64()
    );
    ensure!(auc >= 0.85 && mcc >= 0.45 && mlp >= 0.95, "{detail}");
    ensure!(run.elapsed < Duration::from_secs(15 * 60), "{detail}");
    Ok(detail)
}

fn brute_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs as f64
}

// 4
fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.random_range(2..=12);
        let coarse = rng.random_bool(0.5);
        let scores: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.random_range(0..4) as f64 / 4.0 } else { rng.random() })
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if labels.iter().all(|&y| y == labels[0]) {
            continue;
        }
        let got = ok(auroc(&scores, &labels))?;
        let want = brute_auroc(&scores, &labels);
        ensure!(got.to_bits() == want.to_bits(), "{scores:?} {labels:?}: {got} vs {want}");
        checked += 1;
    }
    for probs in [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4]] {
        let m = classification_metrics(&pairs_from(&probs, &[1, 0, 1, 0], 0.5), 0.5);
        ensure!(m.mcc == 0.0, "single-class MCC {}", m.mcc);
    }
    let derived = ok(auroc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]))?;
    ensure!(derived == 0.75, "derived case {derived}");
    Ok(format!("{checked} brute-force datasets, single-class MCC 0, derived AUROC {derived}"))
}

// 5
fn bootstrap_intervals() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let items: Vec<(f64, u8)> = (0..300)
        .map(|_| {
            let y: u8 = rng.random_range(0..2);
            (f64::from(y) * 0.3 + rng.random::<f64>() * 0.7, y)
        })
        .collect();
    let metric = |s: &[(f64, u8)]| {
        let (p, y): (Vec<f64>, Vec<u8>) = s.iter().copied().unzip();
        auroc(&p, &y)
    };
    let cfg = BootstrapConfig {
        resamples: 1000,
        level: 0.95,
        seed: 17,
    };
    let a = ok(bootstrap(&items, metric, cfg))?;
    let b = ok(bootstrap(&items, metric, cfg))?;
    ensure!(
        a.lo.to_bits() == b.lo.to_bits() && a.hi.to_bits() == b.hi.to_bits() && a.point.to_bits() == b.point.to_bits(),
        "reruns differ: {a:?} vs {b:?}"
    );
    ensure!(0.0 <= a.lo && a.lo <= a.hi && a.hi <= 1.0, "interval {a:?}");
    let c = ok(bootstrap(&items, |_| Ok(0.42), cfg))?;
    ensure!(c.lo == c.hi && c.lo == 0.42, "constant metric gave {c:?}");
    Ok(format!("AUROC {:.3} [{:.3}, {:.3}], constant width 0", a.point, a.lo, a.hi))
}

/// Straight translation of the grouping rule, written without hashing.
fn enumerate_weighted(scores: &[f64], vectors: &[Vec<u8>]) -> usize {
    let n = scores.len();
    let mut best: Option<(f64, usize, usize)> = None; // (total, lowest member, chosen)
    for i in 0..n {
        if (0..i).any(|j| vectors[j] == vectors[i]) {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| vectors[j] == vectors[i]).collect();
        let total: f64 = members.iter().map(|&j| scores[j]).sum();
        let mut pick = members[0];
        for &j in &members {
            if scores[j] > scores[pick] {
                pick = j;
            }
        }
        let better = match best {
            None => true,
            Some((t, low, _)) => total > t || (total == t && i < low),
        };
        if better {
            best = Some((total, i, pick));
        }
    }
    best.expect("non-empty").2
}

// 6
fn weighted_best_of_n() -> Outcome {
    let a = ok(weighted_bon(&[0.9, 0.8, 0.95], &[vec![1, 0], vec![1, 0], vec![0, 1]]))?;
    ensure!(a == 0, "A/B/C chose {a}");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..1000 {
        let n = rng.random_range(1..=16);
        let dims = rng.random_range(1..=3);
        let coarse = trial % 2 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.random_range(1..=4) as f64 / 4.0 } else { rng.random() })
            .collect();
        let vectors: Vec<Vec<u8>> = (0..n).map(|_| (0..dims).map(|_| rng.random_range(0..2)).collect()).collect();
        let got = ok(weighted_bon(&scores, &vectors))?;
        let want = enumerate_weighted(&scores, &vectors);
        ensure!(got == want, "trial {trial}: {got} vs oracle {want} on {scores:?} {vectors:?}");
        let c = if coarse { 2f64.powi(rng.random_range(-6..6)) } else { rng.random_range(0.01..100.0) };
        let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
        let s = ok(weighted_bon(&scaled, &vectors))?;
        ensure!(s == got, "trial {trial}: scaling by {c} moved choice {got} -> {s}");
    }
    Ok("1000 instances match enumeration, A/B/C -> A, scale invariant".into())
}

// 7
fn aggregation_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let score = |m, p: &[f64]| {
        aggregate(
            m,
            &ScoreInputs {
                probs: p,
                ..Default::default()
            },
        )
    };
    for _ in 0..10_000 {
        let n = rng.random_range(1..=12);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(1e-6..1.0)).collect();
        let min = ok(score(AggregationMethod::MinProb, &p))?;
        let geo = ok(score(AggregationMethod::ProdProb, &p))?;
        let avg = ok(score(AggregationMethod::AvgProb, &p))?;
        ensure!(min <= geo && geo <= avg, "{p:?}: {min} {geo} {avg}");
    }
    let trace = ok(score(AggregationMethod::MinProb, &[0.480, 0.786, 0.103, 0.082]))?;
    ensure!(trace == 0.082, "trace min {trace}");
    Ok(format!("10000 vectors ordered, trace min {trace}"))
}

// 8
fn rejection_machinery() -> Outcome {
    let grid = [0.0, 5.0, 10.0, 15.0, 20.0];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let lone = [ScoredReport {
        study_id: "r0000".into(),
        score: 0.5,
    }];
    let lone_q = BTreeMap::from([("quality".to_string(), BTreeMap::from([("r0000".to_string(), 0.5)]))]);
    ensure!(reject("oracle", &lone, &lone_q, &grid).is_err(), "K=1 at 5% should leave nothing and fail");
    for k in [2usize, 7, 19, 20, 37, 100, 251] {
        let quality: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let reports: Vec<ScoredReport> = quality
            .iter()
            .enumerate()
            .map(|(i, &q)| ScoredReport {
                study_id: format!("r{i:04}"),
                score: q,
            })
            .collect();
        let per: BTreeMap<String, f64> = reports.iter().map(|r| (r.study_id.clone(), r.score)).collect();
        let table = BTreeMap::from([("quality".to_string(), per)]);
        let rows = ok(reject("oracle", &reports, &table, &grid))?;
        let baseline = quality.iter().sum::<f64>() / k as f64;
        ensure!(rows[0].value.to_bits() == baseline.to_bits(), "K={k}: pct 0 gave {} vs {baseline}", rows[0].value);
        for w in rows.windows(2) {
            ensure!(w[1].value >= w[0].value, "K={k}: {} -> {}", w[0].value, w[1].value);
        }
        for (row, pct) in rows.iter().zip([0usize, 5, 10, 15, 20]) {
            let dropped = (pct * k).div_ceil(100);
            ensure!(row.retained == k - dropped, "K={k} pct={pct}: kept {} expected {}", row.retained, k - dropped);
        }
    }
    Ok("monotone, pct=0 bit-exact, counts match ceil(pct*K/100)".into())
}

// 9
fn causality() -> Outcome {
    let corpus = small_corpus(60, 9);
    let pool: Vec<String> = corpus.generated.iter().flat_map(|g| g.texts().into_iter().map(String::from)).collect();
    let model = ok(PrmModel::new(PrmArch::toy(), 9))?;
    let opts = VerifyOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut trials = 0;
    while trials < 100 {
        let k = rng.random_range(0..corpus.generated.len());
        let mut sents: Vec<String> = corpus.generated[k].texts().into_iter().map(String::from).collect();
        if sents.len() < 2 {
            continue;
        }
        let ctx = &corpus.studies.iter().find(|s| s.study_id() == corpus.generated[k].study_id).expect("study").context;
        let before = ok(verify(&model, ctx, &sents, None, &opts))?;
        let j = rng.random_range(1..sents.len());
        let replacement = pool[rng.random_range(0..pool.len())].clone();
        if replacement == sents[j] {
            continue;
        }
        sents[j] = replacement;
        let after = ok(verify(&model, ctx, &sents, None, &opts))?;
        for i in 0..j {
            ensure!(
                before.probs[i].to_bits() == after.probs[i].to_bits(),
                "trial {trials}: p[{i}] changed after mutating sentence {j}"
            );
        }
        trials += 1;
    }
    Ok(format!("{trials} mutation trials bit-exact"))
}

// 10
fn text_metrics() -> Outcome {
    let s = "the heart size is normal and the lungs are clear";
    for (name, v) in [
        ("bleu", bleu(s, s, false)),
        ("bleu smoothed", bleu(s, s, true)),
        ("rouge-1", rouge_n(s, s, 1)),
        ("rouge-2", rouge_n(s, s, 2)),
        ("rouge-l", rouge_l(s, s)),
    ] {
        ensure!(v == 1.0, "{name} identity gave {v}");
    }
    let r1 = rouge_n("the cat sat", "the cat sat down", 1);
    ensure!((r1 - 0.857142857).abs() < 1e-9, "ROUGE-1 {r1}");
    Ok(format!("identities 1.0, ROUGE-1 {r1:.9}"))
}

fn dir_snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in ok(std::fs::read_dir(dir))? {
        let e = ok(e)?;
        out.insert(e.file_name().to_string_lossy().into_owned(), ok(std::fs::read(e.path()))?);
    }
    Ok(out)
}

fn cli_chain(out: &Path) -> Result<(), String> {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/toy.toml");
    let steps: &[&[&str]] = &[
        &["synth"],
        &["label"],
        &["balance"],
        &["train-prm"],
        &["train-mlp"],
        &["train-attn"],
        &["verify", "--verifier", "prm"],
        &["verify", "--verifier", "mlp"],
        &["verify", "--verifier", "attn"],
        &["eval", "--verifier", "prm"],
        &["eval", "--verifier", "mlp"],
        &["eval", "--verifier", "attn"],
        &["reject"],
        &["bon"],
        &["ablate"],
        &["report"],
    ];
    for step in steps {
        let status = ok(Process::new(env!("CARGO_BIN_EXE_radprm"))
            .args(*step)
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(out)
            .output())?;
        ensure!(
            status.status.success(),
            "`{}` failed: {}",
            step.join(" "),
            String::from_utf8_lossy(&status.stderr)
        );
    }
    Ok(())
}

// 11
fn round_trips() -> Outcome {
    let corpus = small_corpus(30, 11);
    let tmp = ok(tempfile::tempdir())?;
    let model = ok(PrmModel::new(PrmArch::toy(), 11))?;
    let ckpt = tmp.path().join("m.ckpt");
    ok(save_checkpoint(&model, &ckpt, None))?;
    let loaded = ok(load_checkpoint(&ckpt))?;
    let opts = VerifyOptions::default();
    for (study, g) in corpus.studies.iter().zip(&corpus.generated).take(10) {
        let sents: Vec<String> = g.texts().into_iter().map(String::from).collect();
        let a = ok(verify(&model, &study.context, &sents, None, &opts))?;
        let b = ok(verify(&loaded, &study.context, &sents, None, &opts))?;
        let same = a.probs.iter().zip(&b.probs).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure!(same && a.fed_back_labels == b.fed_back_labels, "verify differs after reload");
    }
    let mut contexts: Vec<ClinicalContext> = corpus.studies.iter().map(|s| s.context.clone()).collect();
    contexts.push(ok(parse_prompt(
        "Describe the findings. INDICATION: Chest pain. TECHNIQUE: Single AP view. COMPARISON: None.",
    ))?);
    for ctx in &contexts {
        let text = render_prompt(ctx, AblationMask::IDENTITY);
        let back = ok(parse_prompt(&text))?.with_study_id(ctx.study_id.clone());
        ensure!(&back == ctx, "prompt round trip changed {text:?}");
        ensure!(render_prompt(&back, AblationMask::IDENTITY) == text, "render not stable for {text:?}");
    }
    let a = ok(tempfile::tempdir())?;
    let b = ok(tempfile::tempdir())?;
    let start = Instant::now();
    cli_chain(a.path())?;
    cli_chain(b.path())?;
    let (sa, sb) = (dir_snapshot(a.path())?, dir_snapshot(b.path())?);
    ensure!(sa.keys().eq(sb.keys()), "artifact sets differ: {:?} vs {:?}", sa.keys(), sb.keys());
    for (name, bytes) in &sa {
        ensure!(&sb[name] == bytes, "{name} differs between reruns");
    }
    Ok(format!(
        "checkpoint and prompt round-trip, CLI chain {} artifacts byte-identical ({:.0}s)",
        sa.len(),
        start.elapsed().as_secs_f64()
    ))
}

// 12
fn ablation(run: &Result<LargeRun, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let text = ok(std::fs::read_to_string(run.dir.path().join("ablation.csv")))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("empty ablation.csv")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("no `{name}` column"));
    let (model_col, variant_col, auroc_col) = (col("model")?, col("variant")?, col("auroc")?);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let expected = ["Original", "Ablate INDICATION", "Ablate TECHNIQUE", "Ablate COMPARISON"];
    let models: HashSet<&str> = rows.iter().map(|r| r[model_col]).collect();
    let mut drop = f64::NAN;
    for m in &models {
        let mine: Vec<&Vec<&str>> = rows.iter().filter(|r| r[model_col] == *m).collect();
        let names: Vec<&str> = mine.iter().map(|r| r[variant_col]).collect();
        ensure!(names == expected, "model {m} variants {names:?}");
        let auc = |v: &str| -> Result<f64, String> {
            ok(mine.iter().find(|r| r[variant_col] == v).expect("present")[auroc_col].parse::<f64>())
        };
        drop = auc("Original")? - auc("Ablate TECHNIQUE")?;
        ensure!(drop >= 0.05, "model {m}: TECHNIQUE ablation lowers AUROC by only {drop:.3}");
    }
    ensure!(!models.is_empty(), "no rows");
    Ok(format!("{} model(s) x 4 variants, TECHNIQUE AUROC drop {drop:.3}", models.len()))
}

fn main() {
    let mut results: Vec<Outcome> = Vec::new();
    let mut record = |idx: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let (tag, detail) = match &r {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("[{tag}] {idx:>2} {name}: {detail}");
        results.push(r);
    };
    record(1, "gradient correctness", &mut gradient_check);
    record(2, "loss unit values", &mut loss_values);
    let large = LargeRun::new();
    record(3, "synthetic end-to-end learning", &mut || end_to_end(&large));
    record(4, "metric oracles", &mut metric_oracles);
    record(5, "bootstrap", &mut bootstrap_intervals);
    record(6, "weighted best-of-N", &mut weighted_best_of_n);
    record(7, "aggregation ordering", &mut aggregation_ordering);
    record(8, "rejection machinery", &mut rejection_machinery);
    record(9, "causality of sequential verifier", &mut causality);
    record(10, "text metrics", &mut text_metrics);
    record(11, "round-trips and determinism", &mut round_trips);
    record(12, "ablation harness", &mut || ablation(&large));
    let failed = results.iter().filter(|r| r.is_err()).count();
    println!("\nacceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
