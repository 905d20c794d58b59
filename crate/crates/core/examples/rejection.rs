//! Percentile rejection: drop the lowest-scoring reports and watch quality rise.

use std::collections::BTreeMap;

use radprm::artifact::ArtifactMeta;
use radprm::selection::{reject, rejection_csv, ScoredReport, DEFAULT_PCT_GRID};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> radprm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut noisy = Vec::new();
    let mut quality = BTreeMap::new();
    for k in 0..200 {
        let q: f64 = rng.random();
        let id = format!("study-{k:03}");
        quality.insert(id.clone(), q);
        noisy.push(ScoredReport {
            study_id: id,
            score: q + rng.random_range(-0.3..0.3),
        });
    }
    let table: BTreeMap<String, BTreeMap<String, f64>> = [("quality".to_string(), quality)].into();
    let rows = reject("noisy_score", &noisy, &table, &DEFAULT_PCT_GRID)?;
    for r in &rows {
        println!("{:>4}%  kept {:>3}  mean quality {:.4}", r.pct, r.retained, r.value);
    }
    print!("\n{}", String::from_utf8_lossy(&rejection_csv(&ArtifactMeta::detached(), &rows)));
    Ok(())
}
