use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::ArtifactMeta;
use crate::baselines::{AttnConfig, MlpConfig};
use crate::corpus::AblationMask;
use crate::error::{Error, Result};
use crate::labeling::{OracleBackend, OracleConfig};
use crate::metrics::BootstrapConfig;
use crate::prm::{Feedback, PrmArch, TrainConfig};
use crate::selection::{AggregationMethod, EntropyPooling, Subset, DEFAULT_PCT_GRID};
use crate::synth::SyntheticSpec;

/// Component seeds default to `global` plus a fixed offset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub global: u64,
    pub balance: Option<u64>,
    pub train: Option<u64>,
    pub bootstrap: Option<u64>,
}

impl Seeds {
    pub fn balance(&self) -> u64 {
        self.balance.unwrap_or(self.global.wrapping_add(1))
    }

    pub fn train(&self) -> u64 {
        self.train.unwrap_or(self.global.wrapping_add(2))
    }

    pub fn bootstrap(&self) -> u64 {
        self.bootstrap.unwrap_or(self.global.wrapping_add(3))
    }

    pub fn resolved(&self) -> BTreeMap<String, u64> {
        [
            ("global", self.global),
            ("balance", self.balance()),
            ("train", self.train()),
            ("bootstrap", self.bootstrap()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Output directory plus optional external inputs (default: inside `out`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out: PathBuf,
    pub studies: Option<PathBuf>,
    pub generated: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            out: PathBuf::from("runs/toy"),
            studies: None,
            generated: None,
            candidates: None,
            embeddings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceConfig {
    /// Upper bound on majority/minority after downsampling.
    pub ratio: f64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self { ratio: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrmSection {
    pub arch: PrmArch,
    pub train: TrainConfig,
}

impl Default for PrmSection {
    fn default() -> Self {
        Self {
            arch: PrmArch::toy(),
            train: TrainConfig::toy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub threshold: f64,
    pub resamples: usize,
    pub level: f64,
    pub feedback: Feedback,
    /// Score only sentences kept by balancing.
    pub balanced_only: bool,
    /// Keyword strata reported next to the sentence metrics.
    pub keywords: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            resamples: 1000,
            level: 0.95,
            feedback: Feedback::Greedy,
            balanced_only: true,
            keywords: vec!["effusion".into(), "pneumothorax".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verifier {
    Prm,
    Mlp,
    Attn,
}

impl Verifier {
    pub fn name(self) -> &'static str {
        match self {
            Verifier::Prm => "prm",
            Verifier::Mlp => "mlp",
            Verifier::Attn => "attn",
        }
    }
}

impl std::fmt::Display for Verifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Source of sentence probabilities for the probability-based methods.
    pub verifier: Verifier,
    pub methods: Vec<AggregationMethod>,
    pub pct_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub subset: Subset,
    pub entropy_pooling: EntropyPooling,
    pub bleu_smoothing: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            verifier: Verifier::Prm,
            methods: AggregationMethod::ALL.to_vec(),
            pct_grid: DEFAULT_PCT_GRID.to_vec(),
            n_grid: vec![1, 2, 4, 8],
            subset: Subset::Prefix,
            entropy_pooling: EntropyPooling::SentenceThenReport,
            bleu_smoothing: false,
        }
    }
}

/// A named PRM checkpoint compared by `ablate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedModel {
    pub name: String,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Mask applied by `verify` and `eval`.
    pub mask: AblationMask,
    /// Checkpoints compared by `ablate`; empty means the pipeline's own PRM.
    pub models: Vec<NamedModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seeds: Seeds,
    pub paths: Paths,
    pub oracle: OracleConfig,
    pub synth: SyntheticSpec,
    pub balance: BalanceConfig,
    pub prm: PrmSection,
    pub mlp: MlpConfig,
    pub attn: AttnConfig,
    pub eval: EvalConfig,
    pub selection: SelectionConfig,
    pub ablation: AblationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seeds: Seeds::default(),
            paths: Paths::default(),
            oracle: OracleConfig::default(),
            synth: SyntheticSpec::default(),
            balance: BalanceConfig::default(),
            prm: PrmSection::default(),
            mlp: MlpConfig::default(),
            attn: AttnConfig {
                proj_dim: 64,
                ..AttnConfig::default()
            },
            eval: EvalConfig::default(),
            selection: SelectionConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub oracle: Option<OracleBackend>,
    pub methods: Option<Vec<AggregationMethod>>,
    pub pct_grid: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
    pub ablate: Option<AblationMask>,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seeds.global = s;
        }
        if let Some(b) = o.oracle {
            self.oracle.backend = b;
        }
        if let Some(m) = &o.methods {
            self.selection.methods = m.clone();
        }
        if let Some(g) = &o.pct_grid {
            self.selection.pct_grid = g.clone();
        }
        if let Some(g) = &o.n_grid {
            self.selection.n_grid = g.clone();
        }
        if let Some(m) = o.ablate {
            self.ablation.mask = m;
        }
        if let Some(p) = &o.out {
            self.paths.out = p.clone();
        }
    }

    /// Copies the resolved seeds into the component configs.
    pub fn resolve(&mut self) {
        self.synth.seed = self.seeds.global;
        self.prm.train.seed = self.seeds.train();
        self.mlp.seed = self.seeds.train();
        self.attn.seed = self.seeds.train();
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.oracle.validate()?;
        self.prm.arch.validate()?;
        self.prm.train.validate(&self.prm.arch)?;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.balance.ratio > 0.0) {
            return bad(format!("balance.ratio {} must be positive", self.balance.ratio));
        }
        if !(0.0..=1.0).contains(&self.eval.threshold) {
            return bad("eval.threshold must lie in [0, 1]".into());
        }
        if !(self.eval.level > 0.0 && self.eval.level < 1.0) || self.eval.resamples == 0 {
            return bad("eval.level must lie in (0, 1) and eval.resamples be positive".into());
        }
        if self.selection.methods.is_empty() {
            return bad("selection.methods is empty".into());
        }
        if let Some(p) = self.selection.pct_grid.iter().find(|p| !(0.0..100.0).contains(*p)) {
            return bad(format!("pct_grid value {p} outside [0, 100)"));
        }
        if self.selection.n_grid.is_empty() || self.selection.n_grid.contains(&0) {
            return bad("n_grid values must be positive".into());
        }
        if self.selection.verifier == Verifier::Attn {
            return bad("selection.verifier must be prm or mlp (candidates carry no embeddings)".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of everything except `paths`, so the
    /// same experiment hashes identically wherever it is written.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("struct").remove("paths");
        let digest = Sha256::digest(serde_json::to_vec(&v).expect("value serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn meta(&self) -> ArtifactMeta {
        ArtifactMeta::new(self.hash(), self.seeds.resolved())
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            resamples: self.eval.resamples,
            level: self.eval.level,
            seed: self.seeds.bootstrap(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_overrides() {
        let c = PipelineConfig::default();
        let back = PipelineConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        let mut d = PipelineConfig::from_toml_str("[seeds]\nglobal = 7\n[selection]\nn_grid = [1, 2]\n").unwrap();
        d.apply(&Overrides {
            n_grid: Some(vec![1]),
            ..Default::default()
        });
        d.resolve();
        assert_eq!(d.selection.n_grid, vec![1]);
        assert_eq!(d.prm.train.seed, 9);
        assert_eq!(d.synth.seed, 7);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        assert!(matches!(PipelineConfig::from_toml_str("[seedz]\n"), Err(Error::Config(_))));
        for nested in ["[synth]\nsurprise = 1\n", "[prm.train]\nlr = 1\n", "[mlp]\nx = 1\n", "[attn]\nx = 1\n", "[oracle]\nx = 1\n"] {
            assert!(matches!(PipelineConfig::from_toml_str(nested), Err(Error::Config(_))), "{nested}");
        }
    }

    #[test]
    fn hash_ignores_paths() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.paths.out = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seeds.global = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
