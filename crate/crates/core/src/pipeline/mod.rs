//! Configuration, artifact layout and the command runner behind the CLI.

mod commands;
mod config;
mod report;

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use commands::{eval_pairs, run, AblationRow, Command};
pub use config::{
    AblationConfig, BalanceConfig, EvalConfig, NamedModel, Overrides, Paths, PipelineConfig, PrmSection, Seeds,
    SelectionConfig, Verifier,
};
pub use report::{collect_report_inputs, emit_report, parse_bon_csv, parse_rejection_csv, ReportInputs};

use crate::corpus::AblationMask;
use crate::error::Error;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::NonFinite { .. } | Error::Bootstrap { .. } => 4,
        _ => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// 80/10/10 split keyed on a hash of the study id, independent of seeds and
/// of corpus order.
pub fn split_of(study_id: &str) -> Split {
    let d = Sha256::digest(study_id.as_bytes());
    let bucket = u64::from_be_bytes(d[..8].try_into().expect("8 bytes")) % 100;
    match bucket {
        0..=79 => Split::Train,
        80..=89 => Split::Validation,
        _ => Split::Test,
    }
}

/// File-name suffix for a context mask, empty for the full prompt.
pub fn mask_suffix(mask: AblationMask) -> String {
    let mut s = String::new();
    for (on, name) in [
        (mask.drop_indication, "indication"),
        (mask.drop_technique, "technique"),
        (mask.drop_comparison, "comparison"),
    ] {
        if on {
            s.push_str("_no_");
            s.push_str(name);
        }
    }
    s
}

/// Where each artifact lives under the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    paths: Paths,
}

impl Layout {
    pub fn new(paths: &Paths) -> Self {
        Self { paths: paths.clone() }
    }

    pub fn out(&self) -> &Path {
        &self.paths.out
    }

    fn file(&self, name: &str) -> PathBuf {
        self.paths.out.join(name)
    }

    pub fn studies(&self) -> PathBuf {
        self.paths.studies.clone().unwrap_or_else(|| self.file("studies.jsonl"))
    }

    pub fn generated(&self) -> PathBuf {
        self.paths.generated.clone().unwrap_or_else(|| self.file("generated.jsonl"))
    }

    pub fn candidates(&self) -> PathBuf {
        self.paths.candidates.clone().unwrap_or_else(|| self.file("candidates.jsonl"))
    }

    pub fn embeddings(&self) -> PathBuf {
        self.paths.embeddings.clone().unwrap_or_else(|| self.file("embeddings.bin"))
    }

    pub fn labels(&self) -> PathBuf {
        self.file("labels.jsonl")
    }

    pub fn balanced(&self) -> PathBuf {
        self.file("balanced.jsonl")
    }

    pub fn prm_checkpoint(&self) -> PathBuf {
        self.file("prm.ckpt")
    }

    pub fn prm_history(&self) -> PathBuf {
        self.file("prm_history.jsonl")
    }

    pub fn features(&self) -> PathBuf {
        self.file("features.jsonl")
    }

    pub fn mlp(&self) -> PathBuf {
        self.file("mlp.json")
    }

    pub fn attn(&self) -> PathBuf {
        self.file("attn.json")
    }

    pub fn attn_history(&self) -> PathBuf {
        self.file("attn_history.jsonl")
    }

    pub fn verification(&self, v: Verifier, mask: AblationMask) -> PathBuf {
        self.file(&format!("verify_{v}{}.jsonl", mask_suffix(mask)))
    }

    pub fn metrics(&self, v: Verifier, mask: AblationMask) -> PathBuf {
        self.file(&format!("metrics_{v}{}.json", mask_suffix(mask)))
    }

    pub fn rejection(&self) -> PathBuf {
        self.file("rejection.csv")
    }

    pub fn bon(&self) -> PathBuf {
        self.file("bon.csv")
    }

    pub fn selection_audit(&self) -> PathBuf {
        self.file("selection_audit.jsonl")
    }

    pub fn ablation_csv(&self) -> PathBuf {
        self.file("ablation.csv")
    }

    pub fn ablation_json(&self) -> PathBuf {
        self.file("ablation.json")
    }

    pub fn report(&self) -> PathBuf {
        self.file("report.md")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stable_and_roughly_proportional() {
        assert_eq!(split_of("study-00017"), split_of("study-00017"));
        let n = 5000;
        let test = (0..n).filter(|i| split_of(&format!("s{i}")) == Split::Test).count();
        let train = (0..n).filter(|i| split_of(&format!("s{i}")) == Split::Train).count();
        assert!((400..600).contains(&test), "{test}");
        assert!((3800..4200).contains(&train), "{train}");
    }

    #[test]
    fn suffixes() {
        assert_eq!(mask_suffix(AblationMask::IDENTITY), "");
        assert_eq!(mask_suffix(AblationMask::drop_technique()), "_no_technique");
    }
}
