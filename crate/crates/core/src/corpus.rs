//! Study, report and candidate records; prompt parsing and rendering;
//! sentence segmentation; corpus ingestion.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{self, ArtifactMeta};
use crate::error::{Error, Result};

pub const INDICATION: &str = "INDICATION:";
pub const TECHNIQUE: &str = "TECHNIQUE:";
pub const COMPARISON: &str = "COMPARISON:";

/// Field markers in canonical order.
pub const MARKERS: [&str; 3] = [INDICATION, TECHNIQUE, COMPARISON];

/// Structured clinical context of one study.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalContext {
    pub study_id: String,
    /// Instruction text that precedes the first field marker.
    pub preamble: String,
    pub indication: String,
    pub technique: String,
    pub comparison: String,
}

impl ClinicalContext {
    pub fn with_study_id(mut self, study_id: impl Into<String>) -> Self {
        self.study_id = study_id.into();
        self
    }

    fn field(&self, i: usize) -> &str {
        match i {
            0 => &self.indication,
            1 => &self.technique,
            _ => &self.comparison,
        }
    }

    fn field_mut(&mut self, i: usize) -> &mut String {
        match i {
            0 => &mut self.indication,
            1 => &mut self.technique,
            _ => &mut self.comparison,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthReport {
    pub study_id: String,
    pub sentences: Vec<String>,
}

/// A study as stored in the `studies` file: context plus reference report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Study {
    pub context: ClinicalContext,
    pub ground_truth: GroundTruthReport,
}

impl Study {
    pub fn study_id(&self) -> &str {
        &self.context.study_id
    }
}

/// Generator statistics of one emitted token. Serialized as `[logit, prob, entropy]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct TokenStat {
    pub logit: f64,
    pub prob: f64,
    pub entropy: f64,
}

impl From<[f64; 3]> for TokenStat {
    fn from(v: [f64; 3]) -> Self {
        Self {
            logit: v[0],
            prob: v[1],
            entropy: v[2],
        }
    }
}

impl From<TokenStat> for [f64; 3] {
    fn from(t: TokenStat) -> Self {
        [t.logit, t.prob, t.entropy]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSentence {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_stats: Option<Vec<TokenStat>>,
}

impl GeneratedSentence {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            token_stats: None,
        }
    }

    /// Mean token entropy, when statistics are present.
    pub fn mean_entropy(&self) -> Option<f64> {
        let stats = self.token_stats.as_ref()?;
        if stats.is_empty() {
            return None;
        }
        Some(stats.iter().map(|t| t.entropy).sum::<f64>() / stats.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedReport {
    pub study_id: String,
    pub generator_id: String,
    pub sentences: Vec<GeneratedSentence>,
    /// Sum of generator token log-probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_prob: Option<f64>,
}

impl GeneratedReport {
    pub fn texts(&self) -> Vec<&str> {
        self.sentences.iter().map(|s| s.text.as_str()).collect()
    }

    pub fn full_text(&self) -> String {
        self.texts().join(" ")
    }
}

/// All candidate reports sampled for one study; position is the candidate index.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub study_id: String,
    pub candidates: Vec<GeneratedReport>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Which context fields to remove from the rendered prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationMask {
    pub drop_indication: bool,
    pub drop_technique: bool,
    pub drop_comparison: bool,
}

impl AblationMask {
    pub const IDENTITY: AblationMask = AblationMask {
        drop_indication: false,
        drop_technique: false,
        drop_comparison: false,
    };

    pub fn drop_indication() -> Self {
        Self {
            drop_indication: true,
            ..Self::IDENTITY
        }
    }

    pub fn drop_technique() -> Self {
        Self {
            drop_technique: true,
            ..Self::IDENTITY
        }
    }

    pub fn drop_comparison() -> Self {
        Self {
            drop_comparison: true,
            ..Self::IDENTITY
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    fn drops(&self, i: usize) -> bool {
        match i {
            0 => self.drop_indication,
            1 => self.drop_technique,
            _ => self.drop_comparison,
        }
    }

    /// The original prompt plus the three one-field ablations, in table order.
    pub fn table_variants() -> [(&'static str, AblationMask); 4] {
        [
            ("Original", Self::IDENTITY),
            ("Ablate INDICATION", Self::drop_indication()),
            ("Ablate TECHNIQUE", Self::drop_technique()),
            ("Ablate COMPARISON", Self::drop_comparison()),
        ]
    }
}

/// Splits a prompt into its preamble and the three context fields.
///
/// Each marker may occur at most once and markers must appear in canonical
/// order. The returned context has an empty `study_id`.
pub fn parse_prompt(text: &str) -> Result<ClinicalContext> {
    let mut found: Vec<(usize, usize)> = Vec::new(); // (marker index, byte offset)
    for (mi, marker) in MARKERS.iter().enumerate() {
        let hits: Vec<usize> = text.match_indices(marker).map(|(at, _)| at).collect();
        match hits.len() {
            0 => {}
            1 => found.push((mi, hits[0])),
            n => {
                return Err(Error::PromptParse {
                    marker,
                    reason: format!("occurs {n} times"),
                })
            }
        }
    }
    for pair in found.windows(2) {
        if pair[1].1 < pair[0].1 {
            return Err(Error::PromptParse {
                marker: MARKERS[pair[1].0],
                reason: format!("appears before {}", MARKERS[pair[0].0]),
            });
        }
    }

    let mut ctx = ClinicalContext::default();
    let first = found.first().map_or(text.len(), |&(_, at)| at);
    ctx.preamble = text[..first].trim().to_string();
    for (k, &(mi, at)) in found.iter().enumerate() {
        let start = at + MARKERS[mi].len();
        let end = found.get(k + 1).map_or(text.len(), |&(_, next)| next);
        *ctx.field_mut(mi) = text[start..end].trim().to_string();
    }
    Ok(ctx)
}

/// Renders the preamble followed by every kept, non-empty field, single-space separated.
pub fn render_prompt(ctx: &ClinicalContext, mask: AblationMask) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(4);
    if !ctx.preamble.is_empty() {
        parts.push(ctx.preamble.clone());
    }
    for (i, marker) in MARKERS.iter().enumerate() {
        let value = ctx.field(i);
        if mask.drops(i) || value.is_empty() {
            continue;
        }
        parts.push(format!("{marker} {value}"));
    }
    parts.join(" ")
}

/// Abbreviations that never end a sentence (compared lowercased).
pub const ABBREVIATIONS: [&str; 6] = ["a.p.", "p.a.", "e.g.", "i.e.", "dr.", "no."];

/// Collapses whitespace runs to single spaces and trims.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Rule-based sentence splitter.
///
/// Splits after `.`, `!` or `?` when followed by whitespace and an uppercase
/// letter (or by the end of the text), unless the word ending at the
/// punctuation is a listed abbreviation. Joining the output with single
/// spaces gives back the whitespace-normalized input.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let norm = normalize_whitespace(text);
    let chars: Vec<char> = norm.chars().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?')
            && i + 2 < chars.len()
            && chars[i + 1] == ' '
            && chars[i + 2].is_uppercase()
            && !ends_with_abbreviation(&chars[start..=i])
        {
            out.push(chars[start..=i].iter().collect::<String>());
            start = i + 2;
            i += 2;
            continue;
        }
        i += 1;
    }
    if start < chars.len() {
        out.push(chars[start..].iter().collect::<String>());
    }
    out.retain(|s| !s.trim().is_empty());
    out
}

fn ends_with_abbreviation(sentence: &[char]) -> bool {
    let word_start = sentence
        .iter()
        .rposition(|c| c.is_whitespace())
        .map_or(0, |p| p + 1);
    let word: String = sentence[word_start..]
        .iter()
        .skip_while(|c| !c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

// ---------------------------------------------------------------------------
// Record files

#[derive(Debug, Serialize, Deserialize)]
struct StudyRecord {
    study_id: String,
    prompt: String,
    ground_truth: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CandidateRecord {
    #[serde(flatten)]
    report: GeneratedReport,
    candidate_index: usize,
}

/// Which record schema a file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordSchema {
    Studies,
    Generated,
    Candidates,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Collection {
    Studies(Vec<Study>),
    Generated(Vec<GeneratedReport>),
    Candidates(Vec<CandidateSet>),
}

impl Collection {
    pub fn len(&self) -> usize {
        match self {
            Collection::Studies(v) => v.len(),
            Collection::Generated(v) => v.len(),
            Collection::Candidates(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn ingest_corpus(path: &Path, schema: RecordSchema) -> Result<Collection> {
    Ok(match schema {
        RecordSchema::Studies => Collection::Studies(read_studies(path)?),
        RecordSchema::Generated => Collection::Generated(read_generated(path)?),
        RecordSchema::Candidates => Collection::Candidates(read_candidates(path)?),
    })
}

fn schema(line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        message: message.into(),
    }
}

pub fn parse_studies<R: BufRead>(reader: R) -> Result<Vec<Study>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, rec) in artifact::parse_jsonl::<StudyRecord, _>(reader)? {
        if rec.study_id.is_empty() {
            return Err(schema(line, "empty study_id"));
        }
        if !seen.insert(rec.study_id.clone()) {
            return Err(Error::DuplicateStudy(rec.study_id));
        }
        if rec.ground_truth.is_empty() {
            return Err(schema(line, "ground_truth has no sentences"));
        }
        if rec
            .ground_truth
            .iter()
            .any(|s| s.trim().is_empty() || s.contains('\n'))
        {
            return Err(schema(line, "ground-truth sentences must be non-empty and single-line"));
        }
        let context = parse_prompt(&rec.prompt)
            .map_err(|e| schema(line, e.to_string()))?
            .with_study_id(rec.study_id.clone());
        out.push(Study {
            context,
            ground_truth: GroundTruthReport {
                study_id: rec.study_id,
                sentences: rec.ground_truth,
            },
        });
    }
    Ok(out)
}

pub fn validate_report(report: &GeneratedReport, line: usize) -> Result<()> {
    if report.study_id.is_empty() {
        return Err(schema(line, "empty study_id"));
    }
    if report.sentences.is_empty() {
        return Err(schema(line, "report has no sentences"));
    }
    if let Some(lp) = report.log_prob {
        if !(lp <= 0.0) {
            return Err(schema(line, format!("log_prob {lp} must be <= 0")));
        }
    }
    for (i, s) in report.sentences.iter().enumerate() {
        if s.text.trim().is_empty() {
            return Err(schema(line, format!("sentence {i} is empty")));
        }
        if let Some(stats) = &s.token_stats {
            if stats.is_empty() {
                return Err(schema(line, format!("sentence {i} has empty token_stats")));
            }
            for t in stats {
                if !(0.0..=1.0).contains(&t.prob) {
                    return Err(schema(
                        line,
                        format!("sentence {i}: probability {} outside [0, 1]", t.prob),
                    ));
                }
                if !(t.entropy >= 0.0) {
                    return Err(schema(
                        line,
                        format!("sentence {i}: entropy {} is negative", t.entropy),
                    ));
                }
                if !t.logit.is_finite() {
                    return Err(schema(line, format!("sentence {i}: non-finite logit")));
                }
            }
        }
    }
    Ok(())
}

pub fn parse_generated<R: BufRead>(reader: R) -> Result<Vec<GeneratedReport>> {
    let mut out = Vec::new();
    for (line, rec) in artifact::parse_jsonl::<GeneratedReport, _>(reader)? {
        validate_report(&rec, line)?;
        out.push(rec);
    }
    Ok(out)
}

/// Groups candidate lines by study (first-appearance order) and checks that
/// each study's indices form exactly `0..N`.
pub fn parse_candidates<R: BufRead>(reader: R) -> Result<Vec<CandidateSet>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<(usize, usize, GeneratedReport)>> = BTreeMap::new();
    for (line, rec) in artifact::parse_jsonl::<CandidateRecord, _>(reader)? {
        validate_report(&rec.report, line)?;
        let id = rec.report.study_id.clone();
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups
            .entry(id)
            .or_default()
            .push((rec.candidate_index, line, rec.report));
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut members = groups.remove(&id).expect("group exists");
        members.sort_by_key(|m| m.0);
        for (expected, m) in members.iter().enumerate() {
            if m.0 != expected {
                return Err(schema(
                    m.1,
                    format!("study `{id}`: candidate_index {} breaks the 0..N sequence", m.0),
                ));
            }
        }
        out.push(CandidateSet {
            study_id: id,
            candidates: members.into_iter().map(|m| m.2).collect(),
        });
    }
    Ok(out)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufReader::new(f))
}

pub fn read_studies(path: &Path) -> Result<Vec<Study>> {
    parse_studies(open(path)?)
}

pub fn read_generated(path: &Path) -> Result<Vec<GeneratedReport>> {
    parse_generated(open(path)?)
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateSet>> {
    parse_candidates(open(path)?)
}

pub fn studies_bytes(meta: Option<&ArtifactMeta>, studies: &[Study]) -> Vec<u8> {
    let recs: Vec<StudyRecord> = studies
        .iter()
        .map(|s| StudyRecord {
            study_id: s.context.study_id.clone(),
            prompt: render_prompt(&s.context, AblationMask::IDENTITY),
            ground_truth: s.ground_truth.sentences.clone(),
        })
        .collect();
    artifact::jsonl_bytes(meta, &recs)
}

pub fn generated_bytes(meta: Option<&ArtifactMeta>, reports: &[GeneratedReport]) -> Vec<u8> {
    artifact::jsonl_bytes(meta, reports)
}

pub fn candidates_bytes(meta: Option<&ArtifactMeta>, sets: &[CandidateSet]) -> Vec<u8> {
    let recs: Vec<CandidateRecord> = sets
        .iter()
        .flat_map(|set| {
            set.candidates
                .iter()
                .enumerate()
                .map(|(i, r)| CandidateRecord {
                    report: r.clone(),
                    candidate_index: i,
                })
        })
        .collect();
    artifact::jsonl_bytes(meta, &recs)
}

pub fn write_studies(path: &Path, meta: &ArtifactMeta, studies: &[Study]) -> Result<()> {
    artifact::write_atomic(path, &studies_bytes(Some(meta), studies))
}

pub fn write_generated(path: &Path, meta: &ArtifactMeta, reports: &[GeneratedReport]) -> Result<()> {
    artifact::write_atomic(path, &generated_bytes(Some(meta), reports))
}

pub fn write_candidates(path: &Path, meta: &ArtifactMeta, sets: &[CandidateSet]) -> Result<()> {
    artifact::write_atomic(path, &candidates_bytes(Some(meta), sets))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIG_PROMPT: &str = "Provide a description of the findings in the radiology study in comparison to the prior frontal image. INDICATION: Middle-aged man with possible pneumonia. TECHNIQUE: Anteroposterior (AP) and lateral chest radiographs. COMPARISON: Not applicable.";

    #[test]
    fn parses_figure_prompt() {
        let ctx = parse_prompt(FIG_PROMPT).unwrap();
        assert_eq!(
            ctx.preamble,
            "Provide a description of the findings in the radiology study in comparison to the prior frontal image."
        );
        assert_eq!(ctx.indication, "Middle-aged man with possible pneumonia.");
        assert_eq!(ctx.technique, "Anteroposterior (AP) and lateral chest radiographs.");
        assert_eq!(ctx.comparison, "Not applicable.");
        assert_eq!(render_prompt(&ctx, AblationMask::IDENTITY), FIG_PROMPT);
    }

    #[test]
    fn empty_prompt_gives_empty_fields() {
        assert_eq!(parse_prompt("").unwrap(), ClinicalContext::default());
    }

    #[test]
    fn missing_marker_leaves_field_empty() {
        let ctx = parse_prompt("X INDICATION: a TECHNIQUE: b").unwrap();
        assert_eq!(ctx.preamble, "X");
        assert_eq!(ctx.indication, "a");
        assert_eq!(ctx.technique, "b");
        assert_eq!(ctx.comparison, "");
    }

    #[test]
    fn out_of_order_and_duplicate_markers_are_rejected() {
        match parse_prompt("TECHNIQUE: b INDICATION: a") {
            Err(Error::PromptParse { marker, .. }) => assert_eq!(marker, TECHNIQUE),
            other => panic!("unexpected {other:?}"),
        }
        match parse_prompt("INDICATION: a COMPARISON: c COMPARISON: d") {
            Err(Error::PromptParse { marker, .. }) => assert_eq!(marker, COMPARISON),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn render_drops_fields() {
        let ctx = ClinicalContext {
            preamble: "P".into(),
            indication: "a".into(),
            technique: "b".into(),
            comparison: "c".into(),
            ..Default::default()
        };
        assert_eq!(
            render_prompt(&ctx, AblationMask::drop_technique()),
            "P INDICATION: a COMPARISON: c"
        );
        let all = AblationMask {
            drop_indication: true,
            drop_technique: true,
            drop_comparison: true,
        };
        assert_eq!(render_prompt(&ctx, all), "P");
    }

    #[test]
    fn segmentation_cases() {
        assert_eq!(segment_sentences("No pleural effusion."), vec!["No pleural effusion."]);
        assert_eq!(
            segment_sentences("The lungs are clear. No focal consolidation."),
            vec!["The lungs are clear.", "No focal consolidation."]
        );
        assert_eq!(
            segment_sentences("Compared to the a.p. view, stable."),
            vec!["Compared to the a.p. view, stable."]
        );
        assert!(segment_sentences("   ").is_empty());
        // abbreviation guard applies even before an uppercase word
        assert_eq!(
            segment_sentences("Seen on the P.A. View today."),
            vec!["Seen on the P.A. View today."]
        );
        assert_eq!(
            segment_sentences("Is it stable?  Yes!\nNo change."),
            vec!["Is it stable?", "Yes!", "No change."]
        );
    }

    #[test]
    fn ingest_rejects_bad_probability_with_line() {
        let data = concat!(
            r#"{"study_id":"s1","generator_id":"g","sentences":[{"text":"A.","token_stats":[[0.1,0.5,0.2]]}]}"#,
            "\n",
            r#"{"study_id":"s2","generator_id":"g","sentences":[{"text":"B.","token_stats":[[0.1,1.5,0.2]]}]}"#,
            "\n"
        );
        match parse_generated(data.as_bytes()) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_studies_and_duplicates() {
        let mut data = String::new();
        for id in ["a", "b", "c"] {
            data.push_str(&format!(
                "{{\"study_id\":\"{id}\",\"prompt\":\"INDICATION: x\",\"ground_truth\":[\"No effusion.\"]}}\n"
            ));
        }
        let studies = parse_studies(data.as_bytes()).unwrap();
        assert_eq!(studies.len(), 3);
        assert_eq!(studies[1].context.study_id, "b");
        assert_eq!(studies[1].context.indication, "x");
        data.push_str("{\"study_id\":\"a\",\"prompt\":\"\",\"ground_truth\":[\"X.\"]}\n");
        assert!(matches!(parse_studies(data.as_bytes()), Err(Error::DuplicateStudy(id)) if id == "a"));
    }

    #[test]
    fn missing_field_is_schema_error() {
        let data = "{\"study_id\":\"a\",\"prompt\":\"\"}\n";
        assert!(matches!(parse_studies(data.as_bytes()), Err(Error::Schema { line: 1, .. })));
    }

    #[test]
    fn candidates_group_into_sets() {
        let sets = vec![CandidateSet {
            study_id: "s".into(),
            candidates: (0..128)
                .map(|i| GeneratedReport {
                    study_id: "s".into(),
                    generator_id: "g".into(),
                    sentences: vec![GeneratedSentence::new(format!("Sentence {i}."))],
                    log_prob: Some(-1.0),
                })
                .collect(),
        }];
        let bytes = candidates_bytes(Some(&ArtifactMeta::detached()), &sets);
        let back = parse_candidates(&bytes[..]).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].len(), 128);
        assert_eq!(back, sets);
    }

    #[test]
    fn candidate_gap_is_schema_error() {
        let line = |i: usize| {
            format!(
                "{{\"study_id\":\"s\",\"generator_id\":\"g\",\"sentences\":[{{\"text\":\"A.\"}}],\"candidate_index\":{i}}}\n"
            )
        };
        let data = format!("{}{}", line(0), line(2));
        assert!(matches!(parse_candidates(data.as_bytes()), Err(Error::Schema { .. })));
    }
}
