//! End-to-end orchestration: run configuration, staged pipeline with
//! JSONL checkpoints, resume, and report rendering.
//!
//! Stage outputs are append-only files named
//! `{run_id}/{stage}.{mode}.{persona}.jsonl`; resume keys on sample_id
//! presence, so an interrupted run picks up exactly where it stopped.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affect::{self, MarkerLexicon};
use crate::backends::{Backend, GenerationConfig, ModelResponse, Registry, RunLog};
use crate::corpus::{self, BenchSample, RiskCategory};
use crate::error::{Error, Result};
use crate::judge::{judge_response, JudgeTemplates, Judgment};
use crate::metrics::{
    render_per_category, render_summary, summarize, JudgmentSet, MetricsSummary,
    ReportFormat, VariantKey,
};
use crate::transform::{
    direct_induce, emo_transfer, rational_preempt, Mode, Persona, PreambleSet,
    PromptVariant, Thresholds,
};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
pub struct BackendsRef {
    pub registry: PathBuf,
    pub target: String,
    pub transfer: String,
    pub judge: String,
    #[serde(default)]
    pub embed: Option<String>,
    #[serde(default)]
    pub vision: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PersonaRef {
    pub path: PathBuf,
    pub lambda_target: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    pub dataset: PathBuf,
    /// Accepts long or short mode tags (di / rp / emo).
    pub modes: Vec<String>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sample_limit: Option<usize>,
    #[serde(default)]
    pub with_harmfulness: bool,
    pub backends: BackendsRef,
    #[serde(default, rename = "persona")]
    pub personas: Vec<PersonaRef>,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default)]
    pub preambles_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parse a config file; relative paths are resolved against the file's
    /// directory. Returns the config and the sha256 digest of the raw bytes.
    pub fn load(path: &Path) -> Result<(RunConfig, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.dataset = base.join(&config.dataset);
        config.output_dir = base.join(&config.output_dir);
        config.backends.registry = base.join(&config.backends.registry);
        for p in &mut config.personas {
            p.path = base.join(&p.path);
        }
        if let Some(d) = &config.templates_dir {
            config.templates_dir = Some(base.join(d));
        }
        if let Some(d) = &config.preambles_dir {
            config.preambles_dir = Some(base.join(d));
        }
        config.validate()?;
        let digest = format!("{:x}", Sha256::digest(text.as_bytes()));
        Ok((config, digest))
    }

    pub fn parsed_modes(&self) -> Result<Vec<Mode>> {
        let mut modes = Vec::new();
        for m in &self.modes {
            let mode = Mode::parse(m)?;
            if !modes.contains(&mode) {
                modes.push(mode);
            }
        }
        Ok(modes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(Error::Config(format!(
                "run_id '{}' must be a non-empty plain name",
                self.run_id
            )));
        }
        let modes = self.parsed_modes()?;
        if modes.is_empty() {
            return Err(Error::Config("modes must be non-empty".into()));
        }
        if modes.contains(&Mode::Emo) && self.personas.is_empty() {
            return Err(Error::Config(
                "mode 'emo' requires at least one persona".into(),
            ));
        }
        for p in &self.personas {
            if !(p.lambda_target > 0.0 && p.lambda_target <= 1.0) {
                return Err(Error::Config(format!(
                    "persona '{}': lambda_target {} outside (0, 1]",
                    p.path.display(),
                    p.lambda_target
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageCheckpoints {
    pub variants: bool,
    pub responses: bool,
    pub judgments: bool,
    pub report: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub stages: StageCheckpoints,
    pub counts: BTreeMap<String, u64>,
    pub created_ts: u128,
    pub updated_ts: u128,
}

impl RunManifest {
    fn new(run_id: &str, digest: &str, seed: u64) -> RunManifest {
        let ts = now_ms();
        RunManifest {
            run_id: run_id.into(),
            config_digest: digest.into(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            stages: StageCheckpoints::default(),
            counts: BTreeMap::new(),
            created_ts: ts,
            updated_ts: ts,
        }
    }

    fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn save(&mut self, path: &Path) -> Result<()> {
        self.updated_ts = now_ms();
        // Checkpoints must stay monotone: a later stage implies the earlier.
        debug_assert!(!self.stages.report || self.stages.judgments);
        debug_assert!(!self.stages.judgments || self.stages.responses);
        debug_assert!(!self.stages.responses || self.stages.variants);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_millis()
}

// ---------------------------------------------------------------------------
// Stage records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub sample_id: String,
    pub mode: Mode,
    pub persona: Option<String>,
    pub reasoning_trace: Option<String>,
    pub final_answer: String,
    pub answer_length: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureRecord {
    pub stage: String,
    pub mode: Mode,
    pub persona: Option<String>,
    pub sample_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StopAfter {
    Variants,
    Responses,
    Judgments,
    Report,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

fn existing_ids(path: &Path) -> Result<BTreeSet<String>> {
    let values: Vec<serde_json::Value> = read_jsonl(path)?;
    Ok(values
        .iter()
        .filter_map(|v| v.get("sample_id").and_then(|s| s.as_str()))
        .map(str::to_string)
        .collect())
}

fn append_record<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let line = serde_json::to_string(record).expect("record serializes");
    writeln!(file, "{line}").map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

pub struct Runner {
    pub config: RunConfig,
    pub config_digest: String,
    dir: PathBuf,
    modes: Vec<Mode>,
    registry: Registry,
    lexicon: MarkerLexicon,
    personas: Vec<(Persona, f64)>,
    templates: JudgeTemplates,
    preambles: PreambleSet,
}

impl Runner {
    pub fn from_config_file(path: &Path) -> Result<Runner> {
        let (config, digest) = RunConfig::load(path)?;
        Runner::new(config, digest)
    }

    pub fn new(config: RunConfig, config_digest: String) -> Result<Runner> {
        config.validate()?;
        let modes = config.parsed_modes()?;
        let registry = Registry::load(&config.backends.registry)?;
        // Fail fast on dangling backend names.
        registry.get(&config.backends.target)?;
        registry.get(&config.backends.transfer)?;
        registry.get(&config.backends.judge)?;
        if let Some(e) = &config.backends.embed {
            registry.get(e)?;
        }
        if let Some(v) = &config.backends.vision {
            registry.get(v)?;
        }
        let lexicon = MarkerLexicon::default_lexicon();
        let mut personas = Vec::new();
        for p in &config.personas {
            let persona = Persona::load(&p.path)?;
            persona.validate(&lexicon)?;
            personas.push((persona, p.lambda_target));
        }
        let templates = match &config.templates_dir {
            Some(d) => JudgeTemplates::load_dir(d)?,
            None => JudgeTemplates::builtin(),
        };
        let preambles = match &config.preambles_dir {
            Some(d) => PreambleSet::load_dir(d)?,
            None => PreambleSet::builtin(),
        };
        let dir = config.output_dir.join(&config.run_id);
        Ok(Runner {
            config,
            config_digest,
            dir,
            modes,
            registry,
            lexicon,
            personas,
            templates,
            preambles,
        })
    }

    pub fn run_dir(&self) -> &Path {
        &self.dir
    }

    /// Prompt-type columns in canonical order: DI, RP, then one emo column
    /// per persona in config order.
    pub fn columns(&self) -> Vec<VariantKey> {
        let mut cols = Vec::new();
        if self.modes.contains(&Mode::DirectInduce) {
            cols.push(VariantKey::di());
        }
        if self.modes.contains(&Mode::RationalPreempt) {
            cols.push(VariantKey::new(Mode::RationalPreempt, None));
        }
        if self.modes.contains(&Mode::Emo) {
            for (p, _) in &self.personas {
                cols.push(VariantKey::new(Mode::Emo, Some(&p.name)));
            }
        }
        cols
    }

    fn stage_path(&self, stage: &str, key: &VariantKey) -> PathBuf {
        let persona = key.persona.as_deref().unwrap_or("-");
        self.dir
            .join(format!("{stage}.{}.{persona}.jsonl", key.mode))
    }

    fn manifest_path(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    fn record_failure(&self, stage: &str, key: &VariantKey, sample_id: &str, err: &Error) {
        let record = FailureRecord {
            stage: stage.into(),
            mode: key.mode,
            persona: key.persona.clone(),
            sample_id: sample_id.into(),
            error: err.to_string(),
        };
        let _ = append_record(&self.dir.join("failures.jsonl"), &record);
    }

    /// Deterministic dataset snapshot: load once, optionally subsample with
    /// the run seed, persist as samples.jsonl, and reuse on resume.
    fn load_samples(&self) -> Result<Vec<BenchSample>> {
        let snapshot = self.dir.join("samples.jsonl");
        if snapshot.exists() {
            let text = std::fs::read_to_string(&snapshot)
                .map_err(|e| Error::io(snapshot.display().to_string(), e))?;
            return Ok(corpus::parse_dataset(&text, "samples.jsonl")?.samples);
        }
        let loaded = corpus::load_dataset(&self.config.dataset, "jsonl-v1")?;
        for d in &loaded.diagnostics {
            eprintln!("warning: dataset: {d}");
        }
        let mut samples = loaded.samples;
        if let Some(limit) = self.config.sample_limit {
            if limit < samples.len() {
                samples = subsample(samples, limit, self.config.seed);
            }
        }
        std::fs::write(&snapshot, corpus::serialize_dataset(&samples))
            .map_err(|e| Error::io(snapshot.display().to_string(), e))?;
        Ok(samples)
    }

    fn category_for(
        &self,
        sample: &BenchSample,
        log: &RunLog,
    ) -> Result<RiskCategory> {
        if let Some(cat) = sample.category {
            return Ok(cat);
        }
        let vision = self.config.backends.vision.as_deref().ok_or_else(|| {
            Error::Config(format!(
                "sample '{}' has no risk category and no vision backend is \
                 configured for classification",
                sample.sample_id
            ))
        })?;
        corpus::classify_risk(sample, self.registry.get(vision)?, log)
    }

    /// RationalPreempt variant for a sample, computed at most once per run
    /// (the emo operator composes on top of it).
    fn rp_variant(
        &self,
        sample: &BenchSample,
        cache: &mut BTreeMap<String, PromptVariant>,
        embed: Option<&Backend>,
        log: &RunLog,
    ) -> Result<PromptVariant> {
        if let Some(v) = cache.get(&sample.sample_id) {
            return Ok(v.clone());
        }
        let category = self.category_for(sample, log)?;
        let variant = rational_preempt(
            sample,
            category,
            self.registry.get(&self.config.backends.transfer)?,
            &self.preambles,
            &self.config.thresholds,
            &self.lexicon,
            embed,
            log,
        )?;
        cache.insert(sample.sample_id.clone(), variant.clone());
        Ok(variant)
    }

    fn stage_variants(&self, samples: &[BenchSample], log: &RunLog) -> Result<u64> {
        let embed = match &self.config.backends.embed {
            Some(name) => Some(self.registry.get(name)?),
            None => None,
        };
        let mut rp_cache: BTreeMap<String, PromptVariant> = BTreeMap::new();
        // Prefill the RP cache from an already-complete RP column so resume
        // never re-runs the transfer backend for persisted variants.
        let rp_key = VariantKey::new(Mode::RationalPreempt, None);
        for v in read_jsonl::<PromptVariant>(&self.stage_path("variants", &rp_key))? {
            rp_cache.insert(v.sample_id.clone(), v);
        }

        let mut total = 0u64;
        for key in self.columns() {
            let path = self.stage_path("variants", &key);
            let present = existing_ids(&path)?;
            total += present.len() as u64;
            for sample in samples {
                if present.contains(&sample.sample_id) {
                    continue;
                }
                let produced: Result<PromptVariant> = match key.mode {
                    Mode::DirectInduce => Ok(direct_induce(sample, &self.lexicon)),
                    Mode::RationalPreempt => {
                        self.rp_variant(sample, &mut rp_cache, embed, log)
                    }
                    Mode::Emo => {
                        let persona_name =
                            key.persona.as_deref().expect("emo column has persona");
                        let (persona, target) = self
                            .personas
                            .iter()
                            .find(|(p, _)| p.name == persona_name)
                            .expect("column persona is loaded");
                        self.rp_variant(sample, &mut rp_cache, embed, log)
                            .and_then(|rp| {
                                emo_transfer(
                                    &rp,
                                    persona,
                                    *target,
                                    self.registry.get(&self.config.backends.transfer)?,
                                    &self.config.thresholds,
                                    &self.lexicon,
                                    embed,
                                    log,
                                )
                            })
                    }
                };
                match produced {
                    Ok(variant) => {
                        append_record(&path, &variant)?;
                        total += 1;
                    }
                    Err(e) => self.record_failure("variants", &key, &sample.sample_id, &e),
                }
            }
        }
        if total == 0 {
            return Err(Error::StageEmpty("variants".into()));
        }
        Ok(total)
    }

    fn stage_responses(&self, samples: &[BenchSample], log: &RunLog) -> Result<u64> {
        let target = self.registry.get(&self.config.backends.target)?;
        let by_id: BTreeMap<&str, &BenchSample> =
            samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
        let mut total = 0u64;
        for key in self.columns() {
            let variants: Vec<PromptVariant> =
                read_jsonl(&self.stage_path("variants", &key))?;
            let path = self.stage_path("responses", &key);
            let present = existing_ids(&path)?;
            total += present.len() as u64;
            for variant in &variants {
                if present.contains(&variant.sample_id) {
                    continue;
                }
                let image = by_id
                    .get(variant.sample_id.as_str())
                    .and_then(|s| s.image_ref.as_deref());
                match target.generate(&variant.text, image, &self.config.generation, log) {
                    Ok(resp) => {
                        let record = ResponseRecord {
                            sample_id: variant.sample_id.clone(),
                            mode: key.mode,
                            persona: key.persona.clone(),
                            reasoning_trace: resp.reasoning_trace,
                            final_answer: resp.final_answer,
                            answer_length: resp.answer_length,
                        };
                        append_record(&path, &record)?;
                        total += 1;
                    }
                    Err(e) => {
                        self.record_failure("responses", &key, &variant.sample_id, &e)
                    }
                }
            }
        }
        if total == 0 {
            return Err(Error::StageEmpty("responses".into()));
        }
        Ok(total)
    }

    fn stage_judgments(&self, samples: &[BenchSample], log: &RunLog) -> Result<u64> {
        let judge = self.registry.get(&self.config.backends.judge)?;
        let by_id: BTreeMap<&str, &BenchSample> =
            samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
        let mut total = 0u64;
        for key in self.columns() {
            let responses: Vec<ResponseRecord> =
                read_jsonl(&self.stage_path("responses", &key))?;
            let path = self.stage_path("judgments", &key);
            let present = existing_ids(&path)?;
            total += present.len() as u64;
            for record in &responses {
                if present.contains(&record.sample_id) {
                    continue;
                }
                let Some(sample) = by_id.get(record.sample_id.as_str()) else {
                    self.record_failure(
                        "judgments",
                        &key,
                        &record.sample_id,
                        &Error::Dataset(format!(
                            "response for unknown sample '{}'",
                            record.sample_id
                        )),
                    );
                    continue;
                };
                let response = ModelResponse {
                    reasoning_trace: record.reasoning_trace.clone(),
                    final_answer: record.final_answer.clone(),
                    answer_length: record.answer_length,
                    raw: record.final_answer.clone(),
                    latency_ms: 0,
                };
                match judge_response(
                    &response,
                    sample,
                    key.mode,
                    key.persona.as_deref(),
                    &self.templates,
                    judge,
                    self.config.with_harmfulness,
                    log,
                ) {
                    Ok(judgment) => {
                        append_record(&path, &judgment)?;
                        total += 1;
                    }
                    Err(e) => {
                        self.record_failure("judgments", &key, &record.sample_id, &e)
                    }
                }
            }
        }
        if total == 0 {
            return Err(Error::StageEmpty("judgments".into()));
        }
        Ok(total)
    }

    fn load_judgments(&self) -> Result<(JudgmentSet, BTreeMap<(String, VariantKey), u64>)> {
        let mut set = JudgmentSet::new();
        let mut lengths = BTreeMap::new();
        for key in self.columns() {
            for j in read_jsonl::<Judgment>(&self.stage_path("judgments", &key))? {
                set.insert(j)?;
            }
            for r in read_jsonl::<ResponseRecord>(&self.stage_path("responses", &key))? {
                lengths.insert((r.sample_id.clone(), key.clone()), r.answer_length);
            }
        }
        Ok((set, lengths))
    }

    fn summaries(&self) -> Result<Vec<MetricsSummary>> {
        let (set, lengths) = self.load_judgments()?;
        if set.mixed_template_versions() {
            eprintln!(
                "warning: judgments mix template versions; metrics span both"
            );
        }
        let mut out = Vec::new();
        for key in self.columns() {
            if set.judged(&key).next().is_none() && set.unjudged_count(&key) == 0 {
                continue;
            }
            out.push(summarize(&set, &key, Some(&lengths))?);
        }
        if out.is_empty() {
            return Err(Error::MetricUndefined(
                "no judged entries in any column".into(),
            ));
        }
        Ok(out)
    }

    /// Render the metric grid (judgments stage must be complete).
    pub fn render_report(&self, format: ReportFormat, per_category: bool) -> Result<String> {
        let manifest = RunManifest::load(&self.manifest_path())?;
        if !manifest.stages.judgments {
            return Err(Error::Precondition(format!(
                "run '{}': judgments stage is not complete",
                self.config.run_id
            )));
        }
        let summaries = self.summaries()?;
        let mut out = render_summary(&summaries, format);
        if per_category {
            let samples = self.load_samples()?;
            let cats: BTreeMap<String, RiskCategory> = samples
                .iter()
                .filter_map(|s| s.category.map(|c| (s.sample_id.clone(), c)))
                .collect();
            let (set, _) = self.load_judgments()?;
            for key in self.columns() {
                if set.judged(&key).next().is_none() {
                    continue;
                }
                let per_cat = crate::metrics::per_category_asr(&set, &key, &cats)?;
                out.push('\n');
                out.push_str(&format!("Per-category ASR — {}\n", key.label()));
                out.push_str(&render_per_category(&per_cat, format));
            }
        }
        Ok(out)
    }

    /// Execute (or continue) the pipeline through `stop`. Safe to call on a
    /// finished run: completed stages are skipped without backend calls.
    pub fn run(&self, stop: StopAfter) -> Result<RunManifest> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| Error::io(self.dir.display().to_string(), e))?;
        let manifest_path = self.manifest_path();
        let mut manifest = if manifest_path.exists() {
            let m = RunManifest::load(&manifest_path)?;
            if m.config_digest != self.config_digest {
                return Err(Error::DigestMismatch {
                    manifest: m.config_digest,
                    current: self.config_digest.clone(),
                });
            }
            m
        } else {
            RunManifest::new(&self.config.run_id, &self.config_digest, self.config.seed)
        };

        let log = RunLog::open(&self.dir.join("run.log.jsonl"))?;
        let samples = self.load_samples()?;

        if !manifest.stages.variants {
            let n = self.stage_variants(&samples, &log)?;
            manifest.stages.variants = true;
            manifest.counts.insert("variants".into(), n);
            manifest.save(&manifest_path)?;
        }
        if stop == StopAfter::Variants {
            manifest.save(&manifest_path)?;
            return Ok(manifest);
        }
        if !manifest.stages.responses {
            let n = self.stage_responses(&samples, &log)?;
            manifest.stages.responses = true;
            manifest.counts.insert("responses".into(), n);
            manifest.save(&manifest_path)?;
        }
        if stop == StopAfter::Responses {
            return Ok(manifest);
        }
        if !manifest.stages.judgments {
            let n = self.stage_judgments(&samples, &log)?;
            manifest.stages.judgments = true;
            manifest.counts.insert("judgments".into(), n);
            manifest.save(&manifest_path)?;
        }
        if stop == StopAfter::Judgments {
            return Ok(manifest);
        }
        if !manifest.stages.report {
            let report = self.render_report(ReportFormat::Text, false)?;
            let path = self.dir.join("report.txt");
            std::fs::write(&path, report)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            manifest.stages.report = true;
            manifest.save(&manifest_path)?;
        }
        Ok(manifest)
    }

    /// Continue an interrupted run; the manifest must already exist.
    pub fn resume(&self) -> Result<RunManifest> {
        if !self.manifest_path().exists() {
            return Err(Error::Config(format!(
                "run '{}' has no manifest at {}; nothing to resume",
                self.config.run_id,
                self.manifest_path().display()
            )));
        }
        self.run(StopAfter::Report)
    }

    /// Transform-only pass: produce variants against the transfer mocks and
    /// return λ statistics without touching the target backend.
    pub fn dry_run(&self) -> Result<String> {
        self.run(StopAfter::Variants)?;
        let mut out = String::new();
        for key in self.columns() {
            let variants: Vec<PromptVariant> =
                read_jsonl(&self.stage_path("variants", &key))?;
            if variants.is_empty() {
                continue;
            }
            let mean: f64 = variants
                .iter()
                .map(|v| v.lambda_measured.as_f64())
                .sum::<f64>()
                / variants.len() as f64;
            let bands: BTreeMap<String, usize> = variants.iter().fold(
                BTreeMap::new(),
                |mut acc, v| {
                    let band = affect::band_of(v.lambda_measured.as_ratio())
                        .map(|b| b.to_string())
                        .unwrap_or_else(|_| "?".into());
                    *acc.entry(band).or_default() += 1;
                    acc
                },
            );
            out.push_str(&format!(
                "{}: n={} mean_lambda={:.4} bands={:?}\n",
                key.label(),
                variants.len(),
                mean,
                bands
            ));
        }
        Ok(out)
    }

    /// Re-judge persisted responses with a different template set. Output
    /// goes to `judgments-{version}.{mode}.{persona}.jsonl` so the original
    /// judgments stay immutable.
    pub fn rejudge(&self, templates_dir: &Path) -> Result<u64> {
        let templates = JudgeTemplates::load_dir(templates_dir)?;
        let judge = self.registry.get(&self.config.backends.judge)?;
        let log = RunLog::open(&self.dir.join("run.log.jsonl"))?;
        let samples = self.load_samples()?;
        let by_id: BTreeMap<&str, &BenchSample> =
            samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
        let stage = format!("judgments-{}", templates.answer.version);
        let mut total = 0u64;
        for key in self.columns() {
            let responses: Vec<ResponseRecord> =
                read_jsonl(&self.stage_path("responses", &key))?;
            let path = self.stage_path(&stage, &key);
            let present = existing_ids(&path)?;
            total += present.len() as u64;
            for record in &responses {
                if present.contains(&record.sample_id) {
                    continue;
                }
                let Some(sample) = by_id.get(record.sample_id.as_str()) else {
                    continue;
                };
                let response = ModelResponse {
                    reasoning_trace: record.reasoning_trace.clone(),
                    final_answer: record.final_answer.clone(),
                    answer_length: record.answer_length,
                    raw: record.final_answer.clone(),
                    latency_ms: 0,
                };
                match judge_response(
                    &response,
                    sample,
                    key.mode,
                    key.persona.as_deref(),
                    &templates,
                    judge,
                    self.config.with_harmfulness,
                    &log,
                ) {
                    Ok(judgment) => {
                        append_record(&path, &judgment)?;
                        total += 1;
                    }
                    Err(e) => self.record_failure(&stage, &key, &record.sample_id, &e),
                }
            }
        }
        Ok(total)
    }
}

/// Seeded deterministic subsample: permute with an xorshift generator and
/// keep the first `limit`, preserving original relative order.
fn subsample(samples: Vec<BenchSample>, limit: usize, seed: u64) -> Vec<BenchSample> {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut indices: Vec<usize> = (0..samples.len()).collect();
    for i in (1..indices.len()).rev() {
        let j = (next() % (i as u64 + 1)) as usize;
        indices.swap(i, j);
    }
    let mut keep: Vec<usize> = indices.into_iter().take(limit).collect();
    keep.sort_unstable();
    let keep_set: BTreeSet<usize> = keep.into_iter().collect();
    samples
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep_set.contains(i))
        .map(|(_, s)| s)
        .collect()
}
