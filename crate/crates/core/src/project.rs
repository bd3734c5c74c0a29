//! On-disk project: one `project.json` referencing stage artifacts by
//! relative path, with per-stage content hashes and a lock file.
//!
//! Stages form a DAG (split → bins → woe → model → scorecard →
//! performance, with preselect, stability, reject and report hanging off
//! it). A stage is stale when an input it was computed from has changed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::binning::{auto_bin, BinningModel, BinningParams, BreaksList};
use crate::data::{encode_target, load_csv, read_csv, split, ColumnKind, CsvOptions, Dataset, SplitSpec, TargetSpec, BAD, GOOD};
use crate::error::{Error, Result};
use crate::logit::{FitOptions, StepwiseResult};
use crate::pipeline::{self, Criterion, Evaluation, EvaluationConfig, PreselectConfig};
use crate::preselect::FilterReport;
use crate::reject::{augmentation, parcelling, AugmentationResult, ParcelBand, ParcellingSpec};
use crate::scorecard::{build_scorecard, sha256_hex, ScalingParams, Scorecard};
use crate::woe::StabilityReport;

pub const PROJECT_FILE: &str = "project.json";
pub const LOCK_FILE: &str = "project.lock";
pub const PROJECT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Split,
    Bins,
    Woe,
    Preselect,
    Model,
    Scorecard,
    Performance,
    Stability,
    Reject,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Split,
        Stage::Bins,
        Stage::Woe,
        Stage::Preselect,
        Stage::Model,
        Stage::Scorecard,
        Stage::Performance,
        Stage::Stability,
        Stage::Reject,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Split => "split",
            Stage::Bins => "bins",
            Stage::Woe => "woe",
            Stage::Preselect => "preselect",
            Stage::Model => "model",
            Stage::Scorecard => "scorecard",
            Stage::Performance => "performance",
            Stage::Stability => "stability",
            Stage::Reject => "reject",
            Stage::Report => "report",
        }
    }

    /// Stages that must be complete and fresh before this one can run.
    pub fn prerequisites(self) -> &'static [Stage] {
        match self {
            Stage::Split => &[],
            Stage::Bins => &[Stage::Split],
            Stage::Woe => &[Stage::Bins],
            Stage::Preselect => &[Stage::Woe],
            Stage::Model => &[Stage::Woe],
            Stage::Scorecard => &[Stage::Model],
            Stage::Performance => &[Stage::Scorecard],
            Stage::Stability => &[Stage::Bins],
            Stage::Reject => &[Stage::Model],
            Stage::Report => &[Stage::Performance],
        }
    }

    pub fn artifacts(self) -> &'static [&'static str] {
        match self {
            Stage::Split => &["train.csv", "valid.csv"],
            Stage::Bins => &["bins.json"],
            Stage::Woe => &["train_woe.csv", "valid_woe.csv"],
            Stage::Preselect => &["preselect.json"],
            Stage::Model => &["model.json"],
            Stage::Scorecard => &["scorecard.json"],
            Stage::Performance => &["performance.json"],
            Stage::Stability => &["stability.json"],
            Stage::Reject => &["reject.json", "reject_sample.csv"],
            Stage::Report => &["report.html", "report.md"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown stage `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub artifacts: Vec<String>,
    pub sha256: String,
    /// Hashes of the input stages at the time this stage was computed.
    pub inputs: BTreeMap<Stage, String>,
    /// Seconds since the Unix epoch.
    pub completed_at: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageState {
    Missing,
    Fresh,
    Stale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub version: u32,
    /// Source data, relative to the project directory when inside it.
    pub data: String,
    pub target: TargetSpec,
    /// Column kinds of the source data, reused when reading artifacts.
    pub schema: BTreeMap<String, ColumnKind>,
    pub split: SplitSpec,
    #[serde(default)]
    pub binning: BinningParams,
    #[serde(default)]
    pub preselect: PreselectConfig,
    #[serde(default)]
    pub criterion: Criterion,
    #[serde(default)]
    pub scaling: ScalingParams,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub stages: BTreeMap<Stage, StageRecord>,
}

/// Removes the lock file when dropped.
#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectMethod {
    Augmentation,
    #[default]
    Parcelling,
}

impl FromStr for RejectMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "augmentation" => Ok(RejectMethod::Augmentation),
            "parcelling" => Ok(RejectMethod::Parcelling),
            _ => Err(Error::InvalidParameter(format!("unknown reject method `{s}` (augmentation or parcelling)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum RejectReport {
    Augmentation(AugmentationResult),
    Parcelling {
        spec: ParcellingSpec,
        bands: Vec<ParcelBand>,
        initial_model: crate::logit::LogitModel,
        model: crate::logit::LogitModel,
        warnings: Vec<String>,
    },
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn csv_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// A project directory and its loaded `project.json`.
#[derive(Clone, Debug)]
pub struct Workspace {
    root: PathBuf,
    pub project: Project,
}

impl Workspace {
    /// Creates `root/project.json` for the CSV at `data`.
    pub fn init(root: impl AsRef<Path>, data: impl AsRef<Path>, target: &str, bad_level: &str, split: SplitSpec) -> Result<Workspace> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let raw = load_csv(data.as_ref(), None, &CsvOptions::default())?;
        let spec = TargetSpec::infer(&raw, target, bad_level)?;
        encode_target(&raw, &spec)?;
        let abs = fs::canonicalize(data.as_ref())?;
        let root_abs = fs::canonicalize(&root)?;
        let rel = abs.strip_prefix(&root_abs).map(Path::to_path_buf).unwrap_or(abs);
        let ws = Workspace {
            root,
            project: Project {
                version: PROJECT_VERSION,
                data: rel.to_string_lossy().into_owned(),
                target: spec,
                schema: raw.schema(),
                split,
                binning: BinningParams::default(),
                preselect: PreselectConfig::default(),
                criterion: Criterion::default(),
                scaling: ScalingParams::default(),
                evaluation: EvaluationConfig::default(),
                stages: BTreeMap::new(),
            },
        };
        ws.save()?;
        Ok(ws)
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Workspace> {
        let root = root.as_ref().to_path_buf();
        let text = fs::read_to_string(root.join(PROJECT_FILE)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::InvalidParameter(format!(
                "no {PROJECT_FILE} in {}; run `split` with --data first",
                root.display()
            )),
            _ => Error::Io(e),
        })?;
        let project: Project = serde_json::from_str(&text)?;
        if project.version > PROJECT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "project version {} is newer than supported version {PROJECT_VERSION}",
                project.version
            )));
        }
        Ok(Workspace { root, project })
    }

    pub fn exists(root: impl AsRef<Path>) -> bool {
        root.as_ref().join(PROJECT_FILE).is_file()
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn save(&self) -> Result<()> {
        fs::write(self.root.join(PROJECT_FILE), json_bytes(&self.project)?)?;
        Ok(())
    }

    /// Exclusive lock on the project; fails when another holder exists.
    pub fn lock(&self) -> Result<LockGuard> {
        let path = self.root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::Io(e)),
        }
    }

    pub fn path(&self, artifact: &str) -> PathBuf {
        self.root.join(artifact)
    }

    pub fn data_path(&self) -> PathBuf {
        self.root.join(&self.project.data)
    }

    pub fn state(&self, stage: Stage) -> StageState {
        let Some(rec) = self.project.stages.get(&stage) else {
            return StageState::Missing;
        };
        let fresh = rec.inputs.iter().all(|(s, h)| {
            self.project.stages.get(s).is_some_and(|r| &r.sha256 == h) && self.state(*s) == StageState::Fresh
        });
        if fresh {
            StageState::Fresh
        } else {
            StageState::Stale
        }
    }

    pub fn status(&self) -> Vec<(Stage, StageState)> {
        Stage::ALL.iter().map(|&s| (s, self.state(s))).collect()
    }

    /// Errors unless `stage` is complete and fresh.
    pub fn require(&self, stage: Stage) -> Result<()> {
        match self.state(stage) {
            StageState::Fresh => Ok(()),
            StageState::Missing => Err(Error::MissingStage {
                stage: stage.name().to_string(),
                reason: format!("run `{}` first", stage_command(stage)),
            }),
            StageState::Stale => Err(Error::MissingStage {
                stage: stage.name().to_string(),
                reason: format!("stale after an upstream change; rerun `{}`", stage_command(stage)),
            }),
        }
    }

    /// Every stage `stage` depends on, directly or not, in pipeline order.
    pub fn upstream(stage: Stage) -> Vec<Stage> {
        let mut seen = BTreeSet::new();
        let mut todo = stage.prerequisites().to_vec();
        while let Some(s) = todo.pop() {
            if seen.insert(s) {
                todo.extend_from_slice(s.prerequisites());
            }
        }
        Stage::ALL.iter().copied().filter(|s| seen.contains(s)).collect()
    }

    /// Errors on the earliest upstream stage of `stage` that is not fresh.
    pub fn require_for(&self, stage: Stage) -> Result<()> {
        for p in Self::upstream(stage) {
            self.require(p)?;
        }
        Ok(())
    }

    /// Writes the artifacts of `stage` and records its hash and inputs.
    pub fn record(&mut self, stage: Stage, files: Vec<Vec<u8>>, inputs: &[Stage]) -> Result<()> {
        let names = stage.artifacts();
        debug_assert_eq!(names.len(), files.len());
        let mut digest = String::new();
        for (name, bytes) in names.iter().zip(&files) {
            fs::write(self.path(name), bytes)?;
            digest.push_str(&sha256_hex(bytes));
        }
        let inputs = inputs
            .iter()
            .map(|s| (*s, self.project.stages[s].sha256.clone()))
            .collect();
        self.project.stages.insert(
            stage,
            StageRecord {
                artifacts: names.iter().map(|s| s.to_string()).collect(),
                sha256: sha256_hex(digest.as_bytes()),
                inputs,
                completed_at: now(),
            },
        );
        self.save()
    }

    fn read_dataset(&self, artifact: &str) -> Result<Dataset> {
        let options = CsvOptions {
            schema: self.project.schema.clone(),
            ..CsvOptions::default()
        };
        let spec = TargetSpec::new(self.project.target.column.clone(), BAD, GOOD);
        load_csv(self.path(artifact), Some(&spec), &options)
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, artifact: &str) -> Result<T> {
        Ok(serde_json::from_str(&fs::read_to_string(self.path(artifact))?)?)
    }

    /// Reads a CSV with the project's schema; encodes the target when present.
    pub fn read_data(&self, path: impl AsRef<Path>) -> Result<Dataset> {
        let options = CsvOptions {
            schema: self.project.schema.clone(),
            ..CsvOptions::default()
        };
        let raw = load_csv(path, None, &options)?;
        if raw.has_column(&self.project.target.column) {
            encode_target(&raw, &self.project.target)
        } else {
            Ok(raw)
        }
    }

    pub fn source(&self) -> Result<Dataset> {
        let raw = read_csv(fs::File::open(self.data_path())?, None, &CsvOptions {
            schema: self.project.schema.clone(),
            ..CsvOptions::default()
        })?;
        encode_target(&raw, &self.project.target)
    }

    pub fn train(&self) -> Result<Dataset> {
        self.read_dataset("train.csv")
    }

    pub fn valid(&self) -> Result<Dataset> {
        self.read_dataset("valid.csv")
    }

    pub fn bins(&self) -> Result<BinningModel> {
        BinningModel::from_json(&fs::read_to_string(self.path("bins.json"))?)
    }

    pub fn train_woe(&self) -> Result<Dataset> {
        self.read_dataset("train_woe.csv")
    }

    pub fn valid_woe(&self) -> Result<Dataset> {
        self.read_dataset("valid_woe.csv")
    }

    pub fn preselect_report(&self) -> Result<FilterReport> {
        self.read_json("preselect.json")
    }

    pub fn model(&self) -> Result<StepwiseResult> {
        self.read_json("model.json")
    }

    pub fn scorecard(&self) -> Result<Scorecard> {
        Scorecard::from_json(&fs::read_to_string(self.path("scorecard.json"))?)
    }

    pub fn evaluation(&self) -> Result<Evaluation> {
        self.read_json("performance.json")
    }

    pub fn stability(&self) -> Result<StabilityReport> {
        self.read_json("stability.json")
    }

    pub fn run_split(&mut self) -> Result<()> {
        let (train, valid) = split(&self.source()?, &self.project.split)?;
        self.record(Stage::Split, vec![csv_bytes(&train)?, csv_bytes(&valid)?], &[])
    }

    /// Automatic binning of every predictor of the training sample.
    pub fn run_bin(&mut self) -> Result<BinningModel> {
        self.require_for(Stage::Bins)?;
        let bins = auto_bin(&self.train()?, &[], &self.project.binning)?;
        self.commit_bins(&bins)?;
        Ok(bins)
    }

    /// Stores `bins` as the binning stage.
    pub fn commit_bins(&mut self, bins: &BinningModel) -> Result<()> {
        self.require_for(Stage::Bins)?;
        self.record(Stage::Bins, vec![json_bytes(bins)?], &[Stage::Split])
    }

    pub fn adjust_bins(&mut self, list: &BreaksList) -> Result<BinningModel> {
        self.require(Stage::Bins)?;
        let bins = self.bins()?.apply_breaks_list(list)?;
        self.commit_bins(&bins)?;
        Ok(bins)
    }

    pub fn run_woe(&mut self) -> Result<()> {
        self.require_for(Stage::Woe)?;
        let bins = self.bins()?;
        let t = pipeline::woe_data(&bins, &self.train()?)?;
        let v = pipeline::woe_data(&bins, &self.valid()?)?;
        self.record(Stage::Woe, vec![csv_bytes(&t)?, csv_bytes(&v)?], &[Stage::Bins])
    }

    pub fn run_preselect(&mut self) -> Result<FilterReport> {
        self.require_for(Stage::Preselect)?;
        let report = pipeline::preselect(
            &self.bins()?,
            &self.train()?,
            Some(&self.valid()?),
            &self.train_woe()?,
            &self.project.preselect,
        )?;
        self.record(Stage::Preselect, vec![json_bytes(&report)?], &[Stage::Woe])?;
        Ok(report)
    }

    /// Stepwise fit over the preselected variables when preselection is
    /// fresh, otherwise over every binned variable.
    pub fn run_fit(&mut self) -> Result<StepwiseResult> {
        self.require_for(Stage::Model)?;
        let mut inputs = vec![Stage::Woe];
        let variables = if self.state(Stage::Preselect) == StageState::Fresh {
            inputs.push(Stage::Preselect);
            self.preselect_report()?.kept()
        } else {
            self.bins()?.variable_names()
        };
        let result = pipeline::fit(&self.train_woe()?, &variables, self.project.criterion)?;
        self.record(Stage::Model, vec![json_bytes(&result)?], &inputs)?;
        Ok(result)
    }

    pub fn run_scale(&mut self) -> Result<Scorecard> {
        self.require_for(Stage::Scorecard)?;
        let card = build_scorecard(&self.model()?.model, &self.bins()?, &self.project.scaling)?;
        let mut bytes = card.to_json()?.into_bytes();
        bytes.push(b'\n');
        self.record(Stage::Scorecard, vec![bytes], &[Stage::Model])?;
        Ok(card)
    }

    pub fn run_evaluate(&mut self) -> Result<Evaluation> {
        self.require_for(Stage::Performance)?;
        let ev = pipeline::evaluation(
            &self.scorecard()?,
            &self.model()?.model,
            &self.bins()?,
            &self.train()?,
            &self.valid()?,
            &self.project.evaluation,
        )?;
        self.record(Stage::Performance, vec![json_bytes(&ev)?], &[Stage::Scorecard])?;
        Ok(ev)
    }

    /// PSI of every binned variable between the training sample and
    /// `other` (the validation sample when `None`).
    pub fn run_stability(&mut self, other: Option<&Dataset>) -> Result<StabilityReport> {
        self.require_for(Stage::Stability)?;
        let new = match other {
            Some(d) => d.clone(),
            None => self.valid()?,
        };
        let report = self.bins()?.stability(&self.train()?, &new)?;
        self.record(Stage::Stability, vec![json_bytes(&report)?], &[Stage::Bins])?;
        Ok(report)
    }

    /// Reject inference with the model's variables; `rejected` holds raw
    /// (unbinned) columns.
    pub fn run_reject(&mut self, rejected: &Dataset, method: RejectMethod, spec: &ParcellingSpec) -> Result<RejectReport> {
        self.require_for(Stage::Reject)?;
        let bins = self.bins()?;
        let model = self.model()?.model;
        let variables = pipeline::model_variables(&model, &bins)?;
        let features = model.feature_names();
        let accepted = self.train_woe()?.select(&features)?;
        let mut rej = Vec::new();
        for v in &variables {
            rej.push(rejected.column(v)?.clone());
        }
        let rej_woe = bins.subset(&variables)?.apply(
            &Dataset::new(rej)?,
            crate::binning::ApplyTarget::Woe,
            crate::binning::UnseenPolicy::Neutral,
        )?;
        let fit = FitOptions::default();
        let (report, sample) = match method {
            RejectMethod::Augmentation => {
                let r = augmentation(&accepted, &rej_woe, &fit)?;
                let sample = r.sample(&accepted, &rej_woe)?;
                (RejectReport::Augmentation(r), sample)
            }
            RejectMethod::Parcelling => {
                let r = parcelling(&accepted, &rej_woe, spec, &fit)?;
                let sample = r.sample()?;
                (
                    RejectReport::Parcelling {
                        spec: spec.clone(),
                        bands: r.bands,
                        initial_model: r.initial_model,
                        model: r.model,
                        warnings: r.warnings,
                    },
                    sample,
                )
            }
        };
        self.record(Stage::Reject, vec![json_bytes(&report)?, csv_bytes(&sample)?], &[Stage::Model])?;
        Ok(report)
    }

    /// Stores a rendered report (HTML and Markdown).
    pub fn record_report(&mut self, html: String, markdown: String) -> Result<()> {
        self.require_for(Stage::Report)?;
        self.record(Stage::Report, vec![html.into_bytes(), markdown.into_bytes()], &[Stage::Performance])
    }
}

/// CLI subcommand producing a stage.
pub fn stage_command(stage: Stage) -> &'static str {
    match stage {
        Stage::Split => "split",
        Stage::Bins => "bin",
        Stage::Woe => "woe",
        Stage::Preselect => "preselect",
        Stage::Model => "fit",
        Stage::Scorecard => "scale",
        Stage::Performance => "evaluate",
        Stage::Stability => "stability",
        Stage::Reject => "reject-infer",
        Stage::Report => "report",
    }
}
