//! End-to-end development stages on in-memory datasets: split, binning,
//! WoE transformation, preselection, stepwise fit, scaling and evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binning::{auto_bin, ApplyTarget, BinningModel, BinningParams, UnseenPolicy};
use crate::data::{split, Column, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::logit::{stepwise, FeatureMatrix, LogitModel, StepwiseResult, StepwiseSpec};
use crate::performance::{
    calibration_tests, ecdf_curves, evaluate, master_scale, roc_curve, EvaluateOptions, GradeTable,
    PerformanceReport,
};
use crate::preselect::{correlation_filter, iv_filter, psi_filter, FilterReport};
use crate::scorecard::{build_scorecard, feature_variable, gains_table, GainsTable, ScalingParams, Scorecard};
use crate::woe::woe_column_name;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    #[default]
    Bic,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            _ => Err(Error::InvalidParameter(format!("unknown criterion `{s}` (aic or bic)"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreselectConfig {
    pub iv_threshold: f64,
    /// PSI ceiling between the training and validation samples.
    pub max_psi: Option<f64>,
    pub correlation_threshold: f64,
}

impl Default for PreselectConfig {
    fn default() -> Self {
        PreselectConfig {
            iv_threshold: crate::preselect::DEFAULT_IV_THRESHOLD,
            max_psi: Some(0.25),
            correlation_threshold: crate::preselect::DEFAULT_CORRELATION_THRESHOLD,
        }
    }
}

/// WoE columns (`<v>_woe`) of every binned variable plus the target.
pub fn woe_data(bins: &BinningModel, ds: &Dataset) -> Result<Dataset> {
    let mut names = Vec::new();
    for v in &bins.variables {
        names.push(v.name.clone());
    }
    let woe = bins.apply(&ds.select(&names)?, ApplyTarget::Woe, UnseenPolicy::Neutral)?;
    Ok(woe)
}

/// IV filter, then optional PSI filter, then correlation filter on the WoE
/// columns of the survivors. Names in the report are raw variable names.
pub fn preselect(
    bins: &BinningModel,
    train: &Dataset,
    valid: Option<&Dataset>,
    train_woe: &Dataset,
    config: &PreselectConfig,
) -> Result<FilterReport> {
    let mut report = iv_filter(&bins.ivs(), config.iv_threshold)?;
    if let (Some(max), Some(valid)) = (config.max_psi, valid) {
        report = report.merge(&psi_filter(&bins.stability(train, valid)?, max));
    }
    let survivors = report.kept();
    if survivors.len() > 1 {
        let mut cols = Vec::new();
        for v in &survivors {
            let c = train_woe.column(&woe_column_name(v))?;
            cols.push(Column::numeric(v.clone(), c.numeric_values()?.to_vec()));
        }
        report = report.merge(&correlation_filter(&Dataset::new(cols)?, config.correlation_threshold)?);
    }
    Ok(report)
}

/// Stepwise selection over the WoE columns of `variables`.
pub fn fit(train_woe: &Dataset, variables: &[String], criterion: Criterion) -> Result<StepwiseResult> {
    let scope: Vec<String> = variables.iter().map(|v| woe_column_name(v)).collect();
    let spec = match criterion {
        Criterion::Aic => StepwiseSpec::aic(scope),
        Criterion::Bic => StepwiseSpec::bic(scope, train_woe.n_rows()),
    };
    stepwise(train_woe, &spec)
}

/// Predicted probability of bad for every row of a WoE dataset.
pub fn predict_pd(model: &LogitModel, woe: &Dataset) -> Result<Vec<f64>> {
    model.predict(&FeatureMatrix::from_dataset(woe, &model.feature_names())?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub good: usize,
    pub bad: usize,
}

/// Equal-width score histogram by class.
pub fn score_histogram(scores: &[f64], y: &[bool], bins: usize) -> Vec<HistogramBin> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if scores.is_empty() || bins == 0 {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lower: lo + i as f64 * width,
            upper: lo + (i + 1) as f64 * width,
            good: 0,
            bad: 0,
        })
        .collect();
    for (&s, &bad) in scores.iter().zip(y) {
        let i = (((s - lo) / width) as usize).min(bins - 1);
        if bad {
            out[i].bad += 1;
        } else {
            out[i].good += 1;
        }
    }
    out
}

/// Validation results of a scorecard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub train_auc: f64,
    pub performance: PerformanceReport,
    pub gains: GainsTable,
    /// Grades formed on training pds, tested on validation outcomes.
    pub grades: GradeTable,
    pub roc: Vec<(f64, f64)>,
    pub ecdf: Vec<(f64, f64, f64)>,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub metrics: EvaluateOptions,
    pub gains_bins: usize,
    pub test_level: f64,
    pub central_tolerance: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            metrics: EvaluateOptions::default(),
            gains_bins: 10,
            test_level: 0.05,
            central_tolerance: 0.2,
        }
    }
}

pub fn evaluation(
    card: &Scorecard,
    model: &LogitModel,
    bins: &BinningModel,
    train: &Dataset,
    valid: &Dataset,
    config: &EvaluationConfig,
) -> Result<Evaluation> {
    let y_train = train.target_flags()?;
    let y = valid.target_flags()?;
    let train_scores = card.score(train, UnseenPolicy::Neutral)?.total_f64();
    let scores = card.score(valid, UnseenPolicy::Neutral)?.total_f64();
    let direction = config.metrics.direction;
    let performance = evaluate(&scores, &y, &config.metrics)?;
    let train_auc = crate::performance::roc_auc(&train_scores, &y_train, direction)?.auc;
    let pd_train = predict_pd(model, &woe_data(bins, train)?)?;
    let pd_valid = predict_pd(model, &woe_data(bins, valid)?)?;
    let formed = master_scale(&pd_train, &y_train, &bins.params)?;
    let mut grades = calibration_tests(&formed.regrade(&pd_valid, &y)?, config.test_level, config.central_tolerance)?;
    grades.warnings.splice(0..0, formed.warnings.iter().cloned());
    Ok(Evaluation {
        train_auc,
        gains: gains_table(&scores, &y, config.gains_bins)?,
        grades,
        roc: roc_curve(&scores, &y, direction)?,
        ecdf: ecdf_curves(&scores, &y)?,
        histogram: score_histogram(&scores, &y, 20),
        performance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub split: SplitSpec,
    pub binning: BinningParams,
    /// Skip preselection when `None`.
    pub preselect: Option<PreselectConfig>,
    pub criterion: Criterion,
    pub scaling: ScalingParams,
    pub evaluation: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            split: SplitSpec::new(0.7, 42),
            binning: BinningParams::default(),
            preselect: Some(PreselectConfig::default()),
            criterion: Criterion::Bic,
            scaling: ScalingParams::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub train: Dataset,
    pub valid: Dataset,
    pub bins: BinningModel,
    pub train_woe: Dataset,
    pub valid_woe: Dataset,
    pub preselect: Option<FilterReport>,
    pub stepwise: StepwiseResult,
    pub scorecard: Scorecard,
    pub evaluation: Evaluation,
}

/// Raw variables entering a model, in model order.
pub fn model_variables(model: &LogitModel, bins: &BinningModel) -> Result<Vec<String>> {
    model
        .feature_names()
        .iter()
        .map(|f| {
            feature_variable(f, bins)
                .map(str::to_string)
                .ok_or_else(|| Error::UnknownVariable(f.clone()))
        })
        .collect()
}

/// Every stage on an encoded dataset.
pub fn run_pipeline(ds: &Dataset, config: &PipelineConfig) -> Result<PipelineRun> {
    let (train, valid) = split(ds, &config.split)?;
    let bins = auto_bin(&train, &[], &config.binning)?;
    let train_woe = woe_data(&bins, &train)?;
    let valid_woe = woe_data(&bins, &valid)?;
    let (preselect, variables) = match &config.preselect {
        Some(c) => {
            let r = preselect(&bins, &train, Some(&valid), &train_woe, c)?;
            let kept = r.kept();
            (Some(r), kept)
        }
        None => (None, bins.variable_names()),
    };
    let stepwise = fit(&train_woe, &variables, config.criterion)?;
    let scorecard = build_scorecard(&stepwise.model, &bins, &config.scaling)?;
    let evaluation = evaluation(&scorecard, &stepwise.model, &bins, &train, &valid, &config.evaluation)?;
    Ok(PipelineRun {
        train,
        valid,
        bins,
        train_woe,
        valid_woe,
        preselect,
        stepwise,
        scorecard,
        evaluation,
    })
}
