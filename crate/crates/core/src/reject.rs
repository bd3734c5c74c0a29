//! Reject inference: augmentation (re-weighting accepted rows by score band)
//! and parcelling (sampling labels for rejected rows).
//!
//! Both take WoE datasets: `accepted` carries an encoded target, `rejected`
//! carries at least the same feature columns. Features are the predictors of
//! `accepted`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{encode_target, seeded_rng, Column, Dataset, TargetSpec, BAD, GOOD};
use crate::error::{Error, Result};
use crate::logit::{fit_dataset, FeatureMatrix, FitOptions, LogitModel};
use crate::performance::quantile_sorted;

/// Name of the provenance column in exported samples.
pub const SOURCE_COLUMN: &str = "source";
/// Name of the weight column in exported samples.
pub const WEIGHT_COLUMN: &str = "weight";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Accepted,
    Rejected,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Accepted => "accepted",
            Source::Rejected => "rejected",
        }
    }
}

fn features(accepted: &Dataset, rejected: &Dataset) -> Result<Vec<String>> {
    let names = accepted.predictors();
    if names.is_empty() {
        return Err(Error::InvalidDataset("accepted sample has no features".into()));
    }
    for n in &names {
        let a = accepted.column(n)?;
        let r = rejected
            .column(n)
            .map_err(|_| Error::InvalidDataset(format!("feature `{n}` missing from the rejected sample")))?;
        if a.kind() != r.kind() {
            return Err(r.kind_error(a.kind()));
        }
    }
    let flags = accepted.target_flags()?;
    if flags.iter().all(|&b| b) || flags.iter().all(|&b| !b) {
        return Err(Error::Degenerate("accepted sample needs both classes".into()));
    }
    Ok(names)
}

fn predict(model: &LogitModel, ds: &Dataset, names: &[String]) -> Result<Vec<f64>> {
    if ds.n_rows() == 0 {
        return Ok(Vec::new());
    }
    model.predict(&FeatureMatrix::from_dataset(ds, names)?)
}

/// Band index of a pd under one-decimal rounding, halves away from zero.
pub fn augmentation_band(pd: f64) -> u32 {
    (pd * 10.0).round() as u32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationBand {
    /// Rounded pd of the band.
    pub pd: f64,
    pub n_accepted: usize,
    pub n_rejected: usize,
    /// `None` when the band holds no accepted rows.
    pub weight: Option<f64>,
}

/// Per-row weights of accepted rows and the band table, from band indices.
pub fn augmentation_weights(accepted: &[u32], rejected: &[u32]) -> (Vec<f64>, Vec<AugmentationBand>) {
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for &b in accepted {
        counts.entry(b).or_default().0 += 1;
    }
    for &b in rejected {
        counts.entry(b).or_default().1 += 1;
    }
    let bands: Vec<AugmentationBand> = counts
        .iter()
        .map(|(&b, &(a, r))| AugmentationBand {
            pd: b as f64 / 10.0,
            n_accepted: a,
            n_rejected: r,
            weight: (a > 0).then(|| (a + r) as f64 / a as f64),
        })
        .collect();
    let weights = accepted
        .iter()
        .map(|b| {
            let (a, r) = counts[b];
            (a + r) as f64 / a as f64
        })
        .collect();
    (weights, bands)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationResult {
    pub band_rule: String,
    pub bands: Vec<AugmentationBand>,
    /// Weight of every accepted row, in input order.
    pub weights: Vec<f64>,
    /// Rejected rows in bands without accepted rows.
    pub uncovered_rejected: usize,
    pub initial_model: LogitModel,
    pub model: LogitModel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn augmentation(accepted: &Dataset, rejected: &Dataset, fit: &FitOptions) -> Result<AugmentationResult> {
    let names = features(accepted, rejected)?;
    let initial = fit_dataset(accepted, &names, None, fit)?;
    let acc: Vec<u32> = predict(&initial, accepted, &names)?.into_iter().map(augmentation_band).collect();
    let rej: Vec<u32> = predict(&initial, rejected, &names)?.into_iter().map(augmentation_band).collect();
    let (weights, bands) = augmentation_weights(&acc, &rej);
    let uncovered: usize = bands.iter().filter(|b| b.weight.is_none()).map(|b| b.n_rejected).sum();
    let mut warnings = Vec::new();
    for b in bands.iter().filter(|b| b.weight.is_none()) {
        warnings.push(format!("band {:.1}: {} rejected rows have no accepted rows and are uncovered", b.pd, b.n_rejected));
    }
    let model = fit_dataset(accepted, &names, Some(&weights), fit)?;
    Ok(AugmentationResult {
        band_rule: "predicted pd rounded to one decimal, halves away from zero".to_string(),
        bands,
        weights,
        uncovered_rejected: uncovered,
        initial_model: initial,
        model,
        warnings,
    })
}

impl AugmentationResult {
    /// Accepted rows with their weights followed by rejected rows with
    /// weight 0 and no label.
    pub fn sample(&self, accepted: &Dataset, rejected: &Dataset) -> Result<Dataset> {
        let names = features(accepted, rejected)?;
        let mut w = self.weights.clone();
        w.extend(std::iter::repeat_n(0.0, rejected.n_rows()));
        let labels: Vec<Option<bool>> = accepted
            .target_flags()?
            .into_iter()
            .map(Some)
            .chain(std::iter::repeat_n(None, rejected.n_rows()))
            .collect();
        provenance_sample(accepted, rejected, &names, &labels, &w)
    }
}

fn provenance_sample(
    accepted: &Dataset,
    rejected: &Dataset,
    names: &[String],
    labels: &[Option<bool>],
    weights: &[f64],
) -> Result<Dataset> {
    let target = accepted.target().expect("checked").column.clone();
    let mut cols = Vec::new();
    cols.push(Column::categorical(
        target,
        labels.iter().map(|l| l.map(|b| if b { BAD } else { GOOD }.to_string())).collect(),
    ));
    for n in names {
        let a = Dataset::new(vec![accepted.column(n)?.clone()])?;
        let r = Dataset::new(vec![rejected.column(n)?.clone()])?;
        cols.push(a.concat(&r)?.column(n)?.clone());
    }
    cols.push(Column::from_f64(WEIGHT_COLUMN, weights));
    let mut source: Vec<&str> = vec![Source::Accepted.as_str(); accepted.n_rows()];
    source.extend(vec![Source::Rejected.as_str(); rejected.n_rows()]);
    cols.push(Column::from_strs(SOURCE_COLUMN, &source));
    Dataset::new(cols)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParcellingSpec {
    /// Quantile fractions of the accepted predicted pd delimiting bands.
    pub probs: Vec<f64>,
    /// Upweight per band.
    pub alpha: Vec<f64>,
    pub seed: u64,
}

impl Default for ParcellingSpec {
    fn default() -> Self {
        ParcellingSpec {
            probs: vec![0.0, 0.25, 0.5, 0.7, 0.8, 0.9, 1.0],
            alpha: vec![1.0; 6],
            seed: 42,
        }
    }
}

impl ParcellingSpec {
    pub fn validate(&self) -> Result<()> {
        let p = &self.probs;
        if p.len() < 2 || p[0] != 0.0 || p[p.len() - 1] != 1.0 || p.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "probs must start at 0, end at 1 and ascend strictly".into(),
            ));
        }
        if self.alpha.len() != p.len() - 1 {
            return Err(Error::InvalidParameter(format!(
                "{} alpha values for {} bands",
                self.alpha.len(),
                p.len() - 1
            )));
        }
        if self.alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidParameter("alpha values must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParcelBand {
    pub band: usize,
    /// Lower pd edge; 0 for the first band.
    pub lower: f64,
    /// Upper pd edge (exclusive); 1 (inclusive) for the last band.
    pub upper: f64,
    pub n_accepted: usize,
    pub n_accepted_bad: usize,
    /// Observed bad rate of accepted rows in the band.
    pub pd: f64,
    pub alpha: f64,
    /// Draw probability after clamping to [0, 1].
    pub probability: f64,
    pub clamped: bool,
    pub n_rejected: usize,
    pub n_inferred_bad: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParcellingResult {
    pub bands: Vec<ParcelBand>,
    /// Inferred label of every rejected row (`true` = bad), in input order.
    pub labels: Vec<bool>,
    /// Accepted rows then rejected rows, target and features only.
    pub combined: Dataset,
    pub initial_model: LogitModel,
    pub model: LogitModel,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct BandReport<'a> {
    probs: &'a [f64],
    bands: &'a [ParcelBand],
    warnings: &'a [String],
}

impl ParcellingResult {
    /// Band report as pretty JSON.
    pub fn band_report_json(&self, spec: &ParcellingSpec) -> Result<String> {
        Ok(serde_json::to_string_pretty(&BandReport {
            probs: &spec.probs,
            bands: &self.bands,
            warnings: &self.warnings,
        })?)
    }

    /// The combined sample with unit weights and a source column.
    pub fn sample(&self) -> Result<Dataset> {
        let n_rej = self.labels.len();
        let n_acc = self.combined.n_rows() - n_rej;
        let mut out = self.combined.clone();
        out.push_column(Column::from_f64(WEIGHT_COLUMN, &vec![1.0; n_acc + n_rej]))?;
        let mut source = vec![Source::Accepted.as_str(); n_acc];
        source.extend(vec![Source::Rejected.as_str(); n_rej]);
        out.push_column(Column::from_strs(SOURCE_COLUMN, &source))?;
        Ok(out)
    }
}

/// Band of `pd` given the interior edges: band `j` covers
/// `[edges[j-1], edges[j])`, with the extreme bands open-ended.
pub fn parcel_band(edges: &[f64], pd: f64) -> usize {
    edges.partition_point(|&e| e <= pd)
}

/// Draws labels band by band in ascending order, rows in input order
/// within a band; returns the labels and per-band bad counts.
pub fn draw_labels(bands: &[usize], probability: &[f64], seed: u64) -> (Vec<bool>, Vec<usize>) {
    let mut rng = seeded_rng(seed);
    let mut labels = vec![false; bands.len()];
    let mut bad = vec![0; probability.len()];
    for (j, &p) in probability.iter().enumerate() {
        for (i, _) in bands.iter().enumerate().filter(|(_, &b)| b == j) {
            let u: f64 = rng.random();
            if u < p {
                labels[i] = true;
                bad[j] += 1;
            }
        }
    }
    (labels, bad)
}

pub fn parcelling(
    accepted: &Dataset,
    rejected: &Dataset,
    spec: &ParcellingSpec,
    fit: &FitOptions,
) -> Result<ParcellingResult> {
    spec.validate()?;
    let names = features(accepted, rejected)?;
    let initial = fit_dataset(accepted, &names, None, fit)?;
    let acc_pd = predict(&initial, accepted, &names)?;
    let rej_pd = predict(&initial, rejected, &names)?;
    let flags = accepted.target_flags()?;

    let mut sorted = acc_pd.clone();
    sorted.sort_by(f64::total_cmp);
    let q: Vec<f64> = spec.probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect();
    let edges = &q[1..q.len() - 1];
    let k = spec.alpha.len();

    let mut n_acc = vec![0usize; k];
    let mut n_acc_bad = vec![0usize; k];
    for (&p, &bad) in acc_pd.iter().zip(&flags) {
        let j = parcel_band(edges, p);
        n_acc[j] += 1;
        n_acc_bad[j] += usize::from(bad);
    }
    if let Some(j) = n_acc.iter().position(|&c| c == 0) {
        return Err(Error::EmptyBand { band: j + 1 });
    }
    let rej_band: Vec<usize> = rej_pd.iter().map(|&p| parcel_band(edges, p)).collect();
    let mut warnings = Vec::new();
    let mut bands = Vec::with_capacity(k);
    for j in 0..k {
        let pd = n_acc_bad[j] as f64 / n_acc[j] as f64;
        let raw = pd * spec.alpha[j];
        let clamped = raw > 1.0;
        if clamped {
            warnings.push(format!("band {}: PD x alpha = {raw} clamped to 1", j + 1));
        }
        bands.push(ParcelBand {
            band: j + 1,
            lower: if j == 0 { 0.0 } else { edges[j - 1] },
            upper: if j == k - 1 { 1.0 } else { edges[j] },
            n_accepted: n_acc[j],
            n_accepted_bad: n_acc_bad[j],
            pd,
            alpha: spec.alpha[j],
            probability: raw.clamp(0.0, 1.0),
            clamped,
            n_rejected: rej_band.iter().filter(|&&b| b == j).count(),
            n_inferred_bad: 0,
        });
    }
    let probability: Vec<f64> = bands.iter().map(|b| b.probability).collect();
    let (labels, bad) = draw_labels(&rej_band, &probability, spec.seed);
    for (b, c) in bands.iter_mut().zip(bad) {
        b.n_inferred_bad = c;
    }

    let all_labels: Vec<Option<bool>> = flags.iter().chain(&labels).map(|&b| Some(b)).collect();
    let target = accepted.target().expect("checked").column.clone();
    let mut keep = names.clone();
    keep.push(target.clone());
    let combined = provenance_sample(accepted, rejected, &names, &all_labels, &vec![1.0; all_labels.len()])?;
    let combined = encode_target(&combined.select(&keep)?, &TargetSpec::new(target, BAD, GOOD))?;
    let model = fit_dataset(&combined, &names, None, fit)?;
    Ok(ParcellingResult {
        bands,
        labels,
        combined,
        initial_model: initial,
        model,
        warnings,
    })
}
