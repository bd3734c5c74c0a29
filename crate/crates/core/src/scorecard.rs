//! Points scaling of a WoE logistic model.
//!
//! With `factor = pdo / ln 2` and `offset = points0 + factor·ln(odds0)`,
//! the unrounded score of a row is `offset − factor·η`, where `η` is the
//! model's log-odds of bad. Each variable contributes
//! `round(−factor·β·woe + share)` points per bin.

use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binning::{Assignment, BinMapper, BinningModel, UnseenPolicy};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::logit::LogitModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingParams {
    pub pdo: f64,
    pub points0: f64,
    /// Bad-to-good odds at `points0`.
    pub odds0: f64,
    /// Spread the base points equally over the variables.
    pub basepoints_eq0: bool,
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            pdo: 50.0,
            points0: 600.0,
            odds0: 1.0 / 19.0,
            basepoints_eq0: false,
        }
    }
}

impl ScalingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pdo > 0.0 && self.pdo.is_finite()) {
            return Err(Error::InvalidParameter(format!("pdo must be positive, got {}", self.pdo)));
        }
        if !(self.odds0 > 0.0 && self.odds0.is_finite()) {
            return Err(Error::InvalidParameter(format!("odds0 must be positive, got {}", self.odds0)));
        }
        if !self.points0.is_finite() {
            return Err(Error::InvalidParameter("points0 must be finite".into()));
        }
        Ok(())
    }

    pub fn factor(&self) -> f64 {
        self.pdo / std::f64::consts::LN_2
    }

    pub fn offset(&self) -> f64 {
        self.points0 + self.factor() * self.odds0.ln()
    }

    /// Unrounded score of log-odds `eta`.
    pub fn score_of_log_odds(&self, eta: f64) -> f64 {
        self.offset() - self.factor() * eta
    }
}

/// Bad-to-good odds at `score`.
pub fn score_to_odds(score: f64, p: &ScalingParams) -> f64 {
    p.odds0 * (-(score - p.points0) / p.pdo).exp2()
}

/// Probability of bad at `score`.
pub fn score_to_pd(score: f64, p: &ScalingParams) -> f64 {
    let odds = score_to_odds(score, p);
    odds / (1.0 + odds)
}

/// Inverse of [`score_to_pd`].
pub fn pd_to_score(pd: f64, p: &ScalingParams) -> Result<f64> {
    if !(pd > 0.0 && pd < 1.0) {
        return Err(Error::InvalidParameter(format!("pd must lie in (0, 1), got {pd}")));
    }
    let odds = pd / (1.0 - pd);
    Ok(p.points0 - p.pdo * (odds / p.odds0).log2())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CardBin {
    pub label: String,
    pub woe: f64,
    pub points: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CardVariable {
    pub name: String,
    /// Model feature the variable enters as.
    pub feature: String,
    pub coefficient: f64,
    /// Constant added to every bin of this variable before rounding.
    pub share: f64,
    pub bins: Vec<CardBin>,
    /// Points for rows mapped to WoE 0 under [`UnseenPolicy::Neutral`].
    pub neutral_points: i64,
    pub mapper: BinMapper,
}

impl CardVariable {
    /// Unrounded points of a bin with the given WoE.
    pub fn exact_points(&self, woe: f64, factor: f64) -> f64 {
        -factor * self.coefficient * woe + self.share
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_sha256: String,
    pub binning_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub scaling: ScalingParams,
    pub basepoints: i64,
    /// Unrounded base points kept outside the variables.
    pub base_exact: f64,
    pub variables: Vec<CardVariable>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Variable of `bins` behind a model feature: `<v>_woe` or `<v>` itself.
pub fn feature_variable<'a>(feature: &'a str, bins: &BinningModel) -> Option<&'a str> {
    if let Some(v) = feature.strip_suffix("_woe") {
        if bins.variable(v).is_ok() {
            return Some(v);
        }
    }
    bins.variable(feature).ok().map(|_| feature)
}

/// Converts a WoE logistic model into integer points per bin.
pub fn build_scorecard(m: &LogitModel, bins: &BinningModel, p: &ScalingParams) -> Result<Scorecard> {
    p.validate()?;
    let factor = p.factor();
    let base = p.offset() - factor * m.intercept;
    let n_vars = m.coefficients.len();
    let (share, base_exact) = if p.basepoints_eq0 && n_vars > 0 {
        (base / n_vars as f64, 0.0)
    } else {
        (0.0, base)
    };
    let mut warnings = Vec::new();
    if !m.converged {
        warnings.push("the logistic model did not converge".to_string());
    }
    let mut variables = Vec::with_capacity(n_vars);
    for (feature, &beta) in &m.coefficients {
        let name = feature_variable(feature, bins).ok_or_else(|| {
            Error::UnknownVariable(format!("{feature} (no binning for model feature)"))
        })?;
        let vb = bins.variable(name)?;
        let mut var = CardVariable {
            name: name.to_string(),
            feature: feature.clone(),
            coefficient: beta,
            share,
            bins: Vec::new(),
            neutral_points: 0,
            mapper: vb.mapper(),
        };
        var.bins = vb
            .bins
            .iter()
            .map(|b| CardBin {
                label: b.bin.clone(),
                woe: b.woe,
                points: var.exact_points(b.woe, factor).round() as i64,
            })
            .collect();
        var.neutral_points = var.exact_points(0.0, factor).round() as i64;
        variables.push(var);
    }
    let model_json = serde_json::to_vec(m)?;
    let binning_json = serde_json::to_vec(bins)?;
    Ok(Scorecard {
        scaling: *p,
        basepoints: base_exact.round() as i64,
        base_exact,
        variables,
        provenance: Provenance {
            model_sha256: sha256_hex(&model_json),
            binning_sha256: sha256_hex(&binning_json),
        },
        warnings,
    })
}

/// Scores of every row: integer totals, unrounded totals and, per card
/// variable, the points of each row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub total: Vec<i64>,
    pub exact: Vec<f64>,
    pub points: IndexMap<String, Vec<i64>>,
}

impl Scores {
    pub fn total_f64(&self) -> Vec<f64> {
        self.total.iter().map(|&t| t as f64).collect()
    }
}

impl Scorecard {
    pub fn variable(&self, name: &str) -> Result<&CardVariable> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Scores every row of `ds` from its raw (unbinned) variables.
    pub fn score(&self, ds: &Dataset, unseen: UnseenPolicy) -> Result<Scores> {
        let n = ds.n_rows();
        let factor = self.scaling.factor();
        let mut total = vec![self.basepoints; n];
        let mut exact = vec![self.base_exact; n];
        let mut points = IndexMap::new();
        for var in &self.variables {
            let col = ds.column(&var.name)?;
            let mut pts = Vec::with_capacity(n);
            for row in 0..n {
                let (p, woe) = match var.mapper.assign(col, row, unseen)? {
                    Assignment::Bin(i) => (var.bins[i].points, var.bins[i].woe),
                    Assignment::Neutral => (var.neutral_points, 0.0),
                };
                total[row] += p;
                exact[row] += var.exact_points(woe, factor);
                pts.push(p);
            }
            points.insert(var.name.clone(), pts);
        }
        Ok(Scores { total, exact, points })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Scorecard> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-bin table as CSV: `variable,bin,woe,points`, base points first.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["variable", "bin", "woe", "points"])?;
        w.write_record(["basepoints", "", "", &self.basepoints.to_string()])?;
        for v in &self.variables {
            for b in &v.bins {
                w.write_record([v.name.as_str(), &b.label, &b.woe.to_string(), &b.points.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Smallest and largest attainable totals.
    pub fn score_range(&self) -> (i64, i64) {
        self.variables.iter().fold((self.basepoints, self.basepoints), |(lo, hi), v| {
            let min = v.bins.iter().map(|b| b.points).min().unwrap_or(0);
            let max = v.bins.iter().map(|b| b.points).max().unwrap_or(0);
            (lo + min, hi + max)
        })
    }
}

/// Best uniform (minimax) affine fit `y ≈ a·x + c`; returns `(a, c, max |residual|)`.
pub fn minimax_affine_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let spread = |a: f64| {
        let r: Vec<f64> = points.iter().map(|(x, y)| y - a * x).collect();
        let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        ((hi - lo) / 2.0, (hi + lo) / 2.0)
    };
    // the half-spread is convex piecewise linear in a, minimal at a breakpoint
    let mut slopes = vec![0.0];
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            if p.0 != q.0 {
                slopes.push((q.1 - p.1) / (q.0 - p.0));
            }
        }
    }
    let mut best = (0.0, 0.0, f64::INFINITY);
    for a in slopes {
        let (r, c) = spread(a);
        if r < best.2 {
            best = (a, c, r);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainsRow {
    pub bin: String,
    pub count: usize,
    pub cum_count: usize,
    pub good: usize,
    pub cum_good: usize,
    pub bad: usize,
    pub cum_bad: usize,
    pub badprob: f64,
    pub approval_rate: f64,
    pub cum_badprob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainsTable {
    pub rows: Vec<GainsRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Equal-frequency score bands from the highest score down; tied scores
/// share a band.
pub fn gains_table(scores: &[f64], y: &[bool], bin_num: usize) -> Result<GainsTable> {
    if scores.len() != y.len() {
        return Err(Error::InvalidParameter(format!("{} scores for {} labels", scores.len(), y.len())));
    }
    if bin_num < 1 {
        return Err(Error::InvalidParameter("bin_num must be at least 1".into()));
    }
    if scores.is_empty() {
        return Err(Error::Degenerate("no scores".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("scores must be finite".into()));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // band of each sorted position; ties take the band of their first member
    let mut band = vec![0usize; n];
    for k in 0..n {
        band[k] = if k > 0 && scores[order[k]] == scores[order[k - 1]] {
            band[k - 1]
        } else {
            k * bin_num / n
        };
    }
    let mut rows: Vec<GainsRow> = Vec::new();
    let mut bounds: Vec<(f64, f64)> = Vec::new();
    let total_bad = y.iter().filter(|&&b| b).count();
    let (mut cum_count, mut cum_good, mut cum_bad) = (0, 0, 0);
    let mut k = 0;
    while k < n {
        let b = band[k];
        let start = k;
        while k < n && band[k] == b {
            k += 1;
        }
        let members = &order[start..k];
        let bad = members.iter().filter(|&&i| y[i]).count();
        let good = members.len() - bad;
        cum_count += members.len();
        cum_good += good;
        cum_bad += bad;
        bounds.push((scores[order[k - 1]], scores[order[start]]));
        rows.push(GainsRow {
            bin: String::new(),
            count: members.len(),
            cum_count,
            good,
            cum_good,
            bad,
            cum_bad,
            badprob: bad as f64 / members.len() as f64,
            approval_rate: cum_count as f64 / n as f64,
            cum_badprob: cum_bad as f64 / cum_count as f64,
        });
    }
    for (row, (lo, hi)) in rows.iter_mut().zip(&bounds) {
        row.bin = format!("[{lo},{hi}]");
    }
    debug_assert_eq!(cum_bad, total_bad);
    let mut warnings = Vec::new();
    if rows.len() < bin_num {
        warnings.push(format!(
            "ties leave {} score bands instead of {bin_num}",
            rows.len()
        ));
    }
    Ok(GainsTable { rows, warnings })
}
