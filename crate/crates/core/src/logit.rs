//! Binomial logistic regression for P(bad), fitted by iteratively
//! reweighted least squares, with stepwise selection and variance
//! inflation diagnostics.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Name used for the intercept in diagnostics.
pub const INTERCEPT: &str = "(Intercept)";

/// Coefficient magnitude above which a fit is reported as separated.
pub const SEPARATION_BOUND: f64 = 15.0;

/// Dense design matrix without the intercept column.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    x: DMatrix<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from named columns of equal length.
    pub fn new(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidParameter(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().position(|c| c.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "column `{}` has {} rows, expected {n}",
                names[c],
                columns[c].len()
            )));
        }
        if let Some((name, _)) = names
            .iter()
            .zip(columns)
            .find(|(_, c)| c.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidParameter(format!("column `{name}` has non-finite values")));
        }
        let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Ok(FeatureMatrix { names, x })
    }

    /// Intercept-only design with `n` rows.
    pub fn empty(n: usize) -> Self {
        FeatureMatrix {
            names: Vec::new(),
            x: DMatrix::zeros(n, 0),
        }
    }

    /// Numeric columns `names` of `ds`; missing cells are an error.
    pub fn from_dataset(ds: &Dataset, names: &[String]) -> Result<Self> {
        let mut cols = Vec::with_capacity(names.len());
        for name in names {
            let values = ds.column(name)?.numeric_values()?;
            let col: Option<Vec<f64>> = values.iter().copied().collect();
            cols.push(col.ok_or_else(|| {
                Error::InvalidParameter(format!("column `{name}` has missing values"))
            })?);
        }
        if names.is_empty() {
            return Ok(FeatureMatrix::empty(ds.n_rows()));
        }
        FeatureMatrix::new(names.to_vec(), &cols)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j).iter().copied().collect()
    }

    /// Columns at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            x: self.x.select_columns(idx),
        }
    }

    fn with_intercept(&self) -> DMatrix<f64> {
        let n = self.n_rows();
        let mut d = DMatrix::from_element(n, self.n_cols() + 1, 1.0);
        d.view_mut((0, 1), (n, self.n_cols())).copy_from(&self.x);
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitModel {
    pub intercept: f64,
    pub coefficients: IndexMap<String, f64>,
    pub n_obs: usize,
    pub log_likelihood: f64,
    pub deviance: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl LogitModel {
    pub fn feature_names(&self) -> Vec<String> {
        self.coefficients.keys().cloned().collect()
    }

    /// Number of estimated parameters, intercept included.
    pub fn n_params(&self) -> usize {
        self.coefficients.len() + 1
    }

    /// Deviance plus `k` per parameter (AIC for k = 2, BIC for k = ln n).
    pub fn criterion(&self, k: f64) -> f64 {
        self.deviance + k * self.n_params() as f64
    }

    /// Linear predictor of every row of `x`, matched by column name.
    pub fn linear_predictor(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let mut idx = Vec::with_capacity(self.coefficients.len());
        for name in self.coefficients.keys() {
            idx.push(
                x.names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::UnknownColumn(name.clone()))?,
            );
        }
        let beta: Vec<f64> = self.coefficients.values().copied().collect();
        Ok((0..x.n_rows())
            .map(|i| {
                self.intercept
                    + idx
                        .iter()
                        .zip(&beta)
                        .map(|(&j, b)| b * x.x[(i, j)])
                        .sum::<f64>()
            })
            .collect())
    }

    /// Probability of bad for every row of `x`.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.linear_predictor(x)?.into_iter().map(sigmoid).collect())
    }

    /// Probability of bad for every row of `ds`, reading the model's features.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.predict(&FeatureMatrix::from_dataset(ds, &self.feature_names())?)
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Weighted binomial log-likelihood at linear predictors `eta`.
pub fn log_likelihood(eta: &[f64], y: &[bool], weights: &[f64]) -> f64 {
    eta.iter()
        .zip(y)
        .zip(weights)
        .map(|((&e, &bad), &w)| {
            // ln p = -softplus(-e), ln(1-p) = -softplus(e)
            let ll = if bad { -softplus(-e) } else { -softplus(e) };
            w * ll
        })
        .sum()
}

/// Columns spanning the near-null space of the design, or empty when the
/// design has full column rank.
fn collinear_columns(design: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let p = design.ncols();
    let mut scaled = design.clone();
    for j in 0..p {
        let norm = scaled.column(j).norm();
        if norm > 0.0 {
            scaled.column_mut(j).unscale_mut(norm);
        }
    }
    let svd = scaled.clone().svd(false, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let vt = svd.v_t.as_ref().unwrap();
    let mut out = Vec::new();
    for (k, &sv) in s.iter().enumerate() {
        if sv <= 1e-9 * smax.max(f64::MIN_POSITIVE) {
            for j in 0..p {
                if vt[(k, j)].abs() > 1e-6 {
                    let name = if j == 0 { INTERCEPT.to_string() } else { names[j - 1].clone() };
                    if !out.contains(&name) {
                        out.push(name);
                    }
                }
            }
        }
    }
    // a zero column is collinear with everything
    for j in 0..p {
        if design.column(j).norm() == 0.0 {
            let name = if j == 0 { INTERCEPT.to_string() } else { names[j - 1].clone() };
            if !out.contains(&name) {
                out.push(name);
            }
        }
    }
    out
}

/// Fits P(bad) = 1/(1+exp(−η)) by IRLS with step halving.
pub fn fit_logit(
    x: &FeatureMatrix,
    y: &[bool],
    weights: Option<&[f64]>,
    options: &FitOptions,
) -> Result<LogitModel> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::InvalidParameter(format!("{} labels for {n} rows", y.len())));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != n => {
            return Err(Error::InvalidParameter(format!("{} weights for {n} rows", w.len())))
        }
        Some(w) => {
            if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidWeight(i));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    let p = x.n_cols() + 1;
    let active: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    if active.len() < p {
        return Err(Error::Degenerate(format!(
            "{} weighted rows for {p} parameters",
            active.len()
        )));
    }
    let design = x.with_intercept();
    let bad_mass: f64 = active.iter().filter(|&&i| y[i]).map(|&i| w[i]).sum();
    let total: f64 = active.iter().map(|&i| w[i]).sum();
    if bad_mass == 0.0 || bad_mass == total {
        return Err(Error::Degenerate("all observations belong to one class".into()));
    }
    let collinear = collinear_columns(&design.select_rows(&active), &x.names);
    if !collinear.is_empty() {
        return Err(Error::Singular(collinear));
    }

    let yv = DVector::from_iterator(n, y.iter().map(|&b| f64::from(u8::from(b))));
    let wv = DVector::from_vec(w.clone());
    let mut beta = DVector::zeros(p);
    let rate = bad_mass / total;
    beta[0] = (rate / (1.0 - rate)).ln();
    let eta_of = |b: &DVector<f64>| -> Vec<f64> { (&design * b).iter().copied().collect() };
    let mut deviance = -2.0 * log_likelihood(&eta_of(&beta), y, &w);
    let mut converged = false;
    let mut iterations = 0;
    let mut warnings = Vec::new();
    let mut last_change = f64::INFINITY;

    while iterations < options.max_iter {
        iterations += 1;
        let eta = &design * &beta;
        let mu = eta.map(sigmoid);
        let var = mu.map(|m| (m * (1.0 - m)).max(1e-12));
        // score = Xᵀ W (y − μ), information = Xᵀ diag(w·μ(1−μ)) X
        let resid = (&yv - &mu).component_mul(&wv);
        let score = design.transpose() * resid;
        let wd = var.component_mul(&wv);
        let mut xw = design.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= wd[i];
        }
        let info = design.transpose() * xw;
        let Some(chol) = info.cholesky() else {
            warnings.push("information matrix became singular during iteration".to_string());
            break;
        };
        let step = chol.solve(&score);
        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut new_dev = -2.0 * log_likelihood(&eta_of(&candidate), y, &w);
        let mut halvings = 0;
        while !(new_dev.is_finite() && new_dev <= deviance + 1e-12 * deviance.abs().max(1.0)) && halvings < 30 {
            scale /= 2.0;
            candidate = &beta + &step * scale;
            new_dev = -2.0 * log_likelihood(&eta_of(&candidate), y, &w);
            halvings += 1;
        }
        if !new_dev.is_finite() {
            warnings.push("deviance is not finite".to_string());
            break;
        }
        last_change = (deviance - new_dev).abs();
        beta = candidate;
        deviance = new_dev;
        if last_change < options.tol * (deviance.abs() + 0.1) {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "IRLS did not converge in {} iterations (last deviance change {last_change:.3e})",
            options.max_iter
        ));
    }
    let diverging: Vec<String> = beta
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > SEPARATION_BOUND)
        .map(|(j, _)| if j == 0 { INTERCEPT.to_string() } else { x.names[j - 1].clone() })
        .collect();
    if !diverging.is_empty() {
        converged = false;
        warnings.push(format!(
            "possible separation; diverging coefficients: {}",
            diverging.join(", ")
        ));
    }
    Ok(LogitModel {
        intercept: beta[0],
        coefficients: x
            .names
            .iter()
            .cloned()
            .zip(beta.iter().skip(1).copied())
            .collect(),
        n_obs: n,
        log_likelihood: -deviance / 2.0,
        deviance,
        converged,
        iterations,
        warnings,
    })
}

/// Fits on the numeric columns `features` of an encoded dataset.
pub fn fit_dataset(
    ds: &Dataset,
    features: &[String],
    weights: Option<&[f64]>,
    options: &FitOptions,
) -> Result<LogitModel> {
    let y = ds.target_flags()?;
    fit_logit(&FeatureMatrix::from_dataset(ds, features)?, &y, weights, options)
}

/// Weighted score vector Xᵀ w (y − p) at the model's coefficients,
/// intercept first.
pub fn score_vector(model: &LogitModel, x: &FeatureMatrix, y: &[bool], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let p = model.predict(x)?;
    let mut out = vec![0.0; model.n_params()];
    let idx: Vec<usize> = model
        .coefficients
        .keys()
        .map(|n| x.names.iter().position(|m| m == n).unwrap())
        .collect();
    for i in 0..x.n_rows() {
        let w = weights.map_or(1.0, |w| w[i]);
        let r = w * (f64::from(u8::from(y[i])) - p[i]);
        out[0] += r;
        for (k, &j) in idx.iter().enumerate() {
            out[k + 1] += r * x.x[(i, j)];
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    #[default]
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepwiseSpec {
    /// Penalty per parameter: 2 for AIC, ln n for BIC.
    pub k: f64,
    pub direction: Direction,
    pub scope: Vec<String>,
    pub start: Vec<String>,
    pub max_steps: usize,
    pub fit: FitOptions,
}

impl StepwiseSpec {
    pub fn aic(scope: Vec<String>) -> Self {
        StepwiseSpec {
            k: 2.0,
            direction: Direction::Both,
            scope,
            start: Vec::new(),
            max_steps: 100,
            fit: FitOptions::default(),
        }
    }

    pub fn bic(scope: Vec<String>, n: usize) -> Self {
        StepwiseSpec {
            k: (n as f64).ln(),
            ..StepwiseSpec::aic(scope)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "variable", rename_all = "lowercase")]
pub enum Move {
    Add(String),
    Drop(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateMove {
    #[serde(rename = "move")]
    pub mv: Move,
    pub criterion: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Criterion of the incumbent model before this step.
    pub incumbent: f64,
    pub candidates: Vec<CandidateMove>,
    pub accepted: Option<Move>,
    /// Criterion after the step (equal to `incumbent` when nothing was accepted).
    pub criterion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepwiseResult {
    pub model: LogitModel,
    pub trace: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn has_variance(col: &[Option<f64>]) -> bool {
    let mut it = col.iter().flatten();
    match it.next() {
        None => false,
        Some(first) => it.any(|v| v != first),
    }
}

/// Greedy stepwise selection on the criterion `deviance + k·#params`.
///
/// Each step fits every single add or drop allowed by the direction and
/// applies the move with the lowest criterion if it beats the incumbent.
/// Zero-variance candidates are removed from the scope with a warning.
pub fn stepwise(data: &Dataset, spec: &StepwiseSpec) -> Result<StepwiseResult> {
    if !(spec.k > 0.0 && spec.k.is_finite()) {
        return Err(Error::InvalidParameter(format!("penalty k must be positive, got {}", spec.k)));
    }
    if let Some(s) = spec.start.iter().find(|s| !spec.scope.contains(s)) {
        return Err(Error::InvalidParameter(format!("start variable `{s}` is outside the scope")));
    }
    let y = data.target_flags()?;
    let mut warnings = Vec::new();
    let mut scope = Vec::new();
    for name in &spec.scope {
        if has_variance(data.column(name)?.numeric_values()?) {
            scope.push(name.clone());
        } else {
            warnings.push(format!("`{name}` has zero variance and was dropped from the scope"));
        }
    }
    let all = FeatureMatrix::from_dataset(data, &scope)?;
    let fit = |vars: &[String]| -> Result<LogitModel> {
        let idx: Vec<usize> = vars
            .iter()
            .map(|v| scope.iter().position(|s| s == v).unwrap())
            .collect();
        fit_logit(&all.select(&idx), &y, None, &spec.fit)
    };
    let mut current: Vec<String> = spec.start.iter().filter(|s| scope.contains(s)).cloned().collect();
    let mut model = fit(&current)?;
    let mut trace = Vec::new();
    for step in 1..=spec.max_steps {
        let mut moves = Vec::new();
        if spec.direction != Direction::Backward {
            moves.extend(scope.iter().filter(|v| !current.contains(v)).map(|v| Move::Add(v.clone())));
        }
        if spec.direction != Direction::Forward {
            moves.extend(current.iter().map(|v| Move::Drop(v.clone())));
        }
        if moves.is_empty() {
            break;
        }
        let incumbent = model.criterion(spec.k);
        let fits: Vec<(Vec<String>, Result<LogitModel>)> = moves
            .par_iter()
            .map(|mv| {
                let vars: Vec<String> = match mv {
                    Move::Add(v) => {
                        // keep scope order for reproducible column order
                        scope.iter().filter(|s| current.contains(s) || *s == v).cloned().collect()
                    }
                    Move::Drop(v) => current.iter().filter(|s| *s != v).cloned().collect(),
                };
                let m = fit(&vars);
                (vars, m)
            })
            .collect();
        let mut candidates = Vec::with_capacity(moves.len());
        let mut best: Option<(usize, f64)> = None;
        for (i, (mv, (_, res))) in moves.iter().zip(&fits).enumerate() {
            match res {
                Ok(m) => {
                    let c = m.criterion(spec.k);
                    if best.is_none_or(|(_, b)| c < b) {
                        best = Some((i, c));
                    }
                    candidates.push(CandidateMove { mv: mv.clone(), criterion: Some(c), error: None });
                }
                Err(e) => candidates.push(CandidateMove {
                    mv: mv.clone(),
                    criterion: None,
                    error: Some(e.to_string()),
                }),
            }
        }
        match best {
            Some((i, c)) if c < incumbent => {
                let (vars, res) = fits.into_iter().nth(i).unwrap();
                model = res.unwrap();
                current = vars;
                trace.push(StepRecord {
                    step,
                    incumbent,
                    candidates,
                    accepted: Some(moves[i].clone()),
                    criterion: c,
                });
            }
            _ => {
                trace.push(StepRecord {
                    step,
                    incumbent,
                    candidates,
                    accepted: None,
                    criterion: incumbent,
                });
                break;
            }
        }
    }
    Ok(StepwiseResult { model, trace, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub variable: String,
    pub r_squared: f64,
    /// `None` marks an infinite VIF (exact collinearity).
    pub vif: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub entries: Vec<VifEntry>,
}

/// Variance inflation factors from the OLS regression of every column on
/// the others (with intercept).
pub fn vif(x: &FeatureMatrix) -> Result<VifReport> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if p < 2 {
        return Err(Error::InvalidParameter(format!("vif needs at least 2 columns, got {p}")));
    }
    if n <= p {
        return Err(Error::InvalidParameter(format!("vif needs more rows than columns ({n} ≤ {p})")));
    }
    let mut entries = Vec::with_capacity(p);
    for i in 0..p {
        let target = x.x.column(i).clone_owned();
        let others: Vec<usize> = (0..p).filter(|&j| j != i).collect();
        let design = x.select(&others).with_intercept();
        let mean = target.mean();
        let tss: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
        let svd = design.clone().svd(true, true);
        let coef = svd
            .solve(&target, 1e-12 * svd.singular_values.max())
            .map_err(|e| Error::Degenerate(e.to_string()))?;
        let rss = (&target - &design * coef).norm_squared();
        let r2 = if tss == 0.0 { 1.0 } else { (1.0 - rss / tss).clamp(0.0, 1.0) };
        let vif = if 1.0 - r2 <= 1e-10 { None } else { Some(1.0 / (1.0 - r2)) };
        entries.push(VifEntry {
            variable: x.names[i].clone(),
            r_squared: r2,
            vif,
        });
    }
    Ok(VifReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode_target, seeded_rng, Column, TargetSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn labels(bad: usize, good: usize) -> Vec<bool> {
        let mut y = vec![true; bad];
        y.extend(vec![false; good]);
        y
    }

    #[test]
    fn intercept_only_closed_form() {
        let y = labels(30, 70);
        let m = fit_logit(&FeatureMatrix::empty(100), &y, None, &FitOptions::default()).unwrap();
        assert!((m.intercept - (0.3f64 / 0.7).ln()).abs() < 1e-8);
        assert!(m.converged);
        let p = m.predict(&FeatureMatrix::empty(3)).unwrap();
        assert!(p.iter().all(|v| (v - 0.3).abs() < 1e-8));
    }

    fn two_by_two() -> (FeatureMatrix, Vec<bool>) {
        // x = 0: 40 good, 10 bad; x = 1: 10 good, 40 bad
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (xv, g, b) in [(0.0, 40, 10), (1.0, 10, 40)] {
            for _ in 0..g {
                x.push(xv);
                y.push(false);
            }
            for _ in 0..b {
                x.push(xv);
                y.push(true);
            }
        }
        (FeatureMatrix::new(vec!["x".into()], &[x]).unwrap(), y)
    }

    #[test]
    fn log_odds_ratio_closed_form() {
        let (x, y) = two_by_two();
        let m = fit_logit(&x, &y, None, &FitOptions::default()).unwrap();
        assert!((m.coefficients["x"] - (1600.0f64 / 100.0).ln()).abs() < 1e-8);
        assert!((m.intercept - (10.0f64 / 40.0).ln()).abs() < 1e-8);
        let g = score_vector(&m, &x, &y, None).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6 * 100.0));
    }

    #[test]
    fn weights_scale_deviance_only() {
        let (x, y) = two_by_two();
        let w = vec![10.0; y.len()];
        let a = fit_logit(&x, &y, None, &FitOptions::default()).unwrap();
        let b = fit_logit(&x, &y, Some(&w), &FitOptions::default()).unwrap();
        assert!((a.coefficients["x"] - b.coefficients["x"]).abs() < 1e-8);
        assert!((b.deviance - 10.0 * a.deviance).abs() < 1e-6 * b.deviance);
        assert!(a.deviance >= 0.0);
        assert!((a.deviance + 2.0 * a.log_likelihood).abs() < 1e-12);
    }

    #[test]
    fn prediction_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        let m = LogitModel {
            intercept: 0.0,
            coefficients: [("x".to_string(), 2.0)].into_iter().collect(),
            n_obs: 0,
            log_likelihood: 0.0,
            deviance: 0.0,
            converged: true,
            iterations: 0,
            warnings: vec![],
        };
        let x = FeatureMatrix::new(vec!["x".into()], &[vec![-1.0, 0.0, 1.0]]).unwrap();
        let p = m.predict(&x).unwrap();
        assert_eq!(p[1], 0.5);
        assert!(p[0] < p[1] && p[1] < p[2]);
        let wrong = FeatureMatrix::new(vec!["z".into()], &[vec![1.0]]).unwrap();
        assert!(matches!(m.predict(&wrong), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn collinear_columns_are_named() {
        let a: Vec<f64> = (0..20).map(|i| (i % 5) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v + 1.0).collect();
        let c: Vec<f64> = (0..20).map(|i| (i % 3) as f64).collect();
        let y: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let x = FeatureMatrix::new(vec!["a".into(), "b".into(), "c".into()], &[a, b, c]).unwrap();
        match fit_logit(&x, &y, None, &FitOptions::default()) {
            Err(Error::Singular(cols)) => {
                assert!(cols.contains(&"a".to_string()) && cols.contains(&"b".to_string()));
                assert!(!cols.contains(&"c".to_string()));
            }
            other => panic!("{other:?}"),
        }
        let k = FeatureMatrix::new(vec!["k".into()], &[vec![3.0; 20]]).unwrap();
        assert!(matches!(fit_logit(&k, &y, None, &FitOptions::default()), Err(Error::Singular(_))));
    }

    #[test]
    fn separation_is_flagged() {
        let x = FeatureMatrix::new(vec!["x".into()], &[(0..20).map(|i| i as f64).collect()]).unwrap();
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let m = fit_logit(&x, &y, None, &FitOptions::default()).unwrap();
        assert!(!m.converged);
        assert!(m.warnings.iter().any(|w| w.contains("separation")));
    }

    #[test]
    fn invalid_inputs() {
        let (x, y) = two_by_two();
        assert!(fit_logit(&x, &y[..5], None, &FitOptions::default()).is_err());
        let mut w = vec![1.0; y.len()];
        w[3] = -1.0;
        assert!(matches!(fit_logit(&x, &y, Some(&w), &FitOptions::default()), Err(Error::InvalidWeight(3))));
        assert!(matches!(
            fit_logit(&x, &vec![false; y.len()], None, &FitOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    /// Nelder–Mead maximization of the log-likelihood in (β0, β1).
    fn nelder_mead(f: impl Fn(f64, f64) -> f64, start: (f64, f64)) -> (f64, f64) {
        let mut s = [
            [start.0, start.1],
            [start.0 + 0.5, start.1],
            [start.0, start.1 + 0.5],
        ];
        let g = |p: &[f64; 2]| -f(p[0], p[1]);
        for _ in 0..5000 {
            s.sort_by(|a, b| g(a).total_cmp(&g(b)));
            let c = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
            let at = |t: f64| [c[0] + t * (s[2][0] - c[0]), c[1] + t * (s[2][1] - c[1])];
            let r = at(-1.0);
            if g(&r) < g(&s[0]) {
                let e = at(-2.0);
                s[2] = if g(&e) < g(&r) { e } else { r };
            } else if g(&r) < g(&s[1]) {
                s[2] = r;
            } else {
                let k = at(0.5);
                if g(&k) < g(&s[2]) {
                    s[2] = k;
                } else {
                    for i in 1..3 {
                        s[i] = [(s[i][0] + s[0][0]) / 2.0, (s[i][1] + s[0][1]) / 2.0];
                    }
                }
            }
        }
        s.sort_by(|a, b| g(a).total_cmp(&g(b)));
        (s[0][0], s[0][1])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn irls_matches_direct_maximization(seed in any::<u64>(), b0 in -1.5f64..1.5, b1 in -2.0f64..2.0) {
            let mut rng = seeded_rng(seed);
            let n = 80;
            let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let y: Vec<bool> = xs.iter().map(|x| rng.random::<f64>() < sigmoid(b0 + b1 * x)).collect();
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let x = FeatureMatrix::new(vec!["x".into()], &[xs.clone()]).unwrap();
            let m = fit_logit(&x, &y, None, &FitOptions::default()).unwrap();
            prop_assume!(m.converged);
            let w = vec![1.0; n];
            let ll = |a: f64, b: f64| {
                let eta: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
                log_likelihood(&eta, &y, &w)
            };
            let (a, b) = nelder_mead(ll, (0.0, 0.0));
            prop_assert!((a - m.intercept).abs() < 1e-4, "{} vs {}", a, m.intercept);
            prop_assert!((b - m.coefficients["x"]).abs() < 1e-4, "{} vs {}", b, m.coefficients["x"]);
            let g = score_vector(&m, &x, &y, None).unwrap();
            prop_assert!(g.iter().all(|v| v.abs() < 1e-6 * n as f64));
        }

        #[test]
        fn vif_is_scale_invariant(seed in any::<u64>(), scale in 0.1f64..50.0, shift in -10.0f64..10.0) {
            let mut rng = seeded_rng(seed);
            let a: Vec<f64> = (0..30).map(|_| rng.random()).collect();
            let b: Vec<f64> = a.iter().map(|v| v + rng.random::<f64>()).collect();
            let c: Vec<f64> = (0..30).map(|_| rng.random()).collect();
            let names = vec!["a".to_string(), "b".into(), "c".into()];
            let base = vif(&FeatureMatrix::new(names.clone(), &[a.clone(), b.clone(), c.clone()]).unwrap()).unwrap();
            let moved: Vec<f64> = b.iter().map(|v| v * scale + shift).collect();
            let other = vif(&FeatureMatrix::new(names, &[a, moved, c]).unwrap()).unwrap();
            for (e, f) in base.entries.iter().zip(&other.entries) {
                prop_assert!(e.vif.unwrap() >= 1.0);
                prop_assert!((e.vif.unwrap() - f.vif.unwrap()).abs() < 1e-8 * e.vif.unwrap());
            }
        }
    }

    #[test]
    fn vif_examples() {
        let a = vec![1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0];
        let r = vif(&FeatureMatrix::new(vec!["a".into(), "b".into()], &[a.clone(), b]).unwrap()).unwrap();
        assert!(r.entries.iter().all(|e| (e.vif.unwrap() - 1.0).abs() < 1e-12));
        let dup = vif(&FeatureMatrix::new(vec!["a".into(), "b".into()], &[a.clone(), a.clone()]).unwrap()).unwrap();
        assert!(dup.entries.iter().all(|e| e.vif.is_none()));
        // x2 = x1 + e with e orthogonal to x1 and Var(e) = Var(x1)/3 gives R² = 0.75
        let x1 = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let e: Vec<f64> = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0].iter().map(|v| v / 3f64.sqrt()).collect();
        let x2: Vec<f64> = x1.iter().zip(&e).map(|(a, b)| a + b).collect();
        // oracle: R² of the simple regression is the squared correlation
        let r = crate::preselect::pairwise_pearson(
            &x1.iter().map(|v| Some(*v)).collect::<Vec<_>>(),
            &x2.iter().map(|v| Some(*v)).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((r * r - 0.75).abs() < 1e-12);
        let rep = vif(&FeatureMatrix::new(vec!["x1".into(), "x2".into()], &[x1, x2]).unwrap()).unwrap();
        assert!(rep.entries.iter().all(|e| (e.vif.unwrap() - 4.0).abs() < 1e-9));
        assert!(vif(&FeatureMatrix::new(vec!["a".into()], &[a]).unwrap()).is_err());
    }

    fn stepwise_data(seed: u64) -> Dataset {
        let mut rng = seeded_rng(seed);
        let n = 400;
        let signal: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<&str> = signal
            .iter()
            .map(|s| if rng.random::<f64>() < sigmoid(-0.5 + 2.5 * s) { "bad" } else { "good" })
            .collect();
        let ds = Dataset::new(vec![
            Column::from_f64("signal", &signal),
            Column::from_f64("noise", &noise),
            Column::from_f64("flat", &vec![0.5; n]),
            Column::from_strs("y", &y),
        ])
        .unwrap();
        encode_target(&ds, &TargetSpec::new("y", "bad", "good")).unwrap()
    }

    #[test]
    fn stepwise_selects_the_signal() {
        let ds = stepwise_data(11);
        let spec = StepwiseSpec::bic(vec!["signal".into(), "noise".into(), "flat".into()], ds.n_rows());
        let r = stepwise(&ds, &spec).unwrap();
        assert_eq!(r.model.feature_names(), vec!["signal"]);
        assert!(r.warnings.iter().any(|w| w.contains("flat")));
        let accepted: Vec<f64> = r.trace.iter().filter(|s| s.accepted.is_some()).map(|s| s.criterion).collect();
        assert!(accepted.windows(2).all(|w| w[1] < w[0]));
        assert!(r.trace.iter().all(|s| s.accepted.is_none() || s.criterion < s.incumbent));
        assert!(r.trace.last().unwrap().accepted.is_none());
    }

    #[test]
    fn stepwise_trivial_cases() {
        let ds = stepwise_data(3);
        let empty = stepwise(&ds, &StepwiseSpec::aic(vec![])).unwrap();
        assert!(empty.trace.is_empty());
        assert!(empty.model.coefficients.is_empty());
        let scope = vec!["signal".to_string(), "noise".into()];
        let mut spec = StepwiseSpec::aic(scope.clone());
        spec.direction = Direction::Forward;
        spec.start = scope.clone();
        let full = stepwise(&ds, &spec).unwrap();
        assert!(full.trace.is_empty());
        assert_eq!(full.model.feature_names(), scope);
        spec.start = vec!["other".into()];
        assert!(stepwise(&ds, &spec).is_err());
        spec.k = 0.0;
        assert!(stepwise(&ds, &spec).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let (x, y) = two_by_two();
        let m = fit_logit(&x, &y, None, &FitOptions::default()).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"coefficients\":{\"x\":"));
        assert_eq!(serde_json::from_str::<LogitModel>(&text).unwrap(), m);
    }
}
