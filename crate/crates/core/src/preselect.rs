//! Variable preselection filters.
//!
//! Each filter returns a [`FilterReport`]; reports from several filters are
//! combined with [`FilterReport::merge`], where a variable survives only if
//! every filter kept it.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::woe::StabilityReport;

pub const DEFAULT_IV_THRESHOLD: f64 = 0.02;
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRule {
    Iv,
    Psi,
    Correlation,
    CramersV,
    MissingRatio,
}

impl std::fmt::Display for FilterRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FilterRule::Iv => "iv",
            FilterRule::Psi => "psi",
            FilterRule::Correlation => "correlation",
            FilterRule::CramersV => "cramers_v",
            FilterRule::MissingRatio => "missing_ratio",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterEntry {
    pub variable: String,
    pub iv: Option<f64>,
    pub psi: Option<f64>,
    pub missing_ratio: Option<f64>,
    pub kept: bool,
    pub reason: Option<String>,
}

impl FilterEntry {
    fn new(variable: &str) -> Self {
        FilterEntry {
            variable: variable.to_string(),
            iv: None,
            psi: None,
            missing_ratio: None,
            kept: true,
            reason: None,
        }
    }
}

/// A single drop decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub variable: String,
    pub rule: FilterRule,
    pub threshold: f64,
    /// The statistic that crossed the threshold.
    pub value: f64,
    /// The other member of the pair, for pairwise rules.
    pub partner: Option<String>,
}

impl FilterDecision {
    fn reason(&self) -> String {
        match &self.partner {
            Some(p) => format!(
                "{} {:.4} with `{p}` exceeds {}",
                self.rule, self.value, self.threshold
            ),
            None => match self.rule {
                FilterRule::Iv => format!("iv {:.4} below {}", self.value, self.threshold),
                _ => format!("{} {:.4} above {}", self.rule, self.value, self.threshold),
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub entries: Vec<FilterEntry>,
    pub decisions: Vec<FilterDecision>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FilterReport {
    fn with_variables<S: AsRef<str>>(names: &[S]) -> Self {
        FilterReport {
            entries: names.iter().map(|n| FilterEntry::new(n.as_ref())).collect(),
            ..Default::default()
        }
    }

    fn entry_mut(&mut self, name: &str) -> &mut FilterEntry {
        let i = self.entries.iter().position(|e| e.variable == name).unwrap();
        &mut self.entries[i]
    }

    fn drop(&mut self, decision: FilterDecision) {
        let reason = decision.reason();
        let e = self.entry_mut(&decision.variable);
        if e.kept {
            e.kept = false;
            e.reason = Some(reason);
            self.decisions.push(decision);
        }
    }

    pub fn entry(&self, name: &str) -> Option<&FilterEntry> {
        self.entries.iter().find(|e| e.variable == name)
    }

    pub fn kept(&self) -> Vec<String> {
        self.entries.iter().filter(|e| e.kept).map(|e| e.variable.clone()).collect()
    }

    pub fn dropped(&self) -> Vec<String> {
        self.entries.iter().filter(|e| !e.kept).map(|e| e.variable.clone()).collect()
    }

    /// Combines two reports. Statistics are taken from whichever report has
    /// them; a variable dropped by either is dropped, with the first reason.
    pub fn merge(&self, other: &FilterReport) -> FilterReport {
        let mut out = self.clone();
        for e in &other.entries {
            match out.entries.iter_mut().find(|x| x.variable == e.variable) {
                Some(x) => {
                    x.iv = x.iv.or(e.iv);
                    x.psi = x.psi.or(e.psi);
                    x.missing_ratio = x.missing_ratio.or(e.missing_ratio);
                    if x.kept && !e.kept {
                        x.kept = false;
                        x.reason = e.reason.clone();
                    }
                }
                None => out.entries.push(e.clone()),
            }
        }
        for d in &other.decisions {
            let dropped_here = self
                .entry(&d.variable)
                .is_some_and(|e| !e.kept);
            if !dropped_here {
                out.decisions.push(d.clone());
            }
        }
        out.warnings.extend(other.warnings.iter().cloned());
        out
    }
}

/// Drops variables whose IV is below `threshold`.
pub fn iv_filter(ivs: &[(String, f64)], threshold: f64) -> Result<FilterReport> {
    if let Some((n, v)) = ivs.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter(format!("iv of `{n}` is {v}")));
    }
    let names: Vec<&str> = ivs.iter().map(|(n, _)| n.as_str()).collect();
    let mut report = FilterReport::with_variables(&names);
    for (name, iv) in ivs {
        report.entry_mut(name).iv = Some(*iv);
        if *iv < threshold {
            report.drop(FilterDecision {
                variable: name.clone(),
                rule: FilterRule::Iv,
                threshold,
                value: *iv,
                partner: None,
            });
        }
    }
    Ok(report)
}

/// Drops variables whose population stability index exceeds `max_psi`.
pub fn psi_filter(stability: &StabilityReport, max_psi: f64) -> FilterReport {
    let names: Vec<&str> = stability.variables.iter().map(|v| v.variable.as_str()).collect();
    let mut report = FilterReport::with_variables(&names);
    for v in &stability.variables {
        report.entry_mut(&v.variable).psi = Some(v.psi);
        if v.psi > max_psi {
            report.drop(FilterDecision {
                variable: v.variable.clone(),
                rule: FilterRule::Psi,
                threshold: max_psi,
                value: v.psi,
                partner: None,
            });
        }
    }
    report
}

/// Drops variables whose share of missing cells exceeds `max_ratio`.
pub fn missing_filter(ds: &Dataset, max_ratio: f64) -> FilterReport {
    let names = ds.predictors();
    let mut report = FilterReport::with_variables(&names);
    let n = ds.n_rows().max(1) as f64;
    for name in &names {
        let ratio = ds.column(name).unwrap().missing_count() as f64 / n;
        report.entry_mut(name).missing_ratio = Some(ratio);
        if ratio > max_ratio {
            report.drop(FilterDecision {
                variable: name.clone(),
                rule: FilterRule::MissingRatio,
                threshold: max_ratio,
                value: ratio,
                partner: None,
            });
        }
    }
    report
}

/// Pearson correlation over rows where both cells are present; `None` when
/// either side has no variance.
pub fn pairwise_pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn is_constant(x: &[Option<f64>]) -> bool {
    let mut present = x.iter().flatten();
    match present.next() {
        None => true,
        Some(first) => present.all(|v| v == first),
    }
}

/// Removes one member of every highly correlated pair of numeric
/// (typically WoE) columns.
///
/// While some pair has `|r| >= threshold`, the member of the strongest pair
/// with the larger mean absolute correlation to the remaining variables is
/// dropped; equal means drop the lexicographically later name. Constant
/// columns are kept and excluded from the matrix.
pub fn correlation_filter(woe_data: &Dataset, threshold: f64) -> Result<FilterReport> {
    if woe_data.n_rows() < 3 {
        return Err(Error::Degenerate(format!(
            "correlation filter needs at least 3 rows, got {}",
            woe_data.n_rows()
        )));
    }
    let mut names = woe_data.predictors();
    names.sort();
    let mut report = FilterReport::with_variables(&names);
    let mut active = Vec::new();
    let mut cols = Vec::new();
    for name in &names {
        let values = woe_data.column(name)?.numeric_values()?;
        if is_constant(values) {
            report
                .warnings
                .push(format!("`{name}` is constant; correlation undefined, kept"));
        } else {
            active.push(name.clone());
            cols.push(values);
        }
    }
    let k = active.len();
    let mut r = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let v = pairwise_pearson(cols[i], cols[j]).unwrap_or(0.0).abs();
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    let mut alive = vec![true; k];
    loop {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..k {
            for j in i + 1..k {
                if alive[i] && alive[j] && r[i][j] >= threshold && best.is_none_or(|(a, b)| r[i][j] > r[a][b]) {
                    best = Some((i, j));
                }
            }
        }
        let Some((i, j)) = best else { break };
        let mean = |a: usize| {
            let others: Vec<f64> = (0..k).filter(|&b| b != a && alive[b]).map(|b| r[a][b]).collect();
            others.iter().sum::<f64>() / others.len() as f64
        };
        let (mi, mj) = (mean(i), mean(j));
        // names are sorted, so j is the later name
        let (drop, keep) = if mi > mj { (i, j) } else { (j, i) };
        alive[drop] = false;
        report.drop(FilterDecision {
            variable: active[drop].clone(),
            rule: FilterRule::Correlation,
            threshold,
            value: r[i][j],
            partner: Some(active[keep].clone()),
        });
    }
    Ok(report)
}

/// Cramér's V of two categorical columns over rows where both are present.
/// A column with a single level yields 0.
pub fn cramers_v(x: &[Option<String>], y: &[Option<String>]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "columns differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let mut table: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    let mut rows: BTreeMap<&str, f64> = BTreeMap::new();
    let mut cols: BTreeMap<&str, f64> = BTreeMap::new();
    let mut n = 0.0;
    for (a, b) in x.iter().zip(y) {
        if let (Some(a), Some(b)) = (a, b) {
            *table.entry((a, b)).or_default() += 1.0;
            *rows.entry(a).or_default() += 1.0;
            *cols.entry(b).or_default() += 1.0;
            n += 1.0;
        }
    }
    let m = rows.len().min(cols.len());
    if m < 2 {
        return Ok(0.0);
    }
    let mut chi2 = 0.0;
    for (a, ra) in &rows {
        for (b, cb) in &cols {
            let e = ra * cb / n;
            let o = table.get(&(*a, *b)).copied().unwrap_or(0.0);
            chi2 += (o - e) * (o - e) / e;
        }
    }
    Ok((chi2 / (n * (m - 1) as f64)).sqrt().min(1.0))
}

/// For every pair of categorical columns with Cramér's V above `threshold`,
/// drops the member with the lower IV (pairs in descending V order; equal
/// IVs drop the lexicographically later name).
pub fn cv_filter(binned: &Dataset, ivs: &[(String, f64)], threshold: f64) -> Result<FilterReport> {
    let iv: HashMap<&str, f64> = ivs.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let mut names = binned.predictors();
    names.sort();
    for n in &names {
        if !iv.contains_key(n.as_str()) {
            return Err(Error::UnknownVariable(format!("{n} (no iv supplied)")));
        }
    }
    let mut report = FilterReport::with_variables(&names);
    let cols = names
        .iter()
        .map(|n| binned.column(n)?.categorical_values())
        .collect::<Result<Vec<_>>>()?;
    for (i, n) in names.iter().enumerate() {
        report.entry_mut(n).iv = Some(iv[n.as_str()]);
        if cols[i].iter().flatten().collect::<std::collections::HashSet<_>>().len() < 2 {
            report.warnings.push(format!("`{n}` has a single level; Cramér's V set to 0"));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let v = cramers_v(cols[i], cols[j])?;
            if v > threshold {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut alive = vec![true; names.len()];
    for (v, i, j) in pairs {
        if !alive[i] || !alive[j] {
            continue;
        }
        let (drop, keep) = if iv[names[i].as_str()] < iv[names[j].as_str()] { (i, j) } else { (j, i) };
        alive[drop] = false;
        report.drop(FilterDecision {
            variable: names[drop].clone(),
            rule: FilterRule::CramersV,
            threshold,
            value: v,
            partner: Some(names[keep].clone()),
        });
    }
    Ok(report)
}
