//! Weight of evidence, information value and population stability.
//!
//! With bad as the event class, a bin `x` gets
//!
//! ```text
//! WoE(x) = ln( f(x | bad) / f(x | good) )
//! IV     = Σ_x ( f(x | bad) − f(x | good) ) · WoE(x)
//! ```
//!
//! where `f(x | c)` is the (weighted) share of class `c` that falls in `x`.
//! A cell whose class mass is exactly zero receives the additive constant
//! `zero_adj` before the shares are normalized, so every WoE stays finite
//! when `zero_adj > 0`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};

/// Label used for missing cells of a binned column.
pub const MISSING_LABEL: &str = "missing";

pub const DEFAULT_ZERO_ADJ: f64 = 0.5;

/// Which class sits in the numerator of the WoE log ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WoeConvention {
    /// `ln(f(x|bad) / f(x|good))`: positive WoE means riskier than average.
    #[default]
    BadOverGood,
    GoodOverBad,
}

/// Class shares, WoE and IV contributions for an ordered set of bins.
#[derive(Clone, Debug, PartialEq)]
pub struct WoeTable {
    pub f_good: Vec<f64>,
    pub f_bad: Vec<f64>,
    pub woe: Vec<f64>,
    pub iv_parts: Vec<f64>,
    pub iv: f64,
}

/// Applies the zero adjustment to one class mass.
#[inline]
pub(crate) fn adjusted(mass: f64, zero_adj: f64) -> f64 {
    if mass == 0.0 {
        zero_adj
    } else {
        mass
    }
}

/// Computes WoE and IV from per-bin `(good, bad)` masses.
pub fn woe_table(counts: &[(f64, f64)], zero_adj: f64, convention: WoeConvention) -> WoeTable {
    let adj: Vec<(f64, f64)> = counts
        .iter()
        .map(|&(g, b)| (adjusted(g, zero_adj), adjusted(b, zero_adj)))
        .collect();
    let tg: f64 = adj.iter().map(|c| c.0).sum();
    let tb: f64 = adj.iter().map(|c| c.1).sum();
    let f_good: Vec<f64> = adj.iter().map(|c| c.0 / tg).collect();
    let f_bad: Vec<f64> = adj.iter().map(|c| c.1 / tb).collect();
    let mut woe = Vec::with_capacity(counts.len());
    let mut iv_parts = Vec::with_capacity(counts.len());
    for (&fg, &fb) in f_good.iter().zip(&f_bad) {
        let (num, den) = match convention {
            WoeConvention::BadOverGood => (fb, fg),
            WoeConvention::GoodOverBad => (fg, fb),
        };
        let w = (num / den).ln();
        woe.push(w);
        iv_parts.push(iv_part(num - den, w));
    }
    let iv = iv_parts.iter().sum();
    WoeTable {
        f_good,
        f_bad,
        woe,
        iv_parts,
        iv,
    }
}

// (f_num − f_den) · ln(f_num / f_den), with the 0·∞ case taken as its limit.
fn iv_part(diff: f64, woe: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff * woe
    }
}

/// Information value of per-bin `(good, bad)` masses.
pub fn information_value(counts: &[(f64, f64)], zero_adj: f64) -> f64 {
    woe_table(counts, zero_adj, WoeConvention::BadOverGood).iv
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WoeBin {
    pub label: String,
    pub n_good: f64,
    pub n_bad: f64,
    pub f_good: f64,
    pub f_bad: f64,
    pub woe: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableWoe {
    pub variable: String,
    pub bins: Vec<WoeBin>,
    pub iv: f64,
}

impl VariableWoe {
    pub fn woe_of(&self, label: &str) -> Option<f64> {
        self.bins.iter().find(|b| b.label == label).map(|b| b.woe)
    }
}

/// Fitted WoE lookup for a set of binned variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WoeMap {
    pub zero_adj: f64,
    pub convention: WoeConvention,
    /// True when observation weights were supplied at fit time.
    pub weighted: bool,
    pub variables: Vec<VariableWoe>,
}

impl WoeMap {
    pub fn variable(&self, name: &str) -> Option<&VariableWoe> {
        self.variables.iter().find(|v| v.variable == name)
    }

    pub fn ivs(&self) -> Vec<(String, f64)> {
        self.variables
            .iter()
            .map(|v| (v.variable.clone(), v.iv))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct WoeOptions {
    pub zero_adj: f64,
    pub convention: WoeConvention,
    /// Columns to fit; all non-target columns when `None`.
    pub columns: Option<Vec<String>>,
}

impl Default for WoeOptions {
    fn default() -> Self {
        WoeOptions {
            zero_adj: DEFAULT_ZERO_ADJ,
            convention: WoeConvention::default(),
            columns: None,
        }
    }
}

/// Fits WoE on categorical (bin label) columns, optionally with observation
/// weights. Missing cells count as the bin [`MISSING_LABEL`].
pub fn fit_woe(binned: &Dataset, weights: Option<&[f64]>, options: &WoeOptions) -> Result<WoeMap> {
    if options.zero_adj < 0.0 || !options.zero_adj.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "zero_adj must be a nonnegative number, got {}",
            options.zero_adj
        )));
    }
    let flags = binned.target_flags()?;
    let n = binned.n_rows();
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} weights supplied for {n} rows",
                w.len()
            )));
        }
        if let Some(i) = w.iter().position(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidWeight(i));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut tg, mut tb) = (0.0, 0.0);
    for (i, &bad) in flags.iter().enumerate() {
        if bad {
            tb += weight(i);
        } else {
            tg += weight(i);
        }
    }
    if tg == 0.0 || tb == 0.0 {
        return Err(Error::Degenerate(
            "all observations belong to one class".into(),
        ));
    }

    let columns = match &options.columns {
        Some(c) => c.clone(),
        None => binned.predictors(),
    };
    let mut variables = Vec::with_capacity(columns.len());
    for name in &columns {
        let col = binned.column(name)?;
        let cells = col
            .as_categorical()
            .ok_or_else(|| col.kind_error(ColumnKind::Categorical))?;
        let mut order: Vec<String> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut masses: Vec<(f64, f64)> = Vec::new();
        for (i, cell) in cells.iter().enumerate() {
            let label = cell.as_deref().unwrap_or(MISSING_LABEL);
            let k = *index.entry(label).or_insert_with(|| {
                order.push(label.to_string());
                masses.push((0.0, 0.0));
                masses.len() - 1
            });
            if flags[i] {
                masses[k].1 += weight(i);
            } else {
                masses[k].0 += weight(i);
            }
        }
        let table = woe_table(&masses, options.zero_adj, options.convention);
        let bins = order
            .into_iter()
            .enumerate()
            .map(|(k, label)| WoeBin {
                label,
                n_good: masses[k].0,
                n_bad: masses[k].1,
                f_good: table.f_good[k],
                f_bad: table.f_bad[k],
                woe: table.woe[k],
            })
            .collect();
        variables.push(VariableWoe {
            variable: name.clone(),
            bins,
            iv: table.iv,
        });
    }
    Ok(WoeMap {
        zero_adj: options.zero_adj,
        convention: options.convention,
        weighted: weights.is_some(),
        variables,
    })
}

/// Name of the WoE column derived from a (possibly `_bin`-suffixed) column.
pub fn woe_column_name(name: &str) -> String {
    format!("{}_woe", name.strip_suffix("_bin").unwrap_or(name))
}

/// Replaces every mapped column by its numeric WoE (`<name>_woe`).
pub fn apply_woe(map: &WoeMap, binned: &Dataset) -> Result<Dataset> {
    let mut out = binned.clone();
    for var in &map.variables {
        let col = binned.column(&var.variable)?;
        let cells = col
            .as_categorical()
            .ok_or_else(|| col.kind_error(ColumnKind::Categorical))?;
        let lookup: HashMap<&str, f64> = var.bins.iter().map(|b| (b.label.as_str(), b.woe)).collect();
        let mut values = Vec::with_capacity(cells.len());
        for cell in cells {
            let label = cell.as_deref().unwrap_or(MISSING_LABEL);
            let w = lookup.get(label).ok_or_else(|| Error::UnknownBin {
                variable: var.variable.clone(),
                label: label.to_string(),
            })?;
            values.push(Some(*w));
        }
        out.replace_column(
            &var.variable,
            Column::numeric(woe_column_name(&var.variable), values),
        )?;
    }
    Ok(out)
}

/// Drift label derived from the PSI value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityLabel {
    Stable,
    Shifting,
    Shifted,
}

impl StabilityLabel {
    pub fn from_psi(psi: f64) -> Self {
        if psi < 0.1 {
            StabilityLabel::Stable
        } else if psi > 0.25 {
            StabilityLabel::Shifted
        } else {
            StabilityLabel::Shifting
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub bin: String,
    pub expected: f64,
    pub actual: f64,
    pub difference: f64,
    pub index: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableStability {
    pub variable: String,
    pub psi: f64,
    pub label: StabilityLabel,
    pub rows: Vec<StabilityRow>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub variables: Vec<VariableStability>,
}

impl StabilityReport {
    pub fn variable(&self, name: &str) -> Option<&VariableStability> {
        self.variables.iter().find(|v| v.variable == name)
    }
}

/// Population stability index of two bin distributions.
///
/// `expected` and `actual` hold `(bin, mass)` pairs over the same bins; the
/// masses may be counts or shares. Zero masses are adjusted with `zero_adj`
/// in the same unit before normalization.
pub fn psi(
    variable: &str,
    expected: &[(String, f64)],
    actual: &[(String, f64)],
    zero_adj: f64,
) -> Result<VariableStability> {
    let mismatch = || {
        Error::InvalidParameter(format!(
            "expected and actual bins of `{variable}` differ"
        ))
    };
    if expected.len() != actual.len() {
        return Err(mismatch());
    }
    let mut pairs = Vec::with_capacity(expected.len());
    for (bin, e) in expected {
        let a = actual
            .iter()
            .find(|(b, _)| b == bin)
            .ok_or_else(mismatch)?
            .1;
        if *e < 0.0 || a < 0.0 {
            return Err(Error::InvalidParameter("negative bin mass".into()));
        }
        pairs.push((bin.clone(), adjusted(*e, zero_adj), adjusted(a, zero_adj)));
    }
    let te: f64 = pairs.iter().map(|p| p.1).sum();
    let ta: f64 = pairs.iter().map(|p| p.2).sum();
    let rows: Vec<StabilityRow> = pairs
        .into_iter()
        .map(|(bin, e, a)| {
            let (e, a) = (e / te, a / ta);
            let difference = a - e;
            StabilityRow {
                bin,
                expected: e,
                actual: a,
                difference,
                index: iv_part(difference, (a / e).ln()),
            }
        })
        .collect();
    let value = rows.iter().map(|r| r.index).sum();
    Ok(VariableStability {
        variable: variable.to_string(),
        psi: value,
        label: StabilityLabel::from_psi(value),
        rows,
    })
}
