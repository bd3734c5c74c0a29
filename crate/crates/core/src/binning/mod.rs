//! Supervised binning of numeric and categorical variables.
//!
//! A fitted [`BinningModel`] stores, for every variable, the bin rule
//! (ascending cut points or a partition of levels), the per-bin summary and
//! the per-value training counts the rule was derived from. Keeping the
//! counts lets [`BinningModel::set_breaks`] rebin a variable without the
//! original data.
//!
//! Numeric bins are left-closed and right-open: the breaks `b1 < … < bk`
//! define `[-Inf,b1), [b1,b2), …, [bk,Inf)`.

mod algorithms;
mod rare;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use rare::{bundle_rare_levels, LevelMapping, MISC_NEG, MISC_POS};

use crate::data::{format_number, Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::woe::{self, psi, StabilityReport, WoeConvention, MISSING_LABEL};
use algorithms::{Cell, GroupingConfig};

/// Current version of the model JSON document.
pub const MODEL_VERSION: u32 = 1;

/// Separator joining the levels of a categorical bin.
pub const LEVEL_SEPARATOR: &str = "%,%";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningMethod {
    #[default]
    Tree,
    Chimerge,
    EqualWidth,
    EqualFreq,
    WoeMerge,
}

impl std::str::FromStr for BinningMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "tree" => Ok(BinningMethod::Tree),
            "chimerge" => Ok(BinningMethod::Chimerge),
            "equal_width" => Ok(BinningMethod::EqualWidth),
            "equal_freq" => Ok(BinningMethod::EqualFreq),
            "woe_merge" => Ok(BinningMethod::WoeMerge),
            other => Err(Error::InvalidParameter(format!(
                "unknown binning method `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotone {
    #[default]
    None,
    Increasing,
    Decreasing,
    Auto,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    OwnBin,
    MergeNearest,
}

/// Handling of categorical levels (and missing cells) never seen in training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnseenPolicy {
    #[default]
    Error,
    /// Route to the missing bin; fails when the variable has none.
    MissingBin,
    /// Assign WoE 0 (bin label `unseen`).
    Neutral,
}

/// Bin label emitted for rows mapped by [`UnseenPolicy::Neutral`].
pub const UNSEEN_LABEL: &str = "unseen";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinningParams {
    pub method: BinningMethod,
    pub min_bin_fraction: f64,
    pub stop_limit: f64,
    pub max_bins: usize,
    pub monotone: Monotone,
    pub rare_level_threshold: f64,
    pub missing_policy: MissingPolicy,
    pub zero_adj: f64,
    /// Significance level of the χ² tests in `tree` and `chimerge`.
    pub alpha: f64,
    pub convention: WoeConvention,
    /// Clamp the missing bin's WoE so it is never better than neutral.
    pub conservative_missing: bool,
}

impl Default for BinningParams {
    fn default() -> Self {
        BinningParams {
            method: BinningMethod::Tree,
            min_bin_fraction: 0.05,
            stop_limit: 0.10,
            max_bins: 8,
            monotone: Monotone::None,
            rare_level_threshold: 0.01,
            missing_policy: MissingPolicy::OwnBin,
            zero_adj: woe::DEFAULT_ZERO_ADJ,
            alpha: 0.05,
            convention: WoeConvention::BadOverGood,
            conservative_missing: false,
        }
    }
}

impl BinningParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.min_bin_fraction > 0.0 && self.min_bin_fraction < 0.5) {
            return bad(format!(
                "min_bin_fraction must lie in (0, 0.5), got {}",
                self.min_bin_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.stop_limit) {
            return bad(format!("stop_limit must lie in [0, 1), got {}", self.stop_limit));
        }
        if self.max_bins < 2 {
            return bad(format!("max_bins must be at least 2, got {}", self.max_bins));
        }
        if !(0.0..1.0).contains(&self.rare_level_threshold) {
            return bad(format!(
                "rare_level_threshold must lie in [0, 1), got {}",
                self.rare_level_threshold
            ));
        }
        if !(self.zero_adj >= 0.0 && self.zero_adj.is_finite()) {
            return bad(format!("zero_adj must be nonnegative, got {}", self.zero_adj));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }
}

/// How a variable's values map to bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BinRule {
    Numeric { breaks: Vec<f64> },
    Categorical { groups: Vec<Vec<String>> },
}

impl BinRule {
    pub fn kind(&self) -> ColumnKind {
        match self {
            BinRule::Numeric { .. } => ColumnKind::Numeric,
            BinRule::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    /// Number of value (non-missing) bins.
    pub fn n_value_bins(&self) -> usize {
        match self {
            BinRule::Numeric { breaks } => breaks.len() + 1,
            BinRule::Categorical { groups } => groups.len(),
        }
    }

    pub fn value_labels(&self) -> Vec<String> {
        match self {
            BinRule::Numeric { breaks } => {
                let mut edges = vec![f64::NEG_INFINITY];
                edges.extend_from_slice(breaks);
                edges.push(f64::INFINITY);
                edges
                    .windows(2)
                    .map(|w| format!("[{},{})", format_number(w[0]), format_number(w[1])))
                    .collect()
            }
            BinRule::Categorical { groups } => {
                groups.iter().map(|g| g.join(LEVEL_SEPARATOR)).collect()
            }
        }
    }
}

/// Where missing values go.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "bin", rename_all = "snake_case")]
pub enum MissingBin {
    /// No missing values in training.
    #[default]
    None,
    /// A dedicated bin after the value bins.
    OwnBin,
    /// Pooled with the value bin at this index.
    MergedInto(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericAtom {
    pub value: f64,
    pub good: u64,
    pub bad: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelAtom {
    pub level: String,
    pub good: u64,
    pub bad: u64,
}

/// Training counts per distinct value (numeric) or level (categorical).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "atoms", rename_all = "lowercase")]
pub enum TrainingAtoms {
    Numeric(Vec<NumericAtom>),
    Categorical(Vec<LevelAtom>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingCounts {
    pub atoms: TrainingAtoms,
    pub missing_good: u64,
    pub missing_bad: u64,
}

impl TrainingCounts {
    fn has_missing(&self) -> bool {
        self.missing_good + self.missing_bad > 0
    }

    fn total(&self) -> u64 {
        let atoms: u64 = match &self.atoms {
            TrainingAtoms::Numeric(a) => a.iter().map(|x| x.good + x.bad).sum(),
            TrainingAtoms::Categorical(a) => a.iter().map(|x| x.good + x.bad).sum(),
        };
        atoms + self.missing_good + self.missing_bad
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub bin: String,
    pub count: u64,
    pub count_distr: f64,
    pub good: u64,
    pub bad: u64,
    pub badprob: f64,
    pub woe: f64,
    pub bin_iv: f64,
    #[serde(default)]
    pub is_missing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableBinning {
    pub name: String,
    pub rule: BinRule,
    pub missing: MissingBin,
    pub bins: Vec<BinStats>,
    pub total_iv: f64,
    /// Non-fatal conditions met while binning (e.g. constant variable).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub training: TrainingCounts,
}

/// One row of a bin summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSummaryRow {
    pub variable: String,
    pub bin: String,
    pub count: u64,
    pub count_distr: f64,
    pub good: u64,
    pub bad: u64,
    pub badprob: f64,
    pub woe: f64,
    pub bin_iv: f64,
    pub total_iv: f64,
}

/// Value-to-bin mapping of one variable, detached from training statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub variable: String,
    pub rule: BinRule,
    pub missing: MissingBin,
}

impl BinMapper {
    pub fn assign(&self, column: &Column, row: usize, unseen: UnseenPolicy) -> Result<Assignment> {
        assign_cell(&self.variable, &self.rule, self.missing, column, row, unseen)
    }
}

fn missing_index(rule: &BinRule, missing: MissingBin) -> Option<usize> {
    match missing {
        MissingBin::None => None,
        MissingBin::OwnBin => Some(rule.n_value_bins()),
        MissingBin::MergedInto(i) => Some(i),
    }
}

impl BinRule {
    fn value_bin(&self, value: Value<'_>) -> Option<usize> {
        match (self, value) {
            (BinRule::Numeric { breaks }, Value::Number(x)) => {
                Some(breaks.partition_point(|&b| b <= x))
            }
            (BinRule::Categorical { groups }, Value::Level(l)) => {
                groups.iter().position(|g| g.iter().any(|x| x == l))
            }
            _ => None,
        }
    }
}

fn assign_cell(
    name: &str,
    rule: &BinRule,
    missing: MissingBin,
    column: &Column,
    row: usize,
    unseen: UnseenPolicy,
) -> Result<Assignment> {
    if column.kind() != rule.kind() {
        return Err(column.kind_error(rule.kind()));
    }
    let value = match (column.as_numeric(), column.as_categorical()) {
        (Some(v), _) => v[row].map(Value::Number),
        (_, Some(v)) => v[row].as_deref().map(Value::Level),
        _ => unreachable!(),
    };
    let missing_route = |level: Option<&str>| -> Result<Assignment> {
        match (missing_index(rule, missing), unseen, level) {
            (Some(i), _, None) => Ok(Assignment::Bin(i)),
            (_, UnseenPolicy::Neutral, _) => Ok(Assignment::Neutral),
            (Some(i), UnseenPolicy::MissingBin, Some(_)) => Ok(Assignment::Bin(i)),
            (_, _, Some(l)) => Err(Error::UnseenLevel {
                variable: name.to_string(),
                level: l.to_string(),
            }),
            (None, _, None) => Err(Error::UnbinnableMissing(name.to_string())),
        }
    };
    match value {
        None => missing_route(None),
        Some(v) => match rule.value_bin(v) {
            Some(i) => Ok(Assignment::Bin(i)),
            None => match v {
                Value::Level(l) => missing_route(Some(l)),
                Value::Number(_) => unreachable!("numeric bins are exhaustive"),
            },
        },
    }
}

/// Result of mapping a single cell through a variable's bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assignment {
    Bin(usize),
    Neutral,
}

impl VariableBinning {
    pub fn kind(&self) -> ColumnKind {
        self.rule.kind()
    }

    pub fn labels(&self) -> Vec<String> {
        self.bins.iter().map(|b| b.bin.clone()).collect()
    }

    pub fn has_missing_bin(&self) -> bool {
        self.missing != MissingBin::None
    }

    fn missing_index(&self) -> Option<usize> {
        missing_index(&self.rule, self.missing)
    }

    /// Known training levels (categorical variables only).
    pub fn known_levels(&self) -> Vec<String> {
        match &self.training.atoms {
            TrainingAtoms::Categorical(a) => a.iter().map(|x| x.level.clone()).collect(),
            TrainingAtoms::Numeric(_) => Vec::new(),
        }
    }

    fn value_bin(&self, value: Value<'_>) -> Option<usize> {
        self.rule.value_bin(value)
    }

    /// Bin of row `row` of `column`.
    pub fn assign(&self, column: &Column, row: usize, unseen: UnseenPolicy) -> Result<Assignment> {
        assign_cell(&self.name, &self.rule, self.missing, column, row, unseen)
    }

    /// The rule part of this binning, without statistics.
    pub fn mapper(&self) -> BinMapper {
        BinMapper {
            variable: self.name.clone(),
            rule: self.rule.clone(),
            missing: self.missing,
        }
    }

    pub fn summary(&self) -> Vec<BinSummaryRow> {
        self.bins
            .iter()
            .map(|b| BinSummaryRow {
                variable: self.name.clone(),
                bin: b.bin.clone(),
                count: b.count,
                count_distr: b.count_distr,
                good: b.good,
                bad: b.bad,
                badprob: b.badprob,
                woe: b.woe,
                bin_iv: b.bin_iv,
                total_iv: self.total_iv,
            })
            .collect()
    }

    /// Bad rates of the value bins are monotone (ties allowed).
    pub fn is_monotone(&self) -> bool {
        let rates: Vec<f64> = self.bins.iter().filter(|b| !b.is_missing).map(|b| b.badprob).collect();
        rates.windows(2).all(|w| w[1] >= w[0]) || rates.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Clone, Copy)]
enum Value<'a> {
    Number(f64),
    Level(&'a str),
}

/// New bin rule for one variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinEdit {
    Breaks(Vec<f64>),
    Groups(Vec<Vec<String>>),
}

/// Scorecard-style breaks list: numbers for numeric variables, `%,%`-joined
/// level strings for categorical ones.
pub type BreaksList = BTreeMap<String, Vec<BreakItem>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BreakItem {
    Number(f64),
    Group(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApplyTarget {
    #[default]
    Bin,
    Woe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningModel {
    pub version: u32,
    pub params: BinningParams,
    /// Bad rate of the training data.
    pub bad_rate: f64,
    pub variables: Vec<VariableBinning>,
}

impl BinningModel {
    pub fn variable(&self, name: &str) -> Result<&VariableBinning> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// The model restricted to `names`, in the given order.
    pub fn subset(&self, names: &[String]) -> Result<BinningModel> {
        let variables = names.iter().map(|n| self.variable(n).cloned()).collect::<Result<_>>()?;
        Ok(BinningModel {
            variables,
            ..self.clone()
        })
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Summary table of one variable, in bin order.
    pub fn summary(&self, name: &str) -> Result<Vec<BinSummaryRow>> {
        Ok(self.variable(name)?.summary())
    }

    pub fn ivs(&self) -> Vec<(String, f64)> {
        self.variables
            .iter()
            .map(|v| (v.name.clone(), v.total_iv))
            .collect()
    }

    fn replaced(&self, var: VariableBinning) -> BinningModel {
        let mut out = self.clone();
        let slot = out.variables.iter_mut().find(|v| v.name == var.name).unwrap();
        *slot = var;
        out
    }

    /// Rebins `name` with a manual rule on the stored training counts.
    pub fn set_breaks(&self, name: &str, edit: &BinEdit) -> Result<BinningModel> {
        let current = self.variable(name)?;
        let invalid = |reason: String| Error::InvalidBreaks {
            variable: name.to_string(),
            reason,
        };
        let rule = match (&current.rule, edit) {
            (BinRule::Numeric { .. }, BinEdit::Breaks(b)) => {
                if b.iter().any(|x| !x.is_finite()) {
                    return Err(invalid("breaks must be finite".into()));
                }
                if b.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("breaks must be strictly ascending".into()));
                }
                BinRule::Numeric { breaks: b.clone() }
            }
            (BinRule::Numeric { .. }, BinEdit::Groups(g)) if g.is_empty() => {
                BinRule::Numeric { breaks: Vec::new() }
            }
            (BinRule::Categorical { .. }, BinEdit::Groups(g)) => {
                validate_groups(g, &current.known_levels()).map_err(invalid)?;
                BinRule::Categorical { groups: g.clone() }
            }
            (BinRule::Categorical { .. }, BinEdit::Breaks(b)) if b.is_empty() => {
                return Err(invalid("categorical variables need level groups".into()))
            }
            (BinRule::Numeric { .. }, BinEdit::Groups(_)) => {
                return Err(invalid("numeric variables need cut points".into()))
            }
            (BinRule::Categorical { .. }, BinEdit::Breaks(_)) => {
                return Err(invalid("categorical variables need level groups".into()))
            }
        };
        let missing = match current.missing {
            MissingBin::MergedInto(_) => {
                // re-resolve the nearest bin under the new rule
                let probe = build_variable(name, rule.clone(), MissingBin::OwnBin, &current.training, &self.params, Vec::new());
                nearest_missing_target(&probe)
            }
            m => m,
        };
        let var = build_variable(name, rule, missing, &current.training, &self.params, current.warnings.clone());
        Ok(self.replaced(var))
    }

    /// Merges adjacent bins of a numeric variable until bad rates are monotone.
    pub fn enforce_monotone(&self, name: &str, direction: Monotone) -> Result<BinningModel> {
        let current = self.variable(name)?;
        let var = monotone_variable(current, direction, &self.params)?;
        Ok(self.replaced(var))
    }

    /// Maps the model's variables in `ds` to bin labels (`<v>_bin`) or
    /// training WoE (`<v>_woe`). Variables absent from `ds` are an error.
    pub fn apply(&self, ds: &Dataset, to: ApplyTarget, unseen: UnseenPolicy) -> Result<Dataset> {
        let mut out = ds.clone();
        for var in &self.variables {
            let col = ds.column(&var.name)?;
            let labels = var.labels();
            let new = match to {
                ApplyTarget::Bin => {
                    let mut cells = Vec::with_capacity(ds.n_rows());
                    for row in 0..ds.n_rows() {
                        cells.push(Some(match var.assign(col, row, unseen)? {
                            Assignment::Bin(i) => labels[i].clone(),
                            Assignment::Neutral => UNSEEN_LABEL.to_string(),
                        }));
                    }
                    Column::categorical(format!("{}_bin", var.name), cells)
                }
                ApplyTarget::Woe => {
                    let mut cells = Vec::with_capacity(ds.n_rows());
                    for row in 0..ds.n_rows() {
                        cells.push(Some(match var.assign(col, row, unseen)? {
                            Assignment::Bin(i) => var.bins[i].woe,
                            Assignment::Neutral => 0.0,
                        }));
                    }
                    Column::numeric(format!("{}_woe", var.name), cells)
                }
            };
            out.replace_column(&var.name, new)?;
        }
        Ok(out)
    }

    /// Per-bin row counts of `ds` for one variable (unseen rows under
    /// [`UnseenPolicy::Neutral`] are counted separately).
    pub fn bin_counts(&self, name: &str, ds: &Dataset, unseen: UnseenPolicy) -> Result<(Vec<u64>, u64)> {
        let var = self.variable(name)?;
        let col = ds.column(name)?;
        let mut counts = vec![0u64; var.bins.len()];
        let mut neutral = 0;
        for row in 0..ds.n_rows() {
            match var.assign(col, row, unseen)? {
                Assignment::Bin(i) => counts[i] += 1,
                Assignment::Neutral => neutral += 1,
            }
        }
        Ok((counts, neutral))
    }

    /// Population stability of every variable's bin distribution between a
    /// base sample and a new sample.
    pub fn stability(&self, base: &Dataset, new: &Dataset) -> Result<StabilityReport> {
        let mut report = StabilityReport::default();
        for var in &self.variables {
            let (e, en) = self.bin_counts(&var.name, base, UnseenPolicy::Neutral)?;
            let (a, an) = self.bin_counts(&var.name, new, UnseenPolicy::Neutral)?;
            let mut labels = var.labels();
            let mut e: Vec<f64> = e.into_iter().map(|c| c as f64).collect();
            let mut a: Vec<f64> = a.into_iter().map(|c| c as f64).collect();
            if en + an > 0 {
                labels.push(UNSEEN_LABEL.to_string());
                e.push(en as f64);
                a.push(an as f64);
            }
            let pair = |v: Vec<f64>| labels.iter().cloned().zip(v).collect::<Vec<_>>();
            report
                .variables
                .push(psi(&var.name, &pair(e), &pair(a), self.params.zero_adj)?);
        }
        Ok(report)
    }

    /// Scorecard-style breaks list of every variable.
    pub fn breaks_list(&self) -> BreaksList {
        self.variables
            .iter()
            .map(|v| {
                let items = match &v.rule {
                    BinRule::Numeric { breaks } => breaks.iter().map(|b| BreakItem::Number(*b)).collect(),
                    BinRule::Categorical { groups } => groups
                        .iter()
                        .map(|g| BreakItem::Group(g.join(LEVEL_SEPARATOR)))
                        .collect(),
                };
                (v.name.clone(), items)
            })
            .collect()
    }

    /// Applies every entry of a breaks list through [`Self::set_breaks`].
    pub fn apply_breaks_list(&self, list: &BreaksList) -> Result<BinningModel> {
        let mut model = self.clone();
        for (name, items) in list {
            let var = model.variable(name)?;
            let edit = match var.rule {
                BinRule::Numeric { .. } => BinEdit::Breaks(
                    items
                        .iter()
                        .map(|i| match i {
                            BreakItem::Number(x) => Ok(*x),
                            BreakItem::Group(s) => s.trim().parse::<f64>().map_err(|_| Error::InvalidBreaks {
                                variable: name.clone(),
                                reason: format!("`{s}` is not a number"),
                            }),
                        })
                        .collect::<Result<_>>()?,
                ),
                BinRule::Categorical { .. } => BinEdit::Groups(
                    items
                        .iter()
                        .map(|i| match i {
                            BreakItem::Group(s) => Ok(s.split(LEVEL_SEPARATOR).map(str::to_string).collect()),
                            BreakItem::Number(x) => Ok(vec![format_number(*x)]),
                        })
                        .collect::<Result<_>>()?,
                ),
            };
            model = model.set_breaks(name, &edit)?;
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<BinningModel> {
        let model: BinningModel = serde_json::from_str(text)?;
        if model.version > MODEL_VERSION {
            return Err(Error::InvalidParameter(format!(
                "binning model version {} is newer than supported {MODEL_VERSION}",
                model.version
            )));
        }
        Ok(model)
    }
}

fn validate_groups(groups: &[Vec<String>], known: &[String]) -> std::result::Result<(), String> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for g in groups {
        if g.is_empty() {
            return Err("empty level group".into());
        }
        for l in g {
            if !known.contains(l) {
                return Err(format!("unknown level `{l}`"));
            }
            *seen.entry(l.as_str()).or_default() += 1;
        }
    }
    if let Some((l, _)) = seen.iter().find(|(_, &c)| c > 1) {
        return Err(format!("level `{l}` appears in more than one group"));
    }
    if let Some(l) = known.iter().find(|l| !seen.contains_key(l.as_str())) {
        return Err(format!("level `{l}` is not assigned to any group"));
    }
    Ok(())
}

/// Collects per-value training counts of one column.
fn training_counts(col: &Column, flags: &[bool]) -> TrainingCounts {
    let (mut mg, mut mb) = (0, 0);
    let bump = |bad: bool, g: &mut u64, b: &mut u64| {
        if bad {
            *b += 1
        } else {
            *g += 1
        }
    };
    let atoms = match (col.as_numeric(), col.as_categorical()) {
        (Some(values), _) => {
            let mut map: BTreeMap<OrderedF64, (u64, u64)> = BTreeMap::new();
            for (v, &bad) in values.iter().zip(flags) {
                match v {
                    Some(x) => {
                        let e = map.entry(OrderedF64(*x)).or_default();
                        bump(bad, &mut e.0, &mut e.1);
                    }
                    None => bump(bad, &mut mg, &mut mb),
                }
            }
            TrainingAtoms::Numeric(
                map.into_iter()
                    .map(|(k, (good, bad))| NumericAtom { value: k.0, good, bad })
                    .collect(),
            )
        }
        (_, Some(values)) => {
            let mut map: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
            for (v, &bad) in values.iter().zip(flags) {
                match v {
                    Some(l) => {
                        let e = map.entry(l.as_str()).or_default();
                        bump(bad, &mut e.0, &mut e.1);
                    }
                    None => bump(bad, &mut mg, &mut mb),
                }
            }
            TrainingAtoms::Categorical(
                map.into_iter()
                    .map(|(k, (good, bad))| LevelAtom {
                        level: k.to_string(),
                        good,
                        bad,
                    })
                    .collect(),
            )
        }
        _ => unreachable!(),
    };
    TrainingCounts {
        atoms,
        missing_good: mg,
        missing_bad: mb,
    }
}

#[derive(Clone, Copy, PartialEq)]
struct OrderedF64(f64);

impl Eq for OrderedF64 {}

impl PartialOrd for OrderedF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Builds bin statistics for a rule from training counts.
fn build_variable(
    name: &str,
    rule: BinRule,
    missing: MissingBin,
    training: &TrainingCounts,
    params: &BinningParams,
    warnings: Vec<String>,
) -> VariableBinning {
    let n_value = rule.n_value_bins();
    let own = matches!(missing, MissingBin::OwnBin);
    let mut counts = vec![(0u64, 0u64); n_value + usize::from(own)];
    let probe = VariableBinning {
        name: name.to_string(),
        rule: rule.clone(),
        missing,
        bins: Vec::new(),
        total_iv: 0.0,
        warnings: Vec::new(),
        training: training.clone(),
    };
    match &training.atoms {
        TrainingAtoms::Numeric(atoms) => {
            for a in atoms {
                let i = probe.value_bin(Value::Number(a.value)).unwrap();
                counts[i].0 += a.good;
                counts[i].1 += a.bad;
            }
        }
        TrainingAtoms::Categorical(atoms) => {
            for a in atoms {
                let i = probe
                    .value_bin(Value::Level(&a.level))
                    .expect("groups partition the training levels");
                counts[i].0 += a.good;
                counts[i].1 += a.bad;
            }
        }
    }
    if let Some(i) = probe.missing_index() {
        counts[i].0 += training.missing_good;
        counts[i].1 += training.missing_bad;
    }
    let masses: Vec<(f64, f64)> = counts.iter().map(|&(g, b)| (g as f64, b as f64)).collect();
    let table = woe::woe_table(&masses, params.zero_adj, params.convention);
    let n = training.total() as f64;
    let mut labels = rule.value_labels();
    if let MissingBin::MergedInto(i) = missing {
        labels[i] = format!("{}{LEVEL_SEPARATOR}{MISSING_LABEL}", labels[i]);
    }
    if own {
        labels.push(MISSING_LABEL.to_string());
    }
    let mut bins: Vec<BinStats> = counts
        .iter()
        .enumerate()
        .map(|(i, &(g, b))| BinStats {
            bin: labels[i].clone(),
            count: g + b,
            count_distr: (g + b) as f64 / n,
            good: g,
            bad: b,
            badprob: if g + b > 0 { b as f64 / (g + b) as f64 } else { 0.0 },
            woe: table.woe[i],
            bin_iv: table.iv_parts[i],
            is_missing: own && i == n_value,
        })
        .collect();
    if own && params.conservative_missing {
        let m = &mut bins[n_value];
        let clamped = match params.convention {
            WoeConvention::BadOverGood => m.woe.max(0.0),
            WoeConvention::GoodOverBad => m.woe.min(0.0),
        };
        if clamped != m.woe {
            m.woe = clamped;
            m.bin_iv = 0.0;
        }
    }
    let total_iv = bins.iter().map(|b| b.bin_iv).sum();
    VariableBinning {
        name: name.to_string(),
        rule,
        missing,
        bins,
        total_iv,
        warnings,
        training: training.clone(),
    }
}

fn nearest_missing_target(own: &VariableBinning) -> MissingBin {
    let n_value = own.rule.n_value_bins();
    if n_value == 0 || own.bins.len() <= n_value {
        return MissingBin::None;
    }
    let target = own.bins[n_value].badprob;
    let mut best = 0;
    for i in 1..n_value {
        if (own.bins[i].badprob - target).abs() < (own.bins[best].badprob - target).abs() {
            best = i;
        }
    }
    MissingBin::MergedInto(best)
}

/// Ordered cells and their mapping back to values or level sets.
struct Cells {
    cells: Vec<Cell>,
    values: Vec<f64>,
    levels: Vec<Vec<String>>,
}

fn numeric_cells(atoms: &[NumericAtom]) -> Cells {
    Cells {
        cells: atoms.iter().map(|a| (a.good as f64, a.bad as f64)).collect(),
        values: atoms.iter().map(|a| a.value).collect(),
        levels: Vec::new(),
    }
}

/// Categorical cells after rare-level bundling, ordered by training WoE
/// (ascending; ties keep level order).
fn categorical_cells(atoms: &[LevelAtom], mapping: &LevelMapping, params: &BinningParams) -> Cells {
    let mut buckets: BTreeMap<String, (Vec<String>, f64, f64)> = BTreeMap::new();
    for a in atoms {
        let key = mapping.apply(&a.level).to_string();
        let e = buckets.entry(key).or_default();
        e.0.push(a.level.clone());
        e.1 += a.good as f64;
        e.2 += a.bad as f64;
    }
    let masses: Vec<(f64, f64)> = buckets.values().map(|b| (b.1, b.2)).collect();
    let table = woe::woe_table(&masses, params.zero_adj, WoeConvention::BadOverGood);
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| table.woe[a].total_cmp(&table.woe[b]));
    let items: Vec<_> = buckets.into_values().collect();
    Cells {
        cells: order.iter().map(|&i| (items[i].1, items[i].2)).collect(),
        values: Vec::new(),
        levels: order.iter().map(|&i| items[i].0.clone()).collect(),
    }
}

fn rule_from_cuts(cells: &Cells, cuts: &[usize], kind: ColumnKind) -> BinRule {
    match kind {
        ColumnKind::Numeric => BinRule::Numeric {
            breaks: cuts
                .iter()
                .map(|&c| (cells.values[c - 1] + cells.values[c]) / 2.0)
                .collect(),
        },
        ColumnKind::Categorical => {
            let mut groups = Vec::new();
            let mut start = 0;
            for &c in cuts.iter().chain(std::iter::once(&cells.levels.len())) {
                let mut g: Vec<String> = cells.levels[start..c].iter().flatten().cloned().collect();
                g.sort();
                groups.push(g);
                start = c;
            }
            BinRule::Categorical { groups }
        }
    }
}

fn grouping_config(params: &BinningParams, n: f64) -> GroupingConfig {
    GroupingConfig {
        min_count: params.min_bin_fraction * n,
        stop_limit: params.stop_limit,
        max_bins: params.max_bins,
        alpha: params.alpha,
        zero_adj: params.zero_adj,
    }
}

fn cuts_for(cells: &Cells, kind: ColumnKind, params: &BinningParams, n: f64) -> Vec<usize> {
    let cfg = grouping_config(params, n);
    let c = &cells.cells;
    if c.len() < 2 {
        return Vec::new();
    }
    let every: Vec<usize> = (1..c.len()).collect();
    match (params.method, kind) {
        (BinningMethod::Tree, _) => algorithms::tree(c, &cfg),
        (BinningMethod::Chimerge, _) => algorithms::chimerge(c, every, &cfg),
        (BinningMethod::EqualWidth, ColumnKind::Numeric) => algorithms::equal_width(&cells.values, c, &cfg),
        (BinningMethod::EqualFreq, ColumnKind::Numeric) => algorithms::equal_freq(c, &cfg),
        (BinningMethod::WoeMerge, ColumnKind::Numeric) => {
            algorithms::woe_merge(c, algorithms::min_size_prebins(c, cfg.min_count), &cfg)
        }
        // levels carry no metric, so width/frequency methods fall back to WoE merging
        (_, ColumnKind::Categorical) => algorithms::woe_merge(c, every, &cfg),
    }
}

/// Bins a single column against the target flags.
pub fn bin_column(col: &Column, flags: &[bool], params: &BinningParams) -> Result<VariableBinning> {
    params.validate()?;
    let training = training_counts(col, flags);
    let n = flags.len() as f64;
    let mut warnings = Vec::new();
    let (cells, kind) = match &training.atoms {
        TrainingAtoms::Numeric(atoms) => (numeric_cells(atoms), ColumnKind::Numeric),
        TrainingAtoms::Categorical(atoms) => {
            let mapping = rare::bundle_atoms(atoms, params.rare_level_threshold, n, params.zero_adj);
            (categorical_cells(atoms, &mapping, params), ColumnKind::Categorical)
        }
    };
    if cells.cells.len() <= 1 {
        warnings.push("constant variable: a single value bin".to_string());
    }
    let cuts = cuts_for(&cells, kind, params, n);
    let rule = if cells.cells.is_empty() {
        match kind {
            ColumnKind::Numeric => BinRule::Numeric { breaks: Vec::new() },
            ColumnKind::Categorical => BinRule::Categorical { groups: Vec::new() },
        }
    } else {
        rule_from_cuts(&cells, &cuts, kind)
    };
    let missing = if !training.has_missing() {
        MissingBin::None
    } else if params.missing_policy == MissingPolicy::MergeNearest && rule.n_value_bins() > 0 && !cells.cells.is_empty() {
        let own = build_variable(col.name(), rule.clone(), MissingBin::OwnBin, &training, params, Vec::new());
        nearest_missing_target(&own)
    } else {
        MissingBin::OwnBin
    };
    let mut var = build_variable(col.name(), rule, missing, &training, params, warnings);
    if kind == ColumnKind::Numeric && params.monotone != Monotone::None {
        var = monotone_variable(&var, params.monotone, params)?;
    }
    Ok(var)
}

/// Automatic binning of `vars` (all predictors when empty).
pub fn auto_bin(train: &Dataset, vars: &[String], params: &BinningParams) -> Result<BinningModel> {
    params.validate()?;
    let flags = train.target_flags()?;
    let names = if vars.is_empty() { train.predictors() } else { vars.to_vec() };
    let mut columns = Vec::with_capacity(names.len());
    for n in &names {
        columns.push(train.column(n)?);
    }
    let variables = columns
        .par_iter()
        .map(|col| bin_column(col, &flags, params))
        .collect::<Result<Vec<_>>>()?;
    let bad = flags.iter().filter(|&&b| b).count();
    Ok(BinningModel {
        version: MODEL_VERSION,
        params: params.clone(),
        bad_rate: bad as f64 / flags.len().max(1) as f64,
        variables,
    })
}

/// Spearman rank correlation of two equally long samples (midranks on ties).
pub(crate) fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = midranks(x);
    let ry = midranks(y);
    pearson(&rx, &ry)
}

pub(crate) fn midranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

fn monotone_variable(var: &VariableBinning, direction: Monotone, params: &BinningParams) -> Result<VariableBinning> {
    let BinRule::Numeric { breaks } = &var.rule else {
        return Err(Error::InvalidParameter(format!(
            "monotonicity is undefined for categorical variable `{}`",
            var.name
        )));
    };
    let value_bins: Vec<&BinStats> = var.bins.iter().take(var.rule.n_value_bins()).collect();
    let cells: Vec<Cell> = value_bins
        .iter()
        .map(|b| {
            // merged-missing rows are excluded from the order check
            (b.good as f64, b.bad as f64)
        })
        .collect();
    let increasing = match direction {
        Monotone::None => return Ok(var.clone()),
        Monotone::Increasing => true,
        Monotone::Decreasing => false,
        Monotone::Auto => {
            let idx: Vec<f64> = (0..cells.len()).map(|i| i as f64).collect();
            let rate: Vec<f64> = value_bins.iter().map(|b| b.badprob).collect();
            spearman(&idx, &rate) >= 0.0
        }
    };
    let cuts: Vec<usize> = (1..cells.len()).collect();
    let kept = algorithms::monotone_merge(&cells, cuts, increasing);
    let new_breaks: Vec<f64> = kept.iter().map(|&c| breaks[c - 1]).collect();
    let rule = BinRule::Numeric { breaks: new_breaks };
    let missing = match var.missing {
        MissingBin::MergedInto(_) => {
            let own = build_variable(&var.name, rule.clone(), MissingBin::OwnBin, &var.training, params, Vec::new());
            nearest_missing_target(&own)
        }
        m => m,
    };
    Ok(build_variable(&var.name, rule, missing, &var.training, params, var.warnings.clone()))
}

#[cfg(test)]
mod tests;
