//! Column-oriented datasets, CSV ingestion, target encoding and seeded splits.
//!
//! A [`Dataset`] is an ordered list of typed columns with per-cell missing
//! flags. The binary target, once encoded, is a categorical column holding the
//! canonical levels [`GOOD`] and [`BAD`], where `bad` is the event.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical level of the non-event class.
pub const GOOD: &str = "good";
/// Canonical level of the event (default) class.
pub const BAD: &str = "bad";

/// Default cell tokens treated as missing on ingestion.
pub const MISSING_TOKENS: [&str; 2] = ["", "NA"];

const GERMAN_CREDIT_CSV: &str = include_str!("../data/germancredit.csv");

/// Seeded generator used for every random draw in the crate.
///
/// ChaCha8 seeded through `seed_from_u64`, so results are identical across
/// platforms for a given seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl std::fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnKind::Numeric => f.write_str("numeric"),
            ColumnKind::Categorical => f.write_str("categorical"),
        }
    }
}

/// Cell storage of a column; `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnValues {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    name: String,
    values: ColumnValues,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            values: ColumnValues::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            values: ColumnValues::Categorical(values),
        }
    }

    /// Numeric column without missing cells.
    pub fn from_f64(name: impl Into<String>, values: &[f64]) -> Self {
        Column::numeric(name, values.iter().map(|&v| Some(v)).collect())
    }

    /// Categorical column without missing cells.
    pub fn from_strs<S: AsRef<str>>(name: impl Into<String>, values: &[S]) -> Self {
        Column::categorical(
            name,
            values.iter().map(|v| Some(v.as_ref().to_string())).collect(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        match self.values {
            ColumnValues::Numeric(_) => ColumnKind::Numeric,
            ColumnValues::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn values(&self) -> &ColumnValues {
        &self.values
    }

    pub fn len(&self) -> usize {
        match &self.values {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match &self.values {
            ColumnValues::Numeric(v) => v[row].is_none(),
            ColumnValues::Categorical(v) => v[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match &self.values {
            ColumnValues::Numeric(v) => Some(v),
            ColumnValues::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[Option<String>]> {
        match &self.values {
            ColumnValues::Categorical(v) => Some(v),
            ColumnValues::Numeric(_) => None,
        }
    }

    /// Numeric cells, failing with a kind mismatch for categorical columns.
    pub fn numeric_values(&self) -> Result<&[Option<f64>]> {
        self.as_numeric().ok_or_else(|| self.kind_error(ColumnKind::Numeric))
    }

    pub fn categorical_values(&self) -> Result<&[Option<String>]> {
        self.as_categorical()
            .ok_or_else(|| self.kind_error(ColumnKind::Categorical))
    }

    pub(crate) fn kind_error(&self, expected: ColumnKind) -> Error {
        Error::KindMismatch {
            column: self.name.clone(),
            found: self.kind().to_string(),
            expected: expected.to_string(),
        }
    }

    /// Distinct non-missing levels of a categorical column in sorted order.
    pub fn levels(&self) -> Vec<String> {
        match &self.values {
            ColumnValues::Categorical(v) => v
                .iter()
                .flatten()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            ColumnValues::Numeric(_) => Vec::new(),
        }
    }

    /// Text form of a cell as written to CSV.
    pub fn cell_text(&self, row: usize) -> Option<String> {
        match &self.values {
            ColumnValues::Numeric(v) => v[row].map(format_number),
            ColumnValues::Categorical(v) => v[row].clone(),
        }
    }

    fn take(&self, rows: &[usize]) -> Column {
        let values = match &self.values {
            ColumnValues::Numeric(v) => ColumnValues::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnValues::Categorical(v) => {
                ColumnValues::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
        };
        Column {
            name: self.name.clone(),
            values,
        }
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "Inf".into() } else { "-Inf".into() }
    } else {
        format!("{v}")
    }
}

/// Binary target column with its event level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub column: String,
    pub bad_level: String,
    pub good_level: String,
}

impl TargetSpec {
    pub fn new(
        column: impl Into<String>,
        bad_level: impl Into<String>,
        good_level: impl Into<String>,
    ) -> Self {
        TargetSpec {
            column: column.into(),
            bad_level: bad_level.into(),
            good_level: good_level.into(),
        }
    }

    /// Builds a spec for `column` whose good level is the single observed
    /// level other than `bad_level`.
    pub fn infer(ds: &Dataset, column: &str, bad_level: &str) -> Result<Self> {
        let col = ds.column(column)?;
        let levels = observed_levels(col);
        if levels.len() != 2 {
            return Err(Error::Target(format!(
                "target `{column}` has {} observed levels, expected 2",
                levels.len()
            )));
        }
        if !levels.contains(bad_level) {
            return Err(Error::Target(format!(
                "bad level `{bad_level}` does not occur in `{column}`"
            )));
        }
        let good = levels.into_iter().find(|l| l != bad_level).unwrap();
        Ok(TargetSpec::new(column, bad_level, good))
    }

    fn validate(&self) -> Result<()> {
        if self.bad_level == self.good_level {
            return Err(Error::Target("bad and good levels must differ".into()));
        }
        Ok(())
    }
}

fn observed_levels(col: &Column) -> BTreeSet<String> {
    (0..col.len()).filter_map(|i| col.cell_text(i)).collect()
}

/// Train/validation split parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratio: f64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub stratify: bool,
}

fn default_true() -> bool {
    true
}

impl SplitSpec {
    pub fn new(ratio: f64, seed: u64) -> Self {
        SplitSpec {
            ratio,
            seed,
            stratify: true,
        }
    }
}

/// Ingestion options: per-column kind overrides and missing tokens.
#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub schema: BTreeMap<String, ColumnKind>,
    pub missing_tokens: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            schema: BTreeMap::new(),
            missing_tokens: MISSING_TOKENS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
    target: Option<TargetSpec>,
}

impl Dataset {
    /// Validates equal column lengths and unique, non-empty names.
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::InvalidDataset("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate column name `{}`",
                    c.name
                )));
            }
            if c.len() != n_rows {
                return Err(Error::InvalidDataset(format!(
                    "column `{}` has {} cells, expected {n_rows}",
                    c.name,
                    c.len()
                )));
            }
        }
        Ok(Dataset {
            columns,
            n_rows,
            target: None,
        })
    }

    /// The bundled German credit data (1000 rows, target `creditability`,
    /// event level `bad`), already encoded.
    pub fn german_credit() -> Dataset {
        let spec = TargetSpec::new("creditability", "bad", "good");
        read_csv(
            GERMAN_CREDIT_CSV.as_bytes(),
            Some(&spec),
            &CsvOptions::default(),
        )
        .expect("bundled fixture parses")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn target(&self) -> Option<&TargetSpec> {
        self.target.as_ref()
    }

    /// Names of all non-target columns, in column order.
    pub fn predictors(&self) -> Vec<String> {
        let target = self.target.as_ref().map(|t| t.column.as_str());
        self.columns
            .iter()
            .filter(|c| Some(c.name.as_str()) != target)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Per-row event flags (`true` = bad). Requires an encoded target.
    pub fn target_flags(&self) -> Result<Vec<bool>> {
        let spec = self
            .target
            .as_ref()
            .ok_or_else(|| Error::Target("dataset has no encoded target".into()))?;
        let col = self.column(&spec.column)?.categorical_values()?;
        col.iter()
            .enumerate()
            .map(|(i, v)| match v.as_deref() {
                Some(BAD) => Ok(true),
                Some(GOOD) => Ok(false),
                other => Err(Error::Target(format!(
                    "row {i}: unexpected encoded target value {other:?}"
                ))),
            })
            .collect()
    }

    /// Number of bad rows; requires an encoded target.
    pub fn bad_count(&self) -> Result<usize> {
        Ok(self.target_flags()?.iter().filter(|&&b| b).count())
    }

    /// Rows at `rows`, in the given order, keeping the target spec.
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            n_rows: rows.len(),
            target: self.target.clone(),
        }
    }

    /// Replaces the column `name` in place with `column` (which may carry a
    /// different name).
    pub fn replace_column(&mut self, name: &str, column: Column) -> Result<()> {
        if column.len() != self.n_rows {
            return Err(Error::InvalidDataset(format!(
                "replacement for `{name}` has {} cells, expected {}",
                column.len(),
                self.n_rows
            )));
        }
        let idx = self
            .columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        if column.name != name && self.has_column(&column.name) {
            return Err(Error::InvalidDataset(format!(
                "duplicate column name `{}`",
                column.name
            )));
        }
        self.columns[idx] = column;
        Ok(())
    }

    pub fn push_column(&mut self, column: Column) -> Result<()> {
        if self.columns.is_empty() {
            self.n_rows = column.len();
        }
        if column.len() != self.n_rows {
            return Err(Error::InvalidDataset(format!(
                "column `{}` has {} cells, expected {}",
                column.name,
                column.len(),
                self.n_rows
            )));
        }
        if self.has_column(&column.name) {
            return Err(Error::InvalidDataset(format!(
                "duplicate column name `{}`",
                column.name
            )));
        }
        self.columns.push(column);
        Ok(())
    }

    /// Subset of columns by name; the target is kept when present.
    pub fn select(&self, names: &[String]) -> Result<Dataset> {
        let mut cols = Vec::new();
        for n in names {
            cols.push(self.column(n)?.clone());
        }
        if let Some(t) = &self.target {
            if !names.iter().any(|n| n == &t.column) {
                cols.insert(0, self.column(&t.column)?.clone());
            }
        }
        Ok(Dataset {
            columns: cols,
            n_rows: self.n_rows,
            target: self.target.clone(),
        })
    }

    /// Vertically stacks `other` below `self`; columns must match by name and kind.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        let mut cols = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let o = other.column(&c.name)?;
            let values = match (&c.values, &o.values) {
                (ColumnValues::Numeric(a), ColumnValues::Numeric(b)) => {
                    ColumnValues::Numeric(a.iter().chain(b).copied().collect())
                }
                (ColumnValues::Categorical(a), ColumnValues::Categorical(b)) => {
                    ColumnValues::Categorical(a.iter().chain(b).cloned().collect())
                }
                _ => return Err(o.kind_error(c.kind())),
            };
            cols.push(Column {
                name: c.name.clone(),
                values,
            });
        }
        if other.columns.len() != self.columns.len() {
            return Err(Error::InvalidDataset(
                "datasets have different column sets".into(),
            ));
        }
        Ok(Dataset {
            columns: cols,
            n_rows: self.n_rows + other.n_rows,
            target: self.target.clone(),
        })
    }

    /// Writes the dataset as CSV with a header row; missing cells are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in 0..self.n_rows {
            w.write_record(
                self.columns
                    .iter()
                    .map(|c| c.cell_text(row).unwrap_or_default()),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    /// Column kinds, usable as a schema override when reloading.
    pub fn schema(&self) -> BTreeMap<String, ColumnKind> {
        self.columns
            .iter()
            .map(|c| (c.name.clone(), c.kind()))
            .collect()
    }
}

/// Loads a CSV file. A column is numeric iff every non-missing cell parses as
/// a number, unless `options.schema` overrides its kind.
pub fn load_csv(
    path: impl AsRef<Path>,
    target: Option<&TargetSpec>,
    options: &CsvOptions,
) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    read_csv(file, target, options)
}

pub fn read_csv<R: Read>(
    reader: R,
    target: Option<&TargetSpec>,
    options: &CsvOptions,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::NoHeader),
    };
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::NoHeader);
    }
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); names.len()];
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(Error::RaggedRow {
                row: i + 1,
                found: rec.len(),
                expected: names.len(),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let missing = options.missing_tokens.iter().any(|t| t == cell);
            raw[j].push(if missing { None } else { Some(cell.to_string()) });
        }
    }

    let mut columns = Vec::with_capacity(names.len());
    for (name, cells) in names.into_iter().zip(raw) {
        let kind = match options.schema.get(&name) {
            Some(k) => *k,
            None if is_target(target, &name) => ColumnKind::Categorical,
            None => infer_kind(&cells),
        };
        let column = match kind {
            ColumnKind::Categorical => Column::categorical(name, cells),
            ColumnKind::Numeric => {
                let mut vals = Vec::with_capacity(cells.len());
                for (row, c) in cells.iter().enumerate() {
                    vals.push(match c {
                        None => None,
                        Some(s) => Some(parse_number(s).ok_or_else(|| {
                            Error::InvalidDataset(format!(
                                "column `{name}` row {}: `{s}` is not numeric",
                                row + 1
                            ))
                        })?),
                    });
                }
                Column::numeric(name, vals)
            }
        };
        columns.push(column);
    }
    let ds = Dataset::new(columns)?;
    match target {
        Some(spec) => encode_target(&ds, spec),
        None => Ok(ds),
    }
}

fn is_target(target: Option<&TargetSpec>, name: &str) -> bool {
    target.is_some_and(|t| t.column == name)
}

fn parse_number(s: &str) -> Option<f64> {
    match s.trim() {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse::<f64>().ok().filter(|v| !v.is_nan()),
    }
}

fn infer_kind(cells: &[Option<String>]) -> ColumnKind {
    let mut any = false;
    for c in cells.iter().flatten() {
        any = true;
        if parse_number(c).is_none() {
            return ColumnKind::Categorical;
        }
    }
    if any {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

/// Replaces the target column by the canonical levels `good`/`bad` and
/// attaches `spec` to the dataset.
pub fn encode_target(ds: &Dataset, spec: &TargetSpec) -> Result<Dataset> {
    spec.validate()?;
    let col = ds
        .column(&spec.column)
        .map_err(|_| Error::Target(format!("target column `{}` absent", spec.column)))?;
    let levels = observed_levels(col);
    if levels.len() != 2 {
        return Err(Error::Target(format!(
            "target `{}` has {} observed levels, expected 2",
            spec.column,
            levels.len()
        )));
    }
    let mut encoded = Vec::with_capacity(ds.n_rows);
    for row in 0..ds.n_rows {
        let v = col.cell_text(row).ok_or_else(|| {
            Error::Target(format!("missing target value at row {}", row + 1))
        })?;
        let canonical = if v == spec.bad_level {
            BAD
        } else if v == spec.good_level {
            GOOD
        } else {
            return Err(Error::Target(format!(
                "unknown target level `{v}` at row {}",
                row + 1
            )));
        };
        encoded.push(Some(canonical.to_string()));
    }
    let mut out = ds.clone();
    out.replace_column(
        &spec.column,
        Column::categorical(spec.column.clone(), encoded),
    )?;
    out.target = Some(spec.clone());
    Ok(out)
}

/// Row indices of the train and validation parts, each in ascending order.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split ratio must lie in (0, 1), got {}",
            spec.ratio
        )));
    }
    let strata: Vec<Vec<usize>> = if spec.stratify {
        let flags = ds.target_flags()?;
        let (bad, good): (Vec<usize>, Vec<usize>) = (0..ds.n_rows).partition(|&i| flags[i]);
        vec![good, bad]
    } else {
        vec![(0..ds.n_rows).collect()]
    };
    let mut rng = seeded_rng(spec.seed);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        let k = (spec.ratio * stratum.len() as f64).round() as usize;
        train.extend_from_slice(&stratum[..k]);
        valid.extend_from_slice(&stratum[k..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}

/// Deterministic (optionally target-stratified) train/validation split.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, valid) = split_indices(ds, spec)?;
    Ok((ds.take_rows(&train), ds.take_rows(&valid)))
}
