//! Bundling of rare categorical levels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LevelAtom;
use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::woe::adjusted;

/// Bundle for rare levels that carry more risk than average.
pub const MISC_POS: &str = "misc_pos";
/// Bundle for rare levels that carry average or less risk.
pub const MISC_NEG: &str = "misc_neg";

/// Level renaming produced by rare-level bundling. Levels absent from the
/// map keep their own name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelMapping {
    pub threshold: f64,
    pub map: BTreeMap<String, String>,
}

impl LevelMapping {
    pub fn apply<'a>(&'a self, level: &'a str) -> &'a str {
        self.map.get(level).map_or(level, String::as_str)
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_empty()
    }
}

pub(crate) fn bundle_atoms(atoms: &[LevelAtom], threshold: f64, n: f64, zero_adj: f64) -> LevelMapping {
    let total_good: u64 = atoms.iter().map(|a| a.good).sum();
    let total_bad: u64 = atoms.iter().map(|a| a.bad).sum();
    let mut map = BTreeMap::new();
    if total_good == 0 || total_bad == 0 || n == 0.0 {
        return LevelMapping { threshold, map };
    }
    for a in atoms {
        if ((a.good + a.bad) as f64) / n >= threshold {
            continue;
        }
        let fb = adjusted(a.bad as f64, zero_adj) / total_bad as f64;
        let fg = adjusted(a.good as f64, zero_adj) / total_good as f64;
        let bundle = if (fb / fg).ln() > 0.0 { MISC_POS } else { MISC_NEG };
        map.insert(a.level.clone(), bundle.to_string());
    }
    LevelMapping { threshold, map }
}

/// Replaces levels of `column` whose share is below `threshold` by
/// `misc_pos` or `misc_neg` according to the sign of their WoE.
pub fn bundle_rare_levels(
    ds: &Dataset,
    column: &str,
    threshold: f64,
    zero_adj: f64,
) -> Result<(Dataset, LevelMapping)> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in [0, 1), got {threshold}"
        )));
    }
    let flags = ds.target_flags()?;
    let col = ds.column(column)?;
    let values = col.categorical_values()?;
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for (v, &bad) in values.iter().zip(&flags) {
        if let Some(l) = v {
            let e = counts.entry(l.as_str()).or_default();
            if bad {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        }
    }
    let atoms: Vec<LevelAtom> = counts
        .into_iter()
        .map(|(level, (good, bad))| LevelAtom {
            level: level.to_string(),
            good,
            bad,
        })
        .collect();
    let mapping = bundle_atoms(&atoms, threshold, ds.n_rows() as f64, zero_adj);
    let renamed = values
        .iter()
        .map(|v| v.as_deref().map(|l| mapping.apply(l).to_string()))
        .collect();
    let mut out = ds.clone();
    out.replace_column(column, Column::categorical(column, renamed))?;
    Ok((out, mapping))
}
