//! Grouping algorithms over an ordered sequence of cells.
//!
//! A cell is the `(good, bad)` count of one distinct numeric value or one
//! (bundled) categorical level. Every algorithm returns the sorted cut
//! positions `c` such that a new group starts at cell `c`.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::woe::information_value;

pub(crate) type Cell = (f64, f64);

#[derive(Clone, Copy, Debug)]
pub(crate) struct GroupingConfig {
    pub min_count: f64,
    pub stop_limit: f64,
    pub max_bins: usize,
    pub alpha: f64,
    pub zero_adj: f64,
}

/// Pearson χ² of the 2×2 table `[[g1, b1], [g2, b2]]`, no continuity correction.
pub(crate) fn chi2_2x2(g1: f64, b1: f64, g2: f64, b2: f64) -> f64 {
    let n = g1 + b1 + g2 + b2;
    let denom = (g1 + b1) * (g2 + b2) * (g1 + g2) * (b1 + b2);
    if denom == 0.0 {
        return 0.0;
    }
    let d = g1 * b2 - b1 * g2;
    n * d * d / denom
}

/// Upper-tail probability of χ² with one degree of freedom.
pub(crate) fn chi2_1df_pvalue(stat: f64) -> f64 {
    erfc((stat / 2.0).sqrt())
}

fn total(cells: &[Cell]) -> f64 {
    cells.iter().map(|c| c.0 + c.1).sum()
}

pub(crate) fn group_counts(cells: &[Cell], cuts: &[usize]) -> Vec<Cell> {
    bounds(cells.len(), cuts)
        .into_iter()
        .map(|(s, e)| sum_cells(&cells[s..e]))
        .collect()
}

fn sum_cells(cells: &[Cell]) -> Cell {
    cells
        .iter()
        .fold((0.0, 0.0), |acc, c| (acc.0 + c.0, acc.1 + c.1))
}

fn bounds(n: usize, cuts: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for &c in cuts {
        out.push((start, c));
        start = c;
    }
    out.push((start, n));
    out
}

fn insert_sorted(cuts: &[usize], c: usize) -> Vec<usize> {
    let mut v = cuts.to_vec();
    let pos = v.partition_point(|&x| x < c);
    v.insert(pos, c);
    v
}

/// Best binary split of one group: `(cut, chi2, candidates)` where the cut
/// maximizes χ² among admissible positions (smallest position on ties).
pub(crate) fn best_split(cells: &[Cell], start: usize, end: usize, min_count: f64) -> Option<(usize, f64, usize)> {
    let (tg, tb) = sum_cells(&cells[start..end]);
    let (mut lg, mut lb) = (0.0, 0.0);
    let mut best: Option<(usize, f64)> = None;
    let mut admissible = 0;
    for c in start + 1..end {
        lg += cells[c - 1].0;
        lb += cells[c - 1].1;
        let (rg, rb) = (tg - lg, tb - lb);
        if lg + lb < min_count || rg + rb < min_count {
            continue;
        }
        admissible += 1;
        let stat = chi2_2x2(lg, lb, rg, rb);
        if best.is_none_or(|(_, s)| stat > s) {
            best = Some((c, stat));
        }
    }
    best.map(|(c, s)| (c, s, admissible))
}

/// Recursive binary χ² partitioning.
///
/// Each round evaluates the best (maximal χ²) split of every current group
/// and accepts the one yielding the largest total IV, provided its p-value
/// is at most `alpha` and it raises IV by at least `stop_limit` relative to
/// the current IV. P-values are Bonferroni-adjusted over covariates, a
/// factor of one for a single variable. Stops at `max_bins` groups.
pub(crate) fn tree(cells: &[Cell], cfg: &GroupingConfig) -> Vec<usize> {
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() + 1 < cfg.max_bins {
        let current_iv = information_value(&group_counts(cells, &cuts), cfg.zero_adj);
        let mut chosen: Option<(usize, f64)> = None;
        for (s, e) in bounds(cells.len(), &cuts) {
            let Some((c, stat, _)) = best_split(cells, s, e, cfg.min_count) else {
                continue;
            };
            if chi2_1df_pvalue(stat) > cfg.alpha {
                continue;
            }
            let trial = insert_sorted(&cuts, c);
            let iv = information_value(&group_counts(cells, &trial), cfg.zero_adj);
            let gain = if current_iv > 0.0 {
                (iv - current_iv) / current_iv
            } else {
                f64::INFINITY
            };
            if gain < cfg.stop_limit {
                continue;
            }
            if chosen.is_none_or(|(_, best_iv)| iv > best_iv) {
                chosen = Some((c, iv));
            }
        }
        match chosen {
            Some((c, _)) => cuts = insert_sorted(&cuts, c),
            None => break,
        }
    }
    cuts
}

fn adjacent_chi2(groups: &[Cell]) -> Vec<f64> {
    groups
        .windows(2)
        .map(|w| chi2_2x2(w[0].0, w[0].1, w[1].0, w[1].1))
        .collect()
}

fn argmin_leftmost(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|b| x < v[b]) {
            best = Some(i);
        }
    }
    best
}

/// Critical χ² value (one degree of freedom) at significance `alpha`.
pub(crate) fn chi2_critical(alpha: f64) -> f64 {
    ChiSquared::new(1.0)
        .map(|d| d.inverse_cdf(1.0 - alpha))
        .unwrap_or(3.841458820694124)
}

/// Bottom-up ChiMerge starting from `initial` cuts (usually every cell).
///
/// Merges the adjacent pair of smallest χ² (leftmost on ties) while that
/// χ² is below the critical value or more than `max_bins` groups remain,
/// then folds undersized groups into their more similar neighbour.
pub(crate) fn chimerge(cells: &[Cell], initial: Vec<usize>, cfg: &GroupingConfig) -> Vec<usize> {
    let critical = chi2_critical(cfg.alpha);
    let mut cuts = initial;
    while !cuts.is_empty() {
        let groups = group_counts(cells, &cuts);
        let chi = adjacent_chi2(&groups);
        let i = argmin_leftmost(&chi).unwrap();
        if chi[i] < critical || groups.len() > cfg.max_bins {
            cuts.remove(i);
        } else {
            break;
        }
    }
    enforce_min_size(cells, cuts, cfg.min_count)
}

/// Merges groups smaller than `min_count` (smallest first, leftmost on ties)
/// into the neighbour with the lower χ² against it.
pub(crate) fn enforce_min_size(cells: &[Cell], mut cuts: Vec<usize>, min_count: f64) -> Vec<usize> {
    loop {
        if cuts.is_empty() {
            return cuts;
        }
        let groups = group_counts(cells, &cuts);
        let sizes: Vec<f64> = groups.iter().map(|g| g.0 + g.1).collect();
        let Some(small) = argmin_leftmost(&sizes) else {
            return cuts;
        };
        if sizes[small] >= min_count {
            return cuts;
        }
        // cut index `k` separates group k and k+1
        let merge_cut = if small == 0 {
            0
        } else if small == groups.len() - 1 {
            small - 1
        } else {
            let g = groups[small];
            let left = chi2_2x2(groups[small - 1].0, groups[small - 1].1, g.0, g.1);
            let right = chi2_2x2(g.0, g.1, groups[small + 1].0, groups[small + 1].1);
            if left <= right {
                small - 1
            } else {
                small
            }
        };
        cuts.remove(merge_cut);
    }
}

/// Groups cells by equal-width intervals of their `values`.
pub(crate) fn equal_width(values: &[f64], cells: &[Cell], cfg: &GroupingConfig) -> Vec<usize> {
    if values.len() < 2 {
        return Vec::new();
    }
    let lo = values[0];
    let hi = values[values.len() - 1];
    let width = (hi - lo) / cfg.max_bins as f64;
    let slot = |v: f64| (((v - lo) / width).floor() as usize).min(cfg.max_bins - 1);
    let mut cuts = Vec::new();
    for i in 1..values.len() {
        if slot(values[i]) != slot(values[i - 1]) {
            cuts.push(i);
        }
    }
    enforce_min_size(cells, cuts, cfg.min_count)
}

/// Groups cells into runs of roughly equal total count.
pub(crate) fn equal_freq(cells: &[Cell], cfg: &GroupingConfig) -> Vec<usize> {
    let n = total(cells);
    let mut cuts = Vec::new();
    let mut cum = 0.0;
    let mut next = 1;
    for (i, c) in cells.iter().enumerate().take(cells.len().saturating_sub(1)) {
        cum += c.0 + c.1;
        if next < cfg.max_bins && cum >= n * next as f64 / cfg.max_bins as f64 {
            cuts.push(i + 1);
            while next < cfg.max_bins && cum >= n * next as f64 / cfg.max_bins as f64 {
                next += 1;
            }
        }
    }
    enforce_min_size(cells, cuts, cfg.min_count)
}

/// Initial groups of at least `min_count` observations each, cut greedily
/// left to right; an undersized tail joins the last group.
pub(crate) fn min_size_prebins(cells: &[Cell], min_count: f64) -> Vec<usize> {
    let mut cuts = Vec::new();
    let mut cum = 0.0;
    let n = total(cells);
    let mut used = 0.0;
    for (i, c) in cells.iter().enumerate().take(cells.len().saturating_sub(1)) {
        cum += c.0 + c.1;
        if cum >= min_count && n - used - cum >= min_count {
            cuts.push(i + 1);
            used += cum;
            cum = 0.0;
        }
    }
    cuts
}

/// Merges adjacent groups of most similar WoE while the relative IV loss of
/// the merge stays below `stop_limit` (or more than `max_bins` remain).
pub(crate) fn woe_merge(cells: &[Cell], initial: Vec<usize>, cfg: &GroupingConfig) -> Vec<usize> {
    let mut cuts = initial;
    while !cuts.is_empty() {
        let groups = group_counts(cells, &cuts);
        let table = crate::woe::woe_table(&groups, cfg.zero_adj, Default::default());
        let diffs: Vec<f64> = table.woe.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let i = argmin_leftmost(&diffs).unwrap();
        let mut trial = cuts.clone();
        trial.remove(i);
        let iv_after = information_value(&group_counts(cells, &trial), cfg.zero_adj);
        let loss = if table.iv > 0.0 {
            (table.iv - iv_after) / table.iv
        } else {
            0.0
        };
        if groups.len() > cfg.max_bins || loss < cfg.stop_limit {
            cuts = trial;
        } else {
            break;
        }
    }
    cuts
}

/// Greedily merges the first adjacent pair whose bad rates violate the
/// requested direction until the sequence is monotone (ties allowed).
pub(crate) fn monotone_merge(cells: &[Cell], mut cuts: Vec<usize>, increasing: bool) -> Vec<usize> {
    loop {
        let groups = group_counts(cells, &cuts);
        let rate: Vec<f64> = groups.iter().map(|g| g.1 / (g.0 + g.1)).collect();
        let violation = rate.windows(2).position(|w| {
            if increasing {
                w[1] < w[0]
            } else {
                w[1] > w[0]
            }
        });
        match violation {
            Some(i) => {
                cuts.remove(i);
            }
            None => return cuts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GroupingConfig {
        GroupingConfig {
            min_count: 1.0,
            stop_limit: 0.1,
            max_bins: 8,
            alpha: 0.05,
            zero_adj: 0.5,
        }
    }

    #[test]
    fn chi2_hand_value() {
        // (8,2 ; 2,8): 20·(64−4)² / 10⁴ = 7.2
        assert!((chi2_2x2(8.0, 2.0, 2.0, 8.0) - 7.2).abs() < 1e-12);
        assert_eq!(chi2_2x2(5.0, 5.0, 10.0, 10.0), 0.0);
        assert_eq!(chi2_2x2(5.0, 0.0, 10.0, 0.0), 0.0);
    }

    #[test]
    fn pvalue_matches_critical_value() {
        let crit = chi2_critical(0.05);
        assert!((crit - 3.841458820694124).abs() < 1e-6);
        assert!((chi2_1df_pvalue(crit) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn chimerge_merges_identical_proportions_first() {
        // cells 1 and 2 share the same bad rate (chi2 = 0); forcing exactly
        // one merge must remove the cut between them
        let cells = vec![(40.0, 10.0), (20.0, 20.0), (30.0, 30.0), (10.0, 40.0)];
        let c = GroupingConfig {
            max_bins: 3,
            alpha: 1.0 - 1e-12, // critical value ~0, so only max_bins forces merges
            ..cfg()
        };
        assert_eq!(chimerge(&cells, vec![1, 2, 3], &c), vec![1, 3]);
    }

    #[test]
    fn monotone_merge_examples() {
        // bad rates 0.1, 0.3, 0.2 with equal counts
        let cells = vec![(9.0, 1.0), (7.0, 3.0), (8.0, 2.0)];
        assert_eq!(monotone_merge(&cells, vec![1, 2], true), vec![1]);
        // already monotone
        assert_eq!(monotone_merge(&cells[..2], vec![1], true), vec![1]);
        // alternating 0.1, 0.3, 0.1, 0.3 against a decreasing request
        let alt = vec![(9.0, 1.0), (7.0, 3.0), (9.0, 1.0), (7.0, 3.0)];
        assert!(monotone_merge(&alt, vec![1, 2, 3], false).len() + 1 <= 2);
    }

    #[test]
    fn prebins_respect_min_size() {
        let cells = vec![(1.0, 0.0); 10];
        let cuts = min_size_prebins(&cells, 3.0);
        for g in group_counts(&cells, &cuts) {
            assert!(g.0 + g.1 >= 3.0);
        }
        assert_eq!(cuts, vec![3, 6]);
    }

    #[test]
    fn min_size_enforced() {
        let cells = vec![(1.0, 0.0), (10.0, 10.0), (10.0, 1.0), (0.0, 1.0)];
        let cuts = enforce_min_size(&cells, vec![1, 2, 3], 5.0);
        for g in group_counts(&cells, &cuts) {
            assert!(g.0 + g.1 >= 5.0);
        }
    }

    #[test]
    fn equal_freq_groups() {
        let cells = vec![(1.0, 0.0); 8];
        let c = GroupingConfig { max_bins: 4, ..cfg() };
        assert_eq!(equal_freq(&cells, &c), vec![2, 4, 6]);
    }

    #[test]
    fn equal_width_groups() {
        let values: Vec<f64> = (0..10).map(f64::from).collect();
        let cells = vec![(1.0, 1.0); 10];
        let c = GroupingConfig { max_bins: 2, ..cfg() };
        assert_eq!(equal_width(&values, &cells, &c), vec![5]);
    }
}
