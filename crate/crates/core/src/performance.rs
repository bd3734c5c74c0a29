//! Discrimination, classification and calibration metrics.
//!
//! Bad is the positive class throughout. Under [`Direction::HigherIsGood`]
//! a row is predicted good when its score is at or above the cutoff.

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

use crate::binning::{bin_column, BinRule, BinningMethod, BinningParams};
use crate::data::{seeded_rng, Column};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    HigherIsGood,
    HigherIsBad,
}

fn check(scores: &[f64], y: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != y.len() {
        return Err(Error::InvalidParameter(format!("{} scores for {} labels", scores.len(), y.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("scores contain NaN".into()));
    }
    let nb = y.iter().filter(|&&b| b).count();
    let ng = y.len() - nb;
    if nb == 0 || ng == 0 {
        return Err(Error::Degenerate("both classes are required".into()));
    }
    Ok((ng, nb))
}

/// Scores oriented so that higher means better (more likely good).
fn oriented(scores: &[f64], direction: Direction) -> Vec<f64> {
    match direction {
        Direction::HigherIsGood => scores.to_vec(),
        Direction::HigherIsBad => scores.iter().map(|s| -s).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Auc {
    pub auc: f64,
    pub gini: f64,
}

/// Twice the Mann–Whitney count of (good, bad) pairs where the good row
/// scores higher (ties count one).
fn mann_whitney_twice(good_high: &[f64], y: &[bool]) -> u64 {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| good_high[a].total_cmp(&good_high[b]));
    let mut bads_below = 0u64;
    let mut total = 0u64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && good_high[idx[j]] == good_high[idx[i]] {
            j += 1;
        }
        let tie_bad = idx[i..j].iter().filter(|&&k| y[k]).count() as u64;
        let tie_good = (j - i) as u64 - tie_bad;
        total += tie_good * (2 * bads_below + tie_bad);
        bads_below += tie_bad;
        i = j;
    }
    total
}

/// Probability that a random good row outranks a random bad row (ties ½).
pub fn roc_auc(scores: &[f64], y: &[bool], direction: Direction) -> Result<Auc> {
    let (ng, nb) = check(scores, y)?;
    let u2 = mann_whitney_twice(&oriented(scores, direction), y);
    let auc = (u2 as f64 / 2.0) / (ng as f64 * nb as f64);
    Ok(Auc {
        auc,
        gini: 2.0 * (auc - 0.5),
    })
}

/// Maximum distance between the class-wise empirical distribution
/// functions of the scores.
pub fn ks(scores: &[f64], y: &[bool]) -> Result<f64> {
    let (ng, nb) = check(scores, y)?;
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut cg, mut cb) = (0usize, 0usize);
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let v = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == v {
            if y[idx[i]] {
                cb += 1;
            } else {
                cg += 1;
            }
            i += 1;
        }
        best = best.max((cg as f64 / ng as f64 - cb as f64 / nb as f64).abs());
    }
    Ok(best)
}

/// ROC curve points `(false positive rate, true positive rate)` with bad
/// as the positive class, from the strictest cutoff to the loosest.
pub fn roc_curve(scores: &[f64], y: &[bool], direction: Direction) -> Result<Vec<(f64, f64)>> {
    let (ng, nb) = check(scores, y)?;
    // most bad-looking rows first
    let risk: Vec<f64> = oriented(scores, direction).iter().map(|s| -s).collect();
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| risk[b].total_cmp(&risk[a]));
    let mut out = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let v = risk[idx[i]];
        while i < idx.len() && risk[idx[i]] == v {
            if y[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((fp as f64 / ng as f64, tp as f64 / nb as f64));
    }
    Ok(out)
}

/// Class-wise ECDFs at every distinct score: `(score, F_good, F_bad)`.
pub fn ecdf_curves(scores: &[f64], y: &[bool]) -> Result<Vec<(f64, f64, f64)>> {
    let (ng, nb) = check(scores, y)?;
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut cg, mut cb) = (0usize, 0usize);
    let mut out = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let v = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == v {
            if y[idx[i]] {
                cb += 1;
            } else {
                cg += 1;
            }
            i += 1;
        }
        out.push((v, cg as f64 / ng as f64, cb as f64 / nb as f64));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Resamples redrawn because they held a single class.
    pub redraws: usize,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval of the AUC; goods and bads are resampled
/// separately. Replicate `r` draws from ChaCha8 stream `r` of `seed`.
pub fn auc_ci_bootstrap(
    scores: &[f64],
    y: &[bool],
    direction: Direction,
    replicates: usize,
    seed: u64,
    level: f64,
) -> Result<AucInterval> {
    check(scores, y)?;
    if replicates < 100 {
        return Err(Error::InvalidParameter(format!("at least 100 replicates needed, got {replicates}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    let point = roc_auc(scores, y, direction)?.auc;
    let goods: Vec<f64> = (0..y.len()).filter(|&i| !y[i]).map(|i| scores[i]).collect();
    let bads: Vec<f64> = (0..y.len()).filter(|&i| y[i]).map(|i| scores[i]).collect();
    let mut aucs: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded_rng(seed);
            rng.set_stream(r as u64);
            let mut s = Vec::with_capacity(goods.len() + bads.len());
            let mut lab = Vec::with_capacity(goods.len() + bads.len());
            for _ in 0..goods.len() {
                s.push(*goods.choose(&mut rng).unwrap());
                lab.push(false);
            }
            for _ in 0..bads.len() {
                s.push(*bads.choose(&mut rng).unwrap());
                lab.push(true);
            }
            roc_auc(&s, &lab, direction).unwrap().auc
        })
        .collect();
    aucs.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    Ok(AucInterval {
        level,
        lower: quantile_sorted(&aucs, a).min(point),
        upper: quantile_sorted(&aucs, 1.0 - a).max(point),
        replicates,
        seed,
        redraws: 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub cutoff: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// `None` when no row is predicted bad.
    pub precision: Option<f64>,
    /// `None` when no row is predicted good.
    pub npv: Option<f64>,
    pub youden: f64,
}

fn predicted_good(score: f64, cutoff: f64, direction: Direction) -> bool {
    match direction {
        Direction::HigherIsGood => score >= cutoff,
        Direction::HigherIsBad => score <= cutoff,
    }
}

pub fn confusion(scores: &[f64], y: &[bool], cutoff: f64, direction: Direction) -> Result<Confusion> {
    let (ng, nb) = check(scores, y)?;
    let (mut tp, mut fp) = (0, 0);
    for (&s, &bad) in scores.iter().zip(y) {
        if !predicted_good(s, cutoff, direction) {
            if bad {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let (fn_, tn) = (nb - tp, ng - fp);
    let ratio = |a: usize, b: usize| if b == 0 { None } else { Some(a as f64 / b as f64) };
    let sensitivity = tp as f64 / nb as f64;
    let specificity = tn as f64 / ng as f64;
    Ok(Confusion {
        cutoff,
        tp,
        fp,
        tn,
        fn_,
        accuracy: (tp + tn) as f64 / y.len() as f64,
        sensitivity,
        specificity,
        precision: ratio(tp, tp + fp),
        npv: ratio(tn, tn + fn_),
        youden: sensitivity + specificity - 1.0,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffObjective {
    Misclassification,
    #[default]
    Youden,
}

/// Best cutoff among the observed scores; ties go to the lower cutoff.
pub fn optimal_cutoff(
    scores: &[f64],
    y: &[bool],
    objective: CutoffObjective,
    direction: Direction,
) -> Result<Confusion> {
    check(scores, y)?;
    let mut cuts = scores.to_vec();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut best: Option<(f64, Confusion)> = None;
    for c in cuts {
        let m = confusion(scores, y, c, direction)?;
        let value = match objective {
            CutoffObjective::Misclassification => -((m.fp + m.fn_) as f64),
            CutoffObjective::Youden => m.youden,
        };
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, m));
        }
    }
    Ok(best.unwrap().1)
}

/// Herfindahl–Hirschman concentration of grade counts.
pub fn hhi(counts: &[u64]) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::Degenerate("all grade counts are zero".into()));
    }
    Ok(counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum())
}

/// Two-sided exact binomial test p-value of `k` successes in `n` trials
/// (sum of the probabilities of all outcomes no more likely than `k`).
pub fn binomial_two_sided(k: u64, n: u64, p: f64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidParameter(format!("{k} successes in {n} trials")));
    }
    let dist = Binomial::new(p, n).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let d = dist.pmf(k);
    let bound = d * (1.0 + 1e-7);
    let total: f64 = (0..=n).map(|i| dist.pmf(i)).filter(|&q| q <= bound).sum();
    Ok(total.min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grade {
    pub grade: usize,
    pub lower: f64,
    pub upper: f64,
    /// Mean predicted pd of the grade on the sample the grades were formed on.
    pub pd: f64,
    pub count: u64,
    pub bad: u64,
    pub observed_rate: f64,
    pub binomial_p: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HosmerLemeshow {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralTendency {
    pub mean_pd: f64,
    pub observed_rate: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeTable {
    /// Ascending pd cut points between grades.
    pub breaks: Vec<f64>,
    pub grades: Vec<Grade>,
    pub hhi: f64,
    pub test_level: Option<f64>,
    pub hosmer_lemeshow: Option<HosmerLemeshow>,
    pub central_tendency: Option<CentralTendency>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl GradeTable {
    /// 1-based grade of a pd value.
    pub fn grade_of(&self, pd: f64) -> usize {
        self.breaks.partition_point(|&b| b <= pd) + 1
    }

    /// The same grade boundaries filled with counts from another sample.
    /// Grade pds keep their original values.
    pub fn regrade(&self, pd: &[f64], y: &[bool]) -> Result<GradeTable> {
        if pd.len() != y.len() {
            return Err(Error::InvalidParameter(format!("{} pds for {} labels", pd.len(), y.len())));
        }
        let mut out = self.clone();
        for g in &mut out.grades {
            g.count = 0;
            g.bad = 0;
            g.binomial_p = None;
            g.pass = None;
        }
        for (&p, &bad) in pd.iter().zip(y) {
            let g = &mut out.grades[self.grade_of(p) - 1];
            g.count += 1;
            g.bad += u64::from(bad);
        }
        for g in &mut out.grades {
            g.observed_rate = if g.count > 0 { g.bad as f64 / g.count as f64 } else { 0.0 };
        }
        out.hhi = hhi(&out.grades.iter().map(|g| g.count).collect::<Vec<_>>())?;
        out.test_level = None;
        out.hosmer_lemeshow = None;
        out.central_tendency = None;
        out.warnings.clear();
        Ok(out)
    }
}

/// Rating grades from WoE-merge binning of predicted pds against outcomes.
pub fn master_scale(pd: &[f64], y: &[bool], params: &BinningParams) -> Result<GradeTable> {
    if pd.len() != y.len() {
        return Err(Error::InvalidParameter(format!("{} pds for {} labels", pd.len(), y.len())));
    }
    if let Some(p) = pd.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::InvalidParameter(format!("pd must lie in (0, 1), got {p}")));
    }
    let params = BinningParams {
        method: BinningMethod::WoeMerge,
        ..params.clone()
    };
    let col = Column::from_f64("pd", pd);
    let var = bin_column(&col, y, &params)?;
    let BinRule::Numeric { breaks } = var.rule else { unreachable!() };
    let mut edges = vec![0.0];
    edges.extend_from_slice(&breaks);
    edges.push(1.0);
    let mut sums = vec![0.0; breaks.len() + 1];
    let mut grades: Vec<Grade> = (0..=breaks.len())
        .map(|i| Grade {
            grade: i + 1,
            lower: edges[i],
            upper: edges[i + 1],
            pd: 0.0,
            count: 0,
            bad: 0,
            observed_rate: 0.0,
            binomial_p: None,
            pass: None,
        })
        .collect();
    for (&p, &bad) in pd.iter().zip(y) {
        let g = breaks.partition_point(|&b| b <= p);
        sums[g] += p;
        grades[g].count += 1;
        grades[g].bad += u64::from(bad);
    }
    for (g, s) in grades.iter_mut().zip(&sums) {
        g.pd = s / g.count as f64;
        g.observed_rate = g.bad as f64 / g.count as f64;
    }
    let mut warnings = var.warnings.clone();
    if grades.len() < 2 {
        warnings.push("fewer than two grades achievable; a single grade is returned".to_string());
    }
    let hhi = hhi(&grades.iter().map(|g| g.count).collect::<Vec<_>>())?;
    Ok(GradeTable {
        breaks,
        grades,
        hhi,
        test_level: None,
        hosmer_lemeshow: None,
        central_tendency: None,
        warnings,
    })
}

/// Per-grade exact binomial tests, Hosmer–Lemeshow and central tendency.
pub fn calibration_tests(gt: &GradeTable, level: f64, tolerance: f64) -> Result<GradeTable> {
    let mut out = gt.clone();
    let mut stat = 0.0;
    let (mut n, mut bad, mut pd_mass) = (0u64, 0u64, 0.0);
    for g in &mut out.grades {
        if !(g.pd > 0.0 && g.pd < 1.0) {
            return Err(Error::InvalidParameter(format!("grade {} has pd {}", g.grade, g.pd)));
        }
        if g.count == 0 {
            out.warnings.push(format!("grade {} is empty and was not tested", g.grade));
            continue;
        }
        let p = binomial_two_sided(g.bad, g.count, g.pd)?;
        g.binomial_p = Some(p);
        g.pass = Some(p >= level);
        let e = g.count as f64 * g.pd;
        stat += (g.bad as f64 - e).powi(2) / (e * (1.0 - g.pd));
        n += g.count;
        bad += g.bad;
        pd_mass += g.count as f64 * g.pd;
    }
    if n == 0 {
        return Err(Error::Degenerate("all grades are empty".into()));
    }
    out.test_level = Some(level);
    if out.grades.len() > 2 {
        let df = out.grades.len() - 2;
        let chi = ChiSquared::new(df as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        out.hosmer_lemeshow = Some(HosmerLemeshow {
            statistic: stat,
            df,
            p_value: chi.sf(stat),
        });
    } else {
        out.hosmer_lemeshow = None;
        out.warnings.push("Hosmer-Lemeshow omitted: fewer than 3 grades".to_string());
    }
    let mean_pd = pd_mass / n as f64;
    let observed = bad as f64 / n as f64;
    out.central_tendency = Some(CentralTendency {
        mean_pd,
        observed_rate: observed,
        tolerance,
        pass: (observed - mean_pd).abs() <= tolerance * mean_pd,
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub n: usize,
    pub n_bad: usize,
    pub auc: f64,
    pub gini: f64,
    pub ks: f64,
    pub direction: Direction,
    pub ci: Option<AucInterval>,
    pub confusion: Confusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOptions {
    pub direction: Direction,
    /// Bootstrap replicates; no interval when `None`.
    pub bootstrap: Option<usize>,
    pub seed: u64,
    pub level: f64,
    /// Fixed cutoff; the Youden-optimal one when `None`.
    pub cutoff: Option<f64>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            direction: Direction::HigherIsGood,
            bootstrap: Some(2000),
            seed: 42,
            level: 0.95,
            cutoff: None,
        }
    }
}

pub fn evaluate(scores: &[f64], y: &[bool], options: &EvaluateOptions) -> Result<PerformanceReport> {
    let a = roc_auc(scores, y, options.direction)?;
    let ci = match options.bootstrap {
        Some(b) => Some(auc_ci_bootstrap(scores, y, options.direction, b, options.seed, options.level)?),
        None => None,
    };
    let confusion = match options.cutoff {
        Some(c) => confusion(scores, y, c, options.direction)?,
        None => optimal_cutoff(scores, y, CutoffObjective::Youden, options.direction)?,
    };
    Ok(PerformanceReport {
        n: y.len(),
        n_bad: y.iter().filter(|&&b| b).count(),
        auc: a.auc,
        gini: a.gini,
        ks: ks(scores, y)?,
        direction: options.direction,
        ci,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use statrs::distribution::Normal;

    fn split(good: &[f64], bad: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let mut s = good.to_vec();
        s.extend_from_slice(bad);
        let mut y = vec![false; good.len()];
        y.extend(vec![true; bad.len()]);
        (s, y)
    }

    /// Exhaustive pair counting.
    fn auc_pairs(s: &[f64], y: &[bool]) -> f64 {
        let (mut sum, mut pairs) = (0.0, 0.0);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if !y[i] && y[j] {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        sum += 1.0;
                    } else if s[i] == s[j] {
                        sum += 0.5;
                    }
                }
            }
        }
        sum / pairs
    }

    /// ECDF difference at every distinct score, each counted from scratch.
    fn ks_sweep(s: &[f64], y: &[bool]) -> f64 {
        let ng = y.iter().filter(|&&b| !b).count() as f64;
        let nb = y.iter().filter(|&&b| b).count() as f64;
        let mut best: f64 = 0.0;
        for &t in s {
            let g = (0..s.len()).filter(|&i| !y[i] && s[i] <= t).count() as f64;
            let b = (0..s.len()).filter(|&i| y[i] && s[i] <= t).count() as f64;
            best = best.max((g / ng - b / nb).abs());
        }
        best
    }

    #[test]
    fn auc_examples() {
        let (s, y) = split(&[2.0, 3.0], &[1.0]);
        let a = roc_auc(&s, &y, Direction::HigherIsGood).unwrap();
        assert_eq!((a.auc, a.gini), (1.0, 1.0));
        let (s, y) = split(&[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(roc_auc(&s, &y, Direction::HigherIsGood).unwrap().gini, 0.0);
        let (s, y) = split(&[1.0, 2.0], &[1.0]);
        assert_eq!(roc_auc(&s, &y, Direction::HigherIsGood).unwrap().auc, 0.75);
        assert!(roc_auc(&[1.0, 2.0], &[true, true], Direction::HigherIsGood).is_err());
    }

    #[test]
    fn ks_examples() {
        let (s, y) = split(&[3.0, 4.0], &[1.0, 2.0]);
        assert_eq!(ks(&s, &y).unwrap(), 1.0);
        let (s, y) = split(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(ks(&s, &y).unwrap(), 0.0);
        let (s, y) = split(&[1.0, 3.0], &[2.0, 4.0]);
        assert_eq!(ks(&s, &y).unwrap(), 0.5);
    }

    #[test]
    fn confusion_examples() {
        let (s, y) = split(&[5.0, 6.0, 7.0], &[1.0, 2.0, 6.0]);
        let m = confusion(&s, &y, 4.0, Direction::HigherIsGood).unwrap();
        assert_eq!((m.tp, m.fn_, m.tn, m.fp), (2, 1, 3, 0));
        assert!((m.accuracy - 5.0 / 6.0).abs() < 1e-15);
        let all_good = confusion(&s, &y, 0.0, Direction::HigherIsGood).unwrap();
        assert_eq!((all_good.sensitivity, all_good.specificity), (0.0, 1.0));
        assert_eq!(all_good.precision, None);
        let (s, y) = split(&[5.0, 6.0], &[1.0, 2.0]);
        let best = optimal_cutoff(&s, &y, CutoffObjective::Youden, Direction::HigherIsGood).unwrap();
        assert_eq!(best.youden, 1.0);
        assert_eq!(best.cutoff, 5.0);
        let mis = optimal_cutoff(&s, &y, CutoffObjective::Misclassification, Direction::HigherIsGood).unwrap();
        assert_eq!(mis.fp + mis.fn_, 0);
    }

    #[test]
    fn hhi_examples() {
        assert!((hhi(&[1, 1, 1, 1, 1]).unwrap() - 0.2).abs() < 1e-15);
        assert!((hhi(&[70, 30]).unwrap() - 0.58).abs() < 1e-15);
        assert_eq!(hhi(&[0, 9, 0]).unwrap(), 1.0);
        assert!(hhi(&[0, 0]).is_err());
    }

    #[test]
    fn binomial_test() {
        assert!(binomial_two_sided(30, 100, 0.05).unwrap() < 1e-10);
        // symmetric case: P(X ≤ 2 or X ≥ 8) for Bin(10, 0.5) = 112/1024
        assert!((binomial_two_sided(2, 10, 0.5).unwrap() - 112.0 / 1024.0).abs() < 1e-12);
        assert!((binomial_two_sided(5, 10, 0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    fn grade_table(pds: &[f64], counts: &[u64], bads: &[u64]) -> GradeTable {
        let grades: Vec<Grade> = pds
            .iter()
            .enumerate()
            .map(|(i, &pd)| Grade {
                grade: i + 1,
                lower: 0.0,
                upper: 0.0,
                pd,
                count: counts[i],
                bad: bads[i],
                observed_rate: bads[i] as f64 / counts[i] as f64,
                binomial_p: None,
                pass: None,
            })
            .collect();
        GradeTable {
            breaks: vec![],
            hhi: hhi(counts).unwrap(),
            grades,
            test_level: None,
            hosmer_lemeshow: None,
            central_tendency: None,
            warnings: vec![],
        }
    }

    #[test]
    fn calibration_examples() {
        let exact = grade_table(&[0.1, 0.2, 0.5], &[100, 100, 100], &[10, 20, 50]);
        let t = calibration_tests(&exact, 0.05, 0.2).unwrap();
        assert_eq!(t.hosmer_lemeshow.as_ref().unwrap().statistic, 0.0);
        assert_eq!(t.hosmer_lemeshow.as_ref().unwrap().df, 1);
        assert!(t.grades.iter().all(|g| g.pass == Some(true)));
        assert!(t.central_tendency.unwrap().pass);
        let off = calibration_tests(&grade_table(&[0.05], &[100], &[30]), 0.05, 0.2).unwrap();
        assert_eq!(off.grades[0].pass, Some(false));
        assert!(off.hosmer_lemeshow.is_none());
        assert!(!off.warnings.is_empty());
        assert!(!off.central_tendency.unwrap().pass);
    }

    #[test]
    fn master_scale_examples() {
        let constant = master_scale(&[0.2; 50], &(0..50).map(|i| i % 5 == 0).collect::<Vec<_>>(), &BinningParams::default()).unwrap();
        assert_eq!(constant.grades.len(), 1);
        // bimodal: 200 rows at pd ≈ 0.1 (10% bad), 200 at pd ≈ 0.6 (60% bad)
        let mut pd = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            pd.push(0.08 + 0.0001 * i as f64);
            y.push(i % 10 == 0);
        }
        for i in 0..200 {
            pd.push(0.58 + 0.0001 * i as f64);
            y.push(i % 10 < 6);
        }
        let gt = master_scale(&pd, &y, &BinningParams::default()).unwrap();
        assert_eq!(gt.grades.len(), 2, "{:?}", gt.breaks);
        assert!(gt.breaks[0] > 0.1 && gt.breaks[0] < 0.58);
        assert!(gt.grades.windows(2).all(|w| w[1].pd > w[0].pd));
        assert_eq!(gt.grades.iter().map(|g| g.count).sum::<u64>(), 400);
        let re = gt.regrade(&pd, &y).unwrap();
        assert_eq!(re.grades.iter().map(|g| g.count).collect::<Vec<_>>(), vec![200, 200]);
        assert!(master_scale(&[0.0, 0.5], &[true, false], &BinningParams::default()).is_err());
    }

    #[test]
    fn bootstrap_is_deterministic_and_collapses_when_separated() {
        let good: Vec<f64> = (0..60).map(|i| 100.0 + i as f64).collect();
        let bad: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let (s, y) = split(&good, &bad);
        let a = auc_ci_bootstrap(&s, &y, Direction::HigherIsGood, 200, 9, 0.95).unwrap();
        let b = auc_ci_bootstrap(&s, &y, Direction::HigherIsGood, 200, 9, 0.95).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.lower, a.upper), (1.0, 1.0));
        assert!(auc_ci_bootstrap(&s, &y, Direction::HigherIsGood, 50, 9, 0.95).is_err());
    }

    #[test]
    fn bootstrap_coverage() {
        // goods ~ N(d, 1), bads ~ N(0, 1) with d = √2·Φ⁻¹(0.75): true auc 0.75
        let std = Normal::new(0.0, 1.0).unwrap();
        let d = 2f64.sqrt() * std.inverse_cdf(0.75);
        let mut covered_point = 0;
        let mut covered_true = 0;
        for rep in 0..100u64 {
            let mut rng = seeded_rng(1000 + rep);
            let mut draw = || std.inverse_cdf(rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12));
            let good: Vec<f64> = (0..100).map(|_| d + draw()).collect();
            let bad: Vec<f64> = (0..100).map(|_| draw()).collect();
            let (s, y) = split(&good, &bad);
            let point = roc_auc(&s, &y, Direction::HigherIsGood).unwrap().auc;
            let ci = auc_ci_bootstrap(&s, &y, Direction::HigherIsGood, 500, rep, 0.95).unwrap();
            covered_point += usize::from(ci.lower <= point && point <= ci.upper);
            covered_true += usize::from(ci.lower <= 0.75 && 0.75 <= ci.upper);
        }
        assert!(covered_point >= 93);
        assert!(covered_true >= 88, "{covered_true}");
    }

    #[test]
    fn evaluate_report() {
        let (s, y) = split(&[5.0, 6.0, 7.0, 8.0], &[1.0, 2.0, 6.0]);
        let r = evaluate(&s, &y, &EvaluateOptions { bootstrap: Some(100), ..Default::default() }).unwrap();
        assert!((r.gini - 2.0 * (r.auc - 0.5)).abs() < 1e-15);
        let ci = r.ci.clone().unwrap();
        assert!(ci.lower <= r.auc && r.auc <= ci.upper);
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<PerformanceReport>(&text).unwrap(), r);
        let roc = roc_curve(&s, &y, Direction::HigherIsGood).unwrap();
        assert_eq!(*roc.last().unwrap(), (1.0, 1.0));
        let trapezoid: f64 = roc.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        assert!((trapezoid - r.auc).abs() < 1e-12);
        let e = ecdf_curves(&s, &y).unwrap();
        let ks_from_curve = e.iter().map(|p| (p.1 - p.2).abs()).fold(0.0, f64::max);
        assert_eq!(ks_from_curve, r.ks);
    }

    fn sample() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        prop::collection::vec((0u8..12, any::<bool>()), 2..31)
            .prop_map(|v| (v.iter().map(|p| p.0 as f64).collect(), v.iter().map(|p| p.1).collect()))
            .prop_filter("both classes", |(_, y): &(Vec<f64>, Vec<bool>)| y.iter().any(|&b| b) && y.iter().any(|&b| !b))
    }

    proptest! {
        #[test]
        fn auc_and_ks_match_brute_force((s, y) in sample()) {
            prop_assert_eq!(roc_auc(&s, &y, Direction::HigherIsGood).unwrap().auc, auc_pairs(&s, &y));
            prop_assert_eq!(ks(&s, &y).unwrap(), ks_sweep(&s, &y));
        }

        #[test]
        fn auc_direction_and_monotone_invariance((s, y) in sample()) {
            let a = roc_auc(&s, &y, Direction::HigherIsGood).unwrap().auc;
            let b = roc_auc(&s, &y, Direction::HigherIsBad).unwrap().auc;
            prop_assert!((a + b - 1.0).abs() < 1e-12);
            let t: Vec<f64> = s.iter().map(|v| (v * 0.3).exp() + 5.0).collect();
            prop_assert_eq!(roc_auc(&t, &y, Direction::HigherIsGood).unwrap().auc, a);
            prop_assert_eq!(ks(&t, &y).unwrap(), ks(&s, &y).unwrap());
        }

        #[test]
        fn confusion_counts_partition((s, y) in sample(), cutoff in 0.0f64..12.0) {
            let m = confusion(&s, &y, cutoff, Direction::HigherIsGood).unwrap();
            prop_assert_eq!(m.tp + m.fp + m.tn + m.fn_, s.len());
            prop_assert!((-1.0..=1.0).contains(&m.youden));
        }
    }
}
