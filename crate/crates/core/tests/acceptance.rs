//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary
//! (`harness = false`) and exits nonzero when any criterion fails.

use std::time::Instant;

use rand::Rng;
use scorecard_forge::binning::{auto_bin, bin_column, ApplyTarget, BinningParams, UnseenPolicy};
use scorecard_forge::data::{seeded_rng, split, ColumnKind, Dataset, SplitSpec};
use scorecard_forge::logit::{fit_logit, score_vector, FeatureMatrix, FitOptions};
use scorecard_forge::performance::{ks, roc_auc, Direction};
use scorecard_forge::pipeline::{predict_pd, run_pipeline, PipelineConfig};
use scorecard_forge::reject::{augmentation_weights, parcelling, ParcellingSpec};
use scorecard_forge::scorecard::{minimax_affine_fit, score_to_odds, score_to_pd, ScalingParams};
use scorecard_forge::woe::{woe_table, WoeConvention};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pipeline_config() -> PipelineConfig {
    PipelineConfig {
        preselect: None,
        ..PipelineConfig::default()
    }
}

fn bin_counts_band() -> Outcome {
    let ds = Dataset::german_credit();
    let flags = ds.target_flags().unwrap();
    let numeric: Vec<String> = ds
        .predictors()
        .into_iter()
        .filter(|n| ds.column(n).unwrap().kind() == ColumnKind::Numeric)
        .collect();
    if numeric.len() != 7 {
        return Err(format!("{} numeric variables, expected 7", numeric.len()));
    }
    let start = Instant::now();
    let mut counts = Vec::new();
    for n in &numeric {
        let v = bin_column(ds.column(n).unwrap(), &flags, &BinningParams::default()).map_err(|e| e.to_string())?;
        counts.push((n.clone(), v.rule.n_value_bins()));
    }
    let secs = start.elapsed().as_secs_f64();
    let key = ["age.in.years", "credit.amount", "duration.in.month"];
    let in_band = counts
        .iter()
        .filter(|(n, _)| key.contains(&n.as_str()))
        .all(|(_, c)| (2..=13).contains(c));
    let shown: Vec<String> = counts
        .iter()
        .filter(|(n, _)| key.contains(&n.as_str()))
        .map(|(n, c)| format!("{n}={c}"))
        .collect();
    check(in_band && secs < 10.0, format!("{} bins, 7 variables in {secs:.3}s", shown.join(" ")))
}

fn univariate_gini_band() -> Outcome {
    let ds = Dataset::german_credit();
    let (train, valid) = split(&ds, &SplitSpec::new(0.7, 42)).map_err(|e| e.to_string())?;
    let vars = vec!["duration.in.month".to_string(), "age.in.years".to_string()];
    let bins = auto_bin(&train, &vars, &BinningParams::default()).map_err(|e| e.to_string())?;
    let woe = bins
        .apply(&valid, ApplyTarget::Woe, UnseenPolicy::Neutral)
        .map_err(|e| e.to_string())?;
    let y = valid.target_flags().unwrap();
    let gini = |v: &str| {
        let col: Vec<f64> = woe.column(&format!("{v}_woe")).unwrap().numeric_values().unwrap().iter().map(|c| c.unwrap()).collect();
        roc_auc(&col, &y, Direction::HigherIsBad).unwrap().gini
    };
    let (gd, ga) = (gini("duration.in.month"), gini("age.in.years"));
    check(
        (0.15..=0.35).contains(&gd) && (0.06..=0.30).contains(&ga),
        format!("duration gini {gd:.4} in [0.15,0.35], age gini {ga:.4} in [0.06,0.30]"),
    )
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for k in i..=j {
            r[idx[k]] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}

fn full_pipeline() -> Outcome {
    let run = run_pipeline(&Dataset::german_credit(), &pipeline_config()).map_err(|e| e.to_string())?;
    let auc = run.evaluation.performance.auc;
    let exact = run.scorecard.score(&run.valid, UnseenPolicy::Neutral).unwrap().exact;
    let pd = predict_pd(&run.stepwise.model, &run.valid_woe).unwrap();
    let (rs, rp) = (ranks(&exact), ranks(&pd));
    let n = exact.len() as f64;
    let reversed = rs.iter().zip(&rp).all(|(a, b)| *a == n + 1.0 - b);
    check(
        auc >= 0.70 && reversed,
        format!(
            "validation auc {auc:.4} >= 0.70 with {} variables; rank correlation -1: {reversed}",
            run.scorecard.variables.len()
        ),
    )
}

fn affinity() -> Outcome {
    let run = run_pipeline(&Dataset::german_credit(), &pipeline_config()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for v in &run.scorecard.variables {
        let pts: Vec<(f64, f64)> = v.bins.iter().map(|b| (b.woe, b.points as f64)).collect();
        worst = worst.max(minimax_affine_fit(&pts).2);
    }
    let printed = [
        (-1.2988228, 65.0),
        (-0.3490774, 18.0),
        (0.1424939, -7.0),
        (0.4582511, -23.0),
        (0.9504426, -48.0),
    ];
    let (x0, y0) = printed[0];
    let (x4, y4) = printed[4];
    let line = |x: f64| y0 + (y4 - y0) / (x4 - x0) * (x - x0);
    let mids: Vec<String> = printed[1..4].iter().map(|p| format!("{:.3}", line(p.0))).collect();
    let table = minimax_affine_fit(&printed).2;
    check(
        worst <= 0.5 && table <= 0.5,
        format!(
            "max residual {worst:.4} over scorecard variables; printed table residual {table:.4} (end-line predictions {} vs 18/-7/-23)",
            mids.join("/")
        ),
    )
}

fn scaling_constants() -> Outcome {
    let p = ScalingParams::default();
    let at600 = score_to_pd(600.0, &p);
    let run = run_pipeline(&Dataset::german_credit(), &pipeline_config()).map_err(|e| e.to_string())?;
    let exact = run.scorecard.score(&run.valid, UnseenPolicy::Neutral).unwrap().exact;
    let worst = exact
        .iter()
        .map(|&s| (score_to_odds(s + 50.0, &p) / score_to_odds(s, &p) - 0.5).abs())
        .fold(0.0, f64::max);
    check(
        at600 == 0.05 && worst <= 4.0 * f64::EPSILON,
        format!("score_to_pd(600) = {at600}; max |odds(s+50)/odds(s) - 1/2| = {worst:e}"),
    )
}

fn auc_pairs(s: &[f64], y: &[bool]) -> f64 {
    let (mut sum, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if !y[i] && y[j] {
                pairs += 1.0;
                sum += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    sum / pairs
}

fn ks_sweep(s: &[f64], y: &[bool]) -> f64 {
    let ng = y.iter().filter(|&&b| !b).count() as f64;
    let nb = y.iter().filter(|&&b| b).count() as f64;
    s.iter()
        .map(|&t| {
            let g = (0..s.len()).filter(|&i| !y[i] && s[i] <= t).count() as f64;
            let b = (0..s.len()).filter(|&i| y[i] && s[i] <= t).count() as f64;
            (g / ng - b / nb).abs()
        })
        .fold(0.0, f64::max)
}

fn oracle_suite() -> Outcome {
    let mut rng = seeded_rng(20240601);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=30);
        let mut y: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        y[0] = true;
        y[1] = false;
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 * 0.25).collect();
        if roc_auc(&s, &y, Direction::HigherIsGood).unwrap().auc != auc_pairs(&s, &y) || ks(&s, &y).unwrap() != ks_sweep(&s, &y) {
            mismatches += 1;
        }
    }

    let t1 = woe_table(&[(3.0, 1.0), (1.0, 3.0)], 0.5, WoeConvention::BadOverGood);
    let t2 = woe_table(&[(3.0, 1.0), (2.0, 0.0)], 0.5, WoeConvention::BadOverGood);
    let single = woe_table(&[(5.0, 2.0)], 0.5, WoeConvention::BadOverGood);
    let woe_err = [
        (t1.woe[0] - (0.25f64 / 0.75).ln()).abs(),
        (t1.iv - 2.0 * 0.5 * 3f64.ln()).abs(),
        (t2.woe[1] - ((0.5f64 / 1.5) / 0.4).ln()).abs(),
        single.woe[0].abs(),
        single.iv.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let y0: Vec<bool> = (0..100).map(|i| i < 30).collect();
    let m0 = fit_logit(&FeatureMatrix::empty(100), &y0, None, &FitOptions::default()).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (xv, g, b) in [(0.0, 40, 10), (1.0, 10, 40)] {
        x.extend(std::iter::repeat_n(xv, g + b));
        y.extend(std::iter::repeat_n(false, g));
        y.extend(std::iter::repeat_n(true, b));
    }
    let xm = FeatureMatrix::new(vec!["x".into()], &[x]).unwrap();
    let m1 = fit_logit(&xm, &y, None, &FitOptions::default()).unwrap();
    let irls_err = [
        (m0.intercept - (0.3f64 / 0.7).ln()).abs(),
        (m1.intercept - 0.25f64.ln()).abs(),
        (m1.coefficients["x"] - 16f64.ln()).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let grad = score_vector(&m1, &xm, &y, None).unwrap().iter().fold(0.0f64, |a, g| a.max(g.abs()));

    check(
        mismatches == 0 && woe_err <= 1e-12 && irls_err <= 1e-8 && grad < 1e-6 * 100.0,
        format!(
            "auc/ks mismatches {mismatches}/1000; woe/iv error {woe_err:e}; irls error {irls_err:e}; score norm {grad:e}"
        ),
    )
}

fn reject_identities() -> Outcome {
    // weights must be the correctly rounded rationals (a + r)/a of their
    // band, and their sum the integer a + r over covered bands
    let mut rng = seeded_rng(7);
    let mut worst: f64 = 0.0;
    let mut exact_rows = true;
    for _ in 0..500 {
        let na = rng.random_range(1..200);
        let nr = rng.random_range(0..200);
        let acc: Vec<u32> = (0..na).map(|_| rng.random_range(0..11)).collect();
        let rej: Vec<u32> = (0..nr).map(|_| rng.random_range(0..11)).collect();
        let (w, bands) = augmentation_weights(&acc, &rej);
        let mut target = 0usize;
        for b in bands.iter().filter(|b| b.n_accepted > 0) {
            target += b.n_accepted + b.n_rejected;
            let band = (b.pd * 10.0).round() as u32;
            let expect = (b.n_accepted + b.n_rejected) as f64 / b.n_accepted as f64;
            exact_rows &= acc.iter().zip(&w).filter(|(a, _)| **a == band).all(|(_, v)| *v == expect && *v >= 1.0);
        }
        let total: f64 = w.iter().sum();
        exact_rows &= target == na + bands.iter().filter(|b| b.n_accepted > 0).map(|b| b.n_rejected).sum::<usize>();
        worst = worst.max((total - target as f64).abs() / target as f64);
    }
    let run = run_pipeline(&Dataset::german_credit(), &pipeline_config()).map_err(|e| e.to_string())?;
    let features = run.stepwise.model.feature_names();
    let accepted = run.train_woe.select(&features).unwrap();
    let rejected = Dataset::new(features.iter().map(|f| run.valid_woe.column(f).unwrap().clone()).collect()).unwrap();
    let mut totals: Vec<(f64, usize, usize)> = Vec::new();
    for seed in 0..50 {
        let spec = ParcellingSpec {
            seed,
            ..ParcellingSpec::default()
        };
        let r = parcelling(&accepted, &rejected, &spec, &FitOptions::default()).map_err(|e| e.to_string())?;
        if totals.is_empty() {
            totals = r.bands.iter().map(|b| (b.pd, 0, 0)).collect();
        }
        for (t, b) in totals.iter_mut().zip(&r.bands) {
            t.1 += b.n_inferred_bad;
            t.2 += b.n_rejected;
        }
    }
    let mut z_max: f64 = 0.0;
    let mut ok = true;
    for &(pd, bad, n) in &totals {
        if n == 0 {
            continue;
        }
        let rate = bad as f64 / n as f64;
        let se = (pd * (1.0 - pd) / n as f64).sqrt();
        let z = if se > 0.0 { (rate - pd).abs() / se } else if rate == pd { 0.0 } else { f64::INFINITY };
        ok &= (rate - pd).abs() <= 2.0 * se;
        z_max = z_max.max(z);
    }
    check(
        exact_rows && worst <= 1e-12 && ok,
        format!(
            "row weights exact: {exact_rows}, weight-sum relative rounding {worst:e} over 500 configurations; parcelling max |rate - PD|/SE = {z_max:.3} over {} bands, 50 seeds",
            totals.len()
        ),
    )
}

fn determinism() -> Outcome {
    let a = run_pipeline(&Dataset::german_credit(), &pipeline_config()).map_err(|e| e.to_string())?;
    let b = run_pipeline(&Dataset::german_credit(), &pipeline_config()).map_err(|e| e.to_string())?;
    let (ja, jb) = (a.scorecard.to_json().unwrap(), b.scorecard.to_json().unwrap());
    check(ja == jb, format!("scorecard JSON {} bytes, identical: {}", ja.len(), ja == jb))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("bin-count band (age/amount/duration 2-13, 7 variables < 10 s)", bin_counts_band),
        ("univariate validation gini band (duration, age)", univariate_gini_band),
        ("full pipeline: validation AUC >= 0.70, score/pd rank correlation -1", full_pipeline),
        ("points affinity: minimax residual <= 0.5", affinity),
        ("scaling constants: score_to_pd(600) = 0.05, pdo law", scaling_constants),
        ("oracle equivalence suite", oracle_suite),
        ("reject inference identities", reject_identities),
        ("determinism: identical scorecard JSON", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
