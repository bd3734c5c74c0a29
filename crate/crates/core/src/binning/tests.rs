use proptest::prelude::*;

use super::algorithms::{best_split, chi2_2x2, group_counts};
use super::*;
use crate::data::{encode_target, TargetSpec};
use crate::woe::information_value;

fn encoded(columns: Vec<Column>) -> Dataset {
    let ds = Dataset::new(columns).unwrap();
    encode_target(&ds, &TargetSpec::new("y", "bad", "good")).unwrap()
}

/// x in {1, 3, …, 19}, 20 rows each, bad iff x >= 11.
fn step_data() -> Dataset {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for v in (1..20).step_by(2) {
        for _ in 0..20 {
            x.push(v as f64);
            y.push(if v >= 11 { "bad" } else { "good" });
        }
    }
    encoded(vec![Column::from_f64("x", &x), Column::from_strs("y", &y)])
}

fn with_missing() -> Dataset {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..200 {
        x.push(if i % 10 == 0 { None } else { Some((i % 50) as f64) });
        y.push(Some(if i % 50 >= 30 || i % 10 == 0 { "bad" } else { "good" }.to_string()));
    }
    encoded(vec![Column::numeric("x", x), Column::categorical("y", y)])
}

fn categorical_data() -> Dataset {
    let mut c = Vec::new();
    let mut y = Vec::new();
    let spec = [("A", 40, 4), ("B", 40, 20), ("C", 40, 8), ("D", 40, 30), ("E", 40, 22)];
    for (level, n, bad) in spec {
        for i in 0..n {
            c.push(level);
            y.push(if i < bad { "bad" } else { "good" });
        }
    }
    encoded(vec![Column::from_strs("c", &c), Column::from_strs("y", &y)])
}

#[test]
fn tree_finds_the_step() {
    let ds = step_data();
    let model = auto_bin(&ds, &[], &BinningParams::default()).unwrap();
    let v = model.variable("x").unwrap();
    assert_eq!(v.rule, BinRule::Numeric { breaks: vec![10.0] });
    assert_eq!(v.labels(), vec!["[-Inf,10)", "[10,Inf)"]);
    assert_eq!(v.bins[0].good, 100);
    assert_eq!(v.bins[1].bad, 100);
}

#[test]
fn every_method_finds_the_step() {
    for method in [
        BinningMethod::Tree,
        BinningMethod::Chimerge,
        BinningMethod::WoeMerge,
    ] {
        let params = BinningParams {
            method,
            ..Default::default()
        };
        let model = auto_bin(&step_data(), &[], &params).unwrap();
        assert_eq!(
            model.variable("x").unwrap().rule,
            BinRule::Numeric { breaks: vec![10.0] },
            "{method:?}"
        );
    }
}

#[test]
fn equal_width_and_freq_cover_all_rows() {
    for method in [BinningMethod::EqualWidth, BinningMethod::EqualFreq] {
        let params = BinningParams {
            method,
            max_bins: 5,
            ..Default::default()
        };
        let model = auto_bin(&step_data(), &[], &params).unwrap();
        let v = model.variable("x").unwrap();
        assert!(v.bins.len() <= 5 && v.bins.len() >= 2, "{method:?}");
        assert_eq!(v.bins.iter().map(|b| b.count).sum::<u64>(), 200);
    }
}

#[test]
fn method_names_parse() {
    assert_eq!("equal-freq".parse::<BinningMethod>().unwrap(), BinningMethod::EqualFreq);
    assert_eq!("ChiMerge".parse::<BinningMethod>().unwrap(), BinningMethod::Chimerge);
    assert!("kmeans".parse::<BinningMethod>().is_err());
}

#[test]
fn params_are_validated() {
    let bad = [
        BinningParams { min_bin_fraction: 0.0, ..Default::default() },
        BinningParams { stop_limit: 1.0, ..Default::default() },
        BinningParams { max_bins: 1, ..Default::default() },
        BinningParams { alpha: 0.0, ..Default::default() },
        BinningParams { zero_adj: -1.0, ..Default::default() },
    ];
    for p in bad {
        assert!(matches!(auto_bin(&step_data(), &[], &p), Err(Error::InvalidParameter(_))));
    }
}

#[test]
fn missing_gets_own_bin_last() {
    let model = auto_bin(&with_missing(), &[], &BinningParams::default()).unwrap();
    let v = model.variable("x").unwrap();
    let last = v.bins.last().unwrap();
    assert_eq!(last.bin, MISSING_LABEL);
    assert!(last.is_missing);
    assert_eq!(last.count, 20);
    assert_eq!(last.bad, 20);
    assert_eq!(v.bins.iter().map(|b| b.count).sum::<u64>(), 200);
}

#[test]
fn missing_merge_nearest_pools_with_closest_bad_rate() {
    let params = BinningParams {
        missing_policy: MissingPolicy::MergeNearest,
        ..Default::default()
    };
    let model = auto_bin(&with_missing(), &[], &params).unwrap();
    let v = model.variable("x").unwrap();
    let MissingBin::MergedInto(i) = v.missing else { panic!("{:?}", v.missing) };
    assert!(v.bins[i].bin.ends_with("%,%missing"));
    assert_eq!(v.bins.len(), v.rule.n_value_bins());
    // the all-bad missing rows join the highest-risk bin
    let worst = (0..v.bins.len())
        .max_by(|&a, &b| v.bins[a].badprob.total_cmp(&v.bins[b].badprob))
        .unwrap();
    assert_eq!(i, worst);
}

#[test]
fn conservative_missing_is_never_better_than_neutral() {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..200 {
        x.push(if i < 20 { None } else { Some((i % 7) as f64) });
        y.push(Some(if i >= 20 && i % 3 == 0 { "bad" } else { "good" }.to_string()));
    }
    let ds = encoded(vec![Column::numeric("x", x), Column::categorical("y", y)]);
    let plain = auto_bin(&ds, &[], &BinningParams::default()).unwrap();
    assert!(plain.variable("x").unwrap().bins.last().unwrap().woe < 0.0);
    let params = BinningParams {
        conservative_missing: true,
        ..Default::default()
    };
    let model = auto_bin(&ds, &[], &params).unwrap();
    let last = model.variable("x").unwrap().bins.last().unwrap().clone();
    assert_eq!(last.woe, 0.0);
}

#[test]
fn categorical_groups_follow_woe_order() {
    let params = BinningParams {
        min_bin_fraction: 0.1,
        ..Default::default()
    };
    let model = auto_bin(&categorical_data(), &[], &params).unwrap();
    let v = model.variable("c").unwrap();
    let BinRule::Categorical { groups } = &v.rule else { panic!() };
    let mut all: Vec<String> = groups.iter().flatten().cloned().collect();
    all.sort();
    assert_eq!(all, ["A", "B", "C", "D", "E"]);
    // groups are contiguous in WoE order, so bin bad rates are sorted
    let rates: Vec<f64> = v.bins.iter().map(|b| b.badprob).collect();
    assert!(rates.windows(2).all(|w| w[0] <= w[1]), "{rates:?}");
}

#[test]
fn rare_levels_are_bundled_before_grouping() {
    let mut ds = categorical_data();
    let mut c: Vec<String> = (0..ds.n_rows()).map(|i| ds.column("c").unwrap().cell_text(i).unwrap()).collect();
    c[0] = "Z".into();
    ds.replace_column("c", Column::from_strs("c", &c)).unwrap();
    let params = BinningParams {
        rare_level_threshold: 0.01,
        ..Default::default()
    };
    let model = auto_bin(&ds, &[], &params).unwrap();
    let v = model.variable("c").unwrap();
    assert!(v.known_levels().contains(&"Z".to_string()));
    let col = ds.column("c").unwrap();
    assert!(matches!(v.assign(col, 0, UnseenPolicy::Error), Ok(Assignment::Bin(_))));
}

#[test]
fn constant_variable_warns() {
    let y: Vec<&str> = (0..40).map(|i| if i % 4 == 0 { "bad" } else { "good" }).collect();
    let ds = encoded(vec![Column::from_f64("k", &[1.0; 40]), Column::from_strs("y", &y)]);
    let model = auto_bin(&ds, &[], &BinningParams::default()).unwrap();
    let v = model.variable("k").unwrap();
    assert_eq!(v.bins.len(), 1);
    assert_eq!(v.total_iv, 0.0);
    assert!(!v.warnings.is_empty());
}

#[test]
fn set_breaks_rebins_from_stored_counts() {
    let model = auto_bin(&step_data(), &[], &BinningParams::default()).unwrap();
    let edited = model.set_breaks("x", &BinEdit::Breaks(vec![6.0, 10.0, 14.0])).unwrap();
    let v = edited.variable("x").unwrap();
    assert_eq!(v.labels(), vec!["[-Inf,6)", "[6,10)", "[10,14)", "[14,Inf)"]);
    assert_eq!(v.bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![60, 40, 40, 60]);
    // edited and directly binned agree
    let direct = edited.apply(&step_data(), ApplyTarget::Bin, UnseenPolicy::Error).unwrap();
    let col = direct.column("x_bin").unwrap().categorical_values().unwrap();
    assert_eq!(col[0].as_deref(), Some("[-Inf,6)"));
    assert_eq!(col[199].as_deref(), Some("[14,Inf)"));
}

#[test]
fn set_breaks_rejects_invalid_edits() {
    let model = auto_bin(&step_data(), &[], &BinningParams::default()).unwrap();
    for edit in [
        BinEdit::Breaks(vec![5.0, 5.0]),
        BinEdit::Breaks(vec![7.0, 3.0]),
        BinEdit::Breaks(vec![f64::NAN]),
        BinEdit::Groups(vec![vec!["a".into()]]),
    ] {
        assert!(matches!(model.set_breaks("x", &edit), Err(Error::InvalidBreaks { .. })), "{edit:?}");
    }
    assert!(matches!(
        model.set_breaks("nope", &BinEdit::Breaks(vec![])),
        Err(Error::UnknownVariable(_))
    ));
    let cat = auto_bin(&categorical_data(), &[], &BinningParams::default()).unwrap();
    let bad_groups = [
        vec![vec!["A".to_string(), "B".into()], vec!["C".into(), "D".into()]],
        vec![vec!["A".to_string(), "B".into(), "C".into(), "D".into(), "E".into(), "Q".into()]],
        vec![vec!["A".to_string(), "B".into(), "C".into()], vec!["C".into(), "D".into(), "E".into()]],
        vec![vec![], vec!["A".to_string(), "B".into(), "C".into(), "D".into(), "E".into()]],
    ];
    for g in bad_groups {
        assert!(cat.set_breaks("c", &BinEdit::Groups(g)).is_err());
    }
    let ok = cat
        .set_breaks(
            "c",
            &BinEdit::Groups(vec![vec!["A".into(), "C".into()], vec!["B".into(), "D".into(), "E".into()]]),
        )
        .unwrap();
    assert_eq!(ok.variable("c").unwrap().labels(), vec!["A%,%C", "B%,%D%,%E"]);
}

#[test]
fn apply_woe_uses_training_woe() {
    let ds = step_data();
    let model = auto_bin(&ds, &[], &BinningParams::default()).unwrap();
    let out = model.apply(&ds, ApplyTarget::Woe, UnseenPolicy::Error).unwrap();
    let w = out.column("x_woe").unwrap().numeric_values().unwrap();
    let v = model.variable("x").unwrap();
    assert_eq!(w[0], Some(v.bins[0].woe));
    assert_eq!(w[199], Some(v.bins[1].woe));
    assert!(!out.has_column("x"));
    assert!(out.has_column("y"));
}

#[test]
fn unseen_levels_follow_policy() {
    let train = categorical_data();
    let model = auto_bin(&train, &[], &BinningParams::default()).unwrap();
    let mut c = vec!["A"; 4];
    c[1] = "NEW";
    let y = ["good", "bad", "good", "bad"];
    let new = encoded(vec![Column::from_strs("c", &c), Column::from_strs("y", &y)]);
    assert!(matches!(
        model.apply(&new, ApplyTarget::Woe, UnseenPolicy::Error),
        Err(Error::UnseenLevel { .. })
    ));
    // no missing bin in training, so routing to it fails too
    assert!(model.apply(&new, ApplyTarget::Woe, UnseenPolicy::MissingBin).is_err());
    let out = model.apply(&new, ApplyTarget::Bin, UnseenPolicy::Neutral).unwrap();
    let labels = out.column("c_bin").unwrap().categorical_values().unwrap();
    assert_eq!(labels[1].as_deref(), Some(UNSEEN_LABEL));
    let woe = model.apply(&new, ApplyTarget::Woe, UnseenPolicy::Neutral).unwrap();
    assert_eq!(woe.column("c_woe").unwrap().numeric_values().unwrap()[1], Some(0.0));
}

#[test]
fn missing_without_missing_bin_is_an_error() {
    let model = auto_bin(&step_data(), &[], &BinningParams::default()).unwrap();
    let new = encoded(vec![
        Column::numeric("x", vec![Some(1.0), None]),
        Column::from_strs("y", &["good", "bad"]),
    ]);
    assert!(matches!(
        model.apply(&new, ApplyTarget::Bin, UnseenPolicy::Error),
        Err(Error::UnbinnableMissing(_))
    ));
}

#[test]
fn monotone_enforcement_merges_bins() {
    // bad rates 0.2, 0.5, 0.9, 0.3
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (v, bad) in [(1.0, 2), (3.0, 5), (5.0, 9), (7.0, 3)] {
        for i in 0..10 {
            x.push(v);
            y.push(if i < bad { "bad" } else { "good" });
        }
    }
    let ds = encoded(vec![Column::from_f64("x", &x), Column::from_strs("y", &y)]);
    let m = auto_bin(&ds, &[], &BinningParams { min_bin_fraction: 0.01, stop_limit: 0.0, alpha: 0.99, ..Default::default() }).unwrap();
    let m = m.set_breaks("x", &BinEdit::Breaks(vec![2.0, 4.0, 6.0])).unwrap();
    assert!(!m.variable("x").unwrap().is_monotone());
    let inc = m.enforce_monotone("x", Monotone::Increasing).unwrap();
    let v = inc.variable("x").unwrap();
    assert!(v.is_monotone());
    assert_eq!(v.rule, BinRule::Numeric { breaks: vec![2.0, 4.0] });
    let auto = m.enforce_monotone("x", Monotone::Auto).unwrap();
    assert_eq!(auto.variable("x").unwrap().rule, v.rule);
    let cat = auto_bin(&categorical_data(), &[], &BinningParams::default()).unwrap();
    assert!(cat.enforce_monotone("c", Monotone::Increasing).is_err());
}

#[test]
fn json_round_trip() {
    let model = auto_bin(&with_missing(), &[], &BinningParams::default()).unwrap();
    let text = model.to_json().unwrap();
    let back = BinningModel::from_json(&text).unwrap();
    assert_eq!(back, model);
    let mut future: serde_json::Value = serde_json::from_str(&text).unwrap();
    future["version"] = serde_json::json!(MODEL_VERSION + 1);
    assert!(BinningModel::from_json(&future.to_string()).is_err());
}

#[test]
fn breaks_list_round_trip() {
    let ds = categorical_data();
    let model = auto_bin(&ds, &[], &BinningParams::default()).unwrap();
    let list = model.breaks_list();
    let text = serde_json::to_string(&list).unwrap();
    let parsed: BreaksList = serde_json::from_str(&text).unwrap();
    assert_eq!(model.apply_breaks_list(&parsed).unwrap(), model);
    let num = auto_bin(&step_data(), &[], &BinningParams::default()).unwrap();
    let list: BreaksList = serde_json::from_str(r#"{"x": [4, "12"]}"#).unwrap();
    let edited = num.apply_breaks_list(&list).unwrap();
    assert_eq!(edited.variable("x").unwrap().rule, BinRule::Numeric { breaks: vec![4.0, 12.0] });
}

#[test]
fn stability_of_identical_samples_is_zero() {
    let ds = step_data();
    let model = auto_bin(&ds, &[], &BinningParams::default()).unwrap();
    let report = model.stability(&ds, &ds).unwrap();
    assert_eq!(report.variables[0].psi, 0.0);
}

#[test]
fn german_credit_bins_sum_to_rows() {
    let ds = Dataset::german_credit();
    let model = auto_bin(&ds, &[], &BinningParams::default()).unwrap();
    assert_eq!(model.variables.len(), 20);
    assert!((model.bad_rate - 0.3).abs() < 1e-12);
    for v in &model.variables {
        assert_eq!(v.bins.iter().map(|b| b.count).sum::<u64>(), 1000, "{}", v.name);
        assert!(v.bins.len() <= 8, "{}", v.name);
        let iv: f64 = v.bins.iter().map(|b| b.bin_iv).sum();
        assert!((iv - v.total_iv).abs() < 1e-12);
        assert!(v.total_iv >= 0.0);
    }
}

/// Direct Pearson χ² from expected counts.
fn chi2_oracle(table: [[f64; 2]; 2]) -> f64 {
    let n: f64 = table.iter().flatten().sum();
    let mut stat = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let row: f64 = table[r].iter().sum();
            let col = table[0][c] + table[1][c];
            let e = row * col / n;
            if e > 0.0 {
                stat += (table[r][c] - e).powi(2) / e;
            }
        }
    }
    stat
}

fn cells_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0u32..20, 0u32..20), 2..12)
        .prop_map(|v| v.into_iter().map(|(g, b)| (g as f64, b as f64)).collect())
}

proptest! {
    #[test]
    fn chi2_matches_expected_count_formula(a in 0u32..50, b in 0u32..50, c in 0u32..50, d in 0u32..50) {
        let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
        let fast = chi2_2x2(a, b, c, d);
        let slow = chi2_oracle([[a, b], [c, d]]);
        let degenerate = (a + b) * (c + d) * (a + c) * (b + d) == 0.0;
        if degenerate {
            prop_assert_eq!(fast, 0.0);
        } else {
            prop_assert!((fast - slow).abs() <= 1e-9 * slow.max(1.0));
        }
    }

    #[test]
    fn best_split_is_the_brute_force_maximum(cells in cells_strategy(), min_count in 0.0f64..30.0) {
        let n = cells.len();
        let mut brute: Option<f64> = None;
        let mut admissible = 0;
        for c in 1..n {
            let l = group_counts(&cells, &[c]);
            if l[0].0 + l[0].1 < min_count || l[1].0 + l[1].1 < min_count {
                continue;
            }
            admissible += 1;
            let s = chi2_oracle([[l[0].0, l[0].1], [l[1].0, l[1].1]]);
            brute = Some(brute.map_or(s, |b: f64| b.max(s)));
        }
        match (best_split(&cells, 0, n, min_count), brute) {
            (None, None) => {}
            (Some((_, stat, m)), Some(b)) => {
                prop_assert!((stat - b).abs() <= 1e-9 * b.max(1.0));
                prop_assert_eq!(m, admissible);
            }
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn refining_a_partition_never_lowers_iv(
        cells in prop::collection::vec((1u32..30, 1u32..30), 2..10),
        keep in prop::collection::vec(any::<bool>(), 10),
    ) {
        let cells: Vec<(f64, f64)> = cells.into_iter().map(|(g, b)| (g as f64, b as f64)).collect();
        let fine: Vec<usize> = (1..cells.len()).collect();
        let coarse: Vec<usize> = fine.iter().copied().filter(|&c| keep[c]).collect();
        let iv_fine = information_value(&group_counts(&cells, &fine), 0.5);
        let iv_coarse = information_value(&group_counts(&cells, &coarse), 0.5);
        prop_assert!(iv_fine + 1e-12 >= iv_coarse);
        prop_assert!(iv_coarse >= 0.0);
    }

    #[test]
    fn binning_partitions_the_rows(
        xs in prop::collection::vec(prop::option::weighted(0.9, -50i32..50), 40..120),
        seed in any::<u64>(),
        method in prop::sample::select(vec![
            BinningMethod::Tree, BinningMethod::Chimerge, BinningMethod::EqualWidth,
            BinningMethod::EqualFreq, BinningMethod::WoeMerge,
        ]),
    ) {
        let n = xs.len();
        let y: Vec<&str> = (0..n)
            .map(|i| if (i as u64).wrapping_mul(seed | 1).rotate_left(7) % 3 == 0 || i == 0 { "bad" } else { "good" })
            .collect();
        let mut y = y;
        y[1] = "good";
        let x: Vec<Option<f64>> = xs.iter().map(|v| v.map(f64::from)).collect();
        let ds = encoded(vec![Column::numeric("x", x), Column::from_strs("y", &y)]);
        let params = BinningParams { method, ..Default::default() };
        let model = auto_bin(&ds, &[], &params).unwrap();
        let v = model.variable("x").unwrap();
        prop_assert_eq!(v.bins.iter().map(|b| b.count).sum::<u64>(), n as u64);
        prop_assert!(v.rule.n_value_bins() <= params.max_bins);
        let shares: f64 = v.bins.iter().map(|b| b.count_distr).sum();
        prop_assert!((shares - 1.0).abs() < 1e-9);
        let (counts, neutral) = model.bin_counts("x", &ds, UnseenPolicy::Error).unwrap();
        prop_assert_eq!(neutral, 0);
        prop_assert_eq!(counts, v.bins.iter().map(|b| b.count).collect::<Vec<_>>());
    }

    #[test]
    fn monotone_result_is_monotone(
        cells in prop::collection::vec((1u32..20, 0u32..20), 2..10),
        increasing in any::<bool>(),
    ) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, (g, b)) in cells.iter().enumerate() {
            for _ in 0..*g { x.push(i as f64); y.push("good"); }
            for _ in 0..*b { x.push(i as f64); y.push("bad"); }
        }
        prop_assume!(y.contains(&"bad"));
        let ds = encoded(vec![Column::from_f64("x", &x), Column::from_strs("y", &y)]);
        let m = auto_bin(&ds, &[], &BinningParams::default()).unwrap();
        let breaks: Vec<f64> = (1..cells.len()).map(|i| i as f64 - 0.5).collect();
        let m = m.set_breaks("x", &BinEdit::Breaks(breaks)).unwrap();
        let dir = if increasing { Monotone::Increasing } else { Monotone::Decreasing };
        let v = m.enforce_monotone("x", dir).unwrap();
        let rates: Vec<f64> = v.variable("x").unwrap().bins.iter().map(|b| b.badprob).collect();
        if increasing {
            prop_assert!(rates.windows(2).all(|w| w[1] >= w[0]));
        } else {
            prop_assert!(rates.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
