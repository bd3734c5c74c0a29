//! HTML and Markdown development report built from project artifacts.
//!
//! Both documents come from one [`Doc`] builder so their contents stay in
//! step. The only field that varies between regenerations is
//! `generated_at`.

use std::fmt::Write;

use scorecard_forge::binning::BinningModel;
use scorecard_forge::data::Dataset;
use scorecard_forge::logit::{Move, StepwiseResult};
use scorecard_forge::pipeline::{model_variables, Evaluation};
use scorecard_forge::preselect::FilterReport;
use scorecard_forge::project::{Project, Stage, StageState, Workspace};
use scorecard_forge::scorecard::Scorecard;
use scorecard_forge::woe::StabilityReport;
use scorecard_forge::Result;

use crate::svg::{self, escape, Series, Style, BLUE, GREY, RED};

pub struct ReportData {
    pub project: Project,
    pub source_rows: usize,
    pub source_bad: usize,
    pub train: Dataset,
    pub valid: Dataset,
    pub bins: BinningModel,
    pub preselect: Option<FilterReport>,
    pub stepwise: StepwiseResult,
    pub scorecard: Scorecard,
    pub evaluation: Evaluation,
    pub stability: Option<StabilityReport>,
}

/// Loads every artifact the report needs; optional stages are included
/// only when fresh.
pub fn collect(ws: &Workspace) -> Result<ReportData> {
    ws.require_for(Stage::Report)?;
    let source = ws.source()?;
    let fresh = |s| ws.state(s) == StageState::Fresh;
    Ok(ReportData {
        project: ws.project.clone(),
        source_rows: source.n_rows(),
        source_bad: source.bad_count()?,
        train: ws.train()?,
        valid: ws.valid()?,
        bins: ws.bins()?,
        preselect: if fresh(Stage::Preselect) { Some(ws.preselect_report()?) } else { None },
        stepwise: ws.model()?,
        scorecard: ws.scorecard()?,
        evaluation: ws.evaluation()?,
        stability: if fresh(Stage::Stability) { Some(ws.stability()?) } else { None },
    })
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

fn opt4(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), f4)
}

/// The serialized name of a unit enum variant.
fn serde_label<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

/// Parallel HTML and Markdown writer.
struct Doc {
    html: String,
    md: String,
}

impl Doc {
    fn new(title: &str, generated_at: u64) -> Doc {
        let mut d = Doc {
            html: String::new(),
            md: String::new(),
        };
        let t = escape(title);
        let _ = write!(
            d.html,
            "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{t}</title>\n\
             <style>body{{font-family:sans-serif;max-width:60em;margin:auto}}table{{border-collapse:collapse;margin:0.5em 0}}\
             td,th{{border:1px solid #ccc;padding:2px 6px;text-align:right}}td:first-child,th:first-child{{text-align:left}}</style>\n\
             </head>\n<body>\n<h1>{t}</h1>\n<p class=\"generated\">generated_at: {generated_at}</p>\n"
        );
        let _ = write!(d.md, "# {title}\n\ngenerated_at: {generated_at}\n\n");
        d
    }

    fn heading(&mut self, level: usize, text: &str) {
        let _ = writeln!(self.html, "<h{level}>{}</h{level}>", escape(text));
        let _ = write!(self.md, "{} {text}\n\n", "#".repeat(level));
    }

    fn open(&mut self, class: &str, id: &str) {
        let _ = writeln!(self.html, "<section class=\"{class}\" id=\"{}\">", escape(id));
    }

    fn close(&mut self) {
        self.html.push_str("</section>\n");
    }

    fn para(&mut self, text: &str) {
        let _ = writeln!(self.html, "<p>{}</p>", escape(text));
        let _ = write!(self.md, "{text}\n\n");
    }

    fn table(&mut self, id: Option<&str>, header: &[&str], rows: &[Vec<String>]) {
        match id {
            Some(id) => {
                let _ = writeln!(self.html, "<table id=\"{}\">", escape(id));
            }
            None => self.html.push_str("<table>\n"),
        }
        self.html.push_str("<tr>");
        for h in header {
            let _ = write!(self.html, "<th>{}</th>", escape(h));
        }
        self.html.push_str("</tr>\n");
        for r in rows {
            self.html.push_str("<tr>");
            for c in r {
                let _ = write!(self.html, "<td>{}</td>", escape(c));
            }
            self.html.push_str("</tr>\n");
        }
        self.html.push_str("</table>\n");

        let cell = |s: &str| s.replace('|', "\\|");
        let _ = writeln!(self.md, "| {} |", header.iter().map(|h| cell(h)).collect::<Vec<_>>().join(" | "));
        let _ = writeln!(self.md, "|{}", " --- |".repeat(header.len()));
        for r in rows {
            let _ = writeln!(self.md, "| {} |", r.iter().map(|c| cell(c)).collect::<Vec<_>>().join(" | "));
        }
        self.md.push('\n');
    }

    fn figure(&mut self, svg: &str) {
        let _ = writeln!(self.html, "<figure>{svg}</figure>");
        let _ = write!(self.md, "<div>{svg}</div>\n\n");
    }

    fn finish(mut self) -> (String, String) {
        self.html.push_str("</body>\n</html>\n");
        (self.html, self.md)
    }
}

fn data_summary(doc: &mut Doc, d: &ReportData) -> Result<()> {
    doc.open("data", "data-summary");
    doc.heading(2, "Data summary");
    let p = &d.project;
    let numeric = p
        .schema
        .iter()
        .filter(|(n, k)| **n != p.target.column && **k == scorecard_forge::data::ColumnKind::Numeric)
        .count();
    let predictors = p.schema.len() - 1;
    let rate = |bad: usize, n: usize| pct(bad as f64 / n as f64);
    let (tb, vb) = (d.train.bad_count()?, d.valid.bad_count()?);
    let rows = vec![
        vec!["data".into(), p.data.clone()],
        vec!["target".into(), format!("{} (bad = {}, good = {})", p.target.column, p.target.bad_level, p.target.good_level)],
        vec!["predictors".into(), format!("{predictors} ({numeric} numeric, {} categorical)", predictors - numeric)],
        vec!["rows".into(), d.source_rows.to_string()],
        vec!["bad rate".into(), rate(d.source_bad, d.source_rows)],
        vec!["split".into(), format!("ratio {}, seed {}, stratified {}", p.split.ratio, p.split.seed, p.split.stratify)],
        vec!["train rows".into(), format!("{} (bad rate {})", d.train.n_rows(), rate(tb, d.train.n_rows()))],
        vec!["validation rows".into(), format!("{} (bad rate {})", d.valid.n_rows(), rate(vb, d.valid.n_rows()))],
    ];
    doc.table(Some("data-summary-table"), &["item", "value"], &rows);
    let mut ivs = d.bins.ivs();
    ivs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let rows: Vec<Vec<String>> = ivs
        .iter()
        .map(|(v, iv)| {
            let n = d.bins.variable(v).map_or(0, |x| x.bins.len());
            vec![v.clone(), n.to_string(), f4(*iv)]
        })
        .collect();
    doc.heading(3, "Information value");
    doc.para(&format!("Binning method: {}.", serde_label(&d.bins.params.method)));
    doc.table(Some("iv-table"), &["variable", "bins", "iv"], &rows);
    doc.close();
    Ok(())
}

fn binning(doc: &mut Doc, d: &ReportData) -> Result<()> {
    doc.heading(2, "Binning of model variables");
    for v in model_variables(&d.stepwise.model, &d.bins)? {
        let var = d.bins.variable(&v)?;
        doc.open("binning", &format!("binning-{v}"));
        doc.heading(3, &format!("Binning: {v}"));
        doc.para(&format!(
            "{} bins, total iv {}, bad rate {}.",
            var.bins.len(),
            f4(var.total_iv),
            if var.is_monotone() { "monotone" } else { "not monotone" }
        ));
        let rows: Vec<Vec<String>> = var
            .bins
            .iter()
            .map(|b| {
                vec![
                    b.bin.clone(),
                    b.count.to_string(),
                    f4(b.count_distr),
                    b.good.to_string(),
                    b.bad.to_string(),
                    f4(b.badprob),
                    f4(b.woe),
                    f4(b.bin_iv),
                ]
            })
            .collect();
        doc.table(
            None,
            &["bin", "count", "count_distr", "good", "bad", "badprob", "woe", "bin_iv"],
            &rows,
        );
        let labels: Vec<String> = var.bins.iter().map(|b| b.bin.clone()).collect();
        let distr: Vec<f64> = var.bins.iter().map(|b| b.count_distr).collect();
        let bad: Vec<f64> = var.bins.iter().map(|b| b.badprob).collect();
        doc.figure(&svg::bar_line_chart(&v, &labels, ("count_distr", &distr), ("badprob", &bad)));
        doc.close();
    }
    Ok(())
}

fn preselection(doc: &mut Doc, d: &ReportData) {
    doc.open("preselect", "preselection");
    doc.heading(2, "Preselection");
    match &d.preselect {
        None => doc.para("Preselection was not run; every binned variable entered the stepwise search."),
        Some(r) => {
            let rows: Vec<Vec<String>> = r
                .entries
                .iter()
                .map(|e| {
                    vec![
                        e.variable.clone(),
                        opt4(e.iv),
                        opt4(e.psi),
                        if e.kept { "yes".into() } else { "no".into() },
                        e.reason.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            let cfg = &d.project.preselect;
            doc.para(&format!(
                "iv threshold {}, psi ceiling {}, correlation threshold {}; {} of {} kept.",
                cfg.iv_threshold,
                cfg.max_psi.map_or_else(|| "none".to_string(), |x| x.to_string()),
                cfg.correlation_threshold,
                r.kept().len(),
                r.entries.len()
            ));
            doc.table(Some("preselect-table"), &["variable", "iv", "psi", "kept", "reason"], &rows);
        }
    }
    doc.close();
}

fn model(doc: &mut Doc, d: &ReportData) {
    doc.open("model", "model");
    doc.heading(2, "Stepwise selection");
    doc.para(&format!("Criterion: {}.", d.project.criterion));
    let rows: Vec<Vec<String>> = d
        .stepwise
        .trace
        .iter()
        .map(|s| {
            let mv = match &s.accepted {
                Some(Move::Add(v)) => format!("+ {v}"),
                Some(Move::Drop(v)) => format!("- {v}"),
                None => "stop".into(),
            };
            vec![s.step.to_string(), mv, f4(s.incumbent), f4(s.criterion), s.candidates.len().to_string()]
        })
        .collect();
    doc.table(Some("stepwise-trace"), &["step", "move", "before", "after", "candidates"], &rows);
    let m = &d.stepwise.model;
    let mut rows = vec![vec!["(intercept)".to_string(), f4(m.intercept)]];
    rows.extend(m.coefficients.iter().map(|(k, v)| vec![k.clone(), f4(*v)]));
    doc.heading(3, "Coefficients");
    doc.para(&format!(
        "{} observations, deviance {}, converged {}.",
        m.n_obs,
        f4(m.deviance),
        m.converged
    ));
    doc.table(Some("coefficients"), &["term", "estimate"], &rows);
    doc.close();
}

/// Rows of the scorecard table: `variable, bin, woe, points`, base points first.
pub fn scorecard_rows(card: &Scorecard) -> Vec<Vec<String>> {
    let mut rows = vec![vec!["basepoints".to_string(), String::new(), String::new(), card.basepoints.to_string()]];
    for v in &card.variables {
        for b in &v.bins {
            rows.push(vec![v.name.clone(), b.label.clone(), f4(b.woe), b.points.to_string()]);
        }
    }
    rows
}

fn scorecard(doc: &mut Doc, d: &ReportData) {
    let card = &d.scorecard;
    let s = &card.scaling;
    doc.open("scorecard", "scorecard-section");
    doc.heading(2, "Scorecard");
    let (lo, hi) = card.score_range();
    doc.para(&format!(
        "pdo {}, points0 {}, odds0 {}; factor {}, offset {}; score range {lo} to {hi}.",
        s.pdo,
        s.points0,
        s.odds0,
        f4(s.factor()),
        f4(s.offset())
    ));
    doc.table(Some("scorecard"), &["variable", "bin", "woe", "points"], &scorecard_rows(card));
    doc.close();
}

fn performance(doc: &mut Doc, d: &ReportData) {
    let e = &d.evaluation;
    let p = &e.performance;
    doc.open("performance", "performance");
    doc.heading(2, "Performance");
    let mut rows = vec![
        vec!["validation rows".into(), p.n.to_string()],
        vec!["validation bads".into(), p.n_bad.to_string()],
        vec!["auc (train)".into(), f4(e.train_auc)],
        vec!["auc".into(), f4(p.auc)],
        vec!["gini".into(), f4(p.gini)],
        vec!["ks".into(), f4(p.ks)],
    ];
    if let Some(ci) = &p.ci {
        rows.push(vec![
            format!("auc {}% interval", 100.0 * ci.level),
            format!("{} to {} ({} replicates, seed {})", f4(ci.lower), f4(ci.upper), ci.replicates, ci.seed),
        ]);
    }
    let c = &p.confusion;
    rows.push(vec!["cutoff".into(), format!("{}", c.cutoff)]);
    rows.push(vec!["tp / fp / tn / fn".into(), format!("{} / {} / {} / {}", c.tp, c.fp, c.tn, c.fn_)]);
    rows.push(vec!["accuracy".into(), f4(c.accuracy)]);
    rows.push(vec!["sensitivity".into(), f4(c.sensitivity)]);
    rows.push(vec!["specificity".into(), f4(c.specificity)]);
    doc.table(Some("metrics"), &["metric", "value"], &rows);

    let roc = Series {
        name: "roc",
        points: e.roc.clone(),
        color: BLUE,
        style: Style::Line,
    };
    let diag = Series {
        name: "chance",
        points: vec![(0.0, 0.0), (1.0, 1.0)],
        color: GREY,
        style: Style::Dashed,
    };
    doc.figure(&svg::line_chart("ROC", "false positive rate", "true positive rate", &[roc, diag], true));

    let good = Series {
        name: "good",
        points: e.ecdf.iter().map(|&(s, g, _)| (s, g)).collect(),
        color: BLUE,
        style: Style::Step,
    };
    let bad = Series {
        name: "bad",
        points: e.ecdf.iter().map(|&(s, _, b)| (s, b)).collect(),
        color: RED,
        style: Style::Step,
    };
    doc.figure(&svg::line_chart("ECDF by class", "score", "cumulative share", &[good, bad], false));

    let ng = e.histogram.iter().map(|h| h.good).sum::<usize>().max(1) as f64;
    let nb = e.histogram.iter().map(|h| h.bad).sum::<usize>().max(1) as f64;
    let mid = |h: &scorecard_forge::pipeline::HistogramBin| (h.lower + h.upper) / 2.0;
    let width = e.histogram.first().map_or(1.0, |h| h.upper - h.lower);
    let good = Series {
        name: "good",
        points: e.histogram.iter().map(|h| (mid(h), h.good as f64 / ng / width)).collect(),
        color: BLUE,
        style: Style::Line,
    };
    let bad = Series {
        name: "bad",
        points: e.histogram.iter().map(|h| (mid(h), h.bad as f64 / nb / width)).collect(),
        color: RED,
        style: Style::Line,
    };
    doc.figure(&svg::line_chart("Score density by class", "score", "density", &[good, bad], false));

    let n = e.gains.rows.last().map_or(1, |r| r.cum_count).max(1) as f64;
    let bads = e.gains.rows.last().map_or(1, |r| r.cum_bad).max(1) as f64;
    let mut pts = vec![(0.0, 0.0)];
    pts.extend(e.gains.rows.iter().map(|r| (r.cum_count as f64 / n, r.cum_bad as f64 / bads)));
    let gains = Series {
        name: "cumulative bads",
        points: pts,
        color: RED,
        style: Style::Line,
    };
    let diag = Series {
        name: "random",
        points: vec![(0.0, 0.0), (1.0, 1.0)],
        color: GREY,
        style: Style::Dashed,
    };
    doc.figure(&svg::line_chart("Gains", "share of population", "share of bads", &[gains, diag], true));

    let rows: Vec<Vec<String>> = e
        .gains
        .rows
        .iter()
        .map(|r| {
            vec![
                r.bin.clone(),
                r.count.to_string(),
                r.cum_count.to_string(),
                r.good.to_string(),
                r.bad.to_string(),
                f4(r.badprob),
                f4(r.cum_badprob),
                f4(r.approval_rate),
            ]
        })
        .collect();
    doc.heading(3, "Gains table");
    doc.table(
        Some("gains"),
        &["score bin", "count", "cum count", "good", "bad", "badprob", "cum badprob", "approval rate"],
        &rows,
    );
    doc.close();
}

fn calibration(doc: &mut Doc, d: &ReportData) {
    let g = &d.evaluation.grades;
    doc.open("calibration", "calibration");
    doc.heading(2, "Grade calibration");
    doc.para("Grades are formed on training pds and tested on validation outcomes.");
    let rows: Vec<Vec<String>> = g
        .grades
        .iter()
        .map(|r| {
            vec![
                r.grade.to_string(),
                f4(r.lower),
                f4(r.upper),
                f4(r.pd),
                r.count.to_string(),
                r.bad.to_string(),
                f4(r.observed_rate),
                opt4(r.binomial_p),
                r.pass.map_or_else(|| "-".to_string(), |p| if p { "pass".into() } else { "fail".into() }),
            ]
        })
        .collect();
    doc.table(
        Some("grades"),
        &["grade", "lower", "upper", "pd", "count", "bad", "observed", "binomial p", "test"],
        &rows,
    );
    let mut rows = vec![vec!["hhi".to_string(), f4(g.hhi)]];
    if let Some(hl) = &g.hosmer_lemeshow {
        rows.push(vec![
            "hosmer-lemeshow".into(),
            format!("statistic {}, df {}, p {}", f4(hl.statistic), hl.df, f4(hl.p_value)),
        ]);
    }
    if let Some(ct) = &g.central_tendency {
        rows.push(vec![
            "central tendency".into(),
            format!(
                "mean pd {}, observed {}, tolerance {}: {}",
                f4(ct.mean_pd),
                f4(ct.observed_rate),
                ct.tolerance,
                if ct.pass { "pass" } else { "fail" }
            ),
        ]);
    }
    doc.heading(3, "Concentration and tests");
    doc.table(Some("calibration-tests"), &["measure", "value"], &rows);
    for w in &g.warnings {
        doc.para(&format!("Warning: {w}"));
    }
    doc.close();
}

fn stability(doc: &mut Doc, d: &ReportData) {
    let Some(s) = &d.stability else { return };
    doc.open("stability", "stability");
    doc.heading(2, "Population stability");
    let rows: Vec<Vec<String>> = s
        .variables
        .iter()
        .map(|v| vec![v.variable.clone(), f4(v.psi), serde_label(&v.label)])
        .collect();
    doc.table(Some("stability-table"), &["variable", "psi", "label"], &rows);
    doc.close();
}

/// Renders `(html, markdown)`.
pub fn render(d: &ReportData, generated_at: u64) -> Result<(String, String)> {
    let mut doc = Doc::new("Scorecard development report", generated_at);
    data_summary(&mut doc, d)?;
    binning(&mut doc, d)?;
    preselection(&mut doc, d);
    model(&mut doc, d);
    scorecard(&mut doc, d);
    performance(&mut doc, d);
    calibration(&mut doc, d);
    stability(&mut doc, d);
    Ok(doc.finish())
}
