//! `scorecard-forge`: scorecard development pipeline driver.

mod report;
mod svg;

use std::fs;
use std::io::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use scorecard_forge::binning::{BinningMethod, BinningModel, BreaksList, UnseenPolicy};
use scorecard_forge::data::SplitSpec;
use scorecard_forge::pipeline::Criterion;
use scorecard_forge::project::{RejectMethod, RejectReport, Stage, Workspace};
use scorecard_forge::reject::ParcellingSpec;

pub const SEED_ENV: &str = "SCORECARD_FORGE_SEED";

#[derive(Debug, Parser)]
#[command(name = "scorecard-forge", version, about = "Credit scorecard development pipeline")]
struct Cli {
    /// Project directory holding project.json and stage artifacts.
    #[arg(long, global = true, default_value = ".")]
    project: PathBuf,
    /// Random seed for the split, bootstrap and parcelling draws.
    /// SCORECARD_FORGE_SEED takes precedence when set.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create or update the project and split the data into train and validation samples.
    Split {
        /// Source CSV; (re)initialises the project.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        target: Option<String>,
        #[arg(long, requires = "data")]
        bad_level: Option<String>,
        /// Training share.
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Automatic binning of every predictor.
    Bin {
        #[arg(long)]
        method: Option<BinningMethod>,
        #[arg(long)]
        max_bins: Option<usize>,
    },
    /// Apply a breaks file (a bins.json or a variable -> breaks map).
    AdjustBins { breaks: PathBuf },
    /// WoE-transform the train and validation samples.
    Woe,
    /// IV, PSI and correlation filters.
    Preselect {
        #[arg(long)]
        iv_threshold: Option<f64>,
        #[arg(long)]
        max_psi: Option<f64>,
        #[arg(long)]
        correlation_threshold: Option<f64>,
    },
    /// Stepwise logistic regression.
    Fit {
        #[arg(long)]
        criterion: Option<Criterion>,
    },
    /// Scale the model to scorecard points.
    Scale {
        #[arg(long)]
        pdo: Option<f64>,
        #[arg(long)]
        points0: Option<f64>,
        #[arg(long)]
        odds0: Option<f64>,
    },
    /// Score a CSV with the current scorecard.
    Score {
        #[arg(long)]
        data: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validation performance and grade calibration.
    Evaluate {
        /// Bootstrap replicates for the AUC interval; 0 disables it.
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Population stability of the binned variables.
    Stability {
        /// Sample compared with training; the validation sample when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Reject inference on a CSV of rejected applicants.
    RejectInfer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "parcelling")]
        method: RejectMethod,
    },
    /// HTML and Markdown development report.
    Report {
        /// Directory receiving copies of report.html and report.md.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage states of the project.
    Status,
    /// Run the local session service.
    Serve {
        #[arg(long, default_value_t = scorecard_forge_studio::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
    },
}

/// `SCORECARD_FORGE_SEED` when set, else the flag.
fn effective_seed(flag: Option<u64>) -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let seed = v.trim().parse().with_context(|| format!("{SEED_ENV}=`{v}` is not an unsigned integer"))?;
            Ok(Some(seed))
        }
        _ => Ok(flag),
    }
}

fn open(root: &Path) -> Result<Workspace> {
    Ok(Workspace::open(root)?)
}

fn read_breaks(path: &Path) -> Result<BreaksList> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(model) = BinningModel::from_json(&text) {
        return Ok(model.breaks_list());
    }
    serde_json::from_str(&text).with_context(|| format!("{} is neither a binning model nor a breaks map", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let root = cli.project.as_path();
    let seed = effective_seed(cli.seed)?;
    match cli.command {
        Command::Split { data, target, bad_level, ratio } => {
            let mut ws = match data {
                Some(data) => {
                    let (Some(target), Some(bad)) = (target, bad_level) else {
                        bail!("split with --data needs --target and --bad-level");
                    };
                    let _lock = if Workspace::exists(root) { Some(open(root)?.lock()?) } else { None };
                    let mut spec = SplitSpec::new(0.7, 42);
                    if let Some(r) = ratio {
                        spec.ratio = r;
                    }
                    if let Some(s) = seed {
                        spec.seed = s;
                    }
                    Workspace::init(root, &data, &target, &bad, spec)?
                }
                None => {
                    let mut ws = open(root)?;
                    if let Some(r) = ratio {
                        ws.project.split.ratio = r;
                    }
                    if let Some(s) = seed {
                        ws.project.split.seed = s;
                    }
                    ws
                }
            };
            let _lock = ws.lock()?;
            ws.run_split()?;
            println!(
                "split: {} train rows, {} validation rows (ratio {}, seed {})",
                ws.train()?.n_rows(),
                ws.valid()?.n_rows(),
                ws.project.split.ratio,
                ws.project.split.seed
            );
        }
        Command::Bin { method, max_bins } => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            if let Some(m) = method {
                ws.project.binning.method = m;
            }
            if let Some(n) = max_bins {
                ws.project.binning.max_bins = n;
            }
            ws.project.binning.validate()?;
            let bins = ws.run_bin()?;
            println!("bin: {} variables", bins.variables.len());
            for v in &bins.variables {
                println!("  {:<50} {:>2} bins  iv {:.4}", v.name, v.bins.len(), v.total_iv);
            }
        }
        Command::AdjustBins { breaks } => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            let list = read_breaks(&breaks)?;
            let before = ws.project.stages.get(&Stage::Bins).map(|r| r.sha256.clone());
            ws.adjust_bins(&list)?;
            let changed = before.as_deref() != Some(ws.project.stages[&Stage::Bins].sha256.as_str());
            println!(
                "adjust-bins: {} variables from {}{}",
                list.len(),
                breaks.display(),
                if changed { "" } else { " (unchanged)" }
            );
        }
        Command::Woe => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            ws.run_woe()?;
            println!("woe: wrote train_woe.csv and valid_woe.csv");
        }
        Command::Preselect { iv_threshold, max_psi, correlation_threshold } => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            let cfg = &mut ws.project.preselect;
            if let Some(x) = iv_threshold {
                cfg.iv_threshold = x;
            }
            if let Some(x) = max_psi {
                cfg.max_psi = Some(x);
            }
            if let Some(x) = correlation_threshold {
                cfg.correlation_threshold = x;
            }
            let r = ws.run_preselect()?;
            println!("preselect: {} of {} kept", r.kept().len(), r.entries.len());
            for e in r.entries.iter().filter(|e| !e.kept) {
                println!("  dropped {}: {}", e.variable, e.reason.as_deref().unwrap_or(""));
            }
        }
        Command::Fit { criterion } => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            if let Some(c) = criterion {
                ws.project.criterion = c;
            }
            let r = ws.run_fit()?;
            let m = &r.model;
            println!(
                "fit: {} variables selected by {} in {} steps",
                m.coefficients.len(),
                ws.project.criterion,
                r.trace.len()
            );
            println!("  {:<54} {:>10.4}", "(intercept)", m.intercept);
            for (k, v) in &m.coefficients {
                println!("  {k:<54} {v:>10.4}");
            }
        }
        Command::Scale { pdo, points0, odds0 } => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            let s = &mut ws.project.scaling;
            if let Some(x) = pdo {
                s.pdo = x;
            }
            if let Some(x) = points0 {
                s.points0 = x;
            }
            if let Some(x) = odds0 {
                s.odds0 = x;
            }
            s.validate()?;
            let card = ws.run_scale()?;
            let (lo, hi) = card.score_range();
            println!(
                "scale: {} variables, basepoints {}, score range {lo} to {hi}; wrote scorecard.json",
                card.variables.len(),
                card.basepoints
            );
        }
        Command::Score { data, out } => {
            let ws = open(root)?;
            ws.require(Stage::Scorecard)?;
            let card = ws.scorecard()?;
            let ds = ws.read_data(&data)?;
            let scores = card.score(&ds, UnseenPolicy::Neutral)?;
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                let mut header = vec!["row".to_string()];
                header.extend(scores.points.keys().map(|k| format!("{k}_points")));
                header.push("score".into());
                w.write_record(&header)?;
                for i in 0..ds.n_rows() {
                    let mut rec = vec![(i + 1).to_string()];
                    rec.extend(scores.points.values().map(|p| p[i].to_string()));
                    rec.push(scores.total[i].to_string());
                    w.write_record(&rec)?;
                }
                w.flush()?;
            }
            match out {
                Some(p) => {
                    fs::write(&p, &buf)?;
                    println!("score: {} rows written to {}", ds.n_rows(), p.display());
                }
                None => std::io::stdout().write_all(&buf)?,
            }
        }
        Command::Evaluate { bootstrap, cutoff } => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            let m = &mut ws.project.evaluation.metrics;
            if let Some(b) = bootstrap {
                m.bootstrap = (b > 0).then_some(b);
            }
            if cutoff.is_some() {
                m.cutoff = cutoff;
            }
            if let Some(s) = seed {
                m.seed = s;
            }
            let e = ws.run_evaluate()?;
            let p = &e.performance;
            let ci = p
                .ci
                .as_ref()
                .map(|c| format!(", {}% interval {:.4} to {:.4}", 100.0 * c.level, c.lower, c.upper))
                .unwrap_or_default();
            println!("evaluate: auc {:.4}, gini {:.4}, ks {:.4}{ci}", p.auc, p.gini, p.ks);
            println!("  {} grades, hhi {:.4}", e.grades.grades.len(), e.grades.hhi);
        }
        Command::Stability { data } => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            let other = data.map(|d| ws.read_data(d)).transpose()?;
            let r = ws.run_stability(other.as_ref())?;
            println!("stability: {} variables", r.variables.len());
            for v in &r.variables {
                println!("  {:<50} psi {:.4}  {:?}", v.variable, v.psi, v.label);
            }
        }
        Command::RejectInfer { data, method } => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            let rejected = ws.read_data(&data)?;
            let mut spec = ParcellingSpec::default();
            if let Some(s) = seed {
                spec.seed = s;
            }
            let r = ws.run_reject(&rejected, method, &spec)?;
            let warnings = match &r {
                RejectReport::Augmentation(a) => {
                    println!("reject-infer: augmentation over {} bands", a.bands.len());
                    &a.warnings
                }
                RejectReport::Parcelling { bands, warnings, .. } => {
                    let inferred: usize = bands.iter().map(|b| b.n_inferred_bad).sum();
                    let n: usize = bands.iter().map(|b| b.n_rejected).sum();
                    println!("reject-infer: parcelling, {inferred} of {n} rejected rows inferred bad");
                    warnings
                }
            };
            for w in warnings {
                println!("  warning: {w}");
            }
        }
        Command::Report { out } => {
            let mut ws = open(root)?;
            let _lock = ws.lock()?;
            let data = report::collect(&ws)?;
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs());
            let (html, md) = report::render(&data, now)?;
            ws.record_report(html, md)?;
            if let Some(dir) = &out {
                fs::create_dir_all(dir)?;
                for name in Stage::Report.artifacts() {
                    fs::copy(ws.path(name), dir.join(name))?;
                }
            }
            let dir = out.as_deref().unwrap_or(ws.root());
            println!("report: wrote report.html and report.md to {}", dir.display());
        }
        Command::Status => {
            let ws = open(root)?;
            for (stage, state) in ws.status() {
                println!("{:<12} {:?}", stage.name(), state);
            }
        }
        Command::Serve { port, bind } => {
            open(root)?;
            let addr = SocketAddr::new(bind, port);
            let rt = tokio::runtime::Runtime::new()?;
            println!("serve: listening on http://{addr}");
            rt.block_on(scorecard_forge_studio::serve(root, addr, async {
                let _ = tokio::signal::ctrl_c().await;
            }))?;
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion)
                || e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            {
                let _ = e.print();
                return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
