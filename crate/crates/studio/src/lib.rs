//! Local HTTP session service for interactive bin editing.
//!
//! A [`Session`] wraps a project [`Workspace`] and a revision counter.
//! Reads run concurrently; every mutation takes the single writer slot,
//! checks the optional `revision` it carries and bumps the counter.

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;
use tower_http::cors::{AllowOrigin, CorsLayer};

use scorecard_forge::binning::{BinEdit, BinSummaryRow, BinningMethod, BinningModel, BinningParams, BreakItem, BreaksList};
use scorecard_forge::data::ColumnKind;
use scorecard_forge::pipeline::Criterion;
use scorecard_forge::project::{Stage, StageState, Workspace};

pub const DEFAULT_PORT: u16 = 8372;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error(transparent)]
    Core(#[from] scorecard_forge::Error),
    #[error("stale revision {supplied}, current is {current}")]
    StaleRevision { supplied: u64, current: u64 },
    #[error("no pending edit for `{0}`")]
    NoPendingEdit(String),
    #[error("request needs `breaks` or `groups`")]
    EmptyEdit,
    #[error("background task failed: {0}")]
    Task(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        use scorecard_forge::Error as E;
        match self {
            ApiError::Core(E::UnknownVariable(_)) => StatusCode::NOT_FOUND,
            ApiError::Core(E::InvalidBreaks { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Core(E::MissingStage { .. }) => StatusCode::PRECONDITION_FAILED,
            ApiError::Core(E::Locked(_)) => StatusCode::LOCKED,
            ApiError::Core(E::InvalidParameter(_)) => StatusCode::BAD_REQUEST,
            ApiError::Core(_) | ApiError::Task(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::StaleRevision { .. } => StatusCode::CONFLICT,
            ApiError::NoPendingEdit(_) | ApiError::EmptyEdit => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// A live modelling session.
#[derive(Debug)]
pub struct Session {
    pub workspace: Workspace,
    pub revision: u64,
    /// Previewed, uncommitted edits by variable.
    pub pending: BTreeMap<String, BinEdit>,
}

impl Session {
    pub fn new(workspace: Workspace) -> Self {
        Session {
            workspace,
            revision: 0,
            pending: BTreeMap::new(),
        }
    }

    pub fn open(root: impl AsRef<Path>) -> scorecard_forge::Result<Self> {
        Ok(Session::new(Workspace::open(root)?))
    }

    fn check_revision(&self, supplied: Option<u64>) -> Result<(), ApiError> {
        match supplied {
            Some(r) if r != self.revision => Err(ApiError::StaleRevision {
                supplied: r,
                current: self.revision,
            }),
            _ => Ok(()),
        }
    }

    fn committed(&mut self) -> u64 {
        self.revision += 1;
        self.revision
    }
}

pub type SharedSession = Arc<RwLock<Session>>;

async fn read<T, F>(state: &SharedSession, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Session) -> Result<T, ApiError> + Send + 'static,
{
    let guard = state.clone().read_owned().await;
    tokio::task::spawn_blocking(move || f(&guard))
        .await
        .map_err(|e| ApiError::Task(e.to_string()))?
}

async fn write<T, F>(state: &SharedSession, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
{
    let mut guard = state.clone().write_owned().await;
    tokio::task::spawn_blocking(move || {
        let _lock = guard.workspace.lock()?;
        f(&mut guard)
    })
    .await
    .map_err(|e| ApiError::Task(e.to_string()))?
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: Stage,
    pub state: StageState,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectView {
    pub revision: u64,
    pub project: scorecard_forge::project::Project,
    pub stages: Vec<StageStatus>,
    pub pending: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariableEntry {
    pub name: String,
    pub kind: ColumnKind,
    pub iv: f64,
    pub psi: Option<f64>,
    /// Preselection outcome; `None` until preselection is fresh.
    pub kept: Option<bool>,
    pub n_bins: usize,
    pub monotone: bool,
    pub dirty: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariablesView {
    pub revision: u64,
    pub variables: Vec<VariableEntry>,
}

/// Plot series of one variable: bars of `count_distr`, lines of `badprob`
/// and `woe`, one point per bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSeries {
    pub labels: Vec<String>,
    pub count_distr: Vec<f64>,
    pub badprob: Vec<f64>,
    pub woe: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinsView {
    pub revision: u64,
    pub variable: String,
    pub kind: ColumnKind,
    pub breaks: Vec<BreakItem>,
    pub total_iv: f64,
    pub monotone: bool,
    pub rows: Vec<BinSummaryRow>,
    pub series: BinSeries,
    /// `true` on preview payloads.
    pub preview: bool,
}

fn bins_view(model: &BinningModel, name: &str, revision: u64, preview: bool) -> Result<BinsView, ApiError> {
    let var = model.variable(name)?;
    let rows = var.summary();
    let breaks = model.breaks_list().remove(name).unwrap_or_default();
    Ok(BinsView {
        revision,
        variable: name.to_string(),
        kind: var.kind(),
        breaks,
        total_iv: var.total_iv,
        monotone: var.is_monotone(),
        series: BinSeries {
            labels: rows.iter().map(|r| r.bin.clone()).collect(),
            count_distr: rows.iter().map(|r| r.count_distr).collect(),
            badprob: rows.iter().map(|r| r.badprob).collect(),
            woe: rows.iter().map(|r| r.woe).collect(),
        },
        rows,
        preview,
    })
}

/// Body of the preview and commit endpoints. `breaks` takes cut points for
/// numeric variables or `%,%`-joined level groups for categorical ones;
/// `groups` takes level groups as arrays.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EditRequest {
    pub breaks: Option<Vec<BreakItem>>,
    pub groups: Option<Vec<Vec<String>>>,
    pub revision: Option<u64>,
}

fn edited(model: &BinningModel, name: &str, req: &EditRequest) -> Result<Option<(BinningModel, BinEdit)>, ApiError> {
    let model = match (&req.breaks, &req.groups) {
        (Some(items), _) => {
            let list: BreaksList = [(name.to_string(), items.clone())].into();
            model.variable(name)?;
            model.apply_breaks_list(&list)?
        }
        (None, Some(g)) => model.set_breaks(name, &BinEdit::Groups(g.clone()))?,
        (None, None) => return Ok(None),
    };
    let rule = &model.variable(name)?.rule;
    let edit = match rule {
        scorecard_forge::binning::BinRule::Numeric { breaks } => BinEdit::Breaks(breaks.clone()),
        scorecard_forge::binning::BinRule::Categorical { groups } => BinEdit::Groups(groups.clone()),
    };
    Ok(Some((model, edit)))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AutobinRequest {
    pub method: Option<BinningMethod>,
    pub params: Option<BinningParams>,
    pub revision: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FitRequest {
    pub criterion: Option<Criterion>,
    pub revision: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RevisionRequest {
    pub revision: Option<u64>,
}

async fn get_project(State(s): State<SharedSession>) -> ApiResult<ProjectView> {
    read(&s, |s| {
        Ok(ProjectView {
            revision: s.revision,
            project: s.workspace.project.clone(),
            stages: s
                .workspace
                .status()
                .into_iter()
                .map(|(stage, state)| StageStatus { stage, state })
                .collect(),
            pending: s.pending.keys().cloned().collect(),
        })
    })
    .await
    .map(Json)
}

fn variables_view(s: &Session) -> Result<VariablesView, ApiError> {
    let ws = &s.workspace;
    ws.require(Stage::Bins)?;
    let bins = ws.bins()?;
    let stability = bins.stability(&ws.train()?, &ws.valid()?)?;
    let preselect = match ws.state(Stage::Preselect) {
        StageState::Fresh => Some(ws.preselect_report()?),
        _ => None,
    };
    let variables = bins
        .variables
        .iter()
        .map(|v| VariableEntry {
            name: v.name.clone(),
            kind: v.kind(),
            iv: v.total_iv,
            psi: stability.variable(&v.name).map(|p| p.psi),
            kept: preselect.as_ref().and_then(|r| r.entry(&v.name)).map(|e| e.kept),
            n_bins: v.bins.len(),
            monotone: v.is_monotone(),
            dirty: s.pending.contains_key(&v.name),
        })
        .collect();
    Ok(VariablesView {
        revision: s.revision,
        variables,
    })
}

async fn get_variables(State(s): State<SharedSession>) -> ApiResult<VariablesView> {
    read(&s, variables_view).await.map(Json)
}

async fn get_bins(State(s): State<SharedSession>, UrlPath(v): UrlPath<String>) -> ApiResult<BinsView> {
    read(&s, move |s| {
        s.workspace.require(Stage::Bins)?;
        bins_view(&s.workspace.bins()?, &v, s.revision, false)
    })
    .await
    .map(Json)
}

async fn preview_breaks(
    State(s): State<SharedSession>,
    UrlPath(v): UrlPath<String>,
    Json(req): Json<EditRequest>,
) -> ApiResult<BinsView> {
    let (view, edit) = read(&s, move |s| {
        s.workspace.require(Stage::Bins)?;
        let bins = s.workspace.bins()?;
        let (model, edit) = edited(&bins, &v, &req)?.ok_or(ApiError::EmptyEdit)?;
        Ok((bins_view(&model, &v, s.revision, true)?, edit))
    })
    .await?;
    // remembering the edit is bookkeeping only; committed state is untouched
    s.write().await.pending.insert(view.variable.clone(), edit);
    Ok(Json(view))
}

async fn commit_breaks(
    State(s): State<SharedSession>,
    UrlPath(v): UrlPath<String>,
    body: Option<Json<EditRequest>>,
) -> ApiResult<BinsView> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    write(&s, move |s| {
        s.check_revision(req.revision)?;
        s.workspace.require(Stage::Bins)?;
        let bins = s.workspace.bins()?;
        let model = match edited(&bins, &v, &req)? {
            Some((m, _)) => m,
            None => {
                bins.variable(&v)?;
                let edit = s.pending.get(&v).ok_or_else(|| ApiError::NoPendingEdit(v.clone()))?;
                bins.set_breaks(&v, edit)?
            }
        };
        s.workspace.commit_bins(&model)?;
        s.workspace.run_woe()?;
        s.pending.remove(&v);
        let revision = s.committed();
        bins_view(&model, &v, revision, false)
    })
    .await
    .map(Json)
}

async fn autobin(State(s): State<SharedSession>, body: Option<Json<AutobinRequest>>) -> ApiResult<VariablesView> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    write(&s, move |s| {
        s.check_revision(req.revision)?;
        let mut params = req.params.unwrap_or_else(|| s.workspace.project.binning.clone());
        if let Some(m) = req.method {
            params.method = m;
        }
        params.validate()?;
        s.workspace.project.binning = params;
        s.workspace.run_bin()?;
        s.workspace.run_woe()?;
        s.pending.clear();
        s.committed();
        variables_view(s)
    })
    .await
    .map(Json)
}

async fn run_preselect(State(s): State<SharedSession>, body: Option<Json<RevisionRequest>>) -> ApiResult<Value> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    write(&s, move |s| {
        s.check_revision(req.revision)?;
        let report = s.workspace.run_preselect()?;
        let revision = s.committed();
        Ok(json!({ "revision": revision, "report": report }))
    })
    .await
    .map(Json)
}

/// Stepwise fit, scaling and evaluation in one mutation.
async fn fit(State(s): State<SharedSession>, body: Option<Json<FitRequest>>) -> ApiResult<Value> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    write(&s, move |s| {
        s.check_revision(req.revision)?;
        if let Some(c) = req.criterion {
            s.workspace.project.criterion = c;
        }
        let stepwise = s.workspace.run_fit()?;
        let scorecard = s.workspace.run_scale()?;
        let evaluation = s.workspace.run_evaluate()?;
        let revision = s.committed();
        Ok(json!({
            "revision": revision,
            "criterion": s.workspace.project.criterion,
            "stepwise": stepwise,
            "scorecard": scorecard,
            "performance": evaluation.performance,
        }))
    })
    .await
    .map(Json)
}

async fn get_scorecard(State(s): State<SharedSession>) -> ApiResult<Value> {
    read(&s, |s| {
        s.workspace.require(Stage::Scorecard)?;
        Ok(json!({ "revision": s.revision, "scorecard": s.workspace.scorecard()? }))
    })
    .await
    .map(Json)
}

async fn get_performance(State(s): State<SharedSession>) -> ApiResult<Value> {
    read(&s, |s| {
        s.workspace.require(Stage::Performance)?;
        Ok(json!({ "revision": s.revision, "evaluation": s.workspace.evaluation()? }))
    })
    .await
    .map(Json)
}

fn local_origin(origin: &HeaderValue) -> bool {
    let Ok(o) = origin.to_str() else { return false };
    let host = o.strip_prefix("http://").or_else(|| o.strip_prefix("https://")).unwrap_or("");
    let host = host.rsplit_once(':').map_or(host, |(h, port)| if port.chars().all(|c| c.is_ascii_digit()) { h } else { host });
    matches!(host, "localhost" | "127.0.0.1" | "[::1]")
}

/// Routes of the session service.
pub fn router(session: SharedSession) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|o, _| local_origin(o)))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    Router::new()
        .route("/project", get(get_project))
        .route("/variables", get(get_variables))
        .route("/variables/{v}/bins", get(get_bins))
        .route("/variables/{v}/breaks", post(preview_breaks))
        .route("/variables/{v}/commit", post(commit_breaks))
        .route("/autobin", post(autobin))
        .route("/preselect", post(run_preselect))
        .route("/fit", post(fit))
        .route("/scorecard", get(get_scorecard))
        .route("/performance", get(get_performance))
        .layer(cors)
        .with_state(session)
}

/// Serves the project at `root` on `addr` until `shutdown` resolves.
pub async fn serve(
    root: impl AsRef<Path>,
    addr: SocketAddr,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let session = Session::open(root).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(RwLock::new(session))))
        .with_graceful_shutdown(shutdown)
        .await
}
