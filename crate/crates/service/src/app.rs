//! Session-scoped pipeline operations behind the HTTP routes.
//!
//! Every method here is synchronous and assumes the caller holds the
//! session's lock.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use lakefuse_core::align::{assign_integration_ids, AlignConfig, IntegrationMapping};
use lakefuse_core::analyze::{run_analysis, AnalysisOutput, AnalysisSpec};
use lakefuse_core::artifact;
use lakefuse_core::discovery::{
    assemble_integration_set, DiscoverRequest, DiscoveryContext, DiscoveryResult, JoinIndex, MethodRegistry,
    JOINABLE_LSH,
};
use lakefuse_core::integrate::{IntegrateOptions, IntegratedTable, Lineage, OperatorRegistry, FD};
use lakefuse_core::lake::{CatalogEntry, IngestWarning, Lake};
use lakefuse_core::table::{HeaderMode, Table};
use lakefuse_core::Exec;
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::error::{Result, ServiceError};
use crate::provider::{generate_query_table, ProviderRegistry};
use crate::session::{
    discovery_file, integration_file, AnalysisRecord, IntegrationInfo, MappingInfo, QueryInfo, SessionState,
    SessionStore, Stage, MAPPING_FILE, QUERY_FILE,
};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_QUERY_ID: &str = "query.csv";
pub const DEFAULT_PREVIEW_ROWS: usize = 20;
pub const NO_RESULTS_HINT: &str =
    "no related tables found; try another method, a different query column or a lower threshold";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableView {
    pub table_id: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
    pub total_rows: usize,
}

impl TableView {
    pub fn of(t: &Table, limit: usize) -> Self {
        TableView {
            table_id: t.id().to_string(),
            columns: t.columns().to_vec(),
            rows: t
                .rows()
                .iter()
                .take(limit)
                .map(|r| r.iter().map(|c| c.as_str().map(str::to_string)).collect())
                .collect(),
            total_rows: t.num_rows(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub provider: Option<String>,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryView {
    pub query: QueryInfo,
    pub preview: TableView,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DiscoverBody {
    pub method: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub query_column: Option<String>,
    #[serde(default)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscoverResponse {
    pub result: DiscoveryResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SelectionBody {
    pub table_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResponse {
    pub selection: Vec<String>,
    /// Tables that will be aligned, query first.
    pub integration_set: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct AlignBody {
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct IntegrateBody {
    pub operator: String,
    #[serde(default)]
    pub order: Vec<String>,
    #[serde(default)]
    pub row_limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegrationView {
    #[serde(flatten)]
    pub info: IntegrationInfo,
    pub cells: Vec<Vec<Option<String>>>,
    pub lineage: Lineage,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AnalyzeBody {
    #[serde(default)]
    pub operator: Option<String>,
    #[serde(flatten)]
    pub spec: AnalysisSpec,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ResetBody {
    pub stage: Stage,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LakeListing {
    pub root: String,
    pub tables: Vec<CatalogEntry>,
    pub warnings: Vec<IngestWarning>,
}

fn out_of_order(msg: impl Into<String>) -> ServiceError {
    ServiceError::OutOfOrder(msg.into())
}

fn require_stage(state: &SessionState, allowed: &[Stage], what: &str) -> Result<()> {
    if allowed.contains(&state.stage) {
        return Ok(());
    }
    Err(out_of_order(format!(
        "cannot {what} while the session is at stage `{}`",
        state.stage
    )))
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub struct App {
    config: ServiceConfig,
    lake: Lake,
    store: SessionStore,
    methods: MethodRegistry,
    operators: OperatorRegistry,
    providers: ProviderRegistry,
    index: Mutex<Option<Arc<JoinIndex>>>,
    exec: Exec,
}

impl App {
    pub fn new(config: ServiceConfig) -> Result<Self> {
        let providers = ProviderRegistry::from_config(&config.provider);
        Self::with_registries(config, MethodRegistry::with_builtins(), OperatorRegistry::with_builtins(), providers)
    }

    pub fn with_registries(
        config: ServiceConfig,
        methods: MethodRegistry,
        operators: OperatorRegistry,
        providers: ProviderRegistry,
    ) -> Result<Self> {
        let exec = Exec::default();
        let lake = Lake::ingest(&config.lake_root, exec)?;
        let store = SessionStore::open(&config.state_root)?;
        Ok(App {
            config,
            lake,
            store,
            methods,
            operators,
            providers,
            index: Mutex::new(None),
            exec,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn lake(&self) -> &Lake {
        &self.lake
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn method_names(&self) -> Vec<String> {
        self.methods.names().map(str::to_string).collect()
    }

    pub fn operator_names(&self) -> Vec<String> {
        self.operators.names().map(str::to_string).collect()
    }

    pub fn provider_names(&self) -> Vec<String> {
        self.providers.names().map(str::to_string).collect()
    }

    pub fn lake_listing(&self) -> LakeListing {
        LakeListing {
            root: self.lake.root().display().to_string(),
            tables: self.lake.catalog().to_vec(),
            warnings: self.lake.warnings().to_vec(),
        }
    }

    pub fn lake_preview(&self, table_id: &str, rows: usize) -> Result<TableView> {
        Ok(TableView::of(self.lake.table(table_id)?, rows))
    }

    fn join_index(&self) -> Result<Arc<JoinIndex>> {
        let mut slot = self.index.lock().expect("index cache poisoned");
        if let Some(idx) = &*slot {
            return Ok(Arc::clone(idx));
        }
        let idx = Arc::new(JoinIndex::load_or_build(&self.lake, self.config.index)?);
        *slot = Some(Arc::clone(&idx));
        Ok(idx)
    }

    fn path(&self, state: &SessionState, file: &str) -> PathBuf {
        self.store.dir(&state.session_id).join(file)
    }

    fn query_table(&self, state: &SessionState) -> Result<Option<Table>> {
        let Some(q) = &state.query else {
            return Ok(None);
        };
        Ok(Some(Table::load_as(self.path(state, &q.file), &q.table_id, q.header)?))
    }

    /// Tables to align and integrate: the query (if any) first, then the
    /// discovered or selected lake tables in id order.
    pub fn integration_set(&self, state: &SessionState) -> Result<Vec<Arc<Table>>> {
        let query = self.query_table(state)?;
        if let Some(q) = &query {
            if !state.discovery.is_empty() {
                let results: Vec<DiscoveryResult> = state.discovery.values().cloned().collect();
                return Ok(assemble_integration_set(&results, state.selection.as_deref(), q, &self.lake)?);
            }
        }
        let Some(selection) = &state.selection else {
            return Err(out_of_order("no integration set yet: run discovery or post a selection"));
        };
        let qid = query.as_ref().map(|q| q.id().to_string());
        let mut ids: Vec<&String> = selection.iter().filter(|id| Some(*id) != qid.as_ref()).collect();
        ids.sort();
        ids.dedup();
        let mut set: Vec<Arc<Table>> = query.into_iter().map(Arc::new).collect();
        for id in ids {
            set.push(Arc::clone(self.lake.table(id)?));
        }
        if set.is_empty() {
            return Err(ServiceError::BadRequest("the integration set is empty".into()));
        }
        Ok(set)
    }

    pub fn create_session(&self) -> Result<SessionState> {
        self.store.create()
    }

    pub fn session(&self, id: &str) -> Result<SessionState> {
        self.store.load(id)
    }

    fn store_query(&self, id: &str, table: Table, text: &str, header: HeaderMode, source: String) -> Result<QueryView> {
        let mut state = self.store.load(id)?;
        require_stage(&state, &[Stage::Discover], "replace the query table (reset to `discover` first)")?;
        artifact::write_atomic(self.store.dir(id).join(QUERY_FILE), text)?;
        let info = QueryInfo {
            table_id: table.id().to_string(),
            file: QUERY_FILE.to_string(),
            columns: table.columns().to_vec(),
            rows: table.num_rows(),
            header,
            source,
        };
        state.query = Some(info.clone());
        self.store.save(&mut state)?;
        Ok(QueryView {
            query: info,
            preview: TableView::of(&table, DEFAULT_PREVIEW_ROWS),
        })
    }

    /// Store uploaded CSV as the query table. The header row is detected
    /// unless `header` says otherwise.
    pub fn upload_query(&self, id: &str, name: Option<&str>, header: HeaderMode, csv: &str) -> Result<QueryView> {
        let name = name.unwrap_or(DEFAULT_QUERY_ID);
        let table = Table::from_csv_str(name, csv, header)?;
        self.store_query(id, table, csv, header, "upload".into())
    }

    pub fn generate_query(&self, id: &str, req: &GenerateRequest) -> Result<QueryView> {
        self.store.load(id)?;
        let provider = req.provider.as_deref().unwrap_or(self.providers.default_name()).to_string();
        let table = generate_query_table(&self.providers, &req.prompt, req.rows, req.cols, Some(&provider))?
            .with_id(req.name.as_deref().unwrap_or(DEFAULT_QUERY_ID));
        let text = table.to_csv_string();
        self.store_query(id, table, &text, HeaderMode::Present, format!("provider:{provider}"))
    }

    pub fn query_view(&self, id: &str) -> Result<QueryView> {
        let state = self.store.load(id)?;
        let table = self
            .query_table(&state)?
            .ok_or_else(|| ServiceError::BadRequest("no query table uploaded".into()))?;
        Ok(QueryView {
            query: state.query.clone().expect("query present"),
            preview: TableView::of(&table, table.num_rows()),
        })
    }

    pub fn discover(&self, id: &str, body: &DiscoverBody) -> Result<DiscoverResponse> {
        let mut state = self.store.load(id)?;
        require_stage(&state, &[Stage::Discover, Stage::Align], "run discovery")?;
        let query = self
            .query_table(&state)?
            .ok_or_else(|| out_of_order("upload or generate a query table before discovery"))?;
        let method = self.methods.get(&body.method)?;
        let index = if body.method == JOINABLE_LSH {
            Some(self.join_index()?)
        } else {
            None
        };
        let ctx = DiscoveryContext {
            lake: &self.lake,
            join_index: index.as_deref(),
            index_params: self.config.index,
            weights: self.config.align.weights,
            exec: self.exec,
        };
        let threshold = body
            .threshold
            .unwrap_or_else(|| index.as_ref().map_or(self.config.index.threshold, |i| i.params().threshold));
        let req = DiscoverRequest {
            query: &query,
            query_column: body.query_column.as_deref(),
            k: body.k.unwrap_or(DEFAULT_K),
            threshold,
        };
        let result = method.discover(&ctx, &req)?;
        artifact::write_json(self.path(&state, &discovery_file(&file_safe(&body.method))), &result)?;
        state.discovery.insert(body.method.clone(), result.clone());
        state.stage = Stage::Align;
        self.store.save(&mut state)?;
        let hint = result.results.is_empty().then(|| NO_RESULTS_HINT.to_string());
        Ok(DiscoverResponse { result, hint })
    }

    pub fn select(&self, id: &str, body: &SelectionBody) -> Result<SelectionResponse> {
        let mut state = self.store.load(id)?;
        require_stage(&state, &[Stage::Discover, Stage::Align], "change the selection")?;
        state.selection = Some(body.table_ids.clone());
        let set = self.integration_set(&state)?;
        state.stage = Stage::Align;
        self.store.save(&mut state)?;
        Ok(SelectionResponse {
            selection: body.table_ids.clone(),
            integration_set: set.iter().map(|t| t.id().to_string()).collect(),
        })
    }

    fn align_state(&self, state: &mut SessionState, tau: Option<f64>) -> Result<MappingInfo> {
        let set = self.integration_set(state)?;
        let cfg = AlignConfig {
            tau: tau.unwrap_or(self.config.align.tau),
            exec: self.exec,
            ..self.config.align
        };
        if !(0.0..=1.0).contains(&cfg.tau) {
            return Err(lakefuse_core::Error::InvalidParameter(format!("tau {} outside [0, 1]", cfg.tau)).into());
        }
        let alignment = assign_integration_ids(&set, &cfg);
        alignment.mapping.save(self.path(state, MAPPING_FILE))?;
        let info = MappingInfo {
            file: MAPPING_FILE.to_string(),
            mapping: alignment.mapping,
            edited: false,
            warnings: alignment.warnings,
        };
        state.mapping = Some(info.clone());
        state.stage = Stage::Integrate;
        Ok(info)
    }

    pub fn align(&self, id: &str, body: &AlignBody) -> Result<MappingInfo> {
        let mut state = self.store.load(id)?;
        require_stage(&state, &[Stage::Align, Stage::Integrate], "align")?;
        let info = self.align_state(&mut state, body.tau)?;
        self.store.save(&mut state)?;
        Ok(info)
    }

    /// Replace the mapping with a user-edited one. It must cover exactly the
    /// columns of the integration set.
    pub fn put_mapping(&self, id: &str, json: &str) -> Result<MappingInfo> {
        let mut state = self.store.load(id)?;
        require_stage(&state, &[Stage::Align, Stage::Integrate], "edit the mapping")?;
        let mapping: IntegrationMapping =
            serde_json::from_str(json).map_err(|e| lakefuse_core::Error::InvalidMapping(e.to_string()))?;
        let set = self.integration_set(&state)?;
        let restricted = mapping.restrict_to(&set)?;
        let given: usize = (0..mapping.len()).map(|i| mapping.members(i).len()).sum();
        let kept: usize = (0..restricted.len()).map(|i| restricted.members(i).len()).sum();
        if kept != given {
            return Err(lakefuse_core::Error::InvalidMapping(
                "mapping names columns outside the integration set".into(),
            )
            .into());
        }
        restricted.save(self.path(&state, MAPPING_FILE))?;
        let info = MappingInfo {
            file: MAPPING_FILE.to_string(),
            mapping: restricted,
            edited: true,
            warnings: Vec::new(),
        };
        state.mapping = Some(info.clone());
        state.stage = Stage::Integrate;
        self.store.save(&mut state)?;
        Ok(info)
    }

    pub fn integrate(&self, id: &str, body: &IntegrateBody) -> Result<IntegrationView> {
        let mut state = self.store.load(id)?;
        require_stage(&state, &[Stage::Align, Stage::Integrate, Stage::Analyze], "integrate")?;
        let operator = self.operators.get(&body.operator)?;
        if state.mapping.is_none() {
            self.align_state(&mut state, None)?;
        }
        let set = self.integration_set(&state)?;
        let mapping = &state.mapping.as_ref().expect("mapping present").mapping;
        let opts = IntegrateOptions {
            row_limit: body.row_limit.unwrap_or(self.config.row_limit),
            order: body.order.clone(),
            exec: self.exec,
        };
        let out = operator.integrate(&set, mapping, &opts)?;
        let file = integration_file(&file_safe(&body.operator));
        let lineage_path = out.save(self.path(&state, &file))?;
        let info = IntegrationInfo {
            operator: body.operator.clone(),
            file,
            lineage: lineage_path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            columns: out.columns.clone(),
            rows: out.num_rows(),
        };
        let mut stale = Vec::new();
        state.analyses.retain(|a| {
            let keep = a.operator != body.operator;
            if !keep {
                stale.push(a.file.clone());
                stale.extend(a.csv.clone());
            }
            keep
        });
        state.integrations.insert(body.operator.clone(), info.clone());
        state.stage = Stage::Analyze;
        self.store.save(&mut state)?;
        self.store.remove_files(id, &stale);
        Ok(view(info, &out))
    }

    pub fn integration(&self, id: &str, operator: &str) -> Result<IntegrationView> {
        let state = self.store.load(id)?;
        let info = state
            .integrations
            .get(operator)
            .cloned()
            .ok_or_else(|| lakefuse_core::Error::UnknownName {
                kind: "integration output",
                name: operator.to_string(),
            })?;
        let table = Table::load(self.path(&state, &info.file), HeaderMode::Present)?;
        let lineage: Lineage = artifact::read_json(self.path(&state, &info.lineage))?;
        Ok(IntegrationView {
            cells: TableView::of(&table, table.num_rows()).rows,
            info,
            lineage,
        })
    }

    pub fn analyze(&self, id: &str, body: &AnalyzeBody) -> Result<AnalysisRecord> {
        let mut state = self.store.load(id)?;
        require_stage(&state, &[Stage::Analyze], "analyze before integrating")?;
        let operator = match &body.operator {
            Some(op) => op.clone(),
            None if state.integrations.contains_key(FD) => FD.to_string(),
            None => state.integrations.keys().next().cloned().expect("analyze stage has an integration"),
        };
        let info = state.integrations.get(&operator).ok_or_else(|| lakefuse_core::Error::UnknownName {
            kind: "integration output",
            name: operator.clone(),
        })?;
        let table = Table::load(self.path(&state, &info.file), HeaderMode::Present)?;
        let result = run_analysis(&table, &body.spec, self.exec)?;
        let n = state
            .analyses
            .iter()
            .filter_map(|a| a.file.strip_prefix("analysis.")?.strip_suffix(".json")?.parse::<usize>().ok())
            .max()
            .map_or(1, |m| m + 1);
        let file = format!("analysis.{n}.json");
        artifact::write_json(self.path(&state, &file), &result)?;
        let csv = match &result.output {
            AnalysisOutput::Aggregate(agg) => {
                let name = format!("analysis.{n}.csv");
                artifact::write_atomic(self.path(&state, &name), agg.to_csv_string())?;
                Some(name)
            }
            _ => None,
        };
        let record = AnalysisRecord {
            operator,
            file,
            csv,
            result,
        };
        state.analyses.push(record.clone());
        self.store.save(&mut state)?;
        Ok(record)
    }

    pub fn reset(&self, id: &str, body: &ResetBody) -> Result<SessionState> {
        let mut state = self.store.load(id)?;
        let stale = state.reset_to(body.stage);
        self.store.save(&mut state)?;
        self.store.remove_files(id, &stale);
        Ok(state)
    }
}

fn view(info: IntegrationInfo, out: &IntegratedTable) -> IntegrationView {
    IntegrationView {
        cells: out
            .rows
            .iter()
            .map(|r| r.cells.iter().map(|c| c.as_str().map(str::to_string)).collect())
            .collect(),
        lineage: out.lineage(),
        info,
    }
}
