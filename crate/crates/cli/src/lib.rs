//! `lakefuse` command-line front end.
//!
//! One invocation runs one pipeline stage. Results go to stdout as JSON (or
//! plain tables with `--pretty`); errors go to stderr as
//! `{code, message, stage}`. Exit codes: 0 success, 1 usage or input error,
//! 2 engine failure.

mod pretty;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{ArgGroup, Args, Parser, Subcommand};
use lakefuse_core::align::{assign_integration_ids, AlignConfig, IntegrationMapping};
use lakefuse_core::analyze::{run_analysis, AnalysisOutput, AnalysisSpec};
use lakefuse_core::artifact;
use lakefuse_core::discovery::{
    assemble_integration_set, DiscoverRequest, DiscoveryContext, DiscoveryResult, IndexParams, JoinIndex,
    MethodRegistry, JOINABLE_LSH,
};
use lakefuse_core::integrate::{IntegrateOptions, OperatorRegistry, DEFAULT_ROW_LIMIT};
use lakefuse_core::lake::Lake;
use lakefuse_core::table::{HeaderMode, Table};
use lakefuse_core::Exec;
use lakefuse_service::app::{TableView, DEFAULT_K, NO_RESULTS_HINT};
use lakefuse_service::config::{ProviderConfig, ServiceConfig};
use lakefuse_service::provider::{generate_query_table, ProviderRegistry};
use lakefuse_service::{ErrorBody, ServiceError, Stage};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "lakefuse", version, about = "Discover, integrate and analyze tables from a CSV data lake")]
pub struct Cli {
    /// Seed for every randomized step (MinHash permutations).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Print human-readable tables instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the MinHash LSH join index and the lake manifest.
    Index(IndexArgs),
    /// Rank lake tables related to a query table.
    Discover(DiscoverArgs),
    /// Assign integration IDs to the columns of a table set.
    Align(AlignArgs),
    /// Integrate a table set into one table.
    Integrate(IntegrateArgs),
    /// Run an analysis over an integrated table.
    Analyze(AnalyzeArgs),
    /// Generate a query table from a text prompt.
    GenQuery(GenQueryArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub lake: PathBuf,
    /// MinHash signature length.
    #[arg(long, default_value_t = IndexParams::default().num_perm)]
    pub k: usize,
    #[arg(long, default_value_t = IndexParams::default().partitions)]
    pub partitions: usize,
    #[arg(long, default_value_t = IndexParams::default().threshold)]
    pub threshold: f64,
    #[arg(long, default_value_t = IndexParams::default().max_rows)]
    pub max_rows: usize,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub lake: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub method: String,
    /// Query column (required by joinable-lsh).
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Containment threshold; defaults to the index's build threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value = "auto")]
    pub header: HeaderMode,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["set", "from_results"])))]
pub struct SetSource {
    /// Directory whose CSV files form the integration set.
    #[arg(long)]
    pub set: Option<PathBuf>,
    /// Discovery results file(s) written by `discover --out`.
    #[arg(long = "from-results", num_args = 1..)]
    pub from_results: Vec<PathBuf>,
    /// Comma-separated table ids to keep from the results.
    #[arg(long, value_delimiter = ',', requires = "from_results")]
    pub select: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    pub source: SetSource,
    #[arg(long, default_value_t = AlignConfig::default().tau)]
    pub tau: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub source: SetSource,
    #[arg(long)]
    pub operator: String,
    /// Mapping JSON; aligned automatically when absent.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Threshold for automatic alignment.
    #[arg(long, default_value_t = AlignConfig::default().tau)]
    pub tau: f64,
    /// Comma-separated join order for order-sensitive operators.
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_ROW_LIMIT)]
    pub row_limit: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenQueryArgs {
    #[arg(long)]
    pub prompt: String,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    /// Provider name; `stub` unless a remote endpoint is configured.
    #[arg(long)]
    pub provider: Option<String>,
    /// Service config file supplying provider settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `listen` from the config file.
    #[arg(long)]
    pub listen: Option<String>,
}

/// Written by `discover --out`; enough to rebuild the integration set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryRun {
    pub lake_root: PathBuf,
    pub query_path: PathBuf,
    pub query_header: HeaderMode,
    pub result: DiscoveryResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

struct Failure {
    error: ServiceError,
    stage: Option<Stage>,
}

impl<E: Into<ServiceError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            error: e.into(),
            stage: None,
        }
    }
}

type Outcome = Result<Output, Failure>;

/// What a subcommand prints on success.
pub struct Output {
    /// Pretty JSON in field declaration order.
    pub json: String,
    pub pretty: String,
}

fn at<E: Into<ServiceError>>(stage: Stage) -> impl FnOnce(E) -> Failure {
    move |e| Failure {
        error: e.into(),
        stage: Some(stage),
    }
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> Result<String, ServiceError> {
    Ok(artifact::json_string(v)?)
}

fn absolute(p: &Path) -> Result<PathBuf, ServiceError> {
    std::fs::canonicalize(p)
        .map_err(|e| lakefuse_core::Error::Io {
            path: p.to_path_buf(),
            source: e,
        })
        .map_err(Into::into)
}

fn index_params(seed: u64) -> IndexParams {
    IndexParams {
        seed,
        ..IndexParams::default()
    }
}

fn cmd_index(cli: &Cli, a: &IndexArgs) -> Outcome {
    let stage = at::<lakefuse_core::Error>(Stage::Discover);
    let params = IndexParams {
        num_perm: a.k,
        partitions: a.partitions,
        threshold: a.threshold,
        seed: cli.seed,
        max_rows: a.max_rows,
        ..IndexParams::default()
    };
    let run = || -> lakefuse_core::Result<_> {
        let lake = Lake::ingest(&a.lake, Exec::default())?;
        let index = JoinIndex::build(&lake, params)?;
        let (bin, side) = index.save(&a.lake)?;
        let manifest = lake.write_manifest()?;
        Ok((index.sidecar(), bin, side, manifest, lake.len()))
    };
    let (sidecar, bin, side, manifest, tables) = run().map_err(stage)?;
    let pretty = format!(
        "indexed {} columns from {tables} tables into {} ({} partitions)\n",
        sidecar.total_columns,
        bin.display(),
        sidecar.partitions.len()
    );
    Ok(Output {
        json: to_json(&json!({
            "index": bin,
            "sidecar": side,
            "manifest": manifest,
            "tables": tables,
            "params": sidecar,
        }))?,
        pretty,
    })
}

fn cmd_discover(cli: &Cli, a: &DiscoverArgs) -> Outcome {
    let fail = |e: ServiceError| Failure {
        error: e,
        stage: Some(Stage::Discover),
    };
    let lake_root = absolute(&a.lake).map_err(fail)?;
    let query_path = absolute(&a.query).map_err(fail)?;
    let run = || -> lakefuse_core::Result<DiscoveryRun> {
        let lake = Lake::ingest(&lake_root, Exec::default())?;
        let query = Table::load(&query_path, a.header)?;
        let registry = MethodRegistry::with_builtins();
        let method = registry.get(&a.method)?;
        let params = index_params(cli.seed);
        let index = if a.method == JOINABLE_LSH {
            Some(JoinIndex::load_or_build(&lake, params)?)
        } else {
            None
        };
        let ctx = DiscoveryContext {
            lake: &lake,
            join_index: index.as_ref(),
            index_params: params,
            weights: AlignConfig::default().weights,
            exec: Exec::default(),
        };
        let req = DiscoverRequest {
            query: &query,
            query_column: a.column.as_deref(),
            k: a.k,
            threshold: a
                .threshold
                .unwrap_or_else(|| index.as_ref().map_or(params.threshold, |i| i.params().threshold)),
        };
        let result = method.discover(&ctx, &req)?;
        Ok(DiscoveryRun {
            lake_root: lake_root.clone(),
            query_path: query_path.clone(),
            query_header: a.header,
            hint: result.results.is_empty().then(|| NO_RESULTS_HINT.to_string()),
            result,
        })
    };
    let out = run().map_err(|e| fail(e.into()))?;
    if let Some(path) = &a.out {
        artifact::write_json(path, &out).map_err(|e| fail(e.into()))?;
    }
    let pretty = pretty::discovery(&out.result, out.hint.as_deref());
    Ok(Output {
        json: to_json(&out)?,
        pretty,
    })
}

/// The integration set named by `--set` or `--from-results`.
fn load_set(src: &SetSource) -> Result<Vec<Arc<Table>>, ServiceError> {
    if let Some(dir) = &src.set {
        let lake = Lake::ingest(dir, Exec::default())?;
        if lake.is_empty() {
            return Err(ServiceError::BadRequest(format!("no CSV tables under {}", dir.display())));
        }
        return Ok(lake.tables().cloned().collect());
    }
    let runs: Vec<DiscoveryRun> = src
        .from_results
        .iter()
        .map(artifact::read_json)
        .collect::<lakefuse_core::Result<_>>()?;
    let first = runs
        .first()
        .ok_or_else(|| ServiceError::BadRequest("no results files given".into()))?;
    if runs
        .iter()
        .any(|r| r.lake_root != first.lake_root || r.query_path != first.query_path)
    {
        return Err(ServiceError::BadRequest(
            "results files disagree on lake or query".into(),
        ));
    }
    let lake = Lake::ingest(&first.lake_root, Exec::default())?;
    let query = Table::load(&first.query_path, first.query_header)?;
    let results: Vec<DiscoveryResult> = runs.into_iter().map(|r| r.result).collect();
    Ok(assemble_integration_set(&results, src.select.as_deref(), &query, &lake)?)
}

fn cmd_align(_cli: &Cli, a: &AlignArgs) -> Outcome {
    let fail = at::<ServiceError>(Stage::Align);
    if !(0.0..=1.0).contains(&a.tau) {
        return Err(fail(lakefuse_core::Error::InvalidParameter(format!("tau {} outside [0, 1]", a.tau)).into()));
    }
    let set = load_set(&a.source).map_err(fail)?;
    let cfg = AlignConfig {
        tau: a.tau,
        ..AlignConfig::default()
    };
    let alignment = assign_integration_ids(&set, &cfg);
    alignment
        .mapping
        .save(&a.out)
        .map_err(|e| Failure { error: e.into(), stage: Some(Stage::Align) })?;
    for w in &alignment.warnings {
        eprintln!("warning: {w}");
    }
    Ok(Output {
        pretty: pretty::mapping(&alignment.mapping),
        json: to_json(&alignment)?,
    })
}

fn cmd_integrate(_cli: &Cli, a: &IntegrateArgs) -> Outcome {
    let fail = |e: ServiceError| Failure {
        error: e,
        stage: Some(Stage::Integrate),
    };
    let set = load_set(&a.source).map_err(fail)?;
    let operators = OperatorRegistry::with_builtins();
    operators.get(&a.operator).map_err(|e| fail(e.into()))?;
    let mapping = match &a.mapping {
        Some(p) => IntegrationMapping::load(p).map_err(|e| fail(e.into()))?,
        None => {
            let cfg = AlignConfig {
                tau: a.tau,
                ..AlignConfig::default()
            };
            let alignment = assign_integration_ids(&set, &cfg);
            for w in &alignment.warnings {
                eprintln!("warning: {w}");
            }
            alignment.mapping
        }
    };
    let opts = IntegrateOptions {
        row_limit: a.row_limit,
        order: a.order.clone(),
        exec: Exec::default(),
    };
    let out = operators
        .integrate_with(&a.operator, &set, &mapping, &opts)
        .map_err(|e| fail(e.into()))?;
    let lineage = out.save(&a.out).map_err(|e| fail(e.into()))?;
    let view = TableView::of(&out.to_table(&a.operator), out.num_rows());
    Ok(Output {
        pretty: pretty::grid(&view.columns, &view.rows),
        json: to_json(&json!({
            "operator": out.operator,
            "out": a.out,
            "lineage": lineage,
            "columns": out.columns,
            "rows": out.num_rows(),
            "mapping": out.mapping,
        }))
        .map_err(fail)?,
    })
}

fn cmd_analyze(_cli: &Cli, a: &AnalyzeArgs) -> Outcome {
    let fail = |e: ServiceError| Failure {
        error: e,
        stage: Some(Stage::Analyze),
    };
    let table = Table::load(&a.table, HeaderMode::Present).map_err(|e| fail(e.into()))?;
    let spec: AnalysisSpec = artifact::read_json(&a.spec).map_err(|e| fail(e.into()))?;
    let result = run_analysis(&table, &spec, Exec::default()).map_err(|e| fail(e.into()))?;
    if let Some(out) = &a.out {
        artifact::write_json(out, &result).map_err(|e| fail(e.into()))?;
        if let AnalysisOutput::Aggregate(agg) = &result.output {
            artifact::write_atomic(out.with_extension("csv"), agg.to_csv_string()).map_err(|e| fail(e.into()))?;
        }
    }
    Ok(Output {
        pretty: pretty::analysis(&result),
        json: to_json(&result)?,
    })
}

fn cmd_gen_query(_cli: &Cli, a: &GenQueryArgs) -> Outcome {
    let provider_cfg = match &a.config {
        Some(p) => ServiceConfig::load(p)?.provider,
        None => ProviderConfig::default(),
    };
    let registry = ProviderRegistry::from_config(&provider_cfg);
    let table = generate_query_table(&registry, &a.prompt, a.rows, a.cols, a.provider.as_deref())?;
    if let Some(out) = &a.out {
        artifact::write_atomic(out, table.to_csv_string())?;
    }
    let view = TableView::of(&table, table.num_rows());
    Ok(Output {
        pretty: pretty::grid(&view.columns, &view.rows),
        json: to_json(&view)?,
    })
}

fn cmd_serve(a: &ServeArgs) -> Outcome {
    let mut cfg = ServiceConfig::load(&a.config)?;
    if let Some(l) = &a.listen {
        cfg.listen = l.clone();
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
    rt.block_on(lakefuse_service::serve(cfg))?;
    Ok(Output {
        json: String::new(),
        pretty: String::new(),
    })
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Index(a) => cmd_index(cli, a),
        Command::Discover(a) => cmd_discover(cli, a),
        Command::Align(a) => cmd_align(cli, a),
        Command::Integrate(a) => cmd_integrate(cli, a),
        Command::Analyze(a) => cmd_analyze(cli, a),
        Command::GenQuery(a) => cmd_gen_query(cli, a),
        Command::Serve(a) => cmd_serve(a),
    }
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(out) => {
            let text = if cli.pretty { out.pretty } else { out.json };
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(f) => {
            let body = ErrorBody::new(&f.error, f.stage);
            let _ = writeln!(stderr, "{}", serde_json::to_string(&body).unwrap_or_default());
            if f.error.is_user_error() {
                1
            } else {
                2
            }
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
