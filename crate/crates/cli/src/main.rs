use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use routecrowd_core::assign::{top_k_workers, WorkerStatus};
use routecrowd_core::familiarity::{accumulate, build_matrix, predict_matrix, train_pmf, WorkerLandmarkMatrix};
use routecrowd_core::io as formats;
use routecrowd_core::question::build_tree;
use routecrowd_core::select::{select, Algorithm, SelectOptions};
use routecrowd_core::significance::{build_visit_graph, infer_significance};
use routecrowd_core::{LandmarkId, LandmarkIndex};
use routecrowd_service::store::{MemoryStore, RedbStore, Store};
use routecrowd_service::{Engine, ServiceConfig, SystemClock};
use routecrowd_sim::{generate_world, run_scenario, BehaviorModel, Sizes, World};
use serde_json::json;

#[derive(Parser)]
#[command(name = "routecrowd", version, about = "Crowd-evaluated route recommendation")]
struct Cli {
    /// TOML file with thresholds and server settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load landmarks, check-ins and worker profiles into the service store.
    Ingest(IngestArgs),
    /// Infer landmark significance from check-ins.
    Significance(SignificanceArgs),
    /// Pick the landmarks to ask about for a candidate set.
    SelectLandmarks(SelectArgs),
    /// Select landmarks and print the question tree.
    BuildTree(TreeArgs),
    /// Fit latent factors to the familiarity matrix of a worker population.
    TrainPmf(TrainArgs),
    /// Spatially smooth a completed familiarity matrix.
    Accumulate(AccumulateArgs),
    /// Rank workers for a set of task landmarks.
    RankWorkers(RankArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Generate a synthetic world and run it through the pipeline.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    landmarks: Option<PathBuf>,
    #[arg(long)]
    checkins: Option<PathBuf>,
    #[arg(long)]
    workers: Option<PathBuf>,
    /// Retrain familiarity after loading.
    #[arg(long)]
    retrain: bool,
    /// Store file; defaults to `server.store_path` from the config.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct SignificanceArgs {
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    checkins: PathBuf,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    landmarks: PathBuf,
    /// Candidate set file.
    #[arg(long)]
    candidates: PathBuf,
    /// Significance file overriding the landmark file's column.
    #[arg(long)]
    significance: Option<PathBuf>,
    /// brute, ils or greedy; defaults to the configured algorithm.
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Allow sets smaller than ceil(log2 n).
    #[arg(long)]
    relax_min_size: bool,
}

#[derive(Args)]
struct TreeArgs {
    #[command(flatten)]
    select: SelectArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    workers: PathBuf,
    /// Where to write the latent factors as JSON.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Where to write the completed matrix.
    #[arg(long)]
    completed: Option<PathBuf>,
}

#[derive(Args)]
struct AccumulateArgs {
    #[arg(long)]
    landmarks: PathBuf,
    /// Completed familiarity matrix.
    #[arg(long)]
    matrix: PathBuf,
    /// Knowledge radius in km; defaults to the configured value.
    #[arg(long)]
    eta_dis: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Accumulated familiarity matrix.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    workers: PathBuf,
    /// Comma-separated task landmark ids.
    #[arg(long, value_delimiter = ',', required = true)]
    task: Vec<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Hours until the deadline.
    #[arg(long, default_value_t = 2.0)]
    hours: f64,
}

#[derive(Args)]
struct ServeArgs {
    /// Overrides `server.bind`.
    #[arg(long)]
    bind: Option<SocketAddr>,
    /// Overrides `server.store_path`.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 36)]
    landmarks: usize,
    #[arg(long, default_value_t = 15)]
    workers: usize,
    #[arg(long, default_value_t = 10)]
    requests: usize,
    /// `perfect`, a constant probability in [0.5, 1], or `familiarity:SCALE`.
    #[arg(long, default_value = "perfect")]
    accuracy: String,
    /// Workers per task; defaults to the configured value.
    #[arg(long)]
    k: Option<usize>,
    /// Per-request rows.
    #[arg(long)]
    report: PathBuf,
    /// Summary statistics; stdout when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Also write the generated world's input files here.
    #[arg(long)]
    world_dir: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(formats::create(p)?),
        None => Box::new(io::stdout()),
    })
}

fn load_index(path: &Path, significance: Option<&Path>) -> Result<LandmarkIndex> {
    let landmarks = formats::read_landmarks(formats::open(path)?).with_context(|| format!("reading {}", path.display()))?;
    let index = LandmarkIndex::new(landmarks)?;
    Ok(match significance {
        Some(p) => index.with_significance(&formats::read_significance(formats::open(p)?).with_context(|| format!("reading {}", p.display()))?),
        None => index,
    })
}

/// Reorders and extends the matrix columns to cover every indexed landmark.
fn widen(m: &WorkerLandmarkMatrix, index: &LandmarkIndex) -> Result<WorkerLandmarkMatrix> {
    let mut out = WorkerLandmarkMatrix::new(m.workers().to_vec(), index.iter().map(|l| l.id.clone()).collect());
    for (i, j, v) in m.iter() {
        let id = &m.landmarks()[j];
        let col = out.landmark_index(id).with_context(|| format!("matrix mentions unknown landmark `{id}`"))?;
        out.set(i, col, v);
    }
    Ok(out)
}

fn ingest(cfg: ServiceConfig, a: IngestArgs) -> Result<()> {
    let path = a.store.or_else(|| cfg.server.store_path.clone().map(PathBuf::from)).context("no store: pass --store or set server.store_path")?;
    let store: Arc<dyn Store> = Arc::new(RedbStore::open(&path)?);
    let engine = Engine::open(cfg, store, Arc::new(SystemClock))?;
    if let Some(p) = &a.landmarks {
        let n = engine.ingest_landmarks(formats::read_landmarks(formats::open(p)?)?)?;
        println!("landmarks: {n}");
    }
    if let Some(p) = &a.checkins {
        let scores = engine.ingest_checkins(&formats::read_checkins(formats::open(p)?)?)?;
        println!("significance: {} landmarks scored", scores.0.len());
    }
    if let Some(p) = &a.workers {
        let n = engine.ingest_workers(formats::read_workers(formats::open(p)?)?)?;
        println!("workers: {n}");
    }
    if a.retrain {
        match engine.retrain()? {
            Some(r) => println!("familiarity: {} iterations, objective {:.6}", r.iterations, r.final_objective),
            None => println!("familiarity: no worker knows any landmark"),
        }
    }
    Ok(())
}

fn significance(cfg: &ServiceConfig, a: SignificanceArgs) -> Result<()> {
    let index = load_index(&a.landmarks, None)?;
    let events = formats::read_checkins(formats::open(&a.checkins)?)?;
    let graph = build_visit_graph(&events, |id| index.get(id).is_some())?;
    let out = infer_significance(&graph, cfg.significance.max_iters, cfg.significance.tol)?;
    eprintln!("converged after {} iterations", out.iterations);
    formats::write_significance(output(a.output.as_deref())?, &out.scores)?;
    Ok(())
}

fn run_select(cfg: &ServiceConfig, a: &SelectArgs) -> Result<(routecrowd_core::CandidateSet, LandmarkIndex, routecrowd_core::select::SelectionResult)> {
    let index = load_index(&a.landmarks, a.significance.as_deref())?;
    let routes = formats::read_candidate_set(formats::open(&a.candidates)?).with_context(|| format!("reading {}", a.candidates.display()))?;
    let algorithm = a.algorithm.unwrap_or(cfg.selection.algorithm);
    let opts = SelectOptions { relax_min_size: a.relax_min_size || cfg.selection.relax_min_size };
    let result = select(&routes, &index, algorithm, opts)?;
    Ok((routes, index, result))
}

fn select_landmarks(cfg: &ServiceConfig, a: SelectArgs) -> Result<()> {
    let (_, _, result) = run_select(cfg, &a)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn tree(cfg: &ServiceConfig, a: TreeArgs) -> Result<()> {
    let (routes, index, sel) = run_select(cfg, &a.select)?;
    let tree = build_tree(&sel.chosen, &routes, &index)?;
    let doc = json!({
        "selected": sel.chosen,
        "value": sel.value,
        "depth": tree.depth(),
        "expected_questions": tree.expected_questions(),
        "tree": tree,
    });
    let mut w = output(a.output.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    Ok(())
}

fn train(cfg: &ServiceConfig, a: TrainArgs) -> Result<()> {
    let index = load_index(&a.landmarks, None)?;
    let workers = formats::read_workers(formats::open(&a.workers)?)?;
    let m = build_matrix(&workers, &index, &cfg.familiarity);
    if m.nnz() == 0 {
        bail!("no worker is familiar with any landmark");
    }
    let (factors, report) = train_pmf(&m, cfg.pmf)?;
    if let Some(p) = &a.checkpoint {
        serde_json::to_writer(formats::create(p)?, &factors)?;
    }
    if let Some(p) = &a.completed {
        formats::write_matrix(formats::create(p)?, &predict_matrix(&m, &factors)?)?;
    }
    let summary = json!({
        "workers": workers.len(),
        "landmarks": index.len(),
        "observed": m.nnz(),
        "iterations": report.iterations,
        "final_objective": report.final_objective,
        "gradient_norm": report.gradient_norm,
        "final_lr": report.final_lr,
        "effective_rank": report.effective_rank,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn accumulate_cmd(cfg: &ServiceConfig, a: AccumulateArgs) -> Result<()> {
    let index = load_index(&a.landmarks, None)?;
    let m = widen(&formats::read_matrix(formats::open(&a.matrix)?)?, &index)?;
    let acc = accumulate(&m, &index, a.eta_dis.unwrap_or(cfg.familiarity.eta_dis_km))?;
    formats::write_matrix(output(a.output.as_deref())?, &acc)?;
    Ok(())
}

fn rank(cfg: &ServiceConfig, a: RankArgs) -> Result<()> {
    let m = formats::read_matrix(formats::open(&a.matrix)?)?;
    let workers = formats::read_workers(formats::open(&a.workers)?)?;
    let statuses: Vec<WorkerStatus> = workers.iter().map(|w| WorkerStatus::from_profile(w, cfg.assignment.default_lambda)).collect();
    let task: Vec<LandmarkId> = a.task.iter().map(|s| LandmarkId::from(s.as_str())).collect();
    let k = a.k.unwrap_or(cfg.assignment.k);
    let sel = top_k_workers(&task, &m, &statuses, &cfg.assignment.eligibility(), a.hours, k)?;
    let mut out = io::stdout().lock();
    writeln!(out, "rank,worker,score")?;
    for (i, (w, s)) in sel.ranked.iter().enumerate() {
        writeln!(out, "{},{w},{s:.6}", i + 1)?;
    }
    if sel.shortfall {
        eprintln!("only {} of {k} workers eligible", sel.ranked.len());
    }
    Ok(())
}

fn serve(cfg: ServiceConfig, a: ServeArgs) -> Result<()> {
    let addr: SocketAddr = match a.bind {
        Some(b) => b,
        None => cfg.server.bind.parse().with_context(|| format!("bad bind address `{}`", cfg.server.bind))?,
    };
    let store: Arc<dyn Store> = match a.store.or_else(|| cfg.server.store_path.clone().map(PathBuf::from)) {
        Some(p) => Arc::new(RedbStore::open(&p)?),
        None => {
            log::warn!("no store configured, state is kept in memory");
            Arc::new(MemoryStore::new())
        }
    };
    let engine = Arc::new(Engine::open(cfg, store, Arc::new(SystemClock))?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(routecrowd_service::api::serve(engine, addr))?;
    Ok(())
}

fn behavior(arg: &str) -> Result<BehaviorModel> {
    Ok(match arg {
        "perfect" => BehaviorModel::perfect(),
        s if s.starts_with("familiarity:") => BehaviorModel::familiarity(s["familiarity:".len()..].parse().context("bad familiarity scale")?)?,
        s => BehaviorModel::constant(s.parse().with_context(|| format!("bad accuracy `{s}`"))?)?,
    })
}

fn export_world(world: &World, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("candidates"))?;
    formats::write_landmarks(formats::create(&dir.join("landmarks.csv"))?, &world.landmarks)?;
    formats::write_checkins(formats::create(&dir.join("checkins.csv"))?, &world.checkins)?;
    let profiles: Vec<_> = world.workers.iter().map(|w| w.profile.clone()).collect();
    formats::write_workers(formats::create(&dir.join("workers.jsonl"))?, &profiles)?;
    let mut reqs = csv::Writer::from_writer(formats::create(&dir.join("requests.csv"))?);
    reqs.write_record(["index", "source_lat", "source_lon", "destination_lat", "destination_lon", "departure", "candidates", "truth", "repeat_of"])?;
    for r in &world.requests {
        let file = format!("candidates/{:02}.csv", r.index);
        formats::write_candidate_set(formats::create(&dir.join(&file))?, &r.candidates)?;
        reqs.write_record([
            r.index.to_string(),
            r.request.source.lat.to_string(),
            r.request.source.lon.to_string(),
            r.request.destination.lat.to_string(),
            r.request.destination.lon.to_string(),
            r.request.departure.to_rfc3339(),
            file,
            r.truth.to_string(),
            r.repeat_of.map(|i| i.to_string()).unwrap_or_default(),
        ])?;
    }
    reqs.flush()?;
    Ok(())
}

fn simulate(mut cfg: ServiceConfig, a: SimulateArgs) -> Result<()> {
    if let Some(k) = a.k {
        cfg.assignment.k = k;
    }
    let b = behavior(&a.accuracy)?;
    let world = generate_world(a.seed, Sizes::new(a.landmarks, a.workers, a.requests))?;
    if let Some(dir) = &a.world_dir {
        export_world(&world, dir)?;
    }
    let run = run_scenario(&world, &b, &cfg)?;
    run.report.write_rows(formats::create(&a.report)?)?;
    run.report.write_summary(output(a.summary.as_deref())?)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    match cli.command {
        Command::Ingest(a) => ingest(cfg, a),
        Command::Significance(a) => significance(&cfg, a),
        Command::SelectLandmarks(a) => select_landmarks(&cfg, a),
        Command::BuildTree(a) => tree(&cfg, a),
        Command::TrainPmf(a) => train(&cfg, a),
        Command::Accumulate(a) => accumulate_cmd(&cfg, a),
        Command::RankWorkers(a) => rank(&cfg, a),
        Command::Serve(a) => serve(cfg, a),
        Command::Simulate(a) => simulate(cfg, a),
    }
}
