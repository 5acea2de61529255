//! `rbir`: build, query, evaluate and inspect region-signature indexes.
//!
//! Results go to stdout as tab-separated lines whose first field names the
//! record; progress and diagnostics go to stderr.

mod html;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rbir::config::Config;
use rbir::emd::EmdMetric;
use rbir::eval::{ingest_dataset, run_evaluation, EvalParams, LabeledDataset};
use rbir::imaging::decode_file;
use rbir::pipeline::{build_index, signature_for_image};
use rbir::signatures::ImageId;
use rbir::store::{load_index, save_index, Index};

/// Id given to query signatures; never assigned to an indexed image.
const QUERY_ID: ImageId = ImageId(u32::MAX);

#[derive(Debug, Parser)]
#[command(name = "rbir", version, about = "Region-based image retrieval")]
struct Cli {
    /// Worker threads for per-image work (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract signatures for a labelled dataset and write an index.
    Build {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Rank indexed images by similarity to an image.
    Query {
        #[arg(long)]
        index: PathBuf,
        image: PathBuf,
        #[arg(long, default_value_t = 10)]
        limit: usize,
        /// Also write an HTML gallery; thumbnails go to `<name>_files/`.
        #[arg(long)]
        html: Option<PathBuf>,
    },
    /// Compare graph search against a sequential scan on the indexed dataset.
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Directory for the report and tables (default: `<index>.eval`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Print the parameters and shape of an index.
    Info {
        #[arg(long)]
        index: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Settings {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set theta=0.05`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Settings {
    fn apply(&self, mut config: Config) -> rbir::Result<Config> {
        if let Some(path) = &self.config {
            config = Config::load(path)?;
        }
        for item in &self.overrides {
            let Some((key, value)) = item.split_once('=') else {
                return Err(rbir::Error::Config(format!("expected KEY=VALUE, got {item:?}")));
            };
            config.set(key.trim(), value.trim())?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

/// A check on freshly computed results failed.
#[derive(Debug)]
struct Violation(String);

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal invariant violated: {}", self.0)
    }
}

impl std::error::Error for Violation {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Violation>().is_some() {
        return 3;
    }
    match err.downcast_ref::<rbir::Error>() {
        Some(rbir::Error::Config(_) | rbir::Error::InvalidParameter(_)) => 1,
        Some(rbir::Error::SolverStalled(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Build { dataset, index, settings } => cmd_build(&dataset, &index, &settings),
        Command::Query { index, image, limit, html } => cmd_query(&index, &image, limit, html.as_deref()),
        Command::Eval { index, dataset, out, settings } => cmd_eval(&index, &dataset, out, &settings),
        Command::Info { index } => cmd_info(&index),
    }
}

fn load(path: &Path) -> anyhow::Result<Index> {
    load_index(path).with_context(|| format!("cannot load index {}", path.display()))
}

fn ingest(root: &Path) -> anyhow::Result<LabeledDataset> {
    let dataset = ingest_dataset(root)?;
    if !dataset.skipped.is_empty() {
        warn!("skipped {} unreadable files", dataset.skipped.len());
    }
    info!("{} images in {} classes", dataset.len(), dataset.classes.len());
    Ok(dataset)
}

fn cmd_build(dataset: &Path, index_path: &Path, settings: &Settings) -> anyhow::Result<()> {
    let config = settings.apply(Config::default())?;
    let dataset = ingest(dataset)?;
    let index = build_index(&dataset, &config)?;
    index.graph.check_invariants(None).map_err(|e| Violation(e.to_string()))?;
    save_index(&index, index_path).with_context(|| format!("cannot write {}", index_path.display()))?;
    info!("wrote {}", index_path.display());
    let g = &index.graph;
    println!("images\t{}", g.len());
    println!("skipped\t{}", dataset.skipped.len());
    println!("theta\t{}", g.theta());
    println!("clusters\t{}", g.clusters().len());
    println!("edges\t{}", g.edges().len());
    println!("clamped\t{}", g.clamped_count());
    println!("build_emd_evaluations\t{}", g.build_evaluations());
    Ok(())
}

fn cmd_query(index_path: &Path, image: &Path, limit: usize, html: Option<&Path>) -> anyhow::Result<()> {
    if limit == 0 {
        return Err(rbir::Error::InvalidParameter("--limit must be at least 1".into()).into());
    }
    let index = load(index_path)?;
    let img = decode_file(image).with_context(|| format!("cannot read query image {}", image.display()))?;
    let query = signature_for_image(&img, QUERY_ID, &index.config, &index.palette)?;
    let metric = EmdMetric::new(&index.palette);
    let result = index.graph.query(&query, limit, &metric)?;

    let mut rows = Vec::with_capacity(result.ranked.len());
    for (rank, &(id, distance)) in result.ranked.iter().enumerate() {
        let entry = index
            .catalog
            .entry(id)
            .ok_or_else(|| Violation(format!("image {id} missing from the catalog")))?;
        println!("result\t{}\t{id}\t{distance}\t{}\t{}", rank + 1, entry.label, entry.path);
        rows.push(html::Row { rank: rank + 1, id, distance, label: entry.label.clone(), path: index.catalog.full_path(entry) });
    }
    println!("emd_evaluations\t{}", result.emd_evaluations);
    println!("member_evaluations\t{}", result.member_evaluations);
    println!("clusters_visited\t{}", result.clusters_visited);

    if let Some(out) = html {
        html::write_gallery(out, image, &img, &rows).with_context(|| format!("cannot write {}", out.display()))?;
        info!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_eval(index_path: &Path, dataset: &Path, out: Option<PathBuf>, settings: &Settings) -> anyhow::Result<()> {
    let index = load(index_path)?;
    let config = settings.apply(index.config.clone())?;
    let dataset = ingest(dataset)?;
    let indexed: Vec<(ImageId, &str)> = index.catalog.entries.iter().map(|e| (e.id, e.path.as_str())).collect();
    let found: Vec<(ImageId, &str)> = dataset.entries.iter().map(|e| (e.id, e.relative.as_str())).collect();
    if indexed != found {
        bail!(rbir::Error::Dataset("the dataset does not match the images in the index".into()));
    }

    let metric = EmdMetric::new(&index.palette);
    let params = EvalParams::from_config(&config, dataset.len());
    let report = run_evaluation(&dataset, &index.graph, &metric, &params)?;

    let out = out.unwrap_or_else(|| {
        let mut name = index_path.as_os_str().to_owned();
        name.push(".eval");
        PathBuf::from(name)
    });
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let files = [
        ("report.txt", report.to_text(&config)),
        ("queries.tsv", report.queries_tsv()),
        ("growth.tsv", report.growth_tsv()),
        ("timings.tsv", report.timings_tsv()),
    ];
    for (name, text) in files {
        fs::write(out.join(name), text).with_context(|| format!("cannot write {}", out.join(name).display()))?;
    }
    info!("wrote report to {}", out.display());

    println!("queries\t{}", report.queries.len());
    for (c, cutoff) in report.cutoffs.iter().enumerate() {
        let s = report.overall(c);
        let recall = |r: Option<f64>| r.map_or_else(|| "na".into(), |r| r.to_string());
        println!("graph_precision@{cutoff}\t{}", s.graph_precision);
        println!("graph_recall@{cutoff}\t{}", recall(s.graph_recall));
        println!("ssf_precision@{cutoff}\t{}", s.ssf_precision);
        println!("ssf_recall@{cutoff}\t{}", recall(s.ssf_recall));
    }
    println!("mean_graph_emd_evaluations\t{}", report.mean_graph_evaluations());
    println!("mean_ssf_emd_evaluations\t{}", report.mean_ssf_evaluations());
    println!("evaluation_ratio\t{}", report.evaluation_ratio());
    Ok(())
}

fn cmd_info(index_path: &Path) -> anyhow::Result<()> {
    let index = load(index_path)?;
    let g = &index.graph;
    for line in index.config.to_text().lines() {
        if let Some((key, value)) = line.split_once(" = ") {
            println!("config\t{key}\t{value}");
        }
    }
    println!("dataset\t{}", index.catalog.root);
    println!("palette_colors\t{}", index.palette.len());
    println!("images\t{}", g.len());
    println!("theta\t{}", g.theta());
    println!("k_edge\t{}", g.k_edge());
    println!("clusters\t{}", g.clusters().len());
    println!("edges\t{}", g.edges().len());
    println!("clamped\t{}", g.clamped_count());
    println!("build_emd_evaluations\t{}", g.build_evaluations());
    let mut sizes = BTreeMap::new();
    for c in g.clusters() {
        *sizes.entry(c.members.len()).or_insert(0usize) += 1;
    }
    for (size, count) in sizes {
        println!("cluster_size\t{size}\t{count}");
    }
    Ok(())
}
