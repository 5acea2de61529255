//! Labelled datasets, the sequential-scan baseline, and precision/recall
//! measurement of graph search against it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use walkdir::WalkDir;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::imaging::probe_dimensions;
use crate::sgraph::{rank_signatures, QueryResult, SignatureGraph, SignatureMetric};
use crate::signatures::{ImageId, ImageSignature};

const IMAGE_EXTENSIONS: &[&str] = &["ppm", "png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: ImageId,
    pub path: PathBuf,
    /// Path below the dataset root with `/` separators.
    pub relative: String,
    pub label: String,
}

/// Images grouped by class, one class per top-level directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub root: PathBuf,
    pub entries: Vec<DatasetEntry>,
    pub classes: BTreeMap<String, usize>,
    /// Files that looked like images but could not be read.
    pub skipped: Vec<(PathBuf, String)>,
}

impl LabeledDataset {
    /// Builds a dataset from `(label, relative path)` pairs without touching
    /// the filesystem; ids follow the given order.
    pub fn from_entries(root: impl Into<PathBuf>, items: impl IntoIterator<Item = (String, String)>) -> LabeledDataset {
        let root = root.into();
        let mut classes = BTreeMap::new();
        let entries = items
            .into_iter()
            .enumerate()
            .map(|(i, (label, relative))| {
                *classes.entry(label.clone()).or_insert(0) += 1;
                DatasetEntry { id: ImageId(i as u32), path: root.join(&relative), relative, label }
            })
            .collect();
        LabeledDataset { root, entries, classes, skipped: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> HashMap<ImageId, &str> {
        self.entries.iter().map(|e| (e.id, e.label.as_str())).collect()
    }

    pub fn class_size(&self, label: &str) -> usize {
        self.classes.get(label).copied().unwrap_or(0)
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Enumerates `root/<class>/**/<image>` in sorted path order. Unreadable
/// images are skipped and listed in [`LabeledDataset::skipped`].
pub fn ingest_dataset(root: impl AsRef<Path>) -> Result<LabeledDataset> {
    let root = root.as_ref();
    let mut class_dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::Dataset(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();

    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for dir in class_dirs {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let label: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
        for entry in WalkDir::new(&dir).sort_by_file_name() {
            let entry = match entry {
                Ok(e) => e,
                Err(e) => {
                    warn!("skipping unreadable entry: {e}");
                    skipped.push((dir.clone(), e.to_string()));
                    continue;
                }
            };
            if !entry.file_type().is_file() || !is_image(entry.path()) {
                continue;
            }
            let path = entry.path();
            let relative = path
                .strip_prefix(root)
                .expect("walk stays below the root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            if relative.contains(['\n', '\r']) {
                skipped.push((path.to_path_buf(), "path contains a line break".into()));
                continue;
            }
            match probe_dimensions(path) {
                Ok(_) => items.push((label.clone(), relative)),
                Err(e) => {
                    warn!("skipping {}: {e}", path.display());
                    skipped.push((path.to_path_buf(), e.to_string()));
                }
            }
        }
    }
    if items.is_empty() {
        return Err(Error::Dataset(format!("no readable images below {}", root.display())));
    }
    let mut dataset = LabeledDataset::from_entries(root, items);
    dataset.skipped = skipped;
    Ok(dataset)
}

/// Sequential signature-file scan: every stored signature is compared.
pub fn ssf_scan(
    signatures: &[ImageSignature],
    query: &ImageSignature,
    limit: usize,
    metric: &dyn SignatureMetric,
) -> Result<QueryResult> {
    if signatures.is_empty() {
        return Err(Error::EmptyInput("no signatures to scan"));
    }
    let refs: Vec<&ImageSignature> = signatures.iter().collect();
    let mut ranked = rank_signatures(&refs, query, metric)?;
    ranked.truncate(limit);
    Ok(QueryResult {
        ranked,
        emd_evaluations: signatures.len(),
        member_evaluations: signatures.len(),
        clusters_visited: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub retrieved: usize,
    pub relevant: usize,
    pub precision: f64,
    /// Absent when the query is alone in its class.
    pub recall: Option<f64>,
}

/// Precision and recall of the first `cutoff` results after removing the
/// query itself.
pub fn precision_recall(
    result: &QueryResult,
    query: ImageId,
    query_label: &str,
    dataset: &LabeledDataset,
    cutoff: usize,
) -> Result<PrecisionRecall> {
    if cutoff == 0 {
        return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
    }
    let labels = dataset.labels();
    let top: Vec<ImageId> = result
        .ranked
        .iter()
        .map(|(id, _)| *id)
        .filter(|&id| id != query)
        .take(cutoff)
        .collect();
    let relevant = top.iter().filter(|id| labels.get(id) == Some(&query_label)).count();
    let precision = if top.is_empty() { 0.0 } else { relevant as f64 / top.len() as f64 };
    let others = dataset.class_size(query_label).saturating_sub(1);
    let recall = (others > 0).then(|| relevant as f64 / others as f64);
    Ok(PrecisionRecall { retrieved: top.len(), relevant, precision, recall })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalParams {
    pub cutoffs: Vec<usize>,
    pub sample: usize,
    pub seed: u64,
}

impl EvalParams {
    /// Cutoffs and seed from `config`, sample capped at the dataset size.
    pub fn from_config(config: &Config, dataset_size: usize) -> EvalParams {
        EvalParams { cutoffs: config.cutoffs.clone(), sample: config.sample.min(dataset_size), seed: config.seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub id: ImageId,
    pub label: String,
    /// One entry per cutoff.
    pub graph: Vec<PrecisionRecall>,
    pub ssf: Vec<PrecisionRecall>,
    pub graph_result: QueryResult,
    pub ssf_result: QueryResult,
    pub graph_seconds: f64,
    pub ssf_seconds: f64,
}

/// Build cost after the first `size` insertions.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthPoint {
    pub size: usize,
    pub emd_evaluations: u64,
    pub clusters: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub cutoffs: Vec<usize>,
    pub database_size: usize,
    pub clusters: usize,
    pub edges: usize,
    pub build_emd_evaluations: u64,
    pub build_wall_time: f64,
    pub growth: Vec<GrowthPoint>,
    pub queries: Vec<QueryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanScores {
    pub queries: usize,
    pub graph_precision: f64,
    pub graph_recall: Option<f64>,
    pub ssf_precision: f64,
    pub ssf_recall: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |v| v.to_string())
}

impl EvalReport {
    fn scores<'a>(records: impl Iterator<Item = &'a QueryRecord> + Clone, c: usize) -> MeanScores {
        MeanScores {
            queries: records.clone().count(),
            graph_precision: mean(records.clone().map(|r| r.graph[c].precision)).unwrap_or(0.0),
            graph_recall: mean(records.clone().filter_map(|r| r.graph[c].recall)),
            ssf_precision: mean(records.clone().map(|r| r.ssf[c].precision)).unwrap_or(0.0),
            ssf_recall: mean(records.filter_map(|r| r.ssf[c].recall)),
        }
    }

    /// Means over all queries for the cutoff at position `c`.
    pub fn overall(&self, c: usize) -> MeanScores {
        EvalReport::scores(self.queries.iter(), c)
    }

    pub fn per_class(&self, c: usize) -> BTreeMap<String, MeanScores> {
        let labels: std::collections::BTreeSet<&str> = self.queries.iter().map(|q| q.label.as_str()).collect();
        labels
            .into_iter()
            .map(|l| (l.to_string(), EvalReport::scores(self.queries.iter().filter(|q| q.label == l), c)))
            .collect()
    }

    pub fn mean_graph_evaluations(&self) -> f64 {
        mean(self.queries.iter().map(|q| q.graph_result.emd_evaluations as f64)).unwrap_or(0.0)
    }

    pub fn mean_graph_member_evaluations(&self) -> f64 {
        mean(self.queries.iter().map(|q| q.graph_result.member_evaluations as f64)).unwrap_or(0.0)
    }

    pub fn mean_ssf_evaluations(&self) -> f64 {
        mean(self.queries.iter().map(|q| q.ssf_result.emd_evaluations as f64)).unwrap_or(0.0)
    }

    /// Graph-search distance evaluations over sequential-scan evaluations.
    pub fn evaluation_ratio(&self) -> f64 {
        self.mean_graph_evaluations() / self.mean_ssf_evaluations()
    }

    /// Summary report. Contains no wall-clock times, so identical inputs give
    /// identical bytes.
    pub fn to_text(&self, config: &Config) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rbir-eval 1");
        for line in config.to_text().lines() {
            let _ = writeln!(out, "config {line}");
        }
        let _ = writeln!(out, "database_size {}", self.database_size);
        let _ = writeln!(out, "queries {}", self.queries.len());
        let _ = writeln!(out, "clusters {}", self.clusters);
        let _ = writeln!(out, "edges {}", self.edges);
        let _ = writeln!(out, "build_emd_evaluations {}", self.build_emd_evaluations);
        let _ = writeln!(out, "mean_graph_emd_evaluations {}", self.mean_graph_evaluations());
        let _ = writeln!(out, "mean_graph_member_evaluations {}", self.mean_graph_member_evaluations());
        let _ = writeln!(out, "mean_ssf_emd_evaluations {}", self.mean_ssf_evaluations());
        let _ = writeln!(out, "evaluation_ratio {}", self.evaluation_ratio());
        for (c, cutoff) in self.cutoffs.iter().enumerate() {
            let s = self.overall(c);
            let _ = writeln!(
                out,
                "overall cutoff {cutoff} queries {} graph_precision {} graph_recall {} ssf_precision {} ssf_recall {}",
                s.queries,
                s.graph_precision,
                fmt_opt(s.graph_recall),
                s.ssf_precision,
                fmt_opt(s.ssf_recall)
            );
            for (label, s) in self.per_class(c) {
                let _ = writeln!(
                    out,
                    "class {label} cutoff {cutoff} queries {} graph_precision {} graph_recall {} ssf_precision {} ssf_recall {}",
                    s.queries,
                    s.graph_precision,
                    fmt_opt(s.graph_recall),
                    s.ssf_precision,
                    fmt_opt(s.ssf_recall)
                );
            }
        }
        out
    }

    /// One row per query: counts and precision/recall per cutoff.
    pub fn queries_tsv(&self) -> String {
        let mut out = String::from("id\tlabel\tgraph_emd\tgraph_members\tssf_emd\tclusters_visited");
        for c in &self.cutoffs {
            let _ = write!(out, "\tgraph_p@{c}\tgraph_r@{c}\tssf_p@{c}\tssf_r@{c}");
        }
        out.push('\n');
        for q in &self.queries {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                q.id,
                q.label,
                q.graph_result.emd_evaluations,
                q.graph_result.member_evaluations,
                q.ssf_result.emd_evaluations,
                q.graph_result.clusters_visited
            );
            for (g, s) in q.graph.iter().zip(&q.ssf) {
                let _ = write!(out, "\t{}\t{}\t{}\t{}", g.precision, fmt_opt(g.recall), s.precision, fmt_opt(s.recall));
            }
            out.push('\n');
        }
        out
    }

    /// Build distance evaluations and cluster count against database size.
    pub fn growth_tsv(&self) -> String {
        let mut out = String::from("database_size\tbuild_emd_evaluations\tclusters\n");
        for g in &self.growth {
            let _ = writeln!(out, "{}\t{}\t{}", g.size, g.emd_evaluations, g.clusters);
        }
        out
    }

    /// Wall-clock measurements, kept apart from the deterministic outputs.
    pub fn timings_tsv(&self) -> String {
        let mut out = String::from("kind\tkey\tseconds\n");
        for g in &self.growth {
            let _ = writeln!(out, "build\t{}\t{}", g.size, g.seconds);
        }
        for q in &self.queries {
            let _ = writeln!(out, "graph_query\t{}\t{}", q.id, q.graph_seconds);
            let _ = writeln!(out, "ssf_query\t{}\t{}", q.id, q.ssf_seconds);
        }
        out
    }
}

/// Sizes at which the growth table is sampled: ten evenly spaced
/// checkpoints ending at `n`.
pub fn checkpoints(n: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (1..=10).map(|i| (n * i).div_ceil(10)).filter(|&s| s > 0).collect();
    sizes.dedup();
    sizes
}

/// Re-inserts the graph's signatures in their original order, recording the
/// cumulative build cost at each checkpoint.
pub fn growth_table(graph: &SignatureGraph, metric: &dyn SignatureMetric) -> Result<Vec<GrowthPoint>> {
    let marks = checkpoints(graph.len());
    let mut rebuilt = SignatureGraph::new(graph.theta(), graph.k_edge())?;
    let mut points = Vec::with_capacity(marks.len());
    let start = Instant::now();
    let mut next = marks.iter().peekable();
    for (i, sig) in graph.signatures().iter().enumerate() {
        rebuilt.assign_image(sig.clone(), metric)?;
        if next.peek() == Some(&&(i + 1)) {
            next.next();
            points.push(GrowthPoint {
                size: i + 1,
                emd_evaluations: rebuilt.build_evaluations(),
                clusters: rebuilt.clusters().len(),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(points)
}

/// Leave-one-in evaluation: a seeded sample of indexed images is queried
/// through the graph and through a sequential scan.
pub fn run_evaluation(
    dataset: &LabeledDataset,
    graph: &SignatureGraph,
    metric: &dyn SignatureMetric,
    params: &EvalParams,
) -> Result<EvalReport> {
    if params.cutoffs.is_empty() || params.cutoffs.contains(&0) {
        return Err(Error::InvalidParameter("cutoffs must be positive".into()));
    }
    let graph_ids: HashSet<ImageId> = graph.signatures().iter().map(|s| s.id()).collect();
    let data_ids: HashSet<ImageId> = dataset.entries.iter().map(|e| e.id).collect();
    if graph_ids != data_ids {
        return Err(Error::Dataset("dataset and index contain different images".into()));
    }
    if params.sample > dataset.len() {
        return Err(Error::InvalidParameter(format!(
            "sample of {} is larger than the dataset ({})",
            params.sample,
            dataset.len()
        )));
    }

    let mut order: Vec<&crate::eval::DatasetEntry> = dataset.entries.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    order.truncate(params.sample);

    let limit = params.cutoffs.iter().max().copied().unwrap_or(1) + 1;
    let queries = order
        .par_iter()
        .map(|entry| {
            let sig = graph.signature(entry.id).expect("ids were checked");
            let t = Instant::now();
            let graph_result = graph.query(sig, limit, metric)?;
            let graph_seconds = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let ssf_result = ssf_scan(graph.signatures(), sig, limit, metric)?;
            let ssf_seconds = t.elapsed().as_secs_f64();
            let pr = |r: &QueryResult| {
                params
                    .cutoffs
                    .iter()
                    .map(|&c| precision_recall(r, entry.id, &entry.label, dataset, c))
                    .collect::<Result<Vec<_>>>()
            };
            Ok(QueryRecord {
                id: entry.id,
                label: entry.label.clone(),
                graph: pr(&graph_result)?,
                ssf: pr(&ssf_result)?,
                graph_result,
                ssf_result,
                graph_seconds,
                ssf_seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let growth = growth_table(graph, metric)?;
    Ok(EvalReport {
        cutoffs: params.cutoffs.clone(),
        database_size: graph.len(),
        clusters: graph.clusters().len(),
        edges: graph.edges().len(),
        build_emd_evaluations: graph.build_evaluations(),
        build_wall_time: growth.last().map_or(0.0, |g| g.seconds),
        growth,
        queries,
    })
}
