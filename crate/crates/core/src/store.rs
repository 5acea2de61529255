//! Index persistence.
//!
//! The index is a line-oriented text file with a fixed key order, closed by a
//! SHA-256 checksum over every preceding byte:
//!
//! ```text
//! rbir-index 1
//! config size = 256
//! ...
//! dataset /data/corel
//! theta 0.0412
//! k_edge 2
//! build_evaluations 1234
//! palette 32
//! color 0.125 0.125 0.25
//! ...
//! images 2
//! image <id> <regions> <signature hex> <label> <relative path>
//! ...
//! clusters 1
//! cluster <center id> <k> <member count>
//! member <id> <stored distance> <clamped 0|1>
//! ...
//! edges 0
//! checksum sha256 <hex>
//! ```
//!
//! Reals are written in shortest round-trip form, so loading reproduces them
//! bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::sgraph::{Cluster, Edge, Member, SignatureGraph};
use crate::signatures::{ColorPalette, ImageId, ImageSignature};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "rbir-index";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub id: ImageId,
    pub label: String,
    /// Path relative to the catalog root, `/`-separated.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    pub root: String,
    pub entries: Vec<CatalogEntry>,
}

impl Catalog {
    pub fn entry(&self, id: ImageId) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn full_path(&self, entry: &CatalogEntry) -> std::path::PathBuf {
        Path::new(&self.root).join(&entry.path)
    }
}

/// Everything needed to answer queries without the original images.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub config: Config,
    pub palette: ColorPalette,
    pub graph: SignatureGraph,
    pub catalog: Catalog,
}

fn check_token(field: &str, value: &str) -> Result<()> {
    if value.is_empty() || value.chars().any(|c| c.is_whitespace()) {
        return Err(Error::Integrity(format!("{field} {value:?} must be a single non-empty token")));
    }
    Ok(())
}

fn check_line(field: &str, value: &str) -> Result<()> {
    if value.is_empty() || value.contains(['\n', '\r']) {
        return Err(Error::Integrity(format!("{field} {value:?} must be a non-empty single line")));
    }
    Ok(())
}

fn validate(index: &Index) -> Result<()> {
    let graph = &index.graph;
    graph.check_invariants(None)?;
    if graph.len() != index.catalog.entries.len() {
        return Err(Error::Integrity(format!(
            "{} signatures but {} catalog entries",
            graph.len(),
            index.catalog.entries.len()
        )));
    }
    for (sig, entry) in graph.signatures().iter().zip(&index.catalog.entries) {
        if sig.id() != entry.id {
            return Err(Error::Integrity(format!(
                "catalog entry {} does not match signature {}",
                entry.id,
                sig.id()
            )));
        }
        if sig.palette_size() != index.palette.len() || sig.block_width() != index.config.block_width {
            return Err(Error::Integrity(format!("signature {} does not match the palette or block width", sig.id())));
        }
        check_token("label", &entry.label)?;
        check_line("path", &entry.path)?;
    }
    check_line("dataset root", &index.catalog.root)?;
    Ok(())
}

fn digest(body: &str) -> String {
    let hash = Sha256::digest(body.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Renders the index file. Fails without writing anything if the index
/// breaks an invariant.
pub fn render_index(index: &Index) -> Result<String> {
    validate(index)?;
    let graph = &index.graph;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    for line in index.config.to_text().lines() {
        let _ = writeln!(out, "config {line}");
    }
    let _ = writeln!(out, "dataset {}", index.catalog.root);
    let _ = writeln!(out, "theta {}", graph.theta());
    let _ = writeln!(out, "k_edge {}", graph.k_edge());
    let _ = writeln!(out, "build_evaluations {}", graph.build_evaluations());
    let _ = writeln!(out, "palette {}", index.palette.len());
    for [r, g, b] in index.palette.colors() {
        let _ = writeln!(out, "color {r} {g} {b}");
    }
    let _ = writeln!(out, "images {}", graph.len());
    for (sig, entry) in graph.signatures().iter().zip(&index.catalog.entries) {
        let _ = writeln!(out, "image {} {} {} {} {}", sig.id(), sig.regions(), sig.to_hex(), entry.label, entry.path);
    }
    let _ = writeln!(out, "clusters {}", graph.clusters().len());
    for c in graph.clusters() {
        let _ = writeln!(out, "cluster {} {} {}", c.center, c.k, c.members.len());
        for m in &c.members {
            let _ = writeln!(out, "member {} {} {}", m.id, m.stored_distance, m.clamped as u8);
        }
    }
    let _ = writeln!(out, "edges {}", graph.edges().len());
    for e in graph.edges() {
        let _ = writeln!(out, "edge {} {} {}", e.a, e.b, e.weight);
    }
    let checksum = digest(&out);
    let _ = writeln!(out, "checksum sha256 {checksum}");
    Ok(out)
}

pub fn save_index(index: &Index, path: impl AsRef<Path>) -> Result<()> {
    let text = render_index(index)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<Index> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Corrupt("index is not valid UTF-8".into()))?;
    parse_index(&text)
}

/// Line cursor with typed accessors.
struct Lines<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, expect: &str) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Corrupt(format!("file ends where {expect:?} was expected (truncated?)")))
    }

    /// The remainder of a line starting with `tag `.
    fn tagged(&mut self, tag: &str) -> Result<(usize, &'a str)> {
        let (no, line) = self.next_line(tag)?;
        match line.strip_prefix(tag).and_then(|r| r.strip_prefix(' ')) {
            Some(rest) => Ok((no, rest)),
            None => Err(Error::Corrupt(format!("line {no}: expected {tag:?}, found {line:?}"))),
        }
    }

    fn count(&mut self, tag: &str) -> Result<usize> {
        let (no, rest) = self.tagged(tag)?;
        num(no, rest)
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Corrupt(format!("line {line}: {s:?} is not a valid number")))
}

fn fields<const N: usize>(line: usize, rest: &str) -> Result<[&str; N]> {
    let parts: Vec<&str> = rest.splitn(N, ' ').collect();
    parts
        .try_into()
        .map_err(|_| Error::Corrupt(format!("line {line}: expected {N} fields")))
}

pub fn parse_index(text: &str) -> Result<Index> {
    let first = text.lines().next().unwrap_or("");
    let Some(version) = first.strip_prefix(MAGIC).map(str::trim) else {
        return Err(Error::Corrupt("missing index header".into()));
    };
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::Version { found: version.to_string(), expected: FORMAT_VERSION });
    }

    let mut lines = Lines { lines: text.lines().enumerate().peekable() };
    lines.next_line(MAGIC)?;

    let mut config_text = String::new();
    while let Some((_, l)) = lines.lines.peek() {
        let Some(rest) = l.strip_prefix("config ") else { break };
        config_text.push_str(rest);
        config_text.push('\n');
        lines.lines.next();
    }
    let config = Config::parse(&config_text).map_err(|e| Error::Corrupt(format!("embedded config: {e}")))?;

    let (_, root) = lines.tagged("dataset")?;
    let (no, theta) = lines.tagged("theta")?;
    let theta: f64 = num(no, theta)?;
    let (no, k_edge) = lines.tagged("k_edge")?;
    let k_edge: u32 = num(no, k_edge)?;
    let (no, evals) = lines.tagged("build_evaluations")?;
    let build_evaluations: u64 = num(no, evals)?;

    let n_colors = lines.count("palette")?;
    let mut colors = Vec::with_capacity(n_colors);
    for _ in 0..n_colors {
        let (no, rest) = lines.tagged("color")?;
        let [r, g, b] = fields::<3>(no, rest)?;
        colors.push([num(no, r)?, num(no, g)?, num(no, b)?]);
    }
    let palette = ColorPalette::new(colors).map_err(|e| Error::Corrupt(e.to_string()))?;

    let n_images = lines.count("images")?;
    let mut signatures = Vec::with_capacity(n_images);
    let mut entries = Vec::with_capacity(n_images);
    for _ in 0..n_images {
        let (no, rest) = lines.tagged("image")?;
        let [id, regions, hex, label, path] = fields::<5>(no, rest)?;
        let id = ImageId(num(no, id)?);
        let regions: usize = num(no, regions)?;
        signatures.push(ImageSignature::from_hex(id, regions, palette.len(), config.block_width, hex)?);
        entries.push(CatalogEntry { id, label: label.to_string(), path: path.to_string() });
    }

    let n_clusters = lines.count("clusters")?;
    let mut clusters = Vec::with_capacity(n_clusters);
    for _ in 0..n_clusters {
        let (no, rest) = lines.tagged("cluster")?;
        let [center, k, count] = fields::<3>(no, rest)?;
        let count: usize = num(no, count)?;
        let mut members = Vec::with_capacity(count);
        for _ in 0..count {
            let (no, rest) = lines.tagged("member")?;
            let [id, dist, clamped] = fields::<3>(no, rest)?;
            let clamped = match clamped {
                "0" => false,
                "1" => true,
                _ => return Err(Error::Corrupt(format!("line {no}: clamped flag must be 0 or 1"))),
            };
            members.push(Member { id: ImageId(num(no, id)?), stored_distance: num(no, dist)?, clamped });
        }
        clusters.push(Cluster { center: ImageId(num(no, center)?), k: num(no, k)?, members });
    }

    let n_edges = lines.count("edges")?;
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (no, rest) = lines.tagged("edge")?;
        let [a, b, w] = fields::<3>(no, rest)?;
        edges.push(Edge { a: num(no, a)?, b: num(no, b)?, weight: num(no, w)? });
    }

    let (no, checksum_line) = lines.tagged("checksum")?;
    let Some(stored) = checksum_line.strip_prefix("sha256 ") else {
        return Err(Error::Corrupt(format!("line {no}: unknown checksum kind")));
    };
    if lines.lines.next().is_some() {
        return Err(Error::Corrupt("content after the checksum line".into()));
    }

    // integrity errors are reported ahead of the checksum
    let graph = SignatureGraph::from_parts(theta, k_edge, signatures, clusters, edges, build_evaluations)?;
    let index = Index { config, palette, graph, catalog: Catalog { root: root.to_string(), entries } };
    validate(&index)?;

    let body_end = text.rfind("checksum sha256 ").expect("checksum line was parsed");
    let computed = digest(&text[..body_end]);
    if computed != stored {
        return Err(Error::Checksum { stored: stored.to_string(), computed });
    }
    Ok(index)
}
