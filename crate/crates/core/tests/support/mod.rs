#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbir::features::synthetic_square;
use rbir::imaging::RasterImage;
use rbir::sgraph::{SignatureGraph, SignatureMetric};
use rbir::signatures::{default_palette, ImageId, ImageSignature, RegionHistogram};

/// Minimum transport cost by enumerating every spanning tree of the
/// balanced bipartite problem and keeping the cheapest feasible one.
pub fn oracle_cost(supplies: &[f64], demands: &[f64], costs: &[Vec<f64>]) -> f64 {
    let (s, d): (f64, f64) = (supplies.iter().sum(), demands.iter().sum());
    let mut sup = supplies.to_vec();
    let mut dem = demands.to_vec();
    let mut c: Vec<Vec<f64>> = costs.to_vec();
    if s > d {
        dem.push(s - d);
        for row in &mut c {
            row.push(0.0);
        }
    } else if d > s {
        sup.push(d - s);
        c.push(vec![0.0; dem.len()]);
    }
    let (m, n) = (sup.len(), dem.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::new();
    enumerate_trees(&cells, 0, m + n - 1, &mut chosen, &mut (0..m + n).collect(), &mut |tree| {
        if let Some(cost) = tree_cost(tree, &sup, &dem, &c) {
            best = best.min(cost);
        }
    });
    best
}

fn find(parent: &[usize], mut x: usize) -> usize {
    while parent[x] != x {
        x = parent[x];
    }
    x
}

fn enumerate_trees(
    cells: &[(usize, usize)],
    start: usize,
    need: usize,
    chosen: &mut Vec<(usize, usize)>,
    parent: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[(usize, usize)]),
) {
    if chosen.len() == need {
        visit(chosen);
        return;
    }
    let rows = parent.len() - cells.iter().map(|c| c.1).max().unwrap() - 1;
    for k in start..cells.len() {
        if cells.len() - k < need - chosen.len() {
            break;
        }
        let (i, j) = cells[k];
        let (a, b) = (find(parent, i), find(parent, rows + j));
        if a == b {
            continue;
        }
        let saved = parent.clone();
        parent[a] = b;
        chosen.push(cells[k]);
        enumerate_trees(cells, k + 1, need, chosen, parent, visit);
        chosen.pop();
        *parent = saved;
    }
}

/// Flows on a spanning tree are forced; peel leaves until none remain.
fn tree_cost(tree: &[(usize, usize)], sup: &[f64], dem: &[f64], c: &[Vec<f64>]) -> Option<f64> {
    let m = sup.len();
    let mut left: Vec<f64> = sup.iter().chain(dem).copied().collect();
    let mut alive = vec![true; tree.len()];
    let mut cost = 0.0;
    for _ in 0..tree.len() {
        let mut degree = vec![0usize; left.len()];
        for (k, &(i, j)) in tree.iter().enumerate() {
            if alive[k] {
                degree[i] += 1;
                degree[m + j] += 1;
            }
        }
        let k = (0..tree.len()).find(|&k| {
            let (i, j) = tree[k];
            alive[k] && (degree[i] == 1 || degree[m + j] == 1)
        })?;
        let (i, j) = tree[k];
        let leaf = if degree[i] == 1 { i } else { m + j };
        let other = if leaf == i { m + j } else { i };
        let f = left[leaf];
        if f < -1e-12 {
            return None;
        }
        left[leaf] = 0.0;
        left[other] -= f;
        cost += f * c[i][j];
        alive[k] = false;
    }
    Some(cost)
}

/// Random instance with weights and costs on a grid of `1/den`.
pub fn rational_instance(rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let den = [1.0, 2.0, 3.0, 4.0, 6.0, 8.0][rng.gen_range(0..6)];
    let (m, n) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    let side = |len: usize, rng: &mut ChaCha8Rng| {
        let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(0..=12) as f64 / den).collect();
        if v.iter().all(|&x| x == 0.0) {
            v[rng.gen_range(0..len)] = 1.0;
        }
        v
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    let s = side(m, &mut local);
    let d = side(n, &mut local);
    let c = (0..m)
        .map(|_| (0..n).map(|_| local.gen_range(0..=20) as f64 / den).collect())
        .collect();
    (s, d, c)
}

pub fn random_histogram(rng: &mut impl Rng, n: usize) -> RegionHistogram {
    let counts: Vec<u64> = (0..n)
        .map(|_| if rng.gen_bool(0.3) { rng.gen_range(1..50) } else { 0 })
        .collect();
    let counts = if counts.iter().all(|&c| c == 0) {
        let mut c = counts;
        c[0] = 1;
        c
    } else {
        counts
    };
    RegionHistogram::from_counts(&counts).unwrap()
}

pub fn random_signature(rng: &mut impl Rng, id: u32) -> ImageSignature {
    let regions = rng.gen_range(1..=5);
    let hs: Vec<RegionHistogram> = (0..regions).map(|_| random_histogram(rng, 32)).collect();
    ImageSignature::from_histograms(ImageId(id), &hs, 10).unwrap()
}

pub fn random_signatures(seed: u64, count: u32) -> Vec<ImageSignature> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| random_signature(&mut rng, i)).collect()
}

/// Signatures concentrated on one palette colour per group, with a little
/// mass spilled onto the colour's lattice neighbour.
pub fn grouped_signatures(groups: &[usize], per_group: u32, seed: u64) -> Vec<ImageSignature> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (g, &color) in groups.iter().enumerate() {
        for k in 0..per_group {
            let id = g as u32 * per_group + k;
            let hs: Vec<RegionHistogram> = (0..rng.gen_range(1..=4))
                .map(|_| {
                    let mut counts = vec![0u64; 32];
                    counts[color] = rng.gen_range(80..100);
                    counts[color ^ 1] = rng.gen_range(0..20);
                    RegionHistogram::from_counts(&counts).unwrap()
                })
                .collect();
            out.push(ImageSignature::from_histograms(ImageId(id), &hs, 10).unwrap());
        }
    }
    out
}

/// Distances looked up by image id pair; used to replay hand traces.
pub struct TableMetric(pub HashMap<(u32, u32), f64>);

impl TableMetric {
    pub fn new(pairs: &[(u32, u32, f64)]) -> TableMetric {
        let mut t = HashMap::new();
        for &(a, b, d) in pairs {
            t.insert((a, b), d);
            t.insert((b, a), d);
        }
        TableMetric(t)
    }
}

impl SignatureMetric for TableMetric {
    fn distance(&self, a: &ImageSignature, b: &ImageSignature) -> rbir::Result<f64> {
        if a.id() == b.id() {
            return Ok(0.0);
        }
        Ok(self.0[&(a.id().0, b.id().0)])
    }
}

/// Placeholder signature used with [`TableMetric`].
pub fn dummy(id: u32) -> ImageSignature {
    let h = RegionHistogram::from_counts(&[1, 0]).unwrap();
    ImageSignature::from_histograms(ImageId(id), &[h], 4).unwrap()
}

/// The two-step search rule recomputed from scratch: the nearest center by
/// direct distance (lowest index on ties), then every cluster whose center
/// is within `k_edge theta` of that center by direct distance.
pub fn brute_force_candidates(
    graph: &SignatureGraph,
    query: &ImageSignature,
    metric: &dyn SignatureMetric,
) -> BTreeSet<ImageId> {
    let centers: Vec<&ImageSignature> = (0..graph.clusters().len()).map(|c| graph.center_signature(c)).collect();
    let d: Vec<f64> = centers.iter().map(|c| metric.distance(query, c).unwrap()).collect();
    let nearest = (0..d.len()).fold(0, |b, i| if d[i] < d[b] { i } else { b });
    let limit = graph.k_edge() as f64 * graph.theta();
    (0..centers.len())
        .filter(|&c| c == nearest || metric.distance(centers[nearest], centers[c]).unwrap() <= limit)
        .flat_map(|c| graph.clusters()[c].members.iter().map(|m| m.id))
        .collect()
}

/// Distinct lattice colours per class: background, two accent colours.
pub fn class_theme(class: usize) -> [[f64; 3]; 3] {
    let palette = default_palette();
    let order: Vec<usize> = (0..32).map(|i| (i * 13 + 5) % 32).collect();
    let pick = |k: usize| palette.colors()[order[3 * class + k]];
    [pick(0), pick(1), pick(2)]
}

/// A background in the class's first colour with randomly placed accent
/// rectangles in the other two, plus mild per-pixel jitter.
pub fn themed_image(class: usize, size: usize, rng: &mut impl Rng) -> RasterImage {
    let theme = class_theme(class);
    let rects: Vec<(usize, usize, usize, usize, usize)> = (0..rng.gen_range(3..6))
        .map(|_| {
            let w = rng.gen_range(size / 6..size / 2);
            let h = rng.gen_range(size / 6..size / 2);
            (rng.gen_range(0..size - w), rng.gen_range(0..size - h), w, h, rng.gen_range(1..3))
        })
        .collect();
    let jitter: Vec<f64> = (0..size * size * 3).map(|_| rng.gen_range(-0.05..0.05)).collect();
    RasterImage::from_fn(size, size, |x, y| {
        let color = rects
            .iter()
            .rev()
            .find(|&&(rx, ry, w, h, _)| (rx..rx + w).contains(&x) && (ry..ry + h).contains(&y))
            .map_or(0, |r| r.4);
        let base = theme[color];
        let k = (y * size + x) * 3;
        [0, 1, 2].map(|c| (base[c] + jitter[k + c]).clamp(0.0, 1.0))
    })
    .unwrap()
}

/// Writes `classes` x `per_class` themed PPM images below `root`.
pub fn write_themed_dataset(root: &Path, classes: usize, per_class: usize, size: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in 0..classes {
        let dir = root.join(format!("class{class:02}"));
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            let img = themed_image(class, size, &mut rng);
            std::fs::write(dir.join(format!("img{i:03}.ppm")), img.to_ppm()).unwrap();
        }
    }
}

/// Square fixture shifted by whole pixels.
pub fn square_at(size: usize, x0: usize, y0: usize, side: usize) -> RasterImage {
    synthetic_square(size, x0, y0, side)
}
