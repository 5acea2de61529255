//! Clustered signature graph.
//!
//! Signatures are grouped into disjoint clusters. Each cluster has a fixed
//! center and a radius `k * theta` for some positive integer `k`. Cluster
//! centers within `k_edge * theta` of each other are joined by weighted
//! edges. A query is compared with every center, and only the members of the
//! nearest center's cluster and its graph neighbours are ranked.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::emd::EmdMetric;
use crate::error::{Error, Result};
use crate::signatures::{ImageId, ImageSignature};

/// Distance between two signatures. Implemented by [`EmdMetric`]; tests
/// substitute table-driven metrics to trace the distribution rules by hand.
pub trait SignatureMetric: Sync {
    fn distance(&self, a: &ImageSignature, b: &ImageSignature) -> Result<f64>;
}

impl SignatureMetric for EmdMetric {
    fn distance(&self, a: &ImageSignature, b: &ImageSignature) -> Result<f64> {
        EmdMetric::distance(self, a, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub id: ImageId,
    /// Distance to the cluster center as recorded at insertion time.
    pub stored_distance: f64,
    /// Set when the true distance exceeded the radius and was overwritten
    /// with the radius.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub center: ImageId,
    pub k: u32,
    pub members: Vec<Member>,
}

impl Cluster {
    pub fn radius(&self, theta: f64) -> f64 {
        self.k as f64 * theta
    }
}

/// Undirected edge between clusters `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Where [`SignatureGraph::assign_image`] put a signature.
#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    /// First signature of the graph; becomes the center of cluster 0.
    Seeded { cluster: usize },
    /// Within the radius of the best cluster.
    Joined { cluster: usize, distance: f64 },
    /// Far enough away to found a new cluster of radius `k * theta`.
    NewCluster { cluster: usize, k: u32, edges: usize },
    /// Outside the radius but by less than one `theta`; joined anyway with
    /// its distance recorded as the radius.
    ForceJoined { cluster: usize, distance: f64, stored: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureGraph {
    theta: f64,
    k_edge: u32,
    signatures: Vec<ImageSignature>,
    positions: HashMap<ImageId, usize>,
    clusters: Vec<Cluster>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
    build_evaluations: u64,
}

/// Clusters selected for a query, and their members.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    pub ids: Vec<ImageId>,
    pub clusters: Vec<usize>,
    pub nearest_cluster: usize,
    pub nearest_distance: f64,
    pub center_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// Ascending by distance, ties by image id.
    pub ranked: Vec<(ImageId, f64)>,
    /// Center scans plus member evaluations.
    pub emd_evaluations: usize,
    pub member_evaluations: usize,
    pub clusters_visited: usize,
}

impl SignatureGraph {
    pub fn new(theta: f64, k_edge: u32) -> Result<SignatureGraph> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter("theta must be positive".into()));
        }
        if k_edge == 0 {
            return Err(Error::InvalidParameter("k_edge must be at least 1".into()));
        }
        Ok(SignatureGraph {
            theta,
            k_edge,
            signatures: Vec::new(),
            positions: HashMap::new(),
            clusters: Vec::new(),
            edges: Vec::new(),
            adjacency: Vec::new(),
            build_evaluations: 0,
        })
    }

    /// Reassembles a graph from stored parts, checking every structural
    /// invariant. No distances are computed.
    pub fn from_parts(
        theta: f64,
        k_edge: u32,
        signatures: Vec<ImageSignature>,
        clusters: Vec<Cluster>,
        edges: Vec<Edge>,
        build_evaluations: u64,
    ) -> Result<SignatureGraph> {
        let mut graph = SignatureGraph::new(theta, k_edge)?;
        for sig in signatures {
            if graph.positions.insert(sig.id(), graph.signatures.len()).is_some() {
                return Err(Error::Integrity(format!("image {} is listed twice", sig.id())));
            }
            graph.signatures.push(sig);
        }
        graph.adjacency = vec![Vec::new(); clusters.len()];
        graph.clusters = clusters;
        for e in &edges {
            if e.a >= e.b || e.b >= graph.clusters.len() {
                return Err(Error::Integrity(format!("edge ({}, {}) is malformed", e.a, e.b)));
            }
            graph.adjacency[e.a].push(e.b);
            graph.adjacency[e.b].push(e.a);
        }
        graph.edges = edges;
        graph.build_evaluations = build_evaluations;
        graph.check_structure()?;
        Ok(graph)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn k_edge(&self) -> u32 {
        self.k_edge
    }

    /// Distance threshold for edges and for the second search step.
    pub fn edge_threshold(&self) -> f64 {
        self.k_edge as f64 * self.theta
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Signatures in insertion order.
    pub fn signatures(&self) -> &[ImageSignature] {
        &self.signatures
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    pub fn signature(&self, id: ImageId) -> Option<&ImageSignature> {
        self.positions.get(&id).map(|&p| &self.signatures[p])
    }

    pub fn center_signature(&self, cluster: usize) -> &ImageSignature {
        let id = self.clusters[cluster].center;
        &self.signatures[self.positions[&id]]
    }

    /// Clusters joined to `cluster` by an edge.
    pub fn neighbours(&self, cluster: usize) -> &[usize] {
        &self.adjacency[cluster]
    }

    /// Distances computed while building.
    pub fn build_evaluations(&self) -> u64 {
        self.build_evaluations
    }

    pub fn clamped_count(&self) -> usize {
        self.clusters.iter().flat_map(|c| &c.members).filter(|m| m.clamped).count()
    }

    fn center_distances(&self, sig: &ImageSignature, metric: &dyn SignatureMetric) -> Result<Vec<f64>> {
        (0..self.clusters.len())
            .into_par_iter()
            .map(|i| metric.distance(sig, self.center_signature(i)))
            .collect()
    }

    fn push_signature(&mut self, sig: ImageSignature) {
        self.positions.insert(sig.id(), self.signatures.len());
        self.signatures.push(sig);
    }

    fn push_cluster(&mut self, center: ImageId, k: u32) -> usize {
        self.clusters.push(Cluster {
            center,
            k,
            members: vec![Member { id: center, stored_distance: 0.0, clamped: false }],
        });
        self.adjacency.push(Vec::new());
        self.clusters.len() - 1
    }

    /// Places `sig` by the distribution rules. With `m` the cluster
    /// minimizing `phi - k_i theta`:
    ///
    /// 1. `phi <= k_m theta`: join cluster `m`.
    /// 2. otherwise `k0 = floor((phi - k_m theta) / theta)`:
    ///    * `k0 > 0`: new cluster centred on `sig` with radius `k0 theta`,
    ///      linked to every center within `k_edge theta`;
    ///    * `k0 = 0`: join cluster `m` with the distance recorded as `k_m theta`.
    ///
    /// The first signature of an empty graph seeds a cluster with `k = 1`.
    pub fn assign_image(&mut self, sig: ImageSignature, metric: &dyn SignatureMetric) -> Result<Assignment> {
        if self.positions.contains_key(&sig.id()) {
            return Err(Error::DuplicateImage(sig.id()));
        }
        if let Some(first) = self.signatures.first() {
            if !first.is_compatible(&sig) {
                return Err(Error::IncompatibleSignatures(format!(
                    "image {} does not match the indexed block layout",
                    sig.id()
                )));
            }
        }
        if self.clusters.is_empty() {
            let id = sig.id();
            self.push_signature(sig);
            let cluster = self.push_cluster(id, 1);
            return Ok(Assignment::Seeded { cluster });
        }

        let phis = self.center_distances(&sig, metric)?;
        self.build_evaluations += phis.len() as u64;

        let theta = self.theta;
        let mut best = 0;
        for i in 1..phis.len() {
            let slack = phis[i] - self.clusters[i].radius(theta);
            if slack < phis[best] - self.clusters[best].radius(theta) {
                best = i;
            }
        }
        let phi = phis[best];
        let radius = self.clusters[best].radius(theta);
        let id = sig.id();

        if phi <= radius {
            self.push_signature(sig);
            self.clusters[best].members.push(Member { id, stored_distance: phi, clamped: false });
            return Ok(Assignment::Joined { cluster: best, distance: phi });
        }

        let k0 = ((phi - radius) / theta).floor();
        if k0 >= 1.0 {
            let k = k0.min(u32::MAX as f64) as u32;
            self.push_signature(sig);
            let cluster = self.push_cluster(id, k);
            let threshold = self.edge_threshold();
            let mut added = 0;
            for (i, &d) in phis.iter().enumerate() {
                if d <= threshold {
                    self.edges.push(Edge { a: i, b: cluster, weight: d });
                    self.adjacency[i].push(cluster);
                    self.adjacency[cluster].push(i);
                    added += 1;
                }
            }
            Ok(Assignment::NewCluster { cluster, k, edges: added })
        } else {
            self.push_signature(sig);
            self.clusters[best].members.push(Member { id, stored_distance: radius, clamped: true });
            Ok(Assignment::ForceJoined { cluster: best, distance: phi, stored: radius })
        }
    }

    /// Nearest center by a full scan, then that cluster together with every
    /// cluster whose center lies within `k_edge theta` of it (read off the
    /// stored edges).
    pub fn search(&self, query: &ImageSignature, metric: &dyn SignatureMetric) -> Result<Candidates> {
        if self.clusters.is_empty() {
            return Err(Error::EmptyInput("the graph has no clusters"));
        }
        let phis = self.center_distances(query, metric)?;
        let mut nearest = 0;
        for (i, &d) in phis.iter().enumerate() {
            if d < phis[nearest] {
                nearest = i;
            }
        }
        let mut clusters = vec![nearest];
        clusters.extend_from_slice(&self.adjacency[nearest]);
        clusters.sort_unstable();
        let ids = clusters
            .iter()
            .flat_map(|&c| self.clusters[c].members.iter().map(|m| m.id))
            .collect();
        Ok(Candidates {
            ids,
            clusters,
            nearest_cluster: nearest,
            nearest_distance: phis[nearest],
            center_evaluations: phis.len(),
        })
    }

    /// Scores every candidate against `query` and keeps the `limit` closest.
    pub fn rank_results(
        &self,
        candidates: &Candidates,
        query: &ImageSignature,
        limit: usize,
        metric: &dyn SignatureMetric,
    ) -> Result<QueryResult> {
        let sigs = candidates
            .ids
            .iter()
            .map(|id| {
                self.signature(*id)
                    .ok_or_else(|| Error::Integrity(format!("candidate {id} is not indexed")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ranked = rank_signatures(&sigs, query, metric)?;
        ranked.truncate(limit);
        Ok(QueryResult {
            ranked,
            emd_evaluations: candidates.center_evaluations + sigs.len(),
            member_evaluations: sigs.len(),
            clusters_visited: candidates.clusters.len(),
        })
    }

    pub fn query(&self, query: &ImageSignature, limit: usize, metric: &dyn SignatureMetric) -> Result<QueryResult> {
        let candidates = self.search(query, metric)?;
        self.rank_results(&candidates, query, limit, metric)
    }

    fn check_structure(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Integrity(m));
        let mut seen = HashSet::new();
        for (ci, c) in self.clusters.iter().enumerate() {
            if c.k == 0 {
                return fail(format!("cluster {ci} has k = 0"));
            }
            let radius = c.radius(self.theta);
            match c.members.iter().find(|m| m.id == c.center) {
                Some(m) if m.stored_distance == 0.0 => {}
                _ => return fail(format!("center of cluster {ci} is not a member at distance 0")),
            }
            for m in &c.members {
                if !self.positions.contains_key(&m.id) {
                    return fail(format!("cluster {ci} references unknown image {}", m.id));
                }
                if !seen.insert(m.id) {
                    return fail(format!("image {} belongs to more than one cluster", m.id));
                }
                if !(m.stored_distance >= 0.0 && m.stored_distance <= radius) {
                    return fail(format!(
                        "image {} stored at {} outside radius {radius} of cluster {ci}",
                        m.id, m.stored_distance
                    ));
                }
            }
        }
        if seen.len() != self.signatures.len() {
            return fail(format!(
                "{} of {} images are not in any cluster",
                self.signatures.len() - seen.len(),
                self.signatures.len()
            ));
        }
        let mut pairs = HashSet::new();
        for e in &self.edges {
            if e.a >= e.b || e.b >= self.clusters.len() {
                return fail(format!("edge ({}, {}) is malformed", e.a, e.b));
            }
            if !pairs.insert((e.a, e.b)) {
                return fail(format!("edge ({}, {}) appears twice", e.a, e.b));
            }
            if !(e.weight >= 0.0 && e.weight <= self.edge_threshold()) {
                return fail(format!("edge ({}, {}) weight {} exceeds the threshold", e.a, e.b, e.weight));
            }
        }
        Ok(())
    }

    /// Checks partition, radius and edge-shape invariants; with a metric,
    /// also recomputes every center pair and requires the edge set and
    /// weights to match within `1e-9`.
    pub fn check_invariants(&self, metric: Option<&dyn SignatureMetric>) -> Result<()> {
        self.check_structure()?;
        let Some(metric) = metric else {
            return Ok(());
        };
        let stored: HashMap<(usize, usize), f64> = self.edges.iter().map(|e| ((e.a, e.b), e.weight)).collect();
        let n = self.clusters.len();
        for a in 0..n {
            for b in a + 1..n {
                let d = metric.distance(self.center_signature(a), self.center_signature(b))?;
                match (d <= self.edge_threshold(), stored.get(&(a, b))) {
                    (true, Some(w)) if (w - d).abs() <= 1e-9 => {}
                    (false, None) => {}
                    (_, w) => {
                        return Err(Error::Integrity(format!(
                            "centers {a} and {b} at distance {d} but stored edge is {w:?}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Distances from `query` to each of `sigs`, sorted ascending with ties
/// broken by image id.
pub fn rank_signatures(
    sigs: &[&ImageSignature],
    query: &ImageSignature,
    metric: &dyn SignatureMetric,
) -> Result<Vec<(ImageId, f64)>> {
    let mut ranked = sigs
        .par_iter()
        .map(|s| Ok((s.id(), metric.distance(query, s)?)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Inserts `signatures` in order, seeding the first cluster with `k = 1`.
pub fn build_graph(
    signatures: impl IntoIterator<Item = ImageSignature>,
    theta: f64,
    k_edge: u32,
    metric: &dyn SignatureMetric,
) -> Result<SignatureGraph> {
    let mut graph = SignatureGraph::new(theta, k_edge)?;
    for sig in signatures {
        graph.assign_image(sig, metric)?;
    }
    if graph.is_empty() {
        return Err(Error::EmptyInput("no signatures to index"));
    }
    Ok(graph)
}

/// A quarter of the median pairwise distance over an evenly spaced sample of
/// at most `sample` signatures. Falls back to 1 when every sampled distance
/// is zero or there is nothing to compare.
pub fn estimate_theta(
    signatures: &[ImageSignature],
    metric: &dyn SignatureMetric,
    sample: usize,
) -> Result<f64> {
    let n = signatures.len();
    let picked: Vec<&ImageSignature> = if n <= sample {
        signatures.iter().collect()
    } else {
        (0..sample).map(|i| &signatures[i * n / sample]).collect()
    };
    let pairs: Vec<(usize, usize)> =
        (0..picked.len()).flat_map(|i| (i + 1..picked.len()).map(move |j| (i, j))).collect();
    let mut dists = pairs
        .par_iter()
        .map(|&(i, j)| metric.distance(picked[i], picked[j]))
        .collect::<Result<Vec<f64>>>()?;
    if dists.is_empty() {
        return Ok(1.0);
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 { dists[mid] } else { (dists[mid - 1] + dists[mid]) / 2.0 };
    Ok(if median > 0.0 { median / 4.0 } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signatures::RegionHistogram;

    /// Distances from a lookup table keyed by unordered id pairs.
    struct TableMetric(HashMap<(u32, u32), f64>);

    impl TableMetric {
        fn new(entries: &[((u32, u32), f64)]) -> TableMetric {
            let mut map = HashMap::new();
            for &((a, b), d) in entries {
                map.insert((a.min(b), a.max(b)), d);
            }
            TableMetric(map)
        }
    }

    impl SignatureMetric for TableMetric {
        fn distance(&self, a: &ImageSignature, b: &ImageSignature) -> Result<f64> {
            let (x, y) = (a.id().0, b.id().0);
            if x == y {
                return Ok(0.0);
            }
            Ok(self.0[&(x.min(y), x.max(y))])
        }
    }

    fn sig(id: u32) -> ImageSignature {
        let h = RegionHistogram { values: vec![1.0, 0.0] };
        ImageSignature::from_histograms(ImageId(id), &[h], 4).unwrap()
    }

    #[test]
    fn case_one_joins_with_true_distance() {
        let metric = TableMetric::new(&[((0, 1), 7.0)]);
        let mut g = SignatureGraph::new(10.0, 2).unwrap();
        assert_eq!(g.assign_image(sig(0), &metric).unwrap(), Assignment::Seeded { cluster: 0 });
        assert_eq!(g.assign_image(sig(1), &metric).unwrap(), Assignment::Joined { cluster: 0, distance: 7.0 });
        assert_eq!(g.clusters()[0].members[1].stored_distance, 7.0);
    }

    #[test]
    fn case_two_one_founds_a_cluster() {
        let metric = TableMetric::new(&[((0, 1), 25.0)]);
        let mut g = SignatureGraph::new(10.0, 2).unwrap();
        g.assign_image(sig(0), &metric).unwrap();
        let a = g.assign_image(sig(1), &metric).unwrap();
        assert_eq!(a, Assignment::NewCluster { cluster: 1, k: 1, edges: 0 });
        assert_eq!(g.clusters()[1].radius(10.0), 10.0);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn case_two_two_force_joins_with_clamped_distance() {
        let metric = TableMetric::new(&[((0, 1), 15.0)]);
        let mut g = SignatureGraph::new(10.0, 2).unwrap();
        g.assign_image(sig(0), &metric).unwrap();
        let a = g.assign_image(sig(1), &metric).unwrap();
        assert_eq!(a, Assignment::ForceJoined { cluster: 0, distance: 15.0, stored: 10.0 });
        let m = &g.clusters()[0].members[1];
        assert_eq!(m.stored_distance, 10.0);
        assert!(m.clamped);
        assert_eq!(g.clamped_count(), 1);
    }

    #[test]
    fn edge_appears_iff_within_k_theta() {
        for (k_edge, expect_edge) in [(2, false), (3, true), (4, true)] {
            let metric = TableMetric::new(&[((0, 1), 30.0)]);
            let g = build_graph([sig(0), sig(1)], 10.0, k_edge, &metric).unwrap();
            assert_eq!(g.clusters().len(), 2);
            assert_eq!(g.clusters()[1].k, 2);
            assert_eq!(g.edges().len(), expect_edge as usize, "k_edge = {k_edge}");
            g.check_invariants(Some(&metric)).unwrap();
        }
    }

    #[test]
    fn build_seed_and_small_cases() {
        let metric = TableMetric::new(&[((0, 1), 4.0)]);
        let g = build_graph([sig(0)], 10.0, 2, &metric).unwrap();
        assert_eq!((g.clusters().len(), g.len(), g.edges().len()), (1, 1, 0));
        let g = build_graph([sig(0), sig(1)], 10.0, 2, &metric).unwrap();
        assert_eq!(g.clusters().len(), 1);
        assert_eq!(g.clusters()[0].members.len(), 2);
        assert_eq!(g.build_evaluations(), 1);
        assert!(matches!(build_graph(Vec::new(), 10.0, 2, &metric), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn duplicate_ids_and_bad_params_are_rejected() {
        let metric = TableMetric::new(&[]);
        let mut g = SignatureGraph::new(1.0, 1).unwrap();
        g.assign_image(sig(0), &metric).unwrap();
        assert!(matches!(g.assign_image(sig(0), &metric), Err(Error::DuplicateImage(ImageId(0)))));
        assert!(SignatureGraph::new(0.0, 1).is_err());
        assert!(SignatureGraph::new(1.0, 0).is_err());
    }

    #[test]
    fn best_cluster_uses_distance_minus_radius() {
        // clusters: 0 (k=1), 1 (k=3, founded at distance 40 from 0)
        // new image: 12 from center 0 (slack 2), 25 from center 1 (slack -5)
        let metric = TableMetric::new(&[((0, 1), 40.0), ((0, 2), 12.0), ((1, 2), 25.0)]);
        let g = build_graph([sig(0), sig(1), sig(2)], 10.0, 1, &metric).unwrap();
        assert_eq!(g.clusters()[1].k, 3);
        assert_eq!(g.clusters()[1].members.len(), 2);
        assert_eq!(g.build_evaluations(), 1 + 2);
    }

    #[test]
    fn search_visits_nearest_and_linked_clusters() {
        // centers 0, 1, 2 with 0-1 linked (15 <= 20), 2 far from both
        let metric = TableMetric::new(&[
            ((0, 1), 15.0),
            ((0, 2), 80.0),
            ((1, 2), 70.0),
            ((0, 9), 3.0),
            ((1, 9), 14.0),
            ((2, 9), 77.0),
        ]);
        let mut g = SignatureGraph::new(5.0, 4).unwrap();
        for i in 0..3 {
            g.assign_image(sig(i), &metric).unwrap();
        }
        assert_eq!(g.clusters().len(), 3);
        assert_eq!(g.edges().len(), 1);
        let c = g.search(&sig(9), &metric).unwrap();
        assert_eq!(c.nearest_cluster, 0);
        assert_eq!(c.clusters, vec![0, 1]);
        assert_eq!(c.ids, vec![ImageId(0), ImageId(1)]);
        let r = g.rank_results(&c, &sig(9), 10, &metric).unwrap();
        assert_eq!(r.ranked, vec![(ImageId(0), 3.0), (ImageId(1), 14.0)]);
        assert_eq!(r.emd_evaluations, 3 + 2);
        assert_eq!(r.member_evaluations, 2);
        let r = g.rank_results(&c, &sig(9), 1, &metric).unwrap();
        assert_eq!(r.ranked.len(), 1);
    }

    #[test]
    fn query_of_an_indexed_center_finds_itself_first() {
        let metric = TableMetric::new(&[((0, 1), 2.0)]);
        let g = build_graph([sig(0), sig(1)], 10.0, 2, &metric).unwrap();
        let r = g.query(&sig(1), 5, &metric).unwrap();
        assert_eq!(r.ranked[0], (ImageId(1), 0.0));
    }

    #[test]
    fn from_parts_rejects_broken_structures() {
        let sigs = vec![sig(0), sig(1)];
        let member = |id, d| Member { id: ImageId(id), stored_distance: d, clamped: false };
        let good = vec![Cluster { center: ImageId(0), k: 1, members: vec![member(0, 0.0), member(1, 1.0)] }];
        assert!(SignatureGraph::from_parts(2.0, 1, sigs.clone(), good, vec![], 1).is_ok());

        let missing = vec![Cluster { center: ImageId(0), k: 1, members: vec![member(0, 0.0)] }];
        assert!(SignatureGraph::from_parts(2.0, 1, sigs.clone(), missing, vec![], 0).is_err());

        let outside = vec![Cluster { center: ImageId(0), k: 1, members: vec![member(0, 0.0), member(1, 3.0)] }];
        assert!(SignatureGraph::from_parts(2.0, 1, sigs.clone(), outside, vec![], 0).is_err());

        let unknown = vec![Cluster { center: ImageId(0), k: 1, members: vec![member(0, 0.0), member(7, 1.0)] }];
        assert!(SignatureGraph::from_parts(2.0, 1, sigs, unknown, vec![], 0).is_err());
    }

    #[test]
    fn theta_estimate_is_quarter_median() {
        let metric = TableMetric::new(&[((0, 1), 4.0), ((0, 2), 8.0), ((1, 2), 20.0)]);
        let sigs = vec![sig(0), sig(1), sig(2)];
        assert_eq!(estimate_theta(&sigs, &metric, 100).unwrap(), 2.0);
        assert_eq!(estimate_theta(&sigs[..1], &metric, 100).unwrap(), 1.0);
    }
}
