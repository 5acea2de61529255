//! Earth Mover's Distance between image signatures.
//!
//! The per-colour weight vectors of two signatures are matched by a
//! transportation problem whose costs are RGB distances between palette
//! colours. Only `W_m = min(total_a, total_b)` units are moved, and the
//! distance is the optimal cost divided by `W_m`.
//!
//! The solver is a transportation simplex: northwest-corner start, MODI
//! potentials, Bland's rule for both entering and leaving cells.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::signatures::{signature_weights, ColorPalette, ImageSignature, WeightVector};

/// Pairwise Euclidean RGB distances between palette colours.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundDistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl GroundDistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

pub fn ground_distances(palette: &ColorPalette) -> GroundDistanceMatrix {
    let colors = palette.colors();
    let n = colors.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (colors[i], colors[j]);
            let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            d[i * n + j] = dist;
            d[j * n + i] = dist;
        }
    }
    GroundDistanceMatrix { n, d }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrix {
    rows: usize,
    cols: usize,
    f: Vec<f64>,
}

impl FlowMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.f[i * self.cols + j]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.f[i * self.cols..(i + 1) * self.cols].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j)).sum()
    }

    pub fn total(&self) -> f64 {
        self.f.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transport {
    pub flow: FlowMatrix,
    pub cost: f64,
}

/// Minimum-cost flow moving `min(sum supplies, sum demands)` units with row
/// sums capped by `supplies` and column sums capped by `demands`.
pub fn solve_transportation(
    supplies: &[f64],
    demands: &[f64],
    costs: &[Vec<f64>],
) -> Result<Transport> {
    if costs.len() != supplies.len() || costs.iter().any(|r| r.len() != demands.len()) {
        return Err(Error::InvalidParameter(format!(
            "cost matrix must be {}x{}",
            supplies.len(),
            demands.len()
        )));
    }
    if costs.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::InvalidParameter("costs must be finite and non-negative".into()));
    }
    solve_with(supplies, demands, |i, j| costs[i][j])
}

fn solve_with(supplies: &[f64], demands: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<Transport> {
    if supplies.iter().chain(demands).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("supplies and demands must be finite and non-negative".into()));
    }
    // zero rows and columns carry no flow; solve on the rest
    let rows: Vec<usize> = (0..supplies.len()).filter(|&i| supplies[i] > 0.0).collect();
    let cols: Vec<usize> = (0..demands.len()).filter(|&j| demands[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::EmptyTransport);
    }

    let mut s: Vec<f64> = rows.iter().map(|&i| supplies[i]).collect();
    let mut d: Vec<f64> = cols.iter().map(|&j| demands[j]).collect();
    let total_s: f64 = s.iter().sum();
    let total_d: f64 = d.iter().sum();
    // slack absorbs the surplus side at zero cost
    let (dummy_row, dummy_col) = if total_s > total_d {
        d.push(total_s - total_d);
        (false, true)
    } else if total_d > total_s {
        s.push(total_d - total_s);
        (true, false)
    } else {
        (false, false)
    };

    let (m, n) = (s.len(), d.len());
    let mut c = vec![0.0; m * n];
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            c[a * n + b] = cost(i, j);
        }
    }
    let mut simplex = Simplex::northwest_corner(m, n, c, &s, &d);
    simplex.optimize()?;

    let real_rows = m - dummy_row as usize;
    let real_cols = n - dummy_col as usize;
    let mut f = vec![0.0; supplies.len() * demands.len()];
    let mut total_cost = 0.0;
    for a in 0..real_rows {
        for b in 0..real_cols {
            let x = simplex.x[a * n + b];
            if x != 0.0 {
                f[rows[a] * demands.len() + cols[b]] = x;
                total_cost += x * simplex.c[a * n + b];
            }
        }
    }
    Ok(Transport {
        flow: FlowMatrix { rows: supplies.len(), cols: demands.len(), f },
        cost: total_cost,
    })
}

/// Balanced transportation problem with a spanning-tree basis of `m + n - 1`
/// cells.
struct Simplex {
    m: usize,
    n: usize,
    c: Vec<f64>,
    x: Vec<f64>,
    basic: Vec<bool>,
    /// Basis tree over nodes `0..m` (rows) and `m..m+n` (columns); each
    /// entry is `(neighbour, cell)`.
    adj: Vec<Vec<(usize, usize)>>,
}

impl Simplex {
    fn northwest_corner(m: usize, n: usize, c: Vec<f64>, s: &[f64], d: &[f64]) -> Simplex {
        let mut s = s.to_vec();
        let mut d = d.to_vec();
        let mut simplex = Simplex {
            m,
            n,
            c,
            x: vec![0.0; m * n],
            basic: vec![false; m * n],
            adj: vec![Vec::new(); m + n],
        };
        let (mut i, mut j) = (0, 0);
        loop {
            let q = s[i].min(d[j]).max(0.0);
            simplex.x[i * n + j] = q;
            simplex.link(i * n + j);
            s[i] -= q;
            d[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            // when both run out together, step down and keep a zero basic cell
            if j == n - 1 || (i < m - 1 && s[i] <= d[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        simplex
    }

    fn link(&mut self, cell: usize) {
        let (i, j) = (cell / self.n, self.m + cell % self.n);
        self.basic[cell] = true;
        self.adj[i].push((j, cell));
        self.adj[j].push((i, cell));
    }

    fn unlink(&mut self, cell: usize) {
        let (i, j) = (cell / self.n, self.m + cell % self.n);
        self.basic[cell] = false;
        self.adj[i].retain(|&(_, c)| c != cell);
        self.adj[j].retain(|&(_, c)| c != cell);
    }

    /// Potentials with `u_0 = 0` and `u_i + v_j = c_ij` on basic cells, plus
    /// each node's parent edge and depth in the tree rooted at row 0.
    fn potentials(&self, pot: &mut [f64], parent: &mut [(usize, usize)], depth: &mut [usize], stack: &mut Vec<usize>) {
        pot.fill(f64::NAN);
        pot[0] = 0.0;
        parent[0] = (usize::MAX, usize::MAX);
        depth[0] = 0;
        stack.clear();
        stack.push(0);
        while let Some(node) = stack.pop() {
            for &(next, cell) in &self.adj[node] {
                if pot[next].is_nan() {
                    pot[next] = self.c[cell] - pot[node];
                    parent[next] = (node, cell);
                    depth[next] = depth[node] + 1;
                    stack.push(next);
                }
            }
        }
    }

    /// Tree cells on the path from row `i` to column `j`, row side first.
    fn path(&self, parent: &[(usize, usize)], depth: &[usize], i: usize, j: usize) -> Vec<usize> {
        let (mut a, mut b) = (i, self.m + j);
        let mut from_row = Vec::new();
        let mut from_col = Vec::new();
        while a != b {
            if depth[a] >= depth[b] {
                from_row.push(parent[a].1);
                a = parent[a].0;
            } else {
                from_col.push(parent[b].1);
                b = parent[b].0;
            }
        }
        from_col.reverse();
        from_row.extend(from_col);
        from_row
    }

    fn optimize(&mut self) -> Result<()> {
        let max_cost = self.c.iter().copied().fold(0.0, f64::max);
        let eps = 1e-12 * (1.0 + max_cost);
        let limit = 50 * self.m * self.n + 1000;
        let nodes = self.m + self.n;
        let mut pot = vec![0.0; nodes];
        let mut parent = vec![(0, 0); nodes];
        let mut depth = vec![0; nodes];
        let mut stack = Vec::with_capacity(nodes);
        // most negative reduced cost, switching to Bland's lowest index once
        // a run of degenerate pivots gets long
        let mut degenerate_run = 0;
        for _ in 0..limit {
            self.potentials(&mut pot, &mut parent, &mut depth, &mut stack);
            let (u, v) = pot.split_at(self.m);
            let bland = degenerate_run > nodes;
            let mut entering = None;
            let mut best = -eps;
            for cell in 0..self.m * self.n {
                if self.basic[cell] {
                    continue;
                }
                let reduced = self.c[cell] - u[cell / self.n] - v[cell % self.n];
                if reduced < best {
                    entering = Some(cell);
                    if bland {
                        break;
                    }
                    best = reduced;
                }
            }
            let Some(entering) = entering else {
                return Ok(());
            };

            let path = self.path(&parent, &depth, entering / self.n, entering % self.n);
            // around the cycle from the entering cell, path cells alternate
            // -, +, -, ... starting from the row end
            let minus: Vec<usize> = path.iter().step_by(2).copied().collect();
            let plus: Vec<usize> = path.iter().skip(1).step_by(2).copied().collect();
            let theta = minus.iter().map(|&cell| self.x[cell]).fold(f64::INFINITY, f64::min);
            let leaving = minus
                .iter()
                .copied()
                .filter(|&cell| self.x[cell] == theta)
                .min()
                .expect("cycle has a decreasing cell");
            degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };

            self.x[entering] += theta;
            for &cell in &plus {
                self.x[cell] += theta;
            }
            for &cell in &minus {
                self.x[cell] -= theta;
            }
            self.x[leaving] = 0.0;
            self.unlink(leaving);
            self.link(entering);
        }
        Err(Error::SolverStalled(limit))
    }
}

/// EMD between two weight vectors under `ground` costs.
pub fn emd_from_weights(
    a: &WeightVector,
    b: &WeightVector,
    ground: &GroundDistanceMatrix,
) -> Result<f64> {
    if a.len() != ground.len() || b.len() != ground.len() {
        return Err(Error::IncompatibleSignatures(format!(
            "weight vectors of length {} and {} against a {}-colour palette",
            a.len(),
            b.len(),
            ground.len()
        )));
    }
    let (ta, tb) = (a.total(), b.total());
    if !(ta > 0.0 && tb > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let moved = ta.min(tb);
    let transport = solve_with(&a.weights, &b.weights, |i, j| ground.get(i, j))?;
    Ok(transport.cost / moved)
}

/// Convenience form that derives the ground distances from `palette`.
pub fn emd_distance(a: &ImageSignature, b: &ImageSignature, palette: &ColorPalette) -> Result<f64> {
    EmdMetric::new(palette).distance(a, b)
}

/// EMD with a shared ground-distance matrix and an evaluation counter.
#[derive(Debug)]
pub struct EmdMetric {
    ground: GroundDistanceMatrix,
    evaluations: AtomicU64,
}

impl EmdMetric {
    pub fn new(palette: &ColorPalette) -> EmdMetric {
        EmdMetric { ground: ground_distances(palette), evaluations: AtomicU64::new(0) }
    }

    pub fn ground(&self) -> &GroundDistanceMatrix {
        &self.ground
    }

    pub fn distance(&self, a: &ImageSignature, b: &ImageSignature) -> Result<f64> {
        if !a.is_compatible(b) {
            return Err(Error::IncompatibleSignatures(format!(
                "image {} uses {}x{} blocks, image {} uses {}x{}",
                a.id(),
                a.palette_size(),
                a.block_width(),
                b.id(),
                b.palette_size(),
                b.block_width()
            )));
        }
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        emd_from_weights(&signature_weights(a), &signature_weights(b), &self.ground)
    }

    /// Number of distances computed since construction or the last reset.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signatures::{default_palette, ImageId, RegionHistogram};

    fn feasible(t: &Transport, s: &[f64], d: &[f64]) {
        for i in 0..s.len() {
            assert!(t.flow.row_sum(i) <= s[i] + 1e-9);
        }
        for j in 0..d.len() {
            assert!(t.flow.col_sum(j) <= d[j] + 1e-9);
        }
        assert!(t.flow.f.iter().all(|&x| x >= 0.0));
        let want = s.iter().sum::<f64>().min(d.iter().sum());
        assert!((t.flow.total() - want).abs() < 1e-9);
    }

    #[test]
    fn ground_distance_properties() {
        let g = ground_distances(&default_palette());
        for i in 0..32 {
            assert_eq!(g.get(i, i), 0.0);
            for j in 0..32 {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
        let bw = ColorPalette::new(vec![[0.0; 3], [1.0; 3]]).unwrap();
        assert!((ground_distances(&bw).get(0, 1) - 1.732_050_8).abs() < 1e-7);
    }

    #[test]
    fn single_cell() {
        let t = solve_transportation(&[1.0], &[1.0], &[vec![5.0]]).unwrap();
        assert_eq!(t.flow.get(0, 0), 1.0);
        assert_eq!(t.cost, 5.0);
    }

    #[test]
    fn two_by_two_reference() {
        let s = [0.4, 0.6];
        let d = [0.5, 0.5];
        let t = solve_transportation(&s, &d, &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((t.cost - 0.1).abs() < 1e-12);
        assert!((t.flow.get(0, 0) - 0.4).abs() < 1e-12);
        assert!((t.flow.get(1, 1) - 0.5).abs() < 1e-12);
        assert!((t.flow.get(1, 0) - 0.1).abs() < 1e-12);
        feasible(&t, &s, &d);
    }

    #[test]
    fn identical_marginals_cost_nothing() {
        let w = [3.0, 1.0, 2.0, 4.0];
        let costs: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| (i as f64 - j as f64).abs() + 0.5 * (i != j) as u8 as f64).collect())
            .collect();
        let t = solve_transportation(&w, &w, &costs).unwrap();
        assert_eq!(t.cost, 0.0);
        feasible(&t, &w, &w);
    }

    #[test]
    fn unbalanced_moves_the_smaller_total() {
        let s = [2.0, 3.0];
        let d = [1.0];
        let t = solve_transportation(&s, &d, &[vec![4.0], vec![1.0]]).unwrap();
        assert_eq!(t.flow.get(1, 0), 1.0);
        assert_eq!(t.cost, 1.0);
        feasible(&t, &s, &d);
        let t = solve_transportation(&d, &s, &[vec![4.0, 1.0]]).unwrap();
        assert_eq!(t.cost, 1.0);
    }

    #[test]
    fn zero_rows_are_dropped_and_reinserted() {
        let s = [0.0, 1.0, 0.0];
        let d = [0.5, 0.0, 0.5];
        let costs = vec![vec![9.0; 3], vec![1.0, 9.0, 2.0], vec![9.0; 3]];
        let t = solve_transportation(&s, &d, &costs).unwrap();
        assert_eq!(t.flow.rows(), 3);
        assert_eq!(t.flow.cols(), 3);
        assert!((t.cost - 1.5).abs() < 1e-12);
        assert_eq!(t.flow.row_sum(0), 0.0);
        assert_eq!(t.flow.col_sum(1), 0.0);
    }

    #[test]
    fn degenerate_northwest_start() {
        // marginals that exhaust a row and a column together
        let s = [1.0, 1.0, 1.0];
        let d = [1.0, 1.0, 1.0];
        let costs = vec![vec![3.0, 1.0, 2.0], vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 1.0]];
        let t = solve_transportation(&s, &d, &costs).unwrap();
        assert!((t.cost - 3.0).abs() < 1e-12);
        feasible(&t, &s, &d);
    }

    #[test]
    fn errors() {
        assert!(matches!(solve_transportation(&[0.0], &[1.0], &[vec![1.0]]), Err(Error::EmptyTransport)));
        assert!(matches!(solve_transportation(&[1.0], &[0.0, 0.0], &[vec![1.0, 1.0]]), Err(Error::EmptyTransport)));
        assert!(solve_transportation(&[1.0], &[1.0], &[vec![1.0, 2.0]]).is_err());
        assert!(solve_transportation(&[-1.0, 2.0], &[1.0], &[vec![1.0], vec![1.0]]).is_err());
        assert!(solve_transportation(&[1.0], &[1.0], &[vec![f64::NAN]]).is_err());
    }

    fn sig(id: u32, hs: &[Vec<f64>]) -> ImageSignature {
        let hs: Vec<_> = hs.iter().map(|v| RegionHistogram { values: v.clone() }).collect();
        ImageSignature::from_histograms(ImageId(id), &hs, 4).unwrap()
    }

    #[test]
    fn micro_fixture_emd() {
        // black/white palette, m = 4
        // a: h = (1, 0) -> positions (4, 1) -> weights (100, 25)
        // b: h = (0.5, 0.5) -> positions (3, 3) -> weights (75, 75)
        // W_m = 125; move 75 black->black, 25 white->white, 25 black->white
        // cost = 25 * sqrt(3); EMD = 25 sqrt(3) / 125
        let palette = ColorPalette::new(vec![[0.0; 3], [1.0; 3]]).unwrap();
        let a = sig(0, &[vec![1.0, 0.0]]);
        let b = sig(1, &[vec![0.5, 0.5]]);
        let expected = 25.0 * 3f64.sqrt() / 125.0;
        assert!((emd_distance(&a, &b, &palette).unwrap() - expected).abs() < 1e-12);
        assert!((emd_distance(&b, &a, &palette).unwrap() - expected).abs() < 1e-12);
        assert_eq!(emd_distance(&a, &a, &palette).unwrap(), 0.0);
    }

    #[test]
    fn metric_counts_evaluations_and_checks_compatibility() {
        let palette = ColorPalette::new(vec![[0.0; 3], [1.0; 3]]).unwrap();
        let metric = EmdMetric::new(&palette);
        let a = sig(0, &[vec![1.0, 0.0]]);
        metric.distance(&a, &a).unwrap();
        metric.distance(&a, &a).unwrap();
        assert_eq!(metric.evaluations(), 2);
        let other = ImageSignature::from_histograms(
            ImageId(5),
            &[RegionHistogram { values: vec![1.0, 0.0] }],
            6,
        )
        .unwrap();
        assert!(matches!(metric.distance(&a, &other), Err(Error::IncompatibleSignatures(_))));
        metric.reset_evaluations();
        assert_eq!(metric.evaluations(), 0);
    }

    #[test]
    fn weight_scaling_leaves_emd_unchanged() {
        let g = ground_distances(&default_palette());
        let a = WeightVector { weights: (0..32).map(|i| ((i * 7) % 5 + 1) as f64 * 10.0).collect() };
        let b = WeightVector { weights: (0..32).map(|i| ((i * 3) % 7 + 1) as f64 * 10.0).collect() };
        let base = emd_from_weights(&a, &b, &g).unwrap();
        for k in [0.5, 3.0, 17.0] {
            let sa = WeightVector { weights: a.weights.iter().map(|w| w * k).collect() };
            let sb = WeightVector { weights: b.weights.iter().map(|w| w * k).collect() };
            assert!((emd_from_weights(&sa, &sb, &g).unwrap() - base).abs() < 1e-9);
        }
        assert!(base >= 0.0);
    }

    #[test]
    fn zero_weight_is_an_error() {
        let g = ground_distances(&default_palette());
        let zero = WeightVector { weights: vec![0.0; 32] };
        let one = WeightVector { weights: vec![1.0; 32] };
        assert!(matches!(emd_from_weights(&zero, &one, &g), Err(Error::ZeroWeight)));
    }
}
