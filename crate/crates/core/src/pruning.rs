//! Outlier pruning: pairwise length-consistency graph in CSR layout and
//! maximum k-core selection.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::matching::Correspondence;

/// Undirected simple graph in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompatGraph {
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
}

impl CompatGraph {
    /// Builds from undirected edges. Self-loops and duplicates are dropped.
    pub fn from_edges(vertices: usize, edges: &[(usize, usize)]) -> Self {
        let mut upper: Vec<Vec<u32>> = vec![Vec::new(); vertices];
        for &(u, w) in edges {
            assert!(u < vertices && w < vertices, "edge ({u}, {w}) out of range");
            if u != w {
                upper[u.min(w)].push(u.max(w) as u32);
            }
        }
        for row in &mut upper {
            row.sort_unstable();
            row.dedup();
        }
        Self::from_upper_rows(upper)
    }

    /// `upper[u]` holds the neighbors w > u of u, ascending.
    fn from_upper_rows(upper: Vec<Vec<u32>>) -> Self {
        let n = upper.len();
        let mut degree = vec![0usize; n];
        for (u, row) in upper.iter().enumerate() {
            degree[u] += row.len();
            for &w in row {
                degree[w as usize] += 1;
            }
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        for d in &degree {
            row_offsets.push(row_offsets.last().unwrap() + d);
        }
        let mut fill = row_offsets[..n].to_vec();
        let mut col_indices = vec![0u32; row_offsets[n]];
        // ascending u keeps every row sorted: lower neighbors arrive first, in order
        for (u, row) in upper.iter().enumerate() {
            for &w in row {
                col_indices[fill[u]] = w;
                fill[u] += 1;
                col_indices[fill[w as usize]] = u as u32;
                fill[w as usize] += 1;
            }
        }
        Self { row_offsets, col_indices }
    }

    pub fn vertex_count(&self) -> usize {
        self.row_offsets.len().saturating_sub(1)
    }

    pub fn edge_count(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_offsets[v + 1] - self.row_offsets[v]
    }

    /// Edges (u, w) with u < w, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.vertex_count())
            .flat_map(|u| self.neighbors(u).iter().map(move |&w| (u, w as usize)).filter(|&(u, w)| u < w))
            .collect()
    }

    /// Writes `# vertex core` then `# edges` sections.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# vertex core")?;
        for (v, k) in core_numbers(self).iter().enumerate() {
            writeln!(out, "{v} {k}")?;
        }
        writeln!(out, "# edges")?;
        for (u, w) in self.edges() {
            writeln!(out, "{u} {w}")?;
        }
        Ok(())
    }
}

/// Pairwise length consistency: the segment lengths between the two source
/// points and between the two target points differ by at most `2β`.
pub fn compatibility_test(c: &Correspondence, c2: &Correspondence, src: &PointCloud, tgt: &PointCloud, beta: f64) -> bool {
    let da = (src.point(c.src) - src.point(c2.src)).norm();
    let db = (tgt.point(c.tgt) - tgt.point(c2.tgt)).norm();
    (db - da).abs() <= 2.0 * beta
}

/// One vertex per correspondence, one edge per consistent unordered pair.
pub fn build_compat_graph(corrs: &[Correspondence], src: &PointCloud, tgt: &PointCloud, beta: f64) -> CompatGraph {
    let upper: Vec<Vec<u32>> = (0..corrs.len())
        .into_par_iter()
        .map(|u| {
            (u + 1..corrs.len())
                .filter(|&w| compatibility_test(&corrs[u], &corrs[w], src, tgt, beta))
                .map(|w| w as u32)
                .collect()
        })
        .collect();
    CompatGraph::from_upper_rows(upper)
}

/// Core number of every vertex by bucket peeling, O(|V| + |E|).
pub fn core_numbers(g: &CompatGraph) -> Vec<usize> {
    let n = g.vertex_count();
    if n == 0 {
        return Vec::new();
    }
    // vertex ids fit in u32 (CSR columns are u32); compact state keeps the
    // randomly accessed arrays cache-friendly. state[v] = [degree, position in vert]
    let mut state: Vec<[u32; 2]> = (0..n).map(|v| [g.degree(v) as u32, 0]).collect();
    let max_deg = state.iter().map(|s| s[0]).max().unwrap_or(0) as usize;
    // bin[d] = start of degree-d block in `vert`
    let mut bin = vec![0u32; max_deg + 1];
    for s in &state {
        bin[s[0] as usize] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let count = *b;
        *b = start;
        start += count;
    }
    let mut vert = vec![0u32; n];
    for (v, s) in state.iter_mut().enumerate() {
        let d = s[0] as usize;
        s[1] = bin[d];
        vert[bin[d] as usize] = v as u32;
        bin[d] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;
    for i in 0..n {
        let v = vert[i] as usize;
        let dv = state[v][0];
        for &w in g.neighbors(v) {
            let w = w as usize;
            let [dw, pw] = state[w];
            if dw > dv {
                let ps = bin[dw as usize];
                let s = vert[ps as usize] as usize;
                if s != w {
                    vert[pw as usize] = s as u32;
                    vert[ps as usize] = w as u32;
                    state[w][1] = ps;
                    state[s][1] = pw;
                }
                bin[dw as usize] += 1;
                state[w][0] = dw - 1;
            }
        }
    }
    state.into_iter().map(|s| s[0] as usize).collect()
}

/// Vertices whose core number equals the degeneracy k*, ascending; empty when k* = 0.
pub fn max_kcore(g: &CompatGraph) -> Vec<usize> {
    let cores = core_numbers(g);
    let k = cores.iter().copied().max().unwrap_or(0);
    if k == 0 {
        return Vec::new();
    }
    (0..cores.len()).filter(|&v| cores[v] == k).collect()
}

/// Indices into `corrs` surviving the maximum k-core.
pub fn prune_indices(corrs: &[Correspondence], src: &PointCloud, tgt: &PointCloud, beta: f64) -> Result<Vec<usize>> {
    let kept = max_kcore(&build_compat_graph(corrs, src, tgt, beta));
    if kept.is_empty() {
        return Err(Error::PruningRejectedAll);
    }
    Ok(kept)
}

pub fn prune(corrs: &[Correspondence], src: &PointCloud, tgt: &PointCloud, beta: f64) -> Result<Vec<Correspondence>> {
    Ok(prune_indices(corrs, src, tgt, beta)?.into_iter().map(|i| corrs[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point3, Pose};
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corr(src: usize, tgt: usize) -> Correspondence {
        Correspondence::new(src, tgt, 0.0, f64::INFINITY)
    }

    fn brute_cores(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
        let mut core = vec![0; n];
        for k in 1..n {
            let mut alive = vec![true; n];
            loop {
                let deg = |v: usize, alive: &[bool]| {
                    edges.iter().filter(|&&(a, b)| (a == v && alive[b]) || (b == v && alive[a])).count()
                };
                let drop: Vec<usize> = (0..n).filter(|&v| alive[v] && deg(v, &alive) < k).collect();
                if drop.is_empty() {
                    break;
                }
                for v in drop {
                    alive[v] = false;
                }
            }
            for v in 0..n {
                if alive[v] {
                    core[v] = k;
                }
            }
        }
        core
    }

    fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for u in 0..n {
            for w in u + 1..n {
                if rng.random::<f64>() < p {
                    e.push((u, w));
                }
            }
        }
        e
    }

    #[test]
    fn compatibility_examples() {
        let src = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [5.1, 0.0, 0.0], [6.0, 0.0, 0.0]]).unwrap();
        let tgt = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [0.0, 5.0, 0.0]]).unwrap();
        assert!(compatibility_test(&corr(0, 0), &corr(1, 1), &src, &tgt, 0.1));
        assert!(!compatibility_test(&corr(0, 0), &corr(2, 1), &src, &tgt, 0.1));
        // equal lengths pass for any positive bound
        let same = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [0.0, 6.0, 0.0]]).unwrap();
        assert!(compatibility_test(&corr(0, 0), &corr(2, 1), &src, &same, 1e-12));
    }

    #[test]
    fn single_vertex_graph() {
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 0.0]]).unwrap();
        let g = build_compat_graph(&[corr(0, 0)], &c, &c, 0.1);
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.edge_count(), 0);
        assert!(max_kcore(&g).is_empty());
    }

    #[test]
    fn rigid_inliers_form_triangle() {
        let src = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 1.0]]).unwrap();
        let pose = Pose::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.7, Vector3::new(3.0, -1.0, 2.0));
        let tgt = src.transformed(&pose);
        let corrs = [corr(0, 0), corr(1, 1), corr(2, 2)];
        let g = build_compat_graph(&corrs, &src, &tgt, 0.15);
        assert_eq!(g.edges(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn graph_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<[f64; 3]> = (0..60).map(|_| [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0), 0.0]).collect();
        let src = PointCloud::from_xyz(&pts).unwrap();
        let tgt = PointCloud::from_xyz(&pts).unwrap();
        let corrs: Vec<Correspondence> = (0..50).map(|_| corr(rng.random_range(0..60), rng.random_range(0..60))).collect();
        let beta = 0.3;
        let g = build_compat_graph(&corrs, &src, &tgt, beta);
        for u in 0..50 {
            for w in 0..50 {
                let dense = u != w && compatibility_test(&corrs[u], &corrs[w], &src, &tgt, beta);
                assert_eq!(g.neighbors(u).contains(&(w as u32)), dense);
            }
        }
        assert_eq!(g.row_offsets()[0], 0);
        assert_eq!(*g.row_offsets().last().unwrap(), 2 * g.edge_count());
        for v in 0..50 {
            assert!(g.neighbors(v).windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn core_examples() {
        let g = CompatGraph::from_edges(4, &[(0, 1), (1, 2), (0, 2), (2, 3)]);
        assert_eq!(core_numbers(&g), vec![2, 2, 2, 1]);
        assert_eq!(max_kcore(&g), vec![0, 1, 2]);
        let k4: Vec<(usize, usize)> = random_edges(&mut ChaCha8Rng::seed_from_u64(0), 4, 2.0);
        assert_eq!(core_numbers(&CompatGraph::from_edges(4, &k4)), vec![3; 4]);
        assert_eq!(core_numbers(&CompatGraph::from_edges(5, &[])), vec![0; 5]);
        let mut k4_plus = k4.clone();
        k4_plus.push((4, 5));
        assert_eq!(max_kcore(&CompatGraph::from_edges(6, &k4_plus)), vec![0, 1, 2, 3]);
    }

    #[test]
    fn denser_core_can_exclude_the_largest_clique() {
        // octahedron (4-regular, clique number 3) next to a K4
        let mut e = vec![];
        for u in 0..6 {
            for w in u + 1..6 {
                if w != u + 3 {
                    e.push((u, w));
                }
            }
        }
        for u in 6..10 {
            for w in u + 1..10 {
                e.push((u, w));
            }
        }
        let g = CompatGraph::from_edges(10, &e);
        assert_eq!(max_kcore(&g), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn cores_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let n = rng.random_range(1..40);
            let p = rng.random_range(0.0..0.5);
            let e = random_edges(&mut rng, n, p);
            assert_eq!(core_numbers(&CompatGraph::from_edges(n, &e)), brute_cores(n, &e));
        }
    }

    #[test]
    fn prune_keeps_exact_inliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = 0.1;
        let pose = Pose::from_axis_angle(&Vector3::z(), 0.5, Vector3::new(1.0, 2.0, 0.0));
        let src_pts: Vec<Point3> = (0..100).map(|_| Point3::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.0..5.0))).collect();
        let mut tgt_pts: Vec<Point3> = src_pts[..20].iter().map(|p| pose.apply(p)).collect();
        tgt_pts.extend((20..100).map(|_| Point3::new(rng.random_range(0.0..8.0), rng.random_range(0.0..8.0), rng.random_range(0.0..8.0))));
        let src = PointCloud::new(src_pts).unwrap();
        let tgt = PointCloud::new(tgt_pts).unwrap();
        let corrs: Vec<Correspondence> = (0..100).map(|i| corr(i, i)).collect();
        let kept = prune_indices(&corrs, &src, &tgt, 1.5 * v).unwrap();
        assert!((0..20).all(|i| kept.contains(&i)));
        let all = prune(&corrs[..20], &src, &tgt, 1.5 * v).unwrap();
        assert_eq!(all.len(), 20);
    }

    #[test]
    fn prune_rejects_edgeless() {
        let src = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let tgt = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [9.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(prune(&[corr(0, 0), corr(1, 1)], &src, &tgt, 0.1), Err(Error::PruningRejectedAll)));
    }

    #[test]
    fn dump_lists_cores_and_edges() {
        let g = CompatGraph::from_edges(3, &[(0, 1)]);
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# vertex core\n0 1\n1 1\n2 0\n# edges\n0 1\n");
    }

    proptest! {
        #[test]
        fn csr_round_trip(n in 1usize..30, raw in prop::collection::vec((0usize..30, 0usize..30), 0..120)) {
            let mut edges: Vec<(usize, usize)> = raw
                .into_iter()
                .map(|(a, b)| (a % n, b % n))
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            edges.sort_unstable();
            edges.dedup();
            let g = CompatGraph::from_edges(n, &edges);
            prop_assert_eq!(g.edges(), edges.clone());
            prop_assert_eq!(CompatGraph::from_edges(n, &g.edges()), g);
        }

        #[test]
        fn max_kcore_contains_max_clique(n in 1usize..=12, p in 0.0f64..1.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edges = random_edges(&mut rng, n, p);
            let g = CompatGraph::from_edges(n, &edges);
            let adj = |a: usize, b: usize| g.neighbors(a).contains(&(b as u32));
            let mut best = 0u32;
            for mask in 1u32..(1 << n) {
                if mask.count_ones() <= best.count_ones() {
                    continue;
                }
                let vs: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
                if vs.iter().enumerate().all(|(i, &a)| vs[i + 1..].iter().all(|&b| adj(a, b))) {
                    best = mask;
                }
            }
            // a clique of size ω lies inside the (ω − 1)-core
            let cores = core_numbers(&g);
            let omega = best.count_ones() as usize;
            for v in (0..n).filter(|&v| best & (1 << v) != 0) {
                prop_assert!(cores[v] + 1 >= omega);
            }
        }
    }
}
