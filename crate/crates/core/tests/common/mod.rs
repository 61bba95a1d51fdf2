#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;

use globreg_core::faster_pfh::{estimate_normal_pca, orient_toward};
use globreg_core::params::NormalOrientation;
use globreg_core::{CompatGraph, Params, Point3, PointCloud, Pose, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One result line that shows up even when libtest captures output.
pub fn report(ok: bool, id: &str, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{tag} {id}: {detail}");
    let _ = out.flush();
}

/// A few hundred jittered points on planes, box faces, a cylinder and a
/// sphere inside roughly a unit cube, then moved by a random pose.
pub fn structured_cloud(seed: u64, n: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = 0.004;
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let p = match rng.random_range(0..6) {
            0 => Vector3::new(a, b, 0.0),
            1 => Vector3::new(a, 0.0, 0.6 * b),
            2 => Vector3::new(0.0, a, 0.6 * b),
            3 => {
                // box face pair on top of the floor
                let face = rng.random_range(0..3);
                let (u, w) = (0.5 + 0.3 * a, 0.5 + 0.3 * b);
                match face {
                    0 => Vector3::new(u, w, 0.3),
                    1 => Vector3::new(u, 0.5, 0.3 * b),
                    _ => Vector3::new(0.5, w, 0.3 * a),
                }
            }
            4 => {
                let t = 2.0 * PI * a;
                Vector3::new(0.25 + 0.1 * t.cos(), 0.7 + 0.1 * t.sin(), 0.4 * b)
            }
            _ => {
                let z = 2.0 * a - 1.0;
                let t = 2.0 * PI * b;
                let s = (1.0 - z * z).sqrt();
                Vector3::new(0.75 + 0.12 * s * t.cos(), 0.2 + 0.12 * s * t.sin(), 0.15 + 0.12 * z)
            }
        };
        let noise = Vector3::new(rng.random_range(-jitter..jitter), rng.random_range(-jitter..jitter), rng.random_range(-jitter..jitter));
        pts.push(Point3::from(p + noise));
    }
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let pose = Pose::from_axis_angle(&axis, rng.random_range(0.0..PI), Vector3::new(rng.random(), rng.random(), rng.random()));
    PointCloud::new(pts).unwrap().transformed(&pose)
}

fn brute_radius(pts: &[Point3], q: usize, radius: f64) -> Vec<usize> {
    (0..pts.len()).filter(|&s| (pts[s] - pts[q]).norm_squared() < radius * radius).collect()
}

fn features(p_q: &Point3, n_q: &Vector3<f64>, p_k: &Point3, n_k: &Vector3<f64>) -> [f64; 3] {
    let d_qk = (p_k - p_q).normalize();
    // the endpoint whose normal is closer in angle to the outgoing segment is the source
    let angle_q = n_q.dot(&d_qk).clamp(-1.0, 1.0).acos();
    let angle_k = n_k.dot(&(-d_qk)).clamp(-1.0, 1.0).acos();
    let (n_s, n_t, d) = if angle_q <= angle_k { (n_q, n_k, d_qk) } else { (n_k, n_q, -d_qk) };
    let u = *n_s;
    let v = d.cross(&u);
    let w = u.cross(&v);
    let mut theta = w.dot(n_t).atan2(u.dot(n_t));
    if theta == -PI {
        theta = PI;
    }
    [theta, v.dot(n_t), u.dot(&d)]
}

fn bin(f: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let eps = 1e-9 * (hi - lo);
    let f = f.clamp(lo, hi);
    ((bins as f64 * (f - lo) / (hi + eps - lo)).floor() as usize).min(bins - 1)
}

/// Reference descriptors computed stage by stage with fresh brute-force
/// searches: normals from an `r_normal` search, neighborhoods from an
/// `r_fpfh` search, reliability filtering repeated until nothing changes.
/// Returns `(owner, spfh, fpfh)` for every surviving point.
pub fn naive_descriptors(cloud: &PointCloud, params: &Params) -> Vec<(usize, Vec<f64>, Vec<f64>)> {
    let pts = cloud.points();
    let n = pts.len();
    let bins = params.histogram_bins;
    let tau = params.min_neighbors;
    let centroid = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n.max(1) as f64;

    // pass 1: normals
    let mut normals: Vec<Option<Vector3<f64>>> = vec![None; n];
    for q in 0..n {
        if brute_radius(pts, q, params.fpfh_radius).len() < tau {
            continue;
        }
        let near = brute_radius(pts, q, params.normal_radius);
        if near.len() < tau {
            continue;
        }
        let subset: Vec<Point3> = near.iter().map(|&s| pts[s]).collect();
        let Ok(est) = estimate_normal_pca(&subset) else { continue };
        if est.linearity >= params.max_linearity {
            continue;
        }
        normals[q] = Some(match params.normal_orientation {
            NormalOrientation::Up => est.normal,
            NormalOrientation::Centroid => orient_toward(est.normal, &(centroid - pts[q].coords)),
        });
    }

    // pass 2: shrink the reliable set to a fixed point
    let neighborhoods: Vec<Vec<usize>> = (0..n).map(|q| brute_radius(pts, q, params.fpfh_radius)).collect();
    let mut reliable: Vec<bool> = normals.iter().map(Option::is_some).collect();
    loop {
        let next: Vec<bool> = (0..n)
            .map(|q| reliable[q] && neighborhoods[q].iter().filter(|&&s| reliable[s]).count() >= tau)
            .collect();
        if next == reliable {
            break;
        }
        reliable = next;
    }
    let valid_neighbors = |q: usize| -> Vec<usize> { neighborhoods[q].iter().copied().filter(|&s| s != q && reliable[s]).collect() };

    let ranges = [(-PI, PI), (-1.0, 1.0), (-1.0, 1.0)];
    let mut spfh: Vec<Option<Vec<f64>>> = vec![None; n];
    for q in (0..n).filter(|&q| reliable[q]) {
        let nq = normals[q].unwrap();
        let others = valid_neighbors(q);
        let mut h = vec![0.0; 3 * bins];
        for &k in &others {
            let f = features(&pts[q], &nq, &pts[k], &normals[k].unwrap());
            for l in 0..3 {
                h[l * bins + bin(f[l], ranges[l].0, ranges[l].1, bins)] += 100.0 / others.len() as f64;
            }
        }
        spfh[q] = Some(h);
    }

    let mut out = Vec::new();
    for q in (0..n).filter(|&q| reliable[q]) {
        let others = valid_neighbors(q);
        let mut f = spfh[q].clone().unwrap();
        for &k in &others {
            let dist = (pts[q] - pts[k]).norm();
            for (e, s) in f.iter_mut().zip(spfh[k].as_ref().unwrap()) {
                *e += s / dist / others.len() as f64;
            }
        }
        out.push((q, spfh[q].clone().unwrap(), f));
    }
    out
}

/// G(n, p) edge list, u < w.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for w in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, w));
            }
        }
    }
    edges
}

/// Core numbers by repeated deletion: for k = 1, 2, ... strip vertices of
/// degree < k until none is left; a vertex's core number is the last k whose
/// stripped graph still contains it.
pub fn brute_cores(g: &CompatGraph) -> Vec<usize> {
    let n = g.vertex_count();
    let mut core = vec![0usize; n];
    let mut k = 1;
    loop {
        let mut alive = vec![true; n];
        loop {
            let doomed: Vec<usize> = (0..n)
                .filter(|&v| alive[v] && g.neighbors(v).iter().filter(|&&w| alive[w as usize]).count() < k)
                .collect();
            if doomed.is_empty() {
                break;
            }
            for v in doomed {
                alive[v] = false;
            }
        }
        if !alive.iter().any(|&a| a) {
            return core;
        }
        for v in (0..n).filter(|&v| alive[v]) {
            core[v] = k;
        }
        k += 1;
    }
}

/// All maximum cliques by exhaustive subset search (n ≤ 20), as bitmasks.
pub fn maximum_cliques(g: &CompatGraph) -> Vec<u32> {
    let n = g.vertex_count();
    assert!(n <= 20);
    let adj: Vec<u32> = (0..n).map(|v| g.neighbors(v).iter().fold(0u32, |m, &w| m | 1 << w)).collect();
    let is_clique = |mask: u32| (0..n).filter(|&v| mask & 1 << v != 0).all(|v| mask & !(1 << v) & !adj[v] == 0);
    let mut best = 0;
    let mut found = Vec::new();
    for mask in 0u32..(1 << n) {
        let size = mask.count_ones();
        if size < best || !is_clique(mask) {
            continue;
        }
        if size > best {
            best = size;
            found.clear();
        }
        found.push(mask);
    }
    found
}

/// `m` distinct random edges on `n` vertices.
pub fn random_sparse_graph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CompatGraph {
    let mut edges = Vec::with_capacity(m + m / 8);
    while edges.len() < m {
        let (u, w) = (rng.random_range(0..n), rng.random_range(0..n));
        if u != w {
            edges.push((u.min(w), u.max(w)));
        }
        if edges.len() == m {
            edges.sort_unstable();
            edges.dedup();
        }
    }
    CompatGraph::from_edges(n, &edges)
}
