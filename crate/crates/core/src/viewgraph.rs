//! Pairwise covisibility, thresholded view graphs, random-walk view
//! sampling and the geometric-input configuration sampler.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intrinsics_from_rays, DepthAlongRay, Intrinsics};
use crate::grid::Grid;
use crate::synth::SceneSample;

pub const DEFAULT_REL_DEPTH_TOL: f64 = 0.05;
pub const DEFAULT_COVIS_THRESHOLD: f64 = 0.25;
/// Fraction of valid depth kept when sparse depth is provided as input.
pub const SPARSE_DEPTH_KEEP: f64 = 0.1;

/// `fraction[i][j]`: share of view i's valid pixels that are seen
/// consistently by view j. Not symmetric; the diagonal is exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovisGraph {
    pub n: usize,
    pub fraction: Vec<Vec<f64>>,
}

impl CovisGraph {
    pub fn new(fraction: Vec<Vec<f64>>) -> Result<Self> {
        let n = fraction.len();
        for (i, row) in fraction.iter().enumerate() {
            if row.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "covisibility row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row[i] != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "covisibility diagonal {i} is {}",
                    row[i]
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidArgument(format!(
                    "covisibility entry {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { n, fraction })
    }
}

fn view_intrinsics(scene: &SceneSample, i: usize) -> Result<Intrinsics> {
    match scene.views[i].intrinsics {
        Some(k) => Ok(k),
        None => intrinsics_from_rays(&scene.views[i].rays).map(|(k, _)| k),
    }
}

/// Directed covisibility of view `i` into view `j`: the covisible count and
/// the number of valid pixels of `i`.
fn covis_pair(
    scene: &SceneSample,
    intrinsics: &[Intrinsics],
    i: usize,
    j: usize,
    rel_depth_tol: f64,
) -> (usize, usize) {
    let src = &scene.views[i];
    let dst = &scene.views[j];
    // Maps points of view i's camera frame into view j's camera frame.
    let i_to_j = dst.pose.inverse().compose(&src.pose);
    let rot = i_to_j.rotation_matrix();
    let t = *i_to_j.translation();
    let k = &intrinsics[j];
    let (w, h) = (dst.width() as f64, dst.height() as f64);
    let dst_depth = dst.depth.values();
    let dst_valid = dst.depth.validity();

    let mut valid = 0usize;
    let mut covisible = 0usize;
    for ((d, z), ok) in src
        .rays
        .directions()
        .iter()
        .zip(src.depth.values())
        .zip(src.depth.validity())
    {
        if !*ok {
            continue;
        }
        valid += 1;
        let p = rot * (d * *z) + t;
        if p.z <= 0.0 {
            continue;
        }
        let (u, v) = k.project(&p);
        if !(u >= 0.0 && v >= 0.0 && u < w && v < h) {
            continue;
        }
        let (pu, pv) = (u.floor() as usize, v.floor() as usize);
        if !*dst_valid.get(pu, pv) {
            continue;
        }
        let sampled = *dst_depth.get(pu, pv);
        if (p.norm() - sampled).abs() / sampled <= rel_depth_tol {
            covisible += 1;
        }
    }
    (covisible, valid)
}

/// Exhaustive pairwise covisibility by reprojection against ground-truth
/// depth. Ordered pairs are evaluated in parallel on the current rayon pool.
pub fn covisibility(scene: &SceneSample, rel_depth_tol: f64) -> Result<CovisGraph> {
    if !(rel_depth_tol.is_finite() && rel_depth_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {rel_depth_tol}")));
    }
    let n = scene.n_views();
    if n == 0 {
        return Err(Error::Empty("scene has no views".into()));
    }
    let intrinsics = (0..n)
        .map(|i| view_intrinsics(scene, i))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
        .collect();
    let counts: Vec<(usize, usize)> = pairs
        .par_iter()
        .map(|&(i, j)| covis_pair(scene, &intrinsics, i, j, rel_depth_tol))
        .collect();
    let mut fraction = vec![vec![0.0; n]; n];
    for (i, row) in fraction.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (&(i, j), &(c, v)) in pairs.iter().zip(&counts) {
        fraction[i][j] = if v == 0 { 0.0 } else { c as f64 / v as f64 };
    }
    CovisGraph::new(fraction)
}

/// Undirected view graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    edges: Vec<bool>,
}

impl Adjacency {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut a = Self {
            n,
            edges: vec![false; n * n],
        };
        for &(i, j) in edges {
            if i != j {
                a.edges[i * n + j] = true;
                a.edges[j * n + i] = true;
            }
        }
        a
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    /// Connected components, each sorted, in order of their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![s];
            label[s] = id;
            let mut k = 0;
            while k < comp.len() {
                let u = comp[k];
                for v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = id;
                        comp.push(v);
                    }
                }
                k += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Whether `nodes` induces a connected subgraph.
    pub fn is_connected_subset(&self, nodes: &[usize]) -> bool {
        if nodes.is_empty() {
            return false;
        }
        let mut seen = vec![false; nodes.len()];
        seen[0] = true;
        let mut stack = vec![0usize];
        while let Some(a) = stack.pop() {
            for (b, s) in seen.iter_mut().enumerate() {
                if !*s && self.has_edge(nodes[a], nodes[b]) {
                    *s = true;
                    stack.push(b);
                }
            }
        }
        seen.iter().all(|s| *s)
    }
}

/// Edge `(i, j)` iff `max(f[i][j], f[j][i]) ≥ threshold` and `i ≠ j`.
pub fn build_adjacency(g: &CovisGraph, threshold: f64) -> Adjacency {
    let n = g.n;
    let mut edges = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && g.fraction[i][j].max(g.fraction[j][i]) >= threshold {
                edges[i * n + j] = true;
            }
        }
    }
    Adjacency { n, edges }
}

/// Samples `n_views` distinct views forming a connected subgraph.
///
/// Starts at a uniformly random node among components large enough, then
/// walks to uniformly random neighbors, recording each new node. When the
/// current node has no unvisited neighbor the walk restarts from a uniformly
/// random visited node. Returned in visiting order.
pub fn random_walk_sample(adj: &Adjacency, n_views: usize, seed: u64) -> Result<Vec<usize>> {
    if n_views == 0 {
        return Err(Error::InvalidArgument("n_views must be ≥ 1".into()));
    }
    let comps = adj.components();
    let largest = comps.iter().map(Vec::len).max().unwrap_or(0);
    let eligible: Vec<usize> = comps
        .iter()
        .filter(|c| c.len() >= n_views)
        .flatten()
        .copied()
        .collect();
    if eligible.is_empty() {
        return Err(Error::InsufficientComponent {
            needed: n_views,
            largest,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = eligible[rng.gen_range(0..eligible.len())];
    let mut visited = vec![false; adj.len()];
    let mut order = vec![start];
    visited[start] = true;
    let mut current = start;
    let mut nbrs = Vec::new();
    while order.len() < n_views {
        nbrs.clear();
        nbrs.extend(adj.neighbors(current));
        if !nbrs.iter().any(|&v| !visited[v]) {
            current = order[rng.gen_range(0..order.len())];
            continue;
        }
        current = nbrs[rng.gen_range(0..nbrs.len())];
        if !visited[current] {
            visited[current] = true;
            order.push(current);
        }
    }
    Ok(order)
}

/// Selection probabilities for geometric inputs during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputProbabilities {
    /// Any geometric input at all.
    pub geometric: f64,
    /// Each of rays, depth, pose given that geometric inputs are on.
    pub per_factor: f64,
    /// Dense rather than sparsified depth, given depth is selected.
    pub dense_depth: f64,
    /// Each selected factor is provided for a given view.
    pub per_view: f64,
    /// Metric scale withheld although metric ground truth exists.
    pub withhold_metric_scale: f64,
}

impl Default for InputProbabilities {
    fn default() -> Self {
        Self {
            geometric: 0.9,
            per_factor: 0.5,
            dense_depth: 0.5,
            per_view: 0.95,
            withhold_metric_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViewInputs {
    pub rays_given: bool,
    pub pose_given: bool,
    pub depth_given: bool,
    /// Implies `depth_given`.
    pub depth_sparse: bool,
}

/// Scene-level draws that produced a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InputDraws {
    pub geometric: bool,
    pub rays_selected: bool,
    pub depth_selected: bool,
    pub pose_selected: bool,
    pub depth_sparse: bool,
    pub metric_scale_withheld: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InputConfig {
    pub views: Vec<ViewInputs>,
    pub metric_pose_scale_given: bool,
    pub metric_depth_scale_given: bool,
    pub draws: InputDraws,
}

impl InputConfig {
    /// Images only.
    pub fn images_only(n_views: usize) -> Self {
        Self {
            views: vec![ViewInputs::default(); n_views],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self
            .views
            .iter()
            .position(|v| v.depth_sparse && !v.depth_given)
        {
            return Err(Error::InvalidArgument(format!(
                "view {i}: sparse depth without depth"
            )));
        }
        Ok(())
    }
}

pub fn sample_input_config(
    n_views: usize,
    metric_gt_available: bool,
    seed: u64,
) -> Result<InputConfig> {
    sample_input_config_with(
        n_views,
        metric_gt_available,
        seed,
        &InputProbabilities::default(),
    )
}

pub fn sample_input_config_with(
    n_views: usize,
    metric_gt_available: bool,
    seed: u64,
    probs: &InputProbabilities,
) -> Result<InputConfig> {
    if n_views == 0 {
        return Err(Error::InvalidArgument("n_views must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = InputConfig::images_only(n_views);
    if !rng.gen_bool(probs.geometric) {
        return Ok(cfg);
    }
    let d = &mut cfg.draws;
    d.geometric = true;
    d.rays_selected = rng.gen_bool(probs.per_factor);
    d.depth_selected = rng.gen_bool(probs.per_factor);
    d.pose_selected = rng.gen_bool(probs.per_factor);
    d.depth_sparse = d.depth_selected && !rng.gen_bool(probs.dense_depth);
    d.metric_scale_withheld = metric_gt_available && rng.gen_bool(probs.withhold_metric_scale);
    let d = *d;

    for v in cfg.views.iter_mut() {
        v.rays_given = d.rays_selected && rng.gen_bool(probs.per_view);
        v.depth_given = d.depth_selected && rng.gen_bool(probs.per_view);
        v.pose_given = d.pose_selected && rng.gen_bool(probs.per_view);
        v.depth_sparse = v.depth_given && d.depth_sparse;
    }
    let metric = metric_gt_available && !d.metric_scale_withheld;
    cfg.metric_pose_scale_given = metric && cfg.views.iter().any(|v| v.pose_given);
    cfg.metric_depth_scale_given = metric && cfg.views.iter().any(|v| v.depth_given);
    Ok(cfg)
}

/// Keeps `floor(keep_fraction · valid)` uniformly chosen valid pixels.
pub fn sparsify_depth(d: &DepthAlongRay, keep_fraction: f64, seed: u64) -> Result<DepthAlongRay> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep_fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    let valid_idx: Vec<usize> = d
        .validity()
        .iter()
        .enumerate()
        .filter_map(|(i, ok)| ok.then_some(i))
        .collect();
    let keep = (keep_fraction * valid_idx.len() as f64).floor() as usize;
    if keep == valid_idx.len() {
        return Ok(d.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut validity = Grid::filled(d.width(), d.height(), false);
    for k in sample_indices(&mut rng, valid_idx.len(), keep) {
        validity.as_mut_slice()[valid_idx[k]] = true;
    }
    d.with_validity(validity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(f: Vec<Vec<f64>>) -> CovisGraph {
        CovisGraph::new(f).unwrap()
    }

    #[test]
    fn adjacency_max_rule() {
        let g = graph(vec![vec![1.0, 0.3], vec![0.1, 1.0]]);
        assert!(build_adjacency(&g, 0.25).has_edge(0, 1));
        assert!(build_adjacency(&g, 0.25).has_edge(1, 0));
        let g = graph(vec![vec![1.0, 0.2], vec![0.2, 1.0]]);
        assert!(!build_adjacency(&g, 0.25).has_edge(0, 1));
    }

    #[test]
    fn zero_threshold_is_complete() {
        let g = graph(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let a = build_adjacency(&g, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.has_edge(i, j), i != j);
            }
        }
    }

    #[test]
    fn covis_graph_validation() {
        assert!(CovisGraph::new(vec![vec![0.5]]).is_err());
        assert!(CovisGraph::new(vec![vec![1.0, 1.5], vec![0.0, 1.0]]).is_err());
        assert!(CovisGraph::new(vec![vec![1.0, 0.5]]).is_err());
    }

    #[test]
    fn walk_singleton() {
        let a = Adjacency::from_edges(4, &[]);
        let s = random_walk_sample(&a, 1, 3).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn walk_path_graph() {
        let a = Adjacency::from_edges(3, &[(0, 1), (1, 2)]);
        for seed in 0..50 {
            let mut s = random_walk_sample(&a, 3, seed).unwrap();
            assert!(a.is_connected_subset(&s));
            s.sort();
            assert_eq!(s, vec![0, 1, 2]);
        }
    }

    #[test]
    fn walk_insufficient_component() {
        let a = Adjacency::from_edges(4, &[(0, 1), (2, 3)]);
        assert!(matches!(
            random_walk_sample(&a, 3, 0),
            Err(Error::InsufficientComponent {
                needed: 3,
                largest: 2
            })
        ));
    }

    #[test]
    fn walk_is_seed_deterministic() {
        let a = Adjacency::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)]);
        assert_eq!(
            random_walk_sample(&a, 4, 17).unwrap(),
            random_walk_sample(&a, 4, 17).unwrap()
        );
    }

    #[test]
    fn walk_connected_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut trials = 0;
        while trials < 1000 {
            let n = rng.gen_range(2..12);
            let p = rng.gen_range(0.1..0.6);
            let mut edges = vec![];
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(p) {
                        edges.push((i, j));
                    }
                }
            }
            let a = Adjacency::from_edges(n, &edges);
            let largest = a.components().iter().map(Vec::len).max().unwrap();
            let k = rng.gen_range(1..=largest);
            let s = random_walk_sample(&a, k, trials as u64).unwrap();
            assert_eq!(s.len(), k);
            let mut dedup = s.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), k);
            assert!(a.is_connected_subset(&s));
            trials += 1;
        }
    }

    #[test]
    fn input_config_off_means_all_false() {
        let probs = InputProbabilities {
            geometric: 0.0,
            ..Default::default()
        };
        let c = sample_input_config_with(5, true, 1, &probs).unwrap();
        assert_eq!(c, InputConfig::images_only(5));
    }

    #[test]
    fn input_config_consistency() {
        for seed in 0..500 {
            let c = sample_input_config(4, seed % 2 == 0, seed).unwrap();
            c.validate().unwrap();
            if !c.draws.geometric {
                assert!(c.views.iter().all(|v| *v == ViewInputs::default()));
            }
            if seed % 2 == 1 {
                assert!(!c.metric_pose_scale_given && !c.metric_depth_scale_given);
                assert!(!c.draws.metric_scale_withheld);
            }
        }
    }

    #[test]
    fn sparsify_counts() {
        let d = DepthAlongRay::dense(Grid::from_fn(40, 25, |u, v| 1.0 + (u * v) as f64)).unwrap();
        assert_eq!(sparsify_depth(&d, 1.0, 3).unwrap(), d);
        let s = sparsify_depth(&d, 0.1, 3).unwrap();
        assert_eq!(s.valid_count(), 100);
        for ((a, b), ok) in s.values().iter().zip(d.values()).zip(s.validity()) {
            if *ok {
                assert_eq!(a.to_bits(), b.to_bits());
            } else {
                assert_eq!(*a, 0.0);
            }
        }
        assert_eq!(sparsify_depth(&d, 0.1, 3).unwrap(), s);
        assert!(sparsify_depth(&d, 0.0, 3).is_err());
    }
}
