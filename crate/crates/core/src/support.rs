//! Support of the invariant distribution.
//!
//! For `gamma_bar > 0` the random Riccati equation admits a unique invariant
//! distribution whose support is the closure of
//!
//! ```text
//!     S = { f_{i_1} ∘ ... ∘ f_{i_s}(P*) : s >= 0, i_k in {0, 1} },
//! ```
//!
//! all finite words applied to the deterministic fixed point `P*`. Every
//! element dominates `P*` in the Loewner order. [`enumerate_support`] walks
//! the words breadth-first up to a depth cap, deduplicating matrices that
//! agree within a relative Frobenius tolerance (the word `1` fixes `P*`, so
//! without deduplication the tree would be full binary).
//!
//! For the scalar example `A = sqrt(2), C = Q = R = 1` the support splits
//! into self-similar bands: `S_0 = S ∩ [P*, 3]` and `S_{n+1} = f0(S_n)`, so
//!
//! ```text
//!     S_n ⊂ [2^n (P* + 1) - 1,  2^n * 4 - 1],
//! ```
//!
//! and consecutive bands are separated by the open "holes"
//! `(2^{n+2} - 1, 2^{n+1}(P* + 1) - 1)` of length `2^{n+1} sqrt(2)`, which
//! the support provably never enters. [`scalar_partition`] buckets an atlas
//! into these bands and reports any hole violations.

use crate::error::{Result, RreError};
use crate::maps::{switched_map, Word};
use crate::model::{loewner_leq, SymMatrix, SystemModel, DEFAULT_PSD_TOL};

/// Default relative Frobenius tolerance under which two atlas nodes count as
/// the same matrix.
pub const DEFAULT_DEDUPE_TOL: f64 = 1e-9;

/// Default node budget for [`enumerate_support`].
pub const DEFAULT_MAX_NODES: usize = 1_000_000;

/// Default word-depth cap for [`enumerate_support`].
pub const DEFAULT_DEPTH: usize = 12;

/// One support element: the shortest word that produced it (breadth-first
/// order) and its matrix value.
#[derive(Debug, Clone)]
pub struct SupportNode {
    pub word: Word,
    pub matrix: SymMatrix,
}

/// Deduplicated support elements of all words up to `depth`.
#[derive(Debug, Clone)]
pub struct SupportAtlas {
    pub depth: usize,
    pub dedupe_tol: f64,
    /// False when enumeration stopped early on the node budget.
    pub complete: bool,
    nodes: Vec<SupportNode>,
}

impl SupportAtlas {
    pub fn nodes(&self) -> &[SupportNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// State dimension of the node matrices.
    pub fn dim(&self) -> usize {
        self.nodes[0].matrix.dim()
    }

    /// Sorted scalar values; errors when the nodes are not 1x1.
    pub fn scalar_values(&self) -> Result<Vec<f64>> {
        let mut vals = self
            .nodes
            .iter()
            .map(|n| n.matrix.as_scalar())
            .collect::<Result<Vec<f64>>>()?;
        vals.sort_by(|a, b| a.total_cmp(b));
        Ok(vals)
    }
}

/// Relative Frobenius distance used for deduplication:
/// `|X - Y|_F <= tol * max(1, |X|_F, |Y|_F)`.
fn is_duplicate(x: &SymMatrix, y: &SymMatrix, tol: f64) -> bool {
    let scale = x.frobenius_norm().max(y.frobenius_norm()).max(1.0);
    (x.as_dmatrix() - y.as_dmatrix()).norm() <= tol * scale
}

/// Trace-sorted index over atlas nodes so duplicate lookups only compare
/// against candidates in a narrow trace window
/// (`|tr X - tr Y| <= sqrt(n) |X - Y|_F` bounds the search radius).
struct TraceIndex {
    /// `(trace, node index)` sorted by trace.
    entries: Vec<(f64, usize)>,
}

impl TraceIndex {
    fn new() -> Self {
        TraceIndex { entries: Vec::new() }
    }

    fn find_duplicate(&self, nodes: &[SupportNode], cand: &SymMatrix, tol: f64) -> Option<usize> {
        let dim = cand.dim() as f64;
        let tr = cand.trace();
        // Upper bound for the trace deviation of any in-tolerance duplicate;
        // the factor 2 absorbs the asymmetry of the relative scale.
        let window = 2.0 * dim.sqrt() * tol * cand.frobenius_norm().max(1.0);
        let lo = self
            .entries
            .partition_point(|(t, _)| *t < tr - window);
        for &(t, idx) in &self.entries[lo..] {
            if t > tr + window {
                break;
            }
            if is_duplicate(&nodes[idx].matrix, cand, tol) {
                return Some(idx);
            }
        }
        None
    }

    fn insert(&mut self, trace: f64, idx: usize) {
        let pos = self.entries.partition_point(|(t, _)| *t < trace);
        self.entries.insert(pos, (trace, idx));
    }
}

/// Breadth-first enumeration of all word images of `p_star` up to `depth`,
/// deduplicated at `dedupe_tol`. Only nodes new at a level are expanded at
/// the next one — images of duplicates are duplicates up to the tolerance.
///
/// Every node is checked to dominate `p_star` in the Loewner order (a
/// violation indicates `p_star` is not the DARE fixed point and aborts the
/// enumeration). Exceeding `max_nodes` aborts with a truncation error that
/// carries the partial atlas, flagged incomplete.
pub fn enumerate_support(
    m: &SystemModel,
    p_star: &SymMatrix,
    depth: usize,
    dedupe_tol: f64,
    max_nodes: usize,
) -> Result<SupportAtlas> {
    if p_star.dim() != m.dim_n() {
        return Err(RreError::DimensionMismatch(format!(
            "p_star is {}x{0} but the state dimension is {}",
            p_star.dim(),
            m.dim_n()
        )));
    }
    if !(dedupe_tol > 0.0) {
        return Err(RreError::InvalidArgument(format!(
            "dedupe tolerance must be positive, got {dedupe_tol}"
        )));
    }
    if max_nodes == 0 {
        return Err(RreError::InvalidArgument(
            "node budget must be at least 1".into(),
        ));
    }

    let mut nodes = vec![SupportNode {
        word: Word::empty(),
        matrix: p_star.clone(),
    }];
    let mut index = TraceIndex::new();
    index.insert(p_star.trace(), 0);

    // Indices of the nodes added at the previous level (the expansion front).
    let mut front: Vec<usize> = vec![0];

    for level in 0..depth {
        let mut next_front = Vec::new();
        for &idx in &front {
            let parent_word = nodes[idx].word.clone();
            let parent = nodes[idx].matrix.clone();
            for bit in [false, true] {
                let img = switched_map(m, bit, &parent)?;
                if index.find_duplicate(&nodes, &img, dedupe_tol).is_some() {
                    continue;
                }
                if !loewner_leq(p_star, &img, DEFAULT_PSD_TOL)? {
                    return Err(RreError::Numerical(format!(
                        "support node {} does not dominate p_star; is p_star \
                         the DARE fixed point?",
                        parent_word.prepend(bit)
                    )));
                }
                if nodes.len() >= max_nodes {
                    return Err(RreError::AtlasTruncated {
                        max_nodes,
                        reached_depth: level + 1,
                        partial: Box::new(SupportAtlas {
                            depth,
                            dedupe_tol,
                            complete: false,
                            nodes,
                        }),
                    });
                }
                // The new bit is the outermost letter: images of a word w are
                // the words 0w and 1w.
                let word = parent_word.prepend(bit);
                index.insert(img.trace(), nodes.len());
                next_front.push(nodes.len());
                nodes.push(SupportNode { word, matrix: img });
            }
        }
        front = next_front;
        if front.is_empty() {
            break;
        }
    }

    Ok(SupportAtlas {
        depth,
        dedupe_tol,
        complete: true,
        nodes,
    })
}

/// The scalar band decomposition `S_0, ..., S_{n_max}` with hole bookkeeping.
#[derive(Debug, Clone)]
pub struct ScalarPartition {
    pub n_max: usize,
    /// Sorted node values per band `S_n`.
    pub buckets: Vec<Vec<f64>>,
    /// Closed band intervals `[2^n (P*+1) - 1, 2^n * 4 - 1]`.
    pub bucket_ranges: Vec<(f64, f64)>,
    /// Open holes between consecutive bands (hole `n` follows band `n`).
    pub holes: Vec<(f64, f64)>,
    /// Node values strictly inside a hole — provably impossible, so any
    /// entry indicates a defect.
    pub hole_violations: Vec<f64>,
    /// Values above the last modeled band (atlas deeper than `n_max`).
    pub beyond: Vec<f64>,
}

/// Buckets a scalar atlas into the bands `S_n`, `n <= n_max`. The atlas must
/// come from the scalar example: its root must be `P* = 1 + sqrt(2)`.
pub fn scalar_partition(atlas: &SupportAtlas, n_max: usize) -> Result<ScalarPartition> {
    let values = atlas.scalar_values()?;
    let p_star = 1.0 + std::f64::consts::SQRT_2;
    if (values[0] - p_star).abs() > 1e-9 {
        return Err(RreError::InvalidArgument(format!(
            "scalar partition requires the scalar-example atlas rooted at \
             1 + sqrt(2); smallest node is {}",
            values[0]
        )));
    }

    let lo = |n: u32| 2f64.powi(n as i32) * (p_star + 1.0) - 1.0;
    let hi = |n: u32| 2f64.powi(n as i32) * 4.0 - 1.0;

    let bucket_ranges: Vec<(f64, f64)> = (0..=n_max as u32).map(|n| (lo(n), hi(n))).collect();
    let holes: Vec<(f64, f64)> = (0..=n_max as u32).map(|n| (hi(n), lo(n + 1))).collect();

    let mut buckets = vec![Vec::new(); n_max + 1];
    let mut hole_violations = Vec::new();
    let mut beyond = Vec::new();
    'values: for &v in &values {
        for n in 0..=n_max {
            let (l, h) = bucket_ranges[n];
            let eps = 1e-9 * h.max(1.0);
            if v >= l - eps && v <= h + eps {
                buckets[n].push(v);
                continue 'values;
            }
            let (hl, hh) = holes[n];
            if v > hl + eps && v < hh - eps {
                hole_violations.push(v);
                continue 'values;
            }
        }
        // Between hole n_max's end and +inf: above the modeled range.
        beyond.push(v);
    }

    Ok(ScalarPartition {
        n_max,
        buckets,
        bucket_ranges,
        holes,
        hole_violations,
        beyond,
    })
}

/// Self-similarity check for the scalar atlas: the band `S_1` must equal
/// `2 * S_0 + 1` elementwise once both sides are restricted to nodes created
/// at matching depths (a band-0 node of depth `d` maps to a band-1 node of
/// depth `d + 1`, so band-0 nodes at the atlas's maximal depth have no
/// counterpart and are excluded). Returns the maximal absolute deviation.
pub fn scalar_affine_check(atlas: &SupportAtlas) -> Result<f64> {
    let p_star = 1.0 + std::f64::consts::SQRT_2;
    let mut s0: Vec<f64> = Vec::new();
    let mut s1: Vec<f64> = Vec::new();
    for node in atlas.nodes() {
        let v = node.matrix.as_scalar()?;
        if v <= 3.0 + 1e-9 {
            if node.word.len() < atlas.depth {
                s0.push(v);
            }
        } else if v <= 7.0 + 1e-9 {
            s1.push(v);
        }
    }
    if s0.is_empty() || (s0[0] - p_star).abs() > 1e-9 {
        return Err(RreError::InvalidArgument(
            "affine check requires the scalar-example atlas".into(),
        ));
    }
    if s0.len() != s1.len() {
        return Err(RreError::Numerical(format!(
            "band cardinalities disagree: |S_0 (depth < {})| = {}, |S_1| = {}",
            atlas.depth,
            s0.len(),
            s1.len()
        )));
    }
    s0.sort_by(|a, b| a.total_cmp(b));
    s1.sort_by(|a, b| a.total_cmp(b));
    let mut max_dev: f64 = 0.0;
    for (a, b) in s0.iter().zip(&s1) {
        max_dev = max_dev.max((b - (2.0 * a + 1.0)).abs());
    }
    Ok(max_dev)
}

/// How well a set of sampled covariances is explained by an atlas.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    /// Frobenius radius within which a sample counts as covered.
    pub radius: f64,
    pub sample_count: usize,
    /// Samples within `radius` of some atlas node.
    pub covered_samples: usize,
    /// `covered_samples / sample_count`.
    pub sample_coverage: f64,
    /// Largest nearest-node distance over all samples.
    pub max_nearest_distance: f64,
    /// Depth cap for the node-hit table below.
    pub node_depth: usize,
    /// `(word, hits)` for every node of word length <= `node_depth`.
    pub node_hits: Vec<(String, usize)>,
    /// Fraction of depth-capped nodes hit by at least one sample.
    pub node_hit_fraction: f64,
}

/// Measures (a) the fraction of `samples` lying within `radius` (Frobenius)
/// of some atlas node and (b) which shallow nodes (word length <=
/// `node_depth`) are hit by at least one sample. Samples drawn from the
/// stationary regime should cover the atlas and hit every high-probability
/// shallow node.
pub fn empirical_support_check(
    atlas: &SupportAtlas,
    samples: &[SymMatrix],
    radius: f64,
    node_depth: usize,
) -> Result<CoverageReport> {
    if samples.is_empty() {
        return Err(RreError::InvalidArgument(
            "coverage check requires at least one sample".into(),
        ));
    }
    if !(radius > 0.0) {
        return Err(RreError::InvalidArgument(format!(
            "coverage radius must be positive, got {radius}"
        )));
    }
    let dim = atlas.dim();
    for s in samples {
        if s.dim() != dim {
            return Err(RreError::DimensionMismatch(format!(
                "sample is {}x{0}, atlas nodes are {dim}x{dim}",
                s.dim()
            )));
        }
    }

    // Trace-sorted node list: |tr X - tr Y| <= sqrt(n) |X - Y|_F restricts
    // the candidates for a within-radius match to a trace window.
    let mut by_trace: Vec<(f64, usize)> = atlas
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.matrix.trace(), i))
        .collect();
    by_trace.sort_by(|a, b| a.0.total_cmp(&b.0));
    let window = (dim as f64).sqrt() * radius;

    let nodes = atlas.nodes();
    let mut covered = 0usize;
    let mut max_nearest: f64 = 0.0;
    for s in samples {
        let tr = s.trace();
        let lo = by_trace.partition_point(|(t, _)| *t < tr - window);
        let mut nearest = f64::INFINITY;
        for &(t, idx) in &by_trace[lo..] {
            if t > tr + window {
                break;
            }
            let d = (s.as_dmatrix() - nodes[idx].matrix.as_dmatrix()).norm();
            nearest = nearest.min(d);
            if nearest <= radius {
                break;
            }
        }
        if nearest <= radius {
            covered += 1;
        } else {
            // Outside every window: fall back to the exact nearest node for
            // honest reporting.
            for n in nodes {
                nearest = nearest.min((s.as_dmatrix() - n.matrix.as_dmatrix()).norm());
            }
        }
        max_nearest = max_nearest.max(nearest);
    }

    let mut node_hits = Vec::new();
    let mut hit_count = 0usize;
    for n in nodes.iter().filter(|n| n.word.len() <= node_depth) {
        let hits = samples
            .iter()
            .filter(|s| (s.as_dmatrix() - n.matrix.as_dmatrix()).norm() <= radius)
            .count();
        if hits > 0 {
            hit_count += 1;
        }
        node_hits.push((n.word.to_string(), hits));
    }

    Ok(CoverageReport {
        radius,
        sample_count: samples.len(),
        covered_samples: covered,
        sample_coverage: covered as f64 / samples.len() as f64,
        max_nearest_distance: max_nearest,
        node_depth,
        node_hit_fraction: hit_count as f64 / node_hits.len() as f64,
        node_hits,
    })
}
