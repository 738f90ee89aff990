//! Extremely Randomized Trees (EXTRA Trees) regression.
//!
//! Every tree is grown on the full dataset. At a splittable node, `K`
//! features are drawn without replacement among those that are not constant
//! on the node, each gets a cut-point drawn uniformly inside the node-local
//! `(min, max)` of that feature, and the candidate with the largest variance
//! reduction wins. Leaves store the mean of their targets.

use std::cmp::Ordering;
use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::stream_rng;

/// Row-major feature matrix with one scalar target per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    dim: usize,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("input rows differ in dimension"));
        }
        Self::from_flat(rows.concat(), dim, targets)
    }

    pub fn from_flat(inputs: Vec<f64>, dim: usize, targets: Vec<f64>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be >= 1"));
        }
        if inputs.len() != dim * targets.len() {
            return Err(Error::invalid(format!(
                "{} input values do not form {} rows of dimension {dim}",
                inputs.len(),
                targets.len()
            )));
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(Self {
            inputs,
            dim,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `(min, max)` of the targets.
    pub fn target_range(&self) -> (f64, f64) {
        self.targets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraTreesParams {
    /// Number of trees `M`.
    pub tree_count: usize,
    /// Candidate splits per node `K`; `None` uses the input dimension.
    pub split_candidates: Option<usize>,
    /// Nodes with fewer samples than this become leaves.
    pub min_leaf_size: usize,
    pub seed: u64,
}

impl Default for ExtraTreesParams {
    fn default() -> Self {
        Self {
            tree_count: 50,
            split_candidates: None,
            min_leaf_size: 2,
            seed: 0,
        }
    }
}

impl ExtraTreesParams {
    pub fn validate(&self) -> Result<()> {
        if self.tree_count == 0 {
            return Err(Error::invalid("tree_count must be >= 1"));
        }
        if self.split_candidates == Some(0) {
            return Err(Error::invalid("split_candidates must be >= 1"));
        }
        if self.min_leaf_size == 0 {
            return Err(Error::invalid("min_leaf_size must be >= 1"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

const LEAF: u32 = u32::MAX;

/// Preorder node record. For a split, the left child immediately follows its
/// parent and `right` holds the offset of the right child; for a leaf,
/// `feature == u32::MAX` and `value` is the prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Node {
    feature: u32,
    value: f64,
    right: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.feature == LEAF {
                return node.value;
            }
            i = if x[node.feature as usize] < node.value {
                i + 1
            } else {
                node.right as usize
            };
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtraTreesForest {
    trees: Vec<Tree>,
    dim: usize,
}

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VersionedForest {
    version: u32,
    forest: ExtraTreesForest,
}

impl ExtraTreesForest {
    pub fn fit(data: &Dataset, params: &ExtraTreesParams) -> Result<Self> {
        TrainingInputs::new(data).fit(&data.targets, params)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Mean of the per-tree leaf values reached by `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    /// Same as [`predict`](Self::predict) without the dimension check.
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for tree in &self.trees {
            let v = tree.predict(x);
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo == hi {
            return lo;
        }
        (sum / self.trees.len() as f64).clamp(lo, hi)
    }

    /// Predictions for the consecutive `dim`-wide rows of `rows`, walking
    /// one tree over every row before the next.
    pub fn predict_rows(&self, rows: &[f64]) -> Vec<f64> {
        let n = rows.len() / self.dim;
        let mut sum = vec![0.0; n];
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for tree in &self.trees {
            for (i, x) in rows.chunks_exact(self.dim).enumerate() {
                let v = tree.predict(x);
                sum[i] += v;
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        let count = self.trees.len() as f64;
        (0..n)
            .map(|i| {
                if lo[i] == hi[i] {
                    lo[i]
                } else {
                    (sum[i] / count).clamp(lo[i], hi[i])
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&VersionedForest {
            version: FOREST_FORMAT_VERSION,
            forest: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: VersionedForest = serde_json::from_str(text)?;
        if v.version != FOREST_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported forest format version {}",
                v.version
            )));
        }
        Ok(v.forest)
    }
}

/// Column-major copy of a feature matrix with rows in a canonical order, so
/// a fitted forest does not depend on the order rows were supplied in.
///
/// The layout only depends on the inputs and can be shared by many fits
/// against different target vectors (one per FQI phase, say).
pub struct TrainingInputs {
    columns: Vec<Vec<f64>>,
    /// `order[j]` is the original row placed at canonical position `j`.
    order: Vec<usize>,
    /// Runs of canonical positions holding identical inputs; targets are
    /// sorted within each run.
    ties: Vec<Range<usize>>,
}

impl TrainingInputs {
    pub fn new(data: &Dataset) -> Self {
        Self::from_flat(&data.inputs, data.dim)
    }

    pub(crate) fn from_flat(inputs: &[f64], dim: usize) -> Self {
        let n = inputs.len() / dim;
        let row = |i: usize| &inputs[i * dim..(i + 1) * dim];
        let cmp_rows = |a: usize, b: usize| {
            row(a)
                .iter()
                .zip(row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cmp_rows(a, b));

        let mut ties = Vec::new();
        let mut start = 0;
        for j in 1..=n {
            if j == n || cmp_rows(order[j - 1], order[j]) != Ordering::Equal {
                if j - start > 1 {
                    ties.push(start..j);
                }
                start = j;
            }
        }
        let columns = (0..dim)
            .map(|f| order.iter().map(|&i| inputs[i * dim + f]).collect())
            .collect();
        Self {
            columns,
            order,
            ties,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Fits a forest to `targets`, given in the original row order.
    pub fn fit(&self, targets: &[f64], params: &ExtraTreesParams) -> Result<ExtraTreesForest> {
        params.validate()?;
        if self.is_empty() {
            return Err(Error::invalid("cannot fit on an empty dataset"));
        }
        if targets.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} targets for {} input rows",
                targets.len(),
                self.len()
            )));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("non-finite regression target"));
        }
        let mut sorted: Vec<f64> = self.order.iter().map(|&i| targets[i]).collect();
        for run in &self.ties {
            sorted[run.clone()].sort_by(f64::total_cmp);
        }
        let k = params.split_candidates.unwrap_or(self.dim());
        let trees = (0..params.tree_count)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(params.seed, t as u64);
                grow_tree(&self.columns, &sorted, k, params.min_leaf_size, &mut rng)
            })
            .collect();
        Ok(ExtraTreesForest {
            trees,
            dim: self.dim(),
        })
    }
}

/// `(min, max)` of a nonempty slice of finite values.
fn range_of(v: &[f64]) -> (f64, f64) {
    const LANES: usize = 4;
    let mut lo = [f64::INFINITY; LANES];
    let mut hi = [f64::NEG_INFINITY; LANES];
    let mut chunks = v.chunks_exact(LANES);
    for c in &mut chunks {
        for k in 0..LANES {
            lo[k] = if c[k] < lo[k] { c[k] } else { lo[k] };
            hi[k] = if c[k] > hi[k] { c[k] } else { hi[k] };
        }
    }
    for &x in chunks.remainder() {
        lo[0] = if x < lo[0] { x } else { lo[0] };
        hi[0] = if x > hi[0] { x } else { hi[0] };
    }
    let lo = lo
        .iter()
        .fold(f64::INFINITY, |a, &b| if b < a { b } else { a });
    let hi = hi
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| if b > a { b } else { a });
    (lo, hi)
}

/// Sum and count of the `ys` whose `xs` fall below `cut`.
fn left_of(xs: &[f64], ys: &[f64], cut: f64) -> (f64, usize) {
    const LANES: usize = 4;
    let mut sums = [0.0; LANES];
    let mut counts = [0usize; LANES];
    let split = xs.len() - xs.len() % LANES;
    for (xc, yc) in xs[..split]
        .chunks_exact(LANES)
        .zip(ys[..split].chunks_exact(LANES))
    {
        for k in 0..LANES {
            let left = xc[k] < cut;
            sums[k] += if left { yc[k] } else { 0.0 };
            counts[k] += left as usize;
        }
    }
    for (&x, &y) in xs[split..].iter().zip(&ys[split..]) {
        if x < cut {
            sums[0] += y;
            counts[0] += 1;
        }
    }
    (sums.iter().sum(), counts.iter().sum())
}

/// Stable partition of `v` by `mask`, left part first.
fn partition(v: &mut [f64], mask: &[bool], scratch: &mut [f64]) {
    let (mut l, mut r) = (0, 0);
    for (i, &m) in mask.iter().enumerate() {
        // `l <= i`, so this never overwrites an unread value.
        let x = v[i];
        v[l] = x;
        scratch[r] = x;
        l += m as usize;
        r += !m as usize;
    }
    v[l..].copy_from_slice(&scratch[..r]);
}

fn grow_tree(
    columns: &[Vec<f64>],
    targets: &[f64],
    k: usize,
    min_leaf_size: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let n = targets.len();
    let dim = columns.len();
    // Working copies, each node's samples kept contiguous.
    let mut x: Vec<Vec<f64>> = columns.to_vec();
    let mut y: Vec<f64> = targets.to_vec();
    let mut mask = vec![false; n];
    let mut scratch = vec![0.0; n];
    let mut nodes: Vec<Node> = Vec::new();
    let mut usable: Vec<(usize, f64, f64)> = Vec::with_capacity(dim);

    // (segment start, segment end, parent whose right-child offset to patch)
    let mut stack: Vec<(usize, usize, Option<usize>)> = vec![(0, n, None)];
    while let Some((lo, hi, patch)) = stack.pop() {
        let me = nodes.len();
        if let Some(parent) = patch {
            nodes[parent].right = me as u32;
        }
        let len = hi - lo;
        let ys = &y[lo..hi];
        let t_sum: f64 = ys.iter().sum();
        let (t_lo, t_hi) = range_of(ys);
        let leaf_value = if t_lo == t_hi {
            t_lo
        } else {
            (t_sum / len as f64).clamp(t_lo, t_hi)
        };

        usable.clear();
        if len >= min_leaf_size && t_lo < t_hi {
            for (f, col) in x.iter().enumerate() {
                let (a, b) = range_of(&col[lo..hi]);
                if a < b {
                    usable.push((f, a, b));
                }
            }
        }
        if usable.is_empty() {
            nodes.push(Node {
                feature: LEAF,
                value: leaf_value,
                right: 0,
            });
            continue;
        }

        let mut best: Option<(usize, f64, f64, usize)> = None;
        for c in 0..k.min(usable.len()) {
            let pick = rng.gen_range(c..usable.len());
            usable.swap(c, pick);
            let (feature, a, b) = usable[c];
            let cut = draw_cut(rng, a, b);
            let (left_sum, left_n) = left_of(&x[feature][lo..hi], ys, cut);
            let right_sum = t_sum - left_sum;
            // Variance reduction up to terms that are constant at this node.
            let score =
                left_sum * left_sum / left_n as f64 + right_sum * right_sum / (len - left_n) as f64;
            if best.is_none_or(|b| score > b.2) {
                best = Some((feature, cut, score, left_n));
            }
        }
        let (feature, cut, _, left_n) = best.expect("at least one candidate");

        for (m, &v) in mask[..len].iter_mut().zip(&x[feature][lo..hi]) {
            *m = v < cut;
        }
        let mask = &mask[..len];
        for col in &mut x {
            partition(&mut col[lo..hi], mask, &mut scratch);
        }
        partition(&mut y[lo..hi], mask, &mut scratch);
        nodes.push(Node {
            feature: feature as u32,
            value: cut,
            right: 0,
        });
        stack.push((lo + left_n, hi, Some(me)));
        stack.push((lo, lo + left_n, None));
    }
    Tree { nodes }
}

/// Uniform draw strictly inside `(a, b)`.
fn draw_cut(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    loop {
        let cut = a + rng.gen::<f64>() * (b - a);
        if cut > a && cut < b {
            return cut;
        }
        if b.next_down() <= a {
            // No representable value strictly inside: split between the two.
            return b;
        }
    }
}
