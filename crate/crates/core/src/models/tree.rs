//! Binary decision trees grown over exact value bins.
//!
//! Every feature is discretized by its sorted unique values on the training
//! rows, so histogram split search is exact: a boundary between two adjacent
//! non-empty bins is the midpoint of their values, the usual CART candidate.
//! The same grower serves Gini classification trees and the second-order
//! regression trees used by boosting; only the [`Criterion`] differs.

use serde::{Deserialize, Serialize};

use crate::dataset::{EncodedDataset, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 5,
            min_samples_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Argument("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Argument("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn constant(value: f64, n_samples: usize) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value, n_samples }],
        }
    }

    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match &self.nodes[self.leaf_of(row)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub(crate) fn set_leaf_value(&mut self, node: usize, v: f64) {
        if let Node::Leaf { value, .. } = &mut self.nodes[node] {
            *value = v;
        }
    }
}

/// Features discretized to their sorted unique training values.
pub(crate) struct Binned {
    /// Per feature, the bin of every row.
    bins: Vec<Vec<u32>>,
    /// Per feature, the value of every bin in ascending order.
    values: Vec<Vec<f64>>,
}

impl Binned {
    pub fn new(x: &Matrix) -> Self {
        let n = x.n_rows();
        let mut bins = Vec::with_capacity(x.n_cols());
        let mut values = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let column: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
            let mut uniq = column.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            let b = column
                .iter()
                .map(|v| uniq.binary_search_by(|u| u.total_cmp(v)).unwrap() as u32)
                .collect();
            bins.push(b);
            values.push(uniq);
        }
        Binned { bins, values }
    }

    fn n_features(&self) -> usize {
        self.bins.len()
    }
}

/// Additive per-row statistics accumulated in histograms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Stats {
    pub count: f64,
    pub a: f64,
    pub b: f64,
}

impl Stats {
    fn add(&mut self, o: &Stats) {
        self.count += o.count;
        self.a += o.a;
        self.b += o.b;
    }

    fn minus(&self, o: &Stats) -> Stats {
        Stats {
            count: self.count - o.count,
            a: self.a - o.a,
            b: self.b - o.b,
        }
    }
}

pub(crate) trait Criterion {
    /// Larger is better; a split's quality is `score(left) + score(right)`.
    fn score(&self, s: &Stats) -> f64;
    fn leaf_value(&self, s: &Stats) -> f64;
    fn admissible(&self, left: &Stats, right: &Stats) -> bool;
    /// Node cannot be improved by splitting.
    fn terminal(&self, s: &Stats) -> bool;
    /// Whether a split improving the parent score by `gain` is taken.
    fn accept(&self, gain: f64) -> bool;
}

/// Gini impurity on 0/1 targets; `a` holds the positive count.
pub(crate) struct Gini {
    pub min_samples_leaf: usize,
}

impl Criterion for Gini {
    fn score(&self, s: &Stats) -> f64 {
        // n - weighted Gini impurity = (p^2 + q^2) / n
        let q = s.count - s.a;
        (s.a * s.a + q * q) / s.count
    }

    fn leaf_value(&self, s: &Stats) -> f64 {
        s.a / s.count
    }

    fn admissible(&self, l: &Stats, r: &Stats) -> bool {
        l.count >= self.min_samples_leaf as f64 && r.count >= self.min_samples_leaf as f64
    }

    fn terminal(&self, s: &Stats) -> bool {
        s.a == 0.0 || s.a == s.count
    }

    fn accept(&self, _gain: f64) -> bool {
        // zero-gain splits are taken: a split may only pay off one level down (XOR)
        true
    }
}

/// Newton regression on gradients `a` and hessians `b` with L2 weight `lambda`.
pub(crate) struct Newton {
    pub min_samples_leaf: usize,
    pub min_child_hessian: f64,
    pub lambda: f64,
}

impl Criterion for Newton {
    fn score(&self, s: &Stats) -> f64 {
        let denom = s.b + self.lambda;
        if denom <= 0.0 {
            0.0
        } else {
            s.a * s.a / denom
        }
    }

    fn leaf_value(&self, s: &Stats) -> f64 {
        let denom = s.b + self.lambda;
        if denom <= 0.0 {
            0.0
        } else {
            -s.a / denom
        }
    }

    fn admissible(&self, l: &Stats, r: &Stats) -> bool {
        l.count >= self.min_samples_leaf as f64
            && r.count >= self.min_samples_leaf as f64
            && l.b >= self.min_child_hessian
            && r.b >= self.min_child_hessian
    }

    fn terminal(&self, _s: &Stats) -> bool {
        false
    }

    fn accept(&self, gain: f64) -> bool {
        gain > 1e-12
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

pub(crate) struct GrownTree {
    pub tree: Tree,
    /// For every leaf node index, the training rows that reached it.
    pub leaves: Vec<(usize, Vec<usize>)>,
}

/// Grows a tree on `rows` with per-row statistics `stats`.
pub(crate) fn grow<C: Criterion>(
    binned: &Binned,
    stats: &[Stats],
    rows: Vec<usize>,
    max_depth: usize,
    criterion: &C,
) -> GrownTree {
    let mut grower = Grower {
        binned,
        stats,
        criterion,
        max_depth,
        nodes: Vec::new(),
        leaves: Vec::new(),
        hist: binned.values.iter().map(|v| vec![Stats::default(); v.len()]).collect(),
    };
    grower.build(rows, 0);
    GrownTree {
        tree: Tree {
            nodes: grower.nodes,
        },
        leaves: grower.leaves,
    }
}

struct Grower<'a, C> {
    binned: &'a Binned,
    stats: &'a [Stats],
    criterion: &'a C,
    max_depth: usize,
    nodes: Vec<Node>,
    leaves: Vec<(usize, Vec<usize>)>,
    hist: Vec<Vec<Stats>>,
}

impl<C: Criterion> Grower<'_, C> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let mut total = Stats::default();
        for &r in &rows {
            total.add(&self.stats[r]);
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.criterion.leaf_value(&total),
            n_samples: rows.len(),
        });

        if depth >= self.max_depth || self.criterion.terminal(&total) {
            self.leaves.push((id, rows));
            return id;
        }
        let Some(best) = self.best_split(&rows, &total) else {
            self.leaves.push((id, rows));
            return id;
        };
        if !self.criterion.accept(best.score - self.criterion.score(&total)) {
            self.leaves.push((id, rows));
            return id;
        }

        let bins = &self.binned.bins[best.feature];
        let values = &self.binned.values[best.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| values[bins[r] as usize] <= best.threshold);
        let n_samples = rows.len();
        drop(rows);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            n_samples,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize], total: &Stats) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for f in 0..self.binned.n_features() {
            let hist = &mut self.hist[f];
            hist.iter_mut().for_each(|h| *h = Stats::default());
            let bins = &self.binned.bins[f];
            for &r in rows {
                hist[bins[r] as usize].add(&self.stats[r]);
            }
            let values = &self.binned.values[f];
            let mut left = Stats::default();
            let mut prev: Option<usize> = None;
            for (b, h) in hist.iter().enumerate() {
                if h.count == 0.0 {
                    continue;
                }
                if let Some(p) = prev {
                    let right = total.minus(&left);
                    if self.criterion.admissible(&left, &right) {
                        let score = self.criterion.score(&left) + self.criterion.score(&right);
                        // ties keep the earlier (lower feature, lower threshold) candidate
                        let better = match &best {
                            None => true,
                            Some(c) => score > c.score + 1e-12 * c.score.abs().max(1.0),
                        };
                        if better {
                            best = Some(Candidate {
                                feature: f,
                                threshold: 0.5 * (values[p] + values[b]),
                                score,
                            });
                        }
                    }
                }
                left.add(h);
                prev = Some(b);
            }
        }
        best
    }
}

/// CART classification tree with Gini splits; leaves hold positive fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub params: TreeParams,
    pub n_features: usize,
    pub tree: Tree,
}

impl TreeModel {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.tree.predict(row)
    }
}

pub fn train_tree(ds: &EncodedDataset, params: &TreeParams) -> Result<TreeModel> {
    params.validate()?;
    if ds.n_rows() == 0 {
        return Err(Error::Argument("cannot grow a tree on an empty dataset".into()));
    }
    let binned = Binned::new(&ds.x);
    let stats: Vec<Stats> = ds
        .y
        .iter()
        .map(|&y| Stats {
            count: 1.0,
            a: y as f64,
            b: 0.0,
        })
        .collect();
    let grown = grow(
        &binned,
        &stats,
        (0..ds.n_rows()).collect(),
        params.max_depth,
        &Gini {
            min_samples_leaf: params.min_samples_leaf,
        },
    );
    Ok(TreeModel {
        params: *params,
        n_features: ds.n_features(),
        tree: grown.tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureInfo, FeatureKind};
    use proptest::prelude::*;

    pub(crate) fn dataset(rows: &[Vec<f64>], y: &[u8]) -> EncodedDataset {
        let x = Matrix::from_rows(rows).unwrap();
        let d = x.n_cols();
        EncodedDataset::new(
            x,
            y.to_vec(),
            vec![1; y.len()],
            (0..d)
                .map(|j| FeatureInfo {
                    name: format!("f{j}"),
                    origin: format!("f{j}"),
                    kind: FeatureKind::Continuous,
                })
                .collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn pure_data_is_single_leaf() {
        let ds = dataset(&[vec![1.0], vec![2.0], vec![3.0]], &[1, 1, 1]);
        let m = train_tree(&ds, &TreeParams::default()).unwrap();
        assert_eq!(m.tree.nodes.len(), 1);
        assert_eq!(m.score(&[10.0]), 1.0);
    }

    #[test]
    fn xor_needs_depth_two() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let ds = dataset(&rows, &y);
        let m = train_tree(&ds, &TreeParams::default()).unwrap();
        assert_eq!(m.tree.depth(), 2);
        for (r, &t) in rows.iter().zip(&y) {
            assert_eq!(m.score(r), t as f64);
        }
        // with equal Gini everywhere, feature 0 at 0.5 wins the tie
        match &m.tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => assert_eq!((*feature, *threshold), (0, 0.5)),
            _ => panic!(),
        }
    }

    #[test]
    fn depth_one_stump() {
        let ds = dataset(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]], &[0, 0, 1, 1]);
        let m = train_tree(
            &ds,
            &TreeParams {
                max_depth: 1,
                min_samples_leaf: 1,
            },
        )
        .unwrap();
        assert_eq!(m.tree.depth(), 1);
        assert_eq!(m.score(&[2.4]), 0.0);
        assert_eq!(m.score(&[2.6]), 1.0);
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = dataset(&[], &[]);
        assert!(matches!(train_tree(&ds, &TreeParams::default()), Err(Error::Argument(_))));
    }

    #[test]
    fn bad_params() {
        assert!(TreeParams {
            max_depth: 0,
            min_samples_leaf: 1
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn structural_invariants(
            data in prop::collection::vec((0u8..4, 0u8..3, any::<bool>()), 1..80),
            max_depth in 1usize..6,
            min_leaf in 1usize..4,
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|(a, b, _)| vec![*a as f64, *b as f64]).collect();
            let y: Vec<u8> = data.iter().map(|(_, _, c)| *c as u8).collect();
            let ds = dataset(&rows, &y);
            let params = TreeParams { max_depth, min_samples_leaf: min_leaf };
            let binned = Binned::new(&ds.x);
            let stats: Vec<Stats> = y.iter().map(|&v| Stats { count: 1.0, a: v as f64, b: 0.0 }).collect();
            let grown = grow(&binned, &stats, (0..y.len()).collect(), max_depth, &Gini { min_samples_leaf: min_leaf });
            prop_assert!(grown.tree.depth() <= max_depth);
            // leaves partition the rows and hold exact positive fractions
            let mut seen = vec![0; y.len()];
            for (leaf, rows) in &grown.leaves {
                prop_assert!(rows.len() >= min_leaf.min(y.len()));
                let pos = rows.iter().filter(|&&r| y[r] == 1).count();
                match &grown.tree.nodes[*leaf] {
                    Node::Leaf { value, n_samples } => {
                        prop_assert_eq!(*n_samples, rows.len());
                        prop_assert_eq!(*value, pos as f64 / rows.len() as f64);
                    }
                    _ => prop_assert!(false),
                }
                for &r in rows {
                    seen[r] += 1;
                    prop_assert_eq!(grown.tree.leaf_of(&rows_of(&ds, r)), *leaf);
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            // children partition their parent
            for node in &grown.tree.nodes {
                if let Node::Split { left, right, n_samples, .. } = node {
                    let n = |i: usize| match &grown.tree.nodes[i] {
                        Node::Leaf { n_samples, .. } | Node::Split { n_samples, .. } => *n_samples,
                    };
                    prop_assert_eq!(n(*left) + n(*right), *n_samples);
                }
            }
            let m = train_tree(&ds, &params).unwrap();
            prop_assert_eq!(m.tree, grown.tree);
        }
    }

    fn rows_of(ds: &EncodedDataset, r: usize) -> Vec<f64> {
        ds.row(r).to_vec()
    }
}
