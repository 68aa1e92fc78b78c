//! Bagged decision-tree ensemble (random forest) trained from scratch.
//!
//! Each tree sees a bootstrap sample and, at every node, a random subset of
//! `max(1, floor(sqrt(F)))` candidate features. Splits minimise the weighted
//! Gini impurity of the children. Continuous and ordinal features split on a
//! threshold; categorical features split on a set of codes, found by sorting
//! the present codes by their class-1 rate and scanning prefixes (optimal
//! for binary Gini). The ensemble predicts by majority vote with ties going
//! to class 0.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{kfold_indices, Class, Dataset, FeatureKind};
use crate::model::{accuracy, Predictor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitRule {
    /// `x <= threshold` goes left.
    LessEq { threshold: f64 },
    /// Code in `codes` (sorted) goes left; unseen codes go right.
    InSet { codes: Vec<u32> },
}

impl SplitRule {
    fn goes_left(&self, value: f64) -> bool {
        match self {
            SplitRule::LessEq { threshold } => value <= *threshold,
            SplitRule::InSet { codes } => codes.binary_search(&(value as u32)).is_ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: Class,
    },
    Split {
        feature: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
    },
}

/// Node arena with the root at index 0. Children always sit at higher
/// indices than their parent, so traversal terminates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(class: Class) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf { class }],
        }
    }

    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        let tree = DecisionTree { nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidModel("tree without nodes".into()));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = node {
                for &child in [left, right] {
                    if child <= id || child >= self.nodes.len() {
                        return Err(Error::InvalidModel(format!(
                            "node {id} has invalid child {child}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub fn predict(&self, x: &[f64]) -> Class {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                } => id = if rule.goes_left(x[*feature]) { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    trees: Vec<DecisionTree>,
    n_features: usize,
    max_depth: usize,
    seed: u64,
}

impl TreeEnsembleModel {
    /// Assemble an ensemble from prebuilt trees.
    pub fn from_trees(trees: Vec<DecisionTree>, n_features: usize) -> Result<Self> {
        let model = TreeEnsembleModel {
            max_depth: trees.iter().map(DecisionTree::depth).max().unwrap_or(0),
            trees,
            n_features,
            seed: 0,
        };
        model.validate()?;
        Ok(model)
    }

    /// Structural checks for deserialized models.
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::InvalidModel("ensemble without trees".into()));
        }
        for t in &self.trees {
            t.validate()?;
            if t.max_feature().is_some_and(|f| f >= self.n_features) {
                return Err(Error::InvalidModel("split on out-of-range feature".into()));
            }
        }
        Ok(())
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn votes(&self, x: &[f64]) -> usize {
        self.trees
            .iter()
            .filter(|t| t.predict(x) == Class::Undesirable)
            .count()
    }
}

impl Predictor for TreeEnsembleModel {
    fn predict(&self, x: &[f64]) -> Result<Class> {
        if x.len() != self.n_features {
            return Err(Error::SchemaMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let ones = self.votes(x);
        Ok(if 2 * ones > self.trees.len() {
            Class::Undesirable
        } else {
            Class::Desirable
        })
    }
}

pub fn train_forest(
    train: &Dataset,
    n_trees: usize,
    max_depth: usize,
    seed: u64,
) -> Result<TreeEnsembleModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_trees == 0 {
        return Err(Error::InvalidModel("n_trees must be at least 1".into()));
    }
    let ones = train.count_class(Class::Undesirable);
    if ones == 0 || ones == train.len() {
        return Err(Error::SingleClass);
    }
    let n_features = train.n_features();
    let max_features = (libm::floor(libm::sqrt(n_features as f64)) as usize).max(1);
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let n = train.len();
        let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut grower = Grower {
            ds: train,
            max_features,
            max_depth,
            nodes: Vec::new(),
        };
        grower.grow(sample, 0, &mut rng);
        trees.push(DecisionTree {
            nodes: grower.nodes,
        });
    }
    Ok(TreeEnsembleModel {
        trees,
        n_features,
        max_depth,
        seed,
    })
}

/// Unstratified k-fold cross-validated accuracy of `train_forest`.
pub fn cross_validate(
    ds: &Dataset,
    folds: usize,
    n_trees: usize,
    max_depth: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(folds);
    for (train_idx, test_idx) in kfold_indices(ds.len(), folds, seed)? {
        let train = ds.subset(&train_idx);
        let test = ds.subset(&test_idx);
        let model = train_forest(&train, n_trees, max_depth, seed)?;
        scores.push(accuracy(&model, test.rows(), test.labels())?);
    }
    Ok(scores)
}

struct Grower<'a> {
    ds: &'a Dataset,
    max_features: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    rule: SplitRule,
    /// Sum over children of (n0^2 + n1^2) / n; larger means purer.
    purity: f64,
}

fn side_purity(n: usize, ones: usize) -> f64 {
    let zeros = n - ones;
    ((zeros * zeros + ones * ones) as f64) / n as f64
}

impl Grower<'_> {
    fn grow(&mut self, sample: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = sample.len();
        let ones = sample
            .iter()
            .filter(|&&i| self.ds.label(i) == Class::Undesirable)
            .count();
        let majority = if 2 * ones > n {
            Class::Undesirable
        } else {
            Class::Desirable
        };
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority });
        if ones == 0 || ones == n || depth >= self.max_depth || n < 2 {
            return id;
        }
        let Some(best) = self.best_split(&sample, rng) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = sample
            .iter()
            .partition(|&&i| best.rule.goes_left(self.ds.row(i)[best.feature]));
        let left_id = self.grow(left, depth + 1, rng);
        let right_id = self.grow(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            rule: best.rule,
            left: left_id,
            right: right_id,
        };
        id
    }

    /// Visit features in random order; stop once `max_features` features
    /// have been examined and at least one valid split exists.
    fn best_split(&self, sample: &[usize], rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let mut order: Vec<usize> = (0..self.ds.n_features()).collect();
        order.shuffle(rng);
        let mut best: Option<Candidate> = None;
        for (visited, &j) in order.iter().enumerate() {
            if visited >= self.max_features && best.is_some() {
                break;
            }
            let cand = match self.ds.schema().feature(j).kind {
                FeatureKind::Categorical => self.set_split(j, sample),
                FeatureKind::Ordinal | FeatureKind::Continuous => self.threshold_split(j, sample),
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.purity > b.purity) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn threshold_split(&self, j: usize, sample: &[usize]) -> Option<Candidate> {
        let mut pts: Vec<(f64, bool)> = sample
            .iter()
            .map(|&i| (self.ds.row(i)[j], self.ds.label(i) == Class::Undesirable))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pts.len();
        let total_ones = pts.iter().filter(|p| p.1).count();
        let mut left_ones = 0;
        let mut best: Option<(f64, f64)> = None;
        for i in 0..n - 1 {
            if pts[i].1 {
                left_ones += 1;
            }
            let (a, b) = (pts[i].0, pts[i + 1].0);
            if a < b {
                let nl = i + 1;
                let purity = side_purity(nl, left_ones) + side_purity(n - nl, total_ones - left_ones);
                if best.is_none_or(|(p, _)| purity > p) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some((purity, threshold));
                }
            }
        }
        best.map(|(purity, threshold)| Candidate {
            feature: j,
            rule: SplitRule::LessEq { threshold },
            purity,
        })
    }

    fn set_split(&self, j: usize, sample: &[usize]) -> Option<Candidate> {
        let k = self.ds.schema().feature(j).n_categories();
        let mut counts = vec![(0usize, 0usize); k];
        for &i in sample {
            let c = &mut counts[self.ds.row(i)[j] as usize];
            c.0 += 1;
            if self.ds.label(i) == Class::Undesirable {
                c.1 += 1;
            }
        }
        let mut present: Vec<usize> = (0..k).filter(|&c| counts[c].0 > 0).collect();
        if present.len() < 2 {
            return None;
        }
        // ascending class-1 rate, ties by code
        present.sort_by(|&a, &b| {
            let (na, oa) = counts[a];
            let (nb, ob) = counts[b];
            (oa * nb).cmp(&(ob * na)).then(a.cmp(&b))
        });
        let n = sample.len();
        let total_ones: usize = present.iter().map(|&c| counts[c].1).sum();
        let (mut nl, mut ol) = (0, 0);
        let mut best: Option<(f64, usize)> = None;
        for (p, &c) in present[..present.len() - 1].iter().enumerate() {
            nl += counts[c].0;
            ol += counts[c].1;
            let purity = side_purity(nl, ol) + side_purity(n - nl, total_ones - ol);
            if best.is_none_or(|(b, _)| purity > b) {
                best = Some((purity, p + 1));
            }
        }
        best.map(|(purity, prefix)| {
            let mut codes: Vec<u32> = present[..prefix].iter().map(|&c| c as u32).collect();
            codes.sort_unstable();
            Candidate {
                feature: j,
                rule: SplitRule::InSet { codes },
                purity,
            }
        })
    }
}
