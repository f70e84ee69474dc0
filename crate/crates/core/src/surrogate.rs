//! Tree-ensemble surrogate with an uncertainty estimate.
//!
//! The model is a forest of randomized regression trees, each trained on the
//! full data set (no bagging): at every node a uniformly random threshold is
//! drawn inside the observed range of each splittable feature and the split
//! with the lowest weighted child variance wins. Disagreement between trees
//! is the variance estimate. Because every tree sees all rows, a fully grown
//! forest predicts noise-free training points exactly, with zero variance.

use rand::Rng;

use crate::space::{Assignment, Domain, SearchSpace, Value};

/// Forest shape knobs.
#[derive(Debug, Clone, Copy)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// Nodes with fewer rows than this become leaves.
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 25,
            min_samples_split: 3,
        }
    }
}

/// Maps assignments over one space to fixed-width numeric rows: one column
/// per numeric variable (log10 for log-scaled ones), one-hot columns per
/// categorical variable.
#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    columns: Vec<Column>,
    width: usize,
}

#[derive(Debug, Clone)]
enum Column {
    Numeric { name: String, log_scale: bool },
    OneHot { name: String, labels: Vec<String> },
}

impl FeatureEncoder {
    pub fn new(space: &SearchSpace) -> Self {
        let mut columns = Vec::new();
        let mut width = 0;
        for var in space.variables() {
            match var.domain() {
                Domain::Continuous { log_scale, .. } => {
                    columns.push(Column::Numeric {
                        name: var.name().to_string(),
                        log_scale: *log_scale,
                    });
                    width += 1;
                }
                Domain::Integer { .. } => {
                    columns.push(Column::Numeric {
                        name: var.name().to_string(),
                        log_scale: false,
                    });
                    width += 1;
                }
                Domain::Categorical { labels } => {
                    width += labels.len();
                    columns.push(Column::OneHot {
                        name: var.name().to_string(),
                        labels: labels.clone(),
                    });
                }
            }
        }
        FeatureEncoder { columns, width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Encodes the bindings this encoder knows about; the assignment may
    /// bind more (e.g. a full assignment when the encoder covers a reduced
    /// space).
    pub fn encode(&self, a: &Assignment) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.width);
        for col in &self.columns {
            match col {
                Column::Numeric { name, log_scale } => {
                    let x = a
                        .get(name)
                        .and_then(Value::as_f64)
                        .unwrap_or_else(|| panic!("encoder: `{name}` missing or non-numeric"));
                    row.push(if *log_scale { x.log10() } else { x });
                }
                Column::OneHot { name, labels } => {
                    let label = a
                        .get(name)
                        .and_then(Value::as_label)
                        .unwrap_or_else(|| panic!("encoder: `{name}` missing or non-categorical"));
                    for l in labels {
                        row.push(if l == label { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        row
    }
}

enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

struct Tree {
    root: Node,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// Randomized regression forest over encoded rows.
pub struct RandomForest {
    trees: Vec<Tree>,
}

impl RandomForest {
    /// Trains a forest on `rows`/`targets`. Rows must be non-empty and
    /// rectangular.
    pub fn fit<R: Rng + ?Sized>(
        rows: &[Vec<f64>],
        targets: &[f64],
        config: ForestConfig,
        rng: &mut R,
    ) -> Self {
        assert!(!rows.is_empty(), "cannot fit a forest on zero rows");
        assert_eq!(rows.len(), targets.len());
        let min_split = config.min_samples_split.max(2);
        let trees = (0..config.num_trees.max(1))
            .map(|_| {
                let mut indices: Vec<usize> = (0..rows.len()).collect();
                Tree {
                    root: grow(rows, targets, &mut indices, min_split, rng),
                }
            })
            .collect();
        RandomForest { trees }
    }

    /// Mean and variance of the per-tree predictions at `row`. The variance
    /// is taken across trees and is never negative; the two-pass form keeps
    /// it at an exact zero when every tree agrees.
    pub fn predict(&self, row: &[f64]) -> (f64, f64) {
        let n = self.trees.len() as f64;
        let predictions: Vec<f64> = self.trees.iter().map(|t| t.predict(row)).collect();
        if predictions.windows(2).all(|w| w[0] == w[1]) {
            return (predictions[0], 0.0);
        }
        let mean = predictions.iter().sum::<f64>() / n;
        let var = predictions
            .iter()
            .map(|p| (p - mean) * (p - mean))
            .sum::<f64>()
            / n;
        (mean, var)
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }
}

fn grow<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    targets: &[f64],
    indices: &mut [usize],
    min_split: usize,
    rng: &mut R,
) -> Node {
    let leaf = |idx: &[usize]| {
        Node::Leaf(idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64)
    };
    if indices.len() < min_split {
        return leaf(indices);
    }
    let first = targets[indices[0]];
    if indices.iter().all(|&i| targets[i] == first) {
        return Node::Leaf(first);
    }

    // One uniformly random threshold per feature with spread; keep the split
    // with the lowest weighted child variance.
    let width = rows[indices[0]].len();
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in 0..width {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in indices.iter() {
            let x = rows[i][feature];
            lo = lo.min(x);
            hi = hi.max(x);
        }
        if !(hi > lo) {
            continue;
        }
        let mut threshold = lo + rng.random::<f64>() * (hi - lo);
        if threshold >= hi {
            // Rounding can land on the upper edge, which would empty the
            // right side; the lower edge always splits.
            threshold = lo;
        }
        let score = split_score(rows, targets, indices, feature, threshold);
        if best.map_or(true, |(s, _, _)| score < s) {
            best = Some((score, feature, threshold));
        }
    }
    let Some((_, feature, threshold)) = best else {
        // Identical rows with differing targets: nothing left to split on.
        return leaf(indices);
    };

    let mid = partition(rows, indices, feature, threshold);
    let (left_idx, right_idx) = indices.split_at_mut(mid);
    let left = grow(rows, targets, left_idx, min_split, rng);
    let right = grow(rows, targets, right_idx, min_split, rng);
    Node::Split {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Weighted sum of child squared deviations for the candidate split.
fn split_score(
    rows: &[Vec<f64>],
    targets: &[f64],
    indices: &[usize],
    feature: usize,
    threshold: f64,
) -> f64 {
    let mut stats = [(0.0f64, 0.0f64, 0usize); 2];
    for &i in indices {
        let side = usize::from(rows[i][feature] > threshold);
        let (sum, sumsq, n) = &mut stats[side];
        *sum += targets[i];
        *sumsq += targets[i] * targets[i];
        *n += 1;
    }
    stats
        .iter()
        .filter(|(_, _, n)| *n > 0)
        .map(|(sum, sumsq, n)| sumsq - sum * sum / *n as f64)
        .sum()
}

/// In-place partition of `indices` by the split predicate; returns the size
/// of the left side.
fn partition(rows: &[Vec<f64>], indices: &mut [usize], feature: usize, threshold: f64) -> usize {
    let mut mid = 0;
    for i in 0..indices.len() {
        if rows[indices[i]][feature] <= threshold {
            indices.swap(mid, i);
            mid += 1;
        }
    }
    mid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{SearchSpace, Variable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_rows() -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                let (x, y) = (i as f64 / 5.0, j as f64 / 5.0);
                rows.push(vec![x, y]);
                ys.push((x - 0.3).powi(2) + 2.0 * (y - 0.7).powi(2));
            }
        }
        (rows, ys)
    }

    #[test]
    fn forest_tracks_a_smooth_function() {
        let (rows, ys) = grid_rows();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let forest = RandomForest::fit(&rows, &ys, ForestConfig::default(), &mut rng);
        assert_eq!(forest.num_trees(), 25);
        let (mean, var) = forest.predict(&[0.3, 0.7]);
        assert!(mean < 0.15, "prediction near the minimum too high: {mean}");
        assert!(var >= 0.0);
    }

    #[test]
    fn fully_grown_forest_is_exact_at_training_points() {
        let (rows, ys) = grid_rows();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let config = ForestConfig {
            num_trees: 25,
            min_samples_split: 2,
        };
        let forest = RandomForest::fit(&rows, &ys, config, &mut rng);
        for (row, y) in rows.iter().zip(&ys) {
            let (mean, var) = forest.predict(row);
            assert!((mean - y).abs() < 1e-12, "mean {mean} vs target {y}");
            assert_eq!(var, 0.0);
        }
    }

    #[test]
    fn constant_targets_predict_exactly() {
        let rows = vec![vec![0.0], vec![0.5], vec![1.0]];
        let ys = vec![2.5, 2.5, 2.5];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let forest = RandomForest::fit(&rows, &ys, ForestConfig::default(), &mut rng);
        let (mean, var) = forest.predict(&[0.25]);
        assert_eq!(mean, 2.5);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn fit_is_deterministic_for_equal_seeds() {
        let (rows, ys) = grid_rows();
        let f1 = RandomForest::fit(
            &rows,
            &ys,
            ForestConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        let f2 = RandomForest::fit(
            &rows,
            &ys,
            ForestConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        for probe in [[0.1, 0.9], [0.5, 0.5], [0.77, 0.13]] {
            assert_eq!(f1.predict(&probe), f2.predict(&probe));
        }
    }

    #[test]
    fn encoder_one_hot_and_log_columns() {
        let space = SearchSpace::new(vec![
            Variable::log_continuous("lr", 1e-4, 1.0).unwrap(),
            Variable::integer("depth", 1, 8).unwrap(),
            Variable::categorical("kernel", ["linear", "rbf", "poly"]).unwrap(),
        ])
        .unwrap();
        let enc = FeatureEncoder::new(&space);
        assert_eq!(enc.width(), 5);
        let mut a = Assignment::new();
        a.bind("lr", Value::Real(1e-2));
        a.bind("depth", Value::Int(3));
        a.bind("kernel", Value::Cat("rbf".into()));
        let row = enc.encode(&a);
        assert!((row[0] - -2.0).abs() < 1e-12);
        assert_eq!(row[1], 3.0);
        assert_eq!(&row[2..], &[0.0, 1.0, 0.0]);
    }
}
