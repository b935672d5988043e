use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Weighted CART classifier with Gini impurity. Classes are indices into
/// the caller's class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn fit(
        f: &FeatureMatrix,
        class_idx: &[usize],
        weights: &[f64],
        n_classes: usize,
        max_depth: usize,
    ) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        let rows: Vec<usize> = (0..f.len()).filter(|&i| weights[i] > 0.0).collect();
        let ctx = Ctx {
            f,
            class_idx,
            weights,
            n_classes,
        };
        tree.grow(&ctx, rows, max_depth);
        tree
    }

    fn grow(&mut self, ctx: &Ctx, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let totals = ctx.class_weights(&rows);
        let majority = argmax(&totals);
        self.nodes.push(Node::Leaf { class: majority });
        if depth == 0 || totals.iter().filter(|&&w| w > 0.0).count() < 2 {
            return id;
        }
        let Some((feature, threshold)) = ctx.best_split(&rows, &totals) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| ctx.f.row(i)[feature] <= threshold);
        let left = self.grow(ctx, l, depth - 1);
        let right = self.grow(ctx, r, depth - 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Ctx<'a> {
    f: &'a FeatureMatrix,
    class_idx: &'a [usize],
    weights: &'a [f64],
    n_classes: usize,
}

impl Ctx<'_> {
    fn class_weights(&self, rows: &[usize]) -> Vec<f64> {
        let mut t = vec![0.0; self.n_classes];
        for &i in rows {
            t[self.class_idx[i]] += self.weights[i];
        }
        t
    }

    /// Split minimising the weighted Gini impurity of the children; ties keep
    /// the first feature and lowest threshold found.
    fn best_split(&self, rows: &[usize], totals: &[f64]) -> Option<(usize, f64)> {
        let total: f64 = totals.iter().sum();
        let parent = gini_mass(totals, total);
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = parent - 1e-12 * total;
        let mut order = rows.to_vec();
        let mut left = vec![0.0; self.n_classes];
        for feat in 0..self.f.width() {
            order.sort_by(|&a, &b| self.f.row(a)[feat].total_cmp(&self.f.row(b)[feat]));
            left.iter_mut().for_each(|w| *w = 0.0);
            let mut left_total = 0.0;
            for pair in order.windows(2) {
                let (i, j) = (pair[0], pair[1]);
                left[self.class_idx[i]] += self.weights[i];
                left_total += self.weights[i];
                let (vi, vj) = (self.f.row(i)[feat], self.f.row(j)[feat]);
                if vi == vj {
                    continue;
                }
                let right: Vec<f64> = totals.iter().zip(&left).map(|(t, l)| t - l).collect();
                let score = gini_mass(&left, left_total) + gini_mass(&right, total - left_total);
                if score < best_score {
                    best_score = score;
                    best = Some((feat, vi + (vj - vi) / 2.0));
                }
            }
        }
        best
    }
}

/// Gini impurity times node weight: `W - Σ w_c² / W`.
fn gini_mass(w: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    total - w.iter().map(|x| x * x).sum::<f64>() / total
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_separable_data() {
        let f = FeatureMatrix::from_rows(
            vec![vec![1.0, 9.0], vec![2.0, 9.0], vec![8.0, 9.0], vec![9.0, 9.0]],
            vec![1, 1, 2, 2],
        )
        .unwrap();
        let t = DecisionTree::fit(&f, &[0, 0, 1, 1], &[1.0; 4], 2, 3);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.nodes[0], Node::Split { feature: 0, threshold: 5.0, left: 1, right: 2 });
        assert_eq!(t.predict(&[0.0, 0.0]), 0);
        assert_eq!(t.predict(&[7.0, 0.0]), 1);
    }

    #[test]
    fn depth_zero_is_weighted_majority() {
        let f = FeatureMatrix::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]], vec![1, 2, 2])
            .unwrap();
        let t = DecisionTree::fit(&f, &[0, 1, 1], &[5.0, 1.0, 1.0], 2, 0);
        assert_eq!(t.predict(&[3.0]), 0);
    }
}
