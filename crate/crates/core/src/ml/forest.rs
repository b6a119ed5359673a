use rand::seq::SliceRandom;
use rand::Rng;

use super::{column, output_seed, Hyperparams, MaxFeatures};
use crate::error::Result;
use crate::pop::Dataset;
use crate::seed;

const LEAF: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node {
    feature: usize,
    threshold: f64,
    left: usize,
    right: usize,
    depth: usize,
    value: f64,
}

/// CART regression tree grown by variance reduction.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

struct Grower<'a> {
    /// Column-major features, `cols[f * k + i]`.
    cols: &'a [f64],
    k: usize,
    q: usize,
    y: &'a [f64],
    max_depth: Option<usize>,
    max_features: MaxFeatures,
    /// Per feature, the samples of each node sorted by that feature; every
    /// node owns the same range in all of them.
    order: Vec<Vec<usize>>,
    scratch: Vec<usize>,
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn x(&self, i: usize, f: usize) -> f64 {
        self.cols[f * self.k + i]
    }

    fn features(&self, node_seed: u64) -> Vec<usize> {
        match self.max_features {
            MaxFeatures::All => (0..self.q).collect(),
            MaxFeatures::Sqrt => {
                let take = ((self.q as f64).sqrt().floor() as usize).max(1);
                let mut all: Vec<usize> = (0..self.q).collect();
                all.shuffle(&mut seed::rng(node_seed));
                let mut f = all[..take].to_vec();
                f.sort_unstable();
                f
            }
        }
    }

    /// Best `(feature, threshold)` by weighted child variance; ties go to
    /// the lowest feature and then the lowest threshold.
    fn best_split(&self, a: usize, b: usize, total: f64, node_seed: u64) -> Option<(usize, f64)> {
        let n = (b - a) as f64;
        let parent = total * total / n;
        let mut best: Option<(f64, usize, f64)> = None;
        for f in self.features(node_seed) {
            let ord = &self.order[f][a..b];
            let mut left = 0.0;
            for s in 0..ord.len() - 1 {
                left += self.y[ord[s]];
                let (lo, hi) = (self.x(ord[s], f), self.x(ord[s + 1], f));
                if lo == hi {
                    continue;
                }
                let nl = (s + 1) as f64;
                let right = total - left;
                let score = left * left / nl + right * right / (n - nl);
                if best.map_or(true, |(b, _, _)| score > b) {
                    let mid = 0.5 * (lo + hi);
                    let thr = if mid < hi { mid } else { lo };
                    best = Some((score, f, thr));
                }
            }
        }
        let (score, f, thr) = best?;
        (score > parent + 1e-12 * parent.abs().max(1e-300)).then_some((f, thr))
    }

    /// Stable partition of every feature's range; returns the split point.
    fn partition(&mut self, a: usize, b: usize, f: usize, thr: f64) -> usize {
        for p in a..b {
            let i = self.order[0][p];
            self.goes_left[i] = self.cols[f * self.k + i] <= thr;
        }
        let mut mid = a;
        for ord in &mut self.order {
            self.scratch.clear();
            let mut w = a;
            for p in a..b {
                let i = ord[p];
                if self.goes_left[i] {
                    ord[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            ord[w..b].copy_from_slice(&self.scratch);
            mid = w;
        }
        mid
    }

    fn grow(&mut self, a: usize, b: usize, depth: usize, node_seed: u64) -> usize {
        let id = self.nodes.len();
        let ord = &self.order[0][a..b];
        let total: f64 = ord.iter().map(|&i| self.y[i]).sum();
        let value = total / (b - a) as f64;
        let constant = ord.iter().all(|&i| self.y[i] == self.y[ord[0]]);
        self.nodes.push(Node { feature: LEAF, threshold: 0.0, left: 0, right: 0, depth, value });
        if b - a < 2 || constant || self.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some((f, thr)) = self.best_split(a, b, total, node_seed) else { return id };
        let mid = self.partition(a, b, f, thr);
        let left = self.grow(a, mid, depth + 1, seed::derive(node_seed, &[0]));
        let right = self.grow(mid, b, depth + 1, seed::derive(node_seed, &[1]));
        let node = &mut self.nodes[id];
        node.feature = f;
        node.threshold = thr;
        node.left = left;
        node.right = right;
        id
    }
}

/// Column-major copy of the inputs with every feature's argsort.
struct Presorted {
    cols: Vec<f64>,
    k: usize,
    q: usize,
    sorted: Vec<Vec<usize>>,
}

impl Presorted {
    fn new(u: &[Vec<f64>]) -> Self {
        let k = u.len();
        let q = u.first().map_or(0, Vec::len);
        let cols: Vec<f64> = (0..q).flat_map(|f| u.iter().map(move |r| r[f])).collect();
        let sorted = (0..q)
            .map(|f| {
                let mut o: Vec<usize> = (0..k).collect();
                o.sort_by(|&a, &b| cols[f * k + a].total_cmp(&cols[f * k + b]));
                o
            })
            .collect();
        Presorted { cols, k, q, sorted }
    }
}

impl Tree {
    fn grow(
        pre: &Presorted,
        y: &[f64],
        samples: &[usize],
        max_depth: Option<usize>,
        max_features: MaxFeatures,
        tree_seed: u64,
    ) -> Tree {
        let mut count = vec![0usize; pre.k];
        for &i in samples {
            count[i] += 1;
        }
        let order: Vec<Vec<usize>> = if pre.q == 0 {
            vec![samples.to_vec()]
        } else {
            pre.sorted.iter().map(|s| s.iter().flat_map(|&i| std::iter::repeat(i).take(count[i])).collect()).collect()
        };
        let n = samples.len();
        let mut g = Grower {
            cols: &pre.cols,
            k: pre.k,
            q: pre.q,
            y,
            max_depth,
            max_features,
            order,
            scratch: Vec::with_capacity(n),
            goes_left: vec![false; pre.k],
            nodes: Vec::new(),
        };
        if n > 0 {
            g.grow(0, n, 0, seed::derive(tree_seed, &[u64::MAX]));
        }
        Tree { nodes: g.nodes }
    }

    /// Prediction of the tree cut off at `max_depth`: the value of the
    /// deepest node on the path whose depth does not exceed it.
    pub fn predict_truncated(&self, u: &[f64], max_depth: Option<usize>) -> f64 {
        let mut at = 0;
        loop {
            let node = &self.nodes[at];
            if node.feature == LEAF || max_depth.is_some_and(|d| node.depth >= d) {
                return node.value;
            }
            at = if u[node.feature] <= node.threshold { node.left } else { node.right };
        }
    }

    pub fn predict(&self, u: &[f64]) -> f64 {
        self.predict_truncated(u, None)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
}

fn tree_samples(k: usize, bootstrap: bool, tree_seed: u64) -> Vec<usize> {
    if bootstrap {
        let mut rng = seed::rng(tree_seed);
        (0..k).map(|_| rng.gen_range(0..k)).collect()
    } else {
        (0..k).collect()
    }
}

impl Forest {
    pub fn fit(
        u: &[Vec<f64>],
        y: &[f64],
        n_estimators: usize,
        max_depth: Option<usize>,
        max_features: MaxFeatures,
        bootstrap: bool,
        seed: u64,
    ) -> Forest {
        let pre = Presorted::new(u);
        let trees = (0..n_estimators)
            .map(|t| {
                let ts = seed::derive(seed, &[t as u64]);
                Tree::grow(&pre, y, &tree_samples(u.len(), bootstrap, ts), max_depth, max_features, ts)
            })
            .collect();
        Forest { trees }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Average over the first `n` trees, each cut at `max_depth`.
    pub fn predict_prefix(&self, u: &[f64], n: usize, max_depth: Option<usize>) -> f64 {
        self.trees[..n].iter().map(|t| t.predict_truncated(u, max_depth)).sum::<f64>() / n as f64
    }

    pub fn predict(&self, u: &[f64]) -> f64 {
        self.predict_prefix(u, self.trees.len(), None)
    }
}

/// Leave-one-out predictions for a set of RF settings. Trees are grown
/// without a depth limit; a depth-limited tree is the full tree cut at
/// that depth and a smaller forest is a prefix of a larger one.
pub(crate) fn loo(data: &Dataset, grid: &[Hyperparams], seed: u64) -> Vec<Result<Vec<Vec<f64>>>> {
    struct Setting {
        n: usize,
        depth: Option<usize>,
        features: MaxFeatures,
        bootstrap: bool,
    }
    let settings: Vec<Setting> = grid
        .iter()
        .map(|h| match *h {
            Hyperparams::Rf { n_estimators, max_depth, max_features, bootstrap } => {
                Setting { n: n_estimators, depth: max_depth, features: max_features, bootstrap }
            }
            _ => unreachable!("RF settings only"),
        })
        .collect();
    let k = data.len();
    let mut out = vec![vec![vec![0.0; data.n()]; k]; grid.len()];
    let mut groups: Vec<(MaxFeatures, bool)> = settings.iter().map(|s| (s.features, s.bootstrap)).collect();
    groups.dedup();
    groups.sort_by_key(|&(f, b)| (f as u8, b));
    groups.dedup();
    for (features, bootstrap) in groups {
        let members: Vec<usize> = (0..grid.len())
            .filter(|&g| settings[g].features == features && settings[g].bootstrap == bootstrap)
            .collect();
        let n_max = members.iter().map(|&g| settings[g].n).max().unwrap_or(1);
        for fold in 0..k {
            let train = data.without(fold);
            for j in 0..data.n() {
                let f =
                    Forest::fit(&train.u, &column(&train, j), n_max, None, features, bootstrap, output_seed(seed, j));
                for &g in &members {
                    out[g][fold][j] = f.predict_prefix(&data.u[fold], settings[g].n, settings[g].depth);
                }
            }
        }
    }
    out.into_iter().map(Ok).collect()
}
