use super::{Dataset, MiningError};
use crate::features::{Feature, FeatureVector};
use crate::formats::Format;

/// Growth limits for [`train_tree`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    /// Minimum known-value samples on each side of a split.
    pub min_leaf: usize,
    pub max_depth: usize,
    /// Candidate attributes, in tie-break order.
    pub features: Vec<Feature>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 5,
            max_depth: 12,
            features: Feature::TRAINING.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        class: Format,
        counts: [usize; 4],
    },
    /// Samples with `feature <= threshold` go left. Samples missing the
    /// feature follow `missing_left`.
    Split {
        feature: Feature,
        threshold: f64,
        missing_left: bool,
        counts: [usize; 4],
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn counts(&self) -> [usize; 4] {
        match self {
            Node::Leaf { counts, .. } | Node::Split { counts, .. } => *counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub root: Node,
}

impl DecisionTree {
    pub fn predict(&self, fv: &FeatureVector) -> Format {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { class, .. } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = match feature.value(fv) {
                        Some(v) => v <= *threshold,
                        None => *missing_left,
                    };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }

    pub fn leaves(&self) -> usize {
        fn leaves(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => leaves(left) + leaves(right),
            }
        }
        leaves(&self.root)
    }
}

fn entropy(counts: &[usize; 4]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum()
}

fn split_info(parts: &[usize]) -> f64 {
    let total: usize = parts.iter().sum();
    let t = total as f64;
    parts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum()
}

/// Majority class; ties go to the higher-priority format.
fn majority(counts: &[usize; 4]) -> Format {
    let mut best = Format::Dia;
    for f in Format::ALL {
        if counts[f.index()] > counts[best.index()] {
            best = f;
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: Feature,
    threshold: f64,
    gain: f64,
    ratio: f64,
    missing_left: bool,
}

struct Grower<'a> {
    values: Vec<Vec<Option<f64>>>,
    labels: Vec<Format>,
    params: &'a TreeParams,
}

const EPS: f64 = 1e-12;

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; 4] {
        let mut c = [0; 4];
        for &i in idx {
            c[self.labels[i].index()] += 1;
        }
        c
    }

    /// Best threshold for one attribute by information gain, scaled by the
    /// fraction of samples whose value is known.
    fn best_threshold(&self, fi: usize, idx: &[usize]) -> Option<Candidate> {
        let column = &self.values[fi];
        let mut known: Vec<(f64, Format)> = idx
            .iter()
            .filter_map(|&i| column[i].map(|v| (v, self.labels[i])))
            .collect();
        let min_leaf = self.params.min_leaf.max(1);
        if known.len() < 2 * min_leaf {
            return None;
        }
        known.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut total = [0usize; 4];
        for (_, l) in &known {
            total[l.index()] += 1;
        }
        let base = entropy(&total);
        let n_known = known.len();
        let known_frac = n_known as f64 / idx.len() as f64;

        let mut left = [0usize; 4];
        let mut best: Option<(f64, f64, usize)> = None;
        for k in 0..n_known - 1 {
            left[known[k].1.index()] += 1;
            if known[k].0 == known[k + 1].0 {
                continue;
            }
            let nl = k + 1;
            let nr = n_known - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let mut right = total;
            for c in 0..4 {
                right[c] -= left[c];
            }
            let h = (nl as f64 * entropy(&left) + nr as f64 * entropy(&right)) / n_known as f64;
            let gain = base - h;
            if best.is_none_or(|(g, _, _)| gain > g + EPS) {
                let threshold = known[k].0 + (known[k + 1].0 - known[k].0) / 2.0;
                best = Some((gain, threshold, nl));
            }
        }
        let (gain, threshold, nl) = best?;
        let nr = n_known - nl;
        let missing = idx.len() - n_known;
        let gain = known_frac * gain;
        let info = split_info(&[nl, nr, missing]);
        Some(Candidate {
            feature: self.params.features[fi],
            threshold,
            gain,
            ratio: if info > 0.0 { gain / info } else { 0.0 },
            missing_left: nl >= nr,
        })
    }

    /// Gain ratio among attributes whose gain is at least the average.
    fn choose(&self, idx: &[usize]) -> Option<Candidate> {
        let candidates: Vec<Candidate> = (0..self.params.features.len())
            .filter_map(|fi| self.best_threshold(fi, idx))
            .filter(|c| c.gain > EPS)
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let avg = candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
        let mut best: Option<Candidate> = None;
        for c in candidates.into_iter().filter(|c| c.gain >= avg - EPS) {
            if best.is_none_or(|b| c.ratio > b.ratio + EPS) {
                best = Some(c);
            }
        }
        best
    }

    fn grow(&self, idx: Vec<usize>, depth: usize) -> Node {
        let counts = self.counts(&idx);
        let class = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf.max(1) {
            return Node::Leaf { class, counts };
        }
        let Some(split) = self.choose(&idx) else {
            return Node::Leaf { class, counts };
        };
        let fi = self
            .params
            .features
            .iter()
            .position(|&f| f == split.feature)
            .expect("candidate feature");
        let column = &self.values[fi];
        let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| match column[i] {
            Some(v) => v <= split.threshold,
            None => split.missing_left,
        });
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            missing_left: split.missing_left,
            counts,
            left: Box::new(self.grow(left, depth + 1)),
            right: Box::new(self.grow(right, depth + 1)),
        }
    }
}

/// Grows a gain-ratio decision tree over the dataset's labels.
pub fn train_tree(dataset: &Dataset, params: &TreeParams) -> Result<DecisionTree, MiningError> {
    if dataset.is_empty() {
        return Err(MiningError::EmptyDataset);
    }
    let values = params
        .features
        .iter()
        .map(|f| dataset.samples.iter().map(|s| f.value(&s.features)).collect())
        .collect();
    let grower = Grower {
        values,
        labels: dataset.samples.iter().map(|s| s.best_format).collect(),
        params,
    };
    let root = grower.grow((0..dataset.len()).collect(), 0);
    Ok(DecisionTree { root })
}
