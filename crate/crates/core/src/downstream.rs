//! Feature clustering, meta-features and the classification harness.

use faer::Mat;
use rand::Rng;
use rayon::prelude::*;

use crate::data_io::DataMatrix;
use crate::error::{DiscError, Result};
use crate::feature_graph::KernelSpec;
use crate::rng::stream_rng;
use crate::spectral::disc_multi;

/// Hard assignment of features to `k` clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureClustering {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
}

impl FeatureClustering {
    /// Feature indices per cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves further than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, ctr) in centers.iter().enumerate() {
        let d = sq(x, ctr);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.gen_range(0..n)].clone()];
    let mut dist: Vec<f64> = points.iter().map(|x| sq(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(points[pick].clone());
        let c = centers.last().expect("just pushed");
        for (d, x) in dist.iter_mut().zip(points) {
            *d = d.min(sq(x, c));
        }
    }
    centers
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>], labels: &mut [usize]) {
    let (n, k) = (points.len(), centers.len());
    let mut dists = vec![0.0; n];
    for (i, x) in points.iter().enumerate() {
        (labels[i], dists[i]) = nearest(x, centers);
    }
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    // An empty cluster takes the point farthest from its current centroid.
    for c in 0..k {
        if counts[c] == 0 {
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("k <= n guarantees a donor cluster");
            counts[labels[far]] -= 1;
            labels[far] = c;
            counts[c] = 1;
            dists[far] = 0.0;
        }
    }
}

fn centroids(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (x, &l) in points.iter().zip(labels) {
        sums[l].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        counts[l] += 1;
    }
    for (ctr, &c) in sums.iter_mut().zip(&counts) {
        ctr.iter_mut().for_each(|v| *v /= c as f64);
    }
    sums
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, cfg: &KMeansConfig) -> (Vec<usize>, f64) {
    let k = centers.len();
    let mut labels = vec![0usize; points.len()];
    for _ in 0..cfg.max_iter {
        assign(points, &centers, &mut labels);
        let next = centroids(points, &labels, k);
        let shift = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| sq(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        if shift <= cfg.tol {
            break;
        }
    }
    assign(points, &centers, &mut labels);
    let centers = centroids(points, &labels, k);
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(x, &l)| sq(x, &centers[l]))
        .sum();
    (labels, inertia)
}

// Relabel clusters in order of first appearance.
fn canonical(labels: Vec<usize>, k: usize) -> Vec<usize> {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    labels
        .into_iter()
        .map(|l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect()
}

/// k-means over the rows of `v` with k-means++ seeding and independent restarts.
pub fn cluster_features_with(
    v: &Mat<f64>,
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<FeatureClustering> {
    let (p, r) = (v.nrows(), v.ncols());
    if k == 0 || k > p {
        return Err(DiscError::Parameter(format!("k = {k} must be in [1, {p}]")));
    }
    if r == 0 {
        return Err(DiscError::Parameter("need at least one loading vector".into()));
    }
    let points: Vec<Vec<f64>> = (0..p).map(|i| (0..r).map(|j| v[(i, j)]).collect()).collect();
    let runs: Vec<(f64, usize, Vec<usize>)> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|restart| {
            let mut rng = stream_rng(seed, restart as u64);
            let init = kmeans_pp(&points, k, &mut rng);
            let (labels, inertia) = lloyd(&points, init, cfg);
            (inertia, restart, labels)
        })
        .collect();
    let (inertia, _, labels) = runs
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one restart");
    Ok(FeatureClustering {
        labels: canonical(labels, k),
        k,
        inertia,
    })
}

pub fn cluster_features(v: &Mat<f64>, k: usize, seed: u64) -> Result<FeatureClustering> {
    cluster_features_with(v, k, seed, &KMeansConfig::default())
}

/// Per-sample projections `X V`.
pub fn meta_features(data: &DataMatrix, v: &Mat<f64>) -> Result<Mat<f64>> {
    if v.nrows() != data.feature_count() {
        return Err(DiscError::Shape(format!(
            "loadings have {} rows, data has {} features",
            v.nrows(),
            data.feature_count()
        )));
    }
    Ok(data.values() * v)
}

/// Column `c` is the mean of the data columns assigned to cluster `c`.
pub fn cluster_mean_features(data: &DataMatrix, clustering: &FeatureClustering) -> Result<Mat<f64>> {
    if clustering.labels.len() != data.feature_count() {
        return Err(DiscError::Shape(format!(
            "{} labels for {} features",
            clustering.labels.len(),
            data.feature_count()
        )));
    }
    if clustering.labels.iter().any(|&l| l >= clustering.k) {
        return Err(DiscError::Validation("cluster label out of range".into()));
    }
    let n = data.sample_count();
    let members = clustering.members();
    let mut out = Mat::zeros(n, clustering.k);
    for (c, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let col = out.col_as_slice_mut(c);
        for &j in idx {
            col.iter_mut().zip(data.column(j)).for_each(|(o, x)| *o += x);
        }
        let m = idx.len() as f64;
        col.iter_mut().for_each(|o| *o /= m);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    /// L2 penalty on the weights (not the intercepts).
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 2000,
            l2: 1e-4,
        }
    }
}

/// Multinomial logistic regression on z-scored inputs.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `features x classes`.
    weights: Mat<f64>,
    bias: Vec<f64>,
}

fn softmax_rows(z: &mut Mat<f64>) {
    for i in 0..z.nrows() {
        let m = (0..z.ncols()).map(|c| z[(i, c)]).fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for c in 0..z.ncols() {
            let e = (z[(i, c)] - m).exp();
            z[(i, c)] = e;
            s += e;
        }
        for c in 0..z.ncols() {
            z[(i, c)] /= s;
        }
    }
}

impl LogisticModel {
    /// Full-batch gradient descent on the mean cross-entropy.
    pub fn fit(x: &Mat<f64>, labels: &[usize], classes: usize, cfg: &LogisticConfig) -> Result<Self> {
        let (n, f) = (x.nrows(), x.ncols());
        if labels.len() != n || n == 0 {
            return Err(DiscError::Shape(format!("{} labels for {n} samples", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(DiscError::Validation(format!("label {bad} out of range")));
        }
        if labels.iter().all(|&l| l == labels[0]) {
            return Err(DiscError::Degenerate("training set has a single class".into()));
        }
        let mut mean = vec![0.0; f];
        let mut scale = vec![1.0; f];
        for j in 0..f {
            let col = x.col_as_slice(j);
            let m = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            mean[j] = m;
            scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        let z = Mat::from_fn(n, f, |i, j| (x[(i, j)] - mean[j]) / scale[j]);
        let zt = z.transpose().to_owned();
        let mut w = Mat::<f64>::zeros(f, classes);
        let mut b = vec![0.0; classes];
        let inv_n = 1.0 / n as f64;
        for _ in 0..cfg.iterations {
            let mut prob = &z * &w;
            for i in 0..n {
                for c in 0..classes {
                    prob[(i, c)] += b[c];
                }
            }
            softmax_rows(&mut prob);
            for (i, &l) in labels.iter().enumerate() {
                prob[(i, l)] -= 1.0;
            }
            let grad = &zt * &prob;
            for c in 0..classes {
                let gb: f64 = prob.col_as_slice(c).iter().sum::<f64>() * inv_n;
                b[c] -= cfg.learning_rate * gb;
                for j in 0..f {
                    let g = grad[(j, c)] * inv_n + cfg.l2 * w[(j, c)];
                    w[(j, c)] -= cfg.learning_rate * g;
                }
            }
        }
        Ok(Self {
            mean,
            scale,
            weights: w,
            bias: b,
        })
    }

    pub fn predict(&self, x: &Mat<f64>) -> Result<Vec<usize>> {
        let f = self.mean.len();
        if x.ncols() != f {
            return Err(DiscError::Shape(format!(
                "model expects {f} features, got {}",
                x.ncols()
            )));
        }
        let z = Mat::from_fn(x.nrows(), f, |i, j| (x[(i, j)] - self.mean[j]) / self.scale[j]);
        let s = &z * &self.weights;
        Ok((0..x.nrows())
            .map(|i| {
                (0..self.bias.len())
                    .map(|c| s[(i, c)] + self.bias[c])
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (c, v)| if v > acc.1 { (c, v) } else { acc })
                    .0
            })
            .collect())
    }

    pub fn accuracy(&self, x: &Mat<f64>, labels: &[usize]) -> Result<f64> {
        let pred = self.predict(x)?;
        if pred.len() != labels.len() || labels.is_empty() {
            return Err(DiscError::Shape(format!(
                "{} labels for {} samples",
                labels.len(),
                pred.len()
            )));
        }
        let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

/// Test accuracy of a logistic model trained on `(train, train_labels)`.
pub fn logistic_eval(
    train: &Mat<f64>,
    train_labels: &[usize],
    test: &Mat<f64>,
    test_labels: &[usize],
    classes: usize,
) -> Result<f64> {
    LogisticModel::fit(train, train_labels, classes, &LogisticConfig::default())?
        .accuracy(test, test_labels)
}

/// 1-based index `i` maximizing `sigma[i-1] - sigma[i]`; ties go to the lowest index.
pub fn significance_elbow(sigma: &[f64]) -> usize {
    if sigma.len() < 2 {
        return sigma.len();
    }
    let mut best = (1, f64::NEG_INFINITY);
    for (i, w) in sigma.windows(2).enumerate() {
        let drop = w[0] - w[1];
        if drop > best.1 {
            best = (i + 1, drop);
        }
    }
    best.0
}

/// Differential features per class, pooled and clustered, feeding a classifier.
#[derive(Debug, Clone)]
pub struct EvalProtocol {
    pub d: usize,
    /// Leading differential vectors kept from each class.
    pub vectors_per_class: usize,
    pub k_clusters: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
    pub logistic: LogisticConfig,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            d: 20,
            vectors_per_class: 3,
            k_clusters: 3,
            seed: 0,
            kernel: KernelSpec::default(),
            logistic: LogisticConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub clustering: FeatureClustering,
    pub significance: Vec<Vec<f64>>,
}

fn stack(parts: &[DataMatrix]) -> Result<(DataMatrix, Vec<usize>)> {
    let p = parts[0].feature_count();
    let n: usize = parts.iter().map(DataMatrix::sample_count).sum();
    let mut values = Mat::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (c, part) in parts.iter().enumerate() {
        let part = crate::data_io::align(&parts[0], part)?.apply(part)?;
        for i in 0..part.sample_count() {
            for j in 0..p {
                values[(row, j)] = part.values()[(i, j)];
            }
            labels.push(c);
            row += 1;
        }
    }
    Ok((DataMatrix::new(values, parts[0].feature_ids().to_vec())?, labels))
}

/// Runs the full protocol with one training and one test matrix per class.
pub fn run_protocol(train: &[DataMatrix], test: &[DataMatrix], cfg: &EvalProtocol) -> Result<EvalOutcome> {
    let classes = train.len();
    if classes < 2 || test.len() != classes {
        return Err(DiscError::Parameter(format!(
            "need matching train/test sets for at least two classes, got {} and {}",
            train.len(),
            test.len()
        )));
    }
    let p = train[0].feature_count();
    let per = cfg.vectors_per_class.min(p);
    let multi = disc_multi(train, &vec![cfg.d; classes], per, &cfg.kernel)?;
    let mut pooled = Mat::zeros(p, per * classes);
    for (m, res) in multi.results.iter().enumerate() {
        for j in 0..per {
            pooled
                .col_as_slice_mut(m * per + j)
                .copy_from_slice(res.vectors().col_as_slice(j));
        }
    }
    let clustering = cluster_features(&pooled, cfg.k_clusters, cfg.seed)?;
    let (train_x, train_y) = stack(train)?;
    let test: Vec<DataMatrix> = test
        .iter()
        .map(|t| crate::data_io::align(&train[0], t)?.apply(t))
        .collect::<Result<_>>()?;
    let (test_x, test_y) = stack(&test)?;
    let f_train = cluster_mean_features(&train_x, &clustering)?;
    let f_test = cluster_mean_features(&test_x, &clustering)?;
    let model = LogisticModel::fit(&f_train, &train_y, classes, &cfg.logistic)?;
    Ok(EvalOutcome {
        accuracy: model.accuracy(&f_test, &test_y)?,
        train_accuracy: model.accuracy(&f_train, &train_y)?,
        clustering,
        significance: multi.results.iter().map(|r| r.significance().to_vec()).collect(),
    })
}
