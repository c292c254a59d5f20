//! RBF kernel graphs over the feature columns of a data matrix.

use faer::Mat;
use rayon::prelude::*;

use crate::data_io::DataMatrix;
use crate::error::{DiscError, Result};

/// Kernel used to weight pairs of feature columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-d^2 / (s_i s_j))` with `s_i` the distance from column `i` to its
    /// `knn_k`-th nearest column. `None` picks `ceil(ln p)`.
    SelfTuning { knn_k: Option<usize> },
    /// `exp(-d^2 / bandwidth^2)`.
    Fixed { bandwidth: f64 },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::SelfTuning { knn_k: None }
    }
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::SelfTuning { .. } => "rbf_self_tuning",
            KernelSpec::Fixed { .. } => "rbf_fixed",
        }
    }

    /// Neighbour index actually used for `p` features, if self-tuning.
    pub fn resolved_knn_k(&self, p: usize) -> Option<usize> {
        match *self {
            KernelSpec::SelfTuning { knn_k } => Some(knn_k.unwrap_or_else(|| default_knn_k(p))),
            KernelSpec::Fixed { .. } => None,
        }
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match *self {
            KernelSpec::Fixed { bandwidth } => Some(bandwidth),
            KernelSpec::SelfTuning { .. } => None,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        match *self {
            KernelSpec::Fixed { bandwidth } if !(bandwidth > 0.0 && bandwidth.is_finite()) => Err(
                DiscError::Parameter(format!("bandwidth must be positive, got {bandwidth}")),
            ),
            KernelSpec::SelfTuning { .. } => {
                let k = self.resolved_knn_k(p).unwrap_or(0);
                if k == 0 || k >= p {
                    Err(DiscError::Parameter(format!(
                        "knn_k must be in [1, {}), got {k}",
                        p
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// `ceil(ln p)`, at least 1.
pub fn default_knn_k(p: usize) -> usize {
    ((p as f64).ln().ceil() as usize).max(1)
}

/// Symmetric kernel weights with degrees and the random-walk matrix `D^-1 W`.
#[derive(Debug, Clone)]
pub struct FeatureGraph {
    weights: Mat<f64>,
    degrees: Vec<f64>,
    rw: Mat<f64>,
}

impl FeatureGraph {
    /// Wraps an explicit weight matrix. It must be symmetric with non-negative
    /// entries and strictly positive row sums.
    pub fn from_weights(weights: Mat<f64>) -> Result<Self> {
        let p = weights.nrows();
        if p != weights.ncols() || p == 0 {
            return Err(DiscError::Shape(format!(
                "weight matrix must be square and non-empty, got {} x {}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for j in 0..p {
            for i in 0..p {
                let w = weights[(i, j)];
                if !(w >= 0.0 && w.is_finite()) || w != weights[(j, i)] {
                    return Err(DiscError::Validation(format!(
                        "weights must be finite, non-negative and symmetric (entry {i},{j})"
                    )));
                }
            }
        }
        let degrees: Vec<f64> = (0..p).map(|i| row_sum(&weights, i)).collect();
        if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(DiscError::Degenerate(format!("node {i} has zero degree")));
        }
        let rw = Mat::from_fn(p, p, |i, j| weights[(i, j)] / degrees[i]);
        Ok(Self {
            weights,
            degrees,
            rw,
        })
    }

    pub fn weights(&self) -> &Mat<f64> {
        &self.weights
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// The row-stochastic matrix `P = D^-1 W`.
    pub fn rw_matrix(&self) -> &Mat<f64> {
        &self.rw
    }

    pub fn node_count(&self) -> usize {
        self.degrees.len()
    }

    /// `D^-1/2 W D^-1/2`, symmetric to the last bit.
    pub fn normalized_affinity(&self) -> Mat<f64> {
        let p = self.node_count();
        let s: Vec<f64> = self.degrees.iter().map(|d| d.sqrt()).collect();
        let mut out = Mat::zeros(p, p);
        for j in 0..p {
            for i in j..p {
                let v = self.weights[(i, j)] / (s[i] * s[j]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// Unnormalized Laplacian `D - W`.
    pub fn laplacian(&self) -> Mat<f64> {
        let p = self.node_count();
        Mat::from_fn(p, p, |i, j| {
            let w = -self.weights[(i, j)];
            if i == j {
                self.degrees[i] + w
            } else {
                w
            }
        })
    }
}

// Summing the sorted row keeps degrees invariant under relabeling of nodes.
fn row_sum(w: &Mat<f64>, i: usize) -> f64 {
    let mut row: Vec<f64> = (0..w.ncols()).map(|j| w[(i, j)]).collect();
    row.sort_by(f64::total_cmp);
    row.iter().sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Squared Euclidean distances between all pairs of feature columns.
pub fn pairwise_sq_distances(data: &DataMatrix) -> Mat<f64> {
    let p = data.feature_count();
    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let ci = data.column(i);
            (i + 1..p).map(|j| sq_dist(ci, data.column(j))).collect()
        })
        .collect();
    let mut d2 = Mat::zeros(p, p);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    d2
}

fn sigmas_from_sq(d2: &Mat<f64>, k: usize) -> Result<Vec<f64>> {
    let p = d2.nrows();
    if k == 0 || k >= p {
        return Err(DiscError::Parameter(format!(
            "knn_k must be in [1, {p}), got {k}"
        )));
    }
    (0..p)
        .map(|i| {
            let mut row: Vec<f64> = (0..p).filter(|&j| j != i).map(|j| d2[(i, j)]).collect();
            row.sort_by(f64::total_cmp);
            let kth = row[k - 1];
            if kth > 0.0 {
                return Ok(kth.sqrt());
            }
            row.iter()
                .copied()
                .find(|&v| v > 0.0)
                .map(f64::sqrt)
                .ok_or_else(|| {
                    DiscError::Degenerate("all feature columns are identical".into())
                })
        })
        .collect()
}

/// Distance from each column to its `k`-th nearest other column.
///
/// A zero distance (duplicated columns) falls back to the node's smallest
/// positive distance.
pub fn self_tuning_sigmas(data: &DataMatrix, k: usize) -> Result<Vec<f64>> {
    sigmas_from_sq(&pairwise_sq_distances(data), k)
}

pub fn build_graph(data: &DataMatrix, kernel: &KernelSpec) -> Result<FeatureGraph> {
    let p = data.feature_count();
    kernel.validate(p)?;
    let d2 = pairwise_sq_distances(data);
    let scale: Box<dyn Fn(usize, usize) -> f64> = match *kernel {
        KernelSpec::SelfTuning { .. } => {
            let k = kernel.resolved_knn_k(p).unwrap_or(1);
            let s = sigmas_from_sq(&d2, k)?;
            Box::new(move |i, j| s[i] * s[j])
        }
        KernelSpec::Fixed { bandwidth } => {
            let e2 = bandwidth * bandwidth;
            Box::new(move |_, _| e2)
        }
    };
    let mut w = Mat::zeros(p, p);
    for j in 0..p {
        w[(j, j)] = 1.0;
        for i in j + 1..p {
            let v = (-d2[(i, j)] / scale(i, j)).exp();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    FeatureGraph::from_weights(w)
}
