//! Stochastic block models and the projection-based recovery of a hidden block.
//!
//! The lab follows the two-graph setting: `G_A` has blocks `[l, l+s]` and
//! `G_B` splits the second block into `[l, s]`, so `G_B` has blocks α, β, γ of
//! sizes `l, l, s` on the same node order. Projecting the leading eigenvectors
//! of `W_A` out of `W_B` leaves a vector concentrated on γ.

use std::path::Path;

use faer::Mat;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{write_atomic, write_json};
use crate::error::{DiscError, Result};
use crate::linalg::{
    dot, fix_sign, lanczos, ls_slope, norm2, sym_eigen_desc, sym_matvec, LanczosOptions, Which,
};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    pub p_intra: f64,
    pub q_inter: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn new(block_sizes: Vec<usize>, p_intra: f64, q_inter: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            block_sizes,
            p_intra,
            q_inter,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(DiscError::Parameter("block sizes must be positive".into()));
        }
        let (p, q) = (self.p_intra, self.q_inter);
        if !(0.0 <= q && q <= p && p <= 1.0) {
            return Err(DiscError::Parameter(format!(
                "need 0 <= q <= p <= 1, got p = {p}, q = {q}"
            )));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Block index of every node.
    pub fn labels(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| std::iter::repeat(b).take(n))
            .collect()
    }

    /// First node index of each block.
    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.block_sizes
            .iter()
            .map(|&n| {
                let o = acc;
                acc += n;
                o
            })
            .collect()
    }
}

/// The pair `[l, l+s]` / `[l, l, s]` sharing `p`, `q`, with independent seeds.
pub fn two_graph_specs(l: usize, s: usize, p: f64, q: f64, seed: u64) -> Result<(SbmSpec, SbmSpec)> {
    Ok((
        SbmSpec::new(vec![l, l + s], p, q, derive_seed(seed, 0))?,
        SbmSpec::new(vec![l, l, s], p, q, derive_seed(seed, 1))?,
    ))
}

#[derive(Debug, Clone)]
pub struct SbmInstance {
    /// Symmetric 0/1 matrix with zero diagonal.
    pub adjacency: Mat<f64>,
    pub labels: Vec<usize>,
    pub spec: SbmSpec,
}

/// Samples the upper triangle row by row and mirrors it.
pub fn sample_sbm(spec: &SbmSpec) -> Result<SbmInstance> {
    spec.validate()?;
    let labels = spec.labels();
    let n = labels.len();
    let mut rng = stream_rng(spec.seed, 0);
    let mut w = Mat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let prob = if labels[i] == labels[j] {
                spec.p_intra
            } else {
                spec.q_inter
            };
            if rng.gen::<f64>() < prob {
                w[(i, j)] = 1.0;
                w[(j, i)] = 1.0;
            }
        }
    }
    Ok(SbmInstance {
        adjacency: w,
        labels,
        spec: spec.clone(),
    })
}

/// `E[W] = E Θ E^T`: `p` inside blocks (diagonal included), `q` across.
pub fn expected_matrix(spec: &SbmSpec) -> Result<Mat<f64>> {
    spec.validate()?;
    let labels = spec.labels();
    let n = labels.len();
    Ok(Mat::from_fn(n, n, |i, j| {
        if labels[i] == labels[j] {
            spec.p_intra
        } else {
            spec.q_inter
        }
    }))
}

/// `y = E[W] x` using block sums, without forming the matrix.
pub fn expected_matvec(spec: &SbmSpec, x: &[f64], y: &mut [f64]) {
    let offs = spec.offsets();
    let sums: Vec<f64> = spec
        .block_sizes
        .iter()
        .zip(&offs)
        .map(|(&n, &o)| x[o..o + n].iter().sum())
        .collect();
    let total: f64 = sums.iter().sum();
    for (b, (&n, &o)) in spec.block_sizes.iter().zip(&offs).enumerate() {
        let v = spec.q_inter * (total - sums[b]) + spec.p_intra * sums[b];
        y[o..o + n].iter_mut().for_each(|yi| *yi = v);
    }
}

/// Nonzero eigenpairs of `E[W]` from the `k x k` matrix `Δ Θ Δ`, `Δ = diag(sqrt(n_b))`.
///
/// An eigenvector `y` of `Δ Θ Δ` lifts to the unit vector `E Δ^-1 y`. Eigenvalues
/// are descending; eigenvectors follow the largest-entry-positive convention.
pub fn block_eigen(spec: &SbmSpec) -> Result<(Vec<f64>, Mat<f64>)> {
    spec.validate()?;
    let k = spec.block_sizes.len();
    let sq: Vec<f64> = spec.block_sizes.iter().map(|&n| (n as f64).sqrt()).collect();
    let small = Mat::from_fn(k, k, |a, b| {
        let theta = if a == b { spec.p_intra } else { spec.q_inter };
        sq[a] * theta * sq[b]
    });
    let (vals, y) = sym_eigen_desc(&small)?;
    let labels = spec.labels();
    let mut v = Mat::from_fn(labels.len(), k, |i, j| y[(labels[i], j)] / sq[labels[i]]);
    for j in 0..k {
        fix_sign(v.col_as_slice_mut(j));
    }
    Ok((vals, v))
}

fn orient_on(v: &mut [f64], start: usize, len: usize) {
    let mean: f64 = v[start..start + len].iter().sum::<f64>() / len as f64;
    if mean < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn distance_to_indicator(v: &[f64], start: usize, len: usize) -> f64 {
    let h = 1.0 / (len as f64).sqrt();
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let t = if (start..start + len).contains(&i) { h } else { 0.0 };
            (x - t) * (x - t)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub estimated_gamma: Vec<usize>,
    /// Size of the symmetric difference with the true block.
    pub error_count: usize,
    pub error_rate: f64,
    #[serde(skip)]
    pub vector: Vec<f64>,
    pub v_gamma_distance: f64,
    pub eigenvalue: f64,
}

fn check_pair(w_a: &SbmInstance, w_b: &SbmInstance) -> Result<(usize, usize)> {
    let (a, b) = (&w_a.spec.block_sizes, &w_b.spec.block_sizes);
    if a.len() != 2 || b.len() != 3 || a[0] != b[0] || b[0] != b[1] || a[1] != b[1] + b[2] {
        return Err(DiscError::Validation(format!(
            "expected blocks [l, l+s] and [l, l, s], got {a:?} and {b:?}"
        )));
    }
    Ok((b[0], b[2]))
}

fn report_from_vector(mut v: Vec<f64>, eigenvalue: f64, l: usize, s: usize) -> RecoveryReport {
    let start = 2 * l;
    orient_on(&mut v, start, s);
    let thr = 0.5 / (s as f64).sqrt();
    let estimated: Vec<usize> = (0..v.len()).filter(|&i| v[i] > thr).collect();
    let hits = estimated.iter().filter(|&&i| i >= start).count();
    let error_count = (estimated.len() - hits) + (s - hits);
    RecoveryReport {
        estimated_gamma: estimated,
        error_count,
        error_rate: error_count as f64 / s as f64,
        v_gamma_distance: distance_to_indicator(&v, start, s),
        vector: v,
        eigenvalue,
    }
}

fn top_projector(w: &Mat<f64>, d: usize) -> Result<Mat<f64>> {
    let (_, u) = lanczos(w.nrows(), d, Which::Largest, LanczosOptions::default(), |x, y| {
        sym_matvec(w, x, y)
    })?;
    Ok(u)
}

// y = (I - U U^T) x
fn project_out(u: &Mat<f64>, x: &[f64], y: &mut [f64]) {
    y.copy_from_slice(x);
    for j in 0..u.ncols() {
        let c = u.col_as_slice(j);
        let t = dot(c, x);
        y.iter_mut().zip(c).for_each(|(yi, ci)| *yi -= t * ci);
    }
}

fn project_out_in_place(u: &Mat<f64>, y: &mut [f64]) {
    for j in 0..u.ncols() {
        let c = u.col_as_slice(j);
        let t = dot(c, y);
        y.iter_mut().zip(c).for_each(|(yi, ci)| *yi -= t * ci);
    }
}

/// Leading eigenvector of `Q W_B Q`, where `Q` removes the top-`d` eigenvectors of `W_A`,
/// thresholded at `1/(2 sqrt(s))`.
pub fn recover_gamma(w_a: &SbmInstance, w_b: &SbmInstance, d: usize) -> Result<RecoveryReport> {
    let (l, s) = check_pair(w_a, w_b)?;
    let n = w_b.adjacency.nrows();
    let u = top_projector(&w_a.adjacency, d)?;
    let (val, vec) = lanczos(n, 1, Which::Largest, LanczosOptions::default(), |x, y| {
        let mut t = vec![0.0; n];
        project_out(&u, x, &mut t);
        sym_matvec(&w_b.adjacency, &t, y);
        project_out_in_place(&u, y);
    })?;
    Ok(report_from_vector(vec.col_as_slice(0).to_vec(), val[0], l, s))
}

/// One-sided variant: top right singular vector of `W_B Q`.
pub fn recover_gamma_one_sided(
    w_a: &SbmInstance,
    w_b: &SbmInstance,
    d: usize,
) -> Result<RecoveryReport> {
    let (l, s) = check_pair(w_a, w_b)?;
    let n = w_b.adjacency.nrows();
    let u = top_projector(&w_a.adjacency, d)?;
    // (W_B Q)^T (W_B Q) = Q W_B^2 Q
    let (val, vec) = lanczos(n, 1, Which::Largest, LanczosOptions::default(), |x, y| {
        let mut t = vec![0.0; n];
        project_out(&u, x, &mut t);
        let mut t2 = vec![0.0; n];
        sym_matvec(&w_b.adjacency, &t, &mut t2);
        sym_matvec(&w_b.adjacency, &t2, y);
        project_out_in_place(&u, y);
    })?;
    Ok(report_from_vector(vec.col_as_slice(0).to_vec(), val[0].max(0.0).sqrt(), l, s))
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma1Report {
    pub l: usize,
    pub s: usize,
    pub p: f64,
    pub q: f64,
    /// `||v_γ - e_γ / sqrt(s)||` from a dense eigensolve of `E[W_B]`.
    pub distance: f64,
    pub lambda3: f64,
    /// `(p - q) s`.
    pub lambda_bound: f64,
    /// `sqrt(8 s / l)`.
    pub distance_bound: f64,
    /// The same two quantities from the 3x3 reduction.
    pub distance_reduced: f64,
    pub lambda3_reduced: f64,
}

impl Lemma1Report {
    pub fn holds(&self) -> bool {
        self.lambda3 >= self.lambda_bound && self.distance <= self.distance_bound
    }
}

/// Third eigenpair of `E[W_B]` for blocks `[l, l, s]` against its closed-form bounds.
pub fn lemma1_check(l: usize, s: usize, p: f64, q: f64) -> Result<Lemma1Report> {
    let spec = SbmSpec::new(vec![l, l, s], p, q, 0)?;
    let e = expected_matrix(&spec)?;
    let (vals, vecs) = sym_eigen_desc(&e)?;
    let mut v = vecs.col_as_slice(2).to_vec();
    orient_on(&mut v, 2 * l, s);
    let (rvals, rvecs) = block_eigen(&spec)?;
    let mut rv = rvecs.col_as_slice(2).to_vec();
    orient_on(&mut rv, 2 * l, s);
    Ok(Lemma1Report {
        l,
        s,
        p,
        q,
        distance: distance_to_indicator(&v, 2 * l, s),
        lambda3: vals[2],
        lambda_bound: (p - q) * s as f64,
        distance_bound: (8.0 * s as f64 / l as f64).sqrt(),
        distance_reduced: distance_to_indicator(&rv, 2 * l, s),
        lambda3_reduced: rvals[2],
    })
}

/// `||W - E[W]||_2 / sqrt(n)` for one sample.
pub fn concentration_ratio(spec: &SbmSpec) -> Result<f64> {
    let inst = sample_sbm(spec)?;
    let n = spec.node_count();
    let (val, _) = lanczos(n, 1, Which::LargestMagnitude, LanczosOptions::default(), |x, y| {
        let mut e = vec![0.0; n];
        expected_matvec(spec, x, &mut e);
        sym_matvec(&inst.adjacency, x, y);
        y.iter_mut().zip(&e).for_each(|(yi, ei)| *yi -= ei);
    })?;
    Ok(val[0].abs() / (n as f64).sqrt())
}

/// `s = round(l^alpha)`.
pub fn gamma_size(l: usize, alpha: f64) -> usize {
    ((l as f64).powf(alpha).round() as usize).max(1)
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeRow {
    pub alpha: f64,
    pub l: usize,
    pub trial: usize,
    pub quantity: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub alpha: f64,
    pub quantity: String,
    pub fitted_slope: f64,
    pub theoretical_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport {
    pub p: f64,
    pub q: f64,
    pub trials: usize,
    pub seed: u64,
    pub l_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub fits: Vec<SlopeFit>,
    #[serde(skip)]
    pub rows: Vec<SlopeRow>,
}

pub const QTY_LAMBDA3: &str = "lambda3";
pub const QTY_NUMERATOR: &str = "numerator";

impl SlopeReport {
    pub fn fit(&self, alpha: f64, quantity: &str) -> Option<&SlopeFit> {
        self.fits
            .iter()
            .find(|f| f.alpha == alpha && f.quantity == quantity)
    }

    /// Raw values as `alpha,l,trial,quantity,value`.
    pub fn write_rows_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("alpha,l,trial,quantity,value\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.16e}\n",
                r.alpha, r.l, r.trial, r.quantity, r.value
            ));
        }
        write_atomic(path, out.as_bytes())
    }

    /// Fits as `alpha,quantity,fitted_slope,theoretical_slope`.
    pub fn write_fits_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("alpha,quantity,fitted_slope,theoretical_slope\n");
        for f in &self.fits {
            out.push_str(&format!(
                "{},{},{:.6},{:.6}\n",
                f.alpha, f.quantity, f.fitted_slope, f.theoretical_slope
            ));
        }
        write_atomic(path, out.as_bytes())
    }

    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }
}

/// Spectral norm of `λ3 v vᵀ - Q W_B Q` with `Q` from the top-2 eigenvectors of `E[W_A]`.
///
/// `λ3 v vᵀ` is `Q' E[W_B] Q'` for `Q'` removing the top two eigenvectors of
/// `E[W_B]`, i.e. the rank-one part of the expected matrix carrying γ.
pub fn numerator_norm(l: usize, s: usize, p: f64, q: f64, seed: u64) -> Result<f64> {
    let (spec_a, mut spec_b) = two_graph_specs(l, s, p, q, 0)?;
    spec_b.seed = seed;
    let (_, ua) = block_eigen(&spec_a)?;
    let qa = Mat::from_fn(ua.nrows(), 2, |i, j| ua[(i, j)]);
    let (vb, vecb) = block_eigen(&spec_b)?;
    let lam3 = vb[2];
    let v = vecb.col_as_slice(2).to_vec();
    let wb = sample_sbm(&spec_b)?;
    let n = spec_b.node_count();
    let (val, _) = lanczos(n, 1, Which::LargestMagnitude, LanczosOptions::default(), |x, y| {
        let mut t = vec![0.0; n];
        project_out(&qa, x, &mut t);
        sym_matvec(&wb.adjacency, &t, y);
        project_out_in_place(&qa, y);
        let c = lam3 * dot(&v, x);
        y.iter_mut().zip(&v).for_each(|(yi, vi)| *yi = c * vi - *yi);
    })?;
    Ok(val[0].abs())
}

/// Log-log slopes of `λ3(E[W_B])` and of the perturbation norm against `l`, with
/// `s = round(l^alpha)`, averaging the random quantity over `trials` samples.
pub fn slope_experiment(
    l_grid: &[usize],
    alpha_grid: &[f64],
    p: f64,
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<SlopeReport> {
    if l_grid.len() < 3 {
        return Err(DiscError::Parameter(format!(
            "need at least 3 block sizes to fit a slope, got {}",
            l_grid.len()
        )));
    }
    if trials == 0 {
        return Err(DiscError::Parameter("need at least one trial".into()));
    }
    if let Some(a) = alpha_grid.iter().find(|a| !(**a > 0.5 && **a < 1.0)) {
        return Err(DiscError::Parameter(format!("alpha must lie in (0.5, 1), got {a}")));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let ln_l: Vec<f64> = l_grid.iter().map(|&l| (l as f64).ln()).collect();
    for (ai, &alpha) in alpha_grid.iter().enumerate() {
        let mut lam = Vec::new();
        let mut num = Vec::new();
        for (li, &l) in l_grid.iter().enumerate() {
            let s = gamma_size(l, alpha);
            let (vals, _) = block_eigen(&SbmSpec::new(vec![l, l, s], p, q, 0)?)?;
            rows.push(SlopeRow {
                alpha,
                l,
                trial: 0,
                quantity: QTY_LAMBDA3.into(),
                value: vals[2],
            });
            lam.push(vals[2]);
            // Trials run one at a time: each holds a dense n x n sample.
            let mut acc = 0.0;
            for t in 0..trials {
                let stream = ((ai as u64) << 40) | ((li as u64) << 20) | t as u64;
                let value = numerator_norm(l, s, p, q, derive_seed(seed, stream))?;
                rows.push(SlopeRow {
                    alpha,
                    l,
                    trial: t,
                    quantity: QTY_NUMERATOR.into(),
                    value,
                });
                acc += value;
            }
            num.push(acc / trials as f64);
        }
        let ln = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
        fits.push(SlopeFit {
            alpha,
            quantity: QTY_LAMBDA3.into(),
            fitted_slope: ls_slope(&ln_l, &ln(&lam)),
            theoretical_slope: alpha,
        });
        fits.push(SlopeFit {
            alpha,
            quantity: QTY_NUMERATOR.into(),
            fitted_slope: ls_slope(&ln_l, &ln(&num)),
            theoretical_slope: (1.5 * alpha - 0.5).max(0.5),
        });
    }
    Ok(SlopeReport {
        p,
        q,
        trials,
        seed,
        l_grid: l_grid.to_vec(),
        alpha_grid: alpha_grid.to_vec(),
        fits,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryPoint {
    pub l: usize,
    pub s: usize,
    pub mean_error_rate: f64,
    pub mean_distance: f64,
    pub error_rates: Vec<f64>,
}

/// Mean threshold-recovery error over `trials` independent pairs for each `l`.
pub fn recovery_experiment(
    l_grid: &[usize],
    alpha: f64,
    p: f64,
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<RecoveryPoint>> {
    if trials == 0 {
        return Err(DiscError::Parameter("need at least one trial".into()));
    }
    l_grid
        .iter()
        .enumerate()
        .map(|(li, &l)| {
            let s = gamma_size(l, alpha);
            let reports: Vec<RecoveryReport> = (0..trials)
                .map(|t| {
                    let stream = ((li as u64) << 20) | t as u64;
                    let (a, b) = two_graph_specs(l, s, p, q, derive_seed(seed, stream))?;
                    let (wa, wb) = rayon::join(|| sample_sbm(&a), || sample_sbm(&b));
                    recover_gamma(&wa?, &wb?, 2)
                })
                .collect::<Result<_>>()?;
            let rates: Vec<f64> = reports.iter().map(|r| r.error_rate).collect();
            Ok(RecoveryPoint {
                l,
                s,
                mean_error_rate: rates.iter().sum::<f64>() / trials as f64,
                mean_distance: reports.iter().map(|r| r.v_gamma_distance).sum::<f64>()
                    / trials as f64,
                error_rates: rates,
            })
        })
        .collect()
}

/// Mean of [`concentration_ratio`] over `trials` samples for each block-size triple.
pub fn concentration_experiment(
    l_grid: &[usize],
    s: usize,
    p: f64,
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    l_grid
        .iter()
        .enumerate()
        .map(|(li, &l)| {
            let ratios: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let spec = SbmSpec::new(
                        vec![l, l, s],
                        p,
                        q,
                        derive_seed(seed, ((li as u64) << 20) | t as u64),
                    )?;
                    concentration_ratio(&spec)
                })
                .collect::<Result<_>>()?;
            Ok(ratios.iter().sum::<f64>() / trials as f64)
        })
        .collect()
}

/// Unit-norm check used by tests.
pub fn is_unit(v: &[f64]) -> bool {
    (norm2(v) - 1.0).abs() < 1e-10
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_limit() {
        let spec = SbmSpec::new(vec![3, 2], 1.0, 0.0, 4).unwrap();
        let w = sample_sbm(&spec).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i != j && w.labels[i] == w.labels[j] { 1.0 } else { 0.0 };
                assert_eq!(w.adjacency[(i, j)], want);
            }
        }
        assert_eq!(w.labels, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn equal_probabilities_density() {
        let (p, n) = (0.3, 200);
        let mut edges = 0.0;
        let reps = 5;
        for seed in 0..reps {
            let spec = SbmSpec::new(vec![n / 2, n / 2], p, p, seed).unwrap();
            let w = sample_sbm(&spec).unwrap();
            for i in 0..n {
                for j in i + 1..n {
                    edges += w.adjacency[(i, j)];
                }
            }
        }
        let pairs = (reps as usize * n * (n - 1) / 2) as f64;
        let density = edges / pairs;
        let se = (p * (1.0 - p) / pairs).sqrt();
        assert!((density - p).abs() <= 3.0 * se, "density {density}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let spec = SbmSpec::new(vec![20, 30], 0.7, 0.1, 9).unwrap();
        assert_eq!(sample_sbm(&spec).unwrap().adjacency, sample_sbm(&spec).unwrap().adjacency);
        let (a, b) = two_graph_specs(10, 4, 0.8, 0.2, 1).unwrap();
        assert_eq!(a.block_sizes, vec![10, 14]);
        assert_eq!(b.block_sizes, vec![10, 10, 4]);
    }

    #[test]
    fn invalid_spec() {
        assert!(SbmSpec::new(vec![3, 2], 0.2, 0.5, 0).is_err());
        assert!(SbmSpec::new(vec![3, 0], 0.5, 0.2, 0).is_err());
        assert!(SbmSpec::new(vec![], 0.5, 0.2, 0).is_err());
    }

    #[test]
    fn expected_single_block() {
        let e = expected_matrix(&SbmSpec::new(vec![2], 0.7, 0.0, 0).unwrap()).unwrap();
        assert_eq!(e, Mat::from_fn(2, 2, |_, _| 0.7));
    }

    #[test]
    fn reduced_route_matches_dense() {
        let spec = SbmSpec::new(vec![100, 100, 25], 0.8, 0.2, 0).unwrap();
        let (dense, dvec) = sym_eigen_desc(&expected_matrix(&spec).unwrap()).unwrap();
        let (red, rvec) = block_eigen(&spec).unwrap();
        for k in 0..3 {
            assert!((dense[k] - red[k]).abs() < 1e-9);
            let overlap = dot(dvec.col_as_slice(k), rvec.col_as_slice(k)).abs();
            assert!((overlap - 1.0).abs() < 1e-10);
        }
        assert!(red[2] >= 15.0);
        assert!(dense[3].abs() < 1e-9);
    }

    #[test]
    fn expected_matvec_matches_matrix() {
        let spec = SbmSpec::new(vec![4, 3, 2], 0.6, 0.1, 0).unwrap();
        let e = expected_matrix(&spec).unwrap();
        let x: Vec<f64> = (0..9).map(|i| (i as f64).cos()).collect();
        let mut y = vec![0.0; 9];
        let mut want = vec![0.0; 9];
        expected_matvec(&spec, &x, &mut y);
        sym_matvec(&e, &x, &mut want);
        for (a, b) in y.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_beta_contrast_is_an_exact_eigenvector() {
        // (e_α - e_β)/sqrt(2l) is the second eigenvector of E[W_B], eigenvalue (p - q) l,
        // unchanged by the γ block.
        let (l, s, p, q) = (100, 10, 0.8, 0.2);
        let b = SbmSpec::new(vec![l, l, s], p, q, 0).unwrap();
        let (vals, ub) = sym_eigen_desc(&expected_matrix(&b).unwrap()).unwrap();
        let h = 1.0 / ((2 * l) as f64).sqrt();
        let contrast: Vec<f64> = (0..2 * l + s)
            .map(|i| if i < l { h } else if i < 2 * l { -h } else { 0.0 })
            .collect();
        let u = ub.col_as_slice(1);
        let c = dot(&contrast, u);
        // sin of the angle between the two lines.
        let sin = contrast
            .iter()
            .zip(u)
            .map(|(a, b)| (a - c * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(sin < 1e-8, "sin {sin}");
        assert!((vals[1] - (p - q) * l as f64).abs() < 1e-9);
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let (a, b) = two_graph_specs(60, 15, 1.0, 0.0, 3).unwrap();
        let wa = sample_sbm(&a).unwrap();
        let wb = sample_sbm(&b).unwrap();
        let rep = recover_gamma(&wa, &wb, 2).unwrap();
        assert_eq!(rep.error_count, 0);
        assert_eq!(rep.error_rate, 0.0);
        assert_eq!(rep.estimated_gamma, (120..135).collect::<Vec<_>>());
        assert!(is_unit(&rep.vector));
        let one = recover_gamma_one_sided(&wa, &wb, 2).unwrap();
        assert_eq!(one.error_count, 0);
    }

    #[test]
    fn recovery_requires_matching_blocks() {
        let a = sample_sbm(&SbmSpec::new(vec![5, 7], 0.9, 0.1, 0).unwrap()).unwrap();
        let b = sample_sbm(&SbmSpec::new(vec![5, 5, 3], 0.9, 0.1, 0).unwrap()).unwrap();
        assert!(matches!(recover_gamma(&a, &b, 2), Err(DiscError::Validation(_))));
    }

    #[test]
    fn lemma1_small() {
        let r = lemma1_check(400, 20, 0.8, 0.2).unwrap();
        assert!(r.lambda3 >= 12.0);
        assert!(r.holds());
        assert!((r.lambda3 - r.lambda3_reduced).abs() < 1e-9);
        assert!((r.distance - r.distance_reduced).abs() < 1e-8);
    }

    #[test]
    fn lemma1_distance_shrinks_with_l() {
        let d: Vec<f64> = [200, 400, 800]
            .iter()
            .map(|&l| lemma1_check(l, 20, 0.8, 0.2).unwrap().distance)
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    }

    #[test]
    fn slope_needs_three_points() {
        assert!(matches!(
            slope_experiment(&[100, 200], &[0.7], 0.8, 0.2, 1, 0),
            Err(DiscError::Parameter(_))
        ));
    }

    #[test]
    fn numerator_of_expected_sample_is_deterministic_part() {
        // With p = 1, q = 0 the sample equals E[W] minus the identity on blocks.
        let v1 = numerator_norm(50, 10, 1.0, 0.0, 1).unwrap();
        let v2 = numerator_norm(50, 10, 1.0, 0.0, 2).unwrap();
        assert!((v1 - v2).abs() < 1e-8);
    }
}
