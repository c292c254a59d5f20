//! Diffusion eigenbases, complementary projectors and differential vectors.

use faer::{Mat, Side};

use crate::data_io::{align, DataMatrix};
use crate::error::{DiscError, Result};
use crate::feature_graph::{build_graph, FeatureGraph, KernelSpec};
use crate::linalg::{fix_column_signs, fix_sign, sym_eigen_desc};

/// Largest admissible condition number of `U^T U`.
pub const MAX_GRAM_CONDITION: f64 = 1e8;
/// Relative tolerance below which concatenated basis columns are dropped.
pub const RANK_DROP_TOL: f64 = 1e-10;

/// Leading right eigenvectors of a random-walk matrix, unit Euclidean norm.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    vectors: Mat<f64>,
    eigenvalues: Vec<f64>,
}

impl SpectralBasis {
    pub fn vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    /// Sorted descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn empty(p: usize) -> Self {
        Self {
            vectors: Mat::zeros(p, 0),
            eigenvalues: Vec::new(),
        }
    }
}

/// Top-`d` right eigenvectors of `P = D^-1 W`.
///
/// Computed through the symmetric matrix `S = D^-1/2 W D^-1/2`: if `S phi =
/// lambda phi` then `P (D^-1/2 phi) = lambda D^-1/2 phi`.
pub fn leading_eigenvectors(graph: &FeatureGraph, d: usize) -> Result<SpectralBasis> {
    let p = graph.node_count();
    if d > p {
        return Err(DiscError::Parameter(format!(
            "requested {d} eigenvectors of a {p}-node graph"
        )));
    }
    if d == 0 {
        return Ok(SpectralBasis::empty(p));
    }
    let (values, phi) = sym_eigen_desc(&graph.normalized_affinity())?;
    let inv_sqrt: Vec<f64> = graph.degrees().iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut vectors = Mat::from_fn(p, d, |i, j| phi[(i, j)] * inv_sqrt[i]);
    for j in 0..d {
        let col = vectors.col_as_slice_mut(j);
        let nrm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        col.iter_mut().for_each(|x| *x /= nrm);
        fix_sign(col);
    }
    Ok(SpectralBasis {
        vectors,
        eigenvalues: values[..d].to_vec(),
    })
}

/// Orthogonal projector onto the complement of a column span.
#[derive(Debug, Clone)]
pub struct Projector {
    matrix: Mat<f64>,
    rank: usize,
    dropped: usize,
}

impl Projector {
    pub fn identity(p: usize) -> Self {
        Self {
            matrix: Mat::identity(p, p),
            rank: 0,
            dropped: 0,
        }
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    /// Dimension of the span that is projected out.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Columns discarded as linearly dependent.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Projector onto the orthogonal complement of the columns of `u`.
    pub fn complement_of(u: &Mat<f64>) -> Result<Self> {
        projector_from_columns(u, Some(RANK_DROP_TOL))
    }
}

/// `Q = I - Q_r Q_r^T` from a column-pivoted QR of `u`. Columns whose pivot
/// falls below `drop_tol * |R_00|` are treated as dependent and skipped.
fn projector_from_columns(u: &Mat<f64>, drop_tol: Option<f64>) -> Result<Projector> {
    let (p, d) = (u.nrows(), u.ncols());
    if d == 0 {
        return Ok(Projector::identity(p));
    }
    if d > p {
        return Err(DiscError::Parameter(format!(
            "{d} basis vectors in dimension {p}"
        )));
    }
    let qr = u.col_piv_qr();
    let r = qr.thin_R();
    let r00 = r[(0, 0)].abs();
    if r00 == 0.0 {
        return Err(DiscError::Degenerate("basis is identically zero".into()));
    }
    let rank = match drop_tol {
        Some(tol) => (0..d).take_while(|&i| r[(i, i)].abs() > tol * r00).count(),
        None => d,
    };
    let q_thin = qr.compute_thin_Q();
    let mut g = Mat::<f64>::zeros(p, p);
    for j in 0..p {
        for i in j..p {
            let mut s = 0.0;
            for c in 0..rank {
                s += q_thin[(i, c)] * q_thin[(j, c)];
            }
            let v = if i == j { 1.0 - s } else { -s };
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(Projector {
        matrix: g,
        rank,
        dropped: d - rank,
    })
}

/// `Q = I - U (U^T U)^-1 U^T`, refusing bases whose Gram matrix is ill-conditioned.
pub fn complement_projector(basis: &SpectralBasis) -> Result<Projector> {
    let u = basis.vectors();
    if basis.dim() > 0 {
        let s = u
            .singular_values()
            .map_err(|e| DiscError::Numeric(format!("SVD failed: {e:?}")))?;
        let smin = s.last().copied().unwrap_or(0.0);
        let cond = if smin > 0.0 {
            (s[0] / smin).powi(2)
        } else {
            f64::INFINITY
        };
        if cond >= MAX_GRAM_CONDITION {
            return Err(DiscError::Numeric(format!(
                "Gram matrix of the {}-vector eigenbasis has condition number {cond:.3e}; \
                 use a smaller d",
                basis.dim()
            )));
        }
    }
    projector_from_columns(u, None)
}

/// Projector onto the complement of the concatenated bases, dropping dependent columns.
pub fn complement_projector_multi(bases: &[&SpectralBasis], p: usize) -> Result<Projector> {
    let total: usize = bases.iter().map(|b| b.dim()).sum();
    let mut u = Mat::zeros(p, total);
    let mut c = 0;
    for b in bases {
        for j in 0..b.dim() {
            u.col_as_slice_mut(c).copy_from_slice(b.vectors().col_as_slice(j));
            c += 1;
        }
    }
    if total > p {
        // More columns than the ambient dimension: reduce to a p-column spanning set first.
        let mut proj = projector_from_columns(&u_reduced(&u, p)?, Some(RANK_DROP_TOL))?;
        proj.dropped = total - proj.rank;
        return Ok(proj);
    }
    projector_from_columns(&u, Some(RANK_DROP_TOL))
}

// Orthonormal basis of the column span of a wide matrix via its SVD.
fn u_reduced(u: &Mat<f64>, p: usize) -> Result<Mat<f64>> {
    let svd = u
        .thin_svd()
        .map_err(|e| DiscError::Numeric(format!("SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let uu = svd.U();
    let cols = (0..p.min(s.nrows())).collect::<Vec<_>>();
    Ok(Mat::from_fn(p, cols.len(), |i, j| uu[(i, cols[j])] * s[cols[j]]))
}

/// Differential vectors and their significance levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialResult {
    vectors: Mat<f64>,
    significance: Vec<f64>,
}

impl DifferentialResult {
    pub fn from_parts(vectors: Mat<f64>, significance: Vec<f64>) -> Result<Self> {
        if vectors.ncols() != significance.len() {
            return Err(DiscError::Shape(format!(
                "{} vectors but {} significance values",
                vectors.ncols(),
                significance.len()
            )));
        }
        if significance.iter().any(|s| !(*s >= 0.0)) {
            return Err(DiscError::Validation("significance must be non-negative".into()));
        }
        if significance.windows(2).any(|w| w[1] > w[0]) {
            return Err(DiscError::Validation("significance must be non-increasing".into()));
        }
        Ok(Self {
            vectors,
            significance,
        })
    }

    /// `p x r` loadings with orthonormal columns.
    pub fn vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    pub fn significance(&self) -> &[f64] {
        &self.significance
    }

    pub fn r(&self) -> usize {
        self.significance.len()
    }
}

/// Top-`r` right singular triplets of `m`, sign-normalized.
pub fn top_right_singular(m: &Mat<f64>, r: usize) -> Result<DifferentialResult> {
    let p = m.ncols();
    if r > p {
        return Err(DiscError::Parameter(format!("r = {r} exceeds p = {p}")));
    }
    if r == 0 {
        return DifferentialResult::from_parts(Mat::zeros(p, 0), Vec::new());
    }
    let svd = m
        .svd()
        .map_err(|e| DiscError::Numeric(format!("SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let v = svd.V();
    let mut vectors = Mat::from_fn(p, r, |i, j| v[(i, j)]);
    fix_column_signs(&mut vectors);
    let sigma: Vec<f64> = (0..r).map(|j| s[j].max(0.0)).collect();
    DifferentialResult::from_parts(vectors, sigma)
}

/// Right singular vectors of `P_own Q_other`.
pub fn differential_vectors(
    p_own: &FeatureGraph,
    q_other: &Projector,
    r: usize,
) -> Result<DifferentialResult> {
    let p = p_own.node_count();
    if q_other.matrix().nrows() != p {
        return Err(DiscError::Shape(format!(
            "graph has {p} nodes, projector is {} x {}",
            q_other.matrix().nrows(),
            q_other.matrix().ncols()
        )));
    }
    let m = p_own.rw_matrix() * q_other.matrix();
    top_right_singular(&m, r)
}

pub fn default_r(p: usize) -> usize {
    p.min(10)
}

/// Two-dataset pipeline on prebuilt graphs. Returns the results for A and B.
pub fn disc_pair_graphs(
    ga: &FeatureGraph,
    gb: &FeatureGraph,
    d_a: usize,
    d_b: usize,
    r: usize,
) -> Result<(DifferentialResult, DifferentialResult)> {
    if ga.node_count() != gb.node_count() {
        return Err(DiscError::Shape("graphs have different node counts".into()));
    }
    let (ua, ub) = rayon::join(|| leading_eigenvectors(ga, d_a), || leading_eigenvectors(gb, d_b));
    let (qa, qb) = (complement_projector(&ua?)?, complement_projector(&ub?)?);
    let (va, vb) = rayon::join(
        || differential_vectors(ga, &qb, r),
        || differential_vectors(gb, &qa, r),
    );
    Ok((va?, vb?))
}

/// Algorithm for two datasets: `V_A` from `P_A Q_B` and `V_B` from `P_B Q_A`.
///
/// `b` is reordered to `a`'s feature order when their headers differ.
pub fn disc_pair(
    a: &DataMatrix,
    b: &DataMatrix,
    d_a: usize,
    d_b: usize,
    r: usize,
    kernel: &KernelSpec,
) -> Result<(DifferentialResult, DifferentialResult)> {
    let b = align(a, b)?.apply(b)?;
    let (ga, gb) = rayon::join(|| build_graph(a, kernel), || build_graph(&b, kernel));
    disc_pair_graphs(&ga?, &gb?, d_a, d_b, r)
}

/// Output of [`disc_multi`].
#[derive(Debug, Clone)]
pub struct MultiResult {
    pub results: Vec<DifferentialResult>,
    /// Dependent basis columns dropped when forming each dataset's projector.
    pub dropped: Vec<usize>,
}

/// Multi-dataset pipeline on prebuilt graphs.
pub fn disc_multi_graphs(graphs: &[FeatureGraph], d: &[usize], r: usize) -> Result<MultiResult> {
    use rayon::prelude::*;
    let m = graphs.len();
    if m < 2 {
        return Err(DiscError::Parameter("need at least two datasets".into()));
    }
    if d.len() != m {
        return Err(DiscError::Parameter(format!(
            "{} basis sizes for {m} datasets",
            d.len()
        )));
    }
    let p = graphs[0].node_count();
    if graphs.iter().any(|g| g.node_count() != p) {
        return Err(DiscError::Shape("graphs have different node counts".into()));
    }
    let bases: Vec<SpectralBasis> = graphs
        .par_iter()
        .zip(d.par_iter())
        .map(|(g, &dm)| leading_eigenvectors(g, dm))
        .collect::<Result<_>>()?;
    let out: Vec<(DifferentialResult, usize)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let others: Vec<&SpectralBasis> =
                bases.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, b)| b).collect();
            let q = complement_projector_multi(&others, p)?;
            Ok((differential_vectors(&graphs[i], &q, r)?, q.dropped()))
        })
        .collect::<Result<_>>()?;
    let (results, dropped) = out.into_iter().unzip();
    Ok(MultiResult { results, dropped })
}

/// Each dataset against the span of all other datasets' eigenbases.
pub fn disc_multi(
    datasets: &[DataMatrix],
    d: &[usize],
    r: usize,
    kernel: &KernelSpec,
) -> Result<MultiResult> {
    use rayon::prelude::*;
    let first = datasets
        .first()
        .ok_or_else(|| DiscError::Parameter("no datasets".into()))?;
    let graphs: Vec<FeatureGraph> = datasets
        .par_iter()
        .map(|x| build_graph(&align(first, x)?.apply(x)?, kernel))
        .collect::<Result<_>>()?;
    disc_multi_graphs(&graphs, d, r)
}

/// Generalized eigenpairs of the ratio-cut pair.
#[derive(Debug, Clone)]
pub struct GeneralizedCut {
    pub values: Vec<f64>,
    /// `p x r`, unit columns.
    pub vectors: Mat<f64>,
}

/// Top-`r` eigenvectors of `(L_A + eps I)^-1 L_B` with `L = D - W`.
///
/// With `L_A + eps I = G G^T` the problem becomes the symmetric eigenproblem of
/// `G^-1 L_B G^-T`, whose eigenvectors `y` map back as `f = G^-T y`.
pub fn generalized_cut_vectors(
    graph_a: &FeatureGraph,
    graph_b: &FeatureGraph,
    eps: f64,
    r: usize,
) -> Result<GeneralizedCut> {
    let p = graph_a.node_count();
    if graph_b.node_count() != p {
        return Err(DiscError::Shape("graphs have different node counts".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(DiscError::Parameter(format!("eps must be positive, got {eps}")));
    }
    if r > p {
        return Err(DiscError::Parameter(format!("r = {r} exceeds p = {p}")));
    }
    let mut la = graph_a.laplacian();
    for i in 0..p {
        la[(i, i)] += eps;
    }
    let llt = la
        .llt(Side::Lower)
        .map_err(|e| DiscError::Numeric(format!("L_A + eps I is not positive definite: {e:?}")))?;
    let g = llt.L().to_owned();

    // X = G^-1 L_B, then C = G^-1 X^T = G^-1 L_B G^-T.
    let mut x = graph_b.laplacian();
    g.solve_lower_triangular_in_place(&mut x);
    let mut c = x.transpose().to_owned();
    g.solve_lower_triangular_in_place(&mut c);
    let c = Mat::from_fn(p, p, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    if (0..p).any(|j| c.col_as_slice(j).iter().any(|v| !v.is_finite())) {
        return Err(DiscError::Numeric("singular system in generalized eigenproblem".into()));
    }

    let (vals, y) = sym_eigen_desc(&c)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()));
    order.truncate(r);
    let mut f = Mat::from_fn(p, r, |i, j| y[(i, order[j])]);
    g.transpose().solve_upper_triangular_in_place(&mut f);
    for j in 0..r {
        let col = f.col_as_slice_mut(j);
        let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        col.iter_mut().for_each(|v| *v /= nrm);
        fix_sign(col);
    }
    Ok(GeneralizedCut {
        values: order.iter().map(|&i| vals[i]).collect(),
        vectors: f,
    })
}
