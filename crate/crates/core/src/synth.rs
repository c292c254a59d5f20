//! Synthetic datasets with planted groups of correlated features.
//!
//! Every correlated group of `m` features is equicorrelated around a shared
//! latent factor: `x_i = sqrt(c) s + sqrt(1 - c) e_i` with independent standard
//! normal `e_i`. The factor `s` is a unit-variance two-component mixture,
//! `s = ±a + sqrt(1 - a^2) z` with equal weights and `a = 1.5 / sqrt(1 + 1.5^2)`,
//! so the samples of a group fall into two Gaussian clouds. The within-group
//! correlation is `c = 1 - 5^-rho`: `rho = 1` gives `c = 0.8`, `rho = 0`
//! gives independent features. All other features are i.i.d. standard normal.
//!
//! Draw order, per dataset `m` from the stream `(seed, m)`: noise columns in
//! increasing feature order, then each group in layout order as `n` sign
//! draws, `n` factor draws, and `n` draws per member column.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use faer::Mat;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data_io::{default_feature_ids, DataMatrix};
use crate::error::{DiscError, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Groups that are noise in one dataset become correlated in the other.
    NewlyConnected,
    /// One correlated group in A splits into two groups in B.
    SplitGroups,
    /// Splits in both directions: A refines features 1-100, B refines 101-200.
    SplitBoth,
    /// Three datasets, each with its own pair of specific groups.
    Multi3,
    /// `NewlyConnected` with B's features 151-200 correlated at level `rho`.
    PartialCorr,
}

impl Problem {
    pub const ALL: [Problem; 5] = [
        Problem::NewlyConnected,
        Problem::SplitGroups,
        Problem::SplitBoth,
        Problem::Multi3,
        Problem::PartialCorr,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Problem::NewlyConnected => "newly_connected",
            Problem::SplitGroups => "split_groups",
            Problem::SplitBoth => "split_both",
            Problem::Multi3 => "multi3",
            Problem::PartialCorr => "partial_corr",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Problem {
    type Err = DiscError;

    fn from_str(s: &str) -> Result<Self> {
        Problem::ALL
            .into_iter()
            .find(|p| p.tag() == s)
            .ok_or_else(|| DiscError::Parameter(format!("unknown toy problem {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub problem: Problem,
    pub n: usize,
    pub seed: u64,
    /// Correlation level of B's features 151-200 (`PartialCorr` only), in `[0, 1]`.
    pub rho: f64,
}

impl ToySpec {
    pub fn new(problem: Problem) -> Self {
        Self {
            problem,
            n: 10_000,
            seed: 0,
            rho: 1.0,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(DiscError::Parameter(format!("n must be at least 100, got {}", self.n)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(DiscError::Parameter(format!("rho must be in [0, 1], got {}", self.rho)));
        }
        Ok(())
    }
}

/// Within-group correlation for a decay level `rho`.
pub fn correlation_level(rho: f64) -> f64 {
    1.0 - 5f64.powf(-rho)
}

/// A correlated group of features with its within-group correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub features: Range<usize>,
    pub corr: f64,
}

/// Feature layout of a problem.
#[derive(Debug, Clone)]
pub struct Layout {
    pub p: usize,
    pub names: Vec<&'static str>,
    pub groups: Vec<Vec<Group>>,
    pub ground_truth: Vec<Vec<usize>>,
}

fn groups(bounds: &[(usize, usize)], corr: f64) -> Vec<Group> {
    bounds
        .iter()
        .map(|&(a, b)| Group {
            features: a..b,
            corr,
        })
        .collect()
}

fn pairs(start: usize, size: usize, count: usize) -> Vec<(usize, usize)> {
    (0..count)
        .map(|i| (start + i * size, start + (i + 1) * size))
        .collect()
}

pub fn layout(spec: &ToySpec) -> Layout {
    let c1 = correlation_level(1.0);
    let cat = |parts: &[&[(usize, usize)]]| -> Vec<(usize, usize)> { parts.concat() };
    match spec.problem {
        Problem::NewlyConnected | Problem::PartialCorr => {
            let shared = pairs(100, 25, 2);
            let own_a = pairs(150, 25, 2);
            let own_b = pairs(200, 25, 2);
            let mut gb = groups(&cat(&[&shared]), c1);
            if spec.problem == Problem::PartialCorr {
                gb.extend(groups(&own_a, correlation_level(spec.rho)));
            }
            gb.extend(groups(&own_b, c1));
            Layout {
                p: 250,
                names: vec!["A", "B"],
                groups: vec![groups(&cat(&[&shared, &own_a]), c1), gb],
                ground_truth: vec![(150..200).collect(), (200..250).collect()],
            }
        }
        Problem::SplitGroups => Layout {
            p: 200,
            names: vec!["A", "B"],
            groups: vec![
                groups(&[(0, 100), (100, 200)], c1),
                groups(&[(0, 100), (100, 125), (125, 200)], c1),
            ],
            ground_truth: vec![Vec::new(), (100..200).collect()],
        },
        Problem::SplitBoth => Layout {
            p: 200,
            names: vec!["A", "B"],
            groups: vec![
                groups(&[(0, 75), (75, 100), (100, 200)], c1),
                groups(&[(0, 100), (100, 125), (125, 200)], c1),
            ],
            ground_truth: vec![(0..100).collect(), (100..200).collect()],
        },
        Problem::Multi3 => {
            let all = pairs(100, 25, 2);
            let ab = pairs(150, 25, 2);
            let bc = pairs(250, 25, 2);
            let a = pairs(300, 25, 2);
            let b = pairs(200, 25, 2);
            let c = pairs(350, 25, 2);
            Layout {
                p: 400,
                names: vec!["A", "B", "C"],
                groups: vec![
                    groups(&cat(&[&all, &ab, &a]), c1),
                    groups(&cat(&[&all, &ab, &b, &bc]), c1),
                    groups(&cat(&[&all, &bc, &c]), c1),
                ],
                ground_truth: vec![
                    (300..350).collect(),
                    (200..250).collect(),
                    (350..400).collect(),
                ],
            }
        }
    }
}

/// Generated datasets with the indices of each dataset's specific features.
#[derive(Debug, Clone)]
pub struct ToyOutput {
    pub names: Vec<String>,
    pub datasets: Vec<DataMatrix>,
    /// 0-based feature indices per dataset.
    pub ground_truth: Vec<Vec<usize>>,
}

impl ToyOutput {
    /// `{dataset: [indices]}`.
    pub fn ground_truth_map(&self) -> BTreeMap<String, Vec<usize>> {
        self.names
            .iter()
            .cloned()
            .zip(self.ground_truth.iter().cloned())
            .collect()
    }
}

const MIX_OFFSET: f64 = 1.5;

fn fill_dataset(n: usize, p: usize, gs: &[Group], seed: u64, stream: u64) -> Mat<f64> {
    let mut rng = stream_rng(seed, stream);
    let mut x = Mat::zeros(n, p);
    let mut in_group = vec![false; p];
    for g in gs {
        g.features.clone().for_each(|j| in_group[j] = true);
    }
    for j in (0..p).filter(|&j| !in_group[j]) {
        for v in x.col_as_slice_mut(j) {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    let a = MIX_OFFSET / (1.0 + MIX_OFFSET * MIX_OFFSET).sqrt();
    let b = (1.0 - a * a).sqrt();
    for g in gs {
        let signs: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<f64>() < 0.5 { -1.0 } else { 1.0 })
            .collect();
        let factor: Vec<f64> = signs
            .iter()
            .map(|sg| {
                let z: f64 = StandardNormal.sample(&mut rng);
                a * sg + b * z
            })
            .collect();
        let (sc, se) = (g.corr.sqrt(), (1.0 - g.corr).sqrt());
        for j in g.features.clone() {
            for (v, f) in x.col_as_slice_mut(j).iter_mut().zip(&factor) {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v = sc * f + se * e;
            }
        }
    }
    x
}

pub fn generate(spec: &ToySpec) -> Result<ToyOutput> {
    spec.validate()?;
    let lay = layout(spec);
    let ids = default_feature_ids(lay.p);
    let datasets = lay
        .groups
        .iter()
        .enumerate()
        .map(|(m, gs)| DataMatrix::new(fill_dataset(spec.n, lay.p, gs, spec.seed, m as u64), ids.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ToyOutput {
        names: lay.names.iter().map(|s| s.to_string()).collect(),
        datasets,
        ground_truth: lay.ground_truth,
    })
}

/// Sample Pearson correlations with the indices of constant columns.
#[derive(Debug, Clone)]
pub struct Correlation {
    pub matrix: Mat<f64>,
    /// Columns with zero variance; their rows and columns are zero.
    pub zero_variance: Vec<usize>,
}

pub fn correlation_matrix(data: &DataMatrix) -> Correlation {
    let (n, p) = (data.sample_count(), data.feature_count());
    let mut centred = data.values().clone();
    let mut zero_variance = Vec::new();
    for j in 0..p {
        let col = centred.col_as_slice_mut(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm > 0.0 {
            col.iter_mut().for_each(|v| *v /= nrm);
        } else {
            zero_variance.push(j);
        }
    }
    if !zero_variance.is_empty() {
        log::warn!(
            "{} constant feature column(s); their correlations are set to 0",
            zero_variance.len()
        );
    }
    let mut m = centred.transpose() * &centred;
    for j in 0..p {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(j, j)] = if zero_variance.contains(&j) { 0.0 } else { 1.0 };
    }
    Correlation {
        matrix: m,
        zero_variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_abs(c: &Mat<f64>, a: Range<usize>, b: Range<usize>) -> f64 {
        let mut s = 0.0;
        let mut k = 0;
        for i in a {
            for j in b.clone() {
                if i != j {
                    s += c[(i, j)].abs();
                    k += 1;
                }
            }
        }
        s / k as f64
    }

    #[test]
    fn problem_tags_round_trip() {
        for p in Problem::ALL {
            assert_eq!(p.tag().parse::<Problem>().unwrap(), p);
        }
        assert!("toy9".parse::<Problem>().is_err());
    }

    #[test]
    fn newly_connected_ground_truth() {
        let out = generate(&ToySpec::new(Problem::NewlyConnected).with_n(200)).unwrap();
        assert_eq!(out.ground_truth[0], (150..200).collect::<Vec<_>>());
        assert_eq!(out.ground_truth[1], (200..250).collect::<Vec<_>>());
        assert!(out.ground_truth[0].iter().all(|i| !out.ground_truth[1].contains(i)));
        assert_eq!(out.datasets[0].feature_ids(), out.datasets[1].feature_ids());
        assert_eq!(out.datasets[0].feature_count(), 250);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ToySpec::new(Problem::Multi3).with_n(150).with_seed(4);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        for (x, y) in a.datasets.iter().zip(&b.datasets) {
            assert_eq!(x, y);
        }
        let c = generate(&spec.clone().with_seed(5)).unwrap();
        assert_ne!(a.datasets[0], c.datasets[0]);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&ToySpec::new(Problem::SplitGroups).with_n(50)).is_err());
        assert!(generate(&ToySpec::new(Problem::PartialCorr).with_rho(1.5)).is_err());
    }

    #[test]
    fn split_groups_correlation_pattern() {
        let out = generate(&ToySpec::new(Problem::SplitGroups)).unwrap();
        let c = correlation_matrix(&out.datasets[1]).matrix;
        assert!(mean_abs(&c, 100..125, 100..125) >= 0.3);
        assert!(mean_abs(&c, 125..200, 125..200) >= 0.3);
        assert!(mean_abs(&c, 100..125, 125..200) <= 0.1);
    }

    #[test]
    fn partial_corr_zero_is_uncorrelated() {
        let out = generate(&ToySpec::new(Problem::PartialCorr).with_rho(0.0)).unwrap();
        let c = correlation_matrix(&out.datasets[1]).matrix;
        for i in 150..200 {
            for j in 150..200 {
                if i != j {
                    assert!(c[(i, j)].abs() <= 0.05, "corr({i},{j}) = {}", c[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn block_covariance_converges() {
        let n = 10_000;
        let out = generate(&ToySpec::new(Problem::NewlyConnected).with_n(n)).unwrap();
        let x = &out.datasets[0];
        let c = correlation_level(1.0);
        let block = 150..175;
        let m = block.len();
        let means: Vec<f64> = block.clone().map(|j| x.column(j).iter().sum::<f64>() / n as f64).collect();
        let mut err = 0.0;
        for (a, i) in block.clone().enumerate() {
            for (b, j) in block.clone().enumerate() {
                let cov: f64 = x
                    .column(i)
                    .iter()
                    .zip(x.column(j))
                    .map(|(u, v)| (u - means[a]) * (v - means[b]))
                    .sum::<f64>()
                    / (n - 1) as f64;
                let target = if i == j { 1.0 } else { c };
                err += (cov - target).powi(2);
            }
        }
        // Signal rank 1: bound 5 * rank * m / sqrt(n).
        assert!(err.sqrt() <= 5.0 * m as f64 / (n as f64).sqrt(), "frobenius {}", err.sqrt());
    }

    #[test]
    fn correlation_small_cases() {
        let same = DataMatrix::with_default_ids(Mat::from_fn(4, 2, |i, _| i as f64 * 0.5)).unwrap();
        let c = correlation_matrix(&same);
        assert!((c.matrix[(0, 1)] - 1.0).abs() < 1e-12);
        assert!(c.zero_variance.is_empty());

        let konst = DataMatrix::with_default_ids(Mat::from_fn(4, 2, |i, j| if j == 0 { 3.0 } else { i as f64 })).unwrap();
        let c = correlation_matrix(&konst);
        assert_eq!(c.zero_variance, vec![0]);
        assert_eq!(c.matrix[(0, 1)], 0.0);
        assert_eq!(c.matrix[(0, 0)], 0.0);
        assert_eq!(c.matrix[(1, 1)], 1.0);
    }

    #[test]
    fn independent_columns_are_nearly_uncorrelated() {
        let n = 10_000;
        let out = generate(&ToySpec::new(Problem::NewlyConnected).with_n(n)).unwrap();
        let c = correlation_matrix(&out.datasets[0]).matrix;
        let bound = 3.0 / (n as f64).sqrt();
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    assert!(c[(i, j)].abs() <= bound.max(0.05));
                }
            }
        }
    }
}
