use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use disc_core::data_io::{
    file_checksum, load_labeled_csv, load_vectors_csv, save_labels_csv, save_matrix_csv,
    write_atomic, write_json,
};
use disc_core::downstream::{run_protocol, EvalProtocol};
use disc_core::sbm::{recovery_experiment, slope_experiment, RecoveryPoint, SlopeReport};
use disc_core::spectral::{default_r, disc_multi_graphs, disc_pair_graphs};
use disc_core::synth::{generate, ToySpec};
use disc_core::{
    align, build_graph, cluster_features, load_csv, save_csv, save_result, significance_elbow,
    DataMatrix, DiscError, FeatureClustering, KernelSpec, Mat, RunSummary,
};
use serde::Serialize;

use crate::args::{ClusterArgs, EvalArgs, KernelArgs, MultiArgs, RunArgs, SbmArgs, SynthArgs};

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn load(path: &Path, has_header: bool, kernel: &KernelArgs) -> Result<DataMatrix> {
    let data = load_csv(path, has_header)?;
    Ok(if kernel.zscore {
        data.zscore_columns()
    } else {
        data
    })
}

fn checksums(paths: &[&Path]) -> Result<HashMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), file_checksum(p)?)))
        .collect()
}

/// `feature_id,label_<name>...` for several clusterings over the same features.
fn write_clusters(path: &Path, ids: &[String], named: &[(String, FeatureClustering)]) -> Result<()> {
    let mut out = String::from("feature_id");
    for (name, _) in named {
        out.push_str(&format!(",label_{name}"));
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for (_, c) in named {
            out.push_str(&format!(",{}", c.labels[i]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())?;
    Ok(())
}

pub fn run(args: &RunArgs) -> Result<()> {
    let has_header = !args.input.no_header;
    let a = load(&args.a, has_header, &args.kernel)?;
    let b = load(&args.b, has_header, &args.kernel)?;
    let b = align(&a, &b)
        .with_context(|| format!("{} and {} do not share features", args.a.display(), args.b.display()))?
        .apply(&b)?;
    let kernel = args.kernel.spec();
    let p = a.feature_count();
    let r = args.r.unwrap_or_else(|| default_r(p));

    let (ga, gb) = rayon::join(|| build_graph(&a, &kernel), || build_graph(&b, &kernel));
    let (ga, gb) = (ga?, gb?);
    prepare_out(&args.out)?;
    let ids = a.feature_ids();
    if args.dump_w {
        save_matrix_csv(args.out.join("w_a.csv"), ga.weights(), ids, Some(ids))?;
        save_matrix_csv(args.out.join("w_b.csv"), gb.weights(), ids, Some(ids))?;
    }

    let (va, vb) = disc_pair_graphs(&ga, &gb, args.d_a, args.d_b, r)?;
    save_result(&va, ids, &args.out, "a")?;
    save_result(&vb, ids, &args.out, "b")?;

    let mut metrics = HashMap::new();
    if let Some(k) = args.k_clusters {
        let ca = cluster_features(va.vectors(), k, args.seed)?;
        let cb = cluster_features(vb.vectors(), k, args.seed)?;
        metrics.insert("inertia_a".to_owned(), ca.inertia);
        metrics.insert("inertia_b".to_owned(), cb.inertia);
        write_clusters(
            &args.out.join("clusters.csv"),
            ids,
            &[("a".into(), ca), ("b".into(), cb)],
        )?;
    }

    let summary = RunSummary {
        d_a: args.d_a,
        d_b: args.d_b,
        kernel: kernel.name().to_owned(),
        knn_k: kernel.resolved_knn_k(p),
        seed: args.seed,
        n_a: a.sample_count(),
        n_b: b.sample_count(),
        p,
        r,
        bandwidth: kernel.bandwidth(),
        standardized: args.kernel.zscore,
        sigma_a: va.significance().to_vec(),
        sigma_b: vb.significance().to_vec(),
        suggested_r_a: Some(significance_elbow(va.significance())),
        suggested_r_b: Some(significance_elbow(vb.significance())),
        k_clusters: args.k_clusters,
        input_checksums: checksums(&[&args.a, &args.b])?,
        metrics,
    };
    write_json(&summary, args.out.join("summary.json"))?;
    println!(
        "sigma_a[0] = {:.6}, sigma_b[0] = {:.6}, suggested r: a = {}, b = {}",
        summary.sigma_a.first().copied().unwrap_or(0.0),
        summary.sigma_b.first().copied().unwrap_or(0.0),
        summary.suggested_r_a.unwrap_or(0),
        summary.suggested_r_b.unwrap_or(0),
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct MultiSummary {
    names: Vec<String>,
    inputs: Vec<String>,
    d: Vec<usize>,
    kernel: String,
    knn_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
    standardized: bool,
    seed: u64,
    n: Vec<usize>,
    p: usize,
    r: usize,
    dropped_columns: Vec<usize>,
    sigma: BTreeMap<String, Vec<f64>>,
    suggested_r: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_clusters: Option<usize>,
    input_checksums: HashMap<String, String>,
}

fn dataset_name(m: usize) -> String {
    if m < 26 {
        ((b'a' + m as u8) as char).to_string()
    } else {
        format!("d{}", m + 1)
    }
}

pub fn multi(args: &MultiArgs) -> Result<()> {
    let m = args.inputs.len();
    if m < 2 {
        return Err(DiscError::Parameter("multi needs at least two --input files".into()).into());
    }
    let d = match args.d.len() {
        1 => vec![args.d[0]; m],
        k if k == m => args.d.clone(),
        k => {
            return Err(DiscError::Parameter(format!(
                "--d has {k} values for {m} inputs; give one value or one per input"
            ))
            .into())
        }
    };
    let has_header = !args.input.no_header;
    let mut data = Vec::with_capacity(m);
    for path in &args.inputs {
        let x = load(path, has_header, &args.kernel)?;
        let x = match data.first() {
            Some(first) => align(first, &x)
                .with_context(|| format!("{} does not share the first input's features", path.display()))?
                .apply(&x)?,
            None => x,
        };
        data.push(x);
    }
    let kernel = args.kernel.spec();
    let p = data[0].feature_count();
    let r = args.r.unwrap_or_else(|| default_r(p));
    let graphs = {
        use rayon::prelude::*;
        data.par_iter()
            .map(|x| build_graph(x, &kernel))
            .collect::<disc_core::Result<Vec<_>>>()?
    };
    let out = disc_multi_graphs(&graphs, &d, r)?;

    prepare_out(&args.out)?;
    let ids = data[0].feature_ids();
    let names: Vec<String> = (0..m).map(dataset_name).collect();
    let mut clusters = Vec::new();
    for (name, res) in names.iter().zip(&out.results) {
        save_result(res, ids, &args.out, name)?;
        if let Some(k) = args.k_clusters {
            clusters.push((name.clone(), cluster_features(res.vectors(), k, args.seed)?));
        }
    }
    if !clusters.is_empty() {
        write_clusters(&args.out.join("clusters.csv"), ids, &clusters)?;
    }
    let paths: Vec<&Path> = args.inputs.iter().map(PathBuf::as_path).collect();
    let summary = MultiSummary {
        names: names.clone(),
        inputs: args.inputs.iter().map(|p| p.display().to_string()).collect(),
        d,
        kernel: kernel.name().to_owned(),
        knn_k: kernel.resolved_knn_k(p),
        bandwidth: kernel.bandwidth(),
        standardized: args.kernel.zscore,
        seed: args.seed,
        n: data.iter().map(DataMatrix::sample_count).collect(),
        p,
        r,
        dropped_columns: out.dropped.clone(),
        sigma: names
            .iter()
            .cloned()
            .zip(out.results.iter().map(|x| x.significance().to_vec()))
            .collect(),
        suggested_r: names
            .iter()
            .cloned()
            .zip(out.results.iter().map(|x| significance_elbow(x.significance())))
            .collect(),
        k_clusters: args.k_clusters,
        input_checksums: checksums(&paths)?,
    };
    write_json(&summary, args.out.join("summary.json"))?;
    for (name, res) in names.iter().zip(&out.results) {
        println!(
            "{name}: sigma[0] = {:.6}, suggested r = {}",
            res.significance().first().copied().unwrap_or(0.0),
            significance_elbow(res.significance())
        );
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let spec = ToySpec::new(args.problem)
        .with_n(args.n)
        .with_seed(args.seed)
        .with_rho(args.rho);
    let toy = generate(&spec)?;
    prepare_out(&args.out)?;
    for (name, data) in toy.names.iter().zip(&toy.datasets) {
        save_csv(data, args.out.join(format!("{name}.csv")))?;
    }
    write_json(&toy.ground_truth_map(), args.out.join("ground_truth.json"))?;
    write_json(&spec, args.out.join("summary.json"))?;
    println!(
        "wrote {} datasets of {} x {} to {}",
        toy.datasets.len(),
        spec.n,
        toy.datasets[0].feature_count(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct SbmSummary<'a> {
    slopes: &'a SlopeReport,
    recovery: BTreeMap<String, Vec<RecoveryPoint>>,
}

pub fn sbm_validate(args: &SbmArgs) -> Result<()> {
    let report = slope_experiment(&args.l_grid, &args.alpha_grid, args.p, args.q, args.trials, args.seed)?;
    prepare_out(&args.out)?;
    report.write_rows_csv(args.out.join("slopes.csv"))?;
    report.write_fits_csv(args.out.join("slope_fits.csv"))?;

    println!("{:>6} {:>10} {:>8} {:>12}", "alpha", "quantity", "fitted", "theoretical");
    for f in &report.fits {
        println!(
            "{:>6.2} {:>10} {:>8.3} {:>12.3}",
            f.alpha, f.quantity, f.fitted_slope, f.theoretical_slope
        );
    }

    let mut recovery = BTreeMap::new();
    if !args.no_recovery {
        let mut csv = String::from("alpha,l,s,trial,error_rate\n");
        println!("{:>6} {:>6} {:>5} {:>12}", "alpha", "l", "s", "mean_error");
        for &alpha in &args.alpha_grid {
            let points = recovery_experiment(&args.l_grid, alpha, args.p, args.q, args.trials, args.seed)?;
            for pt in &points {
                println!("{alpha:>6.2} {:>6} {:>5} {:>12.4}", pt.l, pt.s, pt.mean_error_rate);
                for (t, e) in pt.error_rates.iter().enumerate() {
                    csv.push_str(&format!("{alpha},{},{},{t},{e:.16e}\n", pt.l, pt.s));
                }
            }
            recovery.insert(format!("{alpha}"), points);
        }
        write_atomic(args.out.join("recovery.csv"), csv.as_bytes())?;
    }
    write_json(
        &SbmSummary {
            slopes: &report,
            recovery,
        },
        args.out.join("summary.json"),
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ClusterSummary {
    vectors: String,
    k: usize,
    r: usize,
    seed: u64,
    inertia: f64,
    input_checksums: HashMap<String, String>,
}

pub fn cluster(args: &ClusterArgs) -> Result<()> {
    let (ids, v) = load_vectors_csv(&args.vectors)?;
    let r = args.r.unwrap_or(v.ncols());
    if r == 0 || r > v.ncols() {
        return Err(DiscError::Parameter(format!(
            "--r must be in 1..={}, got {r}",
            v.ncols()
        ))
        .into());
    }
    let v = Mat::from_fn(v.nrows(), r, |i, j| v[(i, j)]);
    let c = cluster_features(&v, args.k, args.seed)?;
    prepare_out(&args.out)?;
    save_labels_csv(args.out.join("clusters.csv"), &ids, &c.labels)?;
    write_json(
        &ClusterSummary {
            vectors: args.vectors.display().to_string(),
            k: args.k,
            r,
            seed: args.seed,
            inertia: c.inertia,
            input_checksums: checksums(&[&args.vectors])?,
        },
        args.out.join("summary.json"),
    )?;
    for (label, members) in c.members().iter().enumerate() {
        println!("cluster {label}: {} features", members.len());
    }
    Ok(())
}

fn first_rows(data: &DataMatrix, rows: &[usize]) -> Result<DataMatrix> {
    let values = Mat::from_fn(rows.len(), data.feature_count(), |i, j| data.values()[(rows[i], j)]);
    Ok(DataMatrix::new(values, data.feature_ids().to_vec())?)
}

fn split_labeled(path: &Path, classes: &[usize], cap: Option<usize>) -> Result<Vec<DataMatrix>> {
    let (data, labels) = load_labeled_csv(path)?;
    classes
        .iter()
        .map(|&c| {
            let rows: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == c)
                .map(|(i, _)| i)
                .take(cap.unwrap_or(usize::MAX))
                .collect();
            if rows.len() < 2 {
                return Err(DiscError::Validation(format!(
                    "{}: class {c} has {} samples",
                    path.display(),
                    rows.len()
                ))
                .into());
            }
            first_rows(&data, &rows)
        })
        .collect()
}

fn load_classes(paths: &[PathBuf], args: &EvalArgs, cap: Option<usize>) -> Result<Vec<DataMatrix>> {
    paths
        .iter()
        .map(|p| {
            let x = load(p, !args.input.no_header, &args.kernel)?;
            match cap {
                Some(c) if c < x.sample_count() => first_rows(&x, &(0..c).collect::<Vec<_>>()),
                _ => Ok(x),
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct EvalRow {
    d: usize,
    accuracy: f64,
    train_accuracy: f64,
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    classes: usize,
    vectors_per_class: usize,
    k_clusters: usize,
    kernel: String,
    knn_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
    standardized: bool,
    seed: u64,
    results: Vec<EvalRow>,
    input_checksums: HashMap<String, String>,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let (train, test, inputs): (Vec<DataMatrix>, Vec<DataMatrix>, Vec<PathBuf>) =
        match (&args.labeled_train, &args.labeled_test) {
            (Some(tr), Some(te)) => {
                let zs = |v: Vec<DataMatrix>| -> Vec<DataMatrix> {
                    if args.kernel.zscore {
                        v.iter().map(DataMatrix::zscore_columns).collect()
                    } else {
                        v
                    }
                };
                (
                    zs(split_labeled(tr, &args.classes, args.max_train)?),
                    zs(split_labeled(te, &args.classes, args.max_test)?),
                    vec![tr.clone(), te.clone()],
                )
            }
            _ => {
                if args.train.len() < 2 || args.train.len() != args.test.len() {
                    return Err(DiscError::Parameter(format!(
                        "need one --train and one --test file per class (at least two classes), got {} and {}",
                        args.train.len(),
                        args.test.len()
                    ))
                    .into());
                }
                let inputs = args.train.iter().chain(&args.test).cloned().collect();
                (
                    load_classes(&args.train, args, args.max_train)?,
                    load_classes(&args.test, args, args.max_test)?,
                    inputs,
                )
            }
        };

    let kernel: KernelSpec = args.kernel.spec();
    let mut rows = Vec::new();
    let mut first_clustering = None;
    println!("{:>4} {:>10} {:>10}", "d", "test_acc", "train_acc");
    for &d in &args.d {
        let cfg = EvalProtocol {
            d,
            vectors_per_class: args.vectors_per_class,
            k_clusters: args.k_clusters,
            seed: args.seed,
            kernel: kernel.clone(),
            ..EvalProtocol::default()
        };
        let out = run_protocol(&train, &test, &cfg)?;
        println!("{d:>4} {:>10.4} {:>10.4}", out.accuracy, out.train_accuracy);
        rows.push(EvalRow {
            d,
            accuracy: out.accuracy,
            train_accuracy: out.train_accuracy,
        });
        first_clustering.get_or_insert(out.clustering);
    }

    if let Some(dir) = &args.out {
        prepare_out(dir)?;
        let mut csv = String::from("d,accuracy,train_accuracy\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{}\n", r.d, r.accuracy, r.train_accuracy));
        }
        write_atomic(dir.join("eval.csv"), csv.as_bytes())?;
        if let Some(c) = &first_clustering {
            save_labels_csv(dir.join("clusters.csv"), train[0].feature_ids(), &c.labels)?;
        }
        let paths: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
        let p = train[0].feature_count();
        write_json(
            &EvalSummary {
                classes: train.len(),
                vectors_per_class: args.vectors_per_class,
                k_clusters: args.k_clusters,
                kernel: kernel.name().to_owned(),
                knn_k: kernel.resolved_knn_k(p),
                bandwidth: kernel.bandwidth(),
                standardized: args.kernel.zscore,
                seed: args.seed,
                results: rows,
                input_checksums: checksums(&paths)?,
            },
            dir.join("summary.json"),
        )?;
    }
    Ok(())
}
