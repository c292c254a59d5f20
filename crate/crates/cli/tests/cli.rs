use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn disc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disc"))
        .args(args)
        .output()
        .expect("failed to start disc")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Loading rows of a `feature_id,v1,...` file.
fn read_vectors(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn read_sigma(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

fn top2_mass(rows: &[Vec<f64>], on: std::ops::Range<usize>) -> f64 {
    let total: f64 = rows.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum();
    let hit: f64 = rows[on].iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum();
    hit / total
}

#[test]
fn synth_then_run_recovers_newly_connected_blocks() {
    let dir = TempDir::new().unwrap();
    let toy = dir.path().join("toy");
    let out = dir.path().join("out");
    ok(&disc(&["synth", "--problem", "newly-connected", "--out", p(&toy)]));
    let gt = read_json(&toy.join("ground_truth.json"));
    assert_eq!(gt["A"].as_array().unwrap().len(), 50);
    assert_eq!(gt["A"][0], 150);
    assert_eq!(gt["B"][0], 200);

    ok(&disc(&[
        "run",
        "--a",
        p(&toy.join("A.csv")),
        "--b",
        p(&toy.join("B.csv")),
        "--k-clusters",
        "3",
        "--out",
        p(&out),
    ]));
    for f in ["v_a.csv", "v_b.csv", "sigma_a.csv", "sigma_b.csv", "summary.json", "clusters.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(top2_mass(&read_vectors(&out.join("v_a.csv")), 150..200) >= 0.8);
    assert!(top2_mass(&read_vectors(&out.join("v_b.csv")), 200..250) >= 0.8);

    let s = read_json(&out.join("summary.json"));
    for key in ["d_a", "d_b", "kernel", "knn_k", "seed", "n_a", "n_b", "p", "r"] {
        assert!(s.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(s["kernel"], "rbf_self_tuning");
    assert_eq!(s["knn_k"], 6);
    assert_eq!(s["r"], 10);
    assert_eq!(s["input_checksums"].as_object().unwrap().len(), 2);
    assert_eq!(s["suggested_r_a"], 2);
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

/// Deterministic pseudo-normal values from a small LCG plus Box-Muller.
struct Gen(u64);

impl Gen {
    fn uniform(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    fn normal(&mut self) -> f64 {
        let (u, v) = (self.uniform(), self.uniform());
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

fn small_pair(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut g = Gen(7);
    let header: Vec<String> = (0..12).map(|j| format!("g{j}")).collect();
    let rows = |g: &mut Gen, block: std::ops::Range<usize>| -> Vec<Vec<f64>> {
        (0..80)
            .map(|_| {
                let f = g.normal();
                (0..12)
                    .map(|j| if block.contains(&j) { f + 0.3 * g.normal() } else { g.normal() })
                    .collect()
            })
            .collect()
    };
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    write_csv(&a, &header, &rows(&mut g, 0..4));
    write_csv(&b, &header, &rows(&mut g, 4..8));
    (a, b)
}

#[test]
fn same_file_twice_gives_equal_significance() {
    let dir = TempDir::new().unwrap();
    let (a, _) = small_pair(dir.path());
    let out = dir.path().join("out");
    ok(&disc(&["run", "--a", p(&a), "--b", p(&a), "--d-a", "3", "--d-b", "3", "--out", p(&out)]));
    assert_eq!(read_sigma(&out.join("sigma_a.csv")), read_sigma(&out.join("sigma_b.csv")));
}

#[test]
fn mismatched_headers_exit_one_with_single_line() {
    let dir = TempDir::new().unwrap();
    let (a, _) = small_pair(dir.path());
    let text = fs::read_to_string(&a).unwrap().replacen("g3", "zz", 1);
    let b = dir.path().join("b_bad.csv");
    fs::write(&b, text).unwrap();
    let out = disc(&["run", "--a", p(&a), "--b", p(&b), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("g3") && err.contains("zz"), "{err}");
}

#[test]
fn permuted_header_is_aligned() {
    let dir = TempDir::new().unwrap();
    let (a, b) = small_pair(dir.path());
    let text = fs::read_to_string(&b).unwrap();
    let permuted: String = text
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.reverse();
            f.join(",") + "\n"
        })
        .collect();
    let bp = dir.path().join("b_perm.csv");
    fs::write(&bp, permuted).unwrap();
    let o1 = dir.path().join("o1");
    let o2 = dir.path().join("o2");
    let args = |b: &Path, o: &Path| {
        vec![
            "run".to_string(), "--a".into(), p(&a).into(), "--b".into(), p(b).into(),
            "--d-a".into(), "3".into(), "--d-b".into(), "3".into(), "--out".into(), p(o).into(),
        ]
    };
    ok(&disc(&args(&b, &o1).iter().map(String::as_str).collect::<Vec<_>>()));
    ok(&disc(&args(&bp, &o2).iter().map(String::as_str).collect::<Vec<_>>()));
    assert_eq!(
        fs::read_to_string(o1.join("v_a.csv")).unwrap(),
        fs::read_to_string(o2.join("v_a.csv")).unwrap()
    );
}

#[test]
fn unparsable_cell_exits_one() {
    let dir = TempDir::new().unwrap();
    let (a, b) = small_pair(dir.path());
    let text = fs::read_to_string(&b).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    lines[3] = lines[3].replacen(|c: char| c.is_ascii_digit(), "x", 1);
    fs::write(&b, lines.join("\n")).unwrap();
    let out = disc(&["run", "--a", p(&a), "--b", p(&b), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn dump_w_writes_symmetric_unit_diagonal_kernels() {
    let dir = TempDir::new().unwrap();
    let (a, b) = small_pair(dir.path());
    let out = dir.path().join("o");
    ok(&disc(&["run", "--a", p(&a), "--b", p(&b), "--d-a", "2", "--d-b", "2", "--dump-w", "--out", p(&out)]));
    let w = read_vectors(&out.join("w_a.csv"));
    assert_eq!(w.len(), 12);
    for i in 0..12 {
        assert_eq!(w[i][i], 1.0);
        for j in 0..12 {
            assert_eq!(w[i][j], w[j][i]);
        }
    }
}

#[test]
fn fixed_bandwidth_is_recorded() {
    let dir = TempDir::new().unwrap();
    let (a, b) = small_pair(dir.path());
    let out = dir.path().join("o");
    ok(&disc(&[
        "run", "--a", p(&a), "--b", p(&b), "--d-a", "2", "--d-b", "2", "--bandwidth", "8.0", "--zscore",
        "--out", p(&out),
    ]));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["kernel"], "rbf_fixed");
    assert_eq!(s["bandwidth"], 8.0);
    assert_eq!(s["standardized"], true);
    assert!(s["knn_k"].is_null());
}

#[test]
fn multi_on_three_datasets() {
    let dir = TempDir::new().unwrap();
    let toy = dir.path().join("toy");
    let out = dir.path().join("out");
    ok(&disc(&["synth", "--problem", "multi3", "--n", "4000", "--out", p(&toy)]));
    ok(&disc(&[
        "multi",
        "--input",
        p(&toy.join("A.csv")),
        p(&toy.join("B.csv")),
        p(&toy.join("C.csv")),
        "--out",
        p(&out),
    ]));
    let gt = read_json(&toy.join("ground_truth.json"));
    for (name, key) in [("a", "A"), ("b", "B"), ("c", "C")] {
        let idx: Vec<usize> = gt[key]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as usize)
            .collect();
        let v = read_vectors(&out.join(format!("v_{name}.csv")));
        let range = idx[0]..idx[idx.len() - 1] + 1;
        assert!(top2_mass(&v, range) >= 0.7, "dataset {name}");
    }
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["d"], serde_json::json!([20, 20, 20]));
}

#[test]
fn multi_rejects_wrong_d_count() {
    let dir = TempDir::new().unwrap();
    let (a, b) = small_pair(dir.path());
    let out = disc(&[
        "multi", "--input", p(&a), p(&b), "--d", "2,2,2", "--out", p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sbm_validate_single_l_exits_one() {
    let dir = TempDir::new().unwrap();
    let out = disc(&["sbm-validate", "--l", "500", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sbm_validate_defaults_table_shape() {
    let dir = TempDir::new().unwrap();
    ok(&disc(&["sbm-validate", "--trials", "1", "--no-recovery", "--out", p(dir.path())]));
    let fits = fs::read_to_string(dir.path().join("slope_fits.csv")).unwrap();
    let lines: Vec<&str> = fits.lines().collect();
    assert_eq!(lines[0], "alpha,quantity,fitted_slope,theoretical_slope");
    assert_eq!(lines.len(), 1 + 4 * 2);
    let s = read_json(&dir.path().join("summary.json"));
    assert_eq!(s["slopes"]["fits"].as_array().unwrap().len(), 8);
}

#[test]
fn sbm_validate_is_reproducible() {
    let run = |dir: &Path| {
        ok(&disc(&[
            "sbm-validate", "--l", "60,120,240", "--alpha", "0.6,0.9", "--trials", "2", "--seed", "5",
            "--out", p(dir),
        ]));
        (
            fs::read_to_string(dir.join("slopes.csv")).unwrap(),
            fs::read_to_string(dir.join("recovery.csv")).unwrap(),
        )
    };
    let (d1, d2) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(run(d1.path()), run(d2.path()));
}

#[test]
fn cluster_command_writes_labels() {
    let dir = TempDir::new().unwrap();
    let v = dir.path().join("v.csv");
    let mut s = String::from("feature_id,v1,v2\n");
    for i in 0..9 {
        let (x, y) = [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)][i / 3];
        s.push_str(&format!("f{i},{x},{y}\n"));
    }
    fs::write(&v, s).unwrap();
    let out = dir.path().join("o");
    ok(&disc(&["cluster", "--vectors", p(&v), "--k", "3", "--out", p(&out)]));
    let labels = fs::read_to_string(out.join("clusters.csv")).unwrap();
    let rows: Vec<&str> = labels.lines().collect();
    assert_eq!(rows[0], "feature_id,label");
    assert_eq!(&rows[1..4], ["f0,0", "f1,0", "f2,0"]);
    assert_eq!(&rows[4..7], ["f3,1", "f4,1", "f5,1"]);
    assert_eq!(&rows[7..10], ["f6,2", "f7,2", "f8,2"]);
}

/// Class `c` shares a factor with positive mean across its own block of features.
fn class_file(path: &Path, g: &mut Gen, block: std::ops::Range<usize>, n: usize) {
    let header: Vec<String> = (0..30).map(|j| format!("x{j}")).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let f = 2.0 + g.normal();
            (0..30)
                .map(|j| if block.contains(&j) { f + 0.5 * g.normal() } else { g.normal() })
                .collect()
        })
        .collect();
    write_csv(path, &header, &rows);
}

#[test]
fn eval_separates_classes_with_specific_blocks() {
    let dir = TempDir::new().unwrap();
    let mut g = Gen(11);
    let f = |name: &str| dir.path().join(name);
    class_file(&f("c0_train.csv"), &mut g, 0..8, 300);
    class_file(&f("c1_train.csv"), &mut g, 8..16, 300);
    class_file(&f("c0_test.csv"), &mut g, 0..8, 200);
    class_file(&f("c1_test.csv"), &mut g, 8..16, 200);
    let out = dir.path().join("o");
    ok(&disc(&[
        "eval",
        "--train", p(&f("c0_train.csv")), p(&f("c1_train.csv")),
        "--test", p(&f("c0_test.csv")), p(&f("c1_test.csv")),
        "--d", "4",
        "--out", p(&out),
    ]));
    let s = read_json(&out.join("summary.json"));
    let acc = s["results"][0]["accuracy"].as_f64().unwrap();
    assert!(acc >= 0.9, "accuracy {acc}");
    assert!(out.join("eval.csv").exists());
    assert!(out.join("clusters.csv").exists());
}

#[test]
fn eval_reads_labelled_files() {
    let dir = TempDir::new().unwrap();
    let mut g = Gen(3);
    let write = |path: &Path, g: &mut Gen, n: usize| {
        let mut s = String::from("label");
        for j in 0..30 {
            s.push_str(&format!(",x{j}"));
        }
        s.push('\n');
        for i in 0..n {
            let label = [4, 9, 1][i % 3];
            let block = match label {
                4 => 0..8,
                9 => 8..16,
                _ => 16..24,
            };
            let f = 2.0 + g.normal();
            s.push_str(&label.to_string());
            for j in 0..30 {
                let x = if block.contains(&j) { f + 0.5 * g.normal() } else { g.normal() };
                s.push_str(&format!(",{x}"));
            }
            s.push('\n');
        }
        fs::write(path, s).unwrap();
    };
    let (tr, te) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    write(&tr, &mut g, 900);
    write(&te, &mut g, 600);
    let out = disc(&[
        "eval", "--labeled-train", p(&tr), "--labeled-test", p(&te), "--classes", "4,9",
        "--max-train", "250", "--max-test", "150", "--d", "3,4",
    ]);
    ok(&out);
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(table.lines().count(), 3, "{table}");
}

#[test]
fn help_exits_zero_and_bad_flag_exits_one() {
    assert_eq!(disc(&["--help"]).status.code(), Some(0));
    assert_eq!(disc(&["run", "--nope"]).status.code(), Some(1));
}
