use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lod");

fn lod(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn lod")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn solve_csv_schema() {
    let out = stdout(&lod(&["solve", "--coarse-m", "4", "--fine-m", "16", "--k", "2"]));
    let rows = data_rows(&out);
    assert_eq!(
        rows[0].join(","),
        "H,k,N_dof,rel_energy_lod,rel_L2_lod,rel_L2_interp,rel_energy_p1fem,rel_L2_p1fem,degenerate"
    );
    assert_eq!(rows.len(), 2);
    let r = &rows[1];
    assert_eq!(r[0].parse::<f64>().unwrap(), 0.25);
    assert_eq!(r[1], "2");
    assert_eq!(r[2], "9");
    for v in &r[3..8] {
        let v: f64 = v.parse().unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }
    assert_eq!(r[8], "0");
}

#[test]
fn timings_add_columns() {
    let out = stdout(&lod(&["solve", "--coarse-m", "4", "--fine-m", "16", "--k", "1", "--timings"]));
    let rows = data_rows(&out);
    assert!(rows[0].len() > 9);
    assert_eq!(rows[0].len(), rows[1].len());
}

#[test]
fn zero_load_flags_degenerate() {
    let out = stdout(&lod(&["solve", "--coarse-m", "4", "--fine-m", "16", "--k", "1", "--load", "const:0"]));
    let rows = data_rows(&out);
    assert_eq!(rows[1][8], "1");
    assert!(out.contains("degenerate"));
}

#[test]
fn misaligned_raster_names_both_widths() {
    let o = lod(&["solve", "--coarse-m", "4", "--fine-m", "16", "--coefficient", "random:12:0.05:2:1"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("12") && err.contains("16"), "{err}");
}

#[test]
fn gen_coefficient_rejects_empty_range() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.txt");
    let o = lod(&["gen-coefficient", "--lo", "2", "--hi", "1", "-o", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!path.exists());
}

#[test]
fn gen_coefficient_is_reproducible_and_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str| {
        let path = dir.path().join(name);
        let o = lod(&["gen-coefficient", "--raster-m", "16", "--seed", "7", "-o", path.to_str().unwrap()]);
        assert!(o.status.success());
        std::fs::read(path).unwrap()
    };
    let a = gen("a.txt");
    assert_eq!(a, gen("b.txt"));
    let field = lod::CoefficientField::parse_raster(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(field.raster_m(), 16);
    assert!(field.contrast() <= 40.0);
    assert!(field.alpha() >= 0.05 && field.beta() < 2.0);
}

#[test]
fn file_coefficient_matches_random_spec() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.txt");
    let o = lod(&["gen-coefficient", "--raster-m", "8", "--seed", "3", "-o", path.to_str().unwrap()]);
    assert!(o.status.success());
    let base = ["solve", "--coarse-m", "4", "--fine-m", "16", "--k", "2", "--coefficient"];
    let file = format!("file:{}", path.display());
    let a = stdout(&lod(&[&base[..], &[file.as_str()]].concat()));
    let b = stdout(&lod(&[&base[..], &["random:8:0.05:2:3"]].concat()));
    assert_eq!(data_rows(&a), data_rows(&b));
}

#[test]
fn corrector_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("c.bin");
    let args = [
        "solve",
        "--coarse-m",
        "4",
        "--fine-m",
        "16",
        "--k",
        "2",
        "--coefficient",
        "random:8:0.05:2:5",
        "--corrector-cache",
        cache.to_str().unwrap(),
    ];
    let first = stdout(&lod(&args));
    assert!(Path::new(&cache).exists());
    let written = std::fs::metadata(&cache).unwrap().modified().unwrap();
    let second = stdout(&lod(&args));
    assert_eq!(first, second);
    assert_eq!(std::fs::metadata(&cache).unwrap().modified().unwrap(), written);

    // A different k invalidates the cache and rewrites it.
    let mut other = args.to_vec();
    other[6] = "3";
    let third = stdout(&lod(&other));
    assert_eq!(data_rows(&third)[1][1], "3");
}

#[test]
fn output_independent_of_thread_count() {
    let run = |t: &str| {
        stdout(&lod(&[
            "convergence",
            "--coarse-m",
            "2,4",
            "--fine-m",
            "16",
            "--coefficient",
            "random:8:0.05:2:9",
            "--threads",
            t,
        ]))
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn convergence_reports_slopes() {
    let out = stdout(&lod(&["convergence", "--coarse-m", "2,4,8", "--fine-m", "32", "--k-base", "2"]));
    assert_eq!(data_rows(&out).len(), 4);
    assert!(out.contains("# slope rel_energy_lod"), "{out}");
}

#[test]
fn decay_csv() {
    let out = stdout(&lod(&["decay", "--coarse-m", "4", "--fine-m", "16"]));
    let rows = data_rows(&out);
    assert_eq!(rows[0].join(","), "vertex,k,error,global_energy");
    let errors: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    assert!(*errors.last().unwrap() < 1e-8);
}

#[test]
fn bad_arguments_exit_with_config_code() {
    let o = lod(&["solve", "--coarse-m", "3", "--fine-m", "16"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lod(&["solve", "--coefficient", "bogus"]);
    assert!(!o.status.success());
}
