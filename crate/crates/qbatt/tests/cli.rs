use std::fs;
use std::path::Path;

use qbatt::cli::main_with_args;
use qbatt::config::parse_config;

fn run(args: &[&str]) -> u8 {
    main_with_args(std::iter::once("qbatt").chain(args.iter().copied()))
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn steady_two_site_full_charge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("steady.csv");
    let code = run(&["steady", "--n", "2", "--j", "1", "--alpha", "3.14159265", "--chi", "1", "--eta", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["pop_1", "pop_2", "pop_3", "pop_4", "delta_e", "ergotropy", "utilization", "ratio"]);
    assert!((rows[0][0] - 1.0).abs() < 1e-8);
    assert!((rows[0][4] - 5.0).abs() < 1e-6);
    assert!(dir.path().join("steady.csv.manifest").exists());
}

#[test]
fn evolve_header_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ev.csv");
    let code = run(&[
        "evolve", "--n", "2", "--chi", "0.5", "--t-final", "1", "--dt", "0.01", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&out);
    assert_eq!(&header[..4], ["gamma_t", "delta_e", "ergotropy", "utilization"]);
    assert_eq!(header.len(), 8);
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[10][0] - 1.0).abs() < 1e-12);
    let total: f64 = rows[10][4..].iter().sum();
    assert!((total - 1.0).abs() < 1e-10);
}

#[test]
fn traj_rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let code = run(&[
            "traj", "--n", "2", "--chi", "1", "--eta", "0.8", "--t-final", "0.5", "--num", "4", "--seed",
            "7", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a_trajectories.csv")).unwrap(),
        fs::read(dir.path().join("b_trajectories.csv")).unwrap()
    );
    let manifest = fs::read_to_string(dir.path().join("a.csv.manifest")).unwrap();
    assert!(manifest.contains("#! seed = 7"));
}

#[test]
fn manifest_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let code = run(&["steady", "--n", "2", "--j", "0.7", "--f", "0.9", "--eta", "0.8", "--out", first.to_str().unwrap()]);
    assert_eq!(code, 0);
    let manifest = dir.path().join("first.csv.manifest");
    let text = fs::read_to_string(&manifest).unwrap();
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg.get("j"), Some("0.7"));
    assert_eq!(cfg.get("alpha"), Some("pi"));
    let second = dir.path().join("second.csv");
    let code = run(&["steady", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["steady", "--n", "2", "--out", out]), 1);
    assert_eq!(run(&["steady", "--n", "0", "--chi", "1", "--out", out]), 1);
    assert_eq!(run(&["steady", "--n", "2", "--chi", "1", "--eta", "1.5", "--out", out]), 1);
    assert_eq!(run(&["steady", "--n", "2", "--chi", "1", "--f", "1", "--out", out]), 1);
    assert_eq!(run(&["steady", "--n", "2", "--chi", "1", "--bogus", "1"]), 1);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n_sites = 2\nchi = 1\nwidth = 3\n").unwrap();
    assert_eq!(run(&["steady", "--config", cfg.to_str().unwrap(), "--out", out]), 1);
    assert!(!Path::new(out).exists());
}

#[test]
fn io_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    assert_eq!(run(&["steady", "--config", missing.to_str().unwrap()]), 3);
    let out = dir.path().join("no_dir").join("x.csv");
    assert_eq!(run(&["steady", "--n", "2", "--chi", "1", "--out", out.to_str().unwrap()]), 3);
}

#[test]
fn numerical_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cj.csv");
    let code = run(&[
        "critical-j", "--n", "2", "--eta", "0.8", "--j-lo", "0.5", "--j-hi", "0.6", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn hamiltonian_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    assert_eq!(run(&["hamiltonian", "--n", "2", "--j", "1", "--out", out.to_str().unwrap()]), 0);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["level", "energy"]);
    let e: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    assert!((e[0] + 3.0).abs() < 1e-10 && (e[3] - 2.0).abs() < 1e-10);
}

#[test]
fn sweep_marks_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let code = run(&[
        "sweep", "--n", "2", "--alpha-count", "5", "--chi-min", "0", "--chi-max", "2", "--chi-count", "5",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["alpha", "chi", "stored_energy", "argmax"]);
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().any(|r| r[3] == 1.0));
}
