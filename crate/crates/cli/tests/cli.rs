//! End-to-end tests of the bgqmc binary: subcommands, exit codes, output
//! formats, and cross-run determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bgqmc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bgqmc-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small study parameters shared by the CLI tests.
const TINY: &[&str] = &[
    "--vartheta", "2.0",
    "--s", "3",
    "--s_reference", "8",
    "--k", "2",
    "--k_reference", "3",
    "--n_list", "17,31",
    "--s_list", "2,4",
    "--k_list", "1,2",
    "--n_trunc", "31",
    "--n_fem", "31",
    "--shifts", "2",
];

#[test]
fn validate_reports_derived_quantities() {
    let out = run(&["validate"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("lambda=0.7145409074669525"), "{text}");
    assert!(text.contains("kernel_constant=148.5801"), "{text}");
    assert!(text.contains("theoretical_rate=0.69975"), "{text}");
    assert!(text.contains("config_hash="));
}

#[test]
fn validate_rejects_theta_below_2_alpha_sup() {
    // vartheta = 1.75 gives 2‖α‖∞ = 1.0 > θ = 0.1
    let out = run(&["validate", "--vartheta", "1.75", "--theta", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("theta"), "{err}");
}

#[test]
fn unknown_subcommand_and_flags_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["qmc-study", "--no-such-key", "1"]).status.code(), Some(2));
    assert_eq!(run(&["qmc-study", "--n_list", "15,17"]).status.code(), Some(2));
}

#[test]
fn config_file_plus_flag_overrides() {
    let dir = temp_dir("config");
    let cfg_path = dir.join("study.cfg");
    std::fs::write(&cfg_path, "vartheta = 1.75\nseed = 9\n").unwrap();
    let out = run(&["validate", "--config", cfg_path.to_str().unwrap(), "--seed", "10"]);
    assert!(out.status.success());
    // overriding back to defaults changes the hash away from the file's
    let with_file = String::from_utf8(run(&["validate", "--config", cfg_path.to_str().unwrap()]).stdout).unwrap();
    let with_flag = String::from_utf8(out.stdout).unwrap();
    let hash = |s: &str| s.lines().find(|l| l.starts_with("config_hash=")).unwrap().to_string();
    assert_ne!(hash(&with_file), hash(&with_flag));
}

#[test]
fn qmc_study_writes_reproducible_csv() {
    let dir = temp_dir("qmc");
    let out_a = dir.join("a.csv");
    let out_b = dir.join("b.csv");
    let mut args_a: Vec<&str> = vec!["qmc-study"];
    args_a.extend_from_slice(TINY);
    args_a.extend_from_slice(&["--out", out_a.to_str().unwrap()]);
    assert!(run(&args_a).status.success());
    let mut args_b: Vec<&str> = vec!["qmc-study"];
    args_b.extend_from_slice(TINY);
    args_b.extend_from_slice(&["--out", out_b.to_str().unwrap(), "--threads", "2"]);
    assert!(run(&args_b).status.success());
    let a = std::fs::read_to_string(&out_a).unwrap();
    let b = std::fs::read_to_string(&out_b).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical CSVs across worker counts");
    assert!(a.contains("# config_hash="));
    assert!(a.contains("# lambda="));
    assert!(a.contains("abscissa,h1_error,l2_error"));
    assert!(a.contains("# fit_h1_slope="));
}

#[test]
fn trunc_and_fem_studies_run() {
    let dir = temp_dir("tf");
    for sub in ["trunc-study", "fem-study"] {
        let out_path = dir.join(format!("{sub}.csv"));
        let mut args: Vec<&str> = vec![sub];
        args.extend_from_slice(TINY);
        args.extend_from_slice(&["--out", out_path.to_str().unwrap()]);
        let out = run(&args);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(&out_path).unwrap();
        assert!(text.contains("# fit_h1_slope="), "{sub}");
        // data rows present
        assert_eq!(text.lines().filter(|l| !l.starts_with('#') && l.contains(',')).count(), 3);
    }
}

#[test]
fn cbc_then_study_reuses_vector_file() {
    let dir = temp_dir("cbcreuse");
    // export the weights the study would build (vartheta 2.0, s = 3)
    let wfile = dir.join("weights.txt");
    let out = run(&[
        "validate", "--vartheta", "2.0", "--s", "3", "--s_reference", "3",
        "--s_list", "2", "--export_weights", wfile.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    {
        // exported file parses back to the same factors the library builds
        let sp = bgqmc::weights::SpaceParams::new(0.5, 1.001, 0.70, 0.05, 0.5).unwrap();
        let seqs = bgqmc::field::CoordinateSequences::for_gevrey(2.0, 1.5, 3.0, 3, None);
        let lambda = bgqmc::weights::select_lambda(seqs.p, 1.5, &sp).unwrap();
        let kc = bgqmc::weights::kernel_constant_k(&sp).unwrap();
        let direct =
            bgqmc::weights::build_pod_weights(3, 1.5, lambda, 1.0, &seqs.b, &seqs.alpha, &sp, kc)
                .unwrap();
        let file = std::fs::File::open(&wfile).unwrap();
        let parsed =
            bgqmc::weights::PodWeights::read_from(&mut std::io::BufReader::new(file)).unwrap();
        assert_eq!(parsed.factors, direct.factors);
    }

    // bgqmc cbc into the cache location the study expects
    let vdir = dir.join("vectors");
    std::fs::create_dir_all(&vdir).unwrap();
    for n in ["17", "31"] {
        let vfile = vdir.join(format!("z_{n}_3.txt"));
        let out = run(&[
            "cbc", "--n", n, "--s", "3",
            "--weights", wfile.to_str().unwrap(),
            "--out", vfile.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(&vfile).unwrap();
        assert!(text.starts_with(&format!("{n} 3\n")));
        assert!(text.contains("# config_hash="));
    }

    // study with the vector cache vs a fused run: identical CSV bytes
    let out_cached = dir.join("cached.csv");
    let mut args: Vec<&str> = vec!["qmc-study"];
    args.extend_from_slice(TINY);
    let vdir_s = vdir.to_str().unwrap().to_string();
    args.extend_from_slice(&["--vector_dir", &vdir_s, "--out", out_cached.to_str().unwrap()]);
    assert!(run(&args).status.success());

    let out_fused = dir.join("fused.csv");
    let mut args: Vec<&str> = vec!["qmc-study"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--out", out_fused.to_str().unwrap()]);
    assert!(run(&args).status.success());

    let cached = std::fs::read_to_string(&out_cached).unwrap();
    let fused = std::fs::read_to_string(&out_fused).unwrap();
    // metadata echoes vector_dir, so compare from the header row onward
    let tail = |s: &str| s.lines().skip_while(|l| l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(tail(&cached), tail(&fused));
}

#[test]
fn cbc_rejects_composite_n() {
    let dir = temp_dir("cbcbad");
    let wfile = dir.join("w.txt");
    std::fs::write(&wfile, "0 0.9 1.0526315789473684\n0.5\n").unwrap();
    let out = run(&[
        "cbc", "--n", "16", "--s", "1",
        "--weights", wfile.to_str().unwrap(),
        "--out", dir.join("z.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
