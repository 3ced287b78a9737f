//! Command-line driver: CBC construction plus the three convergence
//! studies, with a key=value config file and per-key flag overrides.
//!
//! Exit codes: 0 success, 2 config/validation error, 3 numerical failure.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;
use std::process::ExitCode;

use bgqmc::config::StudyConfig;
use bgqmc::lattice::{cbc_construct, KernelMode};
use bgqmc::studies::{fem_study, qmc_convergence_study, truncation_study, RateTable};
use bgqmc::weights::PodWeights;
use bgqmc::Error;

const USAGE: &str = "\
usage: bgqmc <subcommand> [options]

subcommands:
  cbc          --n <prime> --s <dim> --weights <file> --out <file>
               [--kernel surrogate|table:<file>] [--seed <u64>]
  qmc-study    [--config <file>] [--<key> <value> ...]
  trunc-study  [--config <file>] [--<key> <value> ...]
  fem-study    [--config <file>] [--<key> <value> ...]
  validate     [--config <file>] [--<key> <value> ...]
               [--export_weights <file>]

common options:
  --config <file>    key=value study configuration
  --threads <N>      worker threads (default: available parallelism)
  --full true        full-scale experiment sizes (multi-hour)
  --seed <u64>       random-shift seed

any study config key (vartheta, s, k, n_list, out, ...) can be overridden
with a flag of the same name.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Convergence(_) | Error::Divergent(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(args: &[String]) -> bgqmc::Result<()> {
    let Some(sub) = args.first() else {
        eprintln!("{USAGE}");
        return Err(Error::Config("missing subcommand".into()));
    };
    let rest = &args[1..];
    match sub.as_str() {
        "cbc" => run_cbc(rest),
        "qmc-study" | "trunc-study" | "fem-study" | "validate" => run_study(sub, rest),
        "--help" | "-h" | "help" => {
            println!("{USAGE}");
            Ok(())
        }
        other => {
            eprintln!("{USAGE}");
            Err(Error::Config(format!("unknown subcommand {other}")))
        }
    }
}

/// Flags as `--key value` pairs; `--full` may omit its value.
fn parse_flags(args: &[String]) -> bgqmc::Result<BTreeMap<String, String>> {
    let mut flags = BTreeMap::new();
    let mut i = 0;
    while i < args.len() {
        let key = args[i]
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --flag, got {}", args[i])))?;
        let value = if key == "full" && (i + 1 >= args.len() || args[i + 1].starts_with("--")) {
            "true".to_string()
        } else {
            i += 1;
            args.get(i)
                .ok_or_else(|| Error::Config(format!("flag --{key} is missing its value")))?
                .clone()
        };
        flags.insert(key.to_string(), value);
        i += 1;
    }
    Ok(flags)
}

fn init_threads(flags: &mut BTreeMap<String, String>) -> bgqmc::Result<()> {
    if let Some(t) = flags.remove("threads") {
        let n: usize = t
            .parse()
            .map_err(|e| Error::Config(format!("bad --threads value {t}: {e}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run_cbc(args: &[String]) -> bgqmc::Result<()> {
    let mut flags = parse_flags(args)?;
    init_threads(&mut flags)?;
    let need = |flags: &mut BTreeMap<String, String>, key: &str| {
        flags
            .remove(key)
            .ok_or_else(|| Error::Config(format!("cbc requires --{key}")))
    };
    let n: u64 = need(&mut flags, "n")?
        .parse()
        .map_err(|e| Error::Config(format!("bad --n: {e}")))?;
    let s: usize = need(&mut flags, "s")?
        .parse()
        .map_err(|e| Error::Config(format!("bad --s: {e}")))?;
    let weights_path = need(&mut flags, "weights")?;
    let out = need(&mut flags, "out")?;
    let kernel_spec = flags.remove("kernel").unwrap_or_else(|| "surrogate".into());
    let seed: u64 = flags
        .remove("seed")
        .unwrap_or_else(|| "0".into())
        .parse()
        .map_err(|e| Error::Config(format!("bad --seed: {e}")))?;
    if let Some(extra) = flags.keys().next() {
        return Err(Error::Config(format!("unknown cbc flag --{extra}")));
    }

    let file = std::fs::File::open(&weights_path)
        .map_err(|e| Error::Config(format!("cannot open weights {weights_path}: {e}")))?;
    let weights = PodWeights::read_from(&mut BufReader::new(file))?;
    let kernel = parse_kernel_flag(&kernel_spec)?;
    let g = cbc_construct(n, s, &weights, &kernel)?;

    // vector data in the pinned format, then provenance as trailing comments
    let mut buf = Vec::new();
    g.write_to(&mut buf)?;
    use std::io::Write;
    writeln!(buf, "# config_hash={:016x}", cbc_hash(n, s, &weights, &kernel_spec, seed))?;
    writeln!(buf, "# kernel={kernel_spec}")?;
    writeln!(buf, "# seed={seed}")?;
    write_atomic(Path::new(&out), &buf)?;
    println!("cbc: n={n} s={s} z[0..{}] written to {out}", g.dim().min(4));
    Ok(())
}

fn parse_kernel_flag(spec: &str) -> bgqmc::Result<KernelMode> {
    if spec == "surrogate" {
        return Ok(KernelMode::Surrogate);
    }
    if let Some(path) = spec.strip_prefix("table:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read kernel table {path}: {e}")))?;
        let values: Result<Vec<f64>, _> = text.split_whitespace().map(|t| t.parse()).collect();
        return Ok(KernelMode::Table(
            values.map_err(|e| Error::Config(format!("bad kernel table: {e}")))?,
        ));
    }
    Err(Error::Config(format!(
        "kernel must be surrogate or table:<path>, got {spec}"
    )))
}

fn cbc_hash(n: u64, s: usize, w: &PodWeights, kernel: &str, seed: u64) -> u64 {
    let mut text = format!("n={n} s={s} kernel={kernel} seed={seed} lambda={} sigma={}", w.lambda, w.sigma);
    for f in &w.factors {
        text.push_str(&format!(" {f}"));
    }
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn write_atomic(path: &Path, bytes: &[u8]) -> bgqmc::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn run_study(sub: &str, args: &[String]) -> bgqmc::Result<()> {
    let mut flags = parse_flags(args)?;
    init_threads(&mut flags)?;
    let export_weights = flags.remove("export_weights");
    let mut cfg = match flags.remove("config") {
        Some(path) => StudyConfig::from_file(Path::new(&path))?,
        None => StudyConfig::default(),
    };
    for (k, v) in &flags {
        cfg.set(k, v)?;
    }
    cfg.validate()?;

    if sub == "validate" {
        let setup = bgqmc::studies::prepare(&cfg, cfg.s.max(cfg.s_reference))?;
        println!("config_hash={:016x}", cfg.hash());
        println!("lambda={}", setup.lambda);
        println!("kernel_constant={}", setup.kernel_constant);
        println!("theoretical_rate={}", setup.rate);
        if let Some(path) = export_weights {
            let mut buf = Vec::new();
            setup.weights.write_to(&mut buf)?;
            write_atomic(Path::new(&path), &buf)?;
            println!("weights={path}");
        }
        println!("ok");
        return Ok(());
    }
    if export_weights.is_some() {
        return Err(Error::Config("--export_weights is a validate flag".into()));
    }

    let table: RateTable = match sub {
        "qmc-study" => qmc_convergence_study(&cfg)?,
        "trunc-study" => truncation_study(&cfg)?,
        "fem-study" => fem_study(&cfg)?,
        _ => unreachable!(),
    };
    table.write_csv(Path::new(&cfg.out))?;
    println!(
        "{sub}: {} rows -> {}; fit_h1_slope={:.4} fit_l2_slope={:.4}",
        table.rows.len(),
        cfg.out,
        table.fit_h1.slope,
        table.fit_l2.slope
    );
    Ok(())
}
