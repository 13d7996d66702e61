mod common;

use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::World;
use transit_fuse::synth::SynthConfig;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transit-fuse"))
        .args(args)
        .stdin(Stdio::null())
        .output()
        .unwrap()
}

fn run_cmd(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn small() -> SynthConfig {
    SynthConfig {
        n_days: 7,
        journeys_per_day: 1200,
        ..SynthConfig::default()
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["validate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_configs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(run_cmd("validate", &missing, &[]).status.code(), Some(1));

    let cases = [
        ("garbage", "this is = = not toml"),
        (
            "unknown_key",
            "seed = 1\nbogus = 2\n[frame]\nlat0 = 60.0\nlon0 = 24.5\n",
        ),
        ("no_frame", "seed = 1\n"),
        ("bad_lat", "seed = 1\n[frame]\nlat0 = 95.0\nlon0 = 24.5\n"),
        ("no_seed", "[frame]\nlat0 = 60.0\nlon0 = 24.5\n"),
    ];
    for (name, text) in cases {
        let path = dir.path().join(format!("{name}.toml"));
        std::fs::write(&path, text).unwrap();
        let out = run_cmd("generate", &path, &[]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error:"), "{name}");
    }
    // a seed on the command line satisfies the requirement
    let path = dir.path().join("no_seed.toml");
    let out_dir = dir.path().join("gen");
    let out = run_cmd("generate", &path, &["--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::run_config(small(), 1);
    let path = common::write_config(dir.path(), &cfg);
    for cmd in ["validate", "patterns", "coverage", "fuse", "report"] {
        assert_eq!(run_cmd(cmd, &path, &[]).status.code(), Some(1), "{cmd}");
    }
}

#[test]
fn validate_at_full_observation_is_identity() {
    let world = World::generate(
        SynthConfig {
            opt_in_rate: 1.0,
            apc_imputation_rate: 0.0,
            ..small()
        },
        4,
    );
    let out = run_cmd("validate", &world.config_path, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(world.dir.path().join("out/validation.csv")).unwrap();
    let body = transit_fuse::report::strip_manifest(&text);
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut station_rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        if &rec[col("spatial")] != "station" {
            continue;
        }
        station_rows += 1;
        assert_eq!(&rec[col("spearman")], "1.000000", "{rec:?}");
        assert_eq!(&rec[col("pcc")], "1.000000", "{rec:?}");
        assert_eq!(&rec[col("slope")], "1.000000", "{rec:?}");
    }
    assert!(station_rows > 0);
}

#[test]
fn manifest_counts_match_the_generator() {
    let world = World::generate(
        SynthConfig {
            opt_in_rate: 0.3,
            ..small()
        },
        6,
    );
    let out = run_cmd("patterns", &world.config_path, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(world.dir.path().join("out/run_patterns.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let c = &world.sidecar.counts;
    assert_eq!(v["manifest"]["seed"], 6);
    assert_eq!(v["manifest"]["command"], "patterns");
    let counts = &v["counts"];
    assert_eq!(counts["apc_rows"], c.apc_rows);
    assert_eq!(counts["trace_rows"], c.trace_rows);
    assert_eq!(counts["chains"], c.traced_journeys);
    assert_eq!(counts["weekday_train_legs"], c.traced_weekday_train_legs);

    // stdout lists every written file
    let listed: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().lines().collect();
    for f in ["od.csv", "od_scaled.csv", "train_legs.csv", "run_patterns.json"] {
        assert!(listed.iter().any(|l| l.ends_with(f)), "{f} not listed");
    }
}

#[test]
fn fuse_is_reproducible_and_seed_sensitive() {
    let world = World::generate(
        SynthConfig {
            opt_in_rate: 0.3,
            ..small()
        },
        8,
    );
    let dir = world.dir.path();
    let fuse = |seed: &str, out: &str| {
        let o = run_cmd(
            "fuse",
            &world.config_path,
            &["--seed", seed, "--out", dir.join(out).to_str().unwrap()],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.join(out).join("model_boardings.json")).unwrap()
    };
    let a = fuse("8", "a");
    let b = fuse("8", "b");
    let c = fuse("9", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn every_output_carries_the_manifest() {
    let world = World::generate(small(), 12);
    let out = run_cmd("report", &world.config_path, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sha = transit_fuse::config::sha256_hex(&std::fs::read(&world.config_path).unwrap());
    let mut n = 0;
    for entry in std::fs::read_dir(world.dir.path().join("out")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        n += 1;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["manifest"]["config_sha256"], sha.as_str(), "{path:?}");
        } else {
            assert!(text.starts_with("# transit-fuse "), "{path:?}");
            assert!(text.contains(&format!("config_sha256: {sha}")), "{path:?}");
        }
    }
    assert!(n >= 15);
}
