use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const PLANE: &str = "plane_wave(k=0.6283185307179586)";
const TWO: &str = "superposition([1,0]gaussian(s=1,k0=0,q0=-4);[1,0]gaussian(s=1,k0=0,q0=4))";
const TWO_MOVING: &str = "superposition([1,0]gaussian(s=1,k0=1,q0=-3);[0,1]gaussian(s=0.7,k0=-2,q0=2))";

fn locmom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locmom")).args(args).output().unwrap()
}

fn locmom_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locmom"))
        .args(args)
        .env("LOCMOM_THREADS", threads)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    serde_json::from_str(text.trim()).unwrap()
}

/// `(q, value, mask, definition, order)` rows of a profile CSV.
fn profile_rows(path: &Path) -> Vec<(f64, f64, bool, String, String)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "q,value,mask,definition,order");
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2] == "1",
                f[3].into(),
                f[4].into(),
            )
        })
        .collect()
}

#[test]
fn moments_for_all_definitions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let run = locmom(&[
        "moments",
        "--state",
        "gaussian(s=1,k0=2,q0=0)",
        "--definition",
        "all",
        "--order",
        "variance",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0);
    let rows = profile_rows(&out);
    assert_eq!(rows.len(), 4 * 512);
    let defs: Vec<&str> = rows.chunks(512).map(|c| c[0].3.as_str()).collect();
    assert_eq!(defs, ["S", "C", "MH", "W"]);
    for (q, v, m, d, o) in &rows {
        assert_eq!(o, "variance");
        if !m {
            assert!(v.is_nan());
            continue;
        }
        match d.as_str() {
            "S" if q.abs() > 2f64.sqrt() + 0.01 => assert!(*v < 0.0, "S at {q}: {v}"),
            "W" => assert!((v - 0.25).abs() < 1e-7),
            "C" => assert!((v - q * q / 4.0).abs() < 1e-7),
            _ => {}
        }
    }
}

#[test]
fn plane_wave_profile_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let run = locmom(&[
        "moments",
        "--state",
        PLANE,
        "--definition",
        "MH",
        "--order",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let rows = profile_rows(&out);
    assert!(rows.iter().all(|r| r.2 && (r.1 - 0.6283185307179586).abs() < 1e-10));
}

#[test]
fn json_profiles() {
    let run = locmom(&[
        "moments",
        "--grid-n",
        "128",
        "--q-min",
        "-12",
        "--q-max",
        "12",
        "--definition",
        "C",
        "--format",
        "json",
    ]);
    assert_eq!(code(&run), 0);
    let v = stdout_json(&run);
    let p = &v["profiles"][0];
    assert_eq!(p["definition"], "C");
    assert_eq!(p["q"].as_array().unwrap().len(), 128);
    assert!(v["config"].as_str().unwrap().contains("grid_n = 128"));
}

#[test]
fn decompose_records() {
    let run = locmom(&["decompose", "--definition", "S", "--format", "json"]);
    assert_eq!(code(&run), 0);
    let r = &stdout_json(&run)[0];
    for (key, want) in [
        ("avg_local_variance", 0.25),
        ("variance_of_local_avg", 0.0),
        ("total", 0.25),
        ("direct_total", 0.25),
    ] {
        assert!((r[key].as_f64().unwrap() - want).abs() < 1e-8, "{key}");
    }
    assert!(r["residual"].as_f64().unwrap() < 1e-8);

    let run = locmom(&["decompose", "--state", PLANE, "--definition", "C", "--format", "json"]);
    assert_eq!(code(&run), 0);
    let r = &stdout_json(&run)[0];
    for key in ["avg_local_variance", "variance_of_local_avg", "total", "direct_total"] {
        assert!(r[key].as_f64().unwrap().abs() < 1e-9, "{key}");
    }

    let run = locmom(&["decompose", "--state", TWO, "--format", "json"]);
    assert_eq!(code(&run), 0);
    let records = stdout_json(&run);
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r["residual"].as_f64().unwrap() < 1e-8));
    // Every definition shares p̄(q), so for p̂ the split cannot depend on it.
    let avg: Vec<f64> = records
        .iter()
        .map(|r| r["avg_local_variance"].as_f64().unwrap())
        .collect();
    assert!(avg.iter().all(|a| (a - avg[0]).abs() < 1e-8), "{avg:?}");

    // For p̂² the Wigner local mean differs from the others, and so does the split.
    let run = locmom(&[
        "decompose",
        "--state",
        TWO_MOVING,
        "--observable",
        "p^2",
        "--format",
        "json",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let records = stdout_json(&run);
    let split: Vec<(String, f64)> = records
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            assert!(r["residual"].as_f64().unwrap() < 1e-8);
            (
                r["definition"].as_str().unwrap().to_string(),
                r["variance_of_local_avg"].as_f64().unwrap(),
            )
        })
        .collect();
    let s = split[0].1;
    let w = split.iter().find(|(d, _)| d == "W").unwrap().1;
    assert!((w - s).abs() > 1e-3, "{split:?}");
}

#[test]
fn distributions_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let p = path.to_str().unwrap();

    let run = locmom(&[
        "distribution",
        "--kind",
        "wigner",
        "--state",
        "oscillator(level=1,omega=1)",
        "--out",
        p,
    ]);
    assert_eq!(code(&run), 0);
    let meta = stdout_json(&run);
    assert!((meta["min"]["value"].as_f64().unwrap() + 1.0 / std::f64::consts::PI).abs() < 1e-6);
    assert_eq!(meta["min"]["q"].as_f64().unwrap(), 0.0);
    assert_eq!(meta["min"]["p"].as_f64().unwrap(), 0.0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 512 * 512);

    let run = locmom(&["distribution", "--kind", "mh", "--state", PLANE, "--out", p]);
    assert_eq!(code(&run), 0);
    assert!(stdout_json(&run)["min"]["value"].as_f64().unwrap() >= -1e-10);

    let bin = dir.path().join("c.bin");
    let run = locmom(&[
        "distribution",
        "--kind",
        "classical",
        "--binary",
        "--out",
        bin.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0);
    let meta = stdout_json(&run);
    assert_eq!(meta["kind"], "classical");
    assert!(meta["min"]["value"].as_f64().unwrap() >= 0.0);
    let back = locmom_core::io::read_distribution_binary(std::fs::File::open(&bin).unwrap()).unwrap();
    assert_eq!(back.kind(), locmom_core::phase_space::QuasiKind::Classical);
    assert!(back.values().iter().all(|&v| v >= 0.0));
}

#[test]
fn evolve_reports() {
    let dir = tempfile::tempdir().unwrap();
    let free = dir.path().join("free");
    let run = locmom(&[
        "evolve",
        "--dt",
        "1e-3",
        "--steps",
        "100",
        "--out",
        free.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(free.join("report.json")).unwrap()).unwrap();
    assert_eq!(report, stdout_json(&run));
    let r = &report["residuals"];
    assert!(r["continuity"].as_f64().unwrap() < 1e-5);
    assert!((r["continuity_ratio"].as_f64().unwrap() - 4.0).abs() < 0.5);
    assert!(r["euler_w"].as_f64().unwrap() < 1e-4);
    let density = std::fs::read_to_string(free.join("density.csv")).unwrap();
    assert!(density.starts_with("# potential=free dt=1.0000000000000000e-3 hbar="));
    assert_eq!(density.lines().count(), 2 + 101 * 512);
    let momentum = std::fs::read_to_string(free.join("mean_momentum.csv")).unwrap();
    assert_eq!(momentum.lines().nth(1).unwrap(), "t,q,value,mask");

    let osc = dir.path().join("osc");
    let run = locmom(&[
        "evolve",
        "--state",
        "gaussian(s=0.7071067811865476,k0=0,q0=1)",
        "--potential",
        "harmonic:1",
        "--dt",
        "2e-3",
        "--steps",
        "786",
        "--stride",
        "6",
        "--out",
        osc.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let report = stdout_json(&run);
    assert_eq!(report["sign_flip"], true);
    assert!(report["mean_position_end"].as_f64().unwrap() < 0.0);
}

#[test]
fn exit_code_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();

    let run = locmom(&["moments", "--state", "gaussian(s=1,k0=oops,q0=0)"]);
    assert_eq!(code(&run), 2);
    let err = stderr_json(&run);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("gaussian.k0"));

    assert_eq!(code(&locmom(&["moments", "--grid-n", "9"])), 2);
    assert_eq!(code(&locmom(&["moments", "--no-such-flag"])), 2);
    assert_eq!(code(&locmom_env(&["moments", "--grid-n", "64"], "many")), 2);

    let run = locmom(&["evolve", "--dt", "0.1", "--out", out]);
    assert_eq!(code(&run), 3);
    let err = stderr_json(&run);
    assert_eq!(err["error"], "precondition");
    assert!(err["message"].as_str().unwrap().contains("suggested dt"));

    assert_eq!(
        code(&locmom(&[
            "moments", "--grid-n", "64", "--q-min", "-10", "--q-max", "10"
        ])),
        3
    );

    let run = locmom(&[
        "distribution",
        "--kind",
        "wigner",
        "--state",
        "gaussian(s=1,k0=30,q0=0)",
        "--out",
        out,
    ]);
    assert_eq!(code(&run), 4);
    assert_eq!(stderr_json(&run)["error"], "self_check");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "grid_n = 128\nq_min = -12.0\nq_max = 12.0\ndefinition = \"S\"\norder = \"2\"\nformat = \"json\"\n",
    )
    .unwrap();
    let run = locmom(&["moments", "--config", cfg.to_str().unwrap(), "--definition", "W"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let v = stdout_json(&run);
    assert_eq!(v["profiles"][0]["definition"], "W");
    assert_eq!(v["profiles"][0]["order"], "2");
    assert_eq!(v["profiles"][0]["q"].as_array().unwrap().len(), 128);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let cases: Vec<Vec<String>> = vec![
        vec!["moments".into(), "--state".into(), TWO.into(), "--out".into()],
        vec!["distribution".into(), "--kind".into(), "mh".into(), "--out".into()],
    ];
    for (i, base) in cases.iter().enumerate() {
        let mut outputs = Vec::new();
        for (j, threads) in ["0", "1", "3"].iter().enumerate() {
            let file = path(&format!("{i}-{j}"));
            let mut args: Vec<&str> = base.iter().map(String::as_str).collect();
            args.push(&file);
            let run = locmom_env(&args, threads);
            assert_eq!(code(&run), 0);
            outputs.push((std::fs::read(&file).unwrap(), run.stdout));
        }
        let first = &outputs[0];
        for o in &outputs[1..] {
            assert!(o.0 == first.0, "data differs for {base:?}");
        }
    }
    let a = locmom(&["decompose", "--state", TWO]);
    let b = locmom(&["decompose", "--state", TWO]);
    assert_eq!(a.stdout, b.stdout);
}
