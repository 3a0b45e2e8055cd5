use std::path::Path;
use std::process::{Command, Output};

fn electrosense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_electrosense"))
        .args(args)
        .output()
        .expect("spawn electrosense")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn build_dict(out: &Path, panels: &str) {
    let o = electrosense(&[
        "dict",
        "build",
        "--panels",
        panels,
        "--samples",
        "128",
        "--scales",
        "-1,0",
        "--out",
        path(out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn dictionary_fingerprint_tracks_resolution_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let coarse = dir.path().join("coarse.json");
    let fine = dir.path().join("fine.json");
    build_dict(&coarse, "64");
    build_dict(&fine, "96");
    let read = |p: &Path| serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(p).unwrap()).unwrap();
    let (a, b) = (read(&coarse), read(&fine));
    assert_eq!(a["settings_fingerprint"], b["settings_fingerprint"]);
    assert_ne!(a["fingerprint"], b["fingerprint"]);

    let o = electrosense(&["dict", "inspect", path(&coarse)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("ellipse2"));

    let mut tampered = a.clone();
    tampered["entries"][0]["descriptor"]["values"][0] = serde_json::json!(123.0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, tampered.to_string()).unwrap();
    assert_eq!(electrosense(&["dict", "inspect", path(&bad)]).status.code(), Some(3));
}

#[test]
fn malformed_and_missing_inputs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(
        electrosense(&["dict", "inspect", path(&garbage)]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("missing.json");
    assert_eq!(
        electrosense(&["dict", "inspect", path(&missing)]).status.code(),
        Some(2)
    );
    let out = dir.path().join("out");
    let o = electrosense(&["experiment", "--plan", path(&garbage), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_reconstruct_identify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let dict = dir.path().join("dict.json");
    build_dict(&dict, "64");
    let data = dir.path().join("data.json");
    let csv_dir = dir.path().join("csv");
    let o = electrosense(&[
        "simulate",
        "--shape",
        "ellipse",
        "--aperture",
        "0.785398",
        "--panels",
        "128",
        "--samples",
        "128",
        "--scales",
        "-1,0",
        "--out",
        path(&data),
        "--csv-dir",
        path(&csv_dir),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = std::fs::read_to_string(csv_dir.join("msr_j0.csv")).unwrap();
    assert!(header.starts_with("# j=0"));

    let rec = dir.path().join("rec");
    let o = electrosense(&["reconstruct", "--data", path(&data), "--out", path(&rec)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(rec.join("reconstruction_j-1.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("t,N11,N12,N22,residual"));
    assert_eq!(text.lines().count(), 129);

    let ranking = dir.path().join("ranking.csv");
    let o = electrosense(&[
        "identify",
        "--dict",
        path(&dict),
        "--data",
        path(&data),
        "--out",
        path(&ranking),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ranking = std::fs::read_to_string(ranking).unwrap();
    assert!(ranking.lines().nth(1).unwrap().starts_with("1,ellipse,"), "{ranking}");

    // Data sampled differently from the dictionary cannot be matched.
    let other = dir.path().join("other.json");
    let o = electrosense(&[
        "simulate",
        "--shape",
        "ellipse",
        "--panels",
        "128",
        "--samples",
        "256",
        "--scales",
        "-1,0",
        "--out",
        path(&other),
    ]);
    assert!(o.status.success());
    let o = electrosense(&["identify", "--dict", path(&dict), "--data", path(&other)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn experiment_runs_are_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let plan = serde_json::json!({
        "name": "smoke",
        "targets": [{"name": "circle", "shape": "circle"}, {"name": "ellipse", "shape": "ellipse"}],
        "apertures": [std::f64::consts::FRAC_PI_4],
        "noise_levels": [0.5],
        "trials": 5,
        "scale_sets": [[-1, 0]],
        "seed_base": 4,
        "simulation_panels": 96,
        "dictionary": {"panels": 64, "duration": 5.0, "samples": 128, "scales": [-1, 0],
            "entries": [{"name": "circle", "shape": "circle"}, {"name": "ellipse", "shape": "ellipse"},
                        {"name": "flower", "shape": "flower"}]}
    });
    let plan_path = dir.path().join("plan.json");
    std::fs::write(&plan_path, plan.to_string()).unwrap();
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec!["experiment", "--out", path(out)];
        args.extend_from_slice(extra);
        let o = electrosense(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("report.csv")).unwrap()
    };
    let a = dir.path().join("a");
    let first = run(&a, &["--plan", path(&plan_path), "--trials", "2"]);
    assert!(first.starts_with("shape,rho,alpha,scales,trials,successes,success_prob,random_guess"));
    assert_eq!(first.lines().count(), 3);

    let b = dir.path().join("b");
    let second = run(&b, &["--sequential", "--plan", path(&plan_path), "--trials", "2"]);
    assert_eq!(first, second);

    let c = dir.path().join("c");
    let manifest = a.join("manifest.json");
    let replayed = run(&c, &["--replay", path(&manifest)]);
    assert_eq!(first, replayed);
    let report = |d: &Path| {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
        v["report"].clone()
    };
    assert_eq!(report(&a), report(&c));
}

#[test]
fn bundled_plans_parse() {
    let dir = tempfile::tempdir().unwrap();
    // An unknown name is neither a file nor a bundled plan.
    let o = electrosense(&["experiment", "--plan", "no_such_plan.json", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    for name in [
        "fig_errorbar_pi16.json",
        "fig_noise_sweep.json",
        "fig_scale_ablation.json",
    ] {
        let plan: serde_json::Value =
            serde_json::from_str(electrosense_plan(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(plan["trials"], 100, "{name}");
    }
}

fn electrosense_plan(name: &str) -> &'static str {
    electrosense::experiments::bundled(name).expect("bundled plan")
}
