use std::fs;
use std::path::Path;
use std::process::Command;

use quartic::mesh::generate::{holed_plate, icosahedron, torus};
use quartic::mesh::save_obj;
use quartic_cli::{deterministic_artifacts, verify, Pipeline, PipelineConfig, Stage};
use serde_json::Value;

fn config(dir: &Path, input: &Path, out: &str) -> PipelineConfig {
    PipelineConfig { input: input.to_path_buf(), out: dir.join(out), ..PipelineConfig::default() }
}

fn summary(dir: &Path, stage: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("summary_{stage}.json"))).unwrap()).unwrap()
}

#[test]
fn torus_runs_without_singularities() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("torus.obj");
    save_obj(&torus(20, 10, 3.0, 1.0), &input).unwrap();
    let cfg = config(tmp.path(), &input, "out");
    let report = Pipeline::new(cfg.clone()).unwrap().run().unwrap();
    assert!(report.error.is_none());
    assert_eq!(report.mesh["genus"], 1);
    assert_eq!(report.summaries["optimize"]["points"], 0);
    assert_eq!(report.summaries["tmesh"]["skipped"], "no singularities");
    let checks = verify(&cfg).unwrap();
    assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    assert!(cfg.out.join("verify.json").exists());
    let stored: PipelineConfig = toml::from_str(&fs::read_to_string(cfg.out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(stored, cfg);
}

#[test]
fn failure_is_persisted_with_stage_name() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("sphere.obj");
    save_obj(&icosahedron(), &input).unwrap();
    let cfg = config(tmp.path(), &input, "out");
    let err = Pipeline::new(cfg.clone()).unwrap().run().unwrap_err();
    assert_eq!(err.stage, "homology");
    assert!(err.to_string().contains("homology"));
    let report: Value = serde_json::from_str(&fs::read_to_string(cfg.out.join("report.json")).unwrap()).unwrap();
    assert!(report["error"].as_str().unwrap().starts_with("homology"));

    let status = Command::new(env!("CARGO_BIN_EXE_quartic"))
        .args(["pipeline", input.to_str().unwrap(), "--out", cfg.out.to_str().unwrap()])
        .env("RUST_LOG", "off")
        .status()
        .unwrap();
    assert!(!status.success());
}

#[test]
fn config_rejects_bad_thresholds() {
    assert!(PipelineConfig::from_toml("input = \"m.obj\"\nout = \"o\"\nepsilon = -1.0\ncomponent_tol = 1e-3\nricci_tol = 1e-8\noptimize_max_iters = 10\nricci_max_iters = 10\nseed = 1\ncoefficients = []\nstages = [\"homology\"]\n").is_err());
    let text = toml::to_string(&PipelineConfig::default()).unwrap();
    assert_eq!(PipelineConfig::from_toml(&text).unwrap(), PipelineConfig::default());
}

#[test]
fn genus_two_is_deterministic_and_cached() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("plate.obj");
    save_obj(&holed_plate(2, 5, 10), &input).unwrap();
    let a = config(tmp.path(), &input, "a");
    let b = config(tmp.path(), &input, "b");
    let ra = Pipeline::new(a.clone()).unwrap().run().unwrap();
    Pipeline::new(b.clone()).unwrap().run().unwrap();
    for name in deterministic_artifacts().into_iter().chain(["cache.json"]) {
        let (x, y) = (fs::read(a.out.join(name)).unwrap(), fs::read(b.out.join(name)).unwrap());
        assert!(x == y, "{name} differs between runs");
    }
    for s in Stage::ALL {
        assert_eq!(summary(&a.out, s.name()), summary(&b.out, s.name()));
    }
    assert!(ra.stages.iter().all(|t| !t.cached));
    assert!(verify(&a).unwrap().iter().all(|c| c.pass));

    // Same config again: everything comes from the cache.
    let again = Pipeline::new(a.clone()).unwrap().run().unwrap();
    assert!(again.stages.iter().all(|t| t.cached));

    // A Ricci parameter leaves upstream stages alone.
    let before = fs::metadata(a.out.join("periods.json")).unwrap().modified().unwrap();
    let mut c = a.clone();
    c.ricci_tol = 1e-9;
    let r = Pipeline::new(c).unwrap().run().unwrap();
    let cached: Vec<(String, bool)> = r.stages.iter().map(|t| (t.stage.clone(), t.cached)).collect();
    for (stage, hit) in &cached[..4] {
        assert!(hit, "{stage} recomputed");
    }
    assert!(!cached[4].1, "ricci should rerun");
    assert_eq!(fs::metadata(a.out.join("periods.json")).unwrap().modified().unwrap(), before);

    // Touching an artifact by hand invalidates its stage and everything that
    // hashes it.
    let mut text = fs::read_to_string(a.out.join("divisor.json")).unwrap();
    text.push('\n');
    fs::write(a.out.join("divisor.json"), text).unwrap();
    let r = Pipeline::new(a.clone()).unwrap().run().unwrap();
    let optimize = r.stages.iter().find(|t| t.stage == "optimize").unwrap();
    assert!(!optimize.cached);
    assert_eq!(fs::read(a.out.join("divisor.json")).unwrap(), fs::read(b.out.join("divisor.json")).unwrap());
}

#[test]
fn single_stage_subcommands_resume_from_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("torus.obj");
    save_obj(&torus(20, 10, 3.0, 1.0), &input).unwrap();
    let out = tmp.path().join("out");
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_quartic"))
            .args(args)
            .args([input.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("RUST_LOG", "off")
            .output()
            .unwrap()
    };
    // Periods need the forms that are not there yet.
    assert!(!run(&["periods"]).status.success());
    for s in ["homology", "oneforms", "periods", "optimize", "ricci", "immerse", "tmesh"] {
        let o = run(&[s]);
        assert!(o.status.success(), "{s}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["verify"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).lines().all(|l| l.starts_with("PASS")));
    let o = run(&["pipeline", "--stages", "homology,oneforms"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("(cached)"));
}
