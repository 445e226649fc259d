use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kinfluid::config::{GridConfig, RunConfig};
use kinfluid::RadialMap;
use serde_json::Value;

fn kinfluid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinfluid")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// A Gaussian run small enough for a unit-sized test.
fn small_gaussian() -> RunConfig {
    let mut c = RunConfig::shipped("gaussian").unwrap();
    c.name = "small".into();
    c.grid.n_radial = 32;
    c.grid.n_angular = 12;
    c.spectral.eta_min = 1e-3;
    c.spectral.n_eta = 13;
    c.spectral.census_eta_min = 1e-2;
    c.macro_.grid = GridConfig { n_radial: 16, n_angular: 8, radial_map: RadialMap::Algebraic { scale: 1.0 } };
    c.macro_.xi = vec![1.0, 0.5, 0.25];
    c.macro_.epsilon = vec![1e-1, 1e-2];
    c.macro_.n_output = 21;
    c.macro_.n_dense = 201;
    c
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{ \"name\": ").unwrap();
    let out = kinfluid(&["spectrum", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_field_and_unknown_set_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::to_value(small_gaussian()).unwrap();
    v["grid"]["n_radial_typo"] = Value::from(3);
    let path = dir.path().join("typo.json");
    fs::write(&path, v.to_string()).unwrap();
    assert_eq!(code(&kinfluid(&["spectrum", "--config", path.to_str().unwrap()])), 2);
    assert_eq!(code(&kinfluid(&["verify", "--set", "alpha3"])), 2);
}

#[test]
fn domain_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out_arg = out_dir.to_str().unwrap();

    let mut heavy = RunConfig::shipped("alpha8-beta0").unwrap();
    heavy.equilibrium.alpha = Some(4.5);
    let out = kinfluid(&["spectrum", "--config", &write_config(dir.path(), &heavy), "--out", out_arg]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let mut zero = small_gaussian();
    zero.macro_.xi[0] = 0.0;
    assert_eq!(code(&kinfluid(&["evolve", "--config", &write_config(dir.path(), &zero), "--out", out_arg])), 3);

    let mut wide = small_gaussian();
    wide.macro_.epsilon = vec![0.5, 0.05];
    assert_eq!(code(&kinfluid(&["evolve", "--config", &write_config(dir.path(), &wide), "--out", out_arg])), 3);

    let mut empty = small_gaussian();
    empty.spectral.eta_min = empty.spectral.eta_max;
    let out = kinfluid(&["scaling", "--config", &write_config(dir.path(), &empty), "--out", out_arg]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient range"));

    // Nothing is written for rejected runs.
    assert!(!out_dir.exists());
}

#[test]
fn spectrum_writes_branches_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_gaussian());
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let res = kinfluid(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
            assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
            out.join("small")
        })
        .collect();
    let mut files: Vec<String> =
        fs::read_dir(&runs[0]).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(
        files,
        [
            "branch_acoustic_minus.csv",
            "branch_acoustic_plus.csv",
            "branch_boussinesq.csv",
            "branch_transversal.csv",
            "spectrum_summary.json"
        ]
    );
    for f in &files {
        assert_eq!(fs::read(runs[0].join(f)).unwrap(), fs::read(runs[1].join(f)).unwrap(), "{f} differs");
    }

    let csv = fs::read_to_string(runs[0].join("branch_boussinesq.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "label,eta,re_mu,im_mu,defect,residual,C_0re,C_0im,C_1re,C_1im,C_2re,C_2im,C_3re,C_3im,C_4re,C_4im"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 13);
    let first: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(first.len(), 16);
    assert_eq!(first[0], "boussinesq");
    assert_eq!(first[1], "1.0000000000000001e-1");

    let summary = read_json(&runs[0].join("spectrum_summary.json"));
    assert_eq!(summary["passed"], Value::Bool(true));
    assert_eq!(summary["set"], "small");
    let ids: Vec<u64> = summary["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, [1, 6]);
}

#[test]
fn evolve_writes_trajectories_with_seed_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let small = small_gaussian();
    let cfg = write_config(dir.path(), &small);
    let out = dir.path().join("out");
    let res = kinfluid(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(matches!(code(&res), 0 | 1), "{}", String::from_utf8_lossy(&res.stderr));
    let run = out.join("small");
    let report = read_json(&run.join("limit_report.json"));
    assert_eq!(report["seed"].as_u64(), Some(small.macro_.seed));
    let entries = report["trajectories"].as_array().unwrap();
    // Three |ξ| at the smallest ε plus the larger ε at the reference |ξ|.
    assert_eq!(entries.len(), 4);
    for e in entries {
        assert_eq!(e["seed"].as_u64(), Some(small.macro_.seed));
        let csv = fs::read_to_string(run.join(e["file"].as_str().unwrap())).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,rho_re,rho_im,m1_re,m1_im,m2_re,m2_im,m3_re,m3_im,theta_re,theta_im,energy"
        );
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), small.macro_.n_output);
        assert_eq!(rows[0][0], 0.0);
        // Well-prepared start: ρ̂ = −1, θ̂ = 1, no momentum along ξ = e₁.
        assert!((rows[0][1] + 1.0).abs() < 1e-12 && (rows[0][9] - 1.0).abs() < 1e-12);
        assert!(rows[0][3].abs() < 1e-12);
        assert!(rows.windows(2).all(|w| w[1][11] <= w[0][11] * (1.0 + 1e-10)));
    }
    let ids: Vec<u64> = report["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, [9, 10]);
}

#[test]
fn scaling_reports_the_predicted_exponents() {
    let dir = tempfile::tempdir().unwrap();
    for (set, expected) in [("alpha5.5-beta0", [1.5, 2.0, 1.0]), ("alpha8-beta0", [2.0, 2.0, 1.0])] {
        let out = dir.path().join(set);
        let res = kinfluid(&["scaling", "--set", set, "--fast", "--out", out.to_str().unwrap()]);
        assert!(matches!(code(&res), 0 | 1), "{}", String::from_utf8_lossy(&res.stderr));
        let report = read_json(&out.join(set).join("scaling_report.json"));
        let p = &report["scaling"]["prediction"];
        let got =
            [p["zeta_long"].as_f64().unwrap(), p["zeta_trans"].as_f64().unwrap(), p["im_exponent"].as_f64().unwrap()];
        assert_eq!(got, expected, "{set}");
        for b in report["scaling"]["branches"].as_array().unwrap() {
            assert!(b["re_fit"]["exponent"].as_f64().unwrap().is_finite());
        }
    }
}

#[test]
fn fast_flag_reduces_grids_and_relaxes_tolerances() {
    let full: Value = serde_json::from_slice(&kinfluid(&["show-config", "--set", "gaussian"]).stdout).unwrap();
    let fast: Value =
        serde_json::from_slice(&kinfluid(&["show-config", "--set", "gaussian", "--fast"]).stdout).unwrap();
    assert_eq!(full["fast"], Value::Bool(false));
    assert_eq!(fast["fast"], Value::Bool(true));
    assert!(fast["grid"]["n_radial"].as_u64() < full["grid"]["n_radial"].as_u64());
    let tol = |v: &Value| v["tolerances"]["slope"].as_f64().unwrap();
    assert_eq!(tol(&fast), 2.0 * tol(&full));
}

#[test]
fn shipped_config_files_match_the_named_sets() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in kinfluid::config::SHIPPED_SETS {
        let text = fs::read_to_string(root.join(format!("{name}.json"))).unwrap();
        let cfg: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, RunConfig::shipped(name).unwrap(), "{name}");
    }
}
