use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tpt_cloud::committor::{load_committor, solve_committor};
use tpt_cloud::generator::build_generator;
use tpt_cloud::pipeline::{boundary_set, COMMITTOR_TOL};
use tpt_cloud::pointcloud::{load_cloud, load_tessellation};
use tpt_cloud::potentials::{equilibrium_weights, mueller_landmarks, Mueller, SpherePullback};

fn tpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpt-cloud")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = tpt(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn staged_commands_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = |name: &str| dir.path().join(name);
    let p = |name: &str| f(name).to_str().unwrap().to_string();
    let (cloud, tess, q) = (p("cloud.csv"), p("tess.json"), p("q.csv"));
    ok(&["sample", "--manifold", "sphere", "--n-samples", "600", "--seed", "2", "--output", &cloud]);
    ok(&["tessellate", "--cloud", &cloud, "--output", &tess]);
    let run = |cmd: &str, extra: &[&str]| {
        let mut args = vec![cmd, "--cloud", &cloud, "--tess", &tess, "--landscape", "sphere-mueller", "--eps", "0.2"];
        args.extend(extra);
        ok(&args)
    };
    run("committor", &["--output", &q]);
    run("tpt", &["--committor", &q, "--current-output", &p("current.csv"), "--path-output", &p("path.csv")]);
    run("control", &["--committor", &q, "--output", &p("exit.csv")]);
    let walk = run("walk", &["--committor", &q, "--k-max", "20000", "--output", &p("traj.csv")]);
    assert!(walk.contains("20000 jumps"), "{walk}");

    let lm = mueller_landmarks(&Mueller::default()).unwrap();
    let point = |k: usize| lm.x(k).lift_to_sphere().iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    let (a, b) = (point(1), point(3));
    let mp = ok(&[
        "meanpath", "--cloud", &cloud, "--trajectory", &p("traj.csv"), "--a-center", &a, "--b-center", &b, "--m", "30", "--l-max", "5",
        "--output", &p("mean.csv"),
    ]);
    assert!(mp.contains("iterations"), "{mp}");
    for name in ["current.csv", "path.csv", "exit.csv", "mean.csv"] {
        assert!(fs::metadata(f(name)).unwrap().len() > 0, "{name} is empty");
    }

    // The committor file matches a solve on the same inputs through the library.
    let cloud = load_cloud(&f("cloud.csv"), 2).unwrap();
    let tess = load_tessellation(&f("tess.json")).unwrap();
    let w = equilibrium_weights(&cloud, &SpherePullback::new(Mueller::default()).unwrap(), 0.2).unwrap();
    let gen = build_generator(&tess, &w.weights, &cloud).unwrap();
    let sa = boundary_set(&cloud, &lm.x(1).lift_to_sphere(), 0.05);
    let sb = boundary_set(&cloud, &lm.x(3).lift_to_sphere(), 0.05);
    let expected = solve_committor(&gen, &sa, &sb, COMMITTOR_TOL).unwrap();
    assert_eq!(load_committor(&f("q.csv")).unwrap(), expected.q);
}

#[test]
fn experiment_command_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(&config, "# small sphere run\nn_samples = 600\neps = 0.2\nk_max = 5000\nm = 20\nl_max = 3\nmep = false\n").unwrap();
    let out = dir.path().join("out");
    let text = ok(&["experiment", "--config", s(&config), "--set", "seed=3", "--output", s(&out)]);
    let printed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let written: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(printed, written);
    assert_eq!(written["config"]["seed"], "3");
    assert_eq!(written["config"]["n_samples"], "600");
}

#[test]
fn failures_name_the_stage_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = tpt(&["committor", "--cloud", s(&missing), "--tess", "t.json", "--landscape", "sphere-mueller", "--eps", "0.2", "--output", "q.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: input: ") && err.contains("missing.csv"), "{err}");

    let out = tpt(&["experiment", "--set", "bogus=1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config") && err.contains("bogus"), "{err}");

    let out = tpt(&["experiment", "--set", "eps=0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps must be positive"));

    assert!(!tpt(&["walk"]).status.success());
}

#[test]
fn mep_command_reports_the_action() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mep.csv");
    let text = ok(&["mep", "--landscape", "plane-mueller", "--output", s(&path)]);
    let action: f64 = text.rsplit("S = ").next().unwrap().trim().parse().unwrap();
    // Twice the sum of the climbs X1 -> X4 and X2 -> X5 along the minimum energy path.
    let lm = mueller_landmarks(&Mueller::default()).unwrap();
    let e = |k: usize| lm.x(k).energy;
    let exact = 2.0 * ((e(4) - e(1)) + (e(5) - e(2)));
    assert!((action - exact).abs() < 2e-3, "{action} vs {exact}");
    let rows = fs::read_to_string(&path).unwrap().lines().count();
    assert_eq!(rows, 101);
}
