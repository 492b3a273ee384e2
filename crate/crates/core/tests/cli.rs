use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmm-forget")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn verify_all_passes_on_shipped_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let o = bin(&["verify", "all", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(!text.contains("FAIL"));
    for f in ["verify_prop51.csv", "verify_prop52.csv", "verify_lemmaA1.csv", "verify_lemmaA2.csv", "verify_lemmaA2_mc.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let head = std::fs::read_to_string(out.join("verify_prop51.csv")).unwrap();
    assert!(head.starts_with("case,n,lhs,rhs,holds\n"));
}

#[test]
fn missing_seed_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("tobit_forgetting.toml")).unwrap().replace("seed = 1\n", "");
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = bin(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn grid_mismatch_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&[
        "filter",
        "--config",
        &config("lgssm_filter.toml"),
        "--out",
        s(&tmp.path().join("o")),
        "--grid-lo",
        "-5",
        "--grid-hi",
        "5",
        "--grid-m",
        "100",
        "--set",
        "nu={form=\"grid_density\",values=[1.0,2.0,1.0]}",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nu"));
    let o = bin(&["filter", "--config", &config("lgssm_filter.toml"), "--out", s(&tmp.path().join("p")), "--grid-m", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_keys_and_bad_values_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for set in ["bogus=1", "model.phi=3.0", "experiment.nn=2"] {
        let o = bin(&["experiment", "forgetting", "--config", &config("tobit_forgetting.toml"), "--out", s(&tmp.path().join("o")), "--set", set]);
        assert_eq!(o.status.code(), Some(2), "{set}");
    }
    let o = bin(&["experiment", "sideways", "--config", &config("tobit_forgetting.toml"), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    // tobit observations are nonnegative
    let obs = tmp.path().join("obs.csv");
    std::fs::write(&obs, "step,x,y\n0,,0.5\n1,,-1.0\n").unwrap();
    let o = bin(&["filter", "--config", &config("tobit_forgetting.toml"), "--out", s(&tmp.path().join("o")), "--obs", s(&obs)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn outputs_stay_under_out() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let runs: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--config".into(), config("tobit_forgetting.toml"), "--n".into(), "30".into()],
        vec!["filter".into(), "--config".into(), config("lgssm_filter.toml"), "--n".into(), "20".into()],
        vec!["bound".into(), "--config".into(), config("finite_bound.toml")],
        vec![
            "experiment".into(),
            "misspec".into(),
            "--config".into(),
            config("tobit_misspec.toml"),
            "--set".into(),
            "experiment.replications=3".into(),
        ],
    ];
    for (i, mut a) in runs.into_iter().enumerate() {
        let dir = out.join(i.to_string());
        a.extend(["--out".into(), dir.to_string_lossy().into_owned()]);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        let o = bin(&refs);
        assert_eq!(o.status.code(), Some(0), "{a:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(dir.join("resolved_config.toml").exists());
    }
    assert_eq!(entries(tmp.path()), vec!["run"]);
    assert_eq!(entries(&out.join("0")), vec!["resolved_config.toml", "trajectory.csv"]);
    assert_eq!(entries(&out.join("1")), vec!["filter_trace.csv", "resolved_config.toml", "trajectory.csv"]);
    assert_eq!(
        entries(&out.join("2")),
        vec!["bound.csv", "bound_summary.json", "conditions.csv", "resolved_config.toml", "trajectory.csv"]
    );
    assert_eq!(
        entries(&out.join("3")),
        vec!["bounds.csv", "conditions.csv", "r_seq.csv", "rates.csv", "resolved_config.toml", "summary.txt", "tv_curves.csv"]
    );
    let trace = std::fs::read_to_string(out.join("1/filter_trace.csv")).unwrap();
    assert!(trace.starts_with("n,tv,logZ_nu,logZ_nuprime\n"));
    assert_eq!(trace.lines().count(), 22);
    let bound = std::fs::read_to_string(out.join("2/bound.csv")).unwrap();
    assert!(bound.starts_with("n,log_term_geo,log_term_ratio,log_total,total_clipped,applies\n"));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let args = ["experiment", "forgetting", "--config", &config("sv_forgetting.toml"), "--seed", "5", "--set", "experiment.replications=3", "--set", "experiment.n=40"];
    let mut first: Vec<&str> = args.to_vec();
    first.extend(["--out", s(&a)]);
    assert_eq!(bin(&first).status.code(), Some(0));
    let echo: PathBuf = a.join("resolved_config.toml");
    let b = tmp.path().join("b");
    assert_eq!(bin(&["experiment", "forgetting", "--config", s(&echo), "--out", s(&b)]).status.code(), Some(0));
    for f in ["tv_curves.csv", "rates.csv", "summary.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn simulated_trajectory_round_trips_through_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    assert_eq!(
        bin(&["simulate", "--config", &config("lgssm_filter.toml"), "--out", s(&sim), "--hide-states", "--n", "20"]).status.code(),
        Some(0)
    );
    let traj = std::fs::read_to_string(sim.join("trajectory.csv")).unwrap();
    assert!(traj.lines().nth(1).unwrap().starts_with("0,,"));
    let f1 = tmp.path().join("f1");
    let f2 = tmp.path().join("f2");
    assert_eq!(
        bin(&["filter", "--config", &config("lgssm_filter.toml"), "--out", s(&f1), "--obs", s(&sim.join("trajectory.csv"))]).status.code(),
        Some(0)
    );
    assert_eq!(bin(&["filter", "--config", &config("lgssm_filter.toml"), "--out", s(&f2), "--n", "20"]).status.code(), Some(0));
    assert_eq!(std::fs::read(f1.join("filter_trace.csv")).unwrap(), std::fs::read(f2.join("filter_trace.csv")).unwrap());
}
