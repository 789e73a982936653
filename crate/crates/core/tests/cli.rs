use std::process::{Command, Output};

fn critstep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critstep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_names_every_builtin() {
    let out = critstep(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "fig2_qlearning",
        "fig2_cvs",
        "fig4_qlambda",
        "fig4_cvs",
        "fig6_mc",
        "fig6_cvs",
        "fig8_qlearning",
        "fig8_cvs",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
    for env in ["tree1", "tree2", "tree3", "shooter"] {
        assert!(text.contains(env));
    }
}

#[test]
fn run_spec_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("mini.json");
    std::fs::write(
        &spec,
        r#"{
            "name": "mini",
            "env": {"kind": "tree3", "siblings": 4},
            "agent": {"kind": "cvs", "target_kind": "sarsa"},
            "config": {"alpha": 0.2},
            "episodes": 1000,
            "smoothing_window": 5
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = critstep(&[
        "run",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--runs",
        "3",
        "--episodes",
        "12",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("mini.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 12 + 1);
    assert_eq!(lines[0], "episode,mean_return,smoothed_return,run_0,run_1,run_2");
    assert!(lines.iter().all(|l| l.split(',').count() == 3 + 3));
    assert!(lines[12].starts_with("11,"));
}

#[test]
fn unknown_spec_is_diagnosed() {
    let out = critstep(&["run", "--spec", "fig99_nothing"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("fig99_nothing"));
}

#[test]
fn invalid_config_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(
        &spec,
        r#"{"name": "bad", "env": {"kind": "tree1"}, "agent": {"kind": "q_learning"},
            "config": {"epsilon": 1.5}, "episodes": 10}"#,
    )
    .unwrap();
    let out = critstep(&["run", "--spec", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("epsilon"), "{}", stderr(&out));
    assert!(!dir.path().join("bad.csv").exists());
}

#[test]
fn unknown_field_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("typo.json");
    std::fs::write(
        &spec,
        r#"{"name": "typo", "env": {"kind": "tree1"}, "agent": {"kind": "q_learning"},
            "config": {"alhpa": 0.1}, "episodes": 10}"#,
    )
    .unwrap();
    let out = critstep(&["run", "--spec", spec.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("alhpa"), "{}", stderr(&out));
}

#[test]
fn reproduce_needs_a_selection() {
    let out = critstep(&["reproduce"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--all"));
}
