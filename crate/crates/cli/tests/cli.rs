use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lanehrl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanehrl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn training_curriculum_writes_models_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path();
    for cmd in ["train-following", "train-lanechange", "train-decision"] {
        let o = lanehrl(&[cmd, "--steps", "300", "--seed", "3"], run);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "config.txt",
        "following/manifest.txt",
        "lane_change/manifest.txt",
        "decision/manifest.txt",
        "car_following_loss.csv",
        "lane_change_episodes.csv",
        "decision_loss.csv",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let loss = fs::read_to_string(run.join("car_following_loss.csv")).unwrap();
    assert_eq!(loss.lines().next(), Some("step,loss"));

    let eval_dir = dir.path().join("eval");
    let o = Command::new(env!("CARGO_BIN_EXE_lanehrl"))
        .args(["eval", "--checkpoint"])
        .arg(run)
        .arg("--out")
        .arg(&eval_dir)
        .arg("--config")
        .arg(write_config(dir.path(), "eval_episodes = 3\n"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(eval_dir.join("eval_episodes.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
    assert!(eval_dir.join("canonical/trajectory.csv").exists());

    let export_dir = dir.path().join("export");
    let o = Command::new(env!("CARGO_BIN_EXE_lanehrl"))
        .args(["export", "metrics", "--checkpoint"])
        .arg(run)
        .arg("--out")
        .arg(&export_dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(export_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some("t,phase,a_l,accel,steer,r_decision,r_adjust"));
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("custom.cfg");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lr = fast\n");
    let o = lanehrl(&["train-following", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = write_config(dir.path(), "no_such_key = 1\n");
    let o = lanehrl(&["rollout", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = lanehrl(&["export", "trajectory"], dir.path());
    assert_eq!(o.status.code(), Some(2), "export without --checkpoint");
}

#[test]
fn divergence_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "reward.following.w_dis = 100000\n");
    let o = lanehrl(&["train-following", "--steps", "500", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverge"));
}

#[test]
fn missing_frozen_models_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = lanehrl(&["train-decision", "--steps", "10"], &dir.path().join("empty"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("car-following"));
}
