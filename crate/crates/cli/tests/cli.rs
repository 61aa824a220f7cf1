use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_gasperlab");

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).env_remove("GASPERLAB_SEED").output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn unknown_flag_prints_usage() {
    let (code, _, err) = run(&["simulate", "--frobnicate"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn bad_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "validators = 8\nepochz = 3\n").unwrap();
    let (code, _, err) = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("epochz"), "{err}");
    assert_eq!(err.matches("error").count(), 1, "{err}");

    std::fs::write(&cfg, "eps2 = -0.1\n").unwrap();
    let (code, _, err) = run(&["equiv-game", "--config", cfg.to_str().unwrap(), "--trials", "10"]);
    assert_eq!(code, 1);
    assert!(err.contains("eps2"), "{err}");
}

#[test]
fn outputs_carry_provenance() {
    let (code, out, _) = run(&["analyze", "bounds", "--C", "64", "--S", "900", "--eps", "30", "--r", "0.5"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("# gasperlab analyze"), "{out}");
    assert!(out.contains("# seed:"));
}

#[test]
fn simulate_writes_a_snapshot_the_other_commands_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "validators = 16\nslots_per_epoch = 4\nepochs = 3\n").unwrap();
    let (code, _, err) = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let snap = dir.path().join("network.snapshot");
    for cmd in [vec!["fork-choice"], vec!["fork-choice", "--rule", "ghost"], vec!["finality"], vec!["slash-scan"]] {
        let mut args = cmd.clone();
        args.push(snap.to_str().unwrap());
        let (code, out, err) = run(&args);
        assert_eq!(code, 0, "{cmd:?}: {err}");
        assert!(out.starts_with("# gasperlab"));
    }
    let (_, out, _) = run(&["finality", snap.to_str().unwrap()]);
    assert!(out.lines().filter(|l| l.starts_with("finalized,")).count() >= 2, "{out}");
    let (_, out, _) = run(&["slash-scan", snap.to_str().unwrap()]);
    assert!(out.contains("# offenders: 0"), "{out}");
}

#[test]
fn fuzz_without_violations_exits_zero() {
    let (code, out, _) = run(&["fuzz", "--property", "all", "--cases", "5", "--seed", "1"]);
    assert_eq!(code, 0);
    assert!(out.contains("safety: 5 cases") && out.contains("liveness: 5 cases"), "{out}");
}
