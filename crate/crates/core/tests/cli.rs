use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fexp")).args(args).output().unwrap()
}

fn run_session(cmd: &str, session: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--session", session.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fexp-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn canonical_connection_matches_golden() {
    let dir = scratch("golden");
    let out = dir.join("g.json");
    let o = run_session(
        "g-from-f",
        &fixture("canonical.json"),
        &["--out", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        std::fs::read_to_string(fixture("golden/canonical_connection.json")).unwrap()
    );
    // and back again
    let back = dir.join("f.json");
    let o = run_session("f-from-g", &out, &["--out", back.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(
        std::fs::read_to_string(&back).unwrap(),
        std::fs::read_to_string(fixture("canonical.json")).unwrap()
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn ce_brackets_match_golden() {
    let o = run_session("linearize", &fixture("ce.json"), &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let artifact = text.split_once("==\n").expect("artifact separator").1;
    assert_eq!(
        artifact,
        std::fs::read_to_string(fixture("golden/ce_brackets.txt")).unwrap()
    );
}

#[test]
fn connection_round_trip_is_byte_exact() {
    let dir = scratch("roundtrip");
    let mut input = fixture("r2_connection.json");
    for (i, cmd) in ["hpt", "f-from-g", "extract-connection"].iter().enumerate() {
        let out = dir.join(format!("{i}.json"));
        let o = run_session(cmd, &input, &["--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stdout(&o));
        input = out;
    }
    assert_eq!(
        std::fs::read(&input).unwrap(),
        std::fs::read(fixture("r2_connection.json")).unwrap()
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn passing_commands_exit_zero() {
    for (cmd, file) in [
        ("validate", "canonical.json"),
        ("flatness", "canonical.json"),
        ("check-homotopy", "canonical.json"),
        ("validate", "r2_connection.json"),
        ("geodesic-oracle", "r2_second.json"),
        ("linearize", "poisson.json"),
        ("transfer", "shear.json"),
        ("canonicalize", "shear.json"),
        ("lift", "lift.json"),
    ] {
        let o = run_session(cmd, &fixture(file), &[]);
        assert_eq!(o.status.code(), Some(0), "{cmd} {file}: {}", stdout(&o));
        assert!(stdout(&o).contains("status=pass"), "{cmd} {file}");
    }
}

#[test]
fn flatness_reports_zero_residuals() {
    let o = run_session("flatness", &fixture("canonical.json"), &[]);
    assert!(stdout(&o).contains("nonzero_residuals=0"));
}

#[test]
fn perturbed_connection_exits_one() {
    let o = run_session("flatness", &fixture("perturbed.json"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("ey weight 0: -dx * dy * ex"), "{text}");
    assert!(text.contains("nonzero_residuals=1"));
}

#[test]
fn input_errors_exit_two() {
    let dir = scratch("errors");
    let missing = dir.join("nope.json");
    assert_eq!(run_session("validate", &missing, &[]).status.code(), Some(2));

    let bad_json = dir.join("bad.json");
    std::fs::write(&bad_json, "{\n  \"chart\": [\n}").unwrap();
    let o = run_session("validate", &bad_json, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    // the canonical fixture has no `connection` block
    assert_eq!(
        run_session("hpt", &fixture("canonical.json"), &[]).status.code(),
        Some(2)
    );

    let bad_series = dir.join("series.json");
    let text = std::fs::read_to_string(fixture("lift.json")).unwrap();
    std::fs::write(&bad_series, text.replace("x*y + y^3", "x/0")).unwrap();
    assert_eq!(run_session("lift", &bad_series, &[]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn outputs_are_deterministic() {
    for (cmd, file) in [
        ("hpt", "r2_connection.json"),
        ("linearize", "poisson.json"),
        ("transfer", "shear.json"),
        ("geodesic-oracle", "r2_second.json"),
    ] {
        let runs: Vec<Vec<u8>> = (0..3).map(|_| run_session(cmd, &fixture(file), &[]).stdout).collect();
        assert!(runs.windows(2).all(|w| w[0] == w[1]), "{cmd} {file}");
    }
}

#[test]
fn order_override_shrinks_truncation() {
    let o = run_session("flatness", &fixture("canonical.json"), &["--order", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("order=2"));
}
