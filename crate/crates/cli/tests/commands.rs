use std::path::Path;

use growthdual::modelfile::ModelFile;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("growthdual").chain(args.iter().copied());
    let code = growthdual_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_reports_properties() {
    let (code, out, _) = cli(&["check", "zoo:twostage"]);
    assert_eq!(code, 0);
    assert!(out.contains("additive: yes"));
    assert!(out.contains("positive correlations: yes"));

    let (code, out, _) = cli(&["check", "zoo:dandelion", "--double-dual"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("positive correlations: no"));
}

#[test]
fn dual_file_is_self_dual() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("dual.json");
    let (code, _, err) = cli(&["dual", "zoo:nstage:n=3", "-o", path(&file)]);
    assert_eq!(code, 0, "{err}");
    let (code, out, _) = cli(&["check", path(&file), "--self-dual"]);
    assert_eq!(code, 0, "{out}");
    let line = out.lines().find(|l| l.starts_with("self-dual:")).unwrap();
    assert!(line.starts_with("self-dual: yes"), "{line}");
    assert_eq!(line.matches("->").count(), 4);
}

#[test]
fn emitted_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, model) in [("zoo", "household"), ("dual", "zoo:twostage"), ("lift", "zoo:threetype")] {
        let file = dir.path().join(format!("{cmd}.json"));
        let args: Vec<&str> = match cmd {
            "zoo" => vec!["zoo", model, "n=3"],
            _ => vec![cmd, model],
        };
        let (code, text, err) = cli(&args);
        assert_eq!(code, 0, "{err}");
        std::fs::write(&file, &text).unwrap();
        let parsed = ModelFile::from_json(&text).unwrap();
        let model = parsed.to_model().unwrap();
        let again = ModelFile::from_json(&ModelFile::from_model(&model).to_json()).unwrap();
        assert_eq!(again.to_model().unwrap().mappings(), model.mappings(), "{cmd}");
        let (code, _, err) = cli(&["check", path(&file)]);
        assert_eq!(code, 0, "{cmd}: {err}");
    }
}

#[test]
fn duality_test_finds_no_violations() {
    let (code, out, err) =
        cli(&["duality-test", "zoo:contact", "--geometry", "torus:4", "--maps", "100", "--horizon", "3"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains(": 0 violations"), "{out}");
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "zoo:contact", "--geometry", "torus:12", "--horizon", "2", "--seed", "4"];
    let (code, a, _) = cli(&args);
    assert_eq!(code, 0);
    assert!(a.starts_with("t,site,type\n"));
    assert_eq!(cli(&args).1, a);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["frobnicate"][..],
        &["check"],
        &["check", "zoo:nosuchmodel"],
        &["check", "zoo:contact:lambda=abc"],
        &["check", "/nonexistent/model.json"],
        &["simulate", "zoo:contact", "--initial", "single:999"],
        &["simulate", "zoo:contact", "--horizon", "-1"],
        &["survival", "zoo:contact", "--threads", "0"],
    ] {
        let (code, _, err) = cli(args);
        assert_eq!(code, 2, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn invalid_model_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(&file, "{\"format\": \"something-else\"}").unwrap();
    let (code, _, err) = cli(&["check", path(&file)]);
    assert_eq!(code, 1, "{err}");
}
