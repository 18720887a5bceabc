use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "samples_per_class = 4\ntest_per_class = 3\nimage_size = 16\neval_distances = 1\ntrials = 1\nmodel_epochs = 10\ncrafter_epochs = 10\nmodes = none,manifool\n";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_manifool")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn subcommands_chain_through_files() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    let [data, crafter, model, crafted, augmented, eval] =
        ["data", "crafter", "model", "crafted", "augmented", "eval"].map(|d| root.path().join(d));

    ok(&["gen-data", "--config", p(&cfg), "--out", p(&data)]);
    assert!(data.join("manifest.csv").is_file());

    let data_cfg = root.path().join("data.cfg");
    std::fs::write(&data_cfg, format!("{SMALL}data_dir = {}\n", data.display())).unwrap();
    ok(&["train", "--config", p(&data_cfg), "--as-crafter", "--out", p(&crafter)]);
    assert!(crafter.join("model.txt").is_file());

    ok(&["craft", "--config", p(&data_cfg), "--model", p(&crafter), "--out", p(&crafted)]);
    let csv = std::fs::read_to_string(crafted.join("crafted.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12);

    ok(&["augment", "--config", p(&data_cfg), "--mode", "manifool", "--crafter", p(&crafter), "--out", p(&augmented)]);
    let provenance = std::fs::read_to_string(augmented.join("provenance.csv")).unwrap();
    assert_eq!(provenance.lines().count(), 1 + 24);

    ok(&["train", "--config", p(&data_cfg), "--mode", "manifool", "--crafter", p(&crafter), "--out", p(&model)]);
    ok(&["evaluate", "--config", p(&data_cfg), "--model", p(&model), "--out", p(&eval)]);
    for name in ["accuracy.csv", "curve.csv", "robustness.csv"] {
        assert!(eval.join(name).is_file(), "{name} missing");
    }
}

#[test]
fn report_is_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    ok(&["report", "--config", p(&cfg), "--out", p(&a), "--threads", "1"]);
    ok(&["report", "--config", p(&cfg), "--out", p(&b), "--threads", "2"]);
    for name in ["accuracy.csv", "robustness.csv", "augmentation.csv", "curve_none.csv", "curve_manifool.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn errors_are_recorded() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("bad.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let out_dir = root.path().join("out");
    let out = run(&["report", "--config", p(&cfg), "--out", p(&out_dir)]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("kind = config"), "{stderr}");
    assert!(std::fs::read_to_string(out_dir.join("error.txt")).unwrap().contains("status = error"));

    let out = run(&["train", "--mode", "manifool", "--out", p(&out_dir)]);
    assert!(!out.status.success());
}
