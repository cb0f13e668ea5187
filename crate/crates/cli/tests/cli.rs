use std::path::Path;
use std::process::{Command, Output};

use causticwave_cli::stages::read_manifest;

const SEPARABLE: &str = r#"
[model]
omega_x = 1.1
omega_y = 1.0
lambda = 0.0

[search]
energy_range = [5.0, 5.4]

[field]
h = 0.1
raster = 41

[oracle]
basis = [10, 10]
raster = 81
compare_raster = 60
"#;

fn causticwave(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_causticwave"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn pipeline_outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = causticwave(d.path(), SEPARABLE, &["pipeline"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<String> = std::fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 12, "{names:?}");
    for name in names.iter().filter(|n| n.as_str() != "manifest.json") {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    // The manifests differ only in the output directory they record.
    let (ma, mb) = (
        read_manifest(&a.path().join("out")).unwrap(),
        read_manifest(&b.path().join("out")).unwrap(),
    );
    assert_eq!(ma.stages, mb.stages);
    let e = ma.stages["eigensearch:se"].metrics["energy"];
    assert!((e - 5.25).abs() < 1e-4, "{e}");
}

#[test]
fn resume_skips_unchanged_stages_and_reruns_changed_ones() {
    let d = tempfile::tempdir().unwrap();
    let first = causticwave(d.path(), SEPARABLE, &["pipeline"]);
    assert!(first.status.success(), "{}", stderr(&first));

    let again = causticwave(d.path(), SEPARABLE, &["--resume", "pipeline"]);
    assert!(again.status.success());
    let log = stderr(&again);
    assert_eq!(log.matches("up to date").count(), 7, "{log}");

    // A finer mesh invalidates the field and comparison but not the search.
    let finer = SEPARABLE.replace("h = 0.1", "h = 0.08");
    let third = causticwave(d.path(), &finer, &["--resume", "pipeline"]);
    let log = stderr(&third);
    assert!(third.status.success(), "{log}");
    assert!(
        log.contains("[eigensearch] up to date") && log.contains("[oracle] up to date"),
        "{log}"
    );
    assert!(
        log.contains("[field] running") && log.contains("[compare] running"),
        "{log}"
    );

    // Without --resume every stage runs, reusing the cached eigenstate.
    let fresh = causticwave(d.path(), SEPARABLE, &["arcs"]);
    assert!(fresh.status.success());
    assert!(stderr(&fresh).contains("reusing"), "{}", stderr(&fresh));
}

#[test]
fn deleted_output_forces_a_rerun() {
    let d = tempfile::tempdir().unwrap();
    assert!(causticwave(d.path(), SEPARABLE, &["caustic"])
        .status
        .success());
    std::fs::remove_file(d.path().join("out/fig1_caustic.csv")).unwrap();
    let o = causticwave(d.path(), SEPARABLE, &["--resume", "caustic"]);
    assert!(stderr(&o).contains("[caustic] running"));
    assert!(d.path().join("out/fig1_caustic.csv").exists());
}

#[test]
fn empty_energy_bracket_exits_with_code_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = SEPARABLE.replace("energy_range = [5.0, 5.4]", "energy_range = [0.3, 0.5]");
    let o = causticwave(d.path(), &cfg, &["eigensearch"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn invalid_configuration_exits_with_code_one() {
    let d = tempfile::tempdir().unwrap();
    let o = causticwave(d.path(), "[field]\nh = -1.0\n", &["field"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("field.h"), "{}", stderr(&o));
    let o = causticwave(d.path(), "[model]\nunknown = 1\n", &["trace"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn command_line_flags_override_the_file() {
    let d = tempfile::tempdir().unwrap();
    let o = causticwave(
        d.path(),
        SEPARABLE,
        &[
            "--method", "wkb", "--state", "2", "2", "--parity", "even", "arcs",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.path().join("out/eigenstate_wkb.json").exists());
    let m = read_manifest(&d.path().join("out")).unwrap();
    assert!(m.stages.contains_key("arcs:wkb"));
}
