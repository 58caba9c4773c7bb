use std::path::Path;
use std::process::{Command, Output};

fn nemfilm(args: &[&str], out: &Path) -> Output {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/disk_k0.toml");
    Command::new(env!("CARGO_BIN_EXE_nemfilm"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn fit_rejects_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("energies.csv"), "eps,h,energy\n").unwrap();
    let out = nemfilm(&["fit", "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no data rows"));
}

#[test]
fn fit_names_a_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("energies.csv"), "eps,h\n0.2,0.05\n").unwrap();
    let out = nemfilm(&["fit", "--quiet"], dir.path());
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`energy`"));
}

#[test]
fn fit_reproduces_an_exact_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("eps,energy\n");
    for k in 0..6 {
        let e = 0.2 * 0.125f64.powf(k as f64 / 5.0);
        text += &format!("{e:?},{:?}\n", 0.5 + 0.1 * e * (1.0 / e).ln() - 0.2 * e);
    }
    std::fs::write(dir.path().join("energies.csv"), text).unwrap();
    let out = nemfilm(&["fit", "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = std::fs::read_to_string(dir.path().join("fit.csv")).unwrap();
    let a: f64 = fit.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((a - 0.5).abs() < 1e-9, "{fit}");
}

#[test]
fn version_prints() {
    let out = Command::new(env!("CARGO_BIN_EXE_nemfilm"))
        .arg("version")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("nemfilm "));
}
