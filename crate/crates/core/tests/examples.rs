//! Every program under examples/ runs to completion.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn examples_run() {
    let bin_dir = PathBuf::from(env!("CARGO_BIN_EXE_cdfkit")).parent().unwrap().join("examples");
    let mut names: Vec<String> = std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/examples"))
        .unwrap()
        .filter_map(|e| e.unwrap().file_name().into_string().ok())
        .filter_map(|n| n.strip_suffix(".rs").map(str::to_owned))
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in names {
        let exe = bin_dir.join(&name);
        assert!(exe.exists(), "{} is not built; `cargo test` builds examples unless targets are filtered", exe.display());
        let out = Command::new(&exe).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
