//! Every example builds and runs to completion.

use std::process::Command;

const EXAMPLES: &[&str] =
    &["fbm_paths", "heat_kernels", "drift_catalog", "sde_solve", "sde_coupling", "she_solve", "sewing_germs", "metrics_tour", "run_suite"];

#[test]
fn examples_run() {
    let listed: Vec<String> = std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/examples"))
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(listed.len(), EXAMPLES.len(), "examples directory and list disagree: {listed:?}");
    for name in EXAMPLES {
        let out = Command::new(env!("CARGO"))
            .args(["run", "--quiet", "--profile", "test", "-p", "regnoise", "--example", name])
            .output()
            .expect("cargo runs");
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
