use std::path::{Path, PathBuf};
use std::process::Command;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Directory holding `libcrumple_ffi.a` for the profile running this test.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = manifest_dir().join("include/crumple.h");
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Wextra", "-Werror", "-x", lang])
            .arg(&header)
            .status()
            .expect("run compiler");
        assert!(status.success(), "{compiler} rejected the header");
    }
}

#[test]
fn c_demo_links_and_runs() {
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("demo");
    let lib = artifact_dir().join("libcrumple_ffi.a");
    assert!(lib.is_file(), "static library missing at {}", lib.display());
    let status = Command::new("cc")
        .arg(manifest_dir().join("examples/demo.c"))
        .arg("-I")
        .arg(manifest_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("run cc");
    assert!(status.success());

    let cfg = out.path().join("car.cfg");
    std::fs::write(
        &cfg,
        "[mesh]\nproxy = 9, 8\n[vehicle]\nmass = 900\ncontrol_points = 12\n[solver]\ndt = 0.01\nduration = 1\n\
         [obstacle.ground]\ntype = halfspace\npoint = 0, 0, 0\nnormal = 0, 1, 0\n",
    )
    .unwrap();
    let run = Command::new(&exe).arg(&cfg).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.contains("frame 100"), "{text}");

    let bad = Command::new(&exe).arg(out.path().join("missing.cfg")).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("missing.cfg"));
}
