//! Compiles and runs a small C program against the generated header and the
//! static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "emx.h"

int main(void) {
    EmxDeviceParams p;
    EmxDevice *dev = NULL;
    double n = -1.0;
    if (emx_device_default_params(&p) != EMX_STATUS_OK) return 1;
    if (emx_device_new(&p, &dev) != EMX_STATUS_OK) return 2;
    if (emx_occupancy(dev, 0.0, &n) != EMX_STATUS_OK) return 3;
    if (n != p.n_bath_m) return 4;
    if (emx_occupancy(NULL, 0.0, &n) != EMX_STATUS_NULL_POINTER) return 5;
    if (emx_last_error() == NULL) return 6;
    emx_device_free(dev);
    printf("ok\n");
    return 0;
}
"#;

fn profile_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let lib = profile_dir().join("libemx_ffi.a");
    assert!(
        lib.exists(),
        "static library not built at {}",
        lib.display()
    );
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR")).join("emx_c_program");
    std::fs::create_dir_all(&tmp).unwrap();
    let src = tmp.join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = tmp.join("main");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
