//! Compiles a small C client against the generated header and shared library.

use std::path::{Path, PathBuf};
use std::process::Command;

const CLIENT: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "fkparticle.h"

#define CHECK(call) do { FkpStatus s_ = (call); if (s_ != FKP_STATUS_OK) { \
    char msg[256]; fkp_last_error_message(msg, sizeof msg); \
    fprintf(stderr, "%s failed: %d %s\n", #call, (int)s_, msg); return 1; } } while (0)

int main(void) {
    FkpProblem *problem = NULL;
    CHECK(fkp_problem_new("burgers", 1, 0.1, &problem));

    FkpScheme *scheme = NULL;
    CHECK(fkp_scheme_run(problem, 10, 20000, 0.2, 42, 1e-8, &scheme));

    double xs[3] = {-0.5, 0.0, 0.5};
    double values[3], grads[3];
    CHECK(fkp_scheme_evaluate(scheme, fkp_scheme_steps(scheme), xs, 3, values, grads));

    double mass = 0.0;
    CHECK(fkp_scheme_total_mass(scheme, 10, &mass));

    FkpOracleOptions opts = { FKP_ORACLE_METHOD_GAUSS_HERMITE, 0, 0, 200 };
    double ref = 0.0, se = -1.0;
    CHECK(fkp_oracle_reference(problem, 0.1, &xs[1], 1, &opts, &ref, &se));

    FkpProblem *bad = NULL;
    FkpStatus st = fkp_problem_new("no-such-problem", 1, 0.1, &bad);
    char msg[256];
    size_t len = fkp_last_error_message(msg, sizeof msg);

    printf("%.6f %.6f %.6f %.6f %d %zu\n", values[1], ref, mass, se, (int)st, len);
    int ok = fabs(values[1] - ref) < 0.02 && mass > 0.9 && mass < 1.1 && se == 0.0
        && st == FKP_STATUS_CONFIG && len > 0 && bad == NULL;

    fkp_scheme_free(scheme);
    fkp_problem_free(problem);
    return ok ? 0 : 2;
}
"#;

fn library_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?.to_path_buf();
    let profile = deps.parent()?.to_path_buf();
    [deps, profile]
        .into_iter()
        .find(|d| d.join("libfkparticle_ffi.so").exists() || d.join("libfkparticle_ffi.dylib").exists())
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fkparticle.h")).unwrap();
    for name in [
        "fkp_problem_new",
        "fkp_problem_free",
        "fkp_scheme_run",
        "fkp_scheme_evaluate",
        "fkp_scheme_free",
        "fkp_oracle_reference",
        "fkp_experiment_run",
        "fkp_last_error_message",
        "FKP_STATUS_OK",
        "typedef struct FkpScheme FkpScheme",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn c_client_links_and_runs() {
    let Some(lib) = library_dir() else {
        eprintln!("shared library not found next to the test binary; skipping");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let exe = dir.path().join("client");
    std::fs::write(&src, CLIENT).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg(format!("-I{}", include.display()))
        .arg(format!("-L{}", lib.display()))
        .args(["-lfkparticle_ffi", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to compile");
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &lib).output().unwrap();
    assert!(
        out.status.success(),
        "client exited with {:?}: {}{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
