use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "rankdyn.h"

int main(void) {
    uint32_t a[4] = {1, 2, 3, 4}, b[4] = {2, 1, 3, 4};
    double tau = -1.0;
    if (rd_kendall_tau(a, b, 4, &tau) != RD_STATUS_OK) return 10;
    if (tau * 6.0 < 0.999 || tau * 6.0 > 1.001) return 11;

    uint32_t bad[4] = {1, 1, 3, 4};
    if (rd_kendall_tau(bad, b, 4, &tau) != RD_STATUS_DATA) return 12;
    if (rd_last_error() == NULL) return 13;

    RdPanel *panel = NULL;
    if (rd_simulate("static1", 1.0, 5, &panel) != RD_STATUS_OK) return 14;
    size_t n, m, t;
    rd_panel_dims(panel, &n, &m, &t);
    RdArchive *archive = NULL;
    RdStatus s = rd_fit(panel, "{\"model\": \"rolinear\", \"sampler\": {\"n_burnin\": 5, \"n_draws\": 5}}", &archive);
    if (s != RD_STATUS_OK) { fprintf(stderr, "%s\n", rd_last_error()); return 15; }
    size_t draws = 0;
    rd_archive_n_draws(archive, &draws);
    if (draws != 5) return 16;
    printf("n=%zu m=%zu t=%zu draws=%zu\n", n, m, t, draws);
    rd_archive_free(archive);
    rd_panel_free(panel);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().join("librankdyn_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = work.path().join("main");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("draws=5"));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
