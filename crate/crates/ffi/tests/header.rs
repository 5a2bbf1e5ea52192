use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "defake.h"
#include <stdio.h>

int main(void) {
    DefakeDataset *ds = NULL;
    DefakeStatus st = defake_dataset_synthesize(NULL, &ds);
    if (st != DEFAKE_STATUS_OK) {
        fprintf(stderr, "%s\n", defake_last_error_message());
        return 1;
    }
    DefakeMetrics m;
    uint8_t p[2] = {1, 0};
    defake_compute_metrics(p, p, 2, &m);
    printf("%s %zu %f\n", defake_version(), defake_dataset_news_count(ds), m.accuracy);
    defake_dataset_free(ds);
    return 0;
}
"#;

fn compiles(compiler: &str, lang: &str) {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(compiler)
        .args(["-x", lang, "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output();
    match out {
        Ok(out) => assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("skipping {compiler}: {e}"),
    }
}

#[test]
fn header_compiles_as_c() {
    compiles("cc", "c");
}

#[test]
fn header_compiles_as_cpp() {
    compiles("c++", "c++");
}
