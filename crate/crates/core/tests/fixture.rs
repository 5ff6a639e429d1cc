//! The bundled LIBSVM fixture is the synthetic generator's output, byte for
//! byte. Set `ZOLDSD_BLESS=1` to rewrite it after changing the generator.

use std::path::PathBuf;

use zoldsd::objective::synthetic::a9a_like;
use zoldsd::objective::{least_squares_objective, read_libsvm_file};

pub const FIXTURE_ROWS: usize = 2000;
pub const FIXTURE_SEED: u64 = 2024;

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/a9a_synthetic.libsvm")
}

#[test]
fn fixture_matches_generator() {
    let generated = a9a_like(FIXTURE_ROWS, FIXTURE_SEED);
    let text = generated.to_libsvm();
    if std::env::var_os("ZOLDSD_BLESS").is_some() {
        std::fs::write(fixture_path(), &text).unwrap();
    }
    let on_disk = std::fs::read_to_string(fixture_path()).expect("fixture missing; run with ZOLDSD_BLESS=1");
    assert_eq!(on_disk, text);
    assert_eq!(read_libsvm_file(fixture_path()).unwrap(), generated);
}

#[test]
fn fixture_scale() {
    let ls = least_squares_objective(read_libsvm_file(fixture_path()).unwrap()).unwrap();
    let l = ls.lipschitz_estimate(300);
    assert!(l > 0.1 && l < 1.0, "L = {l}");
}
