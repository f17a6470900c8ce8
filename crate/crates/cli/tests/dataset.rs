//! The bundled synthetic dataset is reproducible from its generator.
//! Set `DUPLEX_REGENERATE=1` to rewrite the files.

use std::path::PathBuf;

use duplex_core::synth;

const SYMBOLS: [&str; 3] = ["SYNA", "SYNB", "SYNC"];
const ROWS: usize = 2400;
const SEED: u64 = 2021;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")
}

#[test]
fn bundled_files_match_generator() {
    let frame = synth::random_walk(&SYMBOLS, ROWS, 1, SEED);
    let regenerate = std::env::var_os("DUPLEX_REGENERATE").is_some();
    for (i, sym) in SYMBOLS.iter().enumerate() {
        let mut bytes = Vec::new();
        frame.series(i).write_csv(&mut bytes).unwrap();
        let path = dir().join(format!("{sym}.csv"));
        if regenerate {
            std::fs::write(&path, &bytes).unwrap();
        }
        let on_disk = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(on_disk == bytes, "{} differs from the generator output", path.display());
    }
}
