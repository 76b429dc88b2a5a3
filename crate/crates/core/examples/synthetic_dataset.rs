//! Writes a rule-structured synthetic dataset (`train.txt`, `test.txt`)
//! usable with every CLI command.
//!
//! ```text
//! cargo run --release -p cyclekit --example synthetic_dataset -- data/synth 400 7
//! ```

use std::path::PathBuf;

use cyclekit::synthetic::{write_dataset, SyntheticConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let entities: usize = args.next().map_or(400, |s| s.parse().expect("entity count"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let train = SyntheticConfig {
        entities,
        ..Default::default()
    };
    let test = SyntheticConfig {
        entities: (entities / 2).max(2),
        ..Default::default()
    };
    if let Err(e) = write_dataset(&dir, &train, &test, seed) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    println!("wrote {}/train.txt and {}/test.txt", dir.display(), dir.display());
}
