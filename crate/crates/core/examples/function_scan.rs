//! Lists the functions the generator would seed rollouts from.
//!
//!     cargo run -p softverify --example function_scan -- path/to/repo
//!
//! Without an argument it scans the bundled test fixture.

use std::path::PathBuf;

use softverify::orchestrate::enumerate_functions;

fn main() {
    let root = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tinyrepo"));
    let functions = match enumerate_functions(&root) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    for f in &functions {
        println!("{:<40} {}", f.key(), f.short_name());
    }
    println!("{} functions under {}", functions.len(), root.display());
}
