//! Writes the synthetic thirteen-model fixture to a directory.
//!
//! ```text
//! cargo run --release --example make_fixture -- /tmp/fixture [--small]
//! ```

use std::path::PathBuf;

use embias::fixture::{write_fixture, FixtureSpec};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "fixture".into()));
    let spec = match args.next().as_deref() {
        Some("--small") => FixtureSpec::small(),
        _ => FixtureSpec::standard(),
    };
    let manifest = write_fixture(&dir, &spec)?;
    println!("{}", manifest.display());
    Ok(())
}
