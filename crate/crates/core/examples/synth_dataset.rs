//! Generate a synthetic dataset on disk and inspect it.
//!
//! ```text
//! cargo run --example synth_dataset -- /tmp/logs
//! ```

use std::path::PathBuf;

use logend::synthgen::{generate_dataset, load_dataset, DatasetProfile};

fn main() -> logend::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("logend-synth"));
    let profile = DatasetProfile::desk("DEMO", 8, 2);
    let manifest = generate_dataset(&root, &profile, 42)?;
    println!(
        "{} acquisitions under {}",
        manifest.entries.len(),
        root.join("DEMO").display()
    );

    for s in load_dataset(&root, "DEMO")?.iter().take(4) {
        println!(
            "{:<24} {}x{}  CS {:>5} px  pith ({:.1}, {:.1})",
            s.id.to_string(),
            s.image.width(),
            s.image.height(),
            s.truth.mask.count(),
            s.truth.pith[0],
            s.truth.pith[1]
        );
    }
    Ok(())
}
