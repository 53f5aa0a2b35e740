//! Circular-grid fingerprint features; rotation is compensated by shifting
//! cells within each band.

use logend::baselines::{circular_grid_compare, circular_grid_features, estimate_pith, GridConfig};
use logend::pipeline::segment_samples;
use logend::synthgen::{synthesize, DatasetProfile};

fn main() -> logend::Result<()> {
    let samples = synthesize(&DatasetProfile::desk("GRID", 8, 2), 9)?;
    let patches = segment_samples(&samples, None, 0.5, 5)?.segmented;
    let config = GridConfig::default();

    let templates = patches
        .iter()
        .map(|s| {
            circular_grid_features(
                &s.patch,
                &s.mask,
                &estimate_pith(&s.patch, &s.mask)?,
                &config,
                0.0,
            )
        })
        .collect::<logend::Result<Vec<_>>>()?;
    println!(
        "{} bands x {} cells, {} values per cell",
        config.bands,
        config.cells_per_band,
        config.descriptor_len()
    );
    println!(
        "self vs rotated by 3 cells: {}",
        circular_grid_compare(&templates[0], &templates[0].shifted(3))?
    );
    for j in 1..6 {
        let same = patches[0].id.label() == patches[j].id.label();
        println!(
            "{} vs {}: {:.4}{}",
            patches[0].id,
            patches[j].id,
            circular_grid_compare(&templates[0], &templates[j])?,
            if same { "  (same end)" } else { "" }
        );
    }
    Ok(())
}
