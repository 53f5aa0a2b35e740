//! Triplet-train a small embedder on ground-truth patches and compare
//! genuine and impostor distances.

use logend::embedding::{build_embedder, train_embedder, TrainSchedule};
use logend::pipeline::segment_samples;
use logend::synthgen::{synthesize, DatasetProfile};

fn main() -> logend::Result<()> {
    let samples = synthesize(&DatasetProfile::desk("EMB", 8, 4), 3)?;
    let patches = segment_samples(&samples, None, 0.5, 5)?.segmented;

    let schedule = TrainSchedule::default().compressed(40);
    let set: Vec<_> = patches.iter().map(|s| (&s.patch, s.id.label())).collect();
    let (model, history) = train_embedder(build_embedder(64, 64, 0)?, &set, &schedule, 0)?;
    for s in history.iter().step_by(10) {
        println!(
            "epoch {:>3}  lr {:.0e}  active triplets {:>4}  loss {:.4}",
            s.epoch, s.learning_rate, s.active_triplets, s.mean_loss
        );
    }

    let refs: Vec<_> = patches.iter().map(|s| &s.patch).collect();
    let emb = model.embed_batch(&refs)?;
    let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
    for i in 0..patches.len() {
        for j in i + 1..patches.len() {
            let d = emb[i].distance(&emb[j])?;
            if patches[i].id.label() == patches[j].id.label() {
                genuine.push(d);
            } else if patches[i].id.log_id != patches[j].id.log_id {
                impostor.push(d);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "mean genuine {:.3}, mean impostor {:.3} (training data)",
        mean(&genuine),
        mean(&impostor)
    );
    Ok(())
}
