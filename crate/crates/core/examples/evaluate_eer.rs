//! The verification protocol on its own: log-disjoint folds, pair labels and
//! the equal error rate.

use logend::evaluation::{compute_eer, label_pair, make_folds};
use logend::{AcquisitionId, End};

fn main() -> logend::Result<()> {
    let genuine = [0.10, 0.22, 0.31, 0.45];
    let impostor = [0.40, 0.52, 0.63, 0.77, 0.90];
    println!("EER {:.4}", compute_eer(&genuine, &impostor)?);

    let logs: Vec<String> = (0..10).map(|i| format!("log{i:03}")).collect();
    let folds = make_folds(&logs, 4, 0)?;
    for f in 0..folds.k {
        println!("fold {f}: {:?}", folds.logs_in(f));
    }

    let a = AcquisitionId::new("MVA", "log001", End::Top, 0);
    for b in [
        AcquisitionId::new("MVA", "log001", End::Top, 1),
        AcquisitionId::new("MVA", "log001", End::Bottom, 0),
        AcquisitionId::new("MVA", "log002", End::Top, 0),
    ] {
        println!("{a} vs {b}: {}", label_pair(&a, &b)?);
    }
    Ok(())
}
