use crate::error::{Error, Result};

/// Equal error rate of distance scores (smaller = more similar).
///
/// FAR(τ) is the fraction of impostor distances `<= τ`, FRR(τ) the fraction of
/// genuine distances `> τ`. The sweep starts below every score at
/// (FAR, FRR) = (0, 1), visits each distinct score, and linearly interpolates
/// the segment on which FAR first reaches FRR.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::UndefinedEer(format!(
            "need genuine and impostor scores, got {} and {}",
            genuine.len(),
            impostor.len()
        )));
    }
    if genuine.iter().chain(impostor).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    let mut g = genuine.to_vec();
    let mut i = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    i.sort_by(f64::total_cmp);
    let (ng, ni) = (g.len() as f64, i.len() as f64);

    let (mut gi, mut ii) = (0usize, 0usize);
    let (mut far0, mut frr0) = (0.0, 1.0);
    loop {
        let next = match (g.get(gi), i.get(ii)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!("the sweep ends at FAR = 1, FRR = 0"),
        };
        while gi < g.len() && g[gi] <= next {
            gi += 1;
        }
        while ii < i.len() && i[ii] <= next {
            ii += 1;
        }
        let far1 = ii as f64 / ni;
        let frr1 = 1.0 - gi as f64 / ng;
        if far1 >= frr1 {
            let (d0, d1) = (frr0 - far0, frr1 - far1);
            let lambda = d0 / (d0 - d1);
            return Ok(far0 + lambda * (far1 - far0));
        }
        far0 = far1;
        frr0 = frr1;
    }
}
