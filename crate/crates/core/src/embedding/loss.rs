use crate::error::{Error, Result};

use super::squared_distance;

/// Hinge on squared distances: `max(0, |a-p|² - |a-n|² + margin)`.
pub fn triplet_loss(a: &[f64], p: &[f64], n: &[f64], margin: f64) -> Result<f64> {
    check(a, p, n, margin)?;
    Ok((squared_distance(a, p)? - squared_distance(a, n)? + margin).max(0.0))
}

/// Gradients of [`triplet_loss`] with respect to anchor, positive and negative.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// Loss and its gradient. Inactive triplets (loss 0) get zero gradients.
pub fn triplet_loss_with_grad(
    a: &[f64],
    p: &[f64],
    n: &[f64],
    margin: f64,
) -> Result<(f64, TripletGrad)> {
    let loss = triplet_loss(a, p, n, margin)?;
    let d = a.len();
    if loss <= 0.0 {
        let zero = vec![0.0; d];
        return Ok((
            0.0,
            TripletGrad {
                anchor: zero.clone(),
                positive: zero.clone(),
                negative: zero,
            },
        ));
    }
    let mut grad = TripletGrad {
        anchor: Vec::with_capacity(d),
        positive: Vec::with_capacity(d),
        negative: Vec::with_capacity(d),
    };
    for i in 0..d {
        grad.anchor.push(2.0 * (n[i] - p[i]));
        grad.positive.push(2.0 * (p[i] - a[i]));
        grad.negative.push(2.0 * (a[i] - n[i]));
    }
    Ok((loss, grad))
}

fn check(a: &[f64], p: &[f64], n: &[f64], margin: f64) -> Result<()> {
    if a.len() != p.len() || a.len() != n.len() {
        return Err(Error::InvalidInput(format!(
            "triplet dimensions differ: {}, {}, {}",
            a.len(),
            p.len(),
            n.len()
        )));
    }
    if !(margin > 0.0) {
        return Err(Error::InvalidInput(format!(
            "margin {margin} must be positive"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn separated_triplet_costs_nothing() {
        let a = [1.0, 0.0];
        assert_eq!(triplet_loss(&a, &a, &[0.0, 1.0], 0.2).unwrap(), 0.0);
    }

    #[test]
    fn collapsed_triplet_costs_the_margin() {
        let a = [0.3, -0.2, 0.9];
        assert_eq!(triplet_loss(&a, &a, &a, 0.2).unwrap(), 0.2);
    }

    #[test]
    fn mismatched_dimensions_fail() {
        assert!(triplet_loss(&[1.0], &[1.0, 0.0], &[0.0], 0.2).is_err());
        assert!(triplet_loss(&[1.0], &[1.0], &[0.0], 0.0).is_err());
    }

    /// Central finite differences, step 1e-5.
    fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut up = x.to_vec();
                let mut down = x.to_vec();
                up[i] += h;
                down[i] -= h;
                (f(&up) - f(&down)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = a
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let margin = 0.2;
        let mut active = 0;
        for _ in 0..10 {
            let (a, p, n) = (unit(&mut rng, 16), unit(&mut rng, 16), unit(&mut rng, 16));
            let (loss, g) = triplet_loss_with_grad(&a, &p, &n, margin).unwrap();
            active += (loss > 0.0) as usize;
            let fa = numeric_grad(|x| triplet_loss(x, &p, &n, margin).unwrap(), &a);
            let fp = numeric_grad(|x| triplet_loss(&a, x, &n, margin).unwrap(), &p);
            let fneg = numeric_grad(|x| triplet_loss(&a, &p, x, margin).unwrap(), &n);
            assert!(rel_err(&g.anchor, &fa) < 1e-4);
            assert!(rel_err(&g.positive, &fp) < 1e-4);
            assert!(rel_err(&g.negative, &fneg) < 1e-4);
        }
        assert!(active > 0, "no active triplet exercised");
    }

    proptest! {
        #[test]
        fn loss_is_nonnegative_and_zero_exactly_past_margin(
            a in prop::collection::vec(-1.0f64..1.0, 4),
            p in prop::collection::vec(-1.0f64..1.0, 4),
            n in prop::collection::vec(-1.0f64..1.0, 4),
            margin in 0.01f64..1.0,
        ) {
            let l = triplet_loss(&a, &p, &n, margin).unwrap();
            prop_assert!(l >= 0.0);
            let dap = squared_distance(&a, &p).unwrap();
            let dan = squared_distance(&a, &n).unwrap();
            prop_assert_eq!(l == 0.0, dan >= dap + margin);
        }
    }
}
