use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loss applied to each TD error. MSE is `0.5·δ²` so that it coincides with
/// the quadratic branch of the Huber loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Huber,
}

impl LossKind {
    /// `(L(δ), dL/dδ)`.
    #[inline]
    pub fn eval(self, delta: f64) -> (f64, f64) {
        match self {
            LossKind::Mse => mse_loss(delta),
            LossKind::Huber => huber_loss(delta),
        }
    }
}

#[inline]
pub fn mse_loss(delta: f64) -> (f64, f64) {
    (0.5 * delta * delta, delta)
}

/// `0.5·δ²` for `|δ| ≤ 1`, `|δ|` otherwise; derivative `clamp(δ, -1, 1)`.
///
/// The linear branch carries no `-0.5` offset, so the value steps from 0.5 to
/// 1 across `|δ| = 1` while the slope is continuous there.
#[inline]
pub fn huber_loss(delta: f64) -> (f64, f64) {
    let a = delta.abs();
    if a <= 1.0 {
        (0.5 * delta * delta, delta)
    } else {
        (a, delta.signum())
    }
}

/// Mean of `w_i·L(δ_i)` and its gradient with respect to each `δ_i`.
pub fn weighted_batch_loss(weights: &[f64], deltas: &[f64], kind: LossKind) -> Result<(f64, Vec<f64>)> {
    if weights.len() != deltas.len() {
        return Err(Error::DimensionMismatch {
            what: "loss weights",
            expected: deltas.len(),
            actual: weights.len(),
        });
    }
    if deltas.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let scale = 1.0 / deltas.len() as f64;
    let mut loss = 0.0;
    let grads = weights
        .iter()
        .zip(deltas)
        .map(|(&w, &d)| {
            let (l, dl) = kind.eval(d);
            loss += w * l;
            w * dl * scale
        })
        .collect();
    Ok((loss * scale, grads))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn huber_examples() {
        assert_eq!(huber_loss(0.5).0, 0.125);
        assert_eq!(huber_loss(-2.0).0, 2.0);
        assert_eq!(huber_loss(1.0).0, 0.5);
        assert_eq!(huber_loss(-3.0).1, -1.0);
    }

    #[test]
    fn huber_slope_is_continuous_at_one() {
        for side in [1.0, -1.0] {
            let at = huber_loss(side).1;
            let outside = huber_loss(side * (1.0 + 1e-12)).1;
            let inside = huber_loss(side * (1.0 - 1e-12)).1;
            assert_eq!(at, side);
            assert_eq!(outside, side);
            assert!((inside - side).abs() < 1e-11);
        }
        // value jumps by 0.5 across the boundary
        assert_eq!(huber_loss(1.0).0, 0.5);
        assert!((huber_loss(1.0 + 1e-12).0 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn weighted_examples() {
        assert_eq!(weighted_batch_loss(&[1.0], &[2.0], LossKind::Mse).unwrap().0, 2.0);
        assert_eq!(weighted_batch_loss(&[0.5], &[2.0], LossKind::Huber).unwrap().0, 1.0);
        let (l, g) = weighted_batch_loss(&[0.0; 3], &[1.0, -4.0, 0.3], LossKind::Huber).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
        assert!(weighted_batch_loss(&[1.0], &[1.0, 2.0], LossKind::Mse).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_weights_and_order_free(
            pairs in proptest::collection::vec((0.0f64..1.0, -5.0f64..5.0), 1..20),
            scale in 0.0f64..4.0,
        ) {
            let (w, d): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
            let base = weighted_batch_loss(&w, &d, LossKind::Huber).unwrap();
            let ws: Vec<f64> = w.iter().map(|x| x * scale).collect();
            let scaled = weighted_batch_loss(&ws, &d, LossKind::Huber).unwrap();
            prop_assert!((scaled.0 - scale * base.0).abs() < 1e-9);
            for (a, b) in scaled.1.iter().zip(&base.1) {
                prop_assert!((a - scale * b).abs() < 1e-12);
            }
            let (wr, dr): (Vec<f64>, Vec<f64>) = pairs.iter().rev().cloned().unzip();
            let reversed = weighted_batch_loss(&wr, &dr, LossKind::Huber).unwrap();
            prop_assert!((reversed.0 - base.0).abs() < 1e-12);
        }

        #[test]
        fn derivative_matches_central_difference(d in -4.0f64..4.0) {
            prop_assume!((d.abs() - 1.0).abs() > 1e-3);
            for kind in [LossKind::Mse, LossKind::Huber] {
                let h = 1e-6;
                let numeric = (kind.eval(d + h).0 - kind.eval(d - h).0) / (2.0 * h);
                prop_assert!((numeric - kind.eval(d).1).abs() < 1e-6);
            }
        }
    }
}
