//! Classification losses over probability rows.
//!
//! Both losses clamp probabilities below at `LOG_CLAMP` before taking logs,
//! so saturated softmax outputs cannot produce infinities.

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

/// Lower clamp applied to probabilities before `ln`.
pub const LOG_CLAMP: f64 = 1e-12;

/// Direction of the distillation divergence term.
///
/// `AsPrinted` is KL(q || p): the divergence of the student distribution q
/// from the soft teacher target p, with gradients flowing through q only.
/// `Reversed` is KL(p || q), the Hinton-style soft cross-entropy direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KlDirection {
    #[default]
    AsPrinted,
    Reversed,
}

#[inline]
fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_CLAMP).ln()
}

/// Mean cross-entropy -(1/B) sum_n y_n . log(p_n) over `[B, C]` rows.
pub fn cross_entropy(probs: &Tensor, onehot: &Tensor) -> f64 {
    assert_eq!(probs.shape(), onehot.shape(), "probs/onehot shape mismatch");
    let b = probs.shape()[0];
    let mut total = 0.0;
    for r in 0..b {
        total += sample_ce(probs.row(r), onehot.row(r));
    }
    total / b as f64
}

/// Mean KL divergence (1/B) sum_n sum_c q_nc ln(q_nc / p_nc) over `[B, C]` rows.
pub fn kl_div(q: &Tensor, p: &Tensor) -> f64 {
    assert_eq!(q.shape(), p.shape(), "q/p shape mismatch");
    let b = q.shape()[0];
    let mut total = 0.0;
    for r in 0..b {
        total += sample_kl(q.row(r), p.row(r), KlDirection::AsPrinted);
    }
    total / b as f64
}

/// Cross-entropy of one sample.
pub(crate) fn sample_ce(q: &[f64], y: &[f64]) -> f64 {
    -y.iter().zip(q).map(|(yi, qi)| yi * clamped_ln(*qi)).sum::<f64>()
}

/// d(sample CE)/dq scaled by `scale`, accumulated into `dq`.
pub(crate) fn sample_ce_grad(q: &[f64], y: &[f64], scale: f64, dq: &mut [f64]) {
    for ((d, yi), qi) in dq.iter_mut().zip(y).zip(q) {
        if *qi >= LOG_CLAMP {
            *d += scale * (-yi / qi);
        }
        // below the clamp the log is constant, gradient zero
    }
}

/// Divergence of one sample in the given direction (`q` student, `p` target).
pub(crate) fn sample_kl(q: &[f64], p: &[f64], dir: KlDirection) -> f64 {
    match dir {
        KlDirection::AsPrinted => q
            .iter()
            .zip(p)
            .map(|(qi, pi)| qi * (clamped_ln(*qi) - clamped_ln(*pi)))
            .sum(),
        KlDirection::Reversed => p
            .iter()
            .zip(q)
            .map(|(pi, qi)| pi.max(LOG_CLAMP) * (clamped_ln(*pi) - clamped_ln(*qi)))
            .sum(),
    }
}

/// d(sample KL)/dq scaled by `scale`, accumulated into `dq`. The target `p`
/// is a constant; gradients flow through `q` only.
pub(crate) fn sample_kl_grad(q: &[f64], p: &[f64], dir: KlDirection, scale: f64, dq: &mut [f64]) {
    match dir {
        KlDirection::AsPrinted => {
            for ((d, qi), pi) in dq.iter_mut().zip(q).zip(p) {
                if *qi >= LOG_CLAMP {
                    *d += scale * (clamped_ln(*qi) - clamped_ln(*pi) + 1.0);
                }
            }
        }
        KlDirection::Reversed => {
            for ((d, qi), pi) in dq.iter_mut().zip(q).zip(p) {
                if *qi >= LOG_CLAMP {
                    *d += scale * (-pi.max(LOG_CLAMP) / qi);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[[f64; 2]]) -> Tensor {
        Tensor::from_vec(
            vec![rows.len(), 2],
            rows.iter().flatten().copied().collect(),
        )
        .unwrap()
    }

    #[test]
    fn ce_perfect_prediction_is_zero() {
        assert_eq!(cross_entropy(&t(&[[1.0, 0.0]]), &t(&[[1.0, 0.0]])), 0.0);
    }

    #[test]
    fn ce_uniform_is_ln2() {
        let v = cross_entropy(&t(&[[0.5, 0.5]]), &t(&[[1.0, 0.0]]));
        assert!((v - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn ce_closed_form() {
        let v = cross_entropy(&t(&[[0.25, 0.75]]), &t(&[[0.0, 1.0]]));
        assert!((v - (-(0.75f64).ln())).abs() < 1e-9);
        assert!((v - 0.287_682_072_451_780_9).abs() < 1e-9);
    }

    #[test]
    fn kl_identical_is_zero() {
        assert_eq!(kl_div(&t(&[[0.3, 0.7]]), &t(&[[0.3, 0.7]])), 0.0);
    }

    #[test]
    fn kl_closed_form() {
        let v = kl_div(&t(&[[0.5, 0.5]]), &t(&[[0.25, 0.75]]));
        let expect = 0.5 * (2.0f64).ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.143_841).abs() < 1e-6);
    }

    #[test]
    fn kl_nonnegative_on_random_rows() {
        use rand::RngExt;
        let mut rng = crate::rng::stream(11, &[]);
        for _ in 0..500 {
            let a: f64 = rng.random_range(1e-6..1.0);
            let b: f64 = rng.random_range(1e-6..1.0);
            let q = [a, 1.0 - a];
            let p = [b, 1.0 - b];
            let v = kl_div(&t(&[q]), &t(&[p]));
            assert!(v >= -1e-15, "kl={v} for q={q:?} p={p:?}");
        }
    }

    #[test]
    fn ce_nonnegative_and_zero_iff_confident() {
        let v = cross_entropy(&t(&[[0.9, 0.1]]), &t(&[[1.0, 0.0]]));
        assert!(v > 0.0);
    }
}
