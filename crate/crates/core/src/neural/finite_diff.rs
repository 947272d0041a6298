//! Central finite differences, used as an independent oracle for the
//! hand-written gradients.

use super::network::{GradientSet, ParameterSet};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient of `f` at `x`.
pub fn finite_difference<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference estimate of `d loss / d params` for every parameter.
pub fn finite_difference_gradient<F>(mut loss: F, params: &ParameterSet, h: f64) -> GradientSet
where
    F: FnMut(&ParameterSet) -> f64,
{
    let mut probe = params.clone();
    let mut grad = GradientSet::zeros_like(params);
    for i in 0..params.len() {
        let orig = probe.values[i];
        probe.values[i] = orig + h;
        let up = loss(&probe);
        probe.values[i] = orig - h;
        let down = loss(&probe);
        probe.values[i] = orig;
        grad.values[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Entrywise `|a - b| / max(|a|, |b|, floor)`, maximized over all entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::network::{backward, forward, Architecture};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_derivative() {
        let g = finite_difference(|w| w[0] * w[0], &[3.0], DEFAULT_STEP);
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn zero_loss_has_zero_gradient() {
        let params = ParameterSet::zeroed(Architecture::standard(3, 2).unwrap());
        let g = finite_difference_gradient(|_| 0.0, &params, DEFAULT_STEP);
        assert!(g.is_zero());
    }

    #[test]
    fn backward_matches_finite_differences_on_small_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let arch = Architecture::new(3, vec![4, 4], 2).unwrap();
            let mut params = ParameterSet::init(arch, &mut rng);
            for v in params.values_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let og: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, trace) = forward(&params, &x).unwrap();
            let analytic = backward(&params, &trace, &og).unwrap();
            let numeric = finite_difference_gradient(
                |p| {
                    let (out, _) = forward(p, &x).unwrap();
                    out.iter().zip(&og).map(|(o, g)| o * g).sum()
                },
                &params,
                DEFAULT_STEP,
            );
            let err = max_relative_error(analytic.values(), numeric.values(), 1e-6);
            assert!(err < 1e-4, "relative error {err}");
        }
    }
}
