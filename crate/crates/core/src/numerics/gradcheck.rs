//! Central finite-difference oracle for the analytic backward pass.

use ndarray::{Array2, ArrayView2};

use super::{GradientBundle, MlpParameters, NumericsError};

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Largest relative error between [`MlpParameters::backward`] and central
/// differences of `sum(output)` over every parameter and input coordinate.
pub fn gradient_check(params: &MlpParameters, input: &[f64], h: f64) -> Result<f64, NumericsError> {
    gradient_check_with(params, input, h, |net, x| {
        let (out, cache) = net.forward(x)?;
        net.backward(&cache, Array2::ones((1, out.len())).view())
    })
}

/// As [`gradient_check`] but with a caller-supplied analytic gradient, so a
/// faulty backward pass can be checked against the same oracle.
pub fn gradient_check_with<F>(
    params: &MlpParameters,
    input: &[f64],
    h: f64,
    analytic: F,
) -> Result<f64, NumericsError>
where
    F: Fn(&MlpParameters, &[f64]) -> Result<GradientBundle, NumericsError>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(NumericsError::InvalidArgument(format!(
            "step h must be positive, got {h}"
        )));
    }
    let grads = analytic(params, input)?;
    if grads.shapes() != params.shapes() {
        return Err(NumericsError::Shape(
            "analytic gradient shape mismatch".into(),
        ));
    }
    let objective = |net: &MlpParameters, x: &[f64]| -> Result<f64, NumericsError> {
        Ok(net.predict(x)?.iter().sum())
    };

    let mut worst = 0.0f64;
    let mut probe = params.clone();
    let analytic_flat: Vec<Vec<f64>> = grads.tensors().map(<[f64]>::to_vec).collect();
    for (k, a_tensor) in analytic_flat.iter().enumerate() {
        for (i, &a) in a_tensor.iter().enumerate() {
            let original = nth_tensor(&mut probe, k)[i];
            nth_tensor(&mut probe, k)[i] = original + h;
            let plus = objective(&probe, input)?;
            nth_tensor(&mut probe, k)[i] = original - h;
            let minus = objective(&probe, input)?;
            nth_tensor(&mut probe, k)[i] = original;
            worst = worst.max(relative_error(a, (plus - minus) / (2.0 * h)));
        }
    }

    let input_grad = grads.input_gradient();
    let mut x = input.to_vec();
    for (i, &a) in input_grad.iter().enumerate() {
        let original = x[i];
        x[i] = original + h;
        let plus = objective(params, &x)?;
        x[i] = original - h;
        let minus = objective(params, &x)?;
        x[i] = original;
        worst = worst.max(relative_error(a, (plus - minus) / (2.0 * h)));
    }
    Ok(worst)
}

fn nth_tensor(net: &mut MlpParameters, k: usize) -> &mut [f64] {
    net.tensors_mut().nth(k).expect("tensor index in range")
}

/// Smallest distance of any pre-activation to zero, for callers that want to
/// keep finite-difference probes away from activation kinks.
pub fn min_abs_pre_activation(
    params: &MlpParameters,
    input: ArrayView2<'_, f64>,
) -> Result<f64, NumericsError> {
    let (_, cache) = params.forward_batch(input)?;
    Ok(cache
        .pre_activations()
        .iter()
        .enumerate()
        .filter(|(k, _)| params.activation_for(*k).has_kink())
        .flat_map(|(_, z)| z.iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, Layer};
    use ndarray::{Array1, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_tanh_net_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = MlpParameters::init(
            &[4, 6, 5, 2],
            Activation::Tanh,
            Activation::Tanh,
            1.0,
            &mut rng,
        )
        .unwrap();
        let err = gradient_check(&net, &[0.3, -0.8, 0.1, 0.5], 1e-5).unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn corrupted_backward_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = MlpParameters::init(
            &[4, 6, 2],
            Activation::Sigmoid,
            Activation::Linear,
            1.0,
            &mut rng,
        )
        .unwrap();
        let err = gradient_check_with(&net, &[0.3, -0.8, 0.1, 0.5], 1e-5, |n, x| {
            let (out, cache) = n.forward(x)?;
            let mut g = n.backward(&cache, Array2::ones((1, out.len())).view())?;
            // drop the hidden activation derivative from the first layer
            g.weights[0].mapv_inplace(|v| v * 4.0);
            Ok(g)
        })
        .unwrap();
        assert!(err > 1e-2, "{err}");
    }

    #[test]
    fn zero_parameter_net_reports_zero() {
        let net = MlpParameters::new(
            vec![Layer::new(Array2::zeros((0, 3)), Array1::zeros(0)).unwrap()],
            Activation::Relu,
            Activation::Linear,
        )
        .unwrap();
        assert_eq!(net.parameter_count(), 0);
        assert_eq!(gradient_check(&net, &[1.0, 2.0, 3.0], 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_positive_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = MlpParameters::init(&[2, 2], Activation::Tanh, Activation::Linear, 1.0, &mut rng)
            .unwrap();
        assert!(gradient_check(&net, &[0.0, 0.0], 0.0).is_err());
        assert!(gradient_check(&net, &[0.0, 0.0], -1e-5).is_err());
    }
}
