use super::{GradientBundle, MlpParameters, NumericsError};

/// Bias-corrected Adam moments for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub const DEFAULT_BETA1: f64 = 0.9;
    pub const DEFAULT_BETA2: f64 = 0.999;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(params: &MlpParameters) -> Self {
        Self::with_betas(
            params,
            Self::DEFAULT_BETA1,
            Self::DEFAULT_BETA2,
            Self::DEFAULT_EPSILON,
        )
    }

    pub fn with_betas(params: &MlpParameters, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().map(|t| vec![0.0; t.len()]).collect();
        Self {
            second_moment: zeros.clone(),
            first_moment: zeros,
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }
}

/// One Adam update of `params` *descending* along `grads`.
///
/// Shapes and finiteness are validated before anything is mutated.
pub fn adam_step(
    params: &mut MlpParameters,
    grads: &GradientBundle,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<(), NumericsError> {
    if grads.shapes() != params.shapes()
        || state.first_moment.len() != grads.weights.len() * 2
        || state
            .first_moment
            .iter()
            .zip(params.tensors())
            .any(|(m, p)| m.len() != p.len())
    {
        return Err(NumericsError::Shape(
            "gradient, optimizer state and parameters disagree".into(),
        ));
    }
    for (k, t) in grads.tensors().enumerate() {
        if let Some(pos) = t.iter().position(|g| !g.is_finite()) {
            return Err(NumericsError::NonFiniteGradient {
                tensor: k,
                index: pos,
                value: t[pos],
            });
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);

    let tensors = params.tensors_mut().zip(grads.tensors()).zip(
        state
            .first_moment
            .iter_mut()
            .zip(state.second_moment.iter_mut()),
    );
    for ((p, g), (m, v)) in tensors {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            p[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
