use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuParams {
    pub theta: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        Self {
            theta: 0.15,
            sigma: 0.2,
            dt: 1.0,
        }
    }
}

/// Ornstein-Uhlenbeck process mean-reverting to zero, one coordinate per
/// action dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct OuNoise {
    pub x: Vec<f64>,
    pub params: OuParams,
}

impl OuNoise {
    pub fn new(dim: usize, params: OuParams) -> Self {
        Self {
            x: vec![0.0; dim],
            params,
        }
    }

    pub fn reset(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `x <- x - theta * x * dt + sigma * sqrt(dt) * N(0, 1)`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        let OuParams { theta, sigma, dt } = self.params;
        let diffusion = sigma * dt.sqrt();
        for v in &mut self.x {
            let z: f64 = rng.sample(StandardNormal);
            *v += theta * (0.0 - *v) * dt + diffusion * z;
        }
        &self.x
    }
}
