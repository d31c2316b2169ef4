//! Compares backpropagated gradients against central finite differences for
//! one small network per hidden activation.

use ace_rl::numerics::{gradient_check, Activation, MlpParameters};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let input = [0.3, -0.7, 0.5, 0.1];
    for kind in Activation::HIDDEN_KINDS {
        let net = MlpParameters::init(&[4, 16, 8, 2], kind, Activation::Tanh, 1.0, &mut rng)?;
        let worst = gradient_check(&net, &input, 1e-5)?;
        println!(
            "{:<10} {} parameters, worst relative error {worst:.2e}",
            kind.name(),
            net.parameter_count()
        );
    }
    Ok(())
}
