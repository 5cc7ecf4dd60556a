//! Online ridge regression with confidence bounds around a hidden parameter.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use cobra::lin_core::{lcb_value, ts_draw, ucb_value, ConfidenceParams, DesignState, FeatureVec};

fn main() -> cobra::Result<()> {
    let d = 4;
    let theta_star = DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5]);
    let params = ConfidenceParams::new(0.1, d, 0.01, 0.05, 1.0, 4.0)?;
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut state = DesignState::new(d, params.lambda)?;
    let probe = FeatureVec::new(vec![1.0, 0.0, 1.0, 0.0])?;

    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "t", "lcb", "estimate", "ucb", "truth");
    for t in 1..=1000 {
        let x = FeatureVec::new((0..d).map(|_| rng.random_range(0.0..2.0)).collect())?;
        let y = x.dot(&theta_star) + noise.sample(&mut rng);
        state.update(&x, y)?;
        if [10, 100, 1000].contains(&t) {
            let theta = state.fit();
            let alpha = params.alpha(t);
            println!(
                "{t:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                lcb_value(&theta, &probe, alpha, &state)?,
                theta.predict(&probe)?,
                ucb_value(&theta, &probe, alpha, &state)?,
                probe.dot(&theta_star)
            );
        }
    }
    let draw = ts_draw(&state.fit(), &state, params.beta(1000), &mut rng);
    println!("one Thompson draw: {:.4?}", draw.as_slice());
    Ok(())
}
