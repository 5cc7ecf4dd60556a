//! A one-dimensional market where one agent reports features 100x its true
//! value. Truthful data from the other agent pins down θ⋆, and the
//! leave-one-out test removes the liar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use cobra::lin_core::{ConfidenceParams, FeatureVec};
use cobra::policies::{PolicyConfig, PolicyKind, PolicyState};

fn main() -> cobra::Result<()> {
    let params = ConfidenceParams::new(0.1, 1, 0.01, 0.05, 1.0, 10.0)?;
    let mut state = PolicyState::new(PolicyConfig::new(PolicyKind::CobraUcb, params), 2)?;
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    for _ in 0..500 {
        let x = rng.random_range(0.5..1.5);
        state.observe(1, &FeatureVec::new(vec![x])?, x + noise.sample(&mut rng))?;
        state.post_round()?;
    }
    println!("theta estimate from honest agent: {:.4}", state.global().fit().mean[0]);

    for k in 1..=20 {
        // True feature 0.1, reported 10.
        state.observe(0, &FeatureVec::new(vec![10.0])?, 0.1 + noise.sample(&mut rng))?;
        for o in state.post_round()? {
            println!(
                "agent {} eliminated after {k} selections: lcb sum {:.3} > ucb sum {:.3}",
                o.agent_id, o.lcb_sum_x, o.ucb_sum_y
            );
        }
        if !state.active().contains(&0) {
            break;
        }
    }
    println!("active agents: {:?}", state.active());
    Ok(())
}
