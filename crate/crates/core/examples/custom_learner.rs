//! Driving the episode loop with your own learner: a greedy policy that
//! always picks the agent with the best running mean reward.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;

use cobra::env::gen_instance;
use cobra::harness::{run_episode, run_with_learner, ExperimentConfig, Learner};
use cobra::lin_core::FeatureVec;
use cobra::loom::LoomOutcome;
use cobra::policies::{PolicyKind, Selection};

struct Greedy {
    active: BTreeSet<usize>,
    sums: Vec<(f64, usize)>,
}

impl Learner for Greedy {
    fn active(&self) -> &BTreeSet<usize> {
        &self.active
    }

    fn select(&mut self, offers: &[(usize, &FeatureVec)], _rng: &mut ChaCha8Rng) -> cobra::Result<Selection> {
        let mean = |id: usize| match self.sums[id] {
            (_, 0) => f64::INFINITY,
            (s, n) => s / n as f64,
        };
        let best = offers.iter().map(|o| o.0).max_by(|&a, &b| mean(a).total_cmp(&mean(b)));
        Ok(best.map_or(Selection::Stopped, Selection::Agent))
    }

    fn observe(&mut self, a: usize, _x: &FeatureVec, y: f64) -> cobra::Result<()> {
        self.sums[a].0 += y;
        self.sums[a].1 += 1;
        Ok(())
    }

    fn post_round(&mut self) -> cobra::Result<Vec<LoomOutcome>> {
        Ok(Vec::new())
    }
}

fn main() -> cobra::Result<()> {
    let cfg = ExperimentConfig::default();
    let seeds = cfg.seeds(0);
    let inst = gen_instance(&cfg.instance_spec()?, seeds.instance)?;
    let mut greedy = Greedy {
        active: (0..inst.n_agents()).collect(),
        sums: vec![(0.0, 0); inst.n_agents()],
    };
    let g = run_with_learner(&mut greedy, &inst, cfg.rounds, PolicyKind::LinUcb, 0, seeds, false)?;
    let c = run_episode(&cfg, &inst, PolicyKind::CobraUcb, 0, seeds)?;
    println!("greedy    regret {:.2}  pulls {:?}", g.final_regret(), g.pulls);
    println!("cobra_ucb regret {:.2}  pulls {:?}", c.final_regret(), c.pulls);
    Ok(())
}
