use std::collections::BTreeSet;
use std::fs;
use std::process::Command;

use rand_chacha::ChaCha8Rng;

use cobra::env::{gen_instance, ProblemInstance, Strategy};
use cobra::harness::{
    ne_deviation_probe, read_summary, run_experiment, run_with_learner, write_outputs, ExperimentConfig,
    Learner, ProbeConfig, StrategyMix, SUMMARY_HEADER, TRACE_HEADER,
};
use cobra::lin_core::FeatureVec;
use cobra::loom::LoomOutcome;
use cobra::policies::{PolicyKind, Selection};
use cobra::{CobraError, Result};

fn small(rounds: usize, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        rounds,
        reps,
        n_agents: 3,
        d_c: 2,
        d_n: 2,
        seed: 17,
        ..ExperimentConfig::default()
    }
}

/// Knows θ⋆ and picks the offer with the highest true reward. Offers are
/// truthful here, so reported features are the true ones.
struct Oracle<'a> {
    inst: &'a ProblemInstance,
    active: BTreeSet<usize>,
}

impl Learner for Oracle<'_> {
    fn active(&self) -> &BTreeSet<usize> {
        &self.active
    }

    fn select(&mut self, offers: &[(usize, &FeatureVec)], _rng: &mut ChaCha8Rng) -> Result<Selection> {
        let mut best = (offers[0].0, f64::NEG_INFINITY);
        for &(id, x) in offers {
            let v = self.inst.true_reward(x)?;
            if v > best.1 {
                best = (id, v);
            }
        }
        Ok(Selection::Agent(best.0))
    }

    fn observe(&mut self, _a: usize, _x: &FeatureVec, _y: f64) -> Result<()> {
        Ok(())
    }

    fn post_round(&mut self) -> Result<Vec<LoomOutcome>> {
        Ok(Vec::new())
    }
}

#[test]
fn oracle_learner_has_zero_regret() {
    let cfg = ExperimentConfig {
        strategy_mix: StrategyMix::AllTruthful,
        ..small(200, 1)
    };
    let seeds = cfg.seeds(0);
    let inst = gen_instance(&cfg.instance_spec().unwrap(), seeds.instance).unwrap();
    let mut o = Oracle {
        inst: &inst,
        active: (0..3).collect(),
    };
    let tr = run_with_learner(&mut o, &inst, 200, PolicyKind::LinUcb, 0, seeds, false).unwrap();
    assert_eq!(tr.final_regret(), 0.0);
    assert_eq!(tr.pulls.iter().sum::<usize>(), 200);
}

#[test]
fn empty_active_set_pays_the_best_offer() {
    let cfg = small(20, 1);
    let seeds = cfg.seeds(0);
    let inst = gen_instance(&cfg.instance_spec().unwrap(), seeds.instance).unwrap();
    let mut o = Oracle {
        inst: &inst,
        active: BTreeSet::new(),
    };
    let tr = run_with_learner(&mut o, &inst, 20, PolicyKind::CobraUcb, 0, seeds, false).unwrap();
    assert_eq!(tr.stopped_rounds, 20);
    for r in &tr.records {
        assert_eq!(r.selected_agent, None);
        assert_eq!(r.regret_inc, r.best_true_reward);
        assert!(r.regret_inc > 0.0);
    }
}

#[test]
fn single_agent_has_zero_regret() {
    let cfg = ExperimentConfig {
        n_agents: 1,
        strategy_mix: StrategyMix::AllTruthful,
        ..small(100, 2)
    };
    let res = run_experiment(&cfg).unwrap();
    for tr in &res.traces {
        assert_eq!(tr.final_regret(), 0.0);
    }
}

#[test]
fn regret_is_cumulative_and_nonnegative() {
    let res = run_experiment(&small(150, 3)).unwrap();
    for tr in &res.traces {
        let mut cum = 0.0;
        for (i, r) in tr.records.iter().enumerate() {
            assert_eq!(r.round, i + 1);
            assert!(r.regret_inc >= 0.0);
            cum += r.regret_inc;
            assert_eq!(r.cum_regret, cum);
        }
    }
}

#[test]
fn single_rep_has_zero_interval() {
    let res = run_experiment(&small(50, 1)).unwrap();
    for a in &res.aggregates {
        assert!(a.ci_half_width.iter().all(|&c| c == 0.0));
        assert_eq!(a.mean_cum_regret.len(), 50);
    }
}

#[test]
fn outputs_have_exact_headers_and_rows() {
    let cfg = small(40, 2);
    let res = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&res, dir.path()).unwrap();

    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_HEADER.join(","));
    assert_eq!(lines.count(), 4 * 40);
    assert!(!summary.contains('\r'));
    assert_eq!(read_summary(&dir.path().join("summary.csv")).unwrap(), res.aggregates);

    let trace = fs::read_to_string(dir.path().join("trace_cobra_ts_1.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), TRACE_HEADER.join(","));
    assert_eq!(trace.lines().count(), 41);

    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["T"], 40);
    assert_eq!(run["repetitions"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_rounds_writes_headers_only() {
    let res = run_experiment(&small(0, 2)).unwrap();
    assert!(res.traces.iter().all(|t| t.records.is_empty() && t.final_regret() == 0.0));
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&res, dir.path()).unwrap();
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary, format!("{}\n", SUMMARY_HEADER.join(",")));
    assert_eq!(read_summary(&dir.path().join("summary.csv")).unwrap(), vec![]);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let res = run_experiment(&small(5, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert!(matches!(write_outputs(&res, &blocker), Err(CobraError::Io { .. })));
}

#[test]
fn different_seeds_differ() {
    let a = run_experiment(&small(60, 2)).unwrap();
    let b = run_experiment(&ExperimentConfig { seed: 18, ..small(60, 2) }).unwrap();
    assert_ne!(a.aggregates, b.aggregates);
}

#[test]
fn null_deviation_has_zero_gain() {
    let base = small(200, 4);
    for algo in PolicyKind::ALL {
        let r = ne_deviation_probe(&ProbeConfig {
            base: base.clone(),
            algo,
            probe_agent: 1,
            deviation: Strategy::truthful(),
        })
        .unwrap();
        assert_eq!(r.gain, 0.0);
        assert!(r.per_rep.iter().all(|(a, b)| a == b));
    }
    let bad = ProbeConfig {
        base,
        algo: PolicyKind::CobraUcb,
        probe_agent: 9,
        deviation: Strategy::truthful(),
    };
    assert!(matches!(ne_deviation_probe(&bad), Err(CobraError::Config(_))));
}

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cobra-bench"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let ok = bench()
        .args(["run", "--T", "30", "--N", "3", "--dc", "2", "--dn", "2", "--reps", "2"])
        .args(["--algos", "cobra_ucb,lin_ts", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 30);
    assert!(out.join("trace_lin_ts_1.csv").exists());

    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "T = 20\nN = 2\nreps = 1\nlambda = -1.0\n").unwrap();
    let code = |args: &[&str], extra: &std::path::Path| {
        bench().args(args).arg(extra).output().unwrap().status.code()
    };
    assert_eq!(code(&["run", "--config"], &cfg), Some(2));
    assert_eq!(code(&["run", "--algos", "opt_gtm", "--out-dir"], &out), Some(2));
    assert_eq!(code(&["run", "--config"], &dir.path().join("missing.toml")), Some(3));
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(code(&["run", "--T", "5", "--reps", "1", "--out-dir"], &blocker), Some(3));
}

#[test]
fn malformed_summary_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("summary.csv");
    fs::write(&p, "algo,round,mean_cum_regret,ci_half_width\ncobra_ucb,1,abc,0\n").unwrap();
    assert!(matches!(read_summary(&p), Err(CobraError::Config(_))));
    fs::write(&p, "a,b\n").unwrap();
    assert!(matches!(read_summary(&p), Err(CobraError::Config(_))));
    assert!(matches!(read_summary(&dir.path().join("nope.csv")), Err(CobraError::Io { .. })));
}
