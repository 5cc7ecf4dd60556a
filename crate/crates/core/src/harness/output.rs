use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::error::{CobraError, Result};
use crate::policies::PolicyKind;

use super::config::{EpisodeSeeds, ExperimentConfig};
use super::experiment::{AggregateResult, ExperimentResult};

pub const SUMMARY_HEADER: [&str; 4] = ["algo", "round", "mean_cum_regret", "ci_half_width"];
pub const TRACE_HEADER: [&str; 5] = ["round", "selected_agent", "regret_inc", "cum_regret", "eliminated"];

#[derive(Serialize)]
struct SeedEntry {
    rep: usize,
    seeds: EpisodeSeeds,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    seed_derivation: &'static str,
    repetitions: Vec<SeedEntry>,
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CobraError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> CobraError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CobraError::io(path, io),
        other => CobraError::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Writes `summary.csv`, one `trace_<algo>_<rep>.csv` per episode and
/// `run.json` into `out_dir`. Floats use the shortest round-trip decimal.
pub fn write_outputs(result: &ExperimentResult, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| CobraError::io(out_dir, e))?;

    let path = out_dir.join("summary.csv");
    let mut w = writer(&path)?;
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_err(&path, e))?;
    for agg in &result.aggregates {
        for (i, (m, c)) in agg.mean_cum_regret.iter().zip(&agg.ci_half_width).enumerate() {
            w.write_record([
                agg.algo.name().to_string(),
                (i + 1).to_string(),
                m.to_string(),
                c.to_string(),
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| CobraError::io(&path, e))?;

    for trace in &result.traces {
        let path = out_dir.join(format!("trace_{}_{}.csv", trace.algo, trace.rep));
        let mut w = writer(&path)?;
        w.write_record(TRACE_HEADER).map_err(|e| csv_err(&path, e))?;
        for r in &trace.records {
            let selected = r
                .selected_agent
                .map_or_else(|| "stopped".to_string(), |a| a.to_string());
            let eliminated = r
                .eliminated
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                r.round.to_string(),
                selected,
                r.regret_inc.to_string(),
                r.cum_regret.to_string(),
                eliminated,
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| CobraError::io(&path, e))?;
    }

    let cfg = &result.config;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        seed_derivation: "instance = mix(seed, 2^64-1, rep); env = mix(seed, 2^64-2, rep); \
                          policy = mix(seed, 2^64-3, rep); mix = chained splitmix64; \
                          every algorithm in a repetition uses the same seeds",
        repetitions: (0..cfg.reps)
            .map(|rep| SeedEntry {
                rep,
                seeds: cfg.seeds(rep),
            })
            .collect(),
    };
    let path = out_dir.join("run.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| CobraError::io(&path, e))?;
    Ok(())
}

/// Parses a `summary.csv` back into per-algorithm aggregates (file order).
pub fn read_summary(path: &Path) -> Result<Vec<AggregateResult>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(CobraError::Config(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header
        )));
    }
    let mut out: Vec<AggregateResult> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let parse_err = |what: &str| CobraError::Config(format!("{}: bad {what}", path.display()));
        let algo: PolicyKind = rec[0].parse()?;
        let mean: f64 = rec[2].parse().map_err(|_| parse_err("mean_cum_regret"))?;
        let ci: f64 = rec[3].parse().map_err(|_| parse_err("ci_half_width"))?;
        match out.last_mut() {
            Some(last) if last.algo == algo => {
                last.mean_cum_regret.push(mean);
                last.ci_half_width.push(ci);
            }
            _ => out.push(AggregateResult {
                algo,
                mean_cum_regret: vec![mean],
                ci_half_width: vec![ci],
            }),
        }
    }
    Ok(out)
}
