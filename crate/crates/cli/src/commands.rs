//! The batch commands. Each one reads its inputs, runs the engine or an
//! analysis, and writes a single output file; identical inputs give
//! byte-identical outputs.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use headzoom::metrics::{results_table, MetricsOptions};
use headzoom::stats::{report, MetricTable, Report, StatsError};
use headzoom::synth::{Directive, MotionScript};
use headzoom::trace::{read_trace, read_views, views_to_text, write_trace};
use headzoom::{
    calibrate, CalibrationProfile, Engine, EngineConfig, MetricsReport, TrialRecord,
    ViewState,
};

/// Input was well-formed but held nothing to analyse.
#[derive(Debug)]
pub struct EmptyInput(pub String);

impl fmt::Display for EmptyInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EmptyInput: {}", self.0)
    }
}

impl std::error::Error for EmptyInput {}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_profile(path: Option<&Path>) -> Result<Option<CalibrationProfile>> {
    path.map(|p| CalibrationProfile::load(p).with_context(|| format!("loading profile {}", p.display())))
        .transpose()
}

/// Averages the three captured traces into a profile and saves it.
pub fn calibrate_cmd(neutral: &Path, forward: &Path, backward: &Path, out: &Path) -> Result<CalibrationProfile> {
    let load = |p: &Path| read_trace(p).map(|t| t.samples);
    let profile = calibrate(&load(neutral)?, &load(forward)?, &load(backward)?)?;
    profile.save(out)?;
    Ok(profile)
}

/// Runs a trace through the engine.
pub fn replay_views(trace: &Path, profile: Option<&Path>, config: EngineConfig) -> Result<Vec<ViewState>> {
    let trace = read_trace(trace)?;
    let mut engine = Engine::new(config, load_profile(profile)?)?;
    Ok(engine.run(&trace.samples)?)
}

pub fn replay(trace: &Path, profile: Option<&Path>, config: EngineConfig, out: &Path) -> Result<usize> {
    let views = replay_views(trace, profile, config)?;
    write_text(out, &views_to_text(&views))?;
    Ok(views.len())
}

/// Synthesizes a trace from a motion script. `seed` overrides any seed in
/// the script; `profile_out` also saves the profile the script implies.
pub fn synth(script: &Path, seed: Option<u64>, out: &Path, profile_out: Option<&Path>) -> Result<usize> {
    let text = std::fs::read_to_string(script).with_context(|| format!("reading script {}", script.display()))?;
    let mut script = MotionScript::parse(&text).with_context(|| format!("in {}", script.display()))?;
    if let Some(seed) = seed {
        script.directives.retain(|d| !matches!(d, Directive::Seed(_)));
        script.directives.insert(0, Directive::Seed(seed));
    }
    let trace = script.synthesize();
    write_trace(out, &trace)?;
    if let Some(p) = profile_out {
        script.profile().save(p)?;
    }
    Ok(trace.len())
}

/// Computes one results row per (trial sidecar, view stream) pair.
pub fn metrics(pairs: &[(PathBuf, PathBuf)], opts: &MetricsOptions, out: &Path) -> Result<usize> {
    let mut reports = Vec::with_capacity(pairs.len());
    for (trial, views) in pairs {
        let record = TrialRecord::load(trial)?;
        let views = read_views(views)?;
        let r = MetricsReport::compute(&record, &views, opts).with_context(|| format!("metrics for {}", trial.display()))?;
        reports.push(r);
    }
    write_text(out, &results_table(&reports))?;
    Ok(reports.len())
}

/// Runs the ANOVA and pairwise tests over a results table. An empty table
/// still writes a header-only report, then fails with [`EmptyInput`].
pub fn stats(table: &Path, out: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(table).with_context(|| format!("reading {}", table.display()))?;
    let table = MetricTable::from_results_tsv(&text)?;
    match report(&table) {
        Ok(r) => {
            write_text(out, &r.to_tsv())?;
            Ok(r)
        }
        Err(StatsError::EmptyTable) => {
            write_text(out, &Report { metrics: Vec::new() }.to_tsv())?;
            Err(EmptyInput("metric table has no rows".into()).into())
        }
        Err(e) => Err(e.into()),
    }
}

/// The Q/R table used for the configured mode.
pub fn schedule_table(config: &EngineConfig) -> String {
    config.schedule().to_table()
}
