use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, BenchmarkReport, EpisodeConfig, EpisodeResult, HarnessError, Query, ReachThresholds, DEFAULT_MAX_STEPS};
use crate::pilot::PilotConfig;
use crate::sim::{DronePose, SimConfig};
use crate::world::FloorPlan;

pub const DEFAULT_SUITE_TOML: &str = include_str!("../../assets/default_suite.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpawn {
    pub id: String,
    /// Starting-room label shown in reports.
    pub label: String,
    pub pose: DronePose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub spawn: String,
    pub query: String,
    /// Inferred from the query text when absent.
    #[serde(default)]
    pub target_room: Option<String>,
    #[serde(default)]
    pub target_object: Option<String>,
}

fn default_reps() -> usize {
    5
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub reach: ReachThresholds,
    #[serde(default)]
    pub spawns: Vec<SuiteSpawn>,
    #[serde(default)]
    pub cases: Vec<SuiteCase>,
}

pub fn default_suite() -> Suite {
    Suite::from_toml_str(DEFAULT_SUITE_TOML).expect("bundled suite parses")
}

impl Suite {
    pub fn from_toml_str(text: &str) -> Result<Suite, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Suite(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Suite, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Suite::from_toml_str(&text).map_err(|e| HarnessError::Suite(format!("{}: {e}", path.display())))
    }

    pub fn spawn(&self, id: &str) -> Option<&SuiteSpawn> {
        self.spawns.iter().find(|s| s.id == id)
    }

    /// Resolves every case to (starting-room label, spawn pose, query).
    pub fn resolve(&self, plan: &FloorPlan) -> Result<Vec<(String, DronePose, Query)>, HarnessError> {
        self.cases
            .iter()
            .map(|c| {
                let spawn = self
                    .spawn(&c.spawn)
                    .ok_or_else(|| HarnessError::Suite(format!("case `{}` names unknown spawn `{}`", c.query, c.spawn)))?;
                let query = match &c.target_room {
                    Some(room) => Query::new(&c.query, room, c.target_object.clone()),
                    None => {
                        let mut q = Query::infer(plan, &c.query)?;
                        if c.target_object.is_some() {
                            q.target_object = c.target_object.clone();
                        }
                        q
                    }
                };
                query.validate(plan)?;
                Ok((spawn.label.clone(), spawn.pose, query))
            })
            .collect()
    }
}

struct PlannedEpisode {
    row: usize,
    config: EpisodeConfig,
}

/// Runs every case `repetitions` times with `run` and aggregates the
/// results. At most `jobs` episodes run at once; results keep suite order.
pub fn run_benchmark_with<F>(
    suite: &Suite,
    plan: Arc<FloorPlan>,
    sim: SimConfig,
    pilot: &PilotConfig,
    jobs: usize,
    transcripts: Option<&Path>,
    run: F,
) -> Result<(BenchmarkReport, Vec<EpisodeResult>), HarnessError>
where
    F: Fn(&EpisodeConfig) -> Result<EpisodeResult, HarnessError> + Sync,
{
    let rows = suite.resolve(&plan)?;
    let mut planned = Vec::new();
    for (row, (_, spawn, query)) in rows.iter().enumerate() {
        for rep in 0..suite.repetitions {
            let mut config = EpisodeConfig::new(plan.clone(), *spawn, query.clone(), pilot.clone());
            config.sim = sim;
            config.max_steps = suite.max_steps;
            config.reach = suite.reach;
            config.transcript = transcripts.map(|d| -> PathBuf { d.join(format!("row{row:02}_rep{rep:02}.jsonl")) });
            config.validate()?;
            planned.push(PlannedEpisode { row, config });
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Suite(e.to_string()))?;
    let results: Vec<EpisodeResult> = pool.install(|| {
        planned
            .par_iter()
            .map(|p| run(&p.config))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut report = BenchmarkReport::new(pilot.label());
    for (label, _, query) in &rows {
        report.add_row(label, &query.text);
    }
    for (p, r) in planned.iter().zip(&results) {
        report.record(p.row, 0, r.outcome);
    }
    Ok((report, results))
}

/// Runs the suite against in-process simulators.
pub fn run_benchmark(
    suite: &Suite,
    plan: Arc<FloorPlan>,
    sim: SimConfig,
    pilot: &PilotConfig,
    jobs: usize,
    transcripts: Option<&Path>,
) -> Result<(BenchmarkReport, Vec<EpisodeResult>), HarnessError> {
    run_benchmark_with(suite, plan, sim, pilot, jobs, transcripts, run_episode)
}
