//! Run artifacts: per-trial trajectories, end-of-run reports, and the
//! cross-plan comparison used to decide which decomposition suits a space.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::block::BlockReport;
use crate::error::Result;
use crate::objective::{Evaluator, ObjectiveSpec, TrialStatus};
use crate::plan::{build_root, Executor, PlanConfig, PlanNode, PlanParams};
use crate::space::{Assignment, SearchSpace};

/// State of a run after one more trial finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// 1-based index of the trial within the run.
    pub trial: usize,
    /// Budget consumed after this trial.
    pub spent: f64,
    /// Value of this trial (penalty value for failed ones).
    pub value: f64,
    pub status: TrialStatus,
    /// Incumbent value after this trial, if any ok trial exists yet.
    pub best: Option<f64>,
    pub assignment: Assignment,
}

/// Everything worth keeping after a run finishes.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Digest of the exact config that produced the run; two reports with
    /// equal digests and seeds are replays of the same experiment.
    pub config_digest: String,
    pub seed: u64,
    pub budget: f64,
    pub spent: f64,
    pub trials: usize,
    pub ok_trials: usize,
    pub failed_trials: usize,
    pub timeout_trials: usize,
    pub best_value: Option<f64>,
    pub best_assignment: Option<Assignment>,
    pub wall_seconds: f64,
    /// Final shape of the block tree, eliminated arms included.
    pub structure: BlockReport,
}

/// SHA-256 over the canonical JSON encoding of a config.
pub fn config_digest(config: &PlanConfig) -> String {
    let json = serde_json::to_string(config).expect("plan configs always serialize");
    let hash = Sha256::digest(json.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs a config to budget exhaustion and reports on it.
///
/// `timeout` caps each single evaluation (relevant for subprocess
/// objectives); `None` keeps the default. The full trajectory is returned
/// alongside the report so callers can stream or persist it; budgets are
/// small enough that buffering it is never a concern.
pub fn execute_plan(
    config: &PlanConfig,
    evaluator: Arc<dyn Evaluator>,
    timeout: Option<Duration>,
) -> Result<(RunReport, Vec<TrajectoryPoint>)> {
    let start = Instant::now();
    config.validate()?;
    let mut objective = ObjectiveSpec::new(config.space.clone(), evaluator)
        .with_cost_mode(config.params.budget_mode);
    if let Some(limit) = timeout {
        objective = objective.with_timeout(limit);
    }
    let objective = Arc::new(objective);
    let root = build_root(&objective, &config.plan, &config.params)?;
    let mut exec = Executor::new(root, config.params.budget)?;
    let mut trajectory = Vec::new();
    exec.run_with_observer(|trial, spent, best| {
        trajectory.push(TrajectoryPoint {
            trial: trajectory.len() + 1,
            spent,
            value: trial.value,
            status: trial.status,
            best: best.map(|(_, v)| v),
            assignment: trial.assignment.clone(),
        });
    })?;

    let count = |status: TrialStatus| {
        exec.trials()
            .iter()
            .filter(|t| t.status == status)
            .count()
    };
    let incumbent = exec.incumbent();
    let report = RunReport {
        config_digest: config_digest(config),
        seed: config.params.seed,
        budget: exec.budget(),
        spent: exec.spent(),
        trials: exec.trials().len(),
        ok_trials: count(TrialStatus::Ok),
        failed_trials: count(TrialStatus::Failed),
        timeout_trials: count(TrialStatus::Timeout),
        best_value: incumbent.map(|(_, v)| v),
        best_assignment: incumbent.map(|(a, _)| a.clone()),
        wall_seconds: start.elapsed().as_secs_f64(),
        structure: exec.report(),
    };
    Ok((report, trajectory))
}

/// One plan/seed cell of a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub plan: String,
    pub seed: u64,
    pub best_value: Option<f64>,
    pub trials: usize,
    pub spent: f64,
}

/// Per-plan aggregate over every seed of a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct PlanSummary {
    pub plan: String,
    /// Mean fractional rank across seeds; 1.0 means best on every seed.
    pub mean_rank: f64,
    pub mean_best: f64,
    pub median_best: f64,
}

/// Full outcome of [`compare_plans`].
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    /// Summaries in input plan order.
    pub summaries: Vec<PlanSummary>,
}

/// 1-based ranks of `values` (lower value = better rank), averaging ties.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn median(sorted: &mut Vec<f64>) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Runs every plan on every seed against the same objective and ranks the
/// plans seed by seed.
///
/// All plans share the space, the parameter set (except the seed), and the
/// evaluator, so differences in the summaries are attributable to the plan
/// shape alone. Runs are sequential and deterministic in count mode.
pub fn compare_plans(
    space: &SearchSpace,
    plans: &[(String, PlanNode)],
    evaluator: Arc<dyn Evaluator>,
    params: &PlanParams,
    seeds: &[u64],
) -> Result<Comparison> {
    let mut rows = Vec::with_capacity(plans.len() * seeds.len());
    // bests[p][s] = final best of plan p on seed s, worst-cased when absent.
    let mut bests = vec![vec![f64::INFINITY; seeds.len()]; plans.len()];
    for (p, (name, plan)) in plans.iter().enumerate() {
        for (s, &seed) in seeds.iter().enumerate() {
            let config = PlanConfig {
                space: space.clone(),
                plan: plan.clone(),
                params: PlanParams { seed, ..*params },
            };
            let mut exec = Executor::from_config(&config, Arc::clone(&evaluator))?;
            exec.run()?;
            let best = exec.incumbent().map(|(_, v)| v);
            bests[p][s] = best.unwrap_or(f64::INFINITY);
            rows.push(CompareRow {
                plan: name.clone(),
                seed,
                best_value: best,
                trials: exec.trials().len(),
                spent: exec.spent(),
            });
        }
    }

    let mut rank_sums = vec![0.0; plans.len()];
    for s in 0..seeds.len() {
        let column: Vec<f64> = (0..plans.len()).map(|p| bests[p][s]).collect();
        for (p, rank) in average_ranks(&column).into_iter().enumerate() {
            rank_sums[p] += rank;
        }
    }
    let summaries = plans
        .iter()
        .enumerate()
        .map(|(p, (name, _))| {
            let mut values = bests[p].clone();
            PlanSummary {
                plan: name.clone(),
                mean_rank: rank_sums[p] / seeds.len().max(1) as f64,
                mean_best: values.iter().sum::<f64>() / values.len().max(1) as f64,
                median_best: median(&mut values),
            }
        })
        .collect();
    Ok(Comparison { rows, summaries })
}

/// Flat CSV of a comparison's rows: `plan,seed,final_best,trials`.
pub fn summary_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("plan,seed,final_best,trials\n");
    for row in rows {
        let best = row
            .best_value
            .map(|v| v.to_string())
            .unwrap_or_else(|| "nan".to_string());
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.plan, row.seed, best, row.trials
        ));
    }
    out
}
