//! The uniform stepping interface every search block implements, plus the
//! history statistics blocks report to their parents.
//!
//! Blocks form a tree. A parent drives children exclusively through
//! [`Block`]: pull one unit of work (`do_next`), read the incumbent, compare
//! children by their utility outlook, and re-pin fixed variables. Utilities
//! are negated objective values, so bigger is better on this boundary while
//! everything else in the crate minimizes.

use crate::error::{Error, Result};
use crate::objective::{CostModel, History, Trial};
use crate::space::Assignment;

/// Mutable per-step state threaded through the block tree.
///
/// Tracks the budget still available so that a multi-evaluation step can cut
/// itself short; the evaluation in flight when the budget runs out is kept.
#[derive(Debug, Clone)]
pub struct StepContext {
    remaining: f64,
}

impl StepContext {
    pub fn new(remaining_budget: f64) -> Self {
        StepContext {
            remaining: remaining_budget,
        }
    }

    pub fn remaining(&self) -> f64 {
        self.remaining
    }

    pub fn exhausted(&self) -> bool {
        self.remaining <= 0.0
    }

    pub fn consume(&mut self, cost: f64) {
        self.remaining -= cost;
    }
}

/// Optimistic range for the utility a block can reach with more budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityBound {
    pub lower: f64,
    pub upper: f64,
}

/// Mean utility gain per step, used to pick which sibling to advance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovementRate {
    pub per_step: f64,
}

/// Window width and optimism weight for [`utility_bound_from_history`].
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    /// Number of most recent ok trials whose improvements are extrapolated.
    pub window: usize,
    /// Weight on the improvement standard deviation in the upper bound.
    pub beta: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            window: 10,
            beta: 1.0,
        }
    }
}

/// One unit of search work behind a uniform interface.
pub trait Block: Send {
    /// Advances the most promising part of the subtree and returns every
    /// leaf trial that was produced, in production order.
    fn do_next(&mut self, ctx: &mut StepContext) -> Result<Vec<Trial>>;

    /// Best full assignment found anywhere in the subtree so far.
    fn current_best(&self) -> Result<(Assignment, f64)>;

    /// Optimistic utility range reachable with `budget` more units.
    fn utility_bound(&self, budget: f64) -> Result<UtilityBound>;

    /// Expected utility gain of advancing this block by one step.
    fn improvement_rate(&self) -> Result<ImprovementRate>;

    /// Moves already-fixed variables to new values. Pinning a variable the
    /// block optimizes over is a caller bug. History is retained.
    fn pin(&mut self, values: &Assignment) -> Result<()>;

    /// Number of ok trials recorded in this subtree.
    fn ok_trials(&self) -> usize;

    /// Structural snapshot for reporting. Leaves use the default.
    fn report(&self) -> BlockReport {
        BlockReport {
            structure: BlockStructure::Leaf,
            ok_trials: self.ok_trials(),
            children: Vec::new(),
        }
    }
}

/// What kind of block a [`BlockReport`] node describes.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockStructure {
    Leaf,
    Conditioning {
        variable: String,
        active: Vec<String>,
        eliminated: Vec<String>,
    },
    Alternating {
        initialized: bool,
    },
}

/// Read-only snapshot of a block tree, labeled edge by labeled edge.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BlockReport {
    #[serde(flatten)]
    pub structure: BlockStructure,
    pub ok_trials: usize,
    pub children: Vec<(String, BlockReport)>,
}

impl BlockReport {
    /// Depth-first search for the first conditioning node on `variable`.
    pub fn find_conditioning(&self, variable: &str) -> Option<&BlockReport> {
        if matches!(&self.structure, BlockStructure::Conditioning { variable: v, .. } if v == variable)
        {
            return Some(self);
        }
        self.children
            .iter()
            .find_map(|(_, child)| child.find_conditioning(variable))
    }
}

/// Incumbent improvement of each ok trial relative to the best value before
/// it. The first ok trial has no predecessor and contributes nothing.
fn improvements(history: &History) -> Vec<f64> {
    let mut best = f64::INFINITY;
    let mut out = Vec::new();
    for (i, v) in history.ok_values().enumerate() {
        if i > 0 {
            out.push((best - v).max(0.0));
        }
        best = best.min(v);
    }
    out
}

/// Extrapolates the utility a block could reach if granted `budget` more
/// units.
///
/// The lower bound is the utility already achieved. The upper bound adds
/// `k * (mean + beta * std)` where the mean and standard deviation are taken
/// over the per-step improvements of the last `window` ok trials and
/// `k = floor(budget / ema_cost)` is the number of further steps the budget
/// affords. Histories with fewer than two ok trials cannot be extrapolated
/// and collapse to `[u*, u*]`; an empty history is an error.
pub fn utility_bound_from_history(
    history: &History,
    cost: &CostModel,
    budget: f64,
    params: BoundParams,
) -> Result<UtilityBound> {
    let best = history
        .best_value()
        .ok_or_else(|| Error::EmptyHistory("utility bound needs an ok trial".to_string()))?;
    let ustar = -best;
    let imps = improvements(history);
    if imps.is_empty() {
        return Ok(UtilityBound {
            lower: ustar,
            upper: ustar,
        });
    }
    let tail = &imps[imps.len().saturating_sub(params.window)..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let sd = if tail.len() < 2 {
        0.0
    } else {
        let var = tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (tail.len() - 1) as f64;
        var.sqrt()
    };
    let rate = mean + params.beta * sd;
    let upper = if rate <= 0.0 {
        ustar
    } else {
        let steps = (budget.max(0.0) / cost.ema_cost().max(1e-9)).floor();
        ustar + steps * rate
    };
    Ok(UtilityBound {
        lower: ustar,
        upper,
    })
}

/// Mean incumbent improvement per step since the first ok trial. A single
/// ok trial yields 0; an empty history is an error.
///
/// The all-time mean is roughly total descent divided by steps taken, so a
/// block that has received few steps keeps a high rate until it catches up
/// while a polished block's rate decays like 1/n. Arbitration on this
/// quantity therefore self-balances; a recency-windowed mean does not (a
/// side whose last few steps were fruitless drops to zero and starves).
pub fn improvement_rate_from_history(history: &History) -> Result<ImprovementRate> {
    if history.ok_count() == 0 {
        return Err(Error::EmptyHistory(
            "improvement rate needs an ok trial".to_string(),
        ));
    }
    let imps = improvements(history);
    let per_step = if imps.is_empty() {
        0.0
    } else {
        imps.iter().sum::<f64>() / imps.len() as f64
    };
    Ok(ImprovementRate { per_step })
}
