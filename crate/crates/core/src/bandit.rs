//! Composite blocks: conditioning on a variable's values, and alternating
//! between two variable groups.
//!
//! A conditioning block treats each value of one variable as an arm holding
//! a child block and plays a fixed number of rounds across the active arms
//! per step, retiring arms whose optimistic utility ceiling falls below what
//! a sibling has already achieved. An alternating block splits the free
//! variables in two, seeds both sides with a short round-robin, and then
//! always advances the side whose incumbent has been improving faster,
//! re-pinning the sibling's view of the stepped side after each move.

use std::collections::{BTreeMap, BTreeSet};

use crate::block::{
    improvement_rate_from_history, utility_bound_from_history, Block, BlockReport,
    BlockStructure, BoundParams, ImprovementRate, StepContext, UtilityBound,
};
use crate::error::{Error, Result};
use crate::objective::{CostModel, History, Trial, TrialStatus};
use crate::space::Assignment;

/// Arms whose upper utility bound lies strictly below some other arm's
/// lower bound. The arm with the highest upper bound can never dominate
/// itself, so at least one arm always survives.
pub fn eliminate_dominated(bounds: &BTreeMap<String, UtilityBound>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (key, bound) in bounds {
        let dominated = bounds
            .iter()
            .any(|(other, b)| other != key && bound.upper < b.lower);
        if dominated {
            out.insert(key.clone());
        }
    }
    out
}

struct Arm {
    key: String,
    block: Box<dyn Block>,
    eliminated: bool,
}

/// Plays the values of one variable as bandit arms over child blocks.
pub struct ConditioningBlock {
    var: String,
    arms: Vec<Arm>,
    rounds: usize,
    /// Ok trials every active arm needs before bounds count as trustworthy.
    min_ok_to_eliminate: usize,
    bound_params: BoundParams,
    history: History,
    cost: CostModel,
}

impl ConditioningBlock {
    /// Builds the block from pre-wired children, one per value of `var`, in
    /// canonical value order. Each child must already incorporate its arm's
    /// binding (fixed value or narrowed domain).
    pub fn new(
        var: impl Into<String>,
        arms: Vec<(String, Box<dyn Block>)>,
        rounds: usize,
        bound_params: BoundParams,
    ) -> Result<Self> {
        let var = var.into();
        if arms.is_empty() {
            return Err(Error::InvalidPlan(format!(
                "conditioning on `{var}` needs at least one arm"
            )));
        }
        if rounds == 0 {
            return Err(Error::InvalidPlan(
                "conditioning needs at least one round per step".to_string(),
            ));
        }
        let mut seen = BTreeSet::new();
        for (key, _) in &arms {
            if !seen.insert(key.clone()) {
                return Err(Error::InvalidPlan(format!("duplicate arm `{key}`")));
            }
        }
        Ok(ConditioningBlock {
            var,
            arms: arms
                .into_iter()
                .map(|(key, block)| Arm {
                    key,
                    block,
                    eliminated: false,
                })
                .collect(),
            rounds,
            min_ok_to_eliminate: rounds * 2,
            bound_params,
            history: History::new(),
            cost: CostModel::new(),
        })
    }

    pub fn active_arms(&self) -> Vec<&str> {
        self.arms
            .iter()
            .filter(|a| !a.eliminated)
            .map(|a| a.key.as_str())
            .collect()
    }

    pub fn eliminated_arms(&self) -> Vec<&str> {
        self.arms
            .iter()
            .filter(|a| a.eliminated)
            .map(|a| a.key.as_str())
            .collect()
    }

    fn try_eliminate(&mut self, remaining_budget: f64) -> Result<()> {
        let ready = self
            .arms
            .iter()
            .filter(|a| !a.eliminated)
            .all(|a| a.block.ok_trials() >= self.min_ok_to_eliminate);
        if !ready {
            return Ok(());
        }
        let mut bounds = BTreeMap::new();
        for arm in self.arms.iter().filter(|a| !a.eliminated) {
            bounds.insert(arm.key.clone(), arm.block.utility_bound(remaining_budget)?);
        }
        let dominated = eliminate_dominated(&bounds);
        for arm in &mut self.arms {
            if dominated.contains(&arm.key) {
                arm.eliminated = true;
            }
        }
        Ok(())
    }
}

impl Block for ConditioningBlock {
    fn do_next(&mut self, ctx: &mut StepContext) -> Result<Vec<Trial>> {
        if self.arms.iter().all(|a| a.eliminated) {
            return Err(Error::InvalidArgument(
                "conditioning block has no active arms".to_string(),
            ));
        }
        let mut produced = Vec::new();
        'rounds: for _ in 0..self.rounds {
            for arm in self.arms.iter_mut().filter(|a| !a.eliminated) {
                if ctx.exhausted() {
                    break 'rounds;
                }
                produced.extend(arm.block.do_next(ctx)?);
            }
        }
        if !ctx.exhausted() {
            self.try_eliminate(ctx.remaining())?;
        }
        for t in &produced {
            self.cost.observe(t.cost)?;
            self.history.record(t.clone());
        }
        Ok(produced)
    }

    /// Best over all arms, eliminated ones included; earlier arms win ties.
    fn current_best(&self) -> Result<(Assignment, f64)> {
        let mut best: Option<(Assignment, f64)> = None;
        for arm in &self.arms {
            if let Ok((a, v)) = arm.block.current_best() {
                if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
                    best = Some((a, v));
                }
            }
        }
        best.ok_or_else(|| Error::EmptyHistory("no arm has an ok trial yet".to_string()))
    }

    fn utility_bound(&self, budget: f64) -> Result<UtilityBound> {
        utility_bound_from_history(&self.history, &self.cost, budget, self.bound_params)
    }

    fn improvement_rate(&self) -> Result<ImprovementRate> {
        improvement_rate_from_history(&self.history)
    }

    fn pin(&mut self, values: &Assignment) -> Result<()> {
        if values.get(&self.var).is_some() {
            return Err(Error::InvalidPlan(format!(
                "`{}` is the conditioning variable of this block and cannot be pinned",
                self.var
            )));
        }
        for arm in &mut self.arms {
            arm.block.pin(values)?;
        }
        Ok(())
    }

    fn ok_trials(&self) -> usize {
        self.history.ok_count()
    }

    fn report(&self) -> BlockReport {
        BlockReport {
            structure: BlockStructure::Conditioning {
                variable: self.var.clone(),
                active: self.active_arms().iter().map(|s| s.to_string()).collect(),
                eliminated: self
                    .eliminated_arms()
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            },
            ok_trials: self.history.ok_count(),
            children: self
                .arms
                .iter()
                .map(|a| (a.key.clone(), a.block.report()))
                .collect(),
        }
    }
}

struct Side {
    vars: Vec<String>,
    block: Box<dyn Block>,
    /// Ok values this side has produced, in production order.
    values: Vec<f64>,
    /// Post-init turns since this side was last stepped.
    idle_turns: usize,
}

impl Side {
    fn note(&mut self, batch: &[Trial]) {
        for t in batch {
            if t.status == TrialStatus::Ok {
                self.values.push(t.value);
            }
        }
    }

    /// Mean of this side's last `window` incumbent improvements. This is
    /// the side's productivity over its own most recent steps, however
    /// long ago they ran; an idle side keeps the rate it earned in its
    /// last active stretch instead of decaying toward the sibling's
    /// timeline. A side with fewer than two values has produced no
    /// improvement evidence and reports infinity so it gets stepped.
    fn recent_rate(&self, window: usize) -> f64 {
        if self.values.len() < 2 {
            return f64::INFINITY;
        }
        let mut imps = Vec::with_capacity(self.values.len() - 1);
        let mut incumbent = self.values[0];
        for &v in &self.values[1..] {
            imps.push((incumbent - v).max(0.0));
            incumbent = incumbent.min(v);
        }
        let tail = &imps[imps.len().saturating_sub(window)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// Optimizes two variable groups in alternation.
///
/// Children must be built so that each side's block holds the *other*
/// side's variables pinned (at domain midpoints initially). The first
/// `rounds` steps cross-feed both sides once each. Afterwards the side
/// with the higher recent improvement rate holds the turn for a full rate
/// window of consecutive steps before rates are compared again, ties going
/// to the first side; a side left idle for two full windows is granted the
/// next window outright.
///
/// Arbitration is deliberately coarse. A side's trials are taken under
/// whatever sibling values were pinned at the time, and its surrogate can
/// only pool trials that share a pin regime. Re-deciding every step
/// interleaves the sides, changes the pins under both models constantly,
/// and leaves each with shredded training data; window-length streaks keep
/// the pins frozen while a side works. Comparing windowed rates rather
/// than all-time means matters for the same reason in reverse: an all-time
/// mean remembers the windfalls of a side's early descent long after it
/// has stalled and lets it monopolize the run.
pub struct AlternatingBlock {
    first: Side,
    second: Side,
    rounds: usize,
    init_rounds_done: usize,
    /// Whether the first side holds the current streak.
    holder_first: bool,
    /// Steps left in the current streak; 0 re-arbitrates.
    streak_left: usize,
    /// Length of the most recently opened streak; 0 before the first.
    streak_len: usize,
    history: History,
    cost: CostModel,
    bound_params: BoundParams,
}

impl AlternatingBlock {
    pub fn new(
        first_vars: Vec<String>,
        first: Box<dyn Block>,
        second_vars: Vec<String>,
        second: Box<dyn Block>,
        rounds: usize,
        bound_params: BoundParams,
    ) -> Result<Self> {
        if first_vars.is_empty() || second_vars.is_empty() {
            return Err(Error::InvalidPlan(
                "both sides of an alternating block need at least one variable".to_string(),
            ));
        }
        if first_vars.iter().any(|v| second_vars.contains(v)) {
            return Err(Error::InvalidPlan(
                "alternating sides must be disjoint".to_string(),
            ));
        }
        if rounds == 0 {
            return Err(Error::InvalidPlan(
                "alternating needs at least one seeding round".to_string(),
            ));
        }
        Ok(AlternatingBlock {
            first: Side {
                vars: first_vars,
                block: first,
                values: Vec::new(),
                idle_turns: 0,
            },
            second: Side {
                vars: second_vars,
                block: second,
                values: Vec::new(),
                idle_turns: 0,
            },
            rounds,
            init_rounds_done: 0,
            holder_first: true,
            streak_left: 0,
            streak_len: 0,
            history: History::new(),
            cost: CostModel::new(),
            bound_params,
        })
    }

    /// Whether the cross-feeding seed phase has completed.
    pub fn initialized(&self) -> bool {
        self.init_rounds_done >= self.rounds
    }

    /// One seeding round: step the first side, show its best to the second,
    /// step the second side, show its best to the first.
    fn seed_round(&mut self, ctx: &mut StepContext, produced: &mut Vec<Trial>) -> Result<()> {
        let batch = self.first.block.do_next(ctx)?;
        self.first.note(&batch);
        produced.extend(batch);
        let best = self.combined_best();
        Self::cross_pin(&best, &self.first.vars, &mut self.second)?;
        if ctx.exhausted() {
            return Ok(());
        }
        let batch = self.second.block.do_next(ctx)?;
        self.second.note(&batch);
        produced.extend(batch);
        let best = self.combined_best();
        Self::cross_pin(&best, &self.second.vars, &mut self.first)?;
        self.init_rounds_done += 1;
        Ok(())
    }

    /// Best full assignment either side has observed.
    ///
    /// Pins are cross-fed from this rather than from the donor side's own
    /// incumbent. A side's internal values carry the offsets of whatever
    /// pins each trial ran under, so they are not comparable across pin
    /// regimes and the side's raw minimum can sit on an early trial that
    /// merely enjoyed an accidentally favorable sibling contribution.
    /// Full-assignment values are always comparable, so the combined best
    /// only ever moves down and pins fed from it never regress.
    fn combined_best(&self) -> Option<Assignment> {
        match (
            self.first.block.current_best(),
            self.second.block.current_best(),
        ) {
            (Ok((a1, v1)), Ok((_, v2))) if v1 <= v2 => Some(a1),
            (_, Ok((a2, _))) => Some(a2),
            (Ok((a1, _)), _) => Some(a1),
            (Err(_), Err(_)) => None,
        }
    }

    /// Pins the `donor_vars` coordinates of the best observation so far
    /// into `into`.
    fn cross_pin(best: &Option<Assignment>, donor_vars: &[String], into: &mut Side) -> Result<()> {
        if let Some(a) = best {
            into.block
                .pin(&a.restricted_to(donor_vars.iter().map(String::as_str)))?;
        }
        Ok(())
    }

    /// Runs one step of the current streak, opening a new streak first if
    /// the previous one is exhausted. The streak holder is re-pinned with
    /// the sibling's current best before every step; within a streak the
    /// sibling is idle, so this only moves at streak boundaries.
    fn step_chosen(&mut self, ctx: &mut StepContext, produced: &mut Vec<Trial>) -> Result<()> {
        let window = self.bound_params.window.max(1);
        if self.streak_left == 0 {
            self.streak_len = if self.streak_len == 0 {
                window
            } else {
                self.streak_len * 2
            };
            let starved = 2 * self.streak_len;
            self.holder_first = if self.first.idle_turns >= starved {
                true
            } else if self.second.idle_turns >= starved {
                false
            } else {
                self.first.recent_rate(window) >= self.second.recent_rate(window)
            };
            self.streak_left = self.streak_len;
        }
        self.streak_left -= 1;
        let best = self.combined_best();
        let (stepped, sibling) = if self.holder_first {
            (&mut self.first, &mut self.second)
        } else {
            (&mut self.second, &mut self.first)
        };
        Self::cross_pin(&best, &sibling.vars, stepped)?;
        let batch = stepped.block.do_next(ctx)?;
        stepped.note(&batch);
        produced.extend(batch);
        stepped.idle_turns = 0;
        sibling.idle_turns += 1;
        Ok(())
    }
}

impl Block for AlternatingBlock {
    fn do_next(&mut self, ctx: &mut StepContext) -> Result<Vec<Trial>> {
        let mut produced = Vec::new();
        if !self.initialized() {
            while !self.initialized() && !ctx.exhausted() {
                self.seed_round(ctx, &mut produced)?;
            }
        } else if !ctx.exhausted() {
            self.step_chosen(ctx, &mut produced)?;
        }
        for t in &produced {
            self.cost.observe(t.cost)?;
            self.history.record(t.clone());
        }
        Ok(produced)
    }

    /// Best of the two sides; the first side wins exact ties.
    fn current_best(&self) -> Result<(Assignment, f64)> {
        match (
            self.first.block.current_best(),
            self.second.block.current_best(),
        ) {
            (Ok((a1, v1)), Ok((_, v2))) if v1 <= v2 => Ok((a1, v1)),
            (_, Ok(best2)) => Ok(best2),
            (Ok(best1), _) => Ok(best1),
            (Err(_), Err(_)) => Err(Error::EmptyHistory(
                "neither side has an ok trial yet".to_string(),
            )),
        }
    }

    fn utility_bound(&self, budget: f64) -> Result<UtilityBound> {
        utility_bound_from_history(&self.history, &self.cost, budget, self.bound_params)
    }

    fn improvement_rate(&self) -> Result<ImprovementRate> {
        improvement_rate_from_history(&self.history)
    }

    fn pin(&mut self, values: &Assignment) -> Result<()> {
        for name in values.names() {
            if self.first.vars.iter().any(|v| v == name)
                || self.second.vars.iter().any(|v| v == name)
            {
                return Err(Error::InvalidPlan(format!(
                    "`{name}` is optimized by this alternating block and cannot be pinned"
                )));
            }
        }
        self.first.block.pin(values)?;
        self.second.block.pin(values)
    }

    fn ok_trials(&self) -> usize {
        self.history.ok_count()
    }

    fn report(&self) -> BlockReport {
        BlockReport {
            structure: BlockStructure::Alternating {
                initialized: self.initialized(),
            },
            ok_trials: self.history.ok_count(),
            children: vec![
                (self.first.vars.join(","), self.first.block.report()),
                (self.second.vars.join(","), self.second.block.report()),
            ],
        }
    }
}
