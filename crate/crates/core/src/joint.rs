//! Model-based leaf block: optimize all free variables jointly.
//!
//! The block walks through uniform initial designs, then proposes the
//! candidate with the highest expected improvement under the forest
//! surrogate. Candidates are drawn fresh each step: a large uniform pool for
//! coverage plus a few single-coordinate perturbations of the incumbent for
//! local refinement.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::{
    improvement_rate_from_history, utility_bound_from_history, Block, BoundParams,
    ImprovementRate, StepContext, UtilityBound,
};
use crate::error::{Error, Result};
use crate::objective::{CostModel, History, ObjectiveSpec, Trial, TrialStatus};
use crate::space::{merge, sample_uniform, Assignment, SearchSpace, Subgoal};
use crate::surrogate::{FeatureEncoder, ForestConfig, RandomForest};

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Expected improvement of a Gaussian prediction `(mu, sigma)` below the
/// incumbent `best`, for minimization:
/// `EI = sigma * (gamma * Phi(gamma) + phi(gamma))` with
/// `gamma = (best - mu) / sigma`. At `sigma == 0` the expectation collapses
/// to `max(best - mu, 0)`; a negative sigma is a caller bug.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> Result<f64> {
    if sigma < 0.0 || sigma.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok((best - mu).max(0.0));
    }
    let gamma = (best - mu) / sigma;
    Ok((sigma * (gamma * normal_cdf(gamma) + normal_pdf(gamma))).max(0.0))
}

/// Index of the candidate with maximal expected improvement; the earliest
/// candidate wins ties. The pool must be non-empty.
pub fn select_by_ei(
    pool: &[Assignment],
    forest: &RandomForest,
    encoder: &FeatureEncoder,
    best: f64,
) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("empty candidate pool".to_string()));
    }
    let mut chosen = 0;
    let mut top = f64::NEG_INFINITY;
    for (i, candidate) in pool.iter().enumerate() {
        let (mu, var) = forest.predict(&encoder.encode(candidate));
        let ei = expected_improvement(mu, var.sqrt(), best)?;
        if ei > top {
            top = ei;
            chosen = i;
        }
    }
    Ok(chosen)
}

/// Tuning knobs for [`JointBlock`].
#[derive(Debug, Clone, Copy)]
pub struct JointConfig {
    /// Uniform designs evaluated before the surrogate takes over.
    pub n_init: usize,
    /// Uniform candidates scored per proposal.
    pub candidate_pool: usize,
    /// Additional single-coordinate perturbations of the incumbent.
    pub incumbent_perturbations: usize,
    pub forest: ForestConfig,
    pub bounds: BoundParams,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            n_init: 3,
            candidate_pool: 1024,
            incumbent_perturbations: 10,
            forest: ForestConfig::default(),
            bounds: BoundParams::default(),
        }
    }
}

/// Leaf block running model-based search over its free variables, with the
/// remaining variables held at the subgoal's values.
pub struct JointBlock {
    objective: Arc<ObjectiveSpec>,
    space: SearchSpace,
    subgoal: Subgoal,
    config: JointConfig,
    history: History,
    cost: CostModel,
    forest: Option<RandomForest>,
    encoder: FeatureEncoder,
    rng: ChaCha8Rng,
}

impl JointBlock {
    /// Builds a leaf over `space` (the free variables) with `subgoal`
    /// supplying every other variable of the objective. The two must
    /// partition the objective's space exactly; an empty free space is
    /// rejected.
    pub fn new(
        objective: Arc<ObjectiveSpec>,
        space: SearchSpace,
        subgoal: Subgoal,
        config: JointConfig,
        seed: u64,
    ) -> Result<Self> {
        if space.is_empty() {
            return Err(Error::EmptySpace);
        }
        for name in space.names() {
            if objective.space().get(name).is_none() {
                return Err(Error::UnknownVariable(name.to_string()));
            }
            if subgoal.is_fixed(name) {
                return Err(Error::InvalidPlan(format!(
                    "`{name}` is both free and fixed in a joint block"
                )));
            }
        }
        for var in objective.space().variables() {
            let covered = space.get(var.name()).is_some() || subgoal.is_fixed(var.name());
            if !covered {
                return Err(Error::InvalidPlan(format!(
                    "`{}` is neither free nor fixed in a joint block",
                    var.name()
                )));
            }
        }
        // Features span the whole objective space, not just the free
        // variables. Retained trials from before a re-pin carry their old
        // pinned values; with those coordinates encoded the forest can
        // attribute the resulting value shifts to the pins instead of
        // treating them as noise on the free variables.
        let encoder = FeatureEncoder::new(objective.space());
        Ok(JointBlock {
            objective,
            space,
            subgoal,
            config,
            history: History::new(),
            cost: CostModel::new(),
            forest: None,
            encoder,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn subgoal(&self) -> &Subgoal {
        &self.subgoal
    }

    /// Trained surrogate, present once `n_init` ok trials are recorded.
    pub fn surrogate(&self) -> Option<&RandomForest> {
        self.forest.as_ref()
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    /// Next assignment over the free variables: a uniform design until
    /// `n_init` ok trials exist, afterwards the EI maximizer over a fresh
    /// candidate pool.
    ///
    /// The EI reference is the lowest surrogate mean over the evaluated
    /// inputs, not the lowest raw observation. Raw values drift when this
    /// block's pinned variables get re-pinned mid-run (the same proposal
    /// scores differently under different pins), and an EI reference taken
    /// from a stale low observation pushes gamma so far negative that the
    /// acquisition stops separating candidates.
    fn propose(&mut self) -> Result<Assignment> {
        if self.forest.is_none() {
            return Ok(sample_uniform(&self.space, &mut self.rng, 1)?.pop().unwrap());
        }
        let forest = self.forest.as_ref().expect("checked above");
        let mut best = f64::INFINITY;
        let mut incumbent_trial: Option<&Trial> = None;
        for t in self.history.trials() {
            if t.status != TrialStatus::Ok {
                continue;
            }
            let (mu, _) = forest.predict(&self.encoder.encode(&t.assignment));
            best = best.min(mu);
            if incumbent_trial.map_or(true, |cur| t.value < cur.value) {
                incumbent_trial = Some(t);
            }
        }
        let Some(incumbent_trial) = incumbent_trial else {
            return Ok(sample_uniform(&self.space, &mut self.rng, 1)?.pop().unwrap());
        };
        let incumbent = incumbent_trial
            .assignment
            .restricted_to(self.space.names().collect::<Vec<_>>());

        let mut pool = sample_uniform(&self.space, &mut self.rng, self.config.candidate_pool)?;
        for _ in 0..self.config.incumbent_perturbations {
            let var = &self.space.variables()[self.rng.random_range(0..self.space.len())];
            let mut p = incumbent.clone();
            p.bind(var.name(), var.domain().sample(&mut self.rng));
            pool.push(p);
        }
        let full_pool: Vec<Assignment> = pool
            .iter()
            .map(|c| merge(self.subgoal.fixed(), c))
            .collect::<Result<Vec<_>>>()?;
        let chosen = select_by_ei(&full_pool, forest, &self.encoder, best)?;
        Ok(pool.swap_remove(chosen))
    }

    /// Refits the surrogate on the whole history (penalized trials included)
    /// once enough ok trials exist.
    fn refit(&mut self) {
        if self.history.ok_count() < self.config.n_init {
            return;
        }
        let rows: Vec<Vec<f64>> = self
            .history
            .trials()
            .iter()
            .map(|t| self.encoder.encode(&t.assignment))
            .collect();
        let targets: Vec<f64> = self.history.trials().iter().map(|t| t.value).collect();
        self.forest = Some(RandomForest::fit(
            &rows,
            &targets,
            self.config.forest,
            &mut self.rng,
        ));
    }
}

impl Block for JointBlock {
    fn do_next(&mut self, ctx: &mut StepContext) -> Result<Vec<Trial>> {
        if ctx.exhausted() {
            return Ok(Vec::new());
        }
        let proposal = self.propose()?;
        let full = merge(self.subgoal.fixed(), &proposal)?;
        let penalty = self.history.penalty_value();
        let trial = self
            .objective
            .evaluate(&full, self.objective.default_fidelity(), penalty)?;
        ctx.consume(trial.cost);
        self.cost.observe(trial.cost)?;
        self.history.record(trial.clone());
        self.refit();
        Ok(vec![trial])
    }

    fn current_best(&self) -> Result<(Assignment, f64)> {
        self.history
            .best_trial()
            .map(|t| (t.assignment.clone(), t.value))
            .ok_or_else(|| Error::EmptyHistory("no ok trial recorded yet".to_string()))
    }

    fn utility_bound(&self, budget: f64) -> Result<UtilityBound> {
        utility_bound_from_history(&self.history, &self.cost, budget, self.config.bounds)
    }

    fn improvement_rate(&self) -> Result<ImprovementRate> {
        improvement_rate_from_history(&self.history)
    }

    fn pin(&mut self, values: &Assignment) -> Result<()> {
        for (name, value) in values.iter() {
            let var = self
                .objective
                .space()
                .get(name)
                .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
            if self.space.get(name).is_some() {
                return Err(Error::InvalidPlan(format!(
                    "`{name}` is a free variable of this block and cannot be pinned"
                )));
            }
            if !var.domain().contains(value) {
                return Err(Error::DomainMismatch {
                    variable: name.to_string(),
                    value: value.to_string(),
                    reason: "pinned value outside the declared domain".to_string(),
                });
            }
            self.subgoal.reset(name, value.clone())?;
        }
        Ok(())
    }

    fn ok_trials(&self) -> usize {
        self.history.ok_count()
    }
}
