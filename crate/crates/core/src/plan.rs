//! Declarative search plans: a JSON-friendly tree of block shapes, the
//! builder that turns one into a live block tree, and the executor that
//! steps the root until the budget is gone.
//!
//! A plan says how the search space is carved up, not what the objective
//! is. The same config can therefore be replayed against any evaluator over
//! the same space, which is what makes side-by-side plan comparisons fair.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bandit::{AlternatingBlock, ConditioningBlock};
use crate::block::{Block, BlockReport, BoundParams, StepContext};
use crate::error::{Error, Result};
use crate::joint::{JointBlock, JointConfig};
use crate::objective::{CostMode, Evaluator, ObjectiveSpec, Trial};
use crate::space::{merge, split_numeric, Assignment, Domain, SearchSpace, Subgoal, Value};

/// Recursive description of how a subtree searches its free variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanNode {
    /// One surrogate over every remaining free variable.
    Joint {
        /// Optional explicit claim. When non-empty it must name exactly the
        /// variables that are free at this position; useful as a guard when
        /// configs are edited by hand.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        vars: Vec<String>,
    },
    /// One arm per value of `var`. Categorical variables get one arm per
    /// label and the variable is fixed inside each arm; numeric variables
    /// need `cutpoints` and keep the variable free within each piece.
    Conditioning {
        var: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutpoints: Option<Vec<f64>>,
        /// Shape of every arm's subtree; a joint leaf when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        child: Option<Box<PlanNode>>,
    },
    /// Split the free variables in two groups optimized in alternation.
    Alternating {
        left_vars: Vec<String>,
        right_vars: Vec<String>,
        /// Shape of the left subtree; a joint leaf when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        left: Option<Box<PlanNode>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        right: Option<Box<PlanNode>>,
    },
}

impl PlanNode {
    /// A joint leaf over whatever is free at its position.
    pub fn joint() -> Self {
        PlanNode::Joint { vars: Vec::new() }
    }
}

/// Shared knobs for every block a plan builds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanParams {
    /// Rounds per conditioning step, and seeding rounds per alternating
    /// block.
    #[serde(rename = "L")]
    pub rounds: usize,
    /// Uniform designs each joint leaf evaluates before fitting a surrogate.
    pub n_init: usize,
    /// Uniform candidates scored per joint proposal.
    pub candidate_pool: usize,
    /// Recent ok trials whose improvements feed utility bounds.
    pub w: usize,
    /// Optimism weight on the improvement spread in upper bounds.
    pub beta: f64,
    pub seed: u64,
    /// Total budget in the unit selected by `budget_mode`.
    pub budget: f64,
    pub budget_mode: CostMode,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            rounds: 5,
            n_init: 3,
            candidate_pool: 1024,
            w: 10,
            beta: 1.0,
            seed: 0,
            budget: 100.0,
            budget_mode: CostMode::Count,
        }
    }
}

impl PlanParams {
    fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidPlan(msg.to_string()));
        if self.rounds == 0 {
            return fail("L must be at least 1");
        }
        if self.n_init == 0 {
            return fail("n_init must be at least 1");
        }
        if self.candidate_pool == 0 {
            return fail("candidate_pool must be at least 1");
        }
        if self.w < 2 {
            return fail("w must be at least 2");
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return fail("beta must be finite and non-negative");
        }
        if !self.budget.is_finite() || self.budget <= 0.0 {
            return fail("budget must be positive");
        }
        Ok(())
    }

    fn bound_params(&self) -> BoundParams {
        BoundParams {
            window: self.w,
            beta: self.beta,
        }
    }

    fn joint_config(&self) -> JointConfig {
        JointConfig {
            n_init: self.n_init,
            candidate_pool: self.candidate_pool,
            bounds: self.bound_params(),
            ..JointConfig::default()
        }
    }
}

/// A complete, runnable search description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub space: SearchSpace,
    pub plan: PlanNode,
    #[serde(default)]
    pub params: PlanParams,
}

impl PlanConfig {
    /// Checks that the plan covers the space: every variable is claimed by
    /// exactly one position in the tree and every reference resolves.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let all: BTreeSet<String> = self.space.names().map(str::to_string).collect();
        validate_node(&self.space, &self.plan, &all)
    }
}

fn validate_node(space: &SearchSpace, node: &PlanNode, remaining: &BTreeSet<String>) -> Result<()> {
    match node {
        PlanNode::Joint { vars } => {
            if remaining.is_empty() {
                return Err(Error::InvalidPlan(
                    "joint node has no free variables left to search".to_string(),
                ));
            }
            if !vars.is_empty() {
                let claimed: BTreeSet<String> = vars.iter().cloned().collect();
                if claimed != *remaining {
                    return Err(Error::InvalidPlan(format!(
                        "joint node claims {:?} but {:?} are free here",
                        claimed, remaining
                    )));
                }
            }
            Ok(())
        }
        PlanNode::Conditioning {
            var,
            cutpoints,
            child,
        } => {
            if !remaining.contains(var) {
                return Err(Error::InvalidPlan(format!(
                    "cannot condition on `{var}`: not free at this position"
                )));
            }
            let decl = space
                .get(var)
                .ok_or_else(|| Error::UnknownVariable(var.clone()))?;
            let mut inner = remaining.clone();
            match (decl.domain(), cutpoints) {
                (Domain::Categorical { .. }, None) => {
                    inner.remove(var);
                    if inner.is_empty() {
                        return Err(Error::InvalidPlan(format!(
                            "conditioning on `{var}` leaves its arms with nothing to search"
                        )));
                    }
                }
                (Domain::Categorical { .. }, Some(_)) => {
                    return Err(Error::InvalidCutpoints {
                        variable: var.clone(),
                        reason: "categorical variables take one arm per label, not cutpoints"
                            .to_string(),
                    });
                }
                (_, Some(cuts)) => {
                    // Validity of the actual cut positions is checked here
                    // so a bad config fails before any evaluation happens.
                    split_numeric(decl, cuts)?;
                }
                (_, None) => {
                    return Err(Error::InvalidCutpoints {
                        variable: var.clone(),
                        reason: "numeric variables need cutpoints to condition on".to_string(),
                    });
                }
            }
            let default = PlanNode::joint();
            validate_node(space, child.as_deref().unwrap_or(&default), &inner)
        }
        PlanNode::Alternating {
            left_vars,
            right_vars,
            left,
            right,
        } => {
            for name in left_vars.iter().chain(right_vars) {
                if !remaining.contains(name) {
                    return Err(Error::InvalidPlan(format!(
                        "`{name}` is not free at this alternating node"
                    )));
                }
            }
            let l: BTreeSet<String> = left_vars.iter().cloned().collect();
            let r: BTreeSet<String> = right_vars.iter().cloned().collect();
            if l.len() != left_vars.len() || r.len() != right_vars.len() {
                return Err(Error::InvalidPlan(
                    "alternating sides list a variable twice".to_string(),
                ));
            }
            if !l.is_disjoint(&r) {
                return Err(Error::InvalidPlan(
                    "alternating sides overlap".to_string(),
                ));
            }
            if l.is_empty() || r.is_empty() {
                return Err(Error::InvalidPlan(
                    "both alternating sides need at least one variable".to_string(),
                ));
            }
            let union: BTreeSet<String> = l.union(&r).cloned().collect();
            if union != *remaining {
                return Err(Error::InvalidPlan(format!(
                    "alternating sides cover {:?} but {:?} are free here",
                    union, remaining
                )));
            }
            let default = PlanNode::joint();
            validate_node(space, left.as_deref().unwrap_or(&default), &l)?;
            validate_node(space, right.as_deref().unwrap_or(&default), &r)
        }
    }
}

/// Builds the live block tree a plan describes.
///
/// Each joint leaf gets its own RNG stream derived from `params.seed` in
/// depth-first order, so a plan's trajectory is reproducible and two plans
/// with a shared prefix stay comparable.
pub fn build_root(
    objective: &Arc<ObjectiveSpec>,
    plan: &PlanNode,
    params: &PlanParams,
) -> Result<Box<dyn Block>> {
    params.validate()?;
    let all: BTreeSet<String> = objective.space().names().map(str::to_string).collect();
    validate_node(objective.space(), plan, &all)?;
    let mut next_seed = params.seed;
    build_node(
        objective,
        plan,
        objective.space().clone(),
        Subgoal::empty(),
        params,
        &mut next_seed,
    )
}

fn take_seed(next: &mut u64) -> u64 {
    let seed = *next;
    *next = next.wrapping_add(1);
    seed
}

fn build_node(
    objective: &Arc<ObjectiveSpec>,
    node: &PlanNode,
    space: SearchSpace,
    subgoal: Subgoal,
    params: &PlanParams,
    next_seed: &mut u64,
) -> Result<Box<dyn Block>> {
    let default = PlanNode::joint();
    match node {
        PlanNode::Joint { .. } => Ok(Box::new(JointBlock::new(
            Arc::clone(objective),
            space,
            subgoal,
            params.joint_config(),
            take_seed(next_seed),
        )?)),
        PlanNode::Conditioning {
            var,
            cutpoints,
            child,
        } => {
            let template = child.as_deref().unwrap_or(&default);
            let decl = space
                .get(var)
                .ok_or_else(|| Error::UnknownVariable(var.clone()))?;
            let mut arms: Vec<(String, Box<dyn Block>)> = Vec::new();
            match (decl.domain().clone(), cutpoints) {
                (Domain::Categorical { labels }, None) => {
                    for label in labels {
                        let binding = Assignment::of([(var.clone(), Value::Cat(label.clone()))]);
                        let arm_subgoal = Subgoal::new(
                            objective.space(),
                            merge(subgoal.fixed(), &binding)?,
                        )?;
                        let names: Vec<&str> = space
                            .names()
                            .filter(|n| *n != var.as_str())
                            .collect();
                        let arm_space = space.restricted_to(names)?;
                        arms.push((
                            label,
                            build_node(objective, template, arm_space, arm_subgoal, params, next_seed)?,
                        ));
                    }
                }
                (Domain::Categorical { .. }, Some(_)) => {
                    return Err(Error::InvalidCutpoints {
                        variable: var.clone(),
                        reason: "categorical variables take one arm per label, not cutpoints"
                            .to_string(),
                    });
                }
                (_, Some(cuts)) => {
                    for piece in split_numeric(decl, cuts)? {
                        let arm_space = space.with_domain(var, piece.clone())?;
                        arms.push((
                            range_arm_key(&piece),
                            build_node(
                                objective,
                                template,
                                arm_space,
                                subgoal.clone(),
                                params,
                                next_seed,
                            )?,
                        ));
                    }
                }
                (_, None) => {
                    return Err(Error::InvalidCutpoints {
                        variable: var.clone(),
                        reason: "numeric variables need cutpoints to condition on".to_string(),
                    });
                }
            }
            Ok(Box::new(ConditioningBlock::new(
                var.clone(),
                arms,
                params.rounds,
                params.bound_params(),
            )?))
        }
        PlanNode::Alternating {
            left_vars,
            right_vars,
            left,
            right,
        } => {
            // Normalize both sides to declaration order so behavior does not
            // depend on how the config happened to list them.
            let ordered = |wanted: &[String]| -> Vec<String> {
                space
                    .names()
                    .filter(|n| wanted.iter().any(|w| w.as_str() == *n))
                    .map(str::to_string)
                    .collect()
            };
            let lv = ordered(left_vars);
            let rv = ordered(right_vars);
            let side = |own: &[String],
                        other: &[String],
                        template: &PlanNode,
                        next_seed: &mut u64|
             -> Result<Box<dyn Block>> {
                let own_space = space.restricted_to(own.iter().map(String::as_str))?;
                let mut pins = Assignment::new();
                for name in other {
                    let decl = space
                        .get(name)
                        .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
                    pins.bind(name.clone(), decl.domain().midpoint());
                }
                let side_subgoal =
                    Subgoal::new(objective.space(), merge(subgoal.fixed(), &pins)?)?;
                build_node(objective, template, own_space, side_subgoal, params, next_seed)
            };
            let first = side(&lv, &rv, left.as_deref().unwrap_or(&default), next_seed)?;
            let second = side(&rv, &lv, right.as_deref().unwrap_or(&default), next_seed)?;
            Ok(Box::new(AlternatingBlock::new(
                lv,
                first,
                rv,
                second,
                params.rounds,
                params.bound_params(),
            )?))
        }
    }
}

fn range_arm_key(piece: &Domain) -> String {
    match piece {
        Domain::Continuous { lo, hi, .. } => format!("[{lo}, {hi}]"),
        Domain::Integer { lo, hi } => format!("[{lo}, {hi}]"),
        Domain::Categorical { labels } => labels.join("|"),
    }
}

/// Steps a block tree until its budget is spent.
///
/// One step is one `do_next` on the root. The budget may be overshot by at
/// most the evaluation that was in flight when it ran out; in count mode
/// every evaluation costs exactly 1, so runs land on the budget exactly and
/// are bit-for-bit reproducible.
pub struct Executor {
    root: Box<dyn Block>,
    budget: f64,
    spent: f64,
    incumbent: Option<(Assignment, f64)>,
    trials: Vec<Trial>,
}

impl Executor {
    pub fn new(root: Box<dyn Block>, budget: f64) -> Result<Self> {
        if !budget.is_finite() || budget <= 0.0 {
            return Err(Error::InvalidArgument(
                "executor budget must be positive and finite".to_string(),
            ));
        }
        Ok(Executor {
            root,
            budget,
            spent: 0.0,
            incumbent: None,
            trials: Vec::new(),
        })
    }

    /// Convenience path: validate the config, wire the evaluator into an
    /// objective with the configured cost mode, build the tree, run nothing.
    pub fn from_config(config: &PlanConfig, evaluator: Arc<dyn Evaluator>) -> Result<Self> {
        config.validate()?;
        let objective = Arc::new(
            ObjectiveSpec::new(config.space.clone(), evaluator)
                .with_cost_mode(config.params.budget_mode),
        );
        let root = build_root(&objective, &config.plan, &config.params)?;
        Executor::new(root, config.params.budget)
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    /// Best ok evaluation seen so far, if any.
    pub fn incumbent(&self) -> Option<(&Assignment, f64)> {
        self.incumbent.as_ref().map(|(a, v)| (a, *v))
    }

    pub fn report(&self) -> BlockReport {
        self.root.report()
    }

    pub fn best(&self) -> Result<(Assignment, f64)> {
        self.root.current_best()
    }

    /// Runs one root step. Returns the trials it produced, or `None` once
    /// the budget is exhausted.
    pub fn step(&mut self) -> Result<Option<Vec<Trial>>> {
        if self.spent >= self.budget {
            return Ok(None);
        }
        let mut ctx = StepContext::new(self.budget - self.spent);
        let batch = self.root.do_next(&mut ctx)?;
        if batch.is_empty() {
            // A correctly built tree always evaluates something when budget
            // remains; an empty batch means the root considers itself done.
            self.spent = self.budget;
            return Ok(None);
        }
        for t in &batch {
            self.spent += t.cost;
            if t.is_ok()
                && self
                    .incumbent
                    .as_ref()
                    .map_or(true, |(_, best)| t.value < *best)
            {
                self.incumbent = Some((t.assignment.clone(), t.value));
            }
        }
        self.trials.extend(batch.iter().cloned());
        Ok(Some(batch))
    }

    /// Runs to completion, invoking `observe` once per finished trial with
    /// the budget spent after it and the incumbent at that point.
    pub fn run_with_observer(
        &mut self,
        mut observe: impl FnMut(&Trial, f64, Option<(&Assignment, f64)>),
    ) -> Result<()> {
        loop {
            let spent_before = self.spent;
            let best_before = self.incumbent.clone();
            let Some(batch) = self.step()? else {
                return Ok(());
            };
            let mut spent = spent_before;
            let mut best = best_before;
            for t in &batch {
                spent += t.cost;
                if t.is_ok() && best.as_ref().map_or(true, |(_, v)| t.value < *v) {
                    best = Some((t.assignment.clone(), t.value));
                }
                observe(t, spent, best.as_ref().map(|(a, v)| (a, *v)));
            }
        }
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_with_observer(|_, _, _| {})
    }
}

/// Which variables play which role when plans are enumerated for a space.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceAnnotations {
    /// Categorical selector between alternative model families, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm_var: Option<String>,
    /// Variables shaping the input representation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_vars: Vec<String>,
    /// Per-model hyperparameters.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hp_vars: Vec<String>,
}

/// The coarse plan shapes worth comparing on an annotated space, by name.
///
/// Only shapes expressible with the given annotations are returned; a space
/// with no algorithm variable, for example, yields no conditioning plans.
/// The flat joint plan is always present and always first.
pub fn enumerate_coarse_plans(annotations: &SpaceAnnotations) -> Vec<(String, PlanNode)> {
    let mut plans = vec![("joint".to_string(), PlanNode::joint())];
    let alg = annotations.algorithm_var.as_ref();
    let feats = &annotations.feature_vars;
    let hps = &annotations.hp_vars;

    if let Some(alg) = alg {
        if !feats.is_empty() || !hps.is_empty() {
            plans.push((
                "per_algorithm".to_string(),
                PlanNode::Conditioning {
                    var: alg.clone(),
                    cutpoints: None,
                    child: None,
                },
            ));
        }
        if !feats.is_empty() && !hps.is_empty() {
            plans.push((
                "per_algorithm_alternating".to_string(),
                PlanNode::Conditioning {
                    var: alg.clone(),
                    cutpoints: None,
                    child: Some(Box::new(PlanNode::Alternating {
                        left_vars: feats.clone(),
                        right_vars: hps.clone(),
                        left: None,
                        right: None,
                    })),
                },
            ));
        }
    }

    let mut rest: Vec<String> = hps.clone();
    if let Some(alg) = alg {
        rest.push(alg.clone());
    }
    if !feats.is_empty() && !rest.is_empty() {
        plans.push((
            "features_vs_rest".to_string(),
            PlanNode::Alternating {
                left_vars: feats.clone(),
                right_vars: rest,
                left: None,
                right: None,
            },
        ));
    }

    let mut feats_alg: Vec<String> = feats.clone();
    if let Some(alg) = alg {
        feats_alg.push(alg.clone());
    }
    if !feats_alg.is_empty() && !hps.is_empty() {
        plans.push((
            "features_algorithm_vs_hyperparams".to_string(),
            PlanNode::Alternating {
                left_vars: feats_alg,
                right_vars: hps.clone(),
                left: None,
                right: None,
            },
        ));
    }

    plans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockStructure;
    use crate::objective::{PureEvaluator, TrialStatus};
    use crate::space::Variable;

    fn quadratic_space() -> SearchSpace {
        SearchSpace::new(vec![
            Variable::continuous("x", -2.0, 2.0).unwrap(),
            Variable::continuous("y", -2.0, 2.0).unwrap(),
        ])
        .unwrap()
    }

    fn quadratic_eval() -> Arc<dyn Evaluator> {
        Arc::new(PureEvaluator::new(|a| {
            let x = a.f64("x").unwrap();
            let y = a.f64("y").unwrap();
            x * x + y * y
        }))
    }

    fn annotated_space() -> SearchSpace {
        SearchSpace::new(vec![
            Variable::categorical("alg", ["p", "q"]).unwrap(),
            Variable::continuous("f1", 0.0, 1.0).unwrap(),
            Variable::continuous("h1", 0.0, 1.0).unwrap(),
        ])
        .unwrap()
    }

    fn annotated_eval() -> Arc<dyn Evaluator> {
        Arc::new(PureEvaluator::new(|a| {
            let off = match a.label("alg").unwrap() {
                "p" => 0.0,
                _ => 0.5,
            };
            let f1 = a.f64("f1").unwrap();
            let h1 = a.f64("h1").unwrap();
            off + (f1 - 0.3).powi(2) + (h1 - 0.7).powi(2)
        }))
    }

    #[test]
    fn config_round_trips_through_json() {
        let text = r#"{
            "space": [
                {"name": "alg", "type": "categorical", "labels": ["p", "q"]},
                {"name": "f1", "type": "continuous", "bounds": [0.0, 1.0]},
                {"name": "h1", "type": "continuous", "bounds": [0.0, 1.0]}
            ],
            "plan": {
                "type": "conditioning",
                "var": "alg",
                "child": {
                    "type": "alternating",
                    "left_vars": ["f1"],
                    "right_vars": ["h1"]
                }
            },
            "params": {"L": 3, "budget": 60, "seed": 7}
        }"#;
        let config: PlanConfig = serde_json::from_str(text).unwrap();
        config.validate().unwrap();
        assert_eq!(config.params.rounds, 3);
        assert_eq!(config.params.n_init, 3, "unset fields take defaults");
        assert_eq!(config.params.budget_mode, CostMode::Count);

        let reparsed: PlanConfig =
            serde_json::from_str(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(reparsed, config);
    }

    #[test]
    fn validation_rejects_malformed_plans() {
        let space = annotated_space();
        let params = PlanParams::default();
        let bad = |plan: PlanNode| {
            PlanConfig {
                space: space.clone(),
                plan,
                params,
            }
            .validate()
            .unwrap_err()
        };

        // Joint claiming a subset of what is free.
        bad(PlanNode::Joint {
            vars: vec!["f1".to_string()],
        });
        // Conditioning on a numeric variable without cutpoints.
        bad(PlanNode::Conditioning {
            var: "f1".to_string(),
            cutpoints: None,
            child: None,
        });
        // Cutpoints on a categorical variable.
        bad(PlanNode::Conditioning {
            var: "alg".to_string(),
            cutpoints: Some(vec![0.5]),
            child: None,
        });
        // Alternating sides that overlap.
        bad(PlanNode::Alternating {
            left_vars: vec!["f1".to_string(), "alg".to_string()],
            right_vars: vec!["alg".to_string(), "h1".to_string()],
            left: None,
            right: None,
        });
        // Alternating sides that leave a variable unclaimed.
        bad(PlanNode::Alternating {
            left_vars: vec!["f1".to_string()],
            right_vars: vec!["h1".to_string()],
            left: None,
            right: None,
        });
        // Unknown variable.
        bad(PlanNode::Conditioning {
            var: "nope".to_string(),
            cutpoints: None,
            child: None,
        });
    }

    #[test]
    fn count_mode_spends_the_budget_exactly() {
        let config = PlanConfig {
            space: quadratic_space(),
            plan: PlanNode::joint(),
            params: PlanParams {
                budget: 30.0,
                seed: 11,
                ..PlanParams::default()
            },
        };
        let mut exec = Executor::from_config(&config, quadratic_eval()).unwrap();
        exec.run().unwrap();
        assert_eq!(exec.trials().len(), 30);
        assert_eq!(exec.spent(), 30.0);
        assert!(exec.step().unwrap().is_none(), "no work after exhaustion");

        // A composite root lands exactly on the budget too: two arms times
        // five rounds per step gives batches of 10 into a budget of 30.
        let config = PlanConfig {
            space: annotated_space(),
            plan: PlanNode::Conditioning {
                var: "alg".to_string(),
                cutpoints: None,
                child: None,
            },
            params: PlanParams {
                budget: 30.0,
                ..PlanParams::default()
            },
        };
        let mut exec = Executor::from_config(&config, annotated_eval()).unwrap();
        exec.run().unwrap();
        assert_eq!(exec.trials().len(), 30);
        assert_eq!(exec.spent(), 30.0);
    }

    #[test]
    fn equal_seeds_reproduce_trajectories_exactly() {
        let run = || {
            let config = PlanConfig {
                space: annotated_space(),
                plan: PlanNode::Conditioning {
                    var: "alg".to_string(),
                    cutpoints: None,
                    child: Some(Box::new(PlanNode::Alternating {
                        left_vars: vec!["f1".to_string()],
                        right_vars: vec!["h1".to_string()],
                        left: None,
                        right: None,
                    })),
                },
                params: PlanParams {
                    budget: 60.0,
                    seed: 5,
                    ..PlanParams::default()
                },
            };
            let mut exec = Executor::from_config(&config, annotated_eval()).unwrap();
            exec.run().unwrap();
            exec.trials().to_vec()
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), b.len());
        for (ta, tb) in a.iter().zip(&b) {
            assert_eq!(ta.assignment, tb.assignment);
            assert_eq!(ta.value.to_bits(), tb.value.to_bits());
        }
    }

    #[test]
    fn range_conditioning_narrows_the_variable_in_each_arm() {
        let config = PlanConfig {
            space: quadratic_space(),
            plan: PlanNode::Conditioning {
                var: "x".to_string(),
                cutpoints: Some(vec![0.0]),
                child: None,
            },
            params: PlanParams {
                budget: 40.0,
                ..PlanParams::default()
            },
        };
        let mut exec = Executor::from_config(&config, quadratic_eval()).unwrap();
        exec.run().unwrap();

        let report = exec.report();
        match &report.structure {
            BlockStructure::Conditioning { variable, .. } => assert_eq!(variable, "x"),
            other => panic!("expected conditioning root, got {other:?}"),
        }
        assert_eq!(report.children.len(), 2);
        assert_eq!(report.children[0].0, "[-2, 0]");
        assert_eq!(report.children[1].0, "[0, 2]");
        // Every trial's x must respect the arm it came from; with both arms
        // alive the trials interleave, so just check the global pattern.
        assert!(exec
            .trials()
            .iter()
            .all(|t| t.status == TrialStatus::Ok && t.assignment.f64("x").unwrap().abs() <= 2.0));
    }

    #[test]
    fn alternating_pins_sides_at_midpoints_before_seeding() {
        let config = PlanConfig {
            space: quadratic_space(),
            plan: PlanNode::Alternating {
                left_vars: vec!["x".to_string()],
                right_vars: vec!["y".to_string()],
                left: None,
                right: None,
            },
            params: PlanParams {
                budget: 1.0,
                ..PlanParams::default()
            },
        };
        let mut exec = Executor::from_config(&config, quadratic_eval()).unwrap();
        exec.run().unwrap();
        // Budget 1 permits exactly the first seeding evaluation: the left
        // side proposes x while y is still the untouched midpoint default.
        assert_eq!(exec.trials().len(), 1);
        assert_eq!(exec.trials()[0].assignment.f64("y").unwrap(), 0.0);
    }

    #[test]
    fn enumerates_every_applicable_coarse_shape() {
        let annotations = SpaceAnnotations {
            algorithm_var: Some("alg".to_string()),
            feature_vars: vec!["f1".to_string()],
            hp_vars: vec!["h1".to_string()],
        };
        let plans = enumerate_coarse_plans(&annotations);
        let names: Vec<&str> = plans.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "joint",
                "per_algorithm",
                "per_algorithm_alternating",
                "features_vs_rest",
                "features_algorithm_vs_hyperparams",
            ]
        );
        for (name, plan) in &plans {
            let config = PlanConfig {
                space: annotated_space(),
                plan: plan.clone(),
                params: PlanParams {
                    budget: 25.0,
                    seed: 3,
                    ..PlanParams::default()
                },
            };
            config
                .validate()
                .unwrap_or_else(|e| panic!("{name} invalid: {e}"));
            let mut exec = Executor::from_config(&config, annotated_eval()).unwrap();
            exec.run().unwrap();
            assert!(exec.trials().len() >= 25, "{name} under-spent its budget");
            assert!(exec.best().is_ok(), "{name} found nothing");
        }

        let bare = enumerate_coarse_plans(&SpaceAnnotations::default());
        assert_eq!(bare.len(), 1, "unannotated spaces only get the joint plan");
    }
}
