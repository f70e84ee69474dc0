//! Plan-driven black-box optimization over declarative search spaces.
//!
//! A [`SearchSpace`] lists typed variables; a [`PlanNode`] tree says how to
//! carve that space into search blocks: joint surrogate models over a group
//! of variables, bandit-style conditioning on the values of one variable,
//! and alternating refinement of two variable groups. The [`Executor`]
//! steps the resulting tree until a budget (evaluation count or wall-clock
//! seconds) runs out, talking to the objective through an [`Evaluator`],
//! which can be an in-process closure or a child process speaking
//! line-delimited JSON (see [`subprocess`]).
//!
//! All blocks answer the same five questions: do one unit of work, report
//! the incumbent, bound the utility more budget could buy, estimate the
//! recent improvement rate, and accept re-pinned fixed variables. That
//! shared surface is what lets conditioning retire hopeless arms early and
//! lets alternation always advance the side that is currently paying off.
//!
//! ```
//! use std::sync::Arc;
//! use planopt::{Executor, PlanConfig, PlanNode, PlanParams, PureEvaluator,
//!               SearchSpace, Variable};
//!
//! let space = SearchSpace::new(vec![
//!     Variable::continuous("x", -2.0, 2.0)?,
//!     Variable::continuous("y", -2.0, 2.0)?,
//! ])?;
//! let config = PlanConfig {
//!     space,
//!     plan: PlanNode::joint(),
//!     params: PlanParams { budget: 25.0, ..PlanParams::default() },
//! };
//! let objective = Arc::new(PureEvaluator::new(|a| {
//!     let x = a.f64("x").unwrap();
//!     let y = a.f64("y").unwrap();
//!     (x - 1.0).powi(2) + y.powi(2)
//! }));
//! let mut exec = Executor::from_config(&config, objective)?;
//! exec.run()?;
//! let (_best, value) = exec.best()?;
//! assert!(value < 1.5);
//! # Ok::<(), planopt::Error>(())
//! ```

pub mod bandit;
pub mod bench;
pub mod block;
pub mod error;
pub mod joint;
pub mod objective;
pub mod plan;
pub mod report;
pub mod space;
pub mod subprocess;
pub mod surrogate;

pub use bandit::{eliminate_dominated, AlternatingBlock, ConditioningBlock};
pub use bench::{
    branin, grid_oracle, grid_size, hartmann6, load_benchmark, Benchmark, BENCHMARK_NAMES,
    GRID_LIMIT,
};
pub use block::{
    improvement_rate_from_history, utility_bound_from_history, Block, BlockReport,
    BlockStructure, BoundParams, ImprovementRate, StepContext, UtilityBound,
};
pub use error::{Error, Result};
pub use joint::{expected_improvement, select_by_ei, JointBlock, JointConfig};
pub use objective::{
    CostMode, CostModel, EvalOutcome, Evaluator, FnEvaluator, History, ObjectiveSpec,
    PureEvaluator, Trial, TrialStatus,
};
pub use plan::{
    build_root, enumerate_coarse_plans, Executor, PlanConfig, PlanNode, PlanParams,
    SpaceAnnotations,
};
pub use report::{
    compare_plans, config_digest, execute_plan, summary_csv, CompareRow, Comparison,
    PlanSummary, RunReport, TrajectoryPoint,
};
pub use space::{
    merge, sample_uniform, split_numeric, substitute, Assignment, Domain, SearchSpace, Subgoal,
    Value, Variable,
};
pub use subprocess::{
    serve_echo_objective, EchoOptions, EchoOutcome, ObjectiveRequest, ObjectiveResponse,
    SubprocessEvaluator,
};
pub use surrogate::{FeatureEncoder, ForestConfig, RandomForest};
