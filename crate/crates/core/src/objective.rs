//! Objective evaluation, trial records, and per-block bookkeeping.
//!
//! Everything here minimizes. An evaluation attempt always yields a
//! [`Trial`]: evaluator faults (errors, panics, missed deadlines) are folded
//! into the trial as `Failed`/`Timeout` with a caller-supplied penalty value
//! instead of bubbling up, so a flaky objective cannot abort a run. Errors
//! are reserved for caller bugs such as handing over a partial assignment.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Assignment, SearchSpace};

/// How budget consumption is accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// Wall-clock seconds spent inside the evaluator.
    Seconds,
    /// Every evaluation costs exactly 1, which makes runs deterministic.
    #[default]
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
    Timeout,
}

/// One completed evaluation attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// Full assignment over the original space, fixed values included.
    pub assignment: Assignment,
    /// Measured objective value, or the penalty value for non-ok trials.
    pub value: f64,
    /// Budget units consumed (seconds or 1 per evaluation, see [`CostMode`]).
    pub cost: f64,
    /// Fraction of the full workload the evaluation ran on.
    pub fidelity: f64,
    pub status: TrialStatus,
}

impl Trial {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }
}

/// Append-only log of the trials a block has produced.
#[derive(Debug, Clone, Default)]
pub struct History {
    trials: Vec<Trial>,
    best: Option<usize>,
    worst_ok: Option<f64>,
    ok_count: usize,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    /// Appends a trial and keeps the incumbent in sync. Only ok trials can
    /// become the incumbent; earlier trials win exact ties.
    pub fn record(&mut self, trial: Trial) {
        if trial.is_ok() {
            self.ok_count += 1;
            if self.best.map_or(true, |i| trial.value < self.trials[i].value) {
                self.best = Some(self.trials.len());
            }
            if self.worst_ok.map_or(true, |w| trial.value > w) {
                self.worst_ok = Some(trial.value);
            }
        }
        self.trials.push(trial);
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn ok_count(&self) -> usize {
        self.ok_count
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn best_trial(&self) -> Option<&Trial> {
        self.best.map(|i| &self.trials[i])
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best_trial().map(|t| t.value)
    }

    /// Objective values of ok trials in arrival order.
    pub fn ok_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.trials.iter().filter(|t| t.is_ok()).map(|t| t.value)
    }

    /// Value written into failed and timed-out trials: the worst ok value
    /// seen so far plus 10% of the observed range, or 1.0 before any ok
    /// trial exists. Keeps crashed evaluations strictly unattractive without
    /// distorting the scale of the surrogate's training data.
    pub fn penalty_value(&self) -> f64 {
        match (self.worst_ok, self.best_value()) {
            (Some(worst), Some(best)) => worst + 0.1 * (worst - best),
            _ => 1.0,
        }
    }
}

/// Exponential moving average of per-trial cost with smoothing 0.3.
/// The first observation seeds the average directly.
#[derive(Debug, Clone)]
pub struct CostModel {
    ema: f64,
    alpha: f64,
    observed: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            ema: 0.0,
            alpha: 0.3,
            observed: false,
        }
    }
}

impl CostModel {
    pub fn new() -> Self {
        CostModel::default()
    }

    pub fn observe(&mut self, cost: f64) -> Result<()> {
        if !cost.is_finite() || cost < 0.0 {
            return Err(Error::NegativeCost(cost));
        }
        if self.observed {
            self.ema = self.alpha * cost + (1.0 - self.alpha) * self.ema;
        } else {
            self.ema = cost;
            self.observed = true;
        }
        Ok(())
    }

    /// Current estimate; 0.0 until the first observation.
    pub fn ema_cost(&self) -> f64 {
        self.ema
    }
}

/// What a single evaluation attempt came back with.
#[derive(Debug, Clone)]
pub enum EvalOutcome {
    Value(f64),
    Failed(String),
    TimedOut,
}

/// Something that can score one assignment.
///
/// Implementations own their fault handling: they must return an outcome
/// rather than panic, and they are responsible for honoring `timeout`.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, assignment: &Assignment, fidelity: f64, timeout: Duration) -> EvalOutcome;
}

/// In-process evaluator for pure, total functions (analytic benchmarks).
/// Runs inline and ignores the deadline, which such functions cannot miss.
pub struct PureEvaluator {
    f: Arc<dyn Fn(&Assignment) -> f64 + Send + Sync>,
}

impl PureEvaluator {
    pub fn new(f: impl Fn(&Assignment) -> f64 + Send + Sync + 'static) -> Self {
        PureEvaluator { f: Arc::new(f) }
    }
}

impl Evaluator for PureEvaluator {
    fn evaluate(&self, assignment: &Assignment, _fidelity: f64, _timeout: Duration) -> EvalOutcome {
        match catch_unwind(AssertUnwindSafe(|| (self.f)(assignment))) {
            Ok(v) => EvalOutcome::Value(v),
            Err(_) => EvalOutcome::Failed("evaluator panicked".to_string()),
        }
    }
}

/// In-process evaluator for fallible user functions, run under a watchdog.
///
/// The closure executes on a helper thread so a deadline overrun can be
/// reported; an overrunning closure is abandoned, not cancelled.
pub struct FnEvaluator {
    f: Arc<dyn Fn(&Assignment, f64) -> std::result::Result<f64, String> + Send + Sync>,
}

impl FnEvaluator {
    pub fn new(
        f: impl Fn(&Assignment, f64) -> std::result::Result<f64, String> + Send + Sync + 'static,
    ) -> Self {
        FnEvaluator { f: Arc::new(f) }
    }
}

impl Evaluator for FnEvaluator {
    fn evaluate(&self, assignment: &Assignment, fidelity: f64, timeout: Duration) -> EvalOutcome {
        let (tx, rx) = mpsc::channel();
        let f = Arc::clone(&self.f);
        let a = assignment.clone();
        thread::spawn(move || {
            let result = catch_unwind(AssertUnwindSafe(|| f(&a, fidelity)));
            let _ = tx.send(result);
        });
        match rx.recv_timeout(timeout) {
            Ok(Ok(Ok(v))) => EvalOutcome::Value(v),
            Ok(Ok(Err(msg))) => EvalOutcome::Failed(msg),
            Ok(Err(_)) => EvalOutcome::Failed("evaluator panicked".to_string()),
            Err(_) => EvalOutcome::TimedOut,
        }
    }
}

/// A minimization problem bound to a search space.
pub struct ObjectiveSpec {
    space: Arc<SearchSpace>,
    evaluator: Arc<dyn Evaluator>,
    timeout: Duration,
    cost_mode: CostMode,
    default_fidelity: f64,
    dataset_ref: Option<String>,
}

impl ObjectiveSpec {
    pub fn new(space: SearchSpace, evaluator: Arc<dyn Evaluator>) -> Self {
        ObjectiveSpec {
            space: Arc::new(space),
            evaluator,
            timeout: Duration::from_secs(600),
            cost_mode: CostMode::Count,
            default_fidelity: 1.0,
            dataset_ref: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        assert!(!timeout.is_zero(), "timeout must be positive");
        self.timeout = timeout;
        self
    }

    pub fn with_cost_mode(mut self, mode: CostMode) -> Self {
        self.cost_mode = mode;
        self
    }

    pub fn with_dataset_ref(mut self, dataset: impl Into<String>) -> Self {
        self.dataset_ref = Some(dataset.into());
        self
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn shared_space(&self) -> Arc<SearchSpace> {
        Arc::clone(&self.space)
    }

    pub fn cost_mode(&self) -> CostMode {
        self.cost_mode
    }

    pub fn default_fidelity(&self) -> f64 {
        self.default_fidelity
    }

    pub fn dataset_ref(&self) -> Option<&str> {
        self.dataset_ref.as_deref()
    }

    /// Runs one evaluation and always hands back a trial.
    ///
    /// `penalty` is the value recorded for failed or timed-out attempts; it
    /// depends on the calling block's history, so the caller supplies it
    /// (see [`History::penalty_value`]). Errors indicate caller bugs:
    /// partial or out-of-domain assignments, or fidelity outside (0, 1].
    pub fn evaluate(&self, assignment: &Assignment, fidelity: f64, penalty: f64) -> Result<Trial> {
        if !(fidelity > 0.0 && fidelity <= 1.0) {
            return Err(Error::InvalidFidelity(fidelity));
        }
        assignment.validate_full(&self.space)?;

        let started = Instant::now();
        let outcome = self.evaluator.evaluate(assignment, fidelity, self.timeout);
        let cost = match self.cost_mode {
            CostMode::Seconds => started.elapsed().as_secs_f64(),
            CostMode::Count => 1.0,
        };

        let (value, status) = match outcome {
            EvalOutcome::Value(v) if v.is_finite() => (v, TrialStatus::Ok),
            EvalOutcome::Value(_) => (penalty, TrialStatus::Failed),
            EvalOutcome::Failed(_) => (penalty, TrialStatus::Failed),
            EvalOutcome::TimedOut => (penalty, TrialStatus::Timeout),
        };
        Ok(Trial {
            assignment: assignment.clone(),
            value,
            cost,
            fidelity,
            status,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Value, Variable};

    fn unit_space() -> SearchSpace {
        SearchSpace::new(vec![
            Variable::continuous("x", 0.0, 1.0).unwrap(),
            Variable::continuous("y", 0.0, 1.0).unwrap(),
        ])
        .unwrap()
    }

    fn point(x: f64, y: f64) -> Assignment {
        Assignment::of([("x", Value::Real(x)), ("y", Value::Real(y))])
    }

    #[test]
    fn evaluate_returns_measured_value() {
        let spec = ObjectiveSpec::new(
            unit_space(),
            Arc::new(PureEvaluator::new(|a| {
                a.f64("x").unwrap() + a.f64("y").unwrap()
            })),
        );
        let t = spec.evaluate(&point(0.25, 0.5), 1.0, 123.0).unwrap();
        assert_eq!(t.status, TrialStatus::Ok);
        assert_eq!(t.value, 0.75);
        assert_eq!(t.cost, 1.0);
        assert_eq!(t.fidelity, 1.0);
    }

    #[test]
    fn deterministic_evaluator_repeats_exactly() {
        let spec = ObjectiveSpec::new(
            unit_space(),
            Arc::new(PureEvaluator::new(|a| (a.f64("x").unwrap() - 0.3).powi(2))),
        );
        let a = point(0.9, 0.1);
        let t1 = spec.evaluate(&a, 1.0, 0.0).unwrap();
        let t2 = spec.evaluate(&a, 1.0, 0.0).unwrap();
        assert_eq!(t1.value, t2.value);
    }

    #[test]
    fn failing_evaluator_yields_penalized_trial() {
        let spec = ObjectiveSpec::new(
            unit_space(),
            Arc::new(FnEvaluator::new(|_, _| Err("broken".to_string()))),
        );
        let t = spec.evaluate(&point(0.1, 0.2), 1.0, 42.0).unwrap();
        assert_eq!(t.status, TrialStatus::Failed);
        assert_eq!(t.value, 42.0);
    }

    #[test]
    fn panicking_evaluator_yields_penalized_trial() {
        let spec = ObjectiveSpec::new(
            unit_space(),
            Arc::new(PureEvaluator::new(|_| panic!("boom"))),
        );
        let t = spec.evaluate(&point(0.1, 0.2), 1.0, 7.0).unwrap();
        assert_eq!(t.status, TrialStatus::Failed);
        assert_eq!(t.value, 7.0);
    }

    #[test]
    fn slow_evaluator_times_out() {
        let spec = ObjectiveSpec::new(
            unit_space(),
            Arc::new(FnEvaluator::new(|_, _| {
                thread::sleep(Duration::from_millis(200));
                Ok(0.0)
            })),
        )
        .with_timeout(Duration::from_millis(20));
        let t = spec.evaluate(&point(0.1, 0.2), 1.0, 9.0).unwrap();
        assert_eq!(t.status, TrialStatus::Timeout);
        assert_eq!(t.value, 9.0);
    }

    #[test]
    fn non_finite_values_are_treated_as_failures() {
        let spec = ObjectiveSpec::new(
            unit_space(),
            Arc::new(PureEvaluator::new(|_| f64::NAN)),
        );
        let t = spec.evaluate(&point(0.0, 0.0), 1.0, 5.0).unwrap();
        assert_eq!(t.status, TrialStatus::Failed);
        assert_eq!(t.value, 5.0);
    }

    #[test]
    fn partial_assignment_is_a_caller_bug() {
        let spec = ObjectiveSpec::new(unit_space(), Arc::new(PureEvaluator::new(|_| 0.0)));
        let mut a = Assignment::new();
        a.bind("x", Value::Real(0.5));
        assert!(spec.evaluate(&a, 1.0, 0.0).is_err());
        assert!(spec.evaluate(&point(0.5, 0.5), 0.0, 0.0).is_err());
        assert!(spec.evaluate(&point(0.5, 0.5), 1.5, 0.0).is_err());
    }

    #[test]
    fn history_tracks_incumbent_and_penalty() {
        let mut h = History::new();
        assert!(h.best_value().is_none());
        assert_eq!(h.penalty_value(), 1.0);

        let t = |value, status| Trial {
            assignment: Assignment::new(),
            value,
            cost: 1.0,
            fidelity: 1.0,
            status,
        };
        h.record(t(1.2, TrialStatus::Ok));
        assert_eq!(h.best_value(), Some(1.2));
        h.record(t(0.8, TrialStatus::Ok));
        assert_eq!(h.best_value(), Some(0.8));
        h.record(t(50.0, TrialStatus::Failed));
        assert_eq!(h.best_value(), Some(0.8), "failed trials never lead");
        assert_eq!(h.ok_count(), 2);
        // worst ok 1.2, range 0.4 => penalty 1.2 + 0.04
        assert!((h.penalty_value() - 1.24).abs() < 1e-12);
    }

    #[test]
    fn history_best_prefers_earlier_on_ties() {
        let mut h = History::new();
        let mut a1 = Assignment::new();
        a1.bind("x", Value::Real(0.1));
        let mut a2 = Assignment::new();
        a2.bind("x", Value::Real(0.9));
        h.record(Trial {
            assignment: a1.clone(),
            value: 1.0,
            cost: 1.0,
            fidelity: 1.0,
            status: TrialStatus::Ok,
        });
        h.record(Trial {
            assignment: a2,
            value: 1.0,
            cost: 1.0,
            fidelity: 1.0,
            status: TrialStatus::Ok,
        });
        assert_eq!(h.best_trial().unwrap().assignment, a1);
    }

    #[test]
    fn cost_model_seeds_then_smooths() {
        let mut c = CostModel::new();
        assert_eq!(c.ema_cost(), 0.0);
        c.observe(10.0).unwrap();
        assert_eq!(c.ema_cost(), 10.0);
        c.observe(20.0).unwrap();
        assert!((c.ema_cost() - 13.0).abs() < 1e-12);
        assert!(matches!(c.observe(-1.0), Err(Error::NegativeCost(_))));
    }
}
