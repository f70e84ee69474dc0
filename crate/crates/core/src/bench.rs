//! Built-in analytic benchmarks and an exhaustive grid oracle.
//!
//! The benchmarks are cheap closed-form functions with documented optima,
//! which makes them suitable both for exercising the engine end to end and
//! for calibrating expectations: the grid oracle can certify what the best
//! reachable value on a finite lattice actually is.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::objective::{CostMode, Evaluator, ObjectiveSpec, PureEvaluator};
use crate::plan::SpaceAnnotations;
use crate::space::{Assignment, SearchSpace, Value, Variable};

/// Branin on its standard box, minimum 0.397887 at three points.
pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let inner = x2 - b * x1 * x1 + c * x1 - 6.0;
    inner * inner + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

/// Six-dimensional Hartmann on the unit cube, minimum -3.32237.
pub fn hartmann6(x: &[f64; 6]) -> f64 {
    const ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
    const A: [[f64; 6]; 4] = [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ];
    const P: [[f64; 6]; 4] = [
        [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
        [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
        [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
        [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
    ];
    let mut sum = 0.0;
    for i in 0..4 {
        let mut exponent = 0.0;
        for j in 0..6 {
            let d = x[j] - P[i][j];
            exponent -= A[i][j] * d * d;
        }
        sum -= ALPHA[i] * exponent.exp();
    }
    sum
}

/// A ready-to-run minimization problem with a known landscape.
pub struct Benchmark {
    name: String,
    space: SearchSpace,
    annotations: SpaceAnnotations,
    func: Arc<dyn Fn(&Assignment) -> f64 + Send + Sync>,
    known_best: Option<f64>,
}

impl Benchmark {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn annotations(&self) -> &SpaceAnnotations {
        &self.annotations
    }

    /// Documented global minimum value, when one exists in closed form.
    pub fn known_best(&self) -> Option<f64> {
        self.known_best
    }

    pub fn value(&self, assignment: &Assignment) -> f64 {
        (self.func)(assignment)
    }

    pub fn evaluator(&self) -> Arc<dyn Evaluator> {
        let f = Arc::clone(&self.func);
        Arc::new(PureEvaluator::new(move |a| f(a)))
    }

    pub fn objective(&self, cost_mode: CostMode) -> ObjectiveSpec {
        ObjectiveSpec::new(self.space.clone(), self.evaluator()).with_cost_mode(cost_mode)
    }

    /// Exhaustively evaluates the benchmark on its lattice.
    pub fn oracle(&self, resolution: usize) -> Result<(Assignment, f64)> {
        let f = Arc::clone(&self.func);
        grid_oracle(&self.space, move |a| f(a), resolution)
    }
}

pub const BENCHMARK_NAMES: [&str; 4] = ["branin", "hartmann6", "separable20", "cash3"];

/// Builds one of the named benchmarks; see [`BENCHMARK_NAMES`].
pub fn load_benchmark(name: &str) -> Result<Benchmark> {
    match name {
        "branin" => {
            let space = SearchSpace::new(vec![
                Variable::continuous("x1", -5.0, 10.0)?,
                Variable::continuous("x2", 0.0, 15.0)?,
            ])?;
            Ok(Benchmark {
                name: name.to_string(),
                space,
                annotations: SpaceAnnotations::default(),
                func: Arc::new(|a| branin(a.f64("x1").unwrap(), a.f64("x2").unwrap())),
                known_best: Some(0.397887),
            })
        }
        "hartmann6" => {
            let vars: Vec<Variable> = (1..=6)
                .map(|i| Variable::continuous(format!("x{i}"), 0.0, 1.0))
                .collect::<Result<_>>()?;
            let space = SearchSpace::new(vars)?;
            Ok(Benchmark {
                name: name.to_string(),
                space,
                annotations: SpaceAnnotations::default(),
                func: Arc::new(|a| {
                    let mut x = [0.0; 6];
                    for (i, slot) in x.iter_mut().enumerate() {
                        *slot = a.f64(&format!("x{}", i + 1)).unwrap();
                    }
                    hartmann6(&x)
                }),
                known_best: Some(-3.32237),
            })
        }
        "separable20" => {
            // Two additively independent groups of ten: the y block is
            // minimized at 0, the z block at 1. Cross terms are absent, so
            // optimizing the groups in alternation loses nothing.
            let mut vars = Vec::new();
            for i in 1..=10 {
                vars.push(Variable::continuous(format!("y{i:02}"), -5.0, 5.0)?);
            }
            for i in 1..=10 {
                vars.push(Variable::continuous(format!("z{i:02}"), -5.0, 5.0)?);
            }
            let space = SearchSpace::new(vars)?;
            Ok(Benchmark {
                name: name.to_string(),
                space,
                annotations: SpaceAnnotations {
                    algorithm_var: None,
                    feature_vars: (1..=10).map(|i| format!("y{i:02}")).collect(),
                    hp_vars: (1..=10).map(|i| format!("z{i:02}")).collect(),
                },
                func: Arc::new(|a| {
                    let mut total = 0.0;
                    for i in 1..=10 {
                        let y = a.f64(&format!("y{i:02}")).unwrap();
                        let z = a.f64(&format!("z{i:02}")).unwrap();
                        total += y * y + (z - 1.0) * (z - 1.0);
                    }
                    total
                }),
                known_best: Some(0.0),
            })
        }
        "cash3" => {
            // Three interchangeable "algorithms" over one shared Branin box;
            // arms a1 and a2 are the same landscape shifted up, so a sound
            // search should settle on a0 and then just optimize Branin.
            let space = SearchSpace::new(vec![
                Variable::categorical("arm", ["a0", "a1", "a2"])?,
                Variable::continuous("x1", -5.0, 10.0)?,
                Variable::continuous("x2", 0.0, 15.0)?,
            ])?;
            Ok(Benchmark {
                name: name.to_string(),
                space,
                annotations: SpaceAnnotations {
                    algorithm_var: Some("arm".to_string()),
                    feature_vars: vec!["x1".to_string()],
                    hp_vars: vec!["x2".to_string()],
                },
                func: Arc::new(|a| {
                    let offset = match a.label("arm").unwrap() {
                        "a0" => 0.0,
                        "a1" => 5.0,
                        _ => 10.0,
                    };
                    offset + branin(a.f64("x1").unwrap(), a.f64("x2").unwrap())
                }),
                known_best: Some(0.397887),
            })
        }
        other => Err(Error::UnknownBenchmark(other.to_string())),
    }
}

/// Points the grid oracle would visit for `space` at `resolution`,
/// saturating instead of overflowing for absurdly large grids.
pub fn grid_size(space: &SearchSpace, resolution: usize) -> u128 {
    space
        .variables()
        .iter()
        .map(|v| v.domain().lattice_size(resolution) as u128)
        .fold(1u128, |acc, n| acc.saturating_mul(n))
}

/// Hard cap on oracle grids; anything larger is refused up front.
pub const GRID_LIMIT: u128 = 100_000_000;

/// Evaluates `f` at every lattice point and returns the minimizer.
///
/// The last declared variable varies fastest and exact ties keep the point
/// visited first, so the result is deterministic for a given space.
pub fn grid_oracle(
    space: &SearchSpace,
    f: impl Fn(&Assignment) -> f64,
    resolution: usize,
) -> Result<(Assignment, f64)> {
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    let size = grid_size(space, resolution);
    if size > GRID_LIMIT {
        return Err(Error::GridTooLarge {
            size,
            limit: GRID_LIMIT,
        });
    }
    let axes: Vec<(String, Vec<Value>)> = space
        .variables()
        .iter()
        .map(|v| Ok((v.name().to_string(), v.domain().lattice(resolution)?)))
        .collect::<Result<_>>()?;

    let mut index = vec![0usize; axes.len()];
    let mut point = Assignment::new();
    for (name, values) in &axes {
        point.bind(name.clone(), values[0].clone());
    }
    let mut best_point = point.clone();
    let mut best_value = f(&point);
    loop {
        // Odometer increment; rebind only the axes whose digit changed.
        let mut axis = axes.len();
        loop {
            if axis == 0 {
                return Ok((best_point, best_value));
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < axes[axis].1.len() {
                point.bind(axes[axis].0.clone(), axes[axis].1[index[axis]].clone());
                break;
            }
            index[axis] = 0;
            point.bind(axes[axis].0.clone(), axes[axis].1[0].clone());
        }
        let value = f(&point);
        if value < best_value {
            best_value = value;
            best_point = point.clone();
        }
    }
}
