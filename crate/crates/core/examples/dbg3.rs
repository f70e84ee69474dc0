//! Ceiling probe: JointBlock alone on clean 10-dim quadratics, 200 trials.

use std::sync::Arc;

use planopt::block::{Block, StepContext};
use planopt::joint::{JointBlock, JointConfig};
use planopt::objective::{ObjectiveSpec, PureEvaluator};
use planopt::space::{SearchSpace, Subgoal, Variable};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn run(shift: f64, trials: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for seed in 0..10u64 {
        let vars: Vec<Variable> = (0..10)
            .map(|i| Variable::continuous(format!("v{i}"), -5.0, 5.0).unwrap())
            .collect();
        let space = SearchSpace::new(vars).unwrap();
        let objective = Arc::new(ObjectiveSpec::new(
            space.clone(),
            Arc::new(PureEvaluator::new(move |a| {
                (0..10)
                    .map(|i| {
                        let x = a.f64(&format!("v{i}")).unwrap();
                        (x - shift) * (x - shift)
                    })
                    .sum()
            })),
        ));
        let mut b = JointBlock::new(
            objective,
            space,
            Subgoal::empty(),
            JointConfig::default(),
            seed,
        )
        .unwrap();
        let mut ctx = StepContext::new(f64::INFINITY);
        for _ in 0..trials {
            b.do_next(&mut ctx).unwrap();
        }
        out.push(b.current_best().unwrap().1);
    }
    out
}

fn main() {
    for trials in [200usize] {
        let zero = run(0.0, trials);
        let one = run(1.0, trials);
        println!(
            "sphere(0)  {trials} trials: median {:.3}  vals {:?}",
            median(zero.clone()),
            zero.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
        println!(
            "sphere(1)  {trials} trials: median {:.3}  vals {:?}",
            median(one.clone()),
            one.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
}
