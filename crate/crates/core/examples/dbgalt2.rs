use planopt::{build_root, load_benchmark, Executor, ObjectiveSpec, PlanConfig, PlanNode, PlanParams};
use std::sync::Arc;

fn main() {
    let bench = load_benchmark("separable20").unwrap();
    for seed in [2u64, 7] {
        let plan = PlanNode::Alternating {
            left_vars: bench.annotations().feature_vars.clone(),
            right_vars: bench.annotations().hp_vars.clone(),
            left: None,
            right: None,
        };
        let params = PlanParams {
            budget: 400.0,
            seed,
            ..PlanParams::default()
        };
        let config = PlanConfig {
            space: bench.space().clone(),
            plan,
            params,
        };
        config.validate().unwrap();
        let objective = Arc::new(
            ObjectiveSpec::new(config.space.clone(), bench.evaluator())
                .with_cost_mode(config.params.budget_mode),
        );
        let root = build_root(&objective, &config.plan, &config.params).unwrap();
        let mut exec = Executor::new(root, config.params.budget).unwrap();
        let mut n = 0usize;
        while let Some(batch) = exec.step().unwrap() {
            n += batch.len();
            if n % 50 < batch.len() {
                let rep = exec.report();
                let counts: Vec<usize> = rep.children.iter().map(|(_, r)| r.ok_trials).collect();
                let (a, v) = exec.incumbent().unwrap();
                let ys: f64 = (1..=10)
                    .map(|i| a.f64(&format!("y{:02}", i)).unwrap().powi(2))
                    .sum();
                let zs: f64 = (1..=10)
                    .map(|i| (a.f64(&format!("z{:02}", i)).unwrap() - 1.0).powi(2))
                    .sum();
                println!(
                    "seed {seed} after {n:>3}: y {:>3} z {:>3} best {v:7.3} (y {ys:6.3} z {zs:6.3})",
                    counts[0], counts[1]
                );
            }
        }
    }
}
