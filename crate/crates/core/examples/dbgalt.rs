use planopt::{execute_plan, load_benchmark, PlanConfig, PlanNode, PlanParams};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn main() {
    let bench = load_benchmark("separable20").unwrap();
    let mut joints = Vec::new();
    let mut alts = Vec::new();
    for seed in 0u64..10 {
        let params = PlanParams {
            budget: 400.0,
            seed,
            ..PlanParams::default()
        };
        for (name, plan) in [
            (
                "joint",
                PlanNode::Joint {
                    vars: bench.space().names().map(String::from).collect(),
                },
            ),
            (
                "alt",
                PlanNode::Alternating {
                    left_vars: bench.annotations().feature_vars.clone(),
                    right_vars: bench.annotations().hp_vars.clone(),
                    left: None,
                    right: None,
                },
            ),
        ] {
            let config = PlanConfig {
                space: bench.space().clone(),
                plan,
                params: params.clone(),
            };
            let (report, _) = execute_plan(&config, bench.evaluator(), None).unwrap();
            let a = report.best_assignment.clone().unwrap();
            let v = report.best_value.unwrap();
            let ys: f64 = (1..=10)
                .map(|i| a.f64(&format!("y{:02}", i)).unwrap().powi(2))
                .sum();
            let zs: f64 = (1..=10)
                .map(|i| (a.f64(&format!("z{:02}", i)).unwrap() - 1.0).powi(2))
                .sum();
            println!("{name} seed {seed}: {v:8.3}  (y {ys:6.3}  z {zs:6.3})");
            if name == "joint" {
                joints.push(v);
            } else {
                alts.push(v);
            }
        }
    }
    println!("joint median {:.3}", median(joints));
    println!("alt   median {:.3}", median(alts));
}
