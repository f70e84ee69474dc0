//! End-to-end acceptance checks for the whole engine, one test per
//! criterion. Each test re-derives its expectations independently (by
//! quadrature, by brute force, or from documented landscape facts) rather
//! than trusting the code under test, and the time-sensitive ones assert
//! wall-clock ceilings that hold comfortably on one CPU.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use planopt::{
    eliminate_dominated, execute_plan, expected_improvement,
    improvement_rate_from_history, load_benchmark, sample_uniform, AlternatingBlock, Block,
    BlockStructure, BoundParams, ConditioningBlock, Error, Evaluator, History, JointBlock,
    JointConfig, ObjectiveSpec, PlanConfig, PlanNode, PlanParams, PureEvaluator, SearchSpace,
    StepContext, Subgoal, SubprocessEvaluator, Trial, TrialStatus, UtilityBound, Value, Variable,
};

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Standard normal density, written out so this file does not lean on the
/// library's own normal helpers.
fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement by Simpson quadrature over the truncated normal:
/// EI = sigma * integral of (gamma - z) phi(z) dz for z below gamma.
fn ei_by_quadrature(mu: f64, sigma: f64, best: f64) -> f64 {
    let gamma = (best - mu) / sigma;
    let hi = gamma.min(12.0);
    let lo = -12.0;
    if hi <= lo {
        return 0.0;
    }
    let n = 20_000usize; // even
    let h = (hi - lo) / n as f64;
    let f = |z: f64| (gamma - z) * phi(z);
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    sigma * acc * h / 3.0
}

#[test]
fn criterion_01_closed_form_ei_matches_quadrature_on_a_grid() {
    let start = Instant::now();
    let mus: Vec<f64> = (0..10).map(|i| -3.0 + 6.0 * i as f64 / 9.0).collect();
    let sigmas: Vec<f64> = (0..10)
        .map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 9.0))
        .collect();
    let bests = [-2.0, -0.5, 0.0, 0.5, 2.0];

    let mut checked = 0;
    let mut worst = 0.0f64;
    for &mu in &mus {
        for &sigma in &sigmas {
            for &best in &bests {
                let closed = expected_improvement(mu, sigma, best).unwrap();
                let numeric = ei_by_quadrature(mu, sigma, best);
                let gap = (closed - numeric).abs();
                worst = worst.max(gap);
                assert!(
                    gap <= 1e-6,
                    "EI(mu={mu}, sigma={sigma}, best={best}): closed {closed} vs quadrature {numeric}"
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 500);

    // Degenerate predictions have an exact closed form of their own.
    assert_eq!(expected_improvement(0.3, 0.0, 0.5).unwrap(), 0.2);
    assert_eq!(expected_improvement(0.7, 0.0, 0.5).unwrap(), 0.0);
    assert!(expected_improvement(0.0, -1.0, 0.0).is_err());

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    println!("criterion 1: 500 EI grid points within 1e-6 of quadrature, worst gap {worst:.2e}, {elapsed:?}");
}

#[test]
fn criterion_02_elimination_agrees_with_brute_force_on_random_bounds() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xE11);
    for case in 0..1000 {
        let arms = rng.random_range(1..=8usize);
        let mut bounds = std::collections::BTreeMap::new();
        for i in 0..arms {
            let lower: f64 = rng.random_range(-5.0..5.0);
            let upper = lower + rng.random_range(0.0..5.0);
            bounds.insert(format!("arm{i}"), UtilityBound { lower, upper });
        }

        let fast = eliminate_dominated(&bounds);

        // Definition, spelled out pairwise.
        let items: Vec<(&String, &UtilityBound)> = bounds.iter().collect();
        let mut slow = std::collections::BTreeSet::new();
        for (key, bound) in &items {
            for (other, b) in &items {
                if other != key && bound.upper < b.lower {
                    slow.insert((*key).clone());
                }
            }
        }
        assert_eq!(fast, slow, "case {case} disagreed for {bounds:?}");

        // The arm with the highest upper bound can never be eliminated, so
        // at least one arm always stays active.
        let tallest = bounds
            .iter()
            .max_by(|a, b| a.1.upper.partial_cmp(&b.1.upper).unwrap())
            .unwrap()
            .0;
        assert!(!fast.contains(tallest));
        assert!(fast.len() < arms);
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("criterion 2: 1000 random bound maps matched brute force, {elapsed:?}");
}

#[test]
fn criterion_03_improvement_rate_matches_direct_rescoring() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3E1);
    for _ in 0..500 {
        let len = rng.random_range(1..=40usize);
        let mut history = History::new();
        let mut ok_values = Vec::new();
        for _ in 0..len {
            let value: f64 = rng.random_range(0.0..1.0);
            let ok = rng.random_range(0.0..1.0) < 0.8;
            history.record(Trial {
                assignment: planopt::Assignment::new(),
                value,
                cost: 1.0,
                fidelity: 1.0,
                status: if ok { TrialStatus::Ok } else { TrialStatus::Failed },
            });
            if ok {
                ok_values.push(value);
            }
        }

        let got = improvement_rate_from_history(&history);
        if ok_values.is_empty() {
            assert!(matches!(got, Err(Error::EmptyHistory(_))));
            continue;
        }
        let got = got.unwrap().per_step;

        // Direct definition: average positive incumbent delta per trial
        // after the first.
        let expected = if ok_values.len() < 2 {
            0.0
        } else {
            let mut best = ok_values[0];
            let mut sum = 0.0;
            for &v in &ok_values[1..] {
                sum += (best - v).max(0.0);
                best = best.min(v);
            }
            sum / (ok_values.len() - 1) as f64
        };
        assert!(
            (got - expected).abs() <= 1e-12,
            "rate {got} vs rescored {expected} on {ok_values:?}"
        );
    }
    println!("criterion 3: 500 random histories rescored within 1e-12");
}

fn quadratic_objective() -> Arc<ObjectiveSpec> {
    let space = SearchSpace::new(vec![
        Variable::continuous("x", -2.0, 2.0).unwrap(),
        Variable::continuous("y", -2.0, 2.0).unwrap(),
    ])
    .unwrap();
    Arc::new(ObjectiveSpec::new(
        space,
        Arc::new(PureEvaluator::new(|a| {
            a.f64("x").unwrap().powi(2) + a.f64("y").unwrap().powi(2)
        })),
    ))
}

fn joint_leaf(objective: &Arc<ObjectiveSpec>, keep: &[&str], seed: u64) -> Box<dyn Block> {
    let space = objective.space().restricted_to(keep.iter().copied()).unwrap();
    let mut fixed = planopt::Assignment::new();
    for v in objective.space().variables() {
        if !keep.contains(&v.name()) {
            fixed.bind(v.name().to_string(), v.domain().midpoint());
        }
    }
    let subgoal = Subgoal::new(objective.space(), fixed).unwrap();
    Box::new(JointBlock::new(Arc::clone(objective), space, subgoal, JointConfig::default(), seed).unwrap())
}

#[test]
fn criterion_04_composite_blocks_produce_the_documented_trial_counts() {
    // Conditioning: one step drives every arm `rounds` times.
    let space = SearchSpace::new(vec![
        Variable::categorical("c", ["u", "v", "w"]).unwrap(),
        Variable::continuous("x", 0.0, 1.0).unwrap(),
    ])
    .unwrap();
    let objective = Arc::new(ObjectiveSpec::new(
        space,
        Arc::new(PureEvaluator::new(|a| a.f64("x").unwrap())),
    ));
    let mut arms: Vec<(String, Box<dyn Block>)> = Vec::new();
    for (i, label) in ["u", "v", "w"].iter().enumerate() {
        let subgoal = Subgoal::new(
            objective.space(),
            planopt::Assignment::of([("c", Value::Cat(label.to_string()))]),
        )
        .unwrap();
        let reduced = planopt::substitute(objective.space(), &subgoal).unwrap();
        arms.push((
            label.to_string(),
            Box::new(
                JointBlock::new(
                    Arc::clone(&objective),
                    reduced,
                    subgoal,
                    JointConfig::default(),
                    i as u64,
                )
                .unwrap(),
            ),
        ));
    }
    let mut cond = ConditioningBlock::new("c", arms, 5, BoundParams::default()).unwrap();
    let batch = cond.do_next(&mut StepContext::new(f64::INFINITY)).unwrap();
    assert_eq!(batch.len(), 15, "3 arms x 5 rounds");

    // Alternating: seeding runs 2 * rounds evaluations at once, and every
    // later step runs exactly one.
    let objective = quadratic_objective();
    let mut alt = AlternatingBlock::new(
        vec!["x".to_string()],
        joint_leaf(&objective, &["x"], 1),
        vec!["y".to_string()],
        joint_leaf(&objective, &["y"], 2),
        5,
        BoundParams::default(),
    )
    .unwrap();
    let seeding = alt.do_next(&mut StepContext::new(f64::INFINITY)).unwrap();
    assert_eq!(seeding.len(), 10, "5 rounds x 2 sides");
    let follow_up = alt.do_next(&mut StepContext::new(f64::INFINITY)).unwrap();
    assert_eq!(follow_up.len(), 1);
    println!("criterion 4: conditioning 15, alternating 10 then 1");
}

#[test]
fn criterion_05_surrogate_search_beats_random_on_branin() {
    let start = Instant::now();
    let bench = load_benchmark("branin").unwrap();
    let seeds: Vec<u64> = (0..10).collect();

    let mut bo = Vec::new();
    for &seed in &seeds {
        let config = PlanConfig {
            space: bench.space().clone(),
            plan: PlanNode::joint(),
            params: PlanParams {
                budget: 100.0,
                seed,
                ..PlanParams::default()
            },
        };
        let (report, _) = execute_plan(&config, bench.evaluator(), None).unwrap();
        assert_eq!(report.trials, 100);
        bo.push(report.best_value.unwrap());
    }

    let mut random = Vec::new();
    for &seed in &seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let best = sample_uniform(bench.space(), &mut rng, 100)
            .unwrap()
            .iter()
            .map(|a| bench.value(a))
            .fold(f64::INFINITY, f64::min);
        random.push(best);
    }

    let bo_median = median(&mut bo);
    let random_median = median(&mut random);
    let elapsed = start.elapsed();
    assert!(
        bo_median <= 0.8,
        "BO median {bo_median} exceeds 0.8 (per-seed: {bo:?})"
    );
    assert!(
        bo_median < random_median,
        "BO median {bo_median} not better than random {random_median}"
    );
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!(
        "criterion 5: branin/100 medians, surrogate {bo_median:.4} vs random {random_median:.4}, {elapsed:?}"
    );
}

#[test]
fn criterion_06_conditioning_retires_the_shifted_arms_on_cash3() {
    let start = Instant::now();
    let bench = load_benchmark("cash3").unwrap();
    let mut good_seeds = 0;
    for seed in 0..10u64 {
        let config = PlanConfig {
            space: bench.space().clone(),
            plan: PlanNode::Conditioning {
                var: "arm".to_string(),
                cutpoints: None,
                child: None,
            },
            params: PlanParams {
                budget: 300.0,
                seed,
                ..PlanParams::default()
            },
        };
        let (report, _) = execute_plan(&config, bench.evaluator(), None).unwrap();
        let node = report.structure.find_conditioning("arm").unwrap();
        let BlockStructure::Conditioning { eliminated, .. } = &node.structure else {
            panic!("conditioning node expected");
        };
        let both_gone =
            eliminated.contains(&"a1".to_string()) && eliminated.contains(&"a2".to_string());
        let best_is_good = report.best_value.is_some_and(|v| v <= 1.0)
            && report
                .best_assignment
                .as_ref()
                .is_some_and(|a| a.label("arm").unwrap() == "a0");
        if both_gone && best_is_good {
            good_seeds += 1;
        } else {
            println!(
                "seed {seed}: eliminated={eliminated:?} best={:?}",
                report.best_value
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(
        good_seeds >= 9,
        "only {good_seeds}/10 seeds retired a1+a2 and solved a0"
    );
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!("criterion 6: {good_seeds}/10 cash3 seeds eliminated a1+a2 with best <= 1.0, {elapsed:?}");
}

#[test]
fn criterion_07_alternating_beats_joint_on_a_separable_space() {
    let start = Instant::now();
    let bench = load_benchmark("separable20").unwrap();
    let alternating = PlanNode::Alternating {
        left_vars: bench.annotations().feature_vars.clone(),
        right_vars: bench.annotations().hp_vars.clone(),
        left: None,
        right: None,
    };

    let run_plan = |plan: &PlanNode| -> Vec<f64> {
        (0..10u64)
            .map(|seed| {
                let config = PlanConfig {
                    space: bench.space().clone(),
                    plan: plan.clone(),
                    params: PlanParams {
                        budget: 400.0,
                        seed,
                        ..PlanParams::default()
                    },
                };
                let (report, _) = execute_plan(&config, bench.evaluator(), None).unwrap();
                report.best_value.unwrap()
            })
            .collect()
    };

    let mut joint = run_plan(&PlanNode::joint());
    let mut alt = run_plan(&alternating);
    let joint_median = median(&mut joint);
    let alt_median = median(&mut alt);
    let elapsed = start.elapsed();
    assert!(
        alt_median < joint_median,
        "alternating median {alt_median} not below joint {joint_median}"
    );
    println!(
        "criterion 7: separable20/400 medians, alternating {alt_median:.3} vs joint {joint_median:.3}, {elapsed:?}"
    );
}

#[test]
fn criterion_08_decomposed_plans_rank_at_least_as_well_as_joint_on_cash3() {
    let start = Instant::now();
    let bench = load_benchmark("cash3").unwrap();
    let plans = planopt::enumerate_coarse_plans(bench.annotations());
    assert_eq!(plans.len(), 5);
    let params = PlanParams {
        budget: 300.0,
        ..PlanParams::default()
    };
    let seeds: Vec<u64> = (0..10).collect();
    let comparison =
        planopt::compare_plans(bench.space(), &plans, bench.evaluator(), &params, &seeds)
            .unwrap();

    let rank_of = |name: &str| -> f64 {
        comparison
            .summaries
            .iter()
            .find(|s| s.plan == name)
            .unwrap_or_else(|| panic!("missing summary for {name}"))
            .mean_rank
    };
    let nested = rank_of("per_algorithm_alternating");
    let joint = rank_of("joint");
    let elapsed = start.elapsed();
    for s in &comparison.summaries {
        println!(
            "  {:<35} mean_rank {:.2}  median_best {:.4}",
            s.plan, s.mean_rank, s.median_best
        );
    }
    assert!(
        nested <= joint,
        "nested decomposition ranked {nested:.2}, joint {joint:.2}"
    );
    println!("criterion 8: per_algorithm_alternating rank {nested:.2} <= joint rank {joint:.2}, {elapsed:?}");
}

#[test]
fn criterion_09_count_mode_replays_are_bit_identical() {
    let bench = load_benchmark("cash3").unwrap();
    let run = || {
        let config = PlanConfig {
            space: bench.space().clone(),
            plan: PlanNode::Conditioning {
                var: "arm".to_string(),
                cutpoints: None,
                child: Some(Box::new(PlanNode::Alternating {
                    left_vars: vec!["x1".to_string()],
                    right_vars: vec!["x2".to_string()],
                    left: None,
                    right: None,
                })),
            },
            params: PlanParams {
                budget: 120.0,
                seed: 42,
                ..PlanParams::default()
            },
        };
        execute_plan(&config, bench.evaluator(), None).unwrap()
    };
    let (report_a, trajectory_a) = run();
    let (report_b, trajectory_b) = run();

    assert_eq!(report_a.trials, 120);
    assert_eq!(report_a.config_digest, report_b.config_digest);
    assert_eq!(trajectory_a.len(), trajectory_b.len());
    for (a, b) in trajectory_a.iter().zip(&trajectory_b) {
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.spent.to_bits(), b.spent.to_bits());
        assert_eq!(a.status, b.status);
    }
    assert_eq!(
        report_a.best_value.unwrap().to_bits(),
        report_b.best_value.unwrap().to_bits()
    );
    println!("criterion 9: 120-trial replay identical to the bit");
}

fn echo_space() -> SearchSpace {
    SearchSpace::new(vec![
        Variable::continuous("x", -1.0, 1.0).unwrap(),
        Variable::integer("k", 0, 4).unwrap(),
        Variable::categorical("tag", ["a", "b"]).unwrap(),
    ])
    .unwrap()
}

#[test]
fn criterion_10_subprocess_objectives_survive_healthy_and_crashing_children() {
    let exe = env!("CARGO_BIN_EXE_echo_objective").to_string();

    // Healthy child: 50 trials, not a single failure, values are the sums
    // the protocol promises.
    let config = PlanConfig {
        space: echo_space(),
        plan: PlanNode::joint(),
        params: PlanParams {
            budget: 50.0,
            seed: 7,
            ..PlanParams::default()
        },
    };
    let evaluator: Arc<dyn Evaluator> = Arc::new(
        SubprocessEvaluator::spawn(&[exe.clone(), "unused-dataset.csv".to_string()]).unwrap(),
    );
    let (report, trajectory) = execute_plan(&config, evaluator, None).unwrap();
    assert_eq!(report.trials, 50);
    assert_eq!(report.ok_trials, 50);
    assert_eq!(report.failed_trials, 0);
    assert_eq!(report.timeout_trials, 0);
    for point in &trajectory {
        let expected = point.assignment.f64("x").unwrap() + point.assignment.f64("k").unwrap();
        assert!((point.value - expected).abs() < 1e-12);
    }

    // Crashing child: the run must finish its budget, keep the 20 answers
    // it got, and penalize the rest rather than abort.
    let config = PlanConfig {
        space: echo_space(),
        plan: PlanNode::joint(),
        params: PlanParams {
            budget: 40.0,
            seed: 7,
            ..PlanParams::default()
        },
    };
    let evaluator: Arc<dyn Evaluator> = Arc::new(
        SubprocessEvaluator::spawn(&[
            exe,
            "--crash-after".to_string(),
            "20".to_string(),
        ])
        .unwrap(),
    );
    let (report, trajectory) = execute_plan(&config, evaluator, None).unwrap();
    assert_eq!(report.trials, 40, "the run must complete its budget");
    assert_eq!(report.ok_trials, 20);
    assert_eq!(report.failed_trials, 20);

    let ok_values: Vec<f64> = trajectory
        .iter()
        .filter(|p| p.status == TrialStatus::Ok)
        .map(|p| p.value)
        .collect();
    let worst = ok_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = ok_values.iter().copied().fold(f64::INFINITY, f64::min);
    let expected_penalty = worst + 0.1 * (worst - best);
    for point in trajectory.iter().filter(|p| p.status == TrialStatus::Failed) {
        assert!(
            (point.value - expected_penalty).abs() < 1e-12,
            "failed trial valued {} instead of the {expected_penalty} penalty",
            point.value
        );
        assert!(point.value > worst, "penalty must be strictly unattractive");
    }
    println!("criterion 10: echo child clean over 50 trials; crash at 20 penalized correctly");
}
