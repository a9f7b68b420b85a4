//! Acceptance criteria 1–11. Runs as a plain binary so the PASS/FAIL lines
//! are always printed; exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use seedsynth::bench::{generate, Family};
use seedsynth::canonical::{canonicalize, feature_vector};
use seedsynth::circuit::{Circuit, CostEvaluator, Gate, QubitTopology};
use seedsynth::harness::{benchmark_suite, evaluate_holdout, optimize_circuit, OptimizeOptions, SeedStrategy};
use seedsynth::instantiate::{instantiate, InstantiationConfig, InstantiationCounter};
use seedsynth::linalg::random_unitary;
use seedsynth::partition::{partition, reassemble, verify_bound};
use seedsynth::recommend::{generate_dataset, pca_explained_variance, split_holdout, train_recommender, TrainConfig};
use seedsynth::synth::{seeded_synthesize_counted, synthesize, synthesize_counted, SearchConfig, Strategy};
use seedsynth::templates::{enumerate, TemplateCatalog};

const EPSILON: f64 = 1e-8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// U3 on every qubit, then `n_cnots` random CNOTs each followed by U3s; random angles.
fn random_circuit(n: usize, n_cnots: usize, rng: &mut ChaCha8Rng) -> Circuit {
    let mut c = Circuit::new(n);
    for q in 0..n {
        c.push_gate(Gate::U3 { qubit: q }).unwrap();
    }
    if n > 1 {
        for _ in 0..n_cnots {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            c.push_cnot(a, b).unwrap();
            c.push_gate(Gate::U3 { qubit: a }).unwrap();
            c.push_gate(Gate::U3 { qubit: b }).unwrap();
        }
    }
    let params = (0..c.num_params()).map(|_| rng.random_range(0.0..TAU)).collect();
    c.with_params(params).unwrap()
}

fn c1_phase_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..500 {
        let n = 1 + i % 3;
        let u = random_unitary(n, 1000 + i as u64).unwrap();
        let theta = rng.random_range(-TAU..TAU);
        let a = canonicalize(&u);
        let b = canonicalize(&u.with_phase(theta));
        worst = worst.max(a.matrix.matrix().max_abs_diff(b.matrix.matrix()).unwrap());
    }
    outcome(worst <= 1e-10, format!("max deviation {worst:.2e} (tol 1e-10)"))
}

fn c2_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for i in 0..100 {
            let c = random_circuit(n, rng.random_range(0..=4), &mut rng);
            let target = random_unitary(n, 7000 + 100 * n as u64 + i).unwrap();
            let eval = CostEvaluator::new(&c, &target).unwrap();
            let x = c.params().to_vec();
            let mut g = vec![0.0; x.len()];
            eval.cost_and_gradient(&x, &mut g);
            for j in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let fd = (eval.cost(&xp) - eval.cost(&xm)) / (2.0 * h);
                worst = worst.max((fd - g[j]).abs());
            }
        }
    }
    outcome(worst <= 1e-5, format!("max |analytic − FD| {worst:.2e} (tol 1e-5)"))
}

fn c3_self_realizability(catalog: &TemplateCatalog) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = InstantiationConfig { epsilon: EPSILON, max_restarts: 8, ..Default::default() };
    let counter = InstantiationCounter::new();
    let (mut worst, mut failures, mut max_restarts) = (0.0f64, 0, 0);
    for depth in 0..=4 {
        let pool: Vec<_> = catalog.templates().iter().filter(|t| t.cnot_count() == depth).collect();
        for _ in 0..50 {
            let t = pool[rng.random_range(0..pool.len())];
            let theta: Vec<f64> = (0..t.skeleton.num_params()).map(|_| rng.random_range(0.0..TAU)).collect();
            let target = t.skeleton.with_params(theta).unwrap().evaluate();
            let cfg = InstantiationConfig { rng_seed: rng.random(), ..cfg };
            let r = instantiate(&target, t, &cfg, &counter).unwrap();
            worst = worst.max(r.cost);
            max_restarts = max_restarts.max(r.restarts_used);
            if !(r.converged && r.cost <= EPSILON && r.restarts_used <= 8) {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!("250 pairs, {failures} failures, worst cost {worst:.2e}, max restarts {max_restarts}"),
    )
}

fn c4_known_decompositions() -> Outcome {
    let catalog = TemplateCatalog::standard(2, 8).unwrap();
    let cfg = SearchConfig::default();
    let mut cnot = Circuit::new(2);
    cnot.push_cnot(0, 1).unwrap();
    let mut swap = Circuit::new(2);
    for (a, b) in [(0, 1), (1, 0), (0, 1)] {
        swap.push_cnot(a, b).unwrap();
    }
    let got_cnot = synthesize(&cnot.evaluate(), &catalog, &cfg).map(|r| r.circuit.cnot_count());
    let got_swap = synthesize(&swap.evaluate(), &catalog, &cfg).map(|r| r.circuit.cnot_count());
    outcome(
        matches!(got_cnot, Ok(1)) && matches!(got_swap, Ok(3)),
        format!("CNOT → {got_cnot:?} CNOTs, SWAP → {got_swap:?} CNOTs"),
    )
}

/// Sequences over the two line edges, length ≤ k, no run of more than 3 equal edges.
fn brute_force_templates(k: usize) -> usize {
    let edges = [(0usize, 1usize), (1, 2)];
    let mut count = 0;
    for len in 0..=k {
        for code in 0..(1usize << len) {
            let seq: Vec<_> = (0..len).map(|i| edges[(code >> i) & 1]).collect();
            if seq.windows(4).all(|w| !(w[0] == w[1] && w[1] == w[2] && w[2] == w[3])) {
                count += 1;
            }
        }
    }
    count
}

fn c5_template_counts(standard: &TemplateCatalog) -> Outcome {
    let line = [QubitTopology::line(&[0, 1, 2]).unwrap()];
    let got: Vec<usize> = (0..=4).map(|k| enumerate(3, k, &line, 3).unwrap().len()).collect();
    let oracle: Vec<usize> = (0..=4).map(brute_force_templates).collect();
    outcome(
        got == oracle && got == [1, 3, 7, 15, 29],
        format!(
            "cumulative {got:?} vs brute force {oracle:?}; K=8 over 3 line topologies: {} (reference figure 1199)",
            standard.len()
        ),
    )
}

fn c6_seeded_dominance(catalog: &TemplateCatalog) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = SearchConfig::default();
    let pool: Vec<_> = catalog.templates().iter().filter(|t| (2..=4).contains(&t.cnot_count())).collect();
    let (mut root_total, mut seeded_total, mut violations) = (0usize, 0usize, 0);
    for _ in 0..30 {
        let t = pool[rng.random_range(0..pool.len())];
        let theta: Vec<f64> = (0..t.skeleton.num_params()).map(|_| rng.random_range(0.0..TAU)).collect();
        let target = t.skeleton.with_params(theta).unwrap().evaluate();
        let root_calls = InstantiationCounter::new();
        let seeded_calls = InstantiationCounter::new();
        let r = synthesize_counted(&target, catalog, &cfg, &root_calls);
        let s = seeded_synthesize_counted(&target, catalog, &[t.id], Strategy::Seeded, &cfg, &seeded_calls);
        if r.is_err() || s.is_err() || seeded_calls.get() >= root_calls.get() {
            violations += 1;
        }
        root_total += root_calls.get();
        seeded_total += seeded_calls.get();
    }
    let ratio = root_total as f64 / seeded_total.max(1) as f64;
    outcome(
        violations == 0 && ratio >= 3.0,
        format!("mean calls root {:.2} vs oracle-seeded {:.2} ({ratio:.2}×, need ≥ 3×), {violations} targets not strictly better",
            root_total as f64 / 30.0, seeded_total as f64 / 30.0),
    )
}

fn c7_error_bound(catalog: &TemplateCatalog) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let mut violations = 0;
    let mut worst_slack = f64::INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(4..=6);
        let c = random_circuit(n, rng.random_range(4..=16), &mut rng);
        let p = partition(&c, 3).unwrap();
        // perturbed block parameters stand in for approximate resynthesis
        let replacements: BTreeMap<usize, Circuit> = p
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let params = b.circuit.params().iter().map(|x| x + noise.sample(&mut rng)).collect();
                (i, b.circuit.with_params(params).unwrap())
            })
            .collect();
        let re = reassemble(&p, &replacements).unwrap();
        match verify_bound(&p, &re) {
            Ok(v) => {
                let exact = v.exact_distance.unwrap();
                worst_slack = worst_slack.min(v.total_bound - exact);
                if exact > v.total_bound + 1e-9 {
                    violations += 1;
                }
            }
            Err(_) => violations += 1,
        }
    }

    let bench = generate(Family::Tfim, 5, 2, 0).unwrap();
    let opts = OptimizeOptions { strategy: SeedStrategy::Root, ..Default::default() };
    let out = optimize_circuit(&bench, catalog, None, &opts).unwrap();
    let v = &out.verification;
    let blocks = out.partitioned.blocks.len();
    let e2e_exact = v.exact_distance.unwrap();
    let e2e_ok = out.metrics.failures() == 0 && v.total_cost <= EPSILON * blocks as f64 && e2e_exact <= v.total_bound + 1e-9;
    outcome(
        violations == 0 && e2e_ok,
        format!(
            "random circuits: {violations}/100 violations, min slack {worst_slack:.2e}; width-5 tfim: {blocks} blocks, \
             Σcost {:.2e} ≤ ε·blocks {:.2e}, exact distance {e2e_exact:.2e} ≤ Σdistance {:.2e}",
            v.total_cost,
            EPSILON * blocks as f64,
            v.total_bound
        ),
    )
}

fn c8_pca() -> Outcome {
    let mut feats = Vec::new();
    let mut seed = 1u64;
    'outer: loop {
        for w in 3..=8 {
            for fam in [Family::Qft, Family::Tfim] {
                if fam == Family::Qft && seed > 1 {
                    continue;
                }
                let c = generate(fam, w, 1 + seed as usize % 3, seed).unwrap();
                for b in partition(&c, 3).unwrap().blocks {
                    feats.push(feature_vector(&canonicalize(&b.local_unitary)));
                    if feats.len() == 2000 {
                        break 'outer;
                    }
                }
            }
        }
        seed += 1;
    }
    let haar: Vec<_> = (0..2000).map(|i| feature_vector(&canonicalize(&random_unitary(3, i).unwrap()))).collect();
    let blocks = pca_explained_variance(&feats).unwrap().cumulative_at(16);
    let random = pca_explained_variance(&haar).unwrap().cumulative_at(16);
    outcome(blocks > random, format!("cumulative@16: QFT/TFIM blocks {blocks:.4} vs Haar {random:.4}"))
}

fn c9_c10_recommender(catalog: &TemplateCatalog) -> (Outcome, Outcome) {
    let suite = benchmark_suite(&[3, 4, 5, 6], 12, 0).unwrap();
    let ds = generate_dataset(&suite, catalog, &SearchConfig::default()).unwrap();
    let holdout = [("qft".to_string(), 6), ("tfim".to_string(), 5), ("random_layers".to_string(), 4)];
    let (train, test) = split_holdout(&ds.samples, &holdout);
    let (model, _, _) = train_recommender(&train, catalog, &TrainConfig::default()).unwrap();
    let strategies = [SeedStrategy::Root, SeedStrategy::Random, SeedStrategy::Learned];
    let report = evaluate_holdout(&test, catalog, &model, &strategies, &OptimizeOptions::default()).unwrap();

    let chance = report.top3.chance.max(report.top3.masked_chance);
    let root = report.strategy(SeedStrategy::Root);
    let random = report.strategy(SeedStrategy::Random);
    let learned = report.strategy(SeedStrategy::Learned);
    let call_ratio = learned.mean_calls() / root.mean_calls();
    let c9 = outcome(
        report.top3.accuracy >= 5.0 * chance && call_ratio <= 0.75,
        format!(
            "{} samples ({} failed blocks), train {} / held out {}; top-3 {:.3} vs 5×chance {:.4}; \
             mean calls learned {:.2} / root {:.2} = {call_ratio:.2} (need ≤ 0.75)",
            ds.samples.len(),
            ds.failures.len(),
            train.len(),
            test.len(),
            report.top3.accuracy,
            5.0 * chance,
            learned.mean_calls(),
            root.mean_calls()
        ),
    );
    let (r_random, r_learned) = (random.relative_cnot_ratio(), learned.relative_cnot_ratio());
    let c10 = outcome(
        matches!((r_random, r_learned), (Some(a), Some(b)) if a >= b),
        format!("relative CNOT ratio random {r_random:?} vs learned {r_learned:?} (root {:?})", root.relative_cnot_ratio()),
    );
    (c9, c10)
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_seedsynth");
    let input = dir.path().join("in.qasm");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.success();
    let ok = run(&["bench-gen", "--family", "tfim", "--width", "4", "--depth", "2", "--seed", "3", "--out", input.to_str().unwrap()]);
    let mut outputs = Vec::new();
    for i in 0..2 {
        let q = dir.path().join(format!("out{i}.qasm"));
        let m = dir.path().join(format!("metrics{i}.csv"));
        let success = run(&[
            "optimize", "--input", input.to_str().unwrap(), "--output", q.to_str().unwrap(), "--metrics",
            m.to_str().unwrap(), "--strategy", "random", "--seed", "11",
        ]);
        outputs.push((success, std::fs::read(&q).unwrap_or_default(), std::fs::read(&m).unwrap_or_default()));
    }
    let same = outputs[0] == outputs[1];
    outcome(
        ok && outputs[0].0 && same && !outputs[0].1.is_empty(),
        format!("two optimize runs: QASM and CSV identical = {same}"),
    )
}

fn main() -> ExitCode {
    let catalog = TemplateCatalog::standard(3, 8).unwrap();
    let mut all_pass = true;
    let mut report = |id: &str, limit: Duration, f: &mut dyn FnMut() -> Vec<Outcome>| {
        let start = Instant::now();
        let results = f();
        let elapsed = start.elapsed();
        for (k, o) in results.into_iter().enumerate() {
            let label = if k == 0 { id.to_string() } else { (id.parse::<usize>().unwrap() + k).to_string() };
            let pass = o.pass && elapsed <= limit;
            all_pass &= pass;
            println!(
                "criterion {label:>2}: {} — {} [{:.1}s, limit {}s]",
                if pass { "PASS" } else { "FAIL" },
                o.detail,
                elapsed.as_secs_f64(),
                limit.as_secs()
            );
        }
    };
    report("1", Duration::from_secs(10), &mut || vec![c1_phase_invariance()]);
    report("2", Duration::from_secs(60), &mut || vec![c2_gradients()]);
    report("3", Duration::from_secs(300), &mut || vec![c3_self_realizability(&catalog)]);
    report("4", Duration::from_secs(120), &mut || vec![c4_known_decompositions()]);
    report("5", Duration::from_secs(1), &mut || vec![c5_template_counts(&catalog)]);
    report("6", Duration::from_secs(600), &mut || vec![c6_seeded_dominance(&catalog)]);
    report("7", Duration::from_secs(600), &mut || vec![c7_error_bound(&catalog)]);
    report("8", Duration::from_secs(300), &mut || vec![c8_pca()]);
    report("9", Duration::from_secs(1800), &mut || {
        let (a, b) = c9_c10_recommender(&catalog);
        vec![a, b]
    });
    report("11", Duration::from_secs(600), &mut || vec![c11_determinism()]);
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
