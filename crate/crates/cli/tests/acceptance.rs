//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::Command;
use std::time::Instant;

use common::*;
use robsd::bench::{generate_instance, performance_profile, GeneratorSpec};
use robsd::oracles::{HeldKarpOracle, KruskalOracle};
use robsd::sd::{example1_problem, example2_problem, reproduce_example2};
use robsd::*;

const STOP_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mst_specs() -> Vec<GeneratorSpec> {
    (0..50u64)
        .map(|i| {
            let nodes = [4, 5, 6][(i % 3) as usize];
            let m = [2, 5, 20][((i / 3) % 3) as usize];
            let beta = [1.0, 2.0, 3.0][((i / 9) % 3) as usize];
            GeneratorSpec::new(ProblemKind::Mst, nodes, m, beta, 1000 + i)
        })
        .collect()
}

fn tsp_specs() -> Vec<GeneratorSpec> {
    (0..10u64)
        .map(|i| GeneratorSpec::new(ProblemKind::Tsp, 8, 5, [1.0, 2.0, 3.0][(i % 3) as usize], 2000 + i))
        .collect()
}

fn criterion1() -> Outcome {
    let mut worst: f64 = 0.0;
    for spec in mst_specs() {
        let inst = generate_instance::<f64>(&spec).unwrap();
        let oracle = KruskalOracle::for_instance(&inst).unwrap();
        let res = solve_bnb(&inst, &oracle, &BnbConfig::default()).unwrap();
        let opt = exhaustive_min(&inst.scenarios, &brute_spanning_trees(spec.nodes));
        if res.status != BnbStatus::Solved {
            return outcome(false, format!("{} not solved", spec.name()));
        }
        worst = worst.max((res.value - opt).abs());
    }
    outcome(
        worst <= 1e-6,
        format!("50 MST instances, max |bnb - brute force| = {worst:.2e} (tol 1e-6)"),
    )
}

/// Root relaxation vs the master over every vertex; also returns the lb streams.
fn criterion2(streams: &mut Vec<(Vec<f64>, f64)>) -> Outcome {
    let mut worst_mst: f64 = 0.0;
    let mut worst_tsp: f64 = 0.0;
    let tours = brute_tours(8);
    for (spec, tsp) in mst_specs()
        .into_iter()
        .map(|s| (s, false))
        .chain(tsp_specs().into_iter().map(|s| (s, true)))
    {
        let inst = generate_instance::<f64>(&spec).unwrap();
        let all = if tsp {
            tours.clone()
        } else {
            brute_spanning_trees(spec.nodes)
        };
        let res = if tsp {
            run_sd(
                &HeldKarpOracle::for_instance(&inst).unwrap(),
                &inst.scenarios,
                &[],
                &SdConfig::default(),
            )
        } else {
            run_sd(
                &KruskalOracle::for_instance(&inst).unwrap(),
                &inst.scenarios,
                &[],
                &SdConfig::default(),
            )
        }
        .unwrap();
        let full = solve_master(
            &ActiveSet::from_vertices(&all, &inst.scenarios),
            &inst.scenarios,
            &MasterOptions::default(),
        )
        .unwrap();
        let d = (res.value - full.z).abs();
        if tsp {
            worst_tsp = worst_tsp.max(d);
        } else {
            worst_mst = worst_mst.max(d);
        }
        if res.status != SdStatus::Optimal {
            return outcome(false, format!("{} ended {:?}", spec.name(), res.status));
        }
        streams.push((res.lb_history.clone(), res.value));
    }
    outcome(
        worst_mst <= 1e-6 && worst_tsp <= 1e-6 && tours.len() == 2520,
        format!("max |root - full master|: MST {worst_mst:.2e}, TSP(8) {worst_tsp:.2e} (tol 1e-6)"),
    )
}

fn criterion3() -> Outcome {
    let (u, oracle) = example1_problem();
    let start = [Vertex::zeros(2)];
    let d1 = SdConfig {
        drop_rule: DropRule::D1,
        dual_preference: vec![0, 1],
        max_iterations: 50,
        ..SdConfig::default()
    };
    let cyc = run_sd(&oracle, &u, &start, &d1).unwrap();
    let mut final_set = cyc.final_set.vertices().to_vec();
    final_set.sort();
    let v2 = vec![Vertex::zeros(2), Vertex::from_ones(2, &[1])];
    let d0 = SdConfig {
        drop_rule: DropRule::D0,
        ..d1.clone()
    };
    let opt = run_sd(&oracle, &u, &start, &d0).unwrap();
    let pass = cyc.status == SdStatus::CycleDetected
        && final_set == v2
        && opt.status == SdStatus::Optimal
        && opt.value.abs() <= 1e-9
        && opt.iterations <= 4;
    outcome(
        pass,
        format!(
            "D1: {:?} after {} iterations with set {{{}}}; D0: {:?} value {} in {} iterations",
            cyc.status,
            cyc.iterations,
            final_set
                .iter()
                .map(|v| format!("({v})"))
                .collect::<Vec<_>>()
                .join(", "),
            opt.status,
            opt.value,
            opt.iterations
        ),
    )
}

fn criterion4() -> Outcome {
    let trace = reproduce_example2(DropRule::D1, 0).unwrap();
    let v1 = vec![Vertex::from_ones(2, &[0, 1])];
    let pass = trace.steps.len() >= 2
        && trace.steps[0].active == v1
        && trace.steps[0].x_hat == Vertex::from_ones(2, &[1])
        && trace.steps[1].active.len() == 2
        && trace.steps[1].retained == v1;
    outcome(
        pass,
        format!(
            "V1 = {:?}, V after the k=2 drop = {:?}",
            trace
                .steps
                .first()
                .map(|s| s.active.iter().map(|v| v.to_string()).collect::<Vec<_>>()),
            trace
                .steps
                .get(1)
                .map(|s| s.retained.iter().map(|v| v.to_string()).collect::<Vec<_>>())
        ),
    )
}

fn criterion5() -> Outcome {
    let mut fails = Vec::new();
    for (name, (u, oracle), start, d0_value) in [
        ("example 1", example1_problem(), Vertex::zeros(2), 0.0),
        ("example 2", example2_problem(), Vertex::from_ones(2, &[0, 1]), 0.5),
    ] {
        let d0 = run_sd(&oracle, &u, std::slice::from_ref(&start), &SdConfig::default()).unwrap();
        if (d0.value - d0_value).abs() > 1e-6 {
            fails.push(format!("{name}: D0 value {}", d0.value));
        }
        let mut ok = 0;
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let cfg = SdConfig {
                drop_rule: DropRule::D1,
                perturbation: 1e-4,
                rng_seed: seed,
                max_iterations: 1000,
                ..SdConfig::default()
            };
            let res = run_sd(&oracle, &u, std::slice::from_ref(&start), &cfg).unwrap();
            worst = worst.max((res.value - d0.value).abs());
            if res.status == SdStatus::Optimal && (res.value - d0.value).abs() <= 1e-3 {
                ok += 1;
            }
        }
        if ok < 100 {
            fails.push(format!("{name}: {ok}/100 optimal within 1e-3 (worst {worst:.2e})"));
        }
    }
    let detail = if fails.is_empty() {
        "both examples: 100/100 seeds OPTIMAL, values within 1e-3 of D0 (0 and 0.5)".to_string()
    } else {
        fails.join("; ")
    };
    outcome(fails.is_empty(), detail)
}

fn criterion6(streams: &[(Vec<f64>, f64)]) -> Outcome {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_gap: f64 = 0.0;
    for (lbs, value) in streams {
        for &lb in lbs {
            worst_excess = worst_excess.max(lb - value);
        }
        worst_gap = worst_gap.max((lbs.last().copied().unwrap_or(f64::NAN) - value).abs());
    }
    outcome(
        worst_excess <= 1e-6 && worst_gap <= STOP_TOL,
        format!(
            "{} runs: max(lb - value) = {worst_excess:.2e}, max |final lb - value| = {worst_gap:.2e}",
            streams.len()
        ),
    )
}

fn criterion7() -> Outcome {
    let mut r = rng(77);
    for pair in 0..200 {
        let k = 1 + (pair * 7) % 30;
        let m = 1 + (pair * 13) % 50;
        let u = random_scenarios(&mut r, 10, m);
        let vs = random_vertices(&mut r, 10, k);
        let set = ActiveSet::from_vertices(&vs, &u);
        let sol = match solve_master(&set, &u, &MasterOptions::default()) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("pair {pair}: {e}")),
        };
        if let Err(e) = check_certificates(&sol, set.vertices(), &u, &mut r, 1e-6) {
            return outcome(false, format!("pair {pair} (|V|={k}, m={m}): {e}"));
        }
    }
    outcome(
        true,
        "200 random (V, U) pairs, |V| <= 30, m <= 50: all certificates within 1e-6",
    )
}

fn criterion8() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let spec = GeneratorSpec::new(
            ProblemKind::Mst,
            5 + (i % 3) as usize,
            [5, 20][(i % 2) as usize],
            2.0,
            3000 + i,
        );
        let inst = generate_instance::<f64>(&spec).unwrap();
        let oracle = KruskalOracle::for_instance(&inst).unwrap();
        let a = run_sd(&oracle, &inst.scenarios, &[], &SdConfig::with_rule(DropRule::D0)).unwrap();
        let b = run_sd(&oracle, &inst.scenarios, &[], &SdConfig::with_rule(DropRule::D2)).unwrap();
        if a.status != SdStatus::Optimal || b.status != SdStatus::Optimal {
            return outcome(false, format!("{}: {:?} / {:?}", spec.name(), a.status, b.status));
        }
        worst = worst.max((a.value - b.value).abs());
    }
    outcome(
        worst <= 1e-5,
        format!("50 instances, max |D0 - D2| = {worst:.2e} (tol 1e-5)"),
    )
}

fn criterion9(times: &mut Vec<Vec<Option<f64>>>) -> Outcome {
    let mut its = [0usize; 2];
    let mut inversions = 0;
    let mut mismatch = None;
    *times = vec![Vec::new(), Vec::new()];
    for i in 0..20u64 {
        let spec = GeneratorSpec::new(ProblemKind::Mst, 10, 50, [1.0, 2.0, 3.0][(i % 3) as usize], 4000 + i);
        let inst = generate_instance::<f64>(&spec).unwrap();
        let oracle = KruskalOracle::for_instance(&inst).unwrap();
        let mut vals = [0.0; 2];
        let mut per = [0usize; 2];
        for (s, ws) in [true, false].into_iter().enumerate() {
            let cfg = BnbConfig {
                warmstart: ws,
                ..BnbConfig::default()
            };
            let res = solve_bnb(&inst, &oracle, &cfg).unwrap();
            its[s] += res.total_sd_iterations;
            per[s] = res.total_sd_iterations;
            vals[s] = res.value;
            times[s].push((res.status == BnbStatus::Solved).then_some(res.wall_time.as_secs_f64()));
        }
        if per[0] > per[1] {
            inversions += 1;
        }
        if (vals[0] - vals[1]).abs() > 1e-6 {
            mismatch = Some(spec.name());
        }
    }
    let (ws, nows) = (its[0] as f64 / 20.0, its[1] as f64 / 20.0);
    outcome(
        ws <= nows && mismatch.is_none(),
        format!(
            "mean SD iterations: warmstart {ws:.1}, cold {nows:.1}; {inversions} instance(s) inverted; values {}",
            if mismatch.is_none() { "identical" } else { "DIFFER" }
        ),
    )
}

fn criterion10(times: &[Vec<Option<f64>>]) -> Outcome {
    let hand = performance_profile(
        &["s1".into(), "s2".into()],
        &[vec![Some(1.0), Some(2.0)], vec![Some(2.0), Some(1.0)]],
    );
    let expected = vec![(1.0, 0.5), (2.0, 1.0)];
    let hand_ok = hand.curves.iter().all(|c| c.points == expected);
    let prof = performance_profile(&["ws".into(), "cold".into()], times);
    let mut shape_ok = true;
    for (s, curve) in prof.curves.iter().enumerate() {
        let pts = &curve.points;
        let solved = times[s].iter().filter(|t| t.is_some()).count() as f64 / times[s].len() as f64;
        shape_ok &= pts.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1);
        shape_ok &= pts.iter().all(|&(_, rho)| rho <= solved + 1e-12);
        shape_ok &= pts[0].0 == 1.0;
    }
    outcome(
        hand_ok && shape_ok,
        format!(
            "hand example rho1: {:?}; warmstart profiles monotone and bounded by #sol: {shape_ok}",
            hand.curves[0].points
        ),
    )
}

fn criterion11() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_robsd");
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| -> Vec<u8> {
        let out = Command::new(bin).args(args).current_dir(dir.path()).output().unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let mut identical = true;
    for problem in ["mst", "tsp"] {
        let gen = [
            "generate",
            "--problem",
            problem,
            "--nodes",
            "6",
            "--scenarios",
            "8",
            "--beta",
            "2",
            "--seed",
            "7",
        ];
        let a = run(&gen);
        let b = run(&gen);
        identical &= a == b && !a.is_empty();
        std::fs::write(dir.path().join(format!("{problem}.json")), &a).unwrap();
    }
    for args in [
        vec!["solve", "mst.json"],
        vec!["solve", "mst.json", "--drop", "d1", "--perturb", "1e-4", "--seed", "3"],
        vec!["solve", "tsp.json", "--no-warmstart"],
        vec!["root", "tsp.json", "--drop", "d2"],
    ] {
        let a = run(&args);
        let b = run(&args);
        identical &= a == b && !a.is_empty();
    }
    outcome(
        identical,
        "generate (mst, tsp) and solve/root outputs byte-identical across repeated runs",
    )
}

fn main() {
    let start = Instant::now();
    let mut streams = Vec::new();
    let mut times = Vec::new();
    let results = vec![
        ("bnb equals brute force", criterion1()),
        ("root relaxation equals full master", criterion2(&mut streams)),
        ("example 1 cycles under d1", criterion3()),
        ("example 2 stalls", criterion4()),
        ("perturbation terminates", criterion5()),
        ("lower-bound stream", criterion6(&streams)),
        ("master certificates", criterion7()),
        ("d0/d2 agreement", criterion8()),
        ("warmstart trend", criterion9(&mut times)),
        ("performance profiles", criterion10(&times)),
        ("determinism", criterion11()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {:>2} [{name}]: {} - {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
