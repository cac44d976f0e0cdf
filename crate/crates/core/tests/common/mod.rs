#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robsd::{Scenario, ScenarioSet, Vertex};

/// Edge list of K_n in lexicographic order.
pub fn complete_edges(n: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            e.push((i, j));
        }
    }
    e
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            let w = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Every spanning tree of K_n: subsets of n-1 edges that connect all nodes.
pub fn brute_spanning_trees(n: usize) -> Vec<Vertex> {
    let edges = complete_edges(n);
    let e = edges.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << e) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let chosen: Vec<(usize, usize)> = (0..e).filter(|i| mask >> i & 1 == 1).map(|i| edges[i]).collect();
        if connected(n, &chosen) {
            out.push(Vertex::new((0..e).map(|i| mask >> i & 1 == 1).collect()));
        }
    }
    out
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Every Hamiltonian cycle of K_n, one per orientation.
pub fn brute_tours(n: usize) -> Vec<Vertex> {
    let edges = complete_edges(n);
    let index = |a: usize, b: usize| edges.iter().position(|&e| e == (a.min(b), a.max(b))).unwrap();
    let mut perms = Vec::new();
    permutations(&mut (1..n).collect(), 0, &mut perms);
    let mut out: Vec<Vertex> = perms
        .into_iter()
        .filter(|p| p[0] < p[p.len() - 1])
        .map(|p| {
            let mut bits = vec![false; edges.len()];
            let mut prev = 0;
            for &v in &p {
                bits[index(prev, v)] = true;
                prev = v;
            }
            bits[index(prev, 0)] = true;
            Vertex::new(bits)
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

pub fn f_at(u: &ScenarioSet<f64>, v: &Vertex) -> f64 {
    u.scenarios()
        .iter()
        .map(|s| s.constant + v.ones().map(|i| s.costs[i]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn exhaustive_min(u: &ScenarioSet<f64>, xs: &[Vertex]) -> f64 {
    xs.iter().map(|v| f_at(u, v)).fold(f64::INFINITY, f64::min)
}

pub fn random_scenarios(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ScenarioSet<f64> {
    let s = (0..m)
        .map(|_| {
            Scenario::new(
                rng.random_range(-1.0..1.0),
                (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
            )
        })
        .collect();
    ScenarioSet::new(s).unwrap()
}

pub fn random_vertices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vertex> {
    (0..k)
        .map(|_| Vertex::new((0..n).map(|_| rng.random_bool(0.5)).collect()))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn value_at(u: &ScenarioSet<f64>, x: &[f64]) -> f64 {
    u.scenarios()
        .iter()
        .map(|s| s.constant + s.costs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Checks the optimality certificate of a master solution over `vs`.
pub fn check_certificates(
    sol: &robsd::MasterSolution<f64>,
    vs: &[Vertex],
    u: &ScenarioSet<f64>,
    rng: &mut ChaCha8Rng,
    tol: f64,
) -> Result<(), String> {
    let n = u.dimension();
    let scale = 1.0 + sol.z.abs();
    if sol.alpha.iter().any(|&a| a < -tol) || (sol.alpha.iter().sum::<f64>() - 1.0).abs() > tol {
        return Err(format!("alpha not in simplex: {:?}", sol.alpha));
    }
    if sol.lambda.iter().any(|&l| l < -tol) || (sol.lambda.iter().sum::<f64>() - 1.0).abs() > tol {
        return Err(format!("lambda not in simplex: {:?}", sol.lambda));
    }
    for i in 0..n {
        let xi: f64 = vs
            .iter()
            .zip(&sol.alpha)
            .filter(|(v, _)| v.get(i))
            .map(|(_, a)| a)
            .sum();
        if (xi - sol.x[i]).abs() > tol {
            return Err(format!("x[{i}] = {} but alpha gives {xi}", sol.x[i]));
        }
    }
    let fx = value_at(u, &sol.x);
    if (fx - sol.z).abs() > tol * scale {
        return Err(format!("z = {} but f(x) = {fx}", sol.z));
    }
    for (j, s) in u.scenarios().iter().enumerate() {
        let vj = s.constant + s.costs.iter().zip(&sol.x).map(|(c, x)| c * x).sum::<f64>();
        if sol.lambda[j] > tol && vj < sol.z - tol * scale {
            return Err(format!("lambda[{j}] = {} on inactive scenario", sol.lambda[j]));
        }
    }
    let weighted = |v: &Vertex| -> f64 {
        u.scenarios()
            .iter()
            .zip(&sol.lambda)
            .map(|(s, l)| l * (s.constant + v.ones().map(|i| s.costs[i]).sum::<f64>()))
            .sum()
    };
    for (v, &a) in vs.iter().zip(&sol.alpha) {
        if weighted(v) < sol.z - tol * scale {
            return Err(format!("dual constraint violated at {v}"));
        }
        if a > tol && (weighted(v) - sol.z).abs() > tol * scale {
            return Err(format!("alpha = {a} on a vertex with slack dual constraint"));
        }
    }
    let c = &sol.subgradient;
    let cx: f64 = c.iter().zip(&sol.x).map(|(a, b)| a * b).sum();
    for v in vs {
        if v.ones().map(|i| c[i]).sum::<f64>() < cx - tol * scale {
            return Err(format!("normal cone violated at {v}"));
        }
    }
    for _ in 0..100 {
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let cy: f64 = c.iter().zip(&y).map(|(a, b)| a * b).sum();
        if value_at(u, &y) < sol.z + cy - cx - tol * scale {
            return Err("subgradient inequality violated".into());
        }
    }
    Ok(())
}
