#![allow(dead_code)]

use ibmap::gsmn::{next_query, Decision, EdgeRule, Step};
use ibmap::synth::{self, GibbsOptions};
use ibmap::{Dataset, Structure, Tester, Triplet};
use rand::Rng;

/// Erdős–Rényi graph, useful where the synthetic generator's degree floor
/// would hide sparse cases.
pub fn gnp(n: usize, p: f64, seed: u64) -> Structure {
    let mut rng = ibmap::seed::rng(seed);
    let mut g = Structure::new(n);
    for x in 0..n {
        for y in x + 1..n {
            if rng.gen_bool(p) {
                g.set_edge(x, y, true);
            }
        }
    }
    g
}

/// Separation by enumerating every simple path from `x` to `y`.
pub fn separated_by_paths(g: &Structure, t: &Triplet) -> bool {
    fn walk(g: &Structure, at: usize, goal: usize, blocked: &[bool], seen: &mut Vec<bool>) -> bool {
        if at == goal {
            return true;
        }
        seen[at] = true;
        let found = g
            .neighbors(at)
            .any(|v| !seen[v] && !blocked[v] && walk(g, v, goal, blocked, seen));
        seen[at] = false;
        found
    }
    let mut blocked = vec![false; g.n()];
    for &v in t.z() {
        blocked[v] = true;
    }
    !walk(g, t.x(), t.y(), &blocked, &mut vec![false; g.n()])
}

/// Every triplet over `n` variables, conditioning sets of all sizes.
pub fn all_triplets(n: usize) -> Vec<Triplet> {
    (0..n.saturating_sub(1))
        .flat_map(|m| ibmap::eval::all_triplets_of_cardinality(n, m))
        .collect()
}

pub fn triplet(x: usize, y: usize, z: &[usize]) -> Triplet {
    Triplet::new(x, y, z.iter().copied()).unwrap()
}

/// Minimum path cost over every complete decision vector of GSMN's tree,
/// by exhaustive depth-first enumeration.
pub fn brute_force_min_cost(tester: &Tester<'_>, rule: EdgeRule) -> (f64, usize) {
    fn go(tester: &Tester<'_>, rule: EdgeRule, prefix: &mut Vec<Decision>, cost: f64, best: &mut (f64, usize)) {
        match next_query(tester.n_vars(), rule, prefix).unwrap() {
            Step::Done(_) => {
                best.1 += 1;
                if cost < best.0 {
                    best.0 = cost;
                }
            }
            Step::Query(t) => {
                let judgment = tester.judge(&t).unwrap();
                for independent in [true, false] {
                    let step = -judgment.probability_of(independent).ln();
                    prefix.push(Decision {
                        triplet: t.clone(),
                        independent,
                    });
                    go(tester, rule, prefix, cost + step, best);
                    prefix.pop();
                }
            }
        }
    }
    let mut best = (f64::INFINITY, 0);
    go(tester, rule, &mut Vec::new(), 0.0, &mut best);
    best
}

/// A random pairwise model over `n` binary variables sampled with the
/// default chain settings.
pub fn synthetic(n: usize, tau: usize, rows: usize, seed: u64) -> (Structure, Dataset) {
    let g = synth::random_structure(n, tau, ibmap::seed::derive(seed, &[0])).unwrap();
    let model = synth::random_parameters(&g, ibmap::seed::derive(seed, &[1]));
    let data = synth::gibbs_sample(&model, rows, ibmap::seed::derive(seed, &[2]), GibbsOptions::default()).unwrap();
    (g, data)
}

/// Nodes reachable from `x` without entering `z`.
fn reach(g: &Structure, x: usize, z: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; g.n()];
    for &v in z {
        seen[v] = true;
    }
    let mut stack = vec![x];
    let mut reached = vec![false; g.n()];
    seen[x] = true;
    while let Some(u) = stack.pop() {
        reached[u] = true;
        for v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    reached
}

/// `I(x ; set | z)` for a set on the right-hand side.
pub fn separated_from_set(g: &Structure, x: usize, set: &[usize], z: &[usize]) -> bool {
    let r = reach(g, x, z);
    set.iter().all(|&v| !r[v])
}

/// Violations of Strong Union, Decomposition, Intersection and the
/// auxiliary lemma `D(X;Y|Z) ∧ I(X;Y|Z,W) ⇒ D(X;W|Z)` over every
/// `(X, Y, W, Z)` of `g`, in that order.
pub fn axiom_violations(g: &Structure) -> [usize; 4] {
    let n = g.n();
    let sep = |x: usize, y: usize, z: &[usize]| g.separated(&triplet(x, y, z));
    let mut bad = [0; 4];
    for x in 0..n {
        for y in (0..n).filter(|&y| y != x) {
            for w in (0..n).filter(|&w| w != x && w != y) {
                let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y && v != w).collect();
                for mask in 0u32..1 << rest.len() {
                    let z: Vec<usize> = rest
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, &v)| v)
                        .collect();
                    let with = |v: usize| {
                        let mut s = z.clone();
                        s.push(v);
                        s
                    };
                    if sep(x, y, &z) && !sep(x, y, &with(w)) {
                        bad[0] += 1;
                    }
                    if separated_from_set(g, x, &[y, w], &z) && !(sep(x, y, &z) && sep(x, w, &z)) {
                        bad[1] += 1;
                    }
                    if sep(x, y, &with(w)) && sep(x, w, &with(y)) && !separated_from_set(g, x, &[y, w], &z) {
                        bad[2] += 1;
                    }
                    if !sep(x, y, &z) && sep(x, y, &with(w)) && sep(x, w, &z) {
                        bad[3] += 1;
                    }
                }
            }
        }
    }
    bad
}
