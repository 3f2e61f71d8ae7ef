//! Brute-force reference computations: explicit path enumeration and
//! literal sums over every class sequence instead of matrix powers.

#![allow(dead_code)]

use rand::Rng;

pub type Tables = ([Vec<f64>; 2], [Vec<Vec<f64>>; 2]);

/// Sum over `z` in `Z^(k-1)` of `alpha[from][z1] alpha[z1][z2] ... alpha[z_{k-1}][to]`.
pub fn literal_k_step(alpha: &[Vec<f64>], k: usize, from: usize, to: usize) -> f64 {
    if k == 0 {
        return if from == to { 1.0 } else { 0.0 };
    }
    let z = alpha.len();
    let inner = k - 1;
    let mut total = 0.0;
    for code in 0..z.pow(inner as u32) {
        let mut c = code;
        let mut prev = from;
        let mut p = 1.0;
        for _ in 0..inner {
            let next = c % z;
            c /= z;
            p *= alpha[prev][next];
            prev = next;
        }
        total += p * alpha[prev][to];
    }
    total
}

/// Probability that a chain of `len` edges started from `eta` shows
/// `class` at each constrained 1-based position, by enumerating all `Z^len`
/// class sequences.
pub fn chain_prob(eta: &[f64], alpha: &[Vec<f64>], len: usize, constraints: &[(usize, usize)]) -> f64 {
    let z = eta.len();
    if len == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut seq = vec![0usize; len];
    for code in 0..z.pow(len as u32) {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = c % z;
            c /= z;
        }
        if constraints.iter().any(|&(pos, class)| seq[pos - 1] != class) {
            continue;
        }
        let mut p = eta[seq[0]];
        for w in seq.windows(2) {
            p *= alpha[w[0]][w[1]];
        }
        total += p;
    }
    total
}

/// Every simple path (as a vertex list) from `source` whose last edge is
/// `(u, v)`.
pub fn simple_paths(edges: &[(u64, u64)], source: u64, target: (u64, u64)) -> Vec<Vec<u64>> {
    fn dfs(edges: &[(u64, u64)], at: u64, target: (u64, u64), stack: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if at == target.0 {
            if !stack.contains(&target.1) {
                let mut p = stack.clone();
                p.push(target.1);
                out.push(p);
            }
            return;
        }
        for &(a, b) in edges {
            if a == at && !stack.contains(&b) && b != target.1 {
                stack.push(b);
                dfs(edges, b, target, stack, out);
                stack.pop();
            }
        }
    }
    let mut out = Vec::new();
    if source == target.1 {
        return out;
    }
    dfs(edges, source, target, &mut vec![source], &mut out);
    out
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub nodes: u64,
    pub edges: Vec<(u64, u64)>,
    pub source: u64,
    pub tables: Tables,
    pub prior: f64,
    /// `(u, v, class)` in arrival order.
    pub observations: Vec<(u64, u64, usize)>,
}

fn random_simplex(rng: &mut impl Rng, z: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..z).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

pub fn random_tables(rng: &mut impl Rng, z: usize) -> Tables {
    (
        [random_simplex(rng, z), random_simplex(rng, z)],
        [
            (0..z).map(|_| random_simplex(rng, z)).collect(),
            (0..z).map(|_| random_simplex(rng, z)).collect(),
        ],
    )
}

pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let nodes = rng.random_range(3..=8u64);
    let z = rng.random_range(2..=3);
    let mut edges = Vec::new();
    for u in 0..nodes {
        for v in 0..nodes {
            if u != v && rng.random::<f64>() < 0.35 {
                edges.push((u, v));
            }
        }
    }
    if !edges.iter().any(|&(u, _)| u == 0) {
        edges.push((0, 1));
    }
    let mut pool = edges.clone();
    let k = rng.random_range(1..=6).min(pool.len());
    let mut observations = Vec::new();
    for _ in 0..k {
        let (u, v) = pool.swap_remove(rng.random_range(0..pool.len()));
        observations.push((u, v, rng.random_range(0..z)));
    }
    Instance {
        nodes,
        edges,
        source: 0,
        tables: random_tables(rng, z),
        prior: rng.random_range(0.05..0.95),
        observations,
    }
}

#[derive(Debug, Clone)]
pub struct BruteStep {
    /// Stream index of the observation.
    pub index: usize,
    pub a: [f64; 2],
    /// Path scores in enumeration order, per hypothesis.
    pub mu: [Vec<f64>; 2],
    pub posterior: f64,
}

/// Posterior after each reachable observation, from the product of the
/// per-step probabilities computed by enumeration. Observations no path
/// reaches are skipped and left out of later conditioning.
pub fn brute_posteriors(inst: &Instance, unit_empty: bool) -> Vec<BruteStep> {
    let mut seen: Vec<(u64, u64, usize)> = Vec::new();
    let mut like = [1.0f64, 1.0];
    let mut steps = Vec::new();
    for (index, &(u, v, class)) in inst.observations.iter().enumerate() {
        let paths = simple_paths(&inst.edges, inst.source, (u, v));
        if paths.is_empty() {
            continue;
        }
        let mut a = [0.0; 2];
        let mut mus = [Vec::new(), Vec::new()];
        for h in 0..2 {
            let (eta, alpha) = (&inst.tables.0[h], &inst.tables.1[h]);
            let mut weights = Vec::new();
            let mut joint = Vec::new();
            for p in &paths {
                let m = p.len() - 1;
                let on_path: Vec<(usize, usize)> = p
                    .windows(2)
                    .take(m - 1)
                    .enumerate()
                    .filter_map(|(i, w)| {
                        seen.iter()
                            .find(|&&(a, b, _)| a == w[0] && b == w[1])
                            .map(|&(_, _, c)| (i + 1, c))
                    })
                    .collect();
                let with_new: Vec<(usize, usize)> = on_path.iter().copied().chain([(m, class)]).collect();
                if on_path.is_empty() {
                    let marginal = chain_prob(eta, alpha, m, &[(m, class)]);
                    weights.push(if unit_empty { 1.0 } else { marginal });
                    joint.push(weights.last().unwrap() * marginal);
                } else {
                    let w = chain_prob(eta, alpha, m - 1, &on_path);
                    weights.push(w);
                    joint.push(chain_prob(eta, alpha, m, &with_new));
                }
            }
            let total: f64 = weights.iter().sum();
            a[h] = joint.iter().sum::<f64>() / total;
            mus[h] = weights.iter().map(|w| w / total).collect();
        }
        like[0] *= a[0];
        like[1] *= a[1];
        let posterior = inst.prior * like[1] / (inst.prior * like[1] + (1.0 - inst.prior) * like[0]);
        steps.push(BruteStep {
            index,
            a,
            mu: mus,
            posterior,
        });
        seen.push((u, v, class));
    }
    steps
}
