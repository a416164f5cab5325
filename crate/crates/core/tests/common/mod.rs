#![allow(dead_code)]

use eipl_core::psychometrics::irt::{icc_probability, Params};
use eipl_core::psychometrics::ScoreMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k:03}")).collect()
}

pub fn draw_params(rng: &mut impl Rng, items: usize, students: usize, a: (f64, f64), b: (f64, f64)) -> Params {
    Params {
        a: (0..items).map(|_| rng.random_range(a.0..=a.1)).collect(),
        b: (0..items).map(|_| rng.random_range(b.0..=b.1)).collect(),
        theta: (0..students).map(|_| rng.random_range(-3.0..=3.0)).collect(),
    }
}

/// Generating probability for every (student, item), row-major.
pub fn probability_matrix(p: &Params) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.theta.len() * p.a.len());
    for &t in &p.theta {
        for i in 0..p.a.len() {
            out.push(icc_probability(t, p.a[i], p.b[i]));
        }
    }
    out
}

pub fn dense(scores: &[f64], students: usize, items: usize) -> ScoreMatrix {
    ScoreMatrix::from_dense(ids("s", students), ids("q", items), scores).unwrap()
}

/// Plain cross-entropy written directly from its definition, used as an
/// independent check of the library's loss.
pub fn naive_loss(matrix: &ScoreMatrix, p: &Params) -> f64 {
    let mut total = 0.0;
    for j in 0..matrix.n_students() {
        for i in 0..matrix.n_items() {
            if let Some(s) = matrix.get(j, i) {
                let prob = (1.0 / (1.0 + (-(p.a[i] * (p.theta[j] - p.b[i]))).exp())).clamp(1e-9, 1.0 - 1e-9);
                total -= s * prob.ln() + (1.0 - s) * (1.0 - prob).ln();
            }
        }
    }
    total
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && xs[idx[end + 1]] == xs[idx[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=end] {
            r[i] = avg;
        }
        k = end + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

pub fn rmse(x: &[f64], y: &[f64]) -> f64 {
    (x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Prints the one-line verdict for an acceptance criterion.
pub fn verdict(id: &str, name: &str, pass: bool, detail: &str) -> bool {
    println!("[{}] {id} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
