//! Independent reference implementations used by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serfiq::dataset::{QualityTable, Pair};
use serfiq::densenet::{init_net, DenseNet, DropoutPlan, Loss, NetSpec, OutputActivation};
use serfiq::metrics::ScoreSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Quality straight from the definition: mean pairwise distance over all ordered
/// pairs counted once, then `2 / (1 + e^D)`.
pub fn quality_oracle(set: &[Vec<f64>]) -> f64 {
    let m = set.len() as f64;
    let mut total = 0.0;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let d2: f64 = set[i].iter().zip(&set[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            total += d2.sqrt();
        }
    }
    let d = 2.0 * total / (m * m);
    2.0 / (1.0 + d.exp())
}

pub fn count_fmr(impostor: &[f64], t: f64) -> usize {
    impostor.iter().filter(|&&s| s >= t).count()
}

pub fn count_fnmr(genuine: &[f64], t: f64) -> usize {
    genuine.iter().filter(|&&s| s < t).count()
}

/// Midpoint of `lo < hi`, or `hi` if the midpoint rounds onto `lo`.
pub fn split(lo: f64, hi: f64) -> f64 {
    let mid = (lo + hi) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Every distinct value, descending.
fn distinct_desc(v: &[f64]) -> Vec<f64> {
    let mut d = v.to_vec();
    d.sort_by(|a, b| b.partial_cmp(a).unwrap());
    d.dedup();
    d
}

/// Threshold with the largest false-match count not exceeding `target·N`, among
/// midpoints of consecutive distinct scores; `None` means above every score.
pub fn threshold_oracle(impostor: &[f64], target: f64) -> Option<f64> {
    let values = distinct_desc(impostor);
    let n = impostor.len() as f64;
    let mut best = None;
    let mut best_count = 0;
    for t in values.windows(2).map(|w| split(w[1], w[0])) {
        let c = count_fmr(impostor, t);
        if c as f64 <= target * n + 1e-9 && c > best_count {
            best = Some(t);
            best_count = c;
        }
    }
    best
}

/// `(eer, fmr, fnmr)` minimizing `|FMR − FNMR|` over every threshold placed at a
/// score value or above all scores; on equal gaps the lowest threshold wins.
pub fn eer_oracle(genuine: &[f64], impostor: &[f64]) -> (f64, f64, f64) {
    let mut pooled: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pooled.dedup();
    pooled.push(f64::INFINITY);
    let mut best: Option<(f64, f64, f64)> = None;
    for &t in &pooled {
        let fmr = count_fmr(impostor, t) as f64 / impostor.len() as f64;
        let fnmr = count_fnmr(genuine, t) as f64 / genuine.len() as f64;
        match best {
            Some((g, _, _)) if (fmr - fnmr).abs() >= g => {}
            _ => best = Some(((fmr - fnmr).abs(), fmr, fnmr)),
        }
    }
    let (_, fmr, fnmr) = best.unwrap();
    ((fmr + fnmr) / 2.0, fmr, fnmr)
}

/// Rejected image ids at ratio `k / denom`: the `⌈k·N/denom⌉` lowest qualities,
/// ties by id, among images referenced by the protocol.
pub fn rejected_oracle(scores: &ScoreSet<f64>, q: &QualityTable<f64>, k: usize, denom: usize) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for (p, _) in scores.genuine.iter().chain(&scores.impostor) {
        for id in [p.first(), p.second()] {
            if !ids.iter().any(|x| x == id) {
                ids.push(id.to_string());
            }
        }
    }
    ids.sort_by(|a, b| q.get(a).unwrap().partial_cmp(&q.get(b).unwrap()).unwrap().then(a.cmp(b)));
    let reject = (k * ids.len()).div_ceil(denom);
    ids.truncate(reject);
    ids
}

pub fn surviving(pairs: &[(Pair, f64)], rejected: &[String]) -> Vec<f64> {
    pairs
        .iter()
        .filter(|(p, _)| !rejected.iter().any(|r| r == p.first() || r == p.second()))
        .map(|(_, s)| *s)
        .collect()
}

/// A net with Glorot weights and small random biases.
pub fn random_net(dims: &[usize], output: OutputActivation, dropout: f64, seed: u64) -> DenseNet<f64> {
    let mut net = init_net(&NetSpec::new(dims.to_vec(), dropout, output, seed).unwrap()).unwrap();
    let mut r = rng(seed ^ 0xb1a5);
    for l in net.layers_mut() {
        l.bias.iter_mut().for_each(|b| *b = r.random_range(-0.3..0.3));
    }
    net
}

pub fn one_hot(n: usize, k: usize) -> Vec<f64> {
    (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
}

fn loss_of(net: &DenseNet<f64>, x: &[f64], target: &[f64], loss: Loss, plan: DropoutPlan) -> f64 {
    let acts = net.forward(x, plan).unwrap();
    loss.evaluate(acts.output(), target).unwrap().0
}

fn param(net: &mut DenseNet<f64>, layer: usize, k: usize) -> &mut f64 {
    let l = &mut net.layers_mut()[layer];
    let n_w = l.weights.len();
    if k < n_w {
        &mut l.weights[k]
    } else {
        &mut l.bias[k - n_w]
    }
}

/// Central differences over every weight and bias, flattened layer by layer
/// (weights then bias) like [`analytic_gradient`].
pub fn numeric_gradient(net: &DenseNet<f64>, x: &[f64], target: &[f64], loss: Loss, plan: DropoutPlan, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut probe = net.clone();
    for li in 0..net.depth() {
        let n_w = net.layers()[li].weights.len();
        let n_b = net.layers()[li].bias.len();
        for k in 0..n_w + n_b {
            let orig = *param(&mut probe, li, k);
            *param(&mut probe, li, k) = orig + h;
            let up = loss_of(&probe, x, target, loss, plan);
            *param(&mut probe, li, k) = orig - h;
            let down = loss_of(&probe, x, target, loss, plan);
            *param(&mut probe, li, k) = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

pub fn analytic_gradient(net: &DenseNet<f64>, x: &[f64], target: &[f64], loss: Loss, plan: DropoutPlan) -> Vec<f64> {
    let acts = net.forward(x, plan).unwrap();
    let (_, g) = loss.evaluate(acts.output(), target).unwrap();
    let grads = net.backward(&acts, &g).unwrap();
    grads.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
