//! Independent reference computations used by the integration and acceptance
//! tests. Nothing here calls into the library's numerical code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// Walk every unordered pair and classify it.
pub fn brute_pair_counts(truth: &[usize], estimate: &[usize]) -> Counts {
    assert_eq!(truth.len(), estimate.len());
    let mut c = Counts { tp: 0, tn: 0, fp: 0, fn_: 0 };
    for i in 0..truth.len() {
        for j in i + 1..truth.len() {
            match (truth[i] == truth[j], estimate[i] == estimate[j]) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
    }
    c
}

pub fn brute_rand(c: &Counts) -> f64 {
    (c.tp + c.tn) as f64 / (c.tp + c.tn + c.fp + c.fn_) as f64
}

pub fn brute_jaccard(c: &Counts) -> f64 {
    let d = c.tp + c.fp + c.fn_;
    if d == 0 { 1.0 } else { c.tp as f64 / d as f64 }
}

/// Pair-count form of the adjusted Rand index.
pub fn brute_arand(c: &Counts) -> f64 {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let den = (tp + fn_) * (fn_ + tn) + (tp + fp) * (fp + tn);
    if den == 0.0 { 1.0 } else { 2.0 * (tp * tn - fn_ * fp) / den }
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Tiny fusion instance: 3 subjects on 4 equally spaced points with a linear
/// basis and no interior knots, so `B = [1 − t, t]` and `D = [[1, −1], [−1, 1]]`.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma: f64,
}

pub const TINY_POINTS: usize = 4;

impl TinyInstance {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = (0..TINY_POINTS).map(|k| k as f64 / (TINY_POINTS - 1) as f64).collect();
        let a = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let b = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let y = (0..3)
            .map(|i| {
                let c = if i < 2 { a } else { b };
                t.iter()
                    .map(|&s| c[0] * (1.0 - s) + c[1] * s + 0.3 * rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        TinyInstance {
            t,
            y,
            lambda1: rng.random_range(0.01..0.5),
            lambda2: rng.random_range(0.1..0.6),
            gamma: 3.0,
        }
    }

    /// `½(‖y_i − B b‖² + λ₁ bᵀDb)`.
    pub fn data_term(&self, i: usize, b: [f64; 2]) -> f64 {
        let rss: f64 = self
            .t
            .iter()
            .zip(&self.y[i])
            .map(|(&s, &v)| {
                let r = v - b[0] * (1.0 - s) - b[1] * s;
                r * r
            })
            .sum();
        0.5 * (rss + self.lambda1 * (b[1] - b[0]).powi(2))
    }

    pub fn mcp(&self, x: f64) -> f64 {
        let (l, g) = (self.lambda2, self.gamma);
        if x <= g * l { l * x - x * x / (2.0 * g) } else { 0.5 * g * l * l }
    }

    pub fn pair(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.mcp(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
    }

    pub fn objective(&self, beta: &[[f64; 2]; 3]) -> f64 {
        (0..3).map(|i| self.data_term(i, beta[i])).sum::<f64>()
            + self.pair(beta[0], beta[1])
            + self.pair(beta[0], beta[2])
            + self.pair(beta[1], beta[2])
    }

    /// Exact minimum over the lattice `{lo + k·h}²` per subject, `k < steps`,
    /// by branch and bound. The MCP term is nonnegative, so candidates are
    /// visited in increasing data-term order and cut once the data terms alone
    /// reach the incumbent.
    pub fn grid_minimum(&self, lo: f64, h: f64, steps: usize) -> (f64, [[f64; 2]; 3]) {
        let lattice: Vec<[f64; 2]> = (0..steps * steps)
            .map(|k| [lo + h * (k / steps) as f64, lo + h * (k % steps) as f64])
            .collect();
        let sorted: Vec<Vec<([f64; 2], f64)>> = (0..3)
            .map(|i| {
                let mut v: Vec<_> = lattice.iter().map(|&b| (b, self.data_term(i, b))).collect();
                v.sort_by(|x, y| x.1.total_cmp(&y.1));
                v
            })
            .collect();
        let mins: Vec<f64> = sorted.iter().map(|v| v[0].1).collect();

        let own = [sorted[0][0].0, sorted[1][0].0, sorted[2][0].0];
        let mut best = (self.objective(&own), own);
        for &(b, _) in &sorted[0] {
            let all = [b, b, b];
            let v = self.objective(&all);
            if v < best.0 {
                best = (v, all);
            }
        }

        for &(b0, f0) in &sorted[0] {
            if f0 + mins[1] + mins[2] >= best.0 {
                break;
            }
            for &(b1, f1) in &sorted[1] {
                if f0 + f1 + mins[2] >= best.0 {
                    break;
                }
                let s = f0 + f1 + self.pair(b0, b1);
                if s + mins[2] >= best.0 {
                    continue;
                }
                for &(b2, f2) in &sorted[2] {
                    if s + f2 >= best.0 {
                        break;
                    }
                    let v = s + f2 + self.pair(b0, b2) + self.pair(b1, b2);
                    if v < best.0 {
                        best = (v, [b0, b1, b2]);
                    }
                }
            }
        }
        best
    }
}
