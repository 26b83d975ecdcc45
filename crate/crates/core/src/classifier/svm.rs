//! Binary C-SVC trained by sequential minimal optimization.
//!
//! Solves `min f(a) = 1/2 a'Qa - e'a` subject to `0 <= a_i <= C` and
//! `y'a = 0`, where `Q_ij = y_i y_j K(x_i, x_j)`. Each iteration updates the
//! maximal violating pair `(i, j)` analytically and stops once the KKT gap
//! `m(a) - M(a)` falls below the tolerance.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// Kernel value from inner products: `<a,a>`, `<b,b>` and `<a,b>`.
    pub fn from_inner(&self, aa: f64, bb: f64, ab: f64) -> f64 {
        match *self {
            Kernel::Linear => ab,
            Kernel::Rbf { gamma } => (-gamma * (aa + bb - 2.0 * ab).max(0.0)).exp(),
        }
    }

    /// Grid coordinate used for tie-breaking; the linear kernel sorts first.
    pub fn gamma_or_zero(&self) -> f64 {
        match *self {
            Kernel::Linear => 0.0,
            Kernel::Rbf { gamma } => gamma,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense symmetric kernel matrix.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        KernelMatrix { n, data }
    }

    pub fn from_features(xs: &[Vec<f64>], kernel: Kernel) -> Self {
        Self::from_fn(xs.len(), |i, j| kernel.eval(&xs[i], &xs[j]))
    }

    /// Kernel over `idx` computed from a precomputed Gram (inner product) matrix.
    pub fn from_gram(gram: &KernelMatrix, idx: &[usize], kernel: Kernel) -> Self {
        Self::from_fn(idx.len(), |a, b| {
            let (i, j) = (idx[a], idx[b]);
            kernel.from_inner(gram.get(i, i), gram.get(j, j), gram.get(i, j))
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            c: 1.0,
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision offset; `f(x) = sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final KKT gap `m(a) - M(a)`.
    pub gap: f64,
}

impl SmoSolution {
    /// Dual objective in maximization form: `e'a - 1/2 a'Qa`.
    pub fn dual_objective(&self, k: &KernelMatrix, y: &[f64]) -> f64 {
        dual_objective(k, y, &self.alpha)
    }
}

pub fn dual_objective(k: &KernelMatrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = k.row(i);
        let mut s = 0.0;
        for j in 0..n {
            s += alpha[j] * y[j] * row[j];
        }
        quad += alpha[i] * y[i] * s;
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

const TAU: f64 = 1e-12;

/// Runs SMO on a precomputed kernel. `y` holds +1/-1 labels and must contain
/// both signs.
pub fn solve(k: &KernelMatrix, y: &[f64], params: &SmoParams) -> SmoSolution {
    let n = y.len();
    assert_eq!(k.len(), n, "kernel/label size mismatch");
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;
    while iterations < params.max_iter {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        let mut big_m = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m {
                m = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < big_m {
                big_m = v;
                j = t;
            }
        }
        gap = m - big_m;
        if i == usize::MAX || j == usize::MAX || gap < params.tol {
            converged = true;
            break;
        }

        // Move along u with u_i = y_i, u_j = -y_j, which keeps y'a fixed.
        let (ki, kj) = (k.row(i), k.row(j));
        let curvature = (ki[i] + kj[j] - 2.0 * ki[j]).max(TAU);
        let mut step = gap / curvature;
        step = step.min(if y[i] > 0.0 { c - alpha[i] } else { alpha[i] });
        step = step.min(if y[j] > 0.0 { alpha[j] } else { c - alpha[j] });

        alpha[i] += y[i] * step;
        alpha[j] -= y[j] * step;
        // Snap onto the box to keep bound tests exact.
        for t in [i, j] {
            if alpha[t] < 1e-14 * c {
                alpha[t] = 0.0;
            } else if alpha[t] > c * (1.0 - 1e-14) {
                alpha[t] = c;
            }
        }
        for t in 0..n {
            grad[t] += y[t] * step * (ki[t] - kj[t]);
        }
        iterations += 1;
    }

    let rho = compute_rho(&alpha, &grad, y, c);
    SmoSolution {
        alpha,
        rho,
        iterations,
        converged,
        gap,
    }
}

/// Offset from free support vectors, or the midpoint of the feasible interval
/// when every multiplier sits at a bound.
fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// A trained binary machine: `f(x) = sum_i coef_i K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl BinaryMachine {
    /// Machine with no support vectors that answers `sign` everywhere. Used
    /// when the training labels are all of one sign.
    pub fn constant(sign: f64) -> Self {
        BinaryMachine {
            support_vectors: Vec::new(),
            coefficients: Vec::new(),
            bias: sign,
        }
    }

    pub fn from_solution(xs: &[Vec<f64>], y: &[f64], sol: &SmoSolution) -> Self {
        let mut support_vectors = Vec::new();
        let mut coefficients = Vec::new();
        for (t, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(xs[t].clone());
                coefficients.push(a * y[t]);
            }
        }
        BinaryMachine {
            support_vectors,
            coefficients,
            bias: -sol.rho,
        }
    }

    pub fn decision(&self, kernel: Kernel, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, coef)| coef * kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Trains a binary machine on features with +1/-1 labels.
pub fn train_binary(xs: &[Vec<f64>], y: &[f64], kernel: Kernel, params: &SmoParams) -> (BinaryMachine, SmoSolution) {
    let k = KernelMatrix::from_features(xs, kernel);
    let sol = solve(&k, y, params);
    (BinaryMachine::from_solution(xs, y, &sol), sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs = vec![
            vec![2.0, 2.0],
            vec![2.5, 1.5],
            vec![3.0, 2.5],
            vec![-2.0, -2.0],
            vec![-1.5, -2.5],
            vec![-3.0, -1.0],
        ];
        let y = vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        (xs, y)
    }

    #[test]
    fn separable_problem_converges_with_margin() {
        let (xs, y) = blobs();
        let params = SmoParams { c: 10.0, ..Default::default() };
        let (m, sol) = train_binary(&xs, &y, Kernel::Linear, &params);
        assert!(sol.converged);
        for (x, &yi) in xs.iter().zip(&y) {
            assert!(yi * m.decision(Kernel::Linear, x) >= 1.0 - 1e-3);
        }
        let sum: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn kkt_conditions_hold_at_convergence() {
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.37;
                vec![t.sin() * 2.0, (t * 1.7).cos() * 2.0]
            })
            .collect();
        let y: Vec<f64> = xs.iter().map(|x| if x[0] * x[1] > 0.0 { 1.0 } else { -1.0 }).collect();
        for kernel in [Kernel::Linear, Kernel::Rbf { gamma: 0.5 }] {
            let params = SmoParams { c: 2.0, ..Default::default() };
            let (m, sol) = train_binary(&xs, &y, kernel, &params);
            assert!(sol.converged);
            let tol = 1e-3;
            for (t, x) in xs.iter().enumerate() {
                let a = sol.alpha[t];
                assert!((0.0..=params.c).contains(&a));
                let margin = y[t] * m.decision(kernel, x);
                if a == 0.0 {
                    assert!(margin >= 1.0 - tol, "a=0 margin {margin}");
                } else if a < params.c {
                    assert!((margin - 1.0).abs() <= tol, "free margin {margin}");
                } else {
                    assert!(margin <= 1.0 + tol, "a=C margin {margin}");
                }
            }
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let (xs, y) = blobs();
        let params = SmoParams { c: 10.0, tol: 1e-3, max_iter: 1 };
        let (_, sol) = train_binary(&xs, &y, Kernel::Rbf { gamma: 1.0 }, &params);
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn gram_route_matches_direct_kernel() {
        let (xs, _) = blobs();
        let gram = KernelMatrix::from_features(&xs, Kernel::Linear);
        let idx = [0, 2, 4, 5];
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| xs[i].clone()).collect();
        let kernel = Kernel::Rbf { gamma: 0.3 };
        let a = KernelMatrix::from_gram(&gram, &idx, kernel);
        let b = KernelMatrix::from_features(&sub, kernel);
        for i in 0..idx.len() {
            for j in 0..idx.len() {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-12);
            }
        }
    }
}
