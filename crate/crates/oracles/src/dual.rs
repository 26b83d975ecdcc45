//! Brute-force SVM dual solver: cyclic pairwise coordinate ascent over every
//! index pair, each pair maximized exactly, run until a full sweep moves no
//! multiplier.

#[derive(Debug, Clone, Copy)]
pub enum RefKernel {
    Linear,
    Rbf(f64),
}

pub fn kernel(k: RefKernel, a: &[f64], b: &[f64]) -> f64 {
    match k {
        RefKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        RefKernel::Rbf(g) => {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
            (-g * d).exp()
        }
    }
}

pub struct RefSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub sweeps: usize,
}

/// `sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij`
pub fn objective(xs: &[Vec<f64>], y: &[f64], k: RefKernel, alpha: &[f64]) -> f64 {
    let n = xs.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel(k, &xs[i], &xs[j]);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn margin_sum(xs: &[Vec<f64>], y: &[f64], k: RefKernel, alpha: &[f64], t: usize) -> f64 {
    (0..xs.len())
        .map(|l| alpha[l] * y[l] * kernel(k, &xs[l], &xs[t]))
        .sum()
}

pub fn solve(xs: &[Vec<f64>], y: &[f64], k: RefKernel, c: f64) -> RefSolution {
    let n = xs.len();
    let gram: Vec<Vec<f64>> = xs
        .iter()
        .map(|a| xs.iter().map(|b| kernel(k, a, b)).collect())
        .collect();
    let mut alpha = vec![0.0; n];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        // margins[t] = sum_l a_l y_l K_lt, refreshed from scratch every sweep.
        let mut margins: Vec<f64> = (0..n)
            .map(|t| (0..n).map(|l| alpha[l] * y[l] * gram[l][t]).sum())
            .collect();
        let mut largest_move: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // Direction: alpha_i += y_i t, alpha_j -= y_j t.
                let slope = y[i] * (1.0 - y[i] * margins[i]) - y[j] * (1.0 - y[j] * margins[j]);
                let curv = gram[i][i] + gram[j][j] - 2.0 * gram[i][j];
                let (lo_i, hi_i) = if y[i] > 0.0 { (-alpha[i], c - alpha[i]) } else { (alpha[i] - c, alpha[i]) };
                let (lo_j, hi_j) = if y[j] > 0.0 { (alpha[j] - c, alpha[j]) } else { (-alpha[j], c - alpha[j]) };
                let lo = lo_i.max(lo_j);
                let hi = hi_i.min(hi_j);
                if hi - lo <= 0.0 {
                    continue;
                }
                let t = if curv > 1e-12 {
                    (slope / curv).clamp(lo, hi)
                } else if slope > 0.0 {
                    hi
                } else {
                    lo
                };
                if t == 0.0 {
                    continue;
                }
                let old_i = alpha[i];
                let old_j = alpha[j];
                alpha[i] = (alpha[i] + y[i] * t).clamp(0.0, c);
                alpha[j] = (alpha[j] - y[j] * t).clamp(0.0, c);
                let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
                for m in 0..n {
                    margins[m] += di * y[i] * gram[i][m] + dj * y[j] * gram[j][m];
                }
                largest_move = largest_move.max(di.abs()).max(dj.abs());
            }
        }
        if largest_move <= 1e-13 * c.max(1.0) || sweeps >= 200_000 {
            break;
        }
    }
    let bias = kkt_bias(xs, y, k, &alpha, c);
    let objective = objective(xs, y, k, &alpha);
    RefSolution { alpha, bias, objective, sweeps }
}

/// Bias from the KKT conditions: average over margin vectors, else the
/// midpoint of the interval allowed by the bound vectors.
fn kkt_bias(xs: &[Vec<f64>], y: &[f64], k: RefKernel, alpha: &[f64], c: f64) -> f64 {
    let eps = 1e-9 * c;
    let mut free = Vec::new();
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for t in 0..xs.len() {
        let resid = y[t] - margin_sum(xs, y, k, alpha, t);
        if alpha[t] > eps && alpha[t] < c - eps {
            free.push(resid);
        } else {
            // y f >= 1 at a = 0, y f <= 1 at a = C.
            let at_zero = alpha[t] <= eps;
            if (y[t] > 0.0) == at_zero {
                lower = lower.max(resid);
            } else {
                upper = upper.min(resid);
            }
        }
    }
    if !free.is_empty() {
        free.iter().sum::<f64>() / free.len() as f64
    } else {
        (lower + upper) / 2.0
    }
}

pub fn decision(xs: &[Vec<f64>], y: &[f64], k: RefKernel, sol: &RefSolution, x: &[f64]) -> f64 {
    (0..xs.len())
        .map(|l| sol.alpha[l] * y[l] * kernel(k, &xs[l], x))
        .sum::<f64>()
        + sol.bias
}
