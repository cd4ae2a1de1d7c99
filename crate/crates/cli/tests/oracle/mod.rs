//! Reference implementations written from the definitions, sharing no code
//! with the library: plain `Vec` arithmetic, Gaussian elimination, full
//! permutation enumeration.

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / p;
            if f == 0.0 {
                continue;
            }
            let (top, rest) = a.split_at_mut(row);
            for (dst, src) in rest[0][col..].iter_mut().zip(&top[col][col..]) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// The ridge normal equations on the augmented design `[1 | X]` with the
/// intercept unpenalized: returns `(AᵀA + λ·diag(0, 1, …, 1), Aᵀy)`.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = x[0].len();
    let row = |r: &Vec<f64>| {
        let mut a = Vec::with_capacity(d + 1);
        a.push(1.0);
        a.extend_from_slice(r);
        a
    };
    let aug: Vec<Vec<f64>> = x.iter().map(row).collect();
    let mut lhs = vec![vec![0.0; d + 1]; d + 1];
    let mut rhs = vec![0.0; d + 1];
    for (a, &yi) in aug.iter().zip(y) {
        for i in 0..=d {
            rhs[i] += a[i] * yi;
            for j in 0..=d {
                lhs[i][j] += a[i] * a[j];
            }
        }
    }
    for (i, row) in lhs.iter_mut().enumerate().skip(1) {
        row[i] += lambda;
    }
    (lhs, rhs)
}

/// `[intercept, w₁, …, w_d]`.
pub fn ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let (lhs, rhs) = normal_equations(x, y, lambda);
    solve(lhs, rhs)
}

pub fn predict(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

/// Max-abs residual of the normal equations at `beta`, relative to `‖Aᵀy‖∞`.
pub fn normal_residual(x: &[Vec<f64>], y: &[f64], lambda: f64, beta: &[f64]) -> f64 {
    let (lhs, rhs) = normal_equations(x, y, lambda);
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    lhs.iter()
        .zip(&rhs)
        .map(|(row, r)| (row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() - r).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Mean over folds of validation MSE for each λ, then the first minimum.
pub fn cv_choice(x: &[Vec<f64>], y: &[f64], folds: &[usize], k: usize, grid: &[f64]) -> (usize, Vec<f64>) {
    let mut means = Vec::new();
    for &lambda in grid {
        let mut total = 0.0;
        for f in 0..k {
            let mut xt = Vec::new();
            let mut yt = Vec::new();
            let mut val = Vec::new();
            for i in 0..y.len() {
                if folds[i] == f {
                    val.push(i);
                } else {
                    xt.push(x[i].clone());
                    yt.push(y[i]);
                }
            }
            let beta = ridge(&xt, &yt, lambda);
            let sse: f64 = val.iter().map(|&i| (y[i] - predict(&beta, &x[i])).powi(2)).sum();
            total += sse / val.len() as f64;
        }
        means.push(total / k as f64);
    }
    let mut best = 0;
    for i in 1..means.len() {
        if means[i] < means[best] {
            best = i;
        }
    }
    (best, means)
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Exact two-sided permutation p-value: the share of all `n!` orderings of
/// `y` whose |r| reaches the observed |r|.
pub fn exact_permutation_p(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let mut yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    let norm = (xc.iter().map(|v| v * v).sum::<f64>() * yc.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let r_of = |yc: &[f64]| xc.iter().zip(yc).map(|(a, b)| a * b).sum::<f64>() / norm;
    let observed = r_of(&yc).abs() - 1e-12;

    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    let mut hits = u64::from(r_of(&yc).abs() >= observed);
    let mut total = 1u64;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                yc.swap(0, i);
            } else {
                yc.swap(c[i], i);
            }
            total += 1;
            if r_of(&yc).abs() >= observed {
                hits += 1;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}
