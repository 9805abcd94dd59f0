//! Ridge-regularised logistic regression by damped Newton iterations, for
//! the two- and three-parameter sigmoid calibrators.

pub(crate) const RIDGE: f64 = 1e-6;
const MAX_ITER: usize = 200;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn objective<const K: usize>(x: &[[f64; K]], y: &[f64], w: &[f64; K]) -> f64 {
    let nll: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| {
            let z = dot(xi, w);
            softplus(z) - yi * z
        })
        .sum();
    nll + 0.5 * RIDGE * w.iter().map(|v| v * v).sum::<f64>()
}

fn dot<const K: usize>(a: &[f64; K], b: &[f64; K]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `m x = v` by Gaussian elimination with partial pivoting.
fn solve<const K: usize>(mut m: [[f64; K]; K], mut v: [f64; K]) -> Option<[f64; K]> {
    for col in 0..K {
        let pivot = (col..K).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..K {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (x, p) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            v[row] -= f * v[col];
        }
    }
    let mut out = [0.0; K];
    for row in (0..K).rev() {
        let tail: f64 = (row + 1..K).map(|k| m[row][k] * out[k]).sum();
        out[row] = (v[row] - tail) / m[row][row];
    }
    Some(out)
}

/// Maximises the ridge-penalised Bernoulli likelihood of `y` under
/// `sigmoid(w . x)`, starting from `init`.
pub(crate) fn fit<const K: usize>(x: &[[f64; K]], y: &[f64], init: [f64; K]) -> [f64; K] {
    let mut w = init;
    let mut f = objective(x, y, &w);
    for _ in 0..MAX_ITER {
        let mut grad = [0.0; K];
        let mut hess = [[0.0; K]; K];
        for (xi, &yi) in x.iter().zip(y) {
            let p = sigmoid(dot(xi, &w));
            let d = p * (1.0 - p);
            for a in 0..K {
                grad[a] += (p - yi) * xi[a];
                for b in 0..K {
                    hess[a][b] += d * xi[a] * xi[b];
                }
            }
        }
        for a in 0..K {
            grad[a] += RIDGE * w[a];
            hess[a][a] += RIDGE;
        }
        if grad.iter().all(|g| g.abs() < 1e-10 * x.len().max(1) as f64) {
            break;
        }
        let Some(step) = solve(hess, grad) else {
            break;
        };
        // Backtracking on the objective.
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let mut cand = w;
            for a in 0..K {
                cand[a] -= t * step[a];
            }
            let fc = objective(x, y, &cand);
            if fc <= f {
                let done = (f - fc).abs() <= 1e-14 * f.abs().max(1.0);
                w = cand;
                f = fc;
                improved = !done;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-9);
        assert!((logit(sigmoid(1.7)) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn solves_small_systems() {
        let x = solve([[2.0, 1.0], [1.0, 3.0]], [3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve([[0.0, 0.0], [0.0, 0.0]], [1.0, 1.0]).is_none());
    }

    #[test]
    fn intercept_only_fit_is_log_odds() {
        let x = vec![[1.0]; 10];
        let y: Vec<f64> = (0..10).map(|i| (i < 3) as u8 as f64).collect();
        let w = fit(&x, &y, [0.0]);
        assert!((w[0] - logit(0.3)).abs() < 1e-5);
    }
}
