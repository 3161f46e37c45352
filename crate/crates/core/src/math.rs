//! Small numeric helpers shared by the loss, entropy and surrogate code.

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `ln Σ exp(z)` without overflow.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Entropy of `softmax(z)` computed from the log-partition, so that constant inputs give
/// exactly `ln C`. Inputs are sorted first, which makes the result bit-for-bit invariant
/// under permutations.
pub fn softmax_entropy(logits: &[f64]) -> f64 {
    let mut sorted = logits.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = sorted.last().copied().unwrap_or(f64::NEG_INFINITY);
    let shifted: Vec<f64> = sorted.iter().map(|&z| z - max).collect();
    let exps: Vec<f64> = shifted.iter().map(|z| z.exp()).collect();
    let total: f64 = exps.iter().sum();
    let expected: f64 = exps.iter().zip(&shifted).map(|(e, z)| e * z).sum::<f64>() / total;
    let h = total.ln() - expected;
    h.max(0.0)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Huber loss with δ = 1.
#[inline]
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

#[inline]
pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Solves `A X = B` for symmetric positive-definite `A` (n×n, row-major) and an n×m
/// right-hand side, via Cholesky. Returns `None` if `A` is not positive definite.
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut x = b.to_vec();
    for col in 0..m {
        // forward: L y = b
        for i in 0..n {
            let mut sum = x[i * m + col];
            for k in 0..i {
                sum -= l[i * n + k] * x[k * m + col];
            }
            x[i * m + col] = sum / l[i * n + i];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut sum = x[i * m + col];
            for k in i + 1..n {
                sum -= l[k * n + i] * x[k * m + col];
            }
            x[i * m + col] = sum / l[i * n + i];
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_entropy_matches_direct_formula() {
        let z = [0.3, -1.2, 2.0, 0.0];
        let direct = shannon_entropy(&softmax(&z));
        assert_abs_diff_eq!(softmax_entropy(&z), direct, epsilon = 1e-14);
        assert_eq!(softmax_entropy(&[0.7; 3]), 3f64.ln());
    }

    #[test]
    fn cholesky_solves_small_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let b = [2.0, 1.0, 1.0, 2.0];
        let x = cholesky_solve(&a, 2, &b, 2).unwrap();
        // check A x = b
        for col in 0..2 {
            for row in 0..2 {
                let v: f64 = (0..2).map(|k| a[row * 2 + k] * x[k * 2 + col]).sum();
                assert_abs_diff_eq!(v, b[row * 2 + col], epsilon = 1e-12);
            }
        }
        assert!(cholesky_solve(&[0.0], 1, &[1.0], 1).is_none());
    }

    #[test]
    fn huber_is_continuous_at_the_kink() {
        assert_abs_diff_eq!(smooth_l1(1.0 - 1e-12), smooth_l1(1.0), epsilon = 1e-11);
        assert_eq!(smooth_l1_grad(-3.0), -1.0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
