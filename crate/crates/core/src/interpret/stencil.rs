//! One-dimensional linear stencils: local polynomial (Savitzky–Golay) fits and
//! Lagrange interpolation. Weights are computed in `f64`.

use serde::{Deserialize, Serialize};

/// What a local polynomial fit is evaluated for, relative to the window center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FitEval {
    /// `P(z)`.
    Value { offset: f64 },
    /// `d^order P / dz^order` at `z` (per unit spacing).
    Derivative { order: u32, offset: f64 },
    /// `P(z + 1/2) - P(z - 1/2)`: the exact increment of the local fit over a unit cell.
    CellDifference { offset: f64 },
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Functional of the (scaled) monomial coefficients of the fit.
fn functional(eval: FitEval, degree: usize, scale: f64) -> Vec<f64> {
    // P(z) = sum_k a_k (z/scale)^k
    let mono = |z: f64, k: usize| (z / scale).powi(k as i32);
    match eval {
        FitEval::Value { offset } => (0..=degree).map(|k| mono(offset, k)).collect(),
        FitEval::CellDifference { offset } => {
            (0..=degree).map(|k| mono(offset + 0.5, k) - mono(offset - 0.5, k)).collect()
        }
        FitEval::Derivative { order, offset } => (0..=degree)
            .map(|k| {
                let r = order as usize;
                if k < r {
                    return 0.0;
                }
                let falling: f64 = (0..r).map(|i| (k - i) as f64).product();
                falling * (offset / scale).powi((k - r) as i32) / scale.powi(r as i32)
            })
            .collect(),
    }
}

/// Weights of a least-squares polynomial fit of `degree` over the `window` points
/// `z = -(window-1)/2 ..= (window-1)/2`, evaluated as `eval`. `None` when
/// `degree >= window` or `window` is even.
pub fn savgol_weights(window: usize, degree: usize, eval: FitEval) -> Option<Vec<f64>> {
    if window == 0 || window % 2 == 0 || degree >= window {
        return None;
    }
    let m = (window - 1) / 2;
    let scale = (m.max(1)) as f64;
    let zs: Vec<f64> = (0..window).map(|i| i as f64 - m as f64).collect();
    let n = degree + 1;
    let mut g = vec![vec![0.0; n]; n];
    for &z in &zs {
        for i in 0..n {
            for j in 0..n {
                g[i][j] += (z / scale).powi(i as i32) * (z / scale).powi(j as i32);
            }
        }
    }
    let x = solve(g, functional(eval, degree, scale))?;
    Some(zs.iter().map(|&z| (0..n).map(|k| x[k] * (z / scale).powi(k as i32)).sum()).collect())
}

/// Lagrange weights for nodes `z_0..z_d` evaluated at `z`.
pub fn lagrange_weights(nodes: &[f64], z: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &zj)| (z - zj) / (nodes[i] - zj))
                .product()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(w: &[f64], ys: &[f64]) -> f64 {
        w.iter().zip(ys).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn window_one_degree_zero_is_identity() {
        assert_eq!(savgol_weights(1, 0, FitEval::Value { offset: 0.0 }).unwrap(), [1.0]);
    }

    #[test]
    fn reproduces_cubics_exactly() {
        let p = |z: f64| 0.3 - 1.2 * z + 0.7 * z * z + 0.05 * z * z * z;
        let dp = |z: f64| -1.2 + 1.4 * z + 0.15 * z * z;
        for window in [5usize, 7, 25] {
            let ys: Vec<f64> = (0..window).map(|i| p(i as f64 - ((window - 1) / 2) as f64)).collect();
            for offset in [0.0, 0.5] {
                let v = savgol_weights(window, 3, FitEval::Value { offset }).unwrap();
                assert!((apply(&v, &ys) - p(offset)).abs() < 1e-10);
                let d = savgol_weights(window, 3, FitEval::Derivative { order: 1, offset }).unwrap();
                assert!((apply(&d, &ys) - dp(offset)).abs() < 1e-10);
                let c = savgol_weights(window, 3, FitEval::CellDifference { offset }).unwrap();
                assert!((apply(&c, &ys) - (p(offset + 0.5) - p(offset - 0.5))).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn value_weights_sum_to_one_and_reduce_variance() {
        let w = savgol_weights(25, 3, FitEval::Value { offset: 0.0 }).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let gain: f64 = w.iter().map(|x| x * x).sum();
        assert!(gain < 0.25);
    }

    #[test]
    fn rejects_underdetermined_fits() {
        assert!(savgol_weights(3, 3, FitEval::Value { offset: 0.0 }).is_none());
        assert!(savgol_weights(4, 1, FitEval::Value { offset: 0.0 }).is_none());
    }

    #[test]
    fn lagrange_midpoint() {
        assert_eq!(lagrange_weights(&[0.0, 1.0], 0.5), [0.5, 0.5]);
        let w = lagrange_weights(&[-1.0, 0.0, 1.0], 0.5);
        let q = |z: f64| 2.0 * z * z - z + 3.0;
        let got: f64 = w.iter().zip([-1.0, 0.0, 1.0]).map(|(a, z)| a * q(z)).sum();
        assert!((got - q(0.5)).abs() < 1e-12);
    }
}
