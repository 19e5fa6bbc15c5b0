//! Orthogonal change of variables with `(Ux)₁ = Σ x_i / √N`.
//!
//! `U` is the Householder reflection exchanging `e₁` and `1/√N`. It is
//! symmetric and involutive, so `U⁻¹ = U`; both apply in O(N).

fn reflect(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n <= 1 {
        return x.to_vec();
    }
    let inv_sqrt = 1.0 / (n as f64).sqrt();
    // v = e₁ − 1/√N, ‖v‖² = 2 − 2/√N.
    let sum: f64 = x.iter().sum();
    let v_dot_x = x[0] - sum * inv_sqrt;
    let scale = 2.0 * v_dot_x / (2.0 - 2.0 * inv_sqrt);
    let mut y: Vec<f64> = x.iter().map(|xi| xi + scale * inv_sqrt).collect();
    y[0] -= scale;
    y
}

pub fn apply_u(x: &[f64]) -> Vec<f64> {
    reflect(x)
}

pub fn apply_u_inverse(y: &[f64]) -> Vec<f64> {
    reflect(y)
}
