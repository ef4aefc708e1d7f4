use crate::scalar::Scalar;

/// `x + y − √(x² + y² + 2ε²)`; zero exactly on `x ≥ 0, y ≥ 0, x·y = 0` when `ε = 0`.
pub fn smoothed_complementarity<T: Scalar>(x: T, y: T, eps: T) -> T {
    x + y - (x * x + y * y + T::lit(2.0) * eps * eps).sqrt()
}

/// `(∂/∂x, ∂/∂y)`, defined everywhere for `ε > 0`.
pub fn smoothed_complementarity_grad<T: Scalar>(x: T, y: T, eps: T) -> (T, T) {
    let r = (x * x + y * y + T::lit(2.0) * eps * eps).sqrt();
    (T::one() - x / r, T::one() - y / r)
}
