//! Complementary error function and the standard normal tail `Q`.

/// Complementary error function (musl's implementation via `libm`).
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal upper tail `Q(x) = P(Z > x) = erfc(x/√2)/2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}
