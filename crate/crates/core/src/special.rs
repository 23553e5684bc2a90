//! Error function and Gaussian tail helpers.

/// Error function, accurate to ~1e-15 over the real line.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function without cancellation for large x.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}
