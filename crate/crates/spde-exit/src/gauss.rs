//! Gaussian special functions shared by the reference solver and the bound
//! constants. Thin wrappers over `libm`'s erf family plus the closed-form
//! exponential moment of a folded normal.

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal distribution function, `Phi(z)`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Heat kernel `p_t(z) = exp(-z^2 / (2t)) / sqrt(2 pi t)`.
pub fn heat_kernel(t: f64, z: f64) -> f64 {
    debug_assert!(t > 0.0);
    normal_pdf(z / t.sqrt()) / t.sqrt()
}

/// `E exp(lambda |X|)` for `X ~ N(c, sigma^2)`, exact:
/// `e^{lc + l^2 s^2 / 2} Phi(c/s + l s) + e^{-lc + l^2 s^2 / 2} Phi(-c/s + l s)`.
pub fn abs_normal_mgf(lambda: f64, c: f64, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let half = 0.5 * lambda * lambda * sigma * sigma;
    let plus = (lambda * c + half).exp() * normal_cdf(c / sigma + lambda * sigma);
    let minus = (-lambda * c + half).exp() * normal_cdf(-c / sigma + lambda * sigma);
    plus + minus
}
