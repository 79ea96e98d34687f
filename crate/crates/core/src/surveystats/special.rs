//! Normal and chi-square tail probabilities.

use statrs::function::erf::erfc;
use statrs::function::gamma::checked_gamma_ur;

use super::SurveyError;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided Wald p-value `2Φ(−|z|)`.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Upper tail `P(χ²_df > x)` via the regularized upper incomplete gamma.
pub fn chi_square_sf(x: f64, df: f64) -> Result<f64, SurveyError> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(SurveyError::InvalidDf(df));
    }
    if !x.is_finite() {
        return Err(SurveyError::InvalidDf(x));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    checked_gamma_ur(df / 2.0, x / 2.0).map_err(|_| SurveyError::InvalidDf(df))
}
