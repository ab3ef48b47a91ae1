use crate::error::{Error, Result};

/// Present value of one unit paid yearly over `lifetime_years` at rate `rate`.
///
/// Investment costs are divided by this factor to obtain equivalent annual
/// costs. A zero rate is rejected rather than special-cased.
pub fn annuity_factor(rate: f64, lifetime_years: f64) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "interest rate must be positive, got {rate}"
        )));
    }
    if !(lifetime_years > 0.0) || !lifetime_years.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lifetime must be positive, got {lifetime_years}"
        )));
    }
    Ok((1.0 - (1.0 + rate).powf(-lifetime_years)) / rate)
}
