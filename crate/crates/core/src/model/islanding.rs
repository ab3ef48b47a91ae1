//! Islanding-event occurrence and duration model.
//!
//! One event may start in every hour of every representative day with the
//! same occurrence probability. The duration distribution is a GEV
//! discretized to whole hours and truncated at the design horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generalized extreme value distribution; durations in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gev {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl Gev {
    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if self.shape.abs() < 1e-12 {
            return (-(-z).exp()).exp();
        }
        let t = 1.0 + self.shape * z;
        if t <= 0.0 {
            // Outside the support: below the lower end for ξ > 0, above the upper end for ξ < 0.
            return if self.shape > 0.0 { 0.0 } else { 1.0 };
        }
        (-t.powf(-1.0 / self.shape)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandingModel {
    /// Probability that an event starts in a given hour.
    pub occurrence_probability: f64,
    /// `duration_pmf[k - 1]` is the probability that an event lasts exactly `k` hours.
    pub duration_pmf: Vec<f64>,
    pub gev: Option<Gev>,
    pub horizon_hours: usize,
}

impl IslandingModel {
    /// Last duration with positive probability; the number of islanded hours
    /// every event block must be able to cover.
    pub fn effective_horizon(&self) -> usize {
        self.duration_pmf
            .iter()
            .rposition(|&p| p > 0.0)
            .map(|i| i + 1)
            .unwrap_or(1)
    }

    /// Probability that an event is still ongoing in its `k`-th hour (k ≥ 1).
    pub fn survival(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        self.duration_pmf.iter().skip(k - 1).sum()
    }

    pub fn expected_duration(&self) -> f64 {
        self.duration_pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    /// Expected number of events per year given the day weights.
    pub fn annual_rate(&self, total_weight_days: f64, hours_per_day: usize) -> f64 {
        self.occurrence_probability * total_weight_days * hours_per_day as f64
    }
}

/// Discretizes the GEV into hourly ending probabilities over `1..=horizon`.
///
/// Mass is conditioned on a duration in `(0, horizon]`, so the result sums to
/// one and ratios between hours are those of the raw CDF differences.
/// `point_mass_hour` replaces the GEV by a degenerate distribution.
pub fn build_islanding_distribution(
    gev: Gev,
    horizon_hours: usize,
    occurrence_probability: f64,
    point_mass_hour: Option<usize>,
) -> Result<IslandingModel> {
    if horizon_hours < 1 {
        return Err(Error::InvalidArgument("islanding horizon must be at least 1 hour".into()));
    }
    if !(0.0..=1.0).contains(&occurrence_probability) {
        return Err(Error::InvalidArgument(format!(
            "occurrence probability {occurrence_probability} outside [0, 1]"
        )));
    }
    let duration_pmf = if let Some(hour) = point_mass_hour {
        if hour < 1 || hour > horizon_hours {
            return Err(Error::InvalidArgument(format!(
                "point mass at hour {hour} outside 1..={horizon_hours}"
            )));
        }
        let mut pmf = vec![0.0; horizon_hours];
        pmf[hour - 1] = 1.0;
        pmf
    } else {
        if !(gev.scale > 0.0) {
            return Err(Error::InvalidArgument("GEV scale must be positive".into()));
        }
        let cdf: Vec<f64> = (0..=horizon_hours).map(|k| gev.cdf(k as f64)).collect();
        let mass = cdf[horizon_hours] - cdf[0];
        if !(mass > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "GEV places no probability mass within the {horizon_hours}-hour horizon"
            )));
        }
        cdf.windows(2).map(|w| (w[1] - w[0]) / mass).collect()
    };
    Ok(IslandingModel {
        occurrence_probability,
        duration_pmf,
        gev: if point_mass_hour.is_some() { None } else { Some(gev) },
        horizon_hours,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GUMBEL: Gev = Gev {
        location: 8.0,
        scale: 4.0,
        shape: 0.0,
    };

    #[test]
    fn point_mass_override() {
        let m = build_islanding_distribution(GUMBEL, 24, 1e-4, Some(5)).unwrap();
        assert_eq!(m.duration_pmf[4], 1.0);
        assert_eq!(m.duration_pmf.iter().sum::<f64>(), 1.0);
        assert_eq!(m.effective_horizon(), 5);
        assert_eq!(m.expected_duration(), 5.0);
    }

    #[test]
    fn gumbel_matches_independent_cdf() {
        let m = build_islanding_distribution(GUMBEL, 24, 2.283e-4, None).unwrap();
        // Independent Gumbel evaluation.
        let f = |x: f64| (-(-(x - 8.0) / 4.0f64).exp()).exp();
        let mass = f(24.0) - f(0.0);
        assert_eq!(m.duration_pmf.len(), 24);
        for k in 1..=24 {
            let oracle = (f(k as f64) - f(k as f64 - 1.0)) / mass;
            assert!((m.duration_pmf[k - 1] - oracle).abs() < 1e-12, "hour {k}");
        }
        assert!((m.duration_pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(m.occurrence_probability, 2.283e-4);
    }

    #[test]
    fn no_mass_in_horizon_is_an_error() {
        let far = Gev {
            location: 500.0,
            scale: 1.0,
            shape: 0.5,
        };
        assert!(build_islanding_distribution(far, 24, 1e-4, None).is_err());
        assert!(build_islanding_distribution(GUMBEL, 0, 1e-4, None).is_err());
        assert!(build_islanding_distribution(GUMBEL, 24, 1.5, None).is_err());
    }

    #[test]
    fn survival_and_expectation_agree() {
        let m = build_islanding_distribution(GUMBEL, 24, 1e-4, None).unwrap();
        let via_survival: f64 = (1..=24).map(|k| m.survival(k)).sum();
        assert!((via_survival - m.expected_duration()).abs() < 1e-9);
        assert!((m.survival(1) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mass_sums_to_one_and_ratios_preserved(
            loc in 0.5f64..20.0,
            scale in 0.5f64..10.0,
            shape in -0.4f64..0.6,
            horizon in 6usize..40,
        ) {
            let gev = Gev { location: loc, scale, shape };
            if let Ok(m) = build_islanding_distribution(gev, horizon, 1e-4, None) {
                prop_assert!((m.duration_pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                let raw: Vec<f64> = (1..=horizon).map(|k| gev.cdf(k as f64) - gev.cdf(k as f64 - 1.0)).collect();
                for j in 0..horizon {
                    for k in 0..horizon {
                        if raw[k] > 1e-12 && m.duration_pmf[k] > 1e-12 {
                            let lhs = m.duration_pmf[j] / m.duration_pmf[k];
                            let rhs = raw[j] / raw[k];
                            prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs().max(1.0));
                        }
                    }
                }
            }
        }
    }
}
