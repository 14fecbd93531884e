//! Closed-form relations between lifetime, coherence and visibility.

use crate::error::{Error, Result};

fn check_times(t1: f64, t2: f64) -> Result<()> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::invalid(
            "relations",
            format!("t1 and t2 must be positive, got {t1} and {t2}"),
        ));
    }
    if t2 > 2.0 * t1 {
        return Err(Error::Domain { t2, limit: 2.0 * t1 });
    }
    Ok(())
}

/// HOM visibility of an unfiltered, ungated source: `t2 / (2 t1)`.
pub fn fixed_bias_visibility(t1: f64, t2: f64) -> Result<f64> {
    check_times(t1, t2)?;
    Ok(t2 / (2.0 * t1))
}

/// Pure dephasing time from `1/t2 = 1/(2 t1) + 1/t2*`.
///
/// Infinite when `t2 == 2 t1`.
pub fn dephasing_time(t1: f64, t2: f64) -> Result<f64> {
    check_times(t1, t2)?;
    let rate = 1.0 / t2 - 0.5 / t1;
    if rate <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / rate)
}

/// Whether a source with this visibility and g²(0) can herald entanglement:
/// `visibility > 2 g2_zero`, strictly.
pub fn entanglement_criterion(visibility: f64, g2_zero: f64) -> bool {
    visibility > 2.0 * g2_zero
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dephasing_examples() {
        assert!((dephasing_time(800.0, 60.0).unwrap() - 62.337_662_3).abs() < 1e-6);
        assert_eq!(dephasing_time(800.0, 1600.0).unwrap(), f64::INFINITY);
        assert!((dephasing_time(1e15, 60.0).unwrap() - 60.0).abs() < 1e-9);
        assert!(matches!(dephasing_time(800.0, 1601.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn fixed_bias_examples() {
        assert_eq!(fixed_bias_visibility(800.0, 60.0).unwrap(), 0.0375);
        assert_eq!(fixed_bias_visibility(800.0, 1600.0).unwrap(), 1.0);
        assert_eq!(fixed_bias_visibility(800.0, 120.0).unwrap(), 0.075);
        assert!(fixed_bias_visibility(800.0, 2000.0).is_err());
        assert!(fixed_bias_visibility(0.0, 1.0).is_err());
    }

    #[test]
    fn criterion_is_strict() {
        assert!(entanglement_criterion(0.64, 0.03));
        assert!(!entanglement_criterion(0.05, 0.03));
        assert!(!entanglement_criterion(0.06, 0.03));
    }
}
