use super::ChannelError;

/// Reference loss at 1 m, in dB.
pub const L0_DB: f64 = 47.86;
/// Pathloss exponent.
pub const EXPONENT: f64 = 2.5;

/// Log-distance pathloss `L0 + 10·β·log10(d / 1 m)`. Distances below 1 m
/// are evaluated at 1 m.
pub fn pathloss_db(d: f64) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::InvalidDistance(d));
    }
    Ok(L0_DB + EXPONENT * 10.0 * d.max(1.0).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        assert!((pathloss_db(1.0).unwrap() - 47.86).abs() < 1e-9);
        assert!((pathloss_db(10.0).unwrap() - 72.86).abs() < 1e-9);
        assert!((pathloss_db(100.0).unwrap() - 97.86).abs() < 1e-9);
    }

    #[test]
    fn short_range_is_clamped() {
        assert_eq!(pathloss_db(0.25).unwrap(), pathloss_db(1.0).unwrap());
    }

    #[test]
    fn rejects_non_positive_distance() {
        assert!(pathloss_db(0.0).is_err());
        assert!(pathloss_db(-3.0).is_err());
        assert!(pathloss_db(f64::NAN).is_err());
    }
}
