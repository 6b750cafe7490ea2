//! Physical constants and parsing of time quantities with unit suffixes.

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const PS_PER_S: f64 = 1e12;

/// Conversion between a Gaussian FWHM and its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// Parses a time such as `823ps`, `-1.2ms`, `10 ns` or `100s` into picoseconds.
/// A bare number is taken as picoseconds.
pub fn parse_time_ps(text: &str) -> Result<f64> {
    let t = text.trim();
    let split = t
        .find(|c: char| c.is_ascii_alphabetic() || c == 'µ')
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::format("time value", format!("cannot parse number in `{text}`")))?;
    let scale = match unit.trim() {
        "" | "ps" => 1.0,
        "fs" => 1e-3,
        "ns" => 1e3,
        "us" | "µs" => 1e6,
        "ms" => 1e9,
        "s" => 1e12,
        other => {
            return Err(Error::format(
                "time value",
                format!("unknown unit `{other}` in `{text}`"),
            ))
        }
    };
    if !value.is_finite() {
        return Err(Error::format("time value", format!("non-finite `{text}`")));
    }
    Ok(value * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_time_ps("823ps").unwrap(), 823.0);
        assert_eq!(parse_time_ps("82.3").unwrap(), 82.3);
        assert!((parse_time_ps("-1.2ms").unwrap() + 1.2e9).abs() < 1e-3);
        assert_eq!(parse_time_ps("10 ns").unwrap(), 10_000.0);
        assert_eq!(parse_time_ps("2us").unwrap(), 2e6);
        assert_eq!(parse_time_ps("100s").unwrap(), 1e14);
        assert!(parse_time_ps("3 parsecs").is_err());
        assert!(parse_time_ps("ms").is_err());
    }
}
