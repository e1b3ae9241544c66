use std::fmt;

use serde::{Deserialize, Serialize};

/// A count out of a total. Serialized with its value for convenience; the
/// value is ignored when reading back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "RatioOut", from = "RatioIn")]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Self {
            numerator,
            denominator,
        }
    }

    /// 0 when the denominator is 0.
    pub fn value(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }

    /// Nearest whole percent, halves rounded up, computed exactly.
    pub fn percent(&self) -> u64 {
        if self.denominator == 0 {
            return 0;
        }
        (200 * self.numerator + self.denominator) / (2 * self.denominator)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} ({}%)",
            self.numerator,
            self.denominator,
            self.percent()
        )
    }
}

#[derive(Serialize)]
struct RatioOut {
    numerator: u64,
    denominator: u64,
    value: f64,
}

impl From<Ratio> for RatioOut {
    fn from(r: Ratio) -> Self {
        Self {
            numerator: r.numerator,
            denominator: r.denominator,
            value: r.value(),
        }
    }
}

#[derive(Deserialize)]
struct RatioIn {
    numerator: u64,
    denominator: u64,
}

impl From<RatioIn> for Ratio {
    fn from(r: RatioIn) -> Self {
        Self::new(r.numerator, r.denominator)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(Ratio::new(146, 673).percent(), 22);
        assert_eq!(Ratio::new(14, 16).percent(), 88);
        assert_eq!(Ratio::new(1, 8).percent(), 13);
        assert_eq!(Ratio::new(1, 3).percent(), 33);
        assert_eq!(Ratio::new(0, 0).percent(), 0);
        assert_eq!(Ratio::new(0, 0).value(), 0.0);
    }
}
