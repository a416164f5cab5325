use std::fmt;

use serde::{Deserialize, Serialize};

use super::PsychometricsError;
use super::irt::{A_MAX, A_MIN};

/// Qualitative discrimination labels (Baker's cutoffs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminationBand {
    VeryLow,
    Low,
    Moderate,
    High,
    VeryHigh,
}

impl fmt::Display for DiscriminationBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscriminationBand::VeryLow => "Very Low",
            DiscriminationBand::Low => "Low",
            DiscriminationBand::Moderate => "Moderate",
            DiscriminationBand::High => "High",
            DiscriminationBand::VeryHigh => "Very High",
        })
    }
}

// Lower edges of Low, Moderate, High and Very High. Intervals are half-open
// so the published cutoffs (which leave 0.01-wide gaps) cover [0, 2].
const CUTOFFS: [(f64, DiscriminationBand); 4] = [
    (1.70, DiscriminationBand::VeryHigh),
    (1.35, DiscriminationBand::High),
    (0.65, DiscriminationBand::Moderate),
    (0.35, DiscriminationBand::Low),
];

pub fn classify_discrimination(a: f64) -> Result<DiscriminationBand, PsychometricsError> {
    if !(A_MIN..=A_MAX).contains(&a) {
        return Err(PsychometricsError::DiscriminationOutOfRange(a));
    }
    Ok(CUTOFFS
        .iter()
        .find(|(edge, _)| a >= *edge)
        .map(|(_, band)| *band)
        .unwrap_or(DiscriminationBand::VeryLow))
}
