//! Utility metrics: confidence-interval overlap (CIO), the share of overlaps
//! above a threshold (APO), per-variable KL divergence, and the long-format
//! report they are collected into.

mod kl;
mod report;

pub use kl::{kl_divergence, kl_scores, normalize_kl, KlDirection, KlOptions, KlScore};
pub use report::{ReportRow, UtilityReport, REPORT_HEADER};

use crate::error::{Error, Result};
use crate::estimand::ConfidenceInterval;

/// Denominators used for the overlap ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CioVariant {
    /// Overlap relative to each interval's own width.
    #[default]
    OwnWidth,
    /// Overlap relative to `U_o − L_s` and `U_s − L_o`.
    Printed,
}

/// Overlap of one estimand's original and synthetic intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub id: String,
    pub value: f64,
}

pub fn cio(orig: &ConfidenceInterval, syn: &ConfidenceInterval) -> f64 {
    cio_with(orig, syn, CioVariant::OwnWidth)
}

pub fn cio_with(orig: &ConfidenceInterval, syn: &ConfidenceInterval, variant: CioVariant) -> f64 {
    let (lo, uo, ls, us) = (orig.lower, orig.upper, syn.lower, syn.upper);
    let wo = uo - lo;
    let ws = us - ls;
    if !(wo > 0.0) || !(ws > 0.0) {
        let both_points = !(wo > 0.0) && !(ws > 0.0);
        return if both_points && lo == ls && uo == us { 1.0 } else { 0.0 };
    }
    let overlap = uo.min(us) - lo.max(ls);
    let (d1, d2) = match variant {
        CioVariant::OwnWidth => (wo, ws),
        CioVariant::Printed => (uo - ls, us - lo),
    };
    let value = 0.5 * (overlap / d1 + overlap / d2);
    if value.is_nan() {
        return 0.0;
    }
    value.clamp(0.0, 1.0)
}

/// How an overlap is counted as "good".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApoRule {
    pub threshold: f64,
    /// `value > threshold` when true, `value >= threshold` otherwise.
    pub strict: bool,
}

impl Default for ApoRule {
    fn default() -> Self {
        ApoRule {
            threshold: 0.9,
            strict: true,
        }
    }
}

impl ApoRule {
    pub fn passes(&self, value: f64) -> bool {
        if self.strict {
            value > self.threshold
        } else {
            value >= self.threshold
        }
    }
}

/// Share of overlaps strictly above `threshold`.
pub fn apo(overlaps: &[f64], threshold: f64) -> Result<f64> {
    apo_with(overlaps, ApoRule { threshold, strict: true })
}

pub fn apo_with(overlaps: &[f64], rule: ApoRule) -> Result<f64> {
    if overlaps.is_empty() {
        return Err(Error::InvalidArgument("APO of an empty overlap list".into()));
    }
    Ok(overlaps.iter().filter(|&&v| rule.passes(v)).count() as f64 / overlaps.len() as f64)
}

/// Overlaps of one regression fit (or one group of mean estimates).
#[derive(Debug, Clone, PartialEq)]
pub struct FitOverlaps {
    pub fit_id: String,
    pub overlaps: Vec<f64>,
}

/// Utility of one synthetic set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetUtility {
    /// Mean over fits of each fit's mean overlap.
    pub average_cio: f64,
    /// APO over the pooled overlaps of all fits.
    pub apo: f64,
    pub fit_averages: Vec<(String, f64)>,
}

pub fn aggregate(fits: &[FitOverlaps], rule: ApoRule) -> Result<SetUtility> {
    if fits.is_empty() {
        return Err(Error::InvalidArgument("no fits to aggregate".into()));
    }
    let mut fit_averages = Vec::with_capacity(fits.len());
    for f in fits {
        fit_averages.push((f.fit_id.clone(), mean(&f.overlaps).map_err(|_| {
            Error::InvalidArgument(format!("fit {:?} has no overlaps", f.fit_id))
        })?));
    }
    let average_cio = fit_averages.iter().map(|(_, v)| v).sum::<f64>() / fit_averages.len() as f64;
    let pooled: Vec<f64> = fits.iter().flat_map(|f| f.overlaps.iter().copied()).collect();
    Ok(SetUtility {
        average_cio,
        apo: apo_with(&pooled, rule)?,
        fit_averages,
    })
}

/// Arithmetic mean; errors on an empty slice.
pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("mean of an empty list".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lower: f64, upper: f64) -> ConfidenceInterval {
        ConfidenceInterval {
            lower,
            upper,
            level: 0.95,
            center: 0.5 * (lower + upper),
        }
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(cio(&iv(0.0, 1.0), &iv(0.0, 1.0)), 1.0);
        assert_eq!(cio(&iv(0.0, 1.0), &iv(2.0, 3.0)), 0.0);
        assert!((cio(&iv(0.0, 2.0), &iv(1.0, 3.0)) - 0.5).abs() < 1e-12);
        assert_eq!(cio(&iv(0.0, 1.0), &iv(0.0, 4.0)), 0.625);
    }

    #[test]
    fn printed_variant() {
        assert_eq!(cio_with(&iv(0.0, 1.0), &iv(0.0, 1.0), CioVariant::Printed), 1.0);
        let d = cio_with(&iv(0.0, 1.0), &iv(2.0, 3.0), CioVariant::Printed);
        assert!((d - 1.0 / 3.0).abs() < 1e-12);
        assert!((cio_with(&iv(0.0, 2.0), &iv(1.0, 3.0), CioVariant::Printed) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_intervals() {
        assert_eq!(cio(&iv(1.0, 1.0), &iv(1.0, 1.0)), 1.0);
        assert_eq!(cio(&iv(1.0, 1.0), &iv(2.0, 2.0)), 0.0);
        assert_eq!(cio(&iv(1.0, 1.0), &iv(0.0, 2.0)), 0.0);
    }

    #[test]
    fn apo_examples() {
        assert!((apo(&[0.95, 0.85, 0.91], 0.9).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(apo(&[1.0; 4], 0.9).unwrap(), 1.0);
        assert_eq!(apo(&[0.0; 4], 0.9).unwrap(), 0.0);
        assert_eq!(apo(&[0.9], 0.9).unwrap(), 0.0);
        assert_eq!(apo_with(&[0.9], ApoRule { threshold: 0.9, strict: false }).unwrap(), 1.0);
        assert!(apo(&[], 0.9).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let one = aggregate(&[FitOverlaps { fit_id: "a".into(), overlaps: vec![1.0, 0.8] }], ApoRule::default()).unwrap();
        assert!((one.average_cio - 0.9).abs() < 1e-15);
        let two = aggregate(
            &[
                FitOverlaps { fit_id: "a".into(), overlaps: vec![0.9] },
                FitOverlaps { fit_id: "b".into(), overlaps: vec![0.7] },
            ],
            ApoRule::default(),
        )
        .unwrap();
        assert!((two.average_cio - 0.8).abs() < 1e-15);
        let pooled = aggregate(
            &[
                FitOverlaps { fit_id: "a".into(), overlaps: vec![0.91] },
                FitOverlaps { fit_id: "b".into(), overlaps: vec![0.89] },
            ],
            ApoRule::default(),
        )
        .unwrap();
        assert_eq!(pooled.apo, 0.5);
        assert!(aggregate(&[], ApoRule::default()).is_err());
        assert!(aggregate(&[FitOverlaps { fit_id: "e".into(), overlaps: vec![] }], ApoRule::default()).is_err());
    }
}
