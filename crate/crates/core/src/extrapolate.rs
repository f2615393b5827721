//! Richardson extrapolation of one-sided limits `lim_{eps -> 0+} f(eps)` for
//! functions analytic at `eps = 0`, sampled on the grid `eps_k = eps0 / 2^k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KmsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationSettings {
    pub eps0: f64,
    /// Deepest grid level `K`; levels `0..=K` are sampled.
    pub depth: usize,
    /// Highest polynomial order eliminated; older samples drop out of the window.
    pub max_order: usize,
    /// Successive diagonal values closer than this end the scan early.
    pub stop_tolerance: f64,
    /// Residual above which the result is rejected.
    pub accept_tolerance: f64,
}

impl Default for ExtrapolationSettings {
    fn default() -> Self {
        ExtrapolationSettings {
            eps0: 0.5,
            depth: 30,
            max_order: 8,
            stop_tolerance: 1e-10,
            accept_tolerance: 1e-6,
        }
    }
}

impl ExtrapolationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(KmsError::InvalidParameter(format!("eps0 must be positive, got {}", self.eps0)));
        }
        if self.depth == 0 || self.depth > 60 {
            return Err(KmsError::InvalidParameter(format!(
                "grid depth must lie in 1..=60, got {}",
                self.depth
            )));
        }
        if self.max_order == 0 {
            return Err(KmsError::InvalidParameter("max_order must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolated {
    pub value: Vec<f64>,
    /// Max-norm difference between the chosen diagonal entry and its predecessor.
    pub residual: f64,
    /// Grid level at which the value was taken.
    pub level: usize,
    pub converged: bool,
}

/// Extrapolates a vector-valued `f` to `eps = 0`. All grid samples are
/// evaluated in parallel; the table is then scanned for the first diagonal
/// entry within `stop_tolerance` of its predecessor, falling back to the entry
/// with the smallest such difference.
pub fn richardson<F>(f: F, settings: &ExtrapolationSettings) -> Result<Extrapolated>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    settings.validate()?;
    let samples: Vec<Vec<f64>> = (0..=settings.depth)
        .into_par_iter()
        .map(|k| f(settings.eps0 / 2f64.powi(k as i32)))
        .collect::<Result<_>>()?;
    let dim = samples[0].len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(KmsError::InvalidParameter("samples of differing length".into()));
    }

    // row k of the Neville table, columns 0..=min(k, max_order)
    let mut previous: Vec<Vec<f64>> = Vec::new();
    let mut best: Option<Extrapolated> = None;
    let mut last_diagonal: Option<Vec<f64>> = None;
    for (k, sample) in samples.into_iter().enumerate() {
        let width = k.min(settings.max_order);
        let mut row = vec![sample];
        for j in 1..=width {
            let factor = 2f64.powi(j as i32) - 1.0;
            let refined: Vec<f64> = row[j - 1]
                .iter()
                .zip(&previous[j - 1])
                .map(|(fine, coarse)| fine + (fine - coarse) / factor)
                .collect();
            row.push(refined);
        }
        let diagonal = row[width].clone();
        if let Some(last) = &last_diagonal {
            let residual = diagonal
                .iter()
                .zip(last)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let candidate = Extrapolated {
                value: diagonal.clone(),
                residual,
                level: k,
                converged: residual < settings.stop_tolerance,
            };
            if candidate.converged {
                return Ok(candidate);
            }
            if best.as_ref().is_none_or(|b| residual < b.residual) {
                best = Some(candidate);
            }
        }
        last_diagonal = Some(diagonal);
        previous = row;
    }
    let best = best.expect("depth >= 1 yields at least one comparison");
    if best.residual > settings.accept_tolerance {
        return Err(KmsError::Extrapolation {
            residual: best.residual,
            tolerance: settings.accept_tolerance,
            levels: settings.depth + 1,
        });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_limits_are_exact() {
        let f = |e: f64| Ok(vec![1.0 + 3.0 * e - 2.0 * e * e, 7.0 * e.powi(3)]);
        let r = richardson(f, &ExtrapolationSettings::default()).unwrap();
        assert!(r.converged);
        assert!((r.value[0] - 1.0).abs() < 1e-12);
        assert!(r.value[1].abs() < 1e-12);
    }

    #[test]
    fn rational_limit() {
        // (2 + e) / (3 + e^2) -> 2/3
        let f = |e: f64| Ok(vec![(2.0 + e) / (3.0 + e * e)]);
        let r = richardson(f, &ExtrapolationSettings::default()).unwrap();
        assert!((r.value[0] - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn non_analytic_limit_is_rejected() {
        let settings = ExtrapolationSettings {
            depth: 6,
            accept_tolerance: 1e-9,
            ..Default::default()
        };
        let f = |e: f64| Ok(vec![(1.0 / e).sin()]);
        assert!(matches!(richardson(f, &settings), Err(KmsError::Extrapolation { .. })));
    }

    #[test]
    fn invalid_settings() {
        let settings = ExtrapolationSettings {
            eps0: -1.0,
            ..Default::default()
        };
        assert!(richardson(|_| Ok(vec![0.0]), &settings).is_err());
    }
}
