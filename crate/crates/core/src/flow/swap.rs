use serde::Serialize;

use super::sample::{sample_item, SampleConfig, VelocityField};
use super::Latent;
use crate::curve::{standardize, EventCurve};
use crate::error::{Error, Result};
use crate::stats;

/// Root-mean-square over channels at every timestep.
pub fn rms_envelope(x: &Latent) -> Vec<f64> {
    let (d, l) = x.shape();
    (0..l)
        .map(|j| ((0..d).map(|c| x.get(c, j).powi(2)).sum::<f64>() / d as f64).sqrt())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapReport {
    /// Correlation per curve, `None` for skipped curves.
    pub per_item: Vec<Option<f64>>,
    pub skipped: Vec<usize>,
    pub mean: f64,
}

/// Samples once per curve (item `i` uses RNG stream `i`) and correlates the
/// RMS envelope of each sample with the curve that conditioned it. Curves
/// with zero variance are skipped. `cfg.curve` is ignored.
pub fn swap_fidelity<F: VelocityField + ?Sized>(
    field: &F,
    curves: &[EventCurve],
    cfg: &SampleConfig,
) -> Result<SwapReport> {
    if curves.is_empty() {
        return Err(Error::InvalidData("swap fidelity needs at least one curve".into()));
    }
    let mut per_item = Vec::with_capacity(curves.len());
    let mut skipped = Vec::new();
    for (i, curve) in curves.iter().enumerate() {
        if curve.degenerate || stats::population_std(curve.values()) < 1e-12 {
            skipped.push(i);
            per_item.push(None);
            continue;
        }
        let item_cfg = SampleConfig {
            curve: Some(curve.clone()),
            ..cfg.clone()
        };
        let x = sample_item(field, &item_cfg, i as u64)?;
        let env = standardize(&rms_envelope(&x))?;
        let target = standardize(curve.values())?;
        let r = if env.degenerate {
            None
        } else {
            stats::pearson(&env.values, &target.values)
        };
        if r.is_none() {
            skipped.push(i);
        }
        per_item.push(r);
    }
    let valid: Vec<f64> = per_item.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::InvalidData("every curve was skipped".into()));
    }
    Ok(SwapReport {
        per_item,
        skipped,
        mean: stats::mean(&valid),
    })
}
