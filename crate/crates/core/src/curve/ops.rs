//! The individual stages of the event-curve pipeline.

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::stats;

/// Below this population standard deviation a series is treated as flat.
pub const DEGENERATE_STD: f64 = 1e-12;

/// `1 - cos(f_k, f_{k+1})` for every consecutive pair of frames.
pub fn consecutive_dissimilarity(seq: &FeatureSequence) -> Result<Vec<f64>> {
    let sq_norms: Vec<f64> = seq.frames().map(|f| f.iter().map(|v| v * v).sum()).collect();
    if let Some(index) = sq_norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroNormFrame { index });
    }
    Ok((0..seq.len() - 1)
        .map(|k| {
            let dot: f64 = seq.frame(k).iter().zip(seq.frame(k + 1)).map(|(a, b)| a * b).sum();
            // sqrt of the product keeps identical frames at exactly cos = 1
            let cos = (dot / (sq_norms[k] * sq_norms[k + 1]).sqrt()).clamp(-1.0, 1.0);
            1.0 - cos
        })
        .collect())
}

/// Output of [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub values: Vec<f64>,
    /// Set when the input was flat; `values` is then all zeros.
    pub degenerate: bool,
}

/// Zero mean, unit population variance.
pub fn standardize(series: &[f64]) -> Result<Standardized> {
    if series.len() < 2 {
        return Err(Error::Shape(format!(
            "standardize needs at least 2 values, got {}",
            series.len()
        )));
    }
    let mu = stats::mean(series);
    let sigma = stats::population_std(series);
    if sigma < DEGENERATE_STD {
        return Ok(Standardized {
            values: vec![0.0; series.len()],
            degenerate: true,
        });
    }
    Ok(Standardized {
        values: series.iter().map(|a| (a - mu) / sigma).collect(),
        degenerate: false,
    })
}

/// Linear interpolation of `series` onto `target_len` uniformly spaced
/// points covering the same index range. Both endpoints are kept exactly.
pub fn resample(series: &[f64], target_len: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 || target_len < 2 {
        return Err(Error::Shape(format!(
            "resample needs input and output length >= 2 (got {n} -> {target_len})"
        )));
    }
    if n == target_len {
        return Ok(series.to_vec());
    }
    let span_in = (n - 1) as f64;
    let span_out = (target_len - 1) as f64;
    Ok((0..target_len)
        .map(|i| {
            let pos = (i * (n - 1)) as f64 / span_out;
            let lo = (pos.floor() as usize).min(n - 1);
            if lo == n - 1 {
                return series[n - 1];
            }
            let frac = pos - lo as f64;
            debug_assert!(pos <= span_in);
            if frac == 0.0 {
                series[lo]
            } else {
                series[lo] + frac * (series[lo + 1] - series[lo])
            }
        })
        .collect())
}

/// Hann window `0.5 (1 - cos(2 pi n / (K - 1)))`, normalized to unit sum.
pub fn hann_window(kernel_size: usize) -> Result<Vec<f64>> {
    if kernel_size == 0 || kernel_size.is_multiple_of(2) {
        return Err(Error::InvalidKernel(format!(
            "kernel size must be odd and positive, got {kernel_size}"
        )));
    }
    if kernel_size == 1 {
        return Ok(vec![1.0]);
    }
    let denom = (kernel_size - 1) as f64;
    let mut raw: Vec<f64> = (0..=kernel_size / 2)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / denom).cos()))
        .collect();
    // mirror so the window is exactly symmetric
    for n in (0..kernel_size / 2).rev() {
        raw.push(raw[n]);
    }
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Maps an out-of-range index back into `0..n` by half-sample symmetric
/// reflection (`... b a | a b c ... x y z | z y ...`). Valid for offsets up
/// to `n` past either end.
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - 1 - i
    } else {
        i
    };
    debug_assert!((0..n).contains(&j));
    j as usize
}

/// Same-length convolution with a normalized Hann window of odd size
/// `kernel_size`, reflecting the signal at both boundaries.
///
/// Reflection includes the edge sample, so the padded signal is the even
/// extension of the input; the output then has the same sum as the input.
pub fn hann_smooth(series: &[f64], kernel_size: usize) -> Result<Vec<f64>> {
    let window = hann_window(kernel_size)?;
    let n = series.len();
    if n == 0 {
        return Err(Error::Shape("cannot smooth an empty series".into()));
    }
    if kernel_size > 2 * n - 1 {
        return Err(Error::InvalidKernel(format!(
            "kernel size {kernel_size} exceeds 2*len-1 = {} for a series of length {n}",
            2 * n - 1
        )));
    }
    if kernel_size == 1 {
        return Ok(series.to_vec());
    }
    let half = (kernel_size / 2) as isize;
    Ok((0..n as isize)
        .map(|i| {
            window
                .iter()
                .enumerate()
                .map(|(j, w)| w * series[reflect_index(i + j as isize - half, n)])
                .sum()
        })
        .collect())
}
