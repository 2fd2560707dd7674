//! Rectified flow over small latents, conditioned on an event curve that is
//! appended to the latent as one extra channel.
//!
//! Data sits at `t = 0` and noise at `t = 1` on the straight path
//! `x_t = t * eps + (1 - t) * x0`; the network regresses the constant
//! velocity `eps - x0`. Sampling integrates from noise back to data.

mod checkpoint;
mod model;
mod optim;
mod sample;
mod swap;
mod synth;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{flow_loss, Architecture, FlowModel, Gradients, LossOutput, TrainItem};
pub use optim::{AdamW, AdamWConfig};
pub use sample::{sample, sample_item, Condition, SampleConfig, VelocityField, DEFAULT_SAMPLE_STEPS};
pub use swap::{rms_envelope, swap_fidelity, SwapReport};
pub use synth::{synth_dataset, synth_latent, synth_video_curves, SynthItem, SYNTH_FRAME_RATE_HZ};
pub use train::{train, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::curve::EventCurve;
use crate::error::{Error, Result};

/// A `channels x length` latent, stored channel after channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    channels: usize,
    length: usize,
    data: Vec<f64>,
}

impl Latent {
    pub fn new(channels: usize, length: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::Shape(format!("latent shape must be positive, got {channels}x{length}")));
        }
        if data.len() != channels * length {
            return Err(Error::Shape(format!(
                "latent {channels}x{length} needs {} values, got {}",
                channels * length,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("latent contains non-finite values".into()));
        }
        Ok(Self { channels, length, data })
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Self {
            channels,
            length,
            data: vec![0.0; channels * length],
        }
    }

    pub fn filled(channels: usize, length: usize, value: f64) -> Self {
        Self {
            channels,
            length,
            data: vec![value; channels * length],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.length..(c + 1) * self.length]
    }

    pub fn get(&self, c: usize, j: usize) -> f64 {
        self.data[c * self.length + j]
    }

    /// Drops the last channel.
    pub fn strip_last_channel(&self) -> Result<Latent> {
        if self.channels < 2 {
            return Err(Error::Shape("cannot strip the only channel".into()));
        }
        Latent::new(
            self.channels - 1,
            self.length,
            self.data[..(self.channels - 1) * self.length].to_vec(),
        )
    }

    pub(crate) fn check_shape(&self, other: &Latent) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "latent shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

/// Point at time `t` on the straight path from `x0` (t = 0) to `eps` (t = 1).
pub fn interpolate_path(x0: &Latent, eps: &Latent, t: f64) -> Result<Latent> {
    x0.check_shape(eps)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidData(format!("t must lie in [0, 1], got {t}")));
    }
    let data = if t == 0.0 {
        x0.data.clone()
    } else if t == 1.0 {
        eps.data.clone()
    } else {
        x0.data
            .iter()
            .zip(&eps.data)
            .map(|(a, e)| t * e + (1.0 - t) * a)
            .collect()
    };
    Ok(Latent {
        channels: x0.channels,
        length: x0.length,
        data,
    })
}

/// Appends the curve as a final channel; no curve appends zeros, which is
/// the null condition.
pub fn concat_condition(x_t: &Latent, curve: Option<&EventCurve>) -> Result<Latent> {
    concat_values(x_t, curve.map(EventCurve::values))
}

pub(crate) fn concat_values(x_t: &Latent, curve: Option<&[f64]>) -> Result<Latent> {
    let mut data = Vec::with_capacity((x_t.channels + 1) * x_t.length);
    data.extend_from_slice(&x_t.data);
    match curve {
        Some(c) if c.len() != x_t.length => {
            return Err(Error::Shape(format!(
                "curve length {} does not match latent length {}",
                c.len(),
                x_t.length
            )))
        }
        Some(c) => data.extend_from_slice(c),
        None => data.resize((x_t.channels + 1) * x_t.length, 0.0),
    }
    Ok(Latent {
        channels: x_t.channels + 1,
        length: x_t.length,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(d: usize, l: usize, offset: f64) -> Latent {
        Latent::new(d, l, (0..d * l).map(|i| i as f64 * 0.1 + offset).collect()).unwrap()
    }

    #[test]
    fn path_endpoints_are_exact() {
        let x0 = ramp(2, 3, 0.7);
        let eps = ramp(2, 3, -1.9);
        assert_eq!(interpolate_path(&x0, &eps, 0.0).unwrap(), x0);
        assert_eq!(interpolate_path(&x0, &eps, 1.0).unwrap(), eps);
    }

    #[test]
    fn path_quarter_point() {
        let x = interpolate_path(&Latent::zeros(2, 4), &Latent::filled(2, 4, 4.0), 0.25).unwrap();
        assert!(x.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn path_rejects_shape_mismatch() {
        assert!(matches!(
            interpolate_path(&Latent::zeros(2, 4), &Latent::zeros(4, 2), 0.5),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn concat_appends_curve_row() {
        let x = ramp(2, 4, 0.0);
        let curve = EventCurve::new(vec![1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        let out = concat_condition(&x, Some(&curve)).unwrap();
        assert_eq!(out.shape(), (3, 4));
        assert_eq!(out.channel(2), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(out.strip_last_channel().unwrap(), x);
    }

    #[test]
    fn concat_null_appends_zeros() {
        let out = concat_condition(&ramp(2, 4, 1.0), None).unwrap();
        assert_eq!(out.channel(2), &[0.0; 4]);
    }

    #[test]
    fn concat_rejects_wrong_curve_length() {
        let curve = EventCurve::new(vec![1.0, 2.0, 3.0], 1.0).unwrap();
        assert!(matches!(
            concat_condition(&ramp(2, 4, 0.0), Some(&curve)),
            Err(Error::Shape(_))
        ));
    }
}
