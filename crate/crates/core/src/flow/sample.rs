use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Latent;
use crate::curve::EventCurve;
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_STEPS: usize = 96;

/// Condition fed to a velocity field. `None` entries are the null condition
/// (zero curve channel, null class).
#[derive(Debug, Clone, Copy, Default)]
pub struct Condition<'a> {
    pub curve: Option<&'a [f64]>,
    pub class_id: Option<usize>,
}

impl<'a> Condition<'a> {
    pub fn null() -> Self {
        Self::default()
    }
}

/// Anything that predicts the velocity `eps - x0` at a point of the path.
pub trait VelocityField {
    /// `(channels, length)` of the latents the field acts on.
    fn shape(&self) -> (usize, usize);
    fn velocity(&self, x_t: &Latent, t: f64, cond: &Condition) -> Result<Latent>;
}

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub steps: usize,
    /// Guidance scale `w` in `v_null + w (v_cond - v_null)`.
    pub cfg_scale: f64,
    pub seed: u64,
    pub curve: Option<EventCurve>,
    pub class_id: Option<usize>,
}

impl SampleConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            steps: DEFAULT_SAMPLE_STEPS,
            cfg_scale: 1.0,
            seed,
            curve: None,
            class_id: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("sampling needs at least one step".into()));
        }
        if !(self.cfg_scale.is_finite() && self.cfg_scale >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "guidance scale must be finite and non-negative, got {}",
                self.cfg_scale
            )));
        }
        Ok(())
    }
}

/// Sample with RNG stream 0.
pub fn sample<F: VelocityField + ?Sized>(field: &F, cfg: &SampleConfig) -> Result<Latent> {
    sample_item(field, cfg, 0)
}

/// Euler integration of `dx = -v dt` from `t = 1` to `t = 0` in `cfg.steps`
/// uniform steps, starting from standard normal noise drawn from the stream
/// `(cfg.seed, item)`. Items are independent of each other and of the order
/// they are run in.
pub fn sample_item<F: VelocityField + ?Sized>(field: &F, cfg: &SampleConfig, item: u64) -> Result<Latent> {
    cfg.validate()?;
    let (channels, length) = field.shape();
    let curve = cfg.curve.as_ref().map(EventCurve::values);
    if let Some(c) = curve {
        if c.len() != length {
            return Err(Error::Shape(format!(
                "curve length {} does not match latent length {length}",
                c.len()
            )));
        }
    }
    let cond = Condition {
        curve,
        class_id: cfg.class_id,
    };
    let null = Condition::null();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(item);
    let noise: Vec<f64> = (0..channels * length)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut x = Latent::new(channels, length, noise)?;

    let w = cfg.cfg_scale;
    let n = cfg.steps;
    for k in 0..n {
        let t = (n - k) as f64 / n as f64;
        let t_next = (n - k - 1) as f64 / n as f64;
        let v = if w == 1.0 {
            field.velocity(&x, t, &cond)?
        } else if w == 0.0 {
            field.velocity(&x, t, &null)?
        } else {
            let v_cond = field.velocity(&x, t, &cond)?;
            let mut v_null = field.velocity(&x, t, &null)?;
            for (u, c) in v_null.data_mut().iter_mut().zip(v_cond.data()) {
                *u += w * (c - *u);
            }
            v_null
        };
        x.check_shape(&v)?;
        let dt = t - t_next;
        for (xi, vi) in x.data_mut().iter_mut().zip(v.data()) {
            *xi -= dt * vi;
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at t = {t_next}")));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Velocity `(x - mu) / t`, the exact field for a point mass at `mu`.
    struct PointMass {
        mu: f64,
    }

    impl VelocityField for PointMass {
        fn shape(&self) -> (usize, usize) {
            (2, 3)
        }
        fn velocity(&self, x: &Latent, t: f64, _: &Condition) -> Result<Latent> {
            Latent::new(2, 3, x.data().iter().map(|v| (v - self.mu) / t).collect())
        }
    }

    struct Exploding;

    impl VelocityField for Exploding {
        fn shape(&self) -> (usize, usize) {
            (1, 2)
        }
        fn velocity(&self, _: &Latent, _: f64, _: &Condition) -> Result<Latent> {
            Ok(Latent {
                channels: 1,
                length: 2,
                data: vec![f64::INFINITY; 2],
            })
        }
    }

    #[test]
    fn point_mass_is_reached() {
        let field = PointMass { mu: 1.5 };
        for steps in [1, 7, 96] {
            let cfg = SampleConfig {
                steps,
                ..SampleConfig::new(3)
            };
            let x = sample(&field, &cfg).unwrap();
            assert!(x.data().iter().all(|v| (v - 1.5).abs() < 1e-12), "{steps}: {x:?}");
        }
    }

    #[test]
    fn streams_are_independent_of_order() {
        let field = PointMass { mu: 0.0 };
        let cfg = SampleConfig {
            steps: 3,
            ..SampleConfig::new(11)
        };
        let a = sample_item(&field, &cfg, 5).unwrap();
        let _ = sample_item(&field, &cfg, 2).unwrap();
        assert_eq!(sample_item(&field, &cfg, 5).unwrap(), a);
    }

    #[test]
    fn blow_up_is_numerical_error() {
        let cfg = SampleConfig {
            steps: 4,
            ..SampleConfig::new(0)
        };
        assert!(matches!(sample(&Exploding, &cfg), Err(Error::Numerical(_))));
    }

    #[test]
    fn zero_steps_rejected() {
        let cfg = SampleConfig {
            steps: 0,
            ..SampleConfig::new(0)
        };
        assert!(sample(&PointMass { mu: 0.0 }, &cfg).is_err());
    }
}
