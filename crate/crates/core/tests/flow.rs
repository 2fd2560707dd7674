//! Guidance, determinism and the dropout ablation on small models.

mod common;

use common::*;
use evc_core::curve::EventCurve;
use evc_core::flow::{
    sample, swap_fidelity, synth_dataset, synth_video_curves, train, Architecture, Condition, FlowModel, Latent,
    SampleConfig, TrainConfig, VelocityField,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn trained_small(dropout: f64) -> FlowModel {
    let arch = small_arch();
    let data = synth_dataset(3, 64, arch.channels, arch.length, arch.class_count).unwrap();
    let cfg = TrainConfig {
        steps: 30,
        batch_size: 8,
        learning_rate: 1e-3,
        condition_dropout: dropout,
        seed: 4,
        ..Default::default()
    };
    train(&cfg, arch, &data).unwrap().model
}

/// Euler with the conditional velocity only.
fn conditional_euler(model: &FlowModel, cfg: &SampleConfig) -> Latent {
    let (d, l) = model.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let noise: Vec<f64> = (0..d * l).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut x = Latent::new(d, l, noise).unwrap();
    let cond = Condition {
        curve: cfg.curve.as_ref().map(EventCurve::values),
        class_id: cfg.class_id,
    };
    let n = cfg.steps;
    for k in 0..n {
        let t = (n - k) as f64 / n as f64;
        let dt = t - (n - k - 1) as f64 / n as f64;
        let v = model.velocity(&x, t, &cond).unwrap();
        for (xi, vi) in x.data_mut().iter_mut().zip(v.data()) {
            *xi -= dt * vi;
        }
    }
    x
}

fn guided(model: &FlowModel, w: f64) -> SampleConfig {
    let arch = model.architecture();
    let curve = synth_video_curves(8, 1, arch.length).unwrap().remove(0);
    SampleConfig {
        steps: 12,
        cfg_scale: w,
        curve: Some(curve),
        class_id: Some(1),
        ..SampleConfig::new(21)
    }
}

#[test]
fn unit_guidance_is_the_conditional_sampler() {
    let model = trained_small(0.1);
    let cfg = guided(&model, 1.0);
    assert_eq!(sample(&model, &cfg).unwrap(), conditional_euler(&model, &cfg));
}

#[test]
fn zero_guidance_is_the_unconditional_sampler() {
    let model = trained_small(0.1);
    let cfg = guided(&model, 0.0);
    let unconditional = SampleConfig {
        curve: None,
        class_id: None,
        cfg_scale: 1.0,
        ..cfg.clone()
    };
    assert_eq!(sample(&model, &cfg).unwrap(), sample(&model, &unconditional).unwrap());
    assert_eq!(
        sample(&model, &cfg).unwrap(),
        conditional_euler(&model, &unconditional)
    );
}

#[test]
fn guidance_extrapolates_between_the_two_fields() {
    let model = trained_small(0.1);
    let cfg = guided(&model, 1.0);
    let x = Latent::filled(model.shape().0, model.shape().1, 0.3);
    let cond = Condition {
        curve: cfg.curve.as_ref().map(EventCurve::values),
        class_id: Some(1),
    };
    let vc = model.velocity(&x, 0.5, &cond).unwrap();
    let vn = model.velocity(&x, 0.5, &Condition::null()).unwrap();
    assert_ne!(vc, vn);
    let a = sample(&model, &guided(&model, 2.0)).unwrap();
    let b = sample(&model, &guided(&model, 1.0)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn training_and_sampling_repeat_exactly() {
    let a = trained_small(0.1);
    let b = trained_small(0.1);
    assert_eq!(a.to_checkpoint_bytes(), b.to_checkpoint_bytes());
    let cfg = guided(&a, 2.0);
    assert_eq!(sample(&a, &cfg).unwrap(), sample(&b, &cfg).unwrap());
    assert_ne!(trained_small(0.5), a);
}

#[test]
fn full_dropout_ignores_the_condition_input() {
    // with every condition nulled during training, the curve and class
    // inputs only ever saw zeros, so their first-layer weights get no data
    // gradient and decay towards zero under weight decay alone
    let ablated = trained_small(1.0);
    let arch = ablated.architecture();
    let x = Latent::filled(arch.channels, arch.length, 0.1);
    let curve = vec![1.0; arch.length];
    let with = ablated
        .velocity(
            &x,
            0.5,
            &Condition {
                curve: Some(&curve),
                class_id: None,
            },
        )
        .unwrap();
    let without = ablated.velocity(&x, 0.5, &Condition::null()).unwrap();
    let conditioned = trained_small(0.0);
    let with_c = conditioned
        .velocity(
            &x,
            0.5,
            &Condition {
                curve: Some(&curve),
                class_id: None,
            },
        )
        .unwrap();
    let without_c = conditioned.velocity(&x, 0.5, &Condition::null()).unwrap();
    let gap = |a: &Latent, b: &Latent| a.data().iter().zip(b.data()).map(|(u, v)| (u - v).abs()).sum::<f64>();
    assert!(gap(&with, &without) < gap(&with_c, &without_c));
}

#[test]
#[ignore = "trains two desk-scale models; run with --release -- --ignored"]
fn dropout_ablation_loses_the_curve() {
    let arch = Architecture::default();
    let data = synth_dataset(SWAP_DATA_SEED, SWAP_DATA_ITEMS, arch.channels, arch.length, arch.class_count).unwrap();
    let curves = synth_video_curves(SWAP_CURVE_SEED, 32, arch.length).unwrap();
    let sc = SampleConfig {
        cfg_scale: SWAP_CFG_SCALE,
        class_id: Some(0),
        ..SampleConfig::new(SWAP_SAMPLE_SEED)
    };
    let base = swap_train_config();
    let ablated = TrainConfig {
        condition_dropout: 1.0,
        ..base.clone()
    };
    let with = swap_fidelity(&train(&base, arch, &data).unwrap().model, &curves, &sc).unwrap();
    // the ablated model never saw a condition, so its conditional branch is
    // untrained and sampling through it can diverge; w = 0 samples the only
    // field it learned, the unconditional one
    let plain = SampleConfig {
        cfg_scale: 0.0,
        ..sc.clone()
    };
    let without = swap_fidelity(&train(&ablated, arch, &data).unwrap().model, &curves, &plain).unwrap();
    println!("fidelity with conditioning {:.3}, with dropout 1.0 {:.3}", with.mean, without.mean);
    assert!(with.mean > 0.8);
    assert!(without.mean.abs() < 0.2);
}
