use std::f64::consts::TAU;

use lstc::nn::{self, Activation, Mlp};
use lstc::rollout::normalize;
use lstc::sim::geometry::Vec2;
use lstc::sim::{lidar_scan, populate_traffic, Obstacle, RoadMap, Segment, Traffic, TrafficConfig};
use lstc::train::{
    lagrangian_advantages, policy_loss, update_multipliers, ConstraintStats, LagrangeConfig, LagrangeState,
    MultiplierMode, PolicyBatch,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn policy(seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::new(&[49, 16, 16, 2], Activation::Tanh, 1.0, &mut rng).with_log_std(-0.3);
    for l in &mut net.layers {
        l.bias.iter_mut().for_each(|b| *b = 0.2 * rng.sample::<f64, _>(StandardNormal));
    }
    net
}

struct Samples {
    obs: Vec<f64>,
    raw: Vec<f64>,
    old: Vec<f64>,
    adv: Vec<f64>,
}

/// Random samples around the policy mean with old log-probs shifted by up
/// to `spread` nats, so that some ratios land outside the clip range.
fn samples(net: &Mlp, n: usize, spread: f64, seed: u64) -> Samples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs: Vec<f64> = (0..n * 49).map(|_| rng.random_range(-1.0..1.0)).collect();
    let means = net.forward_batch(&obs, n).unwrap();
    let log_std = net.log_std.clone().unwrap();
    let mut raw = Vec::with_capacity(n * 2);
    let mut old = Vec::with_capacity(n);
    for b in 0..n {
        let a: Vec<f64> = (0..2)
            .map(|i| means[b * 2 + i] + log_std[i].exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let jitter = if spread > 0.0 { rng.random_range(-spread..spread) } else { 0.0 };
        old.push(nn::log_prob(&means[b * 2..b * 2 + 2], &log_std, &a) + jitter);
        raw.extend(a);
    }
    let adv = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Samples { obs, raw, old, adv }
}

fn loss_of(net: &Mlp, s: &Samples) -> f64 {
    let batch = PolicyBatch {
        observations: &s.obs,
        raw_actions: &s.raw,
        old_log_probs: &s.old,
    };
    policy_loss(net, batch, &s.adv, 0.2, 0.01).unwrap().loss
}

fn nudge(net: &mut Mlp, idx: usize, delta: f64) {
    let mut k = idx;
    for a in net.arrays_mut() {
        if k < a.len() {
            a[k] += delta;
            return;
        }
        k -= a.len();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn policy_loss_gradient_matches_finite_differences(seed in 0u64..10_000) {
        let mut net = policy(seed);
        let s = samples(&net, 16, 0.5, seed ^ 0xabc);
        let batch = PolicyBatch { observations: &s.obs, raw_actions: &s.raw, old_log_probs: &s.old };
        let out = policy_loss(&net, batch, &s.adv, 0.2, 0.01).unwrap();
        let flat: Vec<f64> = out.grads.arrays().flat_map(|a| a.iter().copied()).collect();
        let total = flat.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // The last two coordinates are the log-std entries.
        let mut coords: Vec<usize> = (0..12).map(|_| rng.random_range(0..total)).collect();
        coords.extend([total - 2, total - 1]);
        let h = 1e-6;
        for idx in coords {
            nudge(&mut net, idx, h);
            let up = loss_of(&net, &s);
            nudge(&mut net, idx, -2.0 * h);
            let down = loss_of(&net, &s);
            nudge(&mut net, idx, h);
            let fd = (up - down) / (2.0 * h);
            let err = (fd - flat[idx]).abs() / (fd.abs() + flat[idx].abs()).max(1e-6);
            prop_assert!(err < 1e-4, "coordinate {idx}: analytic {} fd {fd}", flat[idx]);
        }
    }

    #[test]
    fn active_clip_blocks_the_gradient(seed in 0u64..10_000, positive in any::<bool>()) {
        let net = policy(seed);
        let mut s = samples(&net, 12, 0.0, seed);
        // Ratio e^{+-0.5} sits outside [0.8, 1.2]; the sign of the advantage
        // is chosen so the clipped branch is the smaller one.
        let shift = if positive { -0.5 } else { 0.5 };
        s.old.iter_mut().for_each(|o| *o += shift);
        s.adv.iter_mut().for_each(|a| *a = if positive { a.abs() + 0.1 } else { -a.abs() - 0.1 });
        let batch = PolicyBatch { observations: &s.obs, raw_actions: &s.raw, old_log_probs: &s.old };
        let out = policy_loss(&net, batch, &s.adv, 0.2, 0.0).unwrap();
        prop_assert_eq!(out.clip_fraction, 1.0);
        prop_assert!(out.grads.arrays().all(|a| a.iter().all(|&g| g == 0.0)));

        let mut moved = net.clone();
        nudge(&mut moved, 3, 1e-4);
        prop_assert!((loss_of(&moved, &s) - loss_of(&net, &s)).abs() < 1e-12);
    }

    #[test]
    fn normalization_preserves_order(xs in prop::collection::vec(-1e3f64..1e3, 2..200)) {
        let ys = normalize(&xs);
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                if xs[i] < xs[j] {
                    prop_assert!(ys[i] <= ys[j]);
                }
            }
        }
        let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |m, (i, x)| if *x > v[m] { i } else { m });
        prop_assert_eq!(argmax(&xs), argmax(&ys));
    }

    #[test]
    fn short_term_penalty_is_monotone(
        rows in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -2.0f64..2.0), 1..64),
        lambda_long in 0.0f64..5.0,
        lambda_short in 0.0f64..5.0,
        bump in 0.01f64..5.0,
    ) {
        let adv: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let cadv: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let g0 = lagrangian_advantages(&adv, &cadv, &scores, lambda_long, lambda_short).unwrap();
        let g1 = lagrangian_advantages(&adv, &cadv, &scores, lambda_long, lambda_short + bump).unwrap();
        for i in 0..rows.len() {
            if scores[i] > 0.0 {
                prop_assert!(g1[i] < g0[i]);
            } else {
                prop_assert!(g1[i] >= g0[i]);
            }
        }
    }

    #[test]
    fn multipliers_stay_in_range(
        stats in prop::collection::vec((0.0f64..20.0, 0.0f64..5.0), 1..60),
        gated in any::<bool>(),
    ) {
        let cfg = LagrangeConfig {
            mode: if gated { MultiplierMode::Gated } else { MultiplierMode::Unconditional },
            ..LagrangeConfig::default()
        };
        let mut state = LagrangeState::new(&cfg);
        for (c, b) in stats {
            let prev = state.clone();
            state = update_multipliers(&state, ConstraintStats { discounted_cost: c, positive_validation: b });
            prop_assert!((0.0..=cfg.lambda_max).contains(&state.lambda_long));
            prop_assert!((0.0..=cfg.lambda_max).contains(&state.lambda_short));
            if gated {
                prop_assert!(state.lambda_long >= prev.lambda_long);
                prop_assert!(state.lambda_short >= prev.lambda_short);
            }
        }
    }
}

#[test]
fn vehicle_count_is_poisson_in_density() {
    let map = RoadMap::from_segments(&[Segment::Straight { length: 1000.0 }], 3, 3.5).unwrap();
    let cfg = TrafficConfig {
        density: 12.0,
        accident_prob: 0.0,
        spawn_clearance: 0.0,
        ..TrafficConfig::default()
    };
    let counts: Vec<f64> = (0..1000)
        .map(|seed| populate_traffic(&map, &cfg, seed).vehicles.len() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    // Sum of three Poisson(12) draws: mean 36, sd 6; the mean of 1000 has sd 0.19.
    let sigma = (36.0f64 / 1000.0).sqrt();
    assert!((mean - 36.0).abs() < 3.0 * sigma, "mean vehicle count {mean}");
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / counts.len() as f64;
    assert!((var - 36.0).abs() < 6.0, "variance {var}");
}

#[test]
fn empty_traffic_settings_place_nothing() {
    let map = RoadMap::from_segments(&[Segment::Straight { length: 500.0 }], 3, 3.5).unwrap();
    let cfg = TrafficConfig {
        density: 0.0,
        accident_prob: 0.0,
        ..TrafficConfig::default()
    };
    for seed in 0..50 {
        assert_eq!(populate_traffic(&map, &cfg, seed), Traffic::default());
    }
}

fn wide_road() -> RoadMap {
    RoadMap::from_segments(&[Segment::Straight { length: 1000.0 }], 31, 3.5).unwrap()
}

fn one_obstacle(centre: Vec2, radius: f64) -> Traffic {
    Traffic {
        vehicles: Vec::new(),
        obstacles: vec![Obstacle { centre, radius, s: 0.0, lane: 0 }],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lidar_rotates_with_the_scene(
        heading in -3.0f64..3.0,
        k in 0usize..30,
        dist in 3.0f64..45.0,
        radius in 0.3f64..2.0,
    ) {
        let map = wide_road();
        let origin = Vec2::new(500.0, 0.0);
        let base = lidar_scan(origin, heading, &map, &one_obstacle(origin + Vec2::from_angle(heading) * dist, radius), 30, 50.0);
        // Rotating both the scene and the sensor by k beam spacings leaves
        // the scan unchanged.
        let turn = k as f64 * TAU / 30.0;
        let rotated = lidar_scan(
            origin,
            heading + turn,
            &map,
            &one_obstacle(origin + Vec2::from_angle(heading + turn) * dist, radius),
            30,
            50.0,
        );
        for (a, b) in base.iter().zip(&rotated) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        // Rotating only the scene shifts the hit to beam k.
        let shifted = lidar_scan(
            origin,
            heading,
            &map,
            &one_obstacle(origin + Vec2::from_angle(heading + turn) * dist, radius),
            30,
            50.0,
        );
        prop_assert!((shifted[k] - base[0]).abs() < 1e-9);
        prop_assert!(((dist - radius) / 50.0 - base[0]).abs() < 1e-9);
    }

    #[test]
    fn lidar_reading_grows_with_distance(
        heading in -3.0f64..3.0,
        near in 3.0f64..40.0,
        gap in 0.1f64..10.0,
    ) {
        let map = wide_road();
        let origin = Vec2::new(500.0, 0.0);
        let dir = Vec2::from_angle(heading);
        let a = lidar_scan(origin, heading, &map, &one_obstacle(origin + dir * near, 1.0), 30, 50.0);
        let b = lidar_scan(origin, heading, &map, &one_obstacle(origin + dir * (near + gap), 1.0), 30, 50.0);
        prop_assert!(b[0] > a[0] || a[0] == 1.0);
        prop_assert!(a.iter().chain(&b).all(|r| (0.0..=1.0).contains(r)));
    }
}
