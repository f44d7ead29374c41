mod common;

use jointsense::attribution::{ablate, permutation_importance, shapley_values, AblationConfig, RegionCount, ShapReport};
use jointsense::capsule::{
    gauge_endpoints, gauge_strain, generate_trajectory, simulate, to_adc, CapsuleGeometry, DriftModel, FailurePlan, GeometryConfig,
    Pose, ReadoutConfig, Row, TrajectoryConfig, TrajectoryPoint,
};
use jointsense::dataset::{
    filter_near_limit, prepare, read_csv, split, write_csv, NearLimit, PrepareConfig, Standardizer, TargetMode,
};
use jointsense::nn::{evaluate, train, Layer, MlpModel, TrainConfig};
use jointsense::stats::{error_stats, holm_correct, student_t_cdf, welch_t_test};
use jointsense::NUM_SENSORS;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use proptest::prelude::*;

fn pose_strategy() -> impl Strategy<Value = Pose> {
    (-0.01..0.01f64, -0.01..0.01f64, -0.01..0.01f64, -45.0..45.0f64, -90.0..90.0f64, -90.0..90.0f64)
        .prop_map(|(x, y, z, roll, pitch, yaw)| Pose { x, y, z, roll, pitch, yaw })
}

// ---- capsule --------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_pose_is_neutral(geo_seed in any::<u64>()) {
        let g = CapsuleGeometry::new(&GeometryConfig::default(), geo_seed).unwrap();
        for s in g.layout.sensors() {
            let eps = gauge_strain(&g, &Pose::identity(), s).unwrap();
            prop_assert!(eps.abs() < 1e-12, "{}: {eps}", s.label);
        }
        let traj = vec![TrajectoryPoint { t: 0.0, pose: Pose::identity() }, TrajectoryPoint { t: 0.1, pose: Pose::identity() }];
        let quiet = ReadoutConfig { noise_sigma: 0.0, ..Default::default() };
        let run = simulate(&g, &traj, &FailurePlan::AllActive, &DriftModel::default(), &quiet, geo_seed).unwrap();
        prop_assert!(run.frames.iter().all(|f| f.counts.iter().all(|&c| c == 314)));
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let cfg = TrajectoryConfig { samples: 40, ..Default::default() };
        let g = CapsuleGeometry::new(&GeometryConfig::default(), seed).unwrap();
        let traj = generate_trajectory(&cfg, seed).unwrap();
        let plan = FailurePlan::Random { failed_at_start: 20, disconnects: 3 };
        let a = simulate(&g, &traj, &plan, &DriftModel::measured(), &ReadoutConfig::default(), seed).unwrap();
        let b = simulate(&g, &traj, &plan, &DriftModel::measured(), &ReadoutConfig::default(), seed).unwrap();
        prop_assert_eq!(a.frames, b.frames);
        prop_assert_eq!(a.recorded, b.recorded);
    }

    /// Each gauge end turns rigidly about the pitch (y) axis by `u·θ`, with
    /// `u` fixed by its latitude. With unit end directions `p`, `q` and
    /// `φ = (u_q − u_p)·θ`, the squared chord is `2 − 2(A + B cos φ + C sin φ)`
    /// where `B = p_x q_x + p_z q_z` and `C = p_x q_z − p_z q_x`. The response
    /// is therefore monotone over the sweep unless `φ` reaches the closest
    /// approach `tan φ* = C/B`, and then it turns exactly once, at `φ*`.
    #[test]
    fn pitch_sweep_is_monotone_unless_the_gauge_passes_its_turning_point(seed in any::<u64>()) {
        let g = CapsuleGeometry::new(&GeometryConfig::default(), seed).unwrap();
        let readout = ReadoutConfig::default();
        let span = g.moving_ring_latitude - g.fixed_ring_latitude;
        for s in g.layout.sensors() {
            let [ep, eq] = gauge_endpoints(&g, s);
            let (p, q) = (ep.direction(), eq.direction());
            let omega = (eq.latitude - ep.latitude) / span; // relative turn per degree of pitch
            let (a, b, c) = (p.y * q.y, p.x * q.x + p.z * q.z, p.x * q.z - p.z * q.x);
            let rest = (2.0 - 2.0 * (a + b)).sqrt();
            let mut v = Vec::new();
            for deg in 0..=90 {
                let theta = f64::from(deg);
                let eps = gauge_strain(&g, &Pose { pitch: theta, ..Pose::identity() }, s).unwrap();
                let phi = (omega * theta).to_radians();
                let oracle = (2.0 - 2.0 * (a + b * phi.cos() + c * phi.sin())).sqrt() / rest - 1.0;
                prop_assert!((eps - oracle).abs() < 1e-10, "{} at {deg}°: {eps} vs {oracle}", s.label);
                v.push(readout.pre_clamp_voltage(eps));
            }
            let steps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).filter(|d| d.abs() > 1e-13).collect();
            let turns = steps.windows(2).filter(|d| d[0].signum() != d[1].signum()).count();
            // first pitch angle at which φ hits a closest/farthest approach
            let turn = if omega.abs() < 1e-12 {
                f64::INFINITY
            } else {
                let base = c.atan2(b).rem_euclid(std::f64::consts::PI).to_degrees();
                let first = if omega > 0.0 { base } else { base - 180.0 };
                let t = first / omega;
                if t <= 0.0 { t + 180.0 / omega.abs() } else { t }
            };
            if turn > 90.5 {
                prop_assert_eq!(turns, 0, "{} turns although θ* = {:.2}°", &s.label, turn);
            } else if turn > 0.5 && turn < 89.5 {
                prop_assert_eq!(turns, 1, "{}: expected one turn at θ* = {:.2}°", &s.label, turn);
            } else {
                prop_assert!(turns <= 1);
            }
        }
    }

    #[test]
    fn counts_stay_in_adc_range(
        seed in any::<u64>(),
        gain in 0.0..200.0f64,
        sigma in 0.0..1.0f64,
        rest in 0.0..3.3f64,
        pose in pose_strategy(),
    ) {
        let g = CapsuleGeometry::new(&GeometryConfig::default(), seed).unwrap();
        let readout = ReadoutConfig { rest_voltage: rest, gain, noise_sigma: sigma };
        let traj = vec![TrajectoryPoint { t: 0.0, pose }];
        let plan = FailurePlan::Random { failed_at_start: 20, disconnects: 0 };
        let run = simulate(&g, &traj, &plan, &DriftModel::default(), &readout, seed).unwrap();
        prop_assert!(run.frames[0].counts.iter().all(|&c| c <= 628));
        prop_assert!(to_adc(3.3).unwrap() == 628 && to_adc(0.0).unwrap() == 0);
    }

    #[test]
    fn mirror_symmetry(seed in any::<u64>(), pose in pose_strategy()) {
        let g = CapsuleGeometry::new(&GeometryConfig::default(), seed).unwrap();
        let m = g.mirrored();
        let mp = pose.mirrored();
        // pure pitch/yaw/axial: mirroring is just negating yaw
        prop_assert_eq!(Pose { y: 0.0, roll: 0.0, ..pose }.mirrored(), Pose { y: 0.0, roll: 0.0, yaw: -pose.yaw, ..pose });
        for (a, b) in g.layout.sensors().iter().zip(m.layout.sensors()) {
            let ea = gauge_strain(&g, &pose, a).unwrap();
            let eb = gauge_strain(&m, &mp, b).unwrap();
            prop_assert!((ea - eb).abs() < 1e-9, "{}: {ea} vs {eb}", a.label);
        }
    }
}

// ---- dataset --------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn standardizer_ignores_test_rows(seed in any::<u64>(), n in 10usize..80, bump in 1u16..600) {
        let mut records = common::synthetic_records(n, seed);
        let sp = split(n, 0.2, seed).unwrap();
        let before = Standardizer::fit(&records, &sp.train, TargetMode::Standardized, 10.0).unwrap();
        for &i in &sp.test {
            records[i].counts[0] = (records[i].counts[0] + bump) % 629;
            records[i].pose.roll += 13.0;
        }
        let after = Standardizer::fit(&records, &sp.train, TargetMode::Standardized, 10.0).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 1usize..30) {
        let records = common::synthetic_records(n, seed);
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in records.iter().zip(&back) {
            prop_assert_eq!(a.counts, b.counts);
            for (x, y) in a.pose.to_array().iter().zip(b.pose.to_array()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn near_limit_filter_distributes_over_concatenation(seed in any::<u64>(), na in 0usize..40, nb in 0usize..40) {
        let a = common::synthetic_records(na, seed);
        let b = common::synthetic_records(nb, seed.wrapping_add(1));
        for c in NearLimit::ALL {
            let mut ab = a.clone();
            ab.extend(b.iter().cloned());
            let mut expect = filter_near_limit(&a, c);
            expect.extend(filter_near_limit(&b, c));
            prop_assert_eq!(filter_near_limit(&ab, c), expect);
        }
    }
}

// ---- neural network ---------------------------------------------------------

fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-2.0..2.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn backward_matches_finite_differences(seed in any::<u64>()) {
        let model = MlpModel::init(&[7, 9, 5, 3], seed).unwrap();
        let x = random_batch(6, 7, seed ^ 1);
        let t = random_batch(6, 3, seed ^ 2);
        let (_, grads) = model.backward(x.view(), t.view());
        let analytic = grads.flatten();
        let base = model.flat_params();
        let h = 1e-5;
        let mut checked = 0;
        for i in (0..base.len()).step_by(3) {
            let mut m = model.clone();
            let mut p = base.clone();
            p[i] += h;
            m.set_flat_params(&p).unwrap();
            let up = m.loss(x.view(), t.view());
            p[i] -= 2.0 * h;
            m.set_flat_params(&p).unwrap();
            let down = m.loss(x.view(), t.view());
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs());
            if scale < 1e-7 {
                continue; // both effectively zero (dead ReLU path)
            }
            prop_assert!((analytic[i] - numeric).abs() / scale < 1e-4, "coord {i}: {} vs {numeric}", analytic[i]);
            checked += 1;
        }
        prop_assert!(checked > 20);
    }

    #[test]
    fn input_permutation_equivariance(seed in any::<u64>(), shift in 1usize..7) {
        let model = MlpModel::init(&[7, 16, 8, 2], seed).unwrap();
        let perm: Vec<usize> = (0..7).map(|i| (i + shift) % 7).collect();
        let x = random_batch(5, 7, seed ^ 3);
        let mut xp = x.clone();
        let mut layers = model.layers.clone();
        for (new, &old) in perm.iter().enumerate() {
            xp.column_mut(new).assign(&x.column(old));
            layers[0].weights.column_mut(new).assign(&model.layers[0].weights.column(old));
        }
        let permuted = MlpModel::from_layers(layers).unwrap();
        let a = model.forward(x.view());
        let b = permuted.forward(xp.view());
        prop_assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() <= 1e-12));
    }
}

#[test]
fn training_is_deterministic() {
    let records = common::synthetic_records(120, 9);
    let data = prepare(&records, &PrepareConfig::default(), 3).unwrap();
    let cfg = TrainConfig { epochs: 3, seed: 5, ..Default::default() };
    let run = || {
        let mut m = MlpModel::init(&[60, 16, 8, 6], 5).unwrap();
        train(&mut m, &data.train, None, &cfg).unwrap();
        m.flat_params()
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
}

/// A constant model whose output is `bias` in encoded units; evaluation must
/// report the error of its decoded prediction in meters and degrees.
#[test]
fn evaluation_reports_physical_units_for_every_target_mode() {
    let records = common::synthetic_records(60, 4);
    for mode in [TargetMode::Standardized, TargetMode::RadiansMeters, TargetMode::PaperRaw] {
        let prep = PrepareConfig { target_mode: mode, ..Default::default() };
        let data = prepare(&records, &prep, 2).unwrap();
        let bias = Array1::from(vec![0.3, -0.2, 0.1, 0.25, -0.5, 0.05]);
        let layer = Layer { weights: Array2::zeros((6, NUM_SENSORS)), bias: bias.clone() };
        let model = MlpModel::from_layers(vec![layer]).unwrap();
        let eval = evaluate(&model, &data.test).unwrap();
        let predicted = data.test.codec.decode(bias.as_slice().unwrap());
        for k in 0..6 {
            let errs: Vec<f64> = data.split.test.iter().map(|&i| (predicted[k] - records[i].pose.to_array()[k]).abs()).collect();
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let tol = 1e-9 * mean.abs().max(1.0);
            assert!((eval.stats[k].mean_abs - mean).abs() < tol, "{mode:?} axis {k}: {} vs {mean}", eval.stats[k].mean_abs);
        }
    }
}

// ---- attribution ----------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ignored_feature_has_zero_importance(seed in any::<u64>(), dead in 0usize..5) {
        let mut model = MlpModel::init(&[5, 8, 2], seed).unwrap();
        model.layers[0].weights.column_mut(dead).fill(0.0);
        let x = random_batch(40, 5, seed ^ 7);
        let t = random_batch(40, 2, seed ^ 8);
        let r = permutation_importance(&model, x.view(), t.view(), &[0, 1, 2, 3, 4], 5, seed).unwrap();
        prop_assert!(r.score(dead).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn shapley_linear_single_background_exact(seed in any::<u64>(), n_perm in 1usize..20) {
        let w = random_batch(4, 1, seed);
        let model = |x: ArrayView2<f64>| x.dot(&w);
        let x = random_batch(3, 4, seed ^ 1);
        let z = random_batch(1, 4, seed ^ 2);
        let phi = shapley_values(&model, x.view(), z.view(), n_perm, seed).unwrap();
        for r in 0..3 {
            for i in 0..4 {
                prop_assert!((phi.values[[r, i, 0]] - w[[i, 0]] * (x[[r, i]] - z[[0, i]])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shapley_efficiency_with_balanced_background(seed in any::<u64>(), bg in 1usize..5, reps in 1usize..3) {
        let model = MlpModel::init(&[4, 6, 2], seed).unwrap();
        let x = random_batch(3, 4, seed ^ 3);
        let z = random_batch(bg, 4, seed ^ 4);
        let phi = shapley_values(&model, x.view(), z.view(), 2 * bg * reps, seed).unwrap();
        prop_assert!(phi.efficiency_residual().iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn shapley_symmetry_for_interchangeable_features(seed in any::<u64>()) {
        // f(x) = g(x0 + x1) + h(x2): features 0 and 1 are interchangeable
        let model = |x: ArrayView2<f64>| x.map_axis(Axis(1), |r| (r[0] + r[1]).tanh() * 2.0 + r[2] * r[2]).insert_axis(Axis(1));
        let mut x = random_batch(2, 3, seed);
        let mut z = random_batch(4, 3, seed ^ 5);
        for m in [&mut x, &mut z] {
            let c0 = m.column(0).to_owned();
            m.column_mut(1).assign(&c0);
        }
        let phi = shapley_values(&model, x.view(), z.view(), 400, seed).unwrap();
        for r in 0..2 {
            let (a, b) = (phi.values[[r, 0, 0]], phi.values[[r, 1, 0]]);
            let tol = 4.0 * (phi.std_err[[r, 0, 0]] + phi.std_err[[r, 1, 0]]) + 1e-12;
            prop_assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
        }
    }
}

#[test]
fn ablation_is_deterministic() {
    let records = common::synthetic_records(100, 12);
    let cfg = AblationConfig {
        train: TrainConfig { epochs: 2, ..Default::default() },
        n_shuffles: 2,
        max_steps: Some(3),
        ..Default::default()
    };
    assert_eq!(ablate(&records, &cfg, &[4, 9]).unwrap(), ablate(&records, &cfg, &[4, 9]).unwrap());
}

proptest! {
    #[test]
    fn region_counts_partition_top3(tops in prop::collection::vec(prop::sample::subsequence((0..NUM_SENSORS).collect::<Vec<_>>(), 3), 1..8)) {
        let regions = CapsuleGeometry::nominal(&GeometryConfig::default()).unwrap().layout.rows();
        prop_assert_eq!(regions.len(), NUM_SENSORS);
        for row in Row::ALL {
            prop_assert_eq!(regions.iter().filter(|&&r| r == row).count(), 20);
        }
        let reports: Vec<ShapReport> = tops
            .iter()
            .enumerate()
            .map(|(i, t)| ShapReport { trial_seed: i as u64, criterion: NearLimit::Twist, aggregate: vec![0.0; NUM_SENSORS], top3: [t[0], t[1], t[2]], evaluated_rows: 1 })
            .collect();
        let c = RegionCount::from_reports(&reports, &regions);
        prop_assert_eq!(c.total(), 3 * reports.len());
        prop_assert_eq!(c.frequency.iter().sum::<usize>(), 3 * reports.len());
    }
}

// ---- statistics -------------------------------------------------------------

proptest! {
    #[test]
    fn error_stats_translation_invariant(v in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..40), shift in -100.0..100.0f64) {
        let (p, a): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let s = error_stats(&p, &a).unwrap();
        let ps: Vec<f64> = p.iter().map(|x| x + shift).collect();
        let as_: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let t = error_stats(&ps, &as_).unwrap();
        prop_assert!((s.max - t.max).abs() < 1e-9);
        prop_assert!((s.mean_abs - t.mean_abs).abs() < 1e-9);
        prop_assert!((s.std_abs - t.std_abs).abs() < 1e-9);
        prop_assert!(s.max >= s.mean_abs && s.mean_abs >= 0.0);
    }

    #[test]
    fn welch_swap_symmetry(a in prop::collection::vec(-5.0..5.0f64, 2..12), b in prop::collection::vec(-5.0..5.0f64, 2..12)) {
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        prop_assert!((ab.t + ba.t).abs() < 1e-12);
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p));
    }

    #[test]
    fn t_cdf_matches_quadrature(t in -10.0..10.0f64, df in prop::sample::select(vec![1.0, 2.5, 8.0, 30.0])) {
        let got = student_t_cdf(t, df);
        let want = common::t_cdf_quadrature(t, df);
        prop_assert!((got - want).abs() < 1e-8, "t={t} df={df}: {got} vs {want}");
    }

    #[test]
    fn holm_is_monotone_and_conservative(p in prop::collection::vec(0.0..=1.0f64, 1..30)) {
        let adj = holm_correct(&p);
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
        for w in order.windows(2) {
            prop_assert!(adj[w[0]].adjusted <= adj[w[1]].adjusted);
        }
        for (a, &raw) in adj.iter().zip(&p) {
            prop_assert!(a.adjusted >= raw && a.adjusted <= 1.0);
            prop_assert_eq!(a.significant, a.adjusted < 0.05);
        }
    }
}
