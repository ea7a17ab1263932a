mod common;

use nalgebra::{Matrix6xX, UnitQuaternion};
use proptest::prelude::*;
use prunekit::geometry::{pose_error, rotation_vector};
use prunekit::kinematics::{default_chain, ik_diverse_set, ik_single, revolute, IkParams};
use prunekit::{rng, JointConfig, KinematicChain};

/// Central-difference Jacobian: translational rows from the tool position,
/// angular rows from the rotation vector between the two perturbed frames.
fn fd_jacobian(chain: &KinematicChain, q: &JointConfig, h: f64) -> Matrix6xX<f64> {
    let n = chain.dof();
    let mut out = Matrix6xX::zeros(n);
    for i in 0..n {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus.0[i] += h;
        minus.0[i] -= h;
        let a = chain.forward_kinematics(&plus).unwrap();
        let b = chain.forward_kinematics(&minus).unwrap();
        let dt = (a.translation - b.translation) / (2.0 * h);
        let dr = rotation_vector(&(a.rotation * b.rotation.inverse())) / (2.0 * h);
        for k in 0..3 {
            out[(k, i)] = dt[k];
            out[(k + 3, i)] = dr[k];
        }
    }
    out
}

fn product_of_singular_values(chain: &KinematicChain, q: &JointConfig) -> f64 {
    let jac = chain.jacobian(q).unwrap();
    let jt = jac.rows(0, 3).into_owned();
    jt.svd(false, false).singular_values.iter().product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_matches_central_differences(seed in any::<u64>()) {
        let chain = default_chain();
        let q = chain.random_config(&mut rng::stream(seed, &[]));
        let err = (chain.jacobian(&q).unwrap() - fd_jacobian(&chain, &q, 1e-6)).amax();
        prop_assert!(err <= 1e-5, "max error {err}");
    }

    #[test]
    fn manipulability_is_product_of_singular_values(seed in any::<u64>()) {
        let chain = default_chain();
        let q = chain.random_config(&mut rng::stream(seed, &[]));
        let m = chain.manipulability(&q).unwrap();
        let p = product_of_singular_values(&chain, &q);
        prop_assert!(m >= 0.0);
        prop_assert!((m - p).abs() <= 1e-9 * p.max(1e-12), "{m} vs {p}");
    }

    #[test]
    fn fk_is_invariant_to_base_translation(seed in any::<u64>(), dx in -2.0f64..2.0, dy in -2.0f64..2.0) {
        let chain = default_chain();
        let q = chain.random_config(&mut rng::stream(seed, &[]));
        let moved = chain.with_base(nalgebra::Isometry3::translation(dx, dy, 0.0));
        let a = chain.forward_kinematics(&q).unwrap();
        let b = moved.forward_kinematics(&q).unwrap();
        prop_assert!((b.translation - a.translation - nalgebra::Vector3::new(dx, dy, 0.0)).norm() < 1e-12);
        prop_assert!(a.rotation.angle_to(&b.rotation) < 1e-12);
        prop_assert!((moved.manipulability(&q).unwrap() - chain.manipulability(&q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ik_solutions_meet_tolerance(seed in any::<u64>()) {
        let chain = default_chain();
        let target = chain.forward_kinematics(&chain.random_config(&mut rng::stream(seed, &[]))).unwrap();
        let p = IkParams { seed, ..IkParams::default() };
        for q in ik_diverse_set(&chain, &target, 8, seed, &p).solutions {
            prop_assert!(chain.within_limits(&q.0));
            let e = pose_error(&chain.forward_kinematics(&q).unwrap(), &target);
            prop_assert!(e.fixed_rows::<3>(0).norm() <= p.tol_t);
            prop_assert!(e.fixed_rows::<3>(3).norm() <= p.tol_r);
        }
    }
}

#[test]
fn ik_round_trip_rate() {
    let chain = default_chain();
    let mut r = rng::stream(2024, &[]);
    let mut ok = 0;
    for k in 0..100u64 {
        let target = chain
            .forward_kinematics(&chain.random_config(&mut r))
            .unwrap();
        let p = IkParams {
            seed: k,
            ..IkParams::default()
        };
        if let Some(q) = ik_single(&chain, &target, &chain.home(), &p) {
            let e = pose_error(&chain.forward_kinematics(&q).unwrap(), &target);
            if e.fixed_rows::<3>(0).norm() <= 1e-3 && e.fixed_rows::<3>(3).norm() <= 1e-2 {
                ok += 1;
            }
        }
    }
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn diverse_set_spans_the_self_motion() {
    // a reachable pose in front of the arm has several distinct solutions
    let chain = default_chain();
    let target = chain.forward_kinematics(&chain.home()).unwrap();
    let set = ik_diverse_set(&chain, &target, 32, 3, &IkParams::default());
    assert!(set.len() >= 2, "{} solutions", set.len());
    let widest = set.pairwise_linf().iter().map(|p| p.2).fold(0.0, f64::max);
    assert!(widest >= 0.3, "widest pair {widest}");
}

#[test]
fn planar_arm_oracle() {
    // six coplanar z-axis joints with unit links: closed-form tip position
    let id = UnitQuaternion::identity();
    let joints: Vec<_> = (0..6)
        .map(|i| {
            let origin = if i == 0 { [0.0; 3] } else { [1.0, 0.0, 0.0] };
            revolute(
                &format!("j{i}"),
                [0.0, 0.0, 1.0],
                origin,
                id,
                (-3.0, 3.0),
                1.0,
            )
        })
        .collect();
    let chain = KinematicChain::new(
        "planar6",
        joints,
        nalgebra::Isometry3::translation(1.0, 0.0, 0.0),
        vec![],
    )
    .unwrap();
    let mut r = rng::stream(5, &[]);
    for _ in 0..50 {
        let q = chain.random_config(&mut r);
        let (mut x, mut y, mut phi) = (0.0, 0.0, 0.0);
        for qi in &q.0 {
            phi += qi;
            x += phi.cos();
            y += phi.sin();
        }
        let tip = chain.forward_kinematics(&q).unwrap().translation;
        assert!((tip - nalgebra::Vector3::new(x, y, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn chain_file_errors_name_the_problem() {
    let text = prunekit::kinematics::DEFAULT_CHAIN_TOML
        .replace("limits = [-2.8973, 2.8973]", "limits = [2.8973, -2.8973]");
    let err = prunekit::kinematics::parse_chain(&text, "bad.toml")
        .unwrap_err()
        .to_string();
    assert!(err.contains("joint1"), "{err}");
    assert!(prunekit::kinematics::parse_chain("name = 3", "bad.toml").is_err());
}
