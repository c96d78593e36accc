mod common;

use proptest::prelude::*;
use qgasvm::skeleton::{
    canonical_topology, frame_angles, sliding_windows, window_features, ActionWindow, JointId, SkeletonFrame,
    ANGLE_COUNT,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{apply, random_frame, random_rotation, two_pass_variance};

#[test]
fn edge_list_is_the_kinect_tree() {
    let t = canonical_topology();
    assert_eq!(t.edges().len(), 19);
    assert!(t.is_spanning_tree());
    let mut census = [0usize; 5];
    for j in JointId::ALL {
        census[t.degree(j)] += 1;
    }
    assert_eq!(census, [0, 5, 13, 1, 1]);
    assert_eq!(t.degree(JointId::ShoulderCenter), 4);
    assert_eq!(t.degree(JointId::HipCenter), 3);
    let slots: usize = JointId::ALL.iter().map(|&j| t.degree(j) * (t.degree(j) - 1) / 2).sum();
    assert_eq!(slots, ANGLE_COUNT);
}

#[test]
fn elbow_slots_pair_shoulder_and_wrist() {
    let t = canonical_topology();
    assert_eq!(
        t.angle_index(JointId::ElbowLeft, JointId::ShoulderLeft, JointId::WristLeft),
        Some(11)
    );
    assert_eq!(
        t.angle_index(JointId::ElbowRight, JointId::WristRight, JointId::ShoulderRight),
        Some(14)
    );
}

#[test]
fn feature_matches_per_angle_oracle() {
    let t = canonical_topology();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let frames: Vec<SkeletonFrame> = (0..12).map(|i| random_frame(&mut rng, 0.04, i)).collect();
    let per_frame: Vec<_> = frames.iter().map(|f| frame_angles(f, &t).unwrap()).collect();
    let window = ActionWindow {
        frames,
        label: None,
        source_id: "oracle".into(),
    };
    let f = window_features(&window, &t).unwrap();
    for k in 0..ANGLE_COUNT {
        let column: Vec<f64> = per_frame.iter().map(|a| a.0[k]).collect();
        let expected = two_pass_variance(&column);
        assert!((f.values[k] - expected).abs() <= 1e-12 * expected.abs().max(1e-300), "angle {k}");
    }
}

#[test]
fn sliding_windows_cover_stream() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let frames: Vec<SkeletonFrame> = (0..10).map(|i| random_frame(&mut rng, 0.02, i)).collect();
    let windows = sliding_windows(&frames, 4, 3, "s");
    assert_eq!(windows.len(), 3);
    assert_eq!(windows[2].frames[0].frame_index, 6);
    assert!(windows.iter().all(|w| w.label.is_none()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angles_survive_similarity_transforms(
        seed in any::<u64>(),
        scale in 0.2f64..5.0,
        tx in -3.0f64..3.0,
        ty in -3.0f64..3.0,
        tz in -3.0f64..3.0,
    ) {
        let t = canonical_topology();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_frame(&mut rng, 0.05, 0);
        let r = random_rotation(&mut rng);
        let moved = frame.map_positions(|p| apply(&r, scale, [tx, ty, tz], p));
        let a = frame_angles(&frame, &t).unwrap();
        let b = frame_angles(&moved, &t).unwrap();
        for k in 0..ANGLE_COUNT {
            prop_assert!((a.0[k] - b.0[k]).abs() < 1e-9, "angle {} moved by {}", k, a.0[k] - b.0[k]);
        }
    }

    #[test]
    fn features_are_non_negative_and_shift_free(seed in any::<u64>(), len in 2usize..20) {
        let t = canonical_topology();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames: Vec<SkeletonFrame> = (0..len).map(|i| random_frame(&mut rng, 0.03, i)).collect();
        let shifted: Vec<SkeletonFrame> = frames
            .iter()
            .map(|f| f.map_positions(|p| [p[0] + 1.5, p[1] - 0.25, p[2] + 2.0]))
            .collect();
        let w = |frames: Vec<SkeletonFrame>| ActionWindow { frames, label: None, source_id: String::new() };
        let a = window_features(&w(frames), &t).unwrap();
        let b = window_features(&w(shifted), &t).unwrap();
        for k in 0..ANGLE_COUNT {
            prop_assert!(a.values[k] >= 0.0);
            prop_assert!((a.values[k] - b.values[k]).abs() <= 1e-9 * a.values[k].max(1e-12));
        }
    }
}
