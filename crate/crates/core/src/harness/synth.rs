//! Synthetic two-class skeleton captures.
//!
//! Each window is a short clip of a standing skeleton whose elbows flex and
//! extend sinusoidally. The forearm and hand of each arm are placed in the
//! plane spanned by the upper arm and the body's forward axis, at the elbow
//! angle
//!
//! ```text
//! θ(t) = base + A · sin(2π f t / T + φ)
//! ```
//!
//! Class 1 swings both elbows with amplitude `large_amplitude`; class 2 swings
//! the right elbow the same way and the left elbow with
//! `large_amplitude · amplitude_ratio`. Per-window amplitudes are scaled by
//! `1 + amplitude_spread · N(0, 1)`, every joint receives Gaussian jitter of
//! `jitter` metres, and each window is placed with a random yaw and offset.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::skeleton::{standing_pose, ClassLabel, JointId, SkeletonFrame, Vec3, JOINT_COUNT};

use super::io::Annotation;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Windows of class 1 and class 2.
    pub windows_per_class: [usize; 2],
    pub frames_per_window: usize,
    /// Elbow swing amplitude in radians.
    pub large_amplitude: f64,
    /// Class 2 left-elbow amplitude relative to `large_amplitude`.
    pub amplitude_ratio: f64,
    /// Relative standard deviation of per-window amplitudes.
    pub amplitude_spread: f64,
    /// Standard deviation of per-joint positional noise, metres.
    pub jitter: f64,
    /// Resting elbow angle in radians.
    pub base_elbow_angle: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            windows_per_class: [130, 160],
            frames_per_window: 30,
            large_amplitude: 0.8,
            amplitude_ratio: 0.45,
            amplitude_spread: 0.2,
            jitter: 0.01,
            base_elbow_angle: 1.9,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(format!("synthetic spec: {m}")));
        if self.frames_per_window < 2 {
            return bad(format!("frames_per_window must be >= 2, got {}", self.frames_per_window));
        }
        if self.windows_per_class.contains(&0) {
            return bad("every class needs at least one window".into());
        }
        for (name, v) in [
            ("large_amplitude", self.large_amplitude),
            ("amplitude_ratio", self.amplitude_ratio),
            ("amplitude_spread", self.amplitude_spread),
            ("jitter", self.jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.base_elbow_angle > 0.0 && self.base_elbow_angle < PI) {
            return bad(format!("base_elbow_angle must be in (0, pi), got {}", self.base_elbow_angle));
        }
        Ok(())
    }
}

/// A generated capture with its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCapture {
    pub frames: Vec<SkeletonFrame>,
    pub annotations: Vec<Annotation>,
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn normalize(a: Vec3) -> Vec3 {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    scale(a, 1.0 / n)
}

/// Places wrist and hand so the elbow angle is `theta`.
fn pose_arm(pos: &mut [Vec3; JOINT_COUNT], shoulder: JointId, elbow: JointId, wrist: JointId, hand: JointId, theta: f64) {
    const FOREARM: f64 = 0.25;
    const HAND: f64 = 0.08;
    let e = pos[elbow.slot()];
    let upper = normalize(sub(pos[shoulder.slot()], e));
    let forward = [0.0, 0.0, 1.0];
    let along = upper[2];
    let w = normalize(sub(forward, scale(upper, along)));
    let dir = add(scale(upper, theta.cos()), scale(w, theta.sin()));
    pos[wrist.slot()] = add(e, scale(dir, FOREARM));
    pos[hand.slot()] = add(e, scale(dir, FOREARM + HAND));
}

struct WindowMotion {
    left_amp: f64,
    right_amp: f64,
    cycles: f64,
    left_phase: f64,
    right_phase: f64,
    yaw: f64,
    offset: Vec3,
}

/// Generates a capture stream with one annotated window per requested sample.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<SyntheticCapture, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let jitter = Normal::new(0.0, spec.jitter).map_err(|e| HarnessError::Config(e.to_string()))?;

    let mut order: Vec<ClassLabel> = std::iter::repeat_n(ClassLabel::One, spec.windows_per_class[0])
        .chain(std::iter::repeat_n(ClassLabel::Two, spec.windows_per_class[1]))
        .collect();
    order.shuffle(&mut rng);

    let rest = standing_pose();
    let m = spec.frames_per_window;
    let mut frames = Vec::with_capacity(order.len() * m);
    let mut annotations = Vec::with_capacity(order.len());
    // Keep the swing inside (0, π) so the arccos does not fold it back.
    let max_amp = (spec.base_elbow_angle - 0.05).min(PI - 0.05 - spec.base_elbow_angle);

    for label in order {
        let mut amp = |base: f64| (base * (1.0 + spec.amplitude_spread * unit.sample(&mut rng))).clamp(0.0, max_amp);
        let right_amp = amp(spec.large_amplitude);
        let left_amp = match label {
            ClassLabel::One => amp(spec.large_amplitude),
            ClassLabel::Two => amp(spec.large_amplitude * spec.amplitude_ratio),
        };
        let motion = WindowMotion {
            left_amp,
            right_amp,
            cycles: rng.random_range(0.8..1.25),
            left_phase: rng.random_range(0.0..2.0 * PI),
            right_phase: rng.random_range(0.0..2.0 * PI),
            yaw: rng.random_range(-0.5..0.5),
            offset: [
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.05..0.05),
                rng.random_range(1.5..3.0),
            ],
        };
        let start = frames.len();
        for k in 0..m {
            let t = k as f64 / m as f64;
            let mut pos = rest;
            let phase = 2.0 * PI * motion.cycles * t;
            pose_arm(
                &mut pos,
                JointId::ShoulderLeft,
                JointId::ElbowLeft,
                JointId::WristLeft,
                JointId::HandLeft,
                spec.base_elbow_angle + motion.left_amp * (phase + motion.left_phase).sin(),
            );
            pose_arm(
                &mut pos,
                JointId::ShoulderRight,
                JointId::ElbowRight,
                JointId::WristRight,
                JointId::HandRight,
                spec.base_elbow_angle + motion.right_amp * (phase + motion.right_phase).sin(),
            );
            let (s, c) = motion.yaw.sin_cos();
            for p in &mut pos {
                let x = c * p[0] + s * p[2];
                let z = -s * p[0] + c * p[2];
                *p = [
                    x + motion.offset[0] + jitter.sample(&mut rng),
                    p[1] + motion.offset[1] + jitter.sample(&mut rng),
                    z + motion.offset[2] + jitter.sample(&mut rng),
                ];
            }
            let frame = SkeletonFrame::new(pos, frames.len())
                .map_err(|e| HarnessError::Config(format!("generator produced an invalid frame: {e}")))?;
            frames.push(frame);
        }
        annotations.push(Annotation {
            start_frame: start,
            end_frame: start + m - 1,
            label,
        });
    }
    Ok(SyntheticCapture {
        frames,
        annotations,
    })
}
