//! Skeleton joint-angle features.
//!
//! A Kinect-v1 style skeleton has 20 tracked joints connected as a tree. Every
//! joint with at least two neighbours contributes one angle per pair of
//! adjacent limbs, which gives 22 angles per frame. An action window is then
//! summarised by the sample variance of each angle over its frames.
//!
//! The limb tree used here:
//!
//! ```text
//! HipCenter(1) ── Spine(2) ── ShoulderCenter(3) ── Head(4)
//!   │                            ├── ShoulderLeft(5)  ── ElbowLeft(6)  ── WristLeft(7)  ── HandLeft(8)
//!   │                            └── ShoulderRight(9) ── ElbowRight(10) ── WristRight(11) ── HandRight(12)
//!   ├── HipLeft(13)  ── KneeLeft(14)  ── AnkleLeft(15)  ── FootLeft(16)
//!   └── HipRight(17) ── KneeRight(18) ── AnkleRight(19) ── FootRight(20)
//! ```

#[cfg(test)]
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

/// Number of tracked joints.
pub const JOINT_COUNT: usize = 20;
/// Number of joint angles per frame.
pub const ANGLE_COUNT: usize = 22;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("degenerate limb at {center}: joints {center} and {neighbor} coincide")]
    DegenerateLimb { center: JointId, neighbor: JointId },
    #[error("zero-length vector passed to joint_angle")]
    ZeroLengthVector,
    #[error("window has {frames} frame(s); at least 2 are required")]
    WindowTooShort { frames: usize },
    #[error("non-finite coordinate for joint {joint} in frame {frame_index}")]
    NonFinite { joint: JointId, frame_index: usize },
    #[error("joint index {0} is outside 1..=20")]
    BadJointIndex(usize),
    #[error("frame {frame_index}: {source}")]
    InFrame {
        frame_index: usize,
        #[source]
        source: Box<SkeletonError>,
    },
}

/// The 20 skeleton joints in canonical index order (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum JointId {
    HipCenter = 1,
    Spine,
    ShoulderCenter,
    Head,
    ShoulderLeft,
    ElbowLeft,
    WristLeft,
    HandLeft,
    ShoulderRight,
    ElbowRight,
    WristRight,
    HandRight,
    HipLeft,
    KneeLeft,
    AnkleLeft,
    FootLeft,
    HipRight,
    KneeRight,
    AnkleRight,
    FootRight,
}

impl JointId {
    pub const ALL: [JointId; JOINT_COUNT] = [
        JointId::HipCenter,
        JointId::Spine,
        JointId::ShoulderCenter,
        JointId::Head,
        JointId::ShoulderLeft,
        JointId::ElbowLeft,
        JointId::WristLeft,
        JointId::HandLeft,
        JointId::ShoulderRight,
        JointId::ElbowRight,
        JointId::WristRight,
        JointId::HandRight,
        JointId::HipLeft,
        JointId::KneeLeft,
        JointId::AnkleLeft,
        JointId::FootLeft,
        JointId::HipRight,
        JointId::KneeRight,
        JointId::AnkleRight,
        JointId::FootRight,
    ];

    /// 1-based joint index.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Position of the joint in a 0-based array.
    pub fn slot(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(index: usize) -> Result<Self, SkeletonError> {
        if (1..=JOINT_COUNT).contains(&index) {
            Ok(Self::ALL[index - 1])
        } else {
            Err(SkeletonError::BadJointIndex(index))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            JointId::HipCenter => "HipCenter",
            JointId::Spine => "Spine",
            JointId::ShoulderCenter => "ShoulderCenter",
            JointId::Head => "Head",
            JointId::ShoulderLeft => "ShoulderLeft",
            JointId::ElbowLeft => "ElbowLeft",
            JointId::WristLeft => "WristLeft",
            JointId::HandLeft => "HandLeft",
            JointId::ShoulderRight => "ShoulderRight",
            JointId::ElbowRight => "ElbowRight",
            JointId::WristRight => "WristRight",
            JointId::HandRight => "HandRight",
            JointId::HipLeft => "HipLeft",
            JointId::KneeLeft => "KneeLeft",
            JointId::AnkleLeft => "AnkleLeft",
            JointId::FootLeft => "FootLeft",
            JointId::HipRight => "HipRight",
            JointId::KneeRight => "KneeRight",
            JointId::AnkleRight => "AnkleRight",
            JointId::FootRight => "FootRight",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|j| j.name() == name)
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.index())
    }
}

/// Limb edges of the Kinect-v1 skeleton, each written (lower index, higher index).
const CANONICAL_EDGES: [(JointId, JointId); JOINT_COUNT - 1] = {
    use JointId::*;
    [
        (HipCenter, Spine),
        (Spine, ShoulderCenter),
        (ShoulderCenter, Head),
        (ShoulderCenter, ShoulderLeft),
        (ShoulderLeft, ElbowLeft),
        (ElbowLeft, WristLeft),
        (WristLeft, HandLeft),
        (ShoulderCenter, ShoulderRight),
        (ShoulderRight, ElbowRight),
        (ElbowRight, WristRight),
        (WristRight, HandRight),
        (HipCenter, HipLeft),
        (HipLeft, KneeLeft),
        (KneeLeft, AnkleLeft),
        (AnkleLeft, FootLeft),
        (HipCenter, HipRight),
        (HipRight, KneeRight),
        (KneeRight, AnkleRight),
        (AnkleRight, FootRight),
    ]
};

/// One angle slot: the vertex joint and the two limbs' far ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngleSlot {
    pub center: JointId,
    pub first: JointId,
    pub second: JointId,
}

/// Limb graph over the 20 joints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonTopology {
    edges: Vec<(JointId, JointId)>,
    neighbors: Vec<Vec<JointId>>,
    slots: Vec<AngleSlot>,
}

impl SkeletonTopology {
    /// Builds a topology from an edge list. Neighbour lists are sorted by index
    /// and angle slots are laid out joint by joint, pairs in lexicographic order.
    pub fn from_edges(edges: &[(JointId, JointId)]) -> Self {
        let mut neighbors = vec![Vec::new(); JOINT_COUNT];
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            normalized.push((lo, hi));
            neighbors[lo.slot()].push(hi);
            neighbors[hi.slot()].push(lo);
        }
        for list in &mut neighbors {
            list.sort();
            list.dedup();
        }
        let mut slots = Vec::new();
        for joint in JointId::ALL {
            let adj = &neighbors[joint.slot()];
            for i in 0..adj.len() {
                for j in i + 1..adj.len() {
                    slots.push(AngleSlot {
                        center: joint,
                        first: adj[i],
                        second: adj[j],
                    });
                }
            }
        }
        Self {
            edges: normalized,
            neighbors,
            slots,
        }
    }

    pub fn edges(&self) -> &[(JointId, JointId)] {
        &self.edges
    }

    /// Neighbours of `joint`, ascending by index.
    pub fn neighbors(&self, joint: JointId) -> &[JointId] {
        &self.neighbors[joint.slot()]
    }

    pub fn degree(&self, joint: JointId) -> usize {
        self.neighbors[joint.slot()].len()
    }

    /// Angle slots in canonical output order.
    pub fn angle_slots(&self) -> &[AngleSlot] {
        &self.slots
    }

    pub fn angle_count(&self) -> usize {
        self.slots.len()
    }

    /// Position of the angle at `center` between `a` and `b`, if the topology has one.
    pub fn angle_index(&self, center: JointId, a: JointId, b: JointId) -> Option<usize> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.slots
            .iter()
            .position(|s| s.center == center && s.first == lo && s.second == hi)
    }

    /// Whether the edges form a single tree spanning all joints.
    pub fn is_spanning_tree(&self) -> bool {
        if self.edges.len() != JOINT_COUNT - 1 {
            return false;
        }
        let mut seen = [false; JOINT_COUNT];
        let mut stack = vec![JointId::HipCenter];
        seen[JointId::HipCenter.slot()] = true;
        while let Some(j) = stack.pop() {
            for &n in self.neighbors(j) {
                if !seen[n.slot()] {
                    seen[n.slot()] = true;
                    stack.push(n);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

/// The fixed Kinect-v1 20-joint tree.
pub fn canonical_topology() -> SkeletonTopology {
    SkeletonTopology::from_edges(&CANONICAL_EDGES)
}

/// Joint positions at one time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub positions: [Vec3; JOINT_COUNT],
    pub frame_index: usize,
}

impl SkeletonFrame {
    pub fn new(positions: [Vec3; JOINT_COUNT], frame_index: usize) -> Result<Self, SkeletonError> {
        let frame = Self {
            positions,
            frame_index,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn position(&self, joint: JointId) -> Vec3 {
        self.positions[joint.slot()]
    }

    pub fn validate(&self) -> Result<(), SkeletonError> {
        for joint in JointId::ALL {
            if self.position(joint).iter().any(|c| !c.is_finite()) {
                return Err(SkeletonError::NonFinite {
                    joint,
                    frame_index: self.frame_index,
                });
            }
        }
        Ok(())
    }

    /// Applies `f` to every joint position.
    pub fn map_positions(&self, mut f: impl FnMut(Vec3) -> Vec3) -> Self {
        let mut positions = self.positions;
        for p in &mut positions {
            *p = f(*p);
        }
        Self {
            positions,
            frame_index: self.frame_index,
        }
    }
}

/// Two-class action label as used in capture annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    One,
    Two,
}

impl ClassLabel {
    pub fn from_number(n: u32) -> Option<Self> {
        match n {
            1 => Some(ClassLabel::One),
            2 => Some(ClassLabel::Two),
            _ => None,
        }
    }

    pub fn number(self) -> u32 {
        match self {
            ClassLabel::One => 1,
            ClassLabel::Two => 2,
        }
    }

    /// SVM encoding: class 1 is +1, class 2 is -1.
    pub fn to_sign(self) -> i8 {
        match self {
            ClassLabel::One => 1,
            ClassLabel::Two => -1,
        }
    }

    pub fn from_sign(sign: i8) -> Self {
        if sign >= 0 {
            ClassLabel::One
        } else {
            ClassLabel::Two
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// 22 joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleVector(pub [f64; ANGLE_COUNT]);

impl AngleVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A contiguous run of frames annotated as one action performance.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionWindow {
    pub frames: Vec<SkeletonFrame>,
    pub label: Option<ClassLabel>,
    pub source_id: String,
}

/// Per-angle variances over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; ANGLE_COUNT],
    pub label: Option<ClassLabel>,
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Displacements from `center` to each of its neighbours, ascending by neighbour index.
pub fn limb_vectors(
    frame: &SkeletonFrame,
    center: JointId,
    topology: &SkeletonTopology,
) -> Vec<(JointId, Vec3)> {
    let origin = frame.position(center);
    topology
        .neighbors(center)
        .iter()
        .map(|&n| (n, sub(frame.position(n), origin)))
        .collect()
}

/// Angle between two limb vectors, in `[0, π]`.
pub fn joint_angle(a: Vec3, b: Vec3) -> Result<f64, SkeletonError> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(SkeletonError::ZeroLengthVector);
    }
    let cos = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(cos.acos())
}

/// All joint angles of one frame in canonical order.
///
/// Requires a topology with exactly 22 angle slots.
pub fn frame_angles(
    frame: &SkeletonFrame,
    topology: &SkeletonTopology,
) -> Result<AngleVector, SkeletonError> {
    assert_eq!(
        topology.angle_count(),
        ANGLE_COUNT,
        "topology must define {ANGLE_COUNT} angles"
    );
    frame.validate()?;
    let mut out = [0.0; ANGLE_COUNT];
    for (slot, angle) in topology.angle_slots().iter().zip(out.iter_mut()) {
        let origin = frame.position(slot.center);
        let a = sub(frame.position(slot.first), origin);
        let b = sub(frame.position(slot.second), origin);
        *angle = joint_angle(a, b).map_err(|_| {
            let neighbor = if norm(a) == 0.0 { slot.first } else { slot.second };
            SkeletonError::DegenerateLimb {
                center: slot.center,
                neighbor,
            }
        })?;
    }
    Ok(AngleVector(out))
}

/// Unbiased per-angle variance over the window (divisor `M - 1`).
pub fn window_features(
    window: &ActionWindow,
    topology: &SkeletonTopology,
) -> Result<FeatureVector, SkeletonError> {
    let m = window.frames.len();
    if m < 2 {
        return Err(SkeletonError::WindowTooShort { frames: m });
    }
    let angles = window
        .frames
        .iter()
        .map(|f| {
            frame_angles(f, topology).map_err(|e| SkeletonError::InFrame {
                frame_index: f.frame_index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    // Two passes over values shifted by the first frame, so a constant angle
    // gives exactly zero.
    let origin = angles[0].0;
    let mut mean = [0.0; ANGLE_COUNT];
    for a in &angles {
        for ((acc, v), o) in mean.iter_mut().zip(a.0).zip(origin) {
            *acc += v - o;
        }
    }
    for v in &mut mean {
        *v /= m as f64;
    }
    let mut values = [0.0; ANGLE_COUNT];
    for a in &angles {
        for (((acc, v), mu), o) in values.iter_mut().zip(a.0).zip(mean).zip(origin) {
            let d = (v - o) - mu;
            *acc += d * d;
        }
    }
    for v in &mut values {
        *v /= (m - 1) as f64;
    }
    Ok(FeatureVector {
        values,
        label: window.label,
    })
}

/// Splits a frame stream into fixed-length windows advancing by `stride`.
/// Trailing frames that do not fill a window are dropped.
pub fn sliding_windows(
    frames: &[SkeletonFrame],
    window_len: usize,
    stride: usize,
    source_id: &str,
) -> Vec<ActionWindow> {
    assert!(window_len >= 2 && stride >= 1);
    let mut out = Vec::new();
    let mut start = 0;
    while start + window_len <= frames.len() {
        out.push(ActionWindow {
            frames: frames[start..start + window_len].to_vec(),
            label: None,
            source_id: format!("{source_id}[{start}..{}]", start + window_len - 1),
        });
        start += stride;
    }
    out
}

/// Index of the elbow angles in the canonical ordering.
pub fn elbow_angle_indices(topology: &SkeletonTopology) -> (usize, usize) {
    use JointId::*;
    let left = topology
        .angle_index(ElbowLeft, ShoulderLeft, WristLeft)
        .expect("left elbow angle");
    let right = topology
        .angle_index(ElbowRight, ShoulderRight, WristRight)
        .expect("right elbow angle");
    (left, right)
}

/// A neutral standing pose (metres, y up) with every limb of non-zero length.
pub fn standing_pose() -> [Vec3; JOINT_COUNT] {
    [
        [0.0, 0.0, 0.0],     // HipCenter
        [0.0, 0.3, 0.0],     // Spine
        [0.0, 0.6, 0.0],     // ShoulderCenter
        [0.0, 0.8, 0.05],    // Head
        [-0.2, 0.55, 0.0],   // ShoulderLeft
        [-0.25, 0.3, 0.05],  // ElbowLeft
        [-0.2, 0.1, 0.15],   // WristLeft
        [-0.18, 0.05, 0.2],  // HandLeft
        [0.2, 0.55, 0.0],    // ShoulderRight
        [0.25, 0.3, 0.05],   // ElbowRight
        [0.2, 0.1, 0.15],    // WristRight
        [0.18, 0.05, 0.2],   // HandRight
        [-0.1, -0.05, 0.0],  // HipLeft
        [-0.12, -0.45, 0.05], // KneeLeft
        [-0.12, -0.85, 0.0], // AnkleLeft
        [-0.12, -0.9, 0.1],  // FootLeft
        [0.1, -0.05, 0.0],   // HipRight
        [0.12, -0.45, 0.05], // KneeRight
        [0.12, -0.85, 0.0],  // AnkleRight
        [0.12, -0.9, 0.1],   // FootRight
    ]
}

#[cfg(test)]
pub(crate) fn angle_in_range(theta: f64) -> bool {
    (0.0..=PI).contains(&theta)
}
