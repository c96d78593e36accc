//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use qgasvm::skeleton::{standing_pose, SkeletonFrame, Vec3, JOINT_COUNT};
use qgasvm::svm::{Kernel, LabeledSample};
use rand::Rng;

/// Standing pose with every joint moved by up to `noise` metres per axis.
pub fn random_pose<R: Rng>(rng: &mut R, noise: f64) -> [Vec3; JOINT_COUNT] {
    let mut pos = standing_pose();
    for p in &mut pos {
        for v in p.iter_mut() {
            *v += rng.random_range(-noise..noise);
        }
    }
    pos
}

pub fn random_frame<R: Rng>(rng: &mut R, noise: f64, frame_index: usize) -> SkeletonFrame {
    SkeletonFrame::new(random_pose(rng, noise), frame_index).expect("finite pose")
}

/// Rotation matrix from a random unit quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    let mut q = [0.0f64; 4];
    loop {
        for v in &mut q {
            *v = rng.random_range(-1.0..1.0);
        }
        let n2: f64 = q.iter().map(|v| v * v).sum();
        if n2 > 1e-3 && n2 <= 1.0 {
            let n = n2.sqrt();
            for v in &mut q {
                *v /= n;
            }
            break;
        }
    }
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn apply(r: &[[f64; 3]; 3], scale: f64, t: Vec3, p: Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = scale * (r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2]) + t[i];
    }
    out
}

/// Textbook two-pass sample variance with divisor `n - 1`.
pub fn two_pass_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (offset, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Maximum of the soft-margin dual by enumerating every active set.
///
/// Each sample is pinned at 0, pinned at `c`, or free. For every pattern the
/// free multipliers solve the stationarity and equality conditions exactly; a
/// concave objective attains its constrained maximum at one of the feasible
/// candidates. Exponential in `n`; meant for `n <= 8`.
pub fn brute_force_dual(data: &[LabeledSample], kernel: &Kernel, c: f64) -> (f64, Vec<f64>) {
    let n = data.len();
    let y: Vec<f64> = data.iter().map(|s| f64::from(s.label)).collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| y[i] * y[j] * kernel.eval(&data[i].features, &data[j].features).unwrap())
                .collect()
        })
        .collect();
    let objective = |l: &[f64]| {
        let lin: f64 = l.iter().sum();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += l[i] * l[j] * q[i][j];
            }
        }
        lin - 0.5 * quad
    };

    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let patterns = 3usize.pow(n as u32);
    for code in 0..patterns {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in &mut state {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut lambda: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let fixed_sum: f64 = (0..n).filter(|&i| state[i] != 2).map(|i| lambda[i] * y[i]).sum();
        if free.is_empty() {
            if fixed_sum.abs() > 1e-12 {
                continue;
            }
        } else {
            // [Q_FF y_F; y_F^T 0] [l_F; nu] = [1 - Q_FB l_B; -y_B . l_B]
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut b = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (k, &j) in free.iter().enumerate() {
                    a[r][k] = q[i][j];
                }
                a[r][m] = y[i];
                a[m][r] = y[i];
                b[r] = 1.0 - (0..n).filter(|&j| state[j] != 2).map(|j| q[i][j] * lambda[j]).sum::<f64>();
            }
            b[m] = -fixed_sum;
            let Some(x) = solve_linear(a, b) else { continue };
            if x[..m].iter().any(|&v| v < -1e-12 || v > c + 1e-12) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                lambda[i] = x[r].clamp(0.0, c);
            }
        }
        let w = objective(&lambda);
        if w > best.0 {
            best = (w, lambda);
        }
    }
    best
}

/// A random problem with `n` samples of dimension `dim` and both labels present.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<LabeledSample> {
    assert!(n >= 2);
    let mut labels: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    labels[0] = 1;
    labels[1] = -1;
    labels
        .into_iter()
        .map(|label| {
            let features = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            LabeledSample::new(features, label).unwrap()
        })
        .collect()
}

pub fn xor_data() -> Vec<LabeledSample> {
    [([0.0, 0.0], -1), ([1.0, 1.0], -1), ([0.0, 1.0], 1), ([1.0, 0.0], 1)]
        .into_iter()
        .map(|(x, y)| LabeledSample::new(x.to_vec(), y).unwrap())
        .collect()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}
