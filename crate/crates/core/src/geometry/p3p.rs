//! Grunert's three-point resection.
//!
//! With unit bearings `f_i` and unknown depths `s_i`, the law of cosines on the
//! three triangle sides gives three quadrics in `s`. Writing `u = s2/s1`,
//! `v = s3/s1` eliminates `s1` and `u`, leaving a quartic in `v`. Each positive
//! real root yields depths, and the pose is the rigid alignment of the
//! camera-frame points onto the world points.

use alloc::vec::Vec;
use nalgebra::{Matrix3, Matrix4, Vector3};

use super::{reprojection_error, CameraIntrinsics, Correspondence2D3D, GeometryError, Pose};

/// Solutions that do not reproduce their own input pixels this closely are
/// spurious roots.
const MAX_RESIDUAL_PX: f64 = 1e-6;

type Poly = [f64; 5]; // coefficients, lowest degree first

fn pmul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = [0.0; 5];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if i + j < 5 {
                out[i + j] += x * y;
            }
        }
    }
    out
}

fn padd(a: &Poly, b: &Poly, scale: f64) -> Poly {
    let mut out = *a;
    for i in 0..5 {
        out[i] += scale * b[i];
    }
    out
}

fn peval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn pderiv_eval(p: &[f64], x: f64) -> f64 {
    p.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, c)| acc * x + i as f64 * c)
}

/// Real roots of a polynomial of degree ≤ 4 via companion-matrix eigenvalues,
/// each polished by Newton steps.
fn real_roots(p: &Poly) -> Vec<f64> {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = 4;
    while deg > 0 && p[deg].abs() < 1e-12 * scale {
        deg -= 1;
    }
    let mut cands = Vec::new();
    match deg {
        0 => {}
        1 => cands.push(-p[0] / p[1]),
        _ => {
            let lead = p[deg];
            let mut comp = Matrix4::<f64>::zeros();
            for i in 0..deg {
                comp[(0, i)] = -p[deg - 1 - i] / lead;
                if i + 1 < deg {
                    comp[(i + 1, i)] = 1.0;
                }
            }
            let m = comp.view((0, 0), (deg, deg)).into_owned();
            let ev = m.complex_eigenvalues();
            for z in ev.iter() {
                if z.im.abs() <= 1e-6 * (1.0 + z.re.abs()) {
                    cands.push(z.re);
                }
            }
        }
    }
    cands
        .into_iter()
        .map(|mut x| {
            for _ in 0..8 {
                let d = pderiv_eval(p, x);
                if d == 0.0 {
                    break;
                }
                let dx = peval(p, x) / d;
                x -= dx;
                if dx.abs() < 1e-15 * (1.0 + x.abs()) {
                    break;
                }
            }
            x
        })
        .filter(|x| x.is_finite())
        .collect()
}

/// Gauss–Newton on the three law-of-cosines residuals in the depths.
fn polish_depths(s: &mut Vector3<f64>, cos: [f64; 3], sq: [f64; 3]) {
    let [ca, cb, cg] = cos;
    let [a2, b2, c2] = sq;
    for _ in 0..5 {
        let (s1, s2, s3) = (s[0], s[1], s[2]);
        let r = Vector3::new(
            s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * ca - a2,
            s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cb - b2,
            s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cg - c2,
        );
        let j = Matrix3::new(
            0.0,
            2.0 * s2 - 2.0 * s3 * ca,
            2.0 * s3 - 2.0 * s2 * ca,
            2.0 * s1 - 2.0 * s3 * cb,
            0.0,
            2.0 * s3 - 2.0 * s1 * cb,
            2.0 * s1 - 2.0 * s2 * cg,
            2.0 * s2 - 2.0 * s1 * cg,
            0.0,
        );
        let Some(step) = j.lu().solve(&r) else { return };
        let next = *s - step;
        if !next.iter().all(|v| v.is_finite() && *v > 0.0) {
            return;
        }
        *s = next;
        if step.norm() < 1e-15 * s.norm() {
            return;
        }
    }
}

/// Rigid transform `R, t` minimizing `Σ |dst_i − (R src_i + t)|²`.
pub(crate) fn kabsch(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Option<Pose> {
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let v = vt.transpose();
    let mut dmat = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        dmat[(2, 2)] = -1.0;
    }
    let r = v * dmat * u.transpose();
    let t = cd - r * cs;
    Some(Pose::from_rotation_matrix(t, &r))
}

fn collinear(p: &[Vector3<f64>; 3]) -> bool {
    let a = p[1] - p[0];
    let b = p[2] - p[0];
    let scale = a.norm() * b.norm();
    scale == 0.0 || a.cross(&b).norm() < 1e-9 * scale
}

/// Up to four camera-to-world poses consistent with three correspondences.
pub fn solve_p3p(
    correspondences: &[Correspondence2D3D; 3],
    intrinsics: &CameraIntrinsics,
) -> Result<Vec<Pose>, GeometryError> {
    let pts = [
        correspondences[0].point,
        correspondences[1].point,
        correspondences[2].point,
    ];
    if collinear(&pts) {
        return Err(GeometryError::DegenerateGeometry);
    }
    let f: [Vector3<f64>; 3] = core::array::from_fn(|i| intrinsics.bearing(&correspondences[i].pixel));

    let a2 = (pts[1] - pts[2]).norm_squared();
    let b2 = (pts[0] - pts[2]).norm_squared();
    let c2 = (pts[0] - pts[1]).norm_squared();
    let ca = f[1].dot(&f[2]);
    let cb = f[0].dot(&f[2]);
    let cg = f[0].dot(&f[1]);

    let k = (a2 - c2) / b2;
    let q = [1.0, -2.0 * cb, 1.0];
    let numer = [k * q[0] + 1.0, k * q[1], k * q[2] - 1.0];
    let denom = [2.0 * cg, -2.0 * ca];
    let one_minus = [1.0 - c2 / b2 * q[0], -c2 / b2 * q[1], -c2 / b2 * q[2]];

    let quartic = padd(
        &padd(&pmul(&pmul(&denom, &denom), &one_minus), &pmul(&numer, &numer), 1.0),
        &pmul(&numer, &denom),
        -2.0 * cg,
    );

    let mut out: Vec<Pose> = Vec::new();
    for v in real_roots(&quartic) {
        if v <= 0.0 {
            continue;
        }
        let qv = peval(&q, v);
        if qv <= 0.0 {
            continue;
        }
        let dv = peval(&denom, v);
        let mut us: Vec<f64> = Vec::new();
        if dv != 0.0 {
            us.push(peval(&numer, v) / dv);
        }
        // Near symmetric configurations N and D share a root and N/D loses u;
        // the c-side quadric always contains it, so try its roots as well.
        let disc = cg * cg - peval(&one_minus, v);
        if disc >= 0.0 {
            let r = libm::sqrt(disc);
            us.extend([cg + r, cg - r]);
        }
        for u in us {
            if u <= 0.0 {
                continue;
            }
            let s1 = libm::sqrt(b2 / qv);
            let mut s = Vector3::new(s1, u * s1, v * s1);
            polish_depths(&mut s, [ca, cb, cg], [a2, b2, c2]);
            let cam: [Vector3<f64>; 3] = core::array::from_fn(|i| f[i] * s[i]);
            let Some(pose) = kabsch(&cam, &pts) else { continue };
            let consistent = correspondences
                .iter()
                .all(|c| reprojection_error(&pose, intrinsics, c).is_some_and(|e| e < MAX_RESIDUAL_PX));
            let dup = out.iter().any(|p| {
                (p.translation - pose.translation).norm() < 1e-9 && p.angle_to(&pose) < 1e-9
            });
            if consistent && !dup {
                out.push(pose);
            }
        }
    }
    Ok(out)
}
