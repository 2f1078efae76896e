//! Adapted orthonormal frames along the surface and the closed-form
//! component matrices the three Kähler forms take in such a frame when
//! the surface is omega_3-Lagrangian.

use crate::ambient::{axpy4, dot4, mat_max_diff, mat_vec, norm4, scale4, AmbientSpace, Mat4, Vec4};

/// Gram-Schmidt tangent frame (e1, e2) and normals nu_k = K e_k, plus
/// eta_1 = omega_1(e1, e2). The four vectors are orthonormal exactly when
/// omega_3(e1, e2) = 0.
#[derive(Clone, Copy, Debug)]
pub struct AdaptedFrame {
    pub e1: Vec4,
    pub e2: Vec4,
    pub nu1: Vec4,
    pub nu2: Vec4,
    pub eta1: f64,
}

pub fn adapted_frame(ambient: &AmbientSpace, d1f: &Vec4, d2f: &Vec4) -> AdaptedFrame {
    let e1 = scale4(d1f, 1.0 / norm4(d1f));
    let mut e2 = *d2f;
    axpy4(&mut e2, -dot4(d2f, &e1), &e1);
    let e2 = scale4(&e2, 1.0 / norm4(&e2));
    let nu1 = mat_vec(&ambient.j_mats[2], &e1);
    let nu2 = mat_vec(&ambient.j_mats[2], &e2);
    let eta1 = ambient.omega_eval(0, &e1, &e2);
    AdaptedFrame {
        e1,
        e2,
        nu1,
        nu2,
        eta1,
    }
}

/// Component matrices M_a[A][B] = omega_a(E_A, E_B) of the three Kähler
/// forms in the frame E = (e1, e2, nu1, nu2).
pub fn frame_form_matrices(ambient: &AmbientSpace, frame: &AdaptedFrame) -> [Mat4; 3] {
    let basis = [&frame.e1, &frame.e2, &frame.nu1, &frame.nu2];
    let mut out = [[[0.0; 4]; 4]; 3];
    for a in 0..3 {
        for r in 0..4 {
            for c in 0..4 {
                out[a][r][c] = ambient.omega_eval(a, basis[r], basis[c]);
            }
        }
    }
    out
}

/// Closed forms of those component matrices on an omega_3-Lagrangian
/// surface with eta_2 > 0, parameterized by eta_1 alone.
pub fn lagrangian_frame_forms(eta1: f64) -> [Mat4; 3] {
    let s = (1.0 - eta1 * eta1).max(0.0).sqrt();
    let m1 = [
        [0.0, eta1, 0.0, s],
        [-eta1, 0.0, -s, 0.0],
        [0.0, s, 0.0, -eta1],
        [-s, 0.0, eta1, 0.0],
    ];
    let m2 = [
        [0.0, s, 0.0, -eta1],
        [-s, 0.0, eta1, 0.0],
        [0.0, -eta1, 0.0, -s],
        [eta1, 0.0, s, 0.0],
    ];
    let m3 = [
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
    ];
    [m1, m2, m3]
}

/// Max-entry deviations of the measured frame matrices from the
/// closed forms.
#[derive(Clone, Copy, Debug)]
pub struct FrameResiduals {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        self.omega1.max(self.omega2).max(self.omega3)
    }
}

pub fn frame_residuals(ambient: &AmbientSpace, frame: &AdaptedFrame) -> FrameResiduals {
    let measured = frame_form_matrices(ambient, frame);
    let expected = lagrangian_frame_forms(frame.eta1);
    FrameResiduals {
        omega1: mat_max_diff(&measured[0], &expected[0]),
        omega2: mat_max_diff(&measured[1], &expected[1]),
        omega3: mat_max_diff(&measured[2], &expected[2]),
    }
}
