//! Flat hyperkähler 4-torus: Euclidean metric, the triple of parallel
//! Kähler forms, the complex structures they induce, and the calibration
//! form used by the lower-bound diagnostics.
//!
//! Everything here is constant-coefficient linear algebra on R^4; the
//! torus only enters through the period lattice.

use crate::error::{HflowError, Result};

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];

pub const MAT4_ZERO: Mat4 = [[0.0; 4]; 4];
pub const MAT4_ID: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

pub fn dot4(a: &Vec4, b: &Vec4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

pub fn norm4(a: &Vec4) -> f64 {
    dot4(a, a).sqrt()
}

pub fn axpy4(y: &mut Vec4, alpha: f64, x: &Vec4) {
    for c in 0..4 {
        y[c] += alpha * x[c];
    }
}

pub fn scale4(a: &Vec4, s: f64) -> Vec4 {
    [a[0] * s, a[1] * s, a[2] * s, a[3] * s]
}

/// m acting on a column vector.
pub fn mat_vec(m: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for r in 0..4 {
        out[r] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
    }
    out
}

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = MAT4_ZERO;
    for r in 0..4 {
        for c in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                s += a[r][k] * b[k][c];
            }
            out[r][c] = s;
        }
    }
    out
}

pub fn mat_transpose(m: &Mat4) -> Mat4 {
    let mut out = MAT4_ZERO;
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = m[c][r];
        }
    }
    out
}

/// Largest absolute entry of a - b.
pub fn mat_max_diff(a: &Mat4, b: &Mat4) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            worst = worst.max((a[r][c] - b[r][c]).abs());
        }
    }
    worst
}

/// Gauss-Jordan inverse with partial pivoting; errors on a singular matrix.
pub fn mat_inverse(m: &Mat4) -> Result<Mat4> {
    let mut a = *m;
    let mut inv = MAT4_ID;
    for col in 0..4 {
        let mut pivot = col;
        for r in col + 1..4 {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return Err(HflowError::config("singular 4x4 matrix"));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for c in 0..4 {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for r in 0..4 {
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f != 0.0 {
                for c in 0..4 {
                    a[r][c] -= f * a[col][c];
                    inv[r][c] -= f * inv[col][c];
                }
            }
        }
    }
    Ok(inv)
}

fn is_positive_definite(m: &Mat4) -> bool {
    // Cholesky without pivoting; fails iff not symmetric positive definite.
    let mut l = MAT4_ZERO;
    for i in 0..4 {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

/// Evaluate the 2-form with component matrix `omega` on a pair of vectors.
pub fn form_eval(omega: &Mat4, u: &Vec4, v: &Vec4) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += omega[a][b] * u[a] * v[b];
        }
    }
    s
}

/// Coefficient of the volume form dy1^dy2^dy3^dy4 in the wedge square
/// a ^ b of two 2-forms, expanded over (2,2)-shuffles.
pub fn wedge_volume_coeff(a: &Mat4, b: &Mat4) -> f64 {
    // (i, j, k, l, sign) with i<j, k<l and {i,j,k,l} = {0,1,2,3}
    const SHUFFLES: [(usize, usize, usize, usize, f64); 6] = [
        (0, 1, 2, 3, 1.0),
        (0, 2, 1, 3, -1.0),
        (0, 3, 1, 2, 1.0),
        (1, 2, 0, 3, 1.0),
        (1, 3, 0, 2, -1.0),
        (2, 3, 0, 1, 1.0),
    ];
    SHUFFLES
        .iter()
        .map(|&(i, j, k, l, s)| s * a[i][j] * b[k][l])
        .sum()
}

/// The complex structure induced by a Kähler form and a metric through
/// omega(X, Y) = <JX, Y>, i.e. J = g^{-1} omega^T in column-action form.
pub fn complex_structure_from_form(omega: &Mat4, metric: &Mat4) -> Result<Mat4> {
    if !is_positive_definite(metric) {
        return Err(HflowError::config(
            "metric must be symmetric positive definite",
        ));
    }
    let ginv = mat_inverse(metric)?;
    Ok(mat_mul(&ginv, &mat_transpose(omega)))
}

fn antisym(entries: &[(usize, usize, f64)]) -> Mat4 {
    let mut m = MAT4_ZERO;
    for &(a, b, v) in entries {
        m[a][b] = v;
        m[b][a] = -v;
    }
    m
}

/// The ambient flat hyperkähler torus: identity metric, the three Kähler
/// forms, their complex structures I, J, K, and the calibration 2-form.
#[derive(Clone, Debug)]
pub struct AmbientSpace {
    /// Period lattice, one generator per column.
    pub lattice: Mat4,
    pub lattice_inv: Mat4,
    pub metric: Mat4,
    /// Component matrices of the Kähler triple (omega_1, omega_2, omega_3).
    pub omega: [Mat4; 3],
    /// Calibration 2-form whose wedge square has the opposite orientation
    /// to that of omega_2.
    pub calibration: Mat4,
    /// Complex structures induced by (omega_a, metric); j_mats[0] is I, etc.
    pub j_mats: [Mat4; 3],
}

impl AmbientSpace {
    /// Standard structures: omega_1 = dy12 + dy34, omega_2 = dy14 + dy23,
    /// omega_3 = dy13 - dy24, calibration dy13 + dy24, Euclidean metric.
    pub fn standard(lattice: Mat4) -> Result<Self> {
        let omega1 = antisym(&[(0, 1, 1.0), (2, 3, 1.0)]);
        let omega2 = antisym(&[(0, 3, 1.0), (1, 2, 1.0)]);
        let omega3 = antisym(&[(0, 2, 1.0), (1, 3, -1.0)]);
        let calibration = antisym(&[(0, 2, 1.0), (1, 3, 1.0)]);
        Self::from_forms(lattice, MAT4_ID, [omega1, omega2, omega3], calibration)
    }

    pub fn standard_unit() -> Self {
        Self::standard(MAT4_ID).expect("standard space is well formed")
    }

    /// Build a space from explicit forms; the complex structures are derived
    /// from the compatibility relation. Forms must be exactly antisymmetric.
    pub fn from_forms(
        lattice: Mat4,
        metric: Mat4,
        omega: [Mat4; 3],
        calibration: Mat4,
    ) -> Result<Self> {
        let lattice_inv = mat_inverse(&lattice)
            .map_err(|_| HflowError::config("period lattice is singular"))?;
        for (name, m) in [
            ("omega_1", &omega[0]),
            ("omega_2", &omega[1]),
            ("omega_3", &omega[2]),
            ("calibration", &calibration),
        ] {
            if mat_max_diff(m, &mat_transpose(&scale_mat(m, -1.0))) != 0.0 {
                return Err(HflowError::Config(format!("{name} is not antisymmetric")));
            }
        }
        let j_mats = [
            complex_structure_from_form(&omega[0], &metric)?,
            complex_structure_from_form(&omega[1], &metric)?,
            complex_structure_from_form(&omega[2], &metric)?,
        ];
        Ok(AmbientSpace {
            lattice,
            lattice_inv,
            metric,
            omega,
            calibration,
            j_mats,
        })
    }

    pub fn omega_eval(&self, a: usize, u: &Vec4, v: &Vec4) -> f64 {
        form_eval(&self.omega[a], u, v)
    }

    pub fn calibration_eval(&self, u: &Vec4, v: &Vec4) -> f64 {
        form_eval(&self.calibration, u, v)
    }

    /// Wrap an ambient point into the fundamental domain of the lattice.
    pub fn wrap_point(&self, y: &Vec4) -> Vec4 {
        let mut frac = mat_vec(&self.lattice_inv, y);
        for c in frac.iter_mut() {
            *c -= c.floor();
        }
        mat_vec(&self.lattice, &frac)
    }
}

fn scale_mat(m: &Mat4, s: f64) -> Mat4 {
    let mut out = *m;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    out
}

/// Named residuals of the algebraic relations the ambient structures must
/// satisfy. Every residual is 0 (exactly) for the standard space.
#[derive(Clone, Debug)]
pub struct StructureReport {
    pub checks: Vec<(&'static str, f64)>,
    /// -1 if I*J = -K fits best, +1 if I*J = +K does.
    pub product_sign: i8,
}

impl StructureReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.checks.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().fold(0.0f64, |m, &(_, v)| m.max(v))
    }

    pub fn all_within(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Check antisymmetry, J_a^2 = -Id, compatibility with the metric,
/// orthogonality, the quaternionic product relation (reporting its sign),
/// and that the calibration square is oriented opposite to omega_2's.
pub fn verify_structure_relations(space: &AmbientSpace) -> StructureReport {
    let mut checks = Vec::new();

    let mut anti: f64 = 0.0;
    for m in space.omega.iter().chain([&space.calibration]) {
        let mt = mat_transpose(m);
        anti = anti.max(mat_max_diff(m, &scale_mat(&mt, -1.0)));
    }
    checks.push(("antisymmetry", anti));

    let mut square: f64 = 0.0;
    let minus_id = scale_mat(&MAT4_ID, -1.0);
    for jm in &space.j_mats {
        square = square.max(mat_max_diff(&mat_mul(jm, jm), &minus_id));
    }
    checks.push(("square_identity", square));

    // omega_a(X, Y) = <J_a X, Y>  <=>  omega_a = J_a^T g
    let mut compat: f64 = 0.0;
    for a in 0..3 {
        let jt_g = mat_mul(&mat_transpose(&space.j_mats[a]), &space.metric);
        compat = compat.max(mat_max_diff(&space.omega[a], &jt_g));
    }
    checks.push(("compatibility", compat));

    let mut ortho: f64 = 0.0;
    for jm in &space.j_mats {
        let jtgj = mat_mul(&mat_transpose(jm), &mat_mul(&space.metric, jm));
        ortho = ortho.max(mat_max_diff(&jtgj, &space.metric));
    }
    checks.push(("orthogonality", ortho));

    let ij = mat_mul(&space.j_mats[0], &space.j_mats[1]);
    let res_minus = mat_max_diff(&ij, &scale_mat(&space.j_mats[2], -1.0));
    let res_plus = mat_max_diff(&ij, &space.j_mats[2]);
    let (product_sign, product_res) = if res_minus <= res_plus {
        (-1, res_minus)
    } else {
        (1, res_plus)
    };
    checks.push(("product_relation", product_res));

    // Both wedge squares are multiples of the volume form with opposite
    // signs; a non-negative product is reported as the residual.
    let w_omega2 = wedge_volume_coeff(&space.omega[1], &space.omega[1]);
    let w_calib = wedge_volume_coeff(&space.calibration, &space.calibration);
    checks.push(("calibration_orientation", (w_omega2 * w_calib).max(0.0)));

    StructureReport {
        checks,
        product_sign,
    }
}
