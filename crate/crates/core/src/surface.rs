//! Discrete immersed torus and the per-point geometry pipeline: lift
//! partials, induced metric, Kähler-form pullbacks, second fundamental
//! form / mean curvature, and the Hamiltonian vector fields of the
//! pullback functions.

use crate::ambient::{dot4, mat_vec, AmbientSpace, Vec4};
use crate::deriv::{DerivOps, Scheme, Vec4Derivs};
use crate::error::{HflowError, Result};
use crate::grid::GridDims;

/// det g at or below this value is treated as a degenerate immersion.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Discrete immersion f(x) = x^1 W_1 + x^2 W_2 + p(x) together with the
/// background area density rho_12 (the density of rho against dx^1^dx^2).
#[derive(Clone, Debug)]
pub struct SurfaceState {
    pub dims: GridDims,
    pub time: f64,
    /// Period increments of the lift: f(x + e_i) = f(x) + winding[i].
    pub winding: [Vec4; 2],
    pub periodic_part: Vec<Vec4>,
    pub background_density: Vec<f64>,
    pub scheme: Scheme,
}

impl SurfaceState {
    pub fn new(
        dims: GridDims,
        winding: [Vec4; 2],
        periodic_part: Vec<Vec4>,
        background_density: Vec<f64>,
        scheme: Scheme,
    ) -> Result<Self> {
        if dims.n1 < 4 || dims.n2 < 4 {
            return Err(HflowError::config("grid must be at least 4 x 4"));
        }
        if periodic_part.len() != dims.len() || background_density.len() != dims.len() {
            return Err(HflowError::config("field lengths do not match the grid"));
        }
        for (k, &r) in background_density.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(HflowError::Config(format!(
                    "background density must be positive and finite (got {r} at node {k})"
                )));
            }
        }
        Ok(SurfaceState {
            dims,
            time: 0.0,
            winding,
            periodic_part,
            background_density,
            scheme,
        })
    }

    pub fn ops(&self) -> DerivOps {
        DerivOps::new(self.scheme, self.dims)
    }

    /// Value of the lift at node (i, j).
    pub fn lift_at(&self, i: usize, j: usize) -> Vec4 {
        let (x1, x2) = self.dims.coords(i, j);
        let p = &self.periodic_part[self.dims.idx(i, j)];
        let mut f = *p;
        for c in 0..4 {
            f[c] += x1 * self.winding[0][c] + x2 * self.winding[1][c];
        }
        f
    }

    /// Both winding rows must be integer combinations of lattice periods.
    pub fn validate_winding(&self, ambient: &AmbientSpace) -> Result<()> {
        for (r, w) in self.winding.iter().enumerate() {
            let coeffs = mat_vec(&ambient.lattice_inv, w);
            for &c in &coeffs {
                if (c - c.round()).abs() > 1e-9 {
                    return Err(HflowError::Config(format!(
                        "winding row {r} is not an integer combination of lattice periods"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// First derivatives of the lift and second derivatives of its periodic
/// part (the winding part is linear, so these are also the second
/// derivatives of the lift).
#[derive(Clone, Debug)]
pub struct Partials {
    pub d1f: Vec<Vec4>,
    pub d2f: Vec<Vec4>,
    pub d11p: Vec<Vec4>,
    pub d12p: Vec<Vec4>,
    pub d22p: Vec<Vec4>,
}

pub fn lift_partials(state: &SurfaceState) -> Partials {
    let Vec4Derivs {
        mut d1,
        mut d2,
        d11,
        d12,
        d22,
    } = state.ops().vec4_derivs(&state.periodic_part);
    for v in d1.iter_mut() {
        for c in 0..4 {
            v[c] += state.winding[0][c];
        }
    }
    for v in d2.iter_mut() {
        for c in 0..4 {
            v[c] += state.winding[1][c];
        }
    }
    Partials {
        d1f: d1,
        d2f: d2,
        d11p: d11,
        d12p: d12,
        d22p: d22,
    }
}

/// Induced metric, its inverse, the area density sqrt(det g), and the
/// ratio lambda = sqrt(det g) / rho_12.
#[derive(Clone, Debug)]
pub struct InducedGeometry {
    pub g11: Vec<f64>,
    pub g12: Vec<f64>,
    pub g22: Vec<f64>,
    pub det_g: Vec<f64>,
    pub inv_g11: Vec<f64>,
    pub inv_g12: Vec<f64>,
    pub inv_g22: Vec<f64>,
    pub area_density: Vec<f64>,
    pub lambda: Vec<f64>,
}

pub fn induced_geometry(
    state: &SurfaceState,
    partials: &Partials,
    degeneracy_threshold: f64,
) -> Result<InducedGeometry> {
    let n = state.dims.len();
    let mut out = InducedGeometry {
        g11: vec![0.0; n],
        g12: vec![0.0; n],
        g22: vec![0.0; n],
        det_g: vec![0.0; n],
        inv_g11: vec![0.0; n],
        inv_g12: vec![0.0; n],
        inv_g22: vec![0.0; n],
        area_density: vec![0.0; n],
        lambda: vec![0.0; n],
    };
    for k in 0..n {
        let u = &partials.d1f[k];
        let v = &partials.d2f[k];
        let g11 = dot4(u, u);
        let g12 = dot4(u, v);
        let g22 = dot4(v, v);
        let det = g11 * g22 - g12 * g12;
        if !(det > degeneracy_threshold) {
            return Err(HflowError::ImmersionDegenerate {
                i: k / state.dims.n2,
                j: k % state.dims.n2,
                det,
                threshold: degeneracy_threshold,
            });
        }
        let inv_det = 1.0 / det;
        out.g11[k] = g11;
        out.g12[k] = g12;
        out.g22[k] = g22;
        out.det_g[k] = det;
        out.inv_g11[k] = g22 * inv_det;
        out.inv_g12[k] = -g12 * inv_det;
        out.inv_g22[k] = g11 * inv_det;
        let sqrt_det = det.sqrt();
        out.area_density[k] = sqrt_det;
        out.lambda[k] = sqrt_det / state.background_density[k];
    }
    Ok(out)
}

/// Pullback densities N_a = omega_a(d1 f, d2 f) / rho_12 and the
/// normalized eta_a = omega_a(d1 f, d2 f) / sqrt(det g) = N_a / lambda.
#[derive(Clone, Debug)]
pub struct PullbackFields {
    pub n: [Vec<f64>; 3],
    pub eta: [Vec<f64>; 3],
}

pub fn pullback_fields(
    state: &SurfaceState,
    partials: &Partials,
    induced: &InducedGeometry,
    ambient: &AmbientSpace,
) -> PullbackFields {
    let n = state.dims.len();
    let mut out = PullbackFields {
        n: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        eta: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
    };
    for k in 0..n {
        let u = &partials.d1f[k];
        let v = &partials.d2f[k];
        for a in 0..3 {
            let w = ambient.omega_eval(a, u, v);
            out.n[a][k] = w / state.background_density[k];
            out.eta[a][k] = w / induced.area_density[k];
        }
    }
    out
}

/// Normal-projected second fundamental form, mean curvature, and the
/// pointwise norms |A|^2 and |H|^2.
#[derive(Clone, Debug)]
pub struct CurvatureFields {
    pub a11: Vec<Vec4>,
    pub a12: Vec<Vec4>,
    pub a22: Vec<Vec4>,
    pub mean: Vec<Vec4>,
    pub norm_sq_a: Vec<f64>,
    pub norm_sq_h: Vec<f64>,
}

pub fn curvature_fields(partials: &Partials, induced: &InducedGeometry) -> CurvatureFields {
    let n = partials.d1f.len();
    let mut out = CurvatureFields {
        a11: vec![[0.0; 4]; n],
        a12: vec![[0.0; 4]; n],
        a22: vec![[0.0; 4]; n],
        mean: vec![[0.0; 4]; n],
        norm_sq_a: vec![0.0; n],
        norm_sq_h: vec![0.0; n],
    };
    for k in 0..n {
        let u = &partials.d1f[k];
        let v = &partials.d2f[k];
        let gi = [
            [induced.inv_g11[k], induced.inv_g12[k]],
            [induced.inv_g12[k], induced.inv_g22[k]],
        ];
        let project = |dd: &Vec4| -> Vec4 {
            let c1 = dot4(dd, u);
            let c2 = dot4(dd, v);
            let a1 = gi[0][0] * c1 + gi[0][1] * c2;
            let a2 = gi[1][0] * c1 + gi[1][1] * c2;
            let mut out = *dd;
            for c in 0..4 {
                out[c] -= a1 * u[c] + a2 * v[c];
            }
            out
        };
        let a11 = project(&partials.d11p[k]);
        let a12 = project(&partials.d12p[k]);
        let a22 = project(&partials.d22p[k]);
        let mut mean = [0.0; 4];
        for c in 0..4 {
            mean[c] = gi[0][0] * a11[c] + 2.0 * gi[0][1] * a12[c] + gi[1][1] * a22[c];
        }
        let b = [[&a11, &a12], [&a12, &a22]];
        let mut norm_sq_a = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for r in 0..2 {
                    for s in 0..2 {
                        norm_sq_a += gi[i][r] * gi[j][s] * dot4(b[i][j], b[r][s]);
                    }
                }
            }
        }
        out.a11[k] = a11;
        out.a12[k] = a12;
        out.a22[k] = a22;
        out.mean[k] = mean;
        out.norm_sq_a[k] = norm_sq_a;
        out.norm_sq_h[k] = dot4(&mean, &mean);
    }
    out
}

/// Hamiltonian vector fields of the pullback functions: in parameter
/// coordinates, rho_12 xi_a^1 = d2 N_a and rho_12 xi_a^2 = -d1 N_a.
pub fn hamiltonian_fields(state: &SurfaceState, n_fields: &[Vec<f64>; 3]) -> [Vec<[f64; 2]>; 3] {
    let ops = state.ops();
    let (n1_1, n1_2, n2_1, n2_2) = ops.grad_scalar_pair(&n_fields[0], &n_fields[1]);
    let (n3_1, n3_2) = ops.grad_scalar(&n_fields[2]);
    let assemble = |d1: Vec<f64>, d2: Vec<f64>| -> Vec<[f64; 2]> {
        d1.iter()
            .zip(&d2)
            .zip(&state.background_density)
            .map(|((&a, &b), &rho)| [b / rho, -a / rho])
            .collect()
    };
    [
        assemble(n1_1, n1_2),
        assemble(n2_1, n2_2),
        assemble(n3_1, n3_2),
    ]
}

/// Index-raised gradient of lambda: (grad lambda)^i = g^{ij} d_j lambda.
pub fn grad_lambda_field(state: &SurfaceState, induced: &InducedGeometry) -> Vec<[f64; 2]> {
    let (d1, d2) = state.ops().grad_scalar(&induced.lambda);
    let mut out = Vec::with_capacity(d1.len());
    for k in 0..d1.len() {
        out.push([
            induced.inv_g11[k] * d1[k] + induced.inv_g12[k] * d2[k],
            induced.inv_g12[k] * d1[k] + induced.inv_g22[k] * d2[k],
        ]);
    }
    out
}

/// Everything the flow engine and the diagnostics consume, derived from a
/// single state.
#[derive(Clone, Debug)]
pub struct GeometryFields {
    pub dims: GridDims,
    pub partials: Partials,
    pub induced: InducedGeometry,
    pub pullbacks: PullbackFields,
    pub curvature: CurvatureFields,
    pub xi: [Vec<[f64; 2]>; 3],
    pub grad_lambda: Vec<[f64; 2]>,
}

impl GeometryFields {
    pub fn compute(
        state: &SurfaceState,
        ambient: &AmbientSpace,
        degeneracy_threshold: f64,
    ) -> Result<GeometryFields> {
        let partials = lift_partials(state);
        let induced = induced_geometry(state, &partials, degeneracy_threshold)?;
        let pullbacks = pullback_fields(state, &partials, &induced, ambient);
        let curvature = curvature_fields(&partials, &induced);

        // fused derivative passes: (N1, N2) and (N3, lambda)
        let ops = state.ops();
        let (n1_1, n1_2, n2_1, n2_2) = ops.grad_scalar_pair(&pullbacks.n[0], &pullbacks.n[1]);
        let (n3_1, n3_2, l1, l2) = ops.grad_scalar_pair(&pullbacks.n[2], &induced.lambda);
        let assemble = |d1: &[f64], d2: &[f64]| -> Vec<[f64; 2]> {
            d1.iter()
                .zip(d2)
                .zip(&state.background_density)
                .map(|((&a, &b), &rho)| [b / rho, -a / rho])
                .collect()
        };
        let xi = [
            assemble(&n1_1, &n1_2),
            assemble(&n2_1, &n2_2),
            assemble(&n3_1, &n3_2),
        ];
        let mut grad_lambda = Vec::with_capacity(state.dims.len());
        for k in 0..state.dims.len() {
            grad_lambda.push([
                induced.inv_g11[k] * l1[k] + induced.inv_g12[k] * l2[k],
                induced.inv_g12[k] * l1[k] + induced.inv_g22[k] * l2[k],
            ]);
        }

        Ok(GeometryFields {
            dims: state.dims,
            partials,
            induced,
            pullbacks,
            curvature,
            xi,
            grad_lambda,
        })
    }

    pub fn max_norm_sq_a(&self) -> f64 {
        self.curvature
            .norm_sq_a
            .iter()
            .fold(0.0f64, |m, &v| m.max(v))
    }

    pub fn max_lambda(&self) -> f64 {
        self.induced.lambda.iter().fold(f64::MIN, |m, &v| m.max(v))
    }

    pub fn min_lambda(&self) -> f64 {
        self.induced.lambda.iter().fold(f64::MAX, |m, &v| m.min(v))
    }
}
