//! Quantitative checks on flow states and trajectories: the Dirichlet
//! energy of the Kähler pullbacks, the special-class defect Q, the
//! calibration ratios beta_1/beta_2 and their sum mu, pointwise identity
//! residuals, discrete residuals of the evolution laws for lambda^2, the
//! area density, |H|^2 and |A|^2, monotonicity verdicts over diagnostic
//! series, and a singularity-rate fitter.

use crate::ambient::{dot4, mat_vec, AmbientSpace};
use crate::deriv::Scheme;
use crate::error::{HflowError, Result};
use crate::flow::{FlowStatus, FlowTrajectory};
use crate::grid::GridDims;
use crate::surface::{GeometryFields, InducedGeometry, SurfaceState, DEGENERACY_THRESHOLD};

/// States with maxQ at or below this gate are treated as special-class.
pub const SPECIAL_Q_GATE: f64 = 1e-6;
/// Per-step relative slack allowed in the energy-descent verdict.
pub const ENERGY_STEP_TOL_REL: f64 = 1e-10;
/// Per-step absolute slack allowed in the max-lambda descent verdict.
pub const LAMBDA_STEP_TOL: f64 = 1e-8;
/// Per-step absolute slack allowed in the min-mu ascent verdict.
pub const MU_STEP_TOL: f64 = 1e-8;
/// Absolute slack on the lambda-range containment verdict.
pub const LAMBDA_RANGE_TOL: f64 = 1e-6;

/// One row of the diagnostic series a flow run emits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub min_lambda: f64,
    pub max_lambda: f64,
    pub max_q: f64,
    pub max_norm_sq_a: f64,
    pub max_norm_h: f64,
    pub int_a_sq_dmu: f64,
    pub total_area: f64,
    pub min_beta1: f64,
    pub min_beta2: f64,
    pub min_mu: f64,
    pub min_det_g: f64,
    pub dt: f64,
}

/// Weighted L^2 energy of the three pullback densities,
/// E = sum_a int N_a^2 rho dx, by the rectangle rule.
pub fn energy(state: &SurfaceState, geom: &GeometryFields) -> f64 {
    let w = 1.0 / state.dims.len() as f64;
    let mut e = 0.0;
    for k in 0..state.dims.len() {
        let rho = state.background_density[k];
        for a in 0..3 {
            e += geom.pullbacks.n[a][k].powi(2) * rho;
        }
    }
    e * w
}

/// The same energy through the pointwise identity sum_a N_a^2 = lambda^2.
pub fn energy_from_lambda(state: &SurfaceState, geom: &GeometryFields) -> f64 {
    let w = 1.0 / state.dims.len() as f64;
    let mut e = 0.0;
    for k in 0..state.dims.len() {
        e += geom.induced.lambda[k].powi(2) * state.background_density[k];
    }
    e * w
}

/// Special-class defect Q = (eta_2 - 1/lambda)^2 + eta_3^2.
pub fn q_field(geom: &GeometryFields) -> Vec<f64> {
    let n = geom.dims.len();
    let mut q = vec![0.0; n];
    for k in 0..n {
        let d = geom.pullbacks.eta[1][k] - 1.0 / geom.induced.lambda[k];
        q[k] = d * d + geom.pullbacks.eta[2][k].powi(2);
    }
    q
}

/// Calibration ratios beta_1 = eta_2 and beta_2 = pullback of the
/// anti-self-dual calibration divided by the area density.
pub fn beta_fields(
    state: &SurfaceState,
    geom: &GeometryFields,
    ambient: &AmbientSpace,
) -> (Vec<f64>, Vec<f64>) {
    let n = state.dims.len();
    let beta1 = geom.pullbacks.eta[1].clone();
    let mut beta2 = vec![0.0; n];
    for k in 0..n {
        let z = ambient.calibration_eval(&geom.partials.d1f[k], &geom.partials.d2f[k]);
        beta2[k] = z / geom.induced.area_density[k];
    }
    (beta1, beta2)
}

/// Full record for one state.
pub fn compute_record(
    state: &SurfaceState,
    geom: &GeometryFields,
    ambient: &AmbientSpace,
    dt: f64,
) -> DiagnosticsRecord {
    let n = state.dims.len();
    let w = 1.0 / n as f64;
    let q = q_field(geom);
    let (beta1, beta2) = beta_fields(state, geom, ambient);
    let mut rec = DiagnosticsRecord {
        t: state.time,
        energy: energy(state, geom),
        min_lambda: f64::MAX,
        max_lambda: f64::MIN,
        max_q: 0.0,
        max_norm_sq_a: 0.0,
        max_norm_h: 0.0,
        int_a_sq_dmu: 0.0,
        total_area: 0.0,
        min_beta1: f64::MAX,
        min_beta2: f64::MAX,
        min_mu: f64::MAX,
        min_det_g: f64::MAX,
        dt,
    };
    for k in 0..n {
        let lam = geom.induced.lambda[k];
        rec.min_lambda = rec.min_lambda.min(lam);
        rec.max_lambda = rec.max_lambda.max(lam);
        rec.max_q = rec.max_q.max(q[k]);
        rec.max_norm_sq_a = rec.max_norm_sq_a.max(geom.curvature.norm_sq_a[k]);
        rec.max_norm_h = rec.max_norm_h.max(geom.curvature.norm_sq_h[k]);
        rec.int_a_sq_dmu += geom.curvature.norm_sq_a[k] * geom.induced.area_density[k] * w;
        rec.total_area += geom.induced.area_density[k] * w;
        rec.min_beta1 = rec.min_beta1.min(beta1[k]);
        rec.min_beta2 = rec.min_beta2.min(beta2[k]);
        rec.min_mu = rec.min_mu.min(beta1[k] + beta2[k]);
        rec.min_det_g = rec.min_det_g.min(geom.induced.det_g[k]);
    }
    rec.max_norm_h = rec.max_norm_h.sqrt();
    rec
}

#[derive(Clone, Copy, Debug)]
pub struct ResidualEntry {
    pub name: &'static str,
    pub sup: f64,
}

/// Named sup-norm residuals together with the discretization they were
/// measured at. `time_spacing` is zero for static (single-state) checks.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub dims: GridDims,
    pub scheme: Scheme,
    pub time_spacing: f64,
}

impl ResidualReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.sup)
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, e| m.max(e.sup))
    }
}

/// Gram-Schmidt frame coefficients: e_a = E[a][i] d_i f.
fn frame_coefficients(induced: &InducedGeometry, k: usize) -> [[f64; 2]; 2] {
    let g11 = induced.g11[k];
    let g12 = induced.g12[k];
    let det = induced.det_g[k];
    let s = 1.0 / (g11 * det).sqrt();
    [[1.0 / g11.sqrt(), 0.0], [-g12 * s, g11 * s]]
}

/// Pointwise residuals of identities that hold exactly on special-class
/// states: (a) the lambda-gradient identity d lambda(e_k) =
/// lambda^2 eta_1 <nu_k, H> in the adapted frame, and (b) the Pythagorean
/// identity sum_a N_a^2 = lambda^2.
pub fn special_identity_residuals(
    state: &SurfaceState,
    geom: &GeometryFields,
    ambient: &AmbientSpace,
    q_gate: f64,
) -> Result<ResidualReport> {
    let q = q_field(geom);
    let max_q = q.iter().fold(0.0f64, |m, &v| m.max(v));
    if max_q > q_gate {
        return Err(HflowError::NotSpecial { max_q, gate: q_gate });
    }
    let (dl1, dl2) = state.ops().grad_scalar(&geom.induced.lambda);
    let mut frame_identity = 0.0f64;
    let mut pythagorean = 0.0f64;
    for k in 0..state.dims.len() {
        let coeff = frame_coefficients(&geom.induced, k);
        let lam = geom.induced.lambda[k];
        let eta1 = geom.pullbacks.eta[0][k];
        let h = &geom.curvature.mean[k];
        for row in coeff.iter() {
            let mut e = [0.0f64; 4];
            for c in 0..4 {
                e[c] = row[0] * geom.partials.d1f[k][c] + row[1] * geom.partials.d2f[k][c];
            }
            let nu = mat_vec(&ambient.j_mats[2], &e);
            let lhs = row[0] * dl1[k] + row[1] * dl2[k];
            let rhs = lam * lam * eta1 * dot4(&nu, h);
            frame_identity = frame_identity.max((lhs - rhs).abs());
        }
        let sum: f64 = (0..3).map(|a| geom.pullbacks.n[a][k].powi(2)).sum();
        pythagorean = pythagorean.max((sum - lam * lam).abs());
    }
    Ok(ResidualReport {
        entries: vec![
            ResidualEntry {
                name: "frame_identity",
                sup: frame_identity,
            },
            ResidualEntry {
                name: "pythagorean",
                sup: pythagorean,
            },
        ],
        dims: state.dims,
        scheme: state.scheme,
        time_spacing: 0.0,
    })
}

/// Laplace-Beltrami operator in divergence form,
/// (1/sqrt(det g)) d_i ( sqrt(det g) g^{ij} d_j phi ).
pub fn laplace_beltrami(state: &SurfaceState, induced: &InducedGeometry, field: &[f64]) -> Vec<f64> {
    let ops = state.ops();
    let (d1, d2) = ops.grad_scalar(field);
    let n = state.dims.len();
    let mut flux1 = vec![0.0; n];
    let mut flux2 = vec![0.0; n];
    for k in 0..n {
        let s = induced.area_density[k];
        flux1[k] = s * (induced.inv_g11[k] * d1[k] + induced.inv_g12[k] * d2[k]);
        flux2[k] = s * (induced.inv_g12[k] * d1[k] + induced.inv_g22[k] * d2[k]);
    }
    let (f1_1, _f1_2, _f2_1, f2_2) = ops.grad_scalar_pair(&flux1, &flux2);
    (0..n)
        .map(|k| (f1_1[k] + f2_2[k]) / induced.area_density[k])
        .collect()
}

/// Christoffel symbols of the induced metric, Gamma[k][i][j].
fn christoffels(state: &SurfaceState, induced: &InducedGeometry) -> Vec<[[[f64; 2]; 2]; 2]> {
    let ops = state.ops();
    let (g11_1, g11_2, g12_1, g12_2) = ops.grad_scalar_pair(&induced.g11, &induced.g12);
    let (g22_1, g22_2) = ops.grad_scalar(&induced.g22);
    let n = state.dims.len();
    let mut out = vec![[[[0.0; 2]; 2]; 2]; n];
    for k in 0..n {
        // dg[i][j][l] = d_l g_{ij}
        let dg = [
            [[g11_1[k], g11_2[k]], [g12_1[k], g12_2[k]]],
            [[g12_1[k], g12_2[k]], [g22_1[k], g22_2[k]]],
        ];
        let gi = [
            [induced.inv_g11[k], induced.inv_g12[k]],
            [induced.inv_g12[k], induced.inv_g22[k]],
        ];
        for c in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut sum = 0.0;
                    for l in 0..2 {
                        sum += gi[c][l] * (dg[j][l][i] + dg[i][l][j] - dg[i][j][l]);
                    }
                    out[k][c][i][j] = 0.5 * sum;
                }
            }
        }
    }
    out
}

/// Per-point tensor data of one snapshot needed by the evolution laws.
struct LawFields {
    lambda_sq: Vec<f64>,
    sqrt_det: Vec<f64>,
    norm_sq_h: Vec<f64>,
    /// frame-orthonormalized second fundamental form hhat[i][j][k]
    hhat: Vec<[[[f64; 2]; 2]; 2]>,
    /// frame mean-curvature components
    hvec: Vec<[f64; 2]>,
    /// |H|^2 and |A|^2 assembled from the frame tensor
    h_sq_frame: Vec<f64>,
    a_sq_frame: Vec<f64>,
    /// coordinate tensor T[i][j][k] = <K d_i f, Abar(d_j f, d_k f)>
    t_coord: Vec<[[[f64; 2]; 2]; 2]>,
    /// coordinate mean-curvature 1-form H_i = g^{jk} T_{ijk}
    h_coord: Vec<[f64; 2]>,
}

fn law_fields(state: &SurfaceState, geom: &GeometryFields, ambient: &AmbientSpace) -> LawFields {
    let n = state.dims.len();
    let mut out = LawFields {
        lambda_sq: vec![0.0; n],
        sqrt_det: geom.induced.area_density.clone(),
        norm_sq_h: geom.curvature.norm_sq_h.clone(),
        hhat: vec![[[[0.0; 2]; 2]; 2]; n],
        hvec: vec![[0.0; 2]; n],
        h_sq_frame: vec![0.0; n],
        a_sq_frame: vec![0.0; n],
        t_coord: vec![[[[0.0; 2]; 2]; 2]; n],
        h_coord: vec![[0.0; 2]; n],
    };
    for k in 0..n {
        out.lambda_sq[k] = geom.induced.lambda[k].powi(2);
        let kd = [
            mat_vec(&ambient.j_mats[2], &geom.partials.d1f[k]),
            mat_vec(&ambient.j_mats[2], &geom.partials.d2f[k]),
        ];
        let abar = [
            [&geom.curvature.a11[k], &geom.curvature.a12[k]],
            [&geom.curvature.a12[k], &geom.curvature.a22[k]],
        ];
        let mut t = [[[0.0f64; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    t[i][j][l] = dot4(&kd[i], abar[j][l]);
                }
            }
        }
        out.t_coord[k] = t;
        let gi = [
            [geom.induced.inv_g11[k], geom.induced.inv_g12[k]],
            [geom.induced.inv_g12[k], geom.induced.inv_g22[k]],
        ];
        for i in 0..2 {
            let mut sum = 0.0;
            for j in 0..2 {
                for l in 0..2 {
                    sum += gi[j][l] * t[i][j][l];
                }
            }
            out.h_coord[k][i] = sum;
        }
        let coeff = frame_coefficients(&geom.induced, k);
        let mut hh = [[[0.0f64; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let mut sum = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            for l in 0..2 {
                                sum += coeff[a][i] * coeff[b][j] * coeff[c][l] * t[i][j][l];
                            }
                        }
                    }
                    hh[a][b][c] = sum;
                }
            }
        }
        out.hhat[k] = hh;
        let hv = [hh[0][0][0] + hh[0][1][1], hh[1][0][0] + hh[1][1][1]];
        out.hvec[k] = hv;
        out.h_sq_frame[k] = hv[0] * hv[0] + hv[1] * hv[1];
        let mut a_sq = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    a_sq += hh[a][b][c] * hh[a][b][c];
                }
            }
        }
        out.a_sq_frame[k] = a_sq;
    }
    out
}

/// Discrete residuals of the evolution laws over a window of three
/// equally spaced snapshots: central time differences on the outer pair
/// against the spatial right-hand sides evaluated at the middle one. The
/// third-order |A|^2 law is included only on spectral grids of at least
/// 64 nodes per side, where its derivatives are trustworthy.
pub fn evolution_residuals(
    window: [&SurfaceState; 3],
    ambient: &AmbientSpace,
) -> Result<ResidualReport> {
    let dims = window[0].dims;
    let scheme = window[0].scheme;
    for s in &window[1..] {
        if s.dims != dims || s.scheme != scheme {
            return Err(HflowError::config(
                "evolution residuals need snapshots on one grid and scheme",
            ));
        }
    }
    let d1 = window[1].time - window[0].time;
    let d2 = window[2].time - window[1].time;
    if d1 <= 0.0 || (d1 - d2).abs() > 1e-6 * d1.max(d2) {
        return Err(HflowError::Config(format!(
            "snapshots are not equally spaced in time ({d1} vs {d2})"
        )));
    }
    let spacing = 0.5 * (d1 + d2);

    let geoms = [
        GeometryFields::compute(window[0], ambient, DEGENERACY_THRESHOLD)?,
        GeometryFields::compute(window[1], ambient, DEGENERACY_THRESHOLD)?,
        GeometryFields::compute(window[2], ambient, DEGENERACY_THRESHOLD)?,
    ];
    let fields = [
        law_fields(window[0], &geoms[0], ambient),
        law_fields(window[1], &geoms[1], ambient),
        law_fields(window[2], &geoms[2], ambient),
    ];
    let mid_state = window[1];
    let mid = &geoms[1];
    let f_mid = &fields[1];
    let n = dims.len();
    let ops = mid_state.ops();

    let lap_lambda_sq = laplace_beltrami(mid_state, &mid.induced, &f_mid.lambda_sq);
    let mut lambda_sq_res = 0.0f64;
    let mut area_res = 0.0f64;
    for k in 0..n {
        let dot = (fields[2].lambda_sq[k] - fields[0].lambda_sq[k]) / (2.0 * spacing);
        let l2 = f_mid.lambda_sq[k];
        let rhs = l2 * lap_lambda_sq[k] - 2.0 * l2 * l2 * f_mid.norm_sq_h[k];
        lambda_sq_res = lambda_sq_res.max((dot - rhs).abs());

        let mu_dot = (fields[2].sqrt_det[k] - fields[0].sqrt_det[k]) / (2.0 * spacing);
        let mu_rhs =
            (0.5 * lap_lambda_sq[k] - l2 * f_mid.norm_sq_h[k]) * f_mid.sqrt_det[k];
        area_res = area_res.max((mu_dot - mu_rhs).abs());
    }

    // covariant derivative of the coordinate mean-curvature 1-form
    let gamma = christoffels(mid_state, &mid.induced);
    let h1_field: Vec<f64> = (0..n).map(|k| f_mid.h_coord[k][0]).collect();
    let h2_field: Vec<f64> = (0..n).map(|k| f_mid.h_coord[k][1]).collect();
    let (h1_1, h1_2, h2_1, h2_2) = ops.grad_scalar_pair(&h1_field, &h2_field);
    let lap_h_sq = laplace_beltrami(mid_state, &mid.induced, &f_mid.h_sq_frame);

    let mut h_sq_res = 0.0f64;
    let mut cov_h_frame = vec![[[0.0f64; 2]; 2]; n];
    for k in 0..n {
        let dh = [[h1_1[k], h1_2[k]], [h2_1[k], h2_2[k]]];
        let mut cov = [[0.0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut v = dh[i][j];
                for m in 0..2 {
                    v -= gamma[k][m][i][j] * f_mid.h_coord[k][m];
                }
                cov[i][j] = v;
            }
        }
        let coeff = frame_coefficients(&mid.induced, k);
        let mut covf = [[0.0f64; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut v = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        v += coeff[a][i] * coeff[b][j] * cov[i][j];
                    }
                }
                covf[a][b] = v;
            }
        }
        cov_h_frame[k] = covf;

        let hv = f_mid.hvec[k];
        let h_sq = f_mid.h_sq_frame[k];
        let lam = mid.induced.lambda[k];
        let l2 = f_mid.lambda_sq[k];
        let eta1 = mid.pullbacks.eta[0][k];
        let grad_h_sq: f64 = covf.iter().flatten().map(|v| v * v).sum();
        let div_h = covf[0][0] + covf[1][1];
        let mut hh_cov = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                hh_cov += hv[a] * hv[b] * covf[a][b];
            }
        }
        let hh = &f_mid.hhat[k];
        let mut t_term = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    for m in 0..2 {
                        s += hh[a][l][m] * hh[b][l][m];
                    }
                }
                t_term += s * hv[a] * hv[b];
            }
        }
        let dot = (fields[2].h_sq_frame[k] - fields[0].h_sq_frame[k]) / (2.0 * spacing);
        let rhs = l2
            * (lap_h_sq[k] - 2.0 * grad_h_sq
                + 4.0 * (3.0 * l2 - 2.0) * h_sq * h_sq
                + 10.0 * lam * eta1 * hh_cov
                + 4.0 * lam * eta1 * h_sq * div_h
                + 2.0 * t_term);
        h_sq_res = h_sq_res.max((dot - rhs).abs());
    }

    let mut entries = vec![
        ResidualEntry {
            name: "lambda_sq_law",
            sup: lambda_sq_res,
        },
        ResidualEntry {
            name: "area_law",
            sup: area_res,
        },
        ResidualEntry {
            name: "mean_curvature_sq_law",
            sup: h_sq_res,
        },
    ];

    if scheme == Scheme::Spectral && dims.n1.min(dims.n2) >= 64 {
        entries.push(ResidualEntry {
            name: "second_fund_sq_law",
            sup: second_fund_law_residual(mid_state, mid, f_mid, &fields, &gamma, &cov_h_frame, spacing),
        });
    }

    Ok(ResidualReport {
        entries,
        dims,
        scheme,
        time_spacing: spacing,
    })
}

/// Residual of the |A|^2 evolution law, which needs covariant derivatives
/// of the full second fundamental form.
fn second_fund_law_residual(
    state: &SurfaceState,
    mid: &GeometryFields,
    f_mid: &LawFields,
    fields: &[LawFields; 3],
    gamma: &[[[[f64; 2]; 2]; 2]],
    cov_h_frame: &[[[f64; 2]; 2]],
    spacing: f64,
) -> f64 {
    let ops = state.ops();
    let n = state.dims.len();
    let comp = |i: usize, j: usize, l: usize| -> Vec<f64> {
        (0..n).map(|k| f_mid.t_coord[k][i][j][l]).collect()
    };
    // six independent components of the (j,k)-symmetric coordinate tensor
    let (t111_1, t111_2, t112_1, t112_2) = ops.grad_scalar_pair(&comp(0, 0, 0), &comp(0, 0, 1));
    let (t122_1, t122_2, t211_1, t211_2) = ops.grad_scalar_pair(&comp(0, 1, 1), &comp(1, 0, 0));
    let (t212_1, t212_2, t222_1, t222_2) = ops.grad_scalar_pair(&comp(1, 0, 1), &comp(1, 1, 1));
    let lap_a_sq = laplace_beltrami(state, &mid.induced, &f_mid.a_sq_frame);

    let mut res = 0.0f64;
    for k in 0..n {
        // dt[i][j][l][m] = d_m T_{ijl}, symmetrized in (j, l)
        let dt = [
            [
                [[t111_1[k], t111_2[k]], [t112_1[k], t112_2[k]]],
                [[t112_1[k], t112_2[k]], [t122_1[k], t122_2[k]]],
            ],
            [
                [[t211_1[k], t211_2[k]], [t212_1[k], t212_2[k]]],
                [[t212_1[k], t212_2[k]], [t222_1[k], t222_2[k]]],
            ],
        ];
        let t = &f_mid.t_coord[k];
        let mut cov3 = [[[[0.0f64; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    for m in 0..2 {
                        let mut v = dt[i][j][l][m];
                        for r in 0..2 {
                            v -= gamma[k][r][m][i] * t[r][j][l]
                                + gamma[k][r][m][j] * t[i][r][l]
                                + gamma[k][r][m][l] * t[i][j][r];
                        }
                        cov3[i][j][l][m] = v;
                    }
                }
            }
        }
        let coeff = frame_coefficients(&mid.induced, k);
        let mut covf = [[[[0.0f64; 2]; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        let mut v = 0.0;
                        for i in 0..2 {
                            for j in 0..2 {
                                for l in 0..2 {
                                    for m in 0..2 {
                                        v += coeff[a][i]
                                            * coeff[b][j]
                                            * coeff[c][l]
                                            * coeff[d][m]
                                            * cov3[i][j][l][m];
                                    }
                                }
                            }
                        }
                        covf[a][b][c][d] = v;
                    }
                }
            }
        }
        let grad_a_sq: f64 = covf
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .map(|v| v * v)
            .sum();
        let hh = &f_mid.hhat[k];
        let hv = f_mid.hvec[k];
        let lam = mid.induced.lambda[k];
        let l2 = f_mid.lambda_sq[k];
        let eta1 = mid.pullbacks.eta[0][k];

        // cubic contractions against h_{ijc}, then the two quartic ones
        let mut hhh_t = 0.0;
        let mut h_covh_t = 0.0;
        let mut transport = 0.0;
        let mut t4_sym = 0.0;
        let mut t4_alt = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for c in 0..2 {
                    let hijc = hh[i][j][c];
                    hhh_t += hv[i] * hv[j] * hv[c] * hijc;
                    h_covh_t += hv[i] * cov_h_frame[k][j][c] * hijc;
                    for l in 0..2 {
                        transport += hv[l] * covf[i][j][c][l] * hijc;
                        for m in 0..2 {
                            for r in 0..2 {
                                t4_sym += hh[l][m][r] * hh[i][j][l] * hh[c][m][r] * hijc;
                                t4_alt += hh[i][l][m] * hh[j][m][r] * hh[c][r][l] * hijc;
                            }
                        }
                    }
                }
            }
        }
        let dot = (fields[2].a_sq_frame[k] - fields[0].a_sq_frame[k]) / (2.0 * spacing);
        let rhs = l2
            * (lap_a_sq[k] - 2.0 * grad_a_sq
                + 4.0 * (3.0 * l2 - 2.0) * hhh_t
                + 12.0 * lam * eta1 * h_covh_t
                + 2.0 * lam * eta1 * transport
                + 6.0 * t4_sym
                - 4.0 * t4_alt);
        res = res.max((dot - rhs).abs());
    }
    res
}

#[derive(Clone, Copy, Debug)]
pub struct MonotonicityVerdict {
    pub name: &'static str,
    pub passed: bool,
    pub worst_violation: f64,
}

#[derive(Clone, Debug)]
pub struct TypeIFit {
    pub exponent: f64,
    pub t_hat: f64,
    pub fit_error: f64,
}

#[derive(Clone, Debug)]
pub struct SeriesReport {
    pub verdicts: Vec<MonotonicityVerdict>,
    pub special: bool,
    pub int_a_sq_ratio: f64,
    pub type_i: Option<TypeIFit>,
}

impl SeriesReport {
    pub fn verdict(&self, name: &str) -> Option<&MonotonicityVerdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

fn steps_between(a: &DiagnosticsRecord, b: &DiagnosticsRecord) -> f64 {
    if a.dt > 0.0 {
        ((b.t - a.t) / a.dt).round().max(1.0)
    } else {
        1.0
    }
}

/// Monotonicity verdicts, the |A|^2-mass trend, and (for runs that ended
/// in blowup) a singularity-rate fit over a diagnostic series.
pub fn series_analysis(trajectory: &FlowTrajectory) -> Result<SeriesReport> {
    let recs = &trajectory.records;
    if recs.len() < 10 {
        return Err(HflowError::config(
            "series analysis needs at least 10 records",
        ));
    }
    let special = recs.iter().all(|r| r.max_q <= SPECIAL_Q_GATE);
    let e0 = recs[0].energy.abs().max(f64::MIN_POSITIVE);

    let mut energy_viol = 0.0f64;
    let mut lambda_viol = 0.0f64;
    let mut mu_viol = 0.0f64;
    for w in recs.windows(2) {
        let steps = steps_between(&w[0], &w[1]);
        energy_viol = energy_viol
            .max(w[1].energy - w[0].energy - ENERGY_STEP_TOL_REL * e0 * steps);
        lambda_viol = lambda_viol
            .max(w[1].max_lambda - w[0].max_lambda - LAMBDA_STEP_TOL * steps);
        mu_viol = mu_viol.max(w[0].min_mu - w[1].min_mu - MU_STEP_TOL * steps);
    }
    let mut range_viol = 0.0f64;
    for r in recs {
        range_viol = range_viol
            .max(recs[0].min_lambda - r.min_lambda - LAMBDA_RANGE_TOL)
            .max(r.max_lambda - recs[0].max_lambda - LAMBDA_RANGE_TOL);
    }

    let mut verdicts = vec![
        MonotonicityVerdict {
            name: "energy_nonincreasing",
            passed: energy_viol <= 0.0,
            worst_violation: energy_viol.max(0.0),
        },
        MonotonicityVerdict {
            name: "max_lambda_nonincreasing",
            passed: lambda_viol <= 0.0,
            worst_violation: lambda_viol.max(0.0),
        },
    ];
    if special {
        verdicts.push(MonotonicityVerdict {
            name: "min_mu_nondecreasing",
            passed: mu_viol <= 0.0,
            worst_violation: mu_viol.max(0.0),
        });
        verdicts.push(MonotonicityVerdict {
            name: "lambda_within_initial_range",
            passed: range_viol <= 0.0,
            worst_violation: range_viol.max(0.0),
        });
    }

    let first = recs[0].int_a_sq_dmu;
    let last = recs[recs.len() - 1].int_a_sq_dmu;
    let int_a_sq_ratio = if first.abs() < 1e-300 {
        if last.abs() < 1e-300 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        last / first
    };

    let type_i = if matches!(trajectory.status, FlowStatus::Blowup { .. }) {
        let ts: Vec<f64> = recs.iter().map(|r| r.t).collect();
        let a2: Vec<f64> = recs.iter().map(|r| r.max_norm_sq_a).collect();
        fit_type_i_rate(&ts, &a2).ok()
    } else {
        None
    };

    Ok(SeriesReport {
        verdicts,
        special,
        int_a_sq_ratio,
        type_i,
    })
}

/// Fit sup |A|^2 ~ C (T - t)^(-p) on the last fifth of the series. The
/// blowup time T is located by golden-section search minimizing the
/// least-squares misfit of log sup|A|^2 against -log(T - t); an exponent
/// p near 1 indicates Type-I behavior. Heuristic by construction.
pub fn fit_type_i_rate(ts: &[f64], max_norm_sq_a: &[f64]) -> Result<TypeIFit> {
    if ts.len() != max_norm_sq_a.len() || ts.len() < 10 {
        return Err(HflowError::config(
            "rate fitting needs at least 10 aligned samples",
        ));
    }
    let start = ts.len() - (ts.len() / 5).max(4);
    let ts = &ts[start..];
    let a2 = &max_norm_sq_a[start..];
    if a2.iter().any(|&v| !(v > 0.0)) {
        return Err(HflowError::config(
            "rate fitting needs positive curvature samples",
        ));
    }
    let t_last = *ts.last().unwrap();
    let span = (t_last - ts[0]).max(f64::MIN_POSITIVE);

    let fit_at = |t_hat: f64| -> (f64, f64) {
        let nf = ts.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (&t, &a) in ts.iter().zip(a2) {
            let x = -(t_hat - t).ln();
            let y = a.ln();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let denom = nf * sxx - sx * sx;
        if denom.abs() < 1e-300 {
            return (f64::NAN, f64::INFINITY);
        }
        let slope = (nf * sxy - sx * sy) / denom;
        let intercept = (sy - slope * sx) / nf;
        let mut sse = 0.0;
        for (&t, &a) in ts.iter().zip(a2) {
            let x = -(t_hat - t).ln();
            let r = a.ln() - slope * x - intercept;
            sse += r * r;
        }
        (slope, sse)
    };

    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut lo = t_last + 1e-6 * span;
    let mut hi = t_last + span;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let mut fc = fit_at(c).1;
    let mut fd = fit_at(d).1;
    for _ in 0..200 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = fit_at(c).1;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = fit_at(d).1;
        }
    }
    let t_hat = 0.5 * (lo + hi);
    let (exponent, fit_error) = fit_at(t_hat);
    Ok(TypeIFit {
        exponent,
        t_hat,
        fit_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_flow, DtMode, IntegratorConfig, TimeMethod, VelocityKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph_winding() -> [crate::ambient::Vec4; 2] {
        [[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]]
    }

    fn identity_state(n: usize, rho: f64) -> SurfaceState {
        let dims = GridDims::new(n, n);
        SurfaceState::new(
            dims,
            graph_winding(),
            vec![[0.0; 4]; dims.len()],
            vec![rho; dims.len()],
            Scheme::Spectral,
        )
        .unwrap()
    }

    fn shear_state(n: usize, eps: f64) -> SurfaceState {
        let dims = GridDims::new(n, n);
        let mut p = vec![[0.0; 4]; dims.len()];
        for i in 0..n {
            for j in 0..n {
                let (_, x2) = dims.coords(i, j);
                p[dims.idx(i, j)][1] = eps * (2.0 * std::f64::consts::PI * x2).sin();
            }
        }
        SurfaceState::new(dims, graph_winding(), p, vec![2.0; dims.len()], Scheme::Spectral)
            .unwrap()
    }

    fn random_state(n: usize, seed: u64, amp: f64) -> SurfaceState {
        let dims = GridDims::new(n, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![[0.0; 4]; dims.len()];
        let two_pi = 2.0 * std::f64::consts::PI;
        for _ in 0..5 {
            let c = rng.gen_range(0..4usize);
            let k1 = rng.gen_range(-3i32..=3) as f64;
            let k2 = rng.gen_range(-3i32..=3) as f64;
            let a = rng.gen_range(-amp..amp);
            let b = rng.gen_range(-amp..amp);
            for i in 0..n {
                for j in 0..n {
                    let (x1, x2) = dims.coords(i, j);
                    let phase = two_pi * (k1 * x1 + k2 * x2);
                    p[dims.idx(i, j)][c] += a * phase.cos() + b * phase.sin();
                }
            }
        }
        SurfaceState::new(dims, graph_winding(), p, vec![1.0; dims.len()], Scheme::Spectral)
            .unwrap()
    }

    fn geom_of(state: &SurfaceState, ambient: &AmbientSpace) -> GeometryFields {
        GeometryFields::compute(state, ambient, DEGENERACY_THRESHOLD).unwrap()
    }

    #[test]
    fn identity_graph_record_matches_the_hand_computed_values() {
        let ambient = AmbientSpace::standard_unit();
        let state = identity_state(16, 2.0);
        let geom = geom_of(&state, &ambient);
        assert_eq!(energy(&state, &geom), 2.0);
        assert_eq!(energy_from_lambda(&state, &geom), 2.0);
        let rec = compute_record(&state, &geom, &ambient, 1e-4);
        assert_eq!(rec.max_q, 0.0);
        assert_eq!(rec.min_beta1, 1.0);
        assert_eq!(rec.min_beta2, 1.0);
        assert_eq!(rec.min_mu, 2.0);
        assert_eq!(rec.total_area, 2.0);
        assert_eq!(rec.max_norm_sq_a, 0.0);
        assert_eq!(rec.min_det_g, 4.0);
    }

    #[test]
    fn a_mismatched_density_shows_up_in_q_and_fails_the_special_gate() {
        let ambient = AmbientSpace::standard_unit();
        let state = identity_state(16, 1.0);
        let geom = geom_of(&state, &ambient);
        let q = q_field(&geom);
        for &v in &q {
            assert!((v - 0.25).abs() < 1e-14);
        }
        let err = special_identity_residuals(&state, &geom, &ambient, SPECIAL_Q_GATE).unwrap_err();
        assert!(matches!(err, HflowError::NotSpecial { .. }));
    }

    #[test]
    fn the_two_energy_routes_agree_on_random_states() {
        let ambient = AmbientSpace::standard_unit();
        for seed in 0..6 {
            let state = random_state(24, seed, 0.03);
            let geom = geom_of(&state, &ambient);
            let e1 = energy(&state, &geom);
            let e2 = energy_from_lambda(&state, &geom);
            assert!((e1 - e2).abs() <= 1e-10 * e1.max(1.0), "gap {}", (e1 - e2).abs());
        }
    }

    #[test]
    fn special_identities_hold_on_the_shear_graph() {
        let ambient = AmbientSpace::standard_unit();
        let mut state = shear_state(64, 0.05);
        // sample the density from the discrete pullback so eta_2 = 1/lambda
        let geom0 = geom_of(&state, &ambient);
        for k in 0..state.dims.len() {
            state.background_density[k] =
                ambient.omega_eval(1, &geom0.partials.d1f[k], &geom0.partials.d2f[k]);
        }
        let geom = geom_of(&state, &ambient);
        let report =
            special_identity_residuals(&state, &geom, &ambient, SPECIAL_Q_GATE).unwrap();
        assert!(report.get("frame_identity").unwrap() <= 1e-6);
        assert!(report.get("pythagorean").unwrap() <= 1e-10);
    }

    #[test]
    fn beta_ratios_respect_the_calibration_bound() {
        let ambient = AmbientSpace::standard_unit();
        for seed in 10..14 {
            let state = random_state(24, seed, 0.05);
            let geom = geom_of(&state, &ambient);
            let (b1, b2) = beta_fields(&state, &geom, &ambient);
            for k in 0..state.dims.len() {
                assert!(b1[k] * b1[k] <= 1.0 + 1e-10);
                assert!(b2[k] * b2[k] <= 1.0 + 1e-10);
            }
        }
    }

    #[test]
    fn evolution_residuals_vanish_on_a_stationary_trajectory() {
        let ambient = AmbientSpace::standard_unit();
        let s0 = identity_state(16, 2.0);
        let mut s1 = s0.clone();
        s1.time = 1e-3;
        let mut s2 = s0.clone();
        s2.time = 2e-3;
        let report = evolution_residuals([&s0, &s1, &s2], &ambient).unwrap();
        assert!(report.max() <= 1e-13, "residual {}", report.max());
    }

    #[test]
    fn unequal_snapshot_spacing_is_a_configuration_error() {
        let ambient = AmbientSpace::standard_unit();
        let s0 = identity_state(8, 2.0);
        let mut s1 = s0.clone();
        s1.time = 1e-3;
        let mut s2 = s0.clone();
        s2.time = 3.5e-3;
        let err = evolution_residuals([&s0, &s1, &s2], &ambient).unwrap_err();
        assert!(matches!(err, HflowError::Config(_)));
    }

    #[test]
    fn evolution_law_residuals_shrink_under_combined_refinement() {
        let ambient = AmbientSpace::standard_unit();
        let run = |dt: f64, cadence: usize, t_end: f64| {
            let cfg = IntegratorConfig {
                method: TimeMethod::Rk4,
                dt_mode: DtMode::Fixed(dt),
                t_end,
                ..IntegratorConfig::default()
            };
            run_flow(
                &shear_state(32, 0.05),
                &ambient,
                VelocityKind::HflowGradient,
                &cfg,
                1_000_000,
                cadence,
            )
            .unwrap()
        };
        // both windows centered at t = 3e-4; spacing halves from 2e-4 to 1e-4
        let coarse = run(2e-6, 50, 5e-4);
        let fine = run(1e-6, 100, 4e-4);
        let pick = |traj: &crate::flow::FlowTrajectory, idx: [usize; 3]| -> ResidualReport {
            let s: Vec<&SurfaceState> = idx.iter().map(|&i| &traj.snapshots[i].1).collect();
            evolution_residuals([s[0], s[1], s[2]], &ambient).unwrap()
        };
        let r_coarse = pick(&coarse, [1, 3, 5]);
        let r_fine = pick(&fine, [2, 3, 4]);
        for name in ["lambda_sq_law", "area_law"] {
            let a = r_coarse.get(name).unwrap();
            let b = r_fine.get(name).unwrap();
            let order = (a / b).log2();
            assert!(order >= 1.6, "{name} order {order} ({a} -> {b})");
        }
        let a = r_coarse.get("mean_curvature_sq_law").unwrap();
        let b = r_fine.get("mean_curvature_sq_law").unwrap();
        assert!(a.is_finite() && b.is_finite() && b < a, "{a} -> {b}");
    }

    fn base_record(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            energy: 2.0,
            min_lambda: 1.0,
            max_lambda: 1.0,
            max_q: 0.0,
            max_norm_sq_a: 1.0,
            max_norm_h: 0.0,
            int_a_sq_dmu: 1.0,
            total_area: 2.0,
            min_beta1: 1.0,
            min_beta2: 1.0,
            min_mu: 2.0,
            min_det_g: 4.0,
            dt: 1e-4,
        }
    }

    fn trajectory_from(records: Vec<DiagnosticsRecord>, status: FlowStatus) -> FlowTrajectory {
        FlowTrajectory {
            records,
            snapshots: Vec::new(),
            final_state: identity_state(8, 2.0),
            status,
            steps: 0,
        }
    }

    #[test]
    fn a_flat_series_passes_every_verdict_with_zero_violation() {
        let records: Vec<_> = (0..12).map(|i| base_record(i as f64 * 1e-4)).collect();
        let report = series_analysis(&trajectory_from(records, FlowStatus::Completed)).unwrap();
        assert!(report.special);
        for v in &report.verdicts {
            assert!(v.passed, "{} failed", v.name);
            assert_eq!(v.worst_violation, 0.0);
        }
        assert_eq!(report.int_a_sq_ratio, 1.0);
        assert!(report.type_i.is_none());
    }

    #[test]
    fn a_real_energy_increase_fails_the_descent_verdict() {
        let mut records: Vec<_> = (0..12).map(|i| base_record(i as f64 * 1e-4)).collect();
        records[7].energy = 2.001;
        let report = series_analysis(&trajectory_from(records, FlowStatus::Completed)).unwrap();
        let v = report.verdict("energy_nonincreasing").unwrap();
        assert!(!v.passed);
        assert!(v.worst_violation > 9e-4);
    }

    #[test]
    fn verdicts_are_invariant_under_uniform_time_reindexing() {
        let mut records: Vec<_> = (0..15).map(|i| base_record(i as f64 * 1e-4)).collect();
        for (i, r) in records.iter_mut().enumerate() {
            r.energy = 2.0 - 1e-3 * i as f64;
            r.max_lambda = 1.0 - 1e-4 * i as f64;
        }
        let a = series_analysis(&trajectory_from(records.clone(), FlowStatus::Completed)).unwrap();
        for r in records.iter_mut() {
            r.t = 3.0 * r.t + 5.0;
            r.dt *= 3.0;
        }
        let b = series_analysis(&trajectory_from(records, FlowStatus::Completed)).unwrap();
        assert_eq!(a.verdicts.len(), b.verdicts.len());
        for (x, y) in a.verdicts.iter().zip(&b.verdicts) {
            assert_eq!(x.passed, y.passed, "{}", x.name);
        }
        assert_eq!(a.special, b.special);
        assert!((a.int_a_sq_ratio - b.int_a_sq_ratio).abs() < 1e-14);
    }

    #[test]
    fn too_short_a_series_is_rejected() {
        let records: Vec<_> = (0..5).map(|i| base_record(i as f64 * 1e-4)).collect();
        let err = series_analysis(&trajectory_from(records, FlowStatus::Completed)).unwrap_err();
        assert!(matches!(err, HflowError::Config(_)));
    }

    #[test]
    fn the_rate_fitter_recovers_a_synthetic_inverse_linear_blowup() {
        let n = 120;
        let ts: Vec<f64> = (0..n).map(|i| 0.99 * i as f64 / (n - 1) as f64).collect();
        let a2: Vec<f64> = ts.iter().map(|&t| 1.0 / (1.0 - t)).collect();
        let fit = fit_type_i_rate(&ts, &a2).unwrap();
        assert!(
            (0.95..=1.05).contains(&fit.exponent),
            "exponent {} (T_hat {})",
            fit.exponent,
            fit.t_hat
        );
        assert!((fit.t_hat - 1.0).abs() < 0.02, "T_hat {}", fit.t_hat);
    }

    #[test]
    fn a_blowup_trajectory_gets_a_rate_fit_attached() {
        let n = 40;
        let mut records: Vec<_> = (0..n)
            .map(|i| base_record(0.99 * i as f64 / (n - 1) as f64))
            .collect();
        for r in records.iter_mut() {
            r.max_norm_sq_a = 1.0 / (1.0 - r.t);
        }
        let report =
            series_analysis(&trajectory_from(records, FlowStatus::Blowup { step: 39 })).unwrap();
        let fit = report.type_i.expect("blowup runs should be fitted");
        assert!((0.9..=1.1).contains(&fit.exponent));
    }
}
