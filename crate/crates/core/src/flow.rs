//! Flow velocities (gradient and Hamiltonian routes of the H-flow, plus
//! plain mean curvature flow), explicit time steppers, and the run driver
//! that produces diagnostics records and state snapshots.

use crate::ambient::{mat_vec, AmbientSpace, Vec4};
use crate::diagnostics::{compute_record, DiagnosticsRecord};
use crate::error::{HflowError, Result};
use crate::grid::GridDims;
use crate::surface::{GeometryFields, SurfaceState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VelocityKind {
    HflowGradient,
    HflowHamiltonian,
    Mcf,
}

impl VelocityKind {
    pub fn name(&self) -> &'static str {
        match self {
            VelocityKind::HflowGradient => "hflow_gradient",
            VelocityKind::HflowHamiltonian => "hflow_hamiltonian",
            VelocityKind::Mcf => "mcf",
        }
    }
}

impl std::str::FromStr for VelocityKind {
    type Err = HflowError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hflow_gradient" => Ok(VelocityKind::HflowGradient),
            "hflow_hamiltonian" => Ok(VelocityKind::HflowHamiltonian),
            "mcf" => Ok(VelocityKind::Mcf),
            other => Err(HflowError::Config(format!(
                "unknown flow kind '{other}' (expected hflow_gradient, hflow_hamiltonian, or mcf)"
            ))),
        }
    }
}

/// Pointwise flow velocity for the requested kind. The two H-flow routes
/// are analytically identical; keeping both exercises independent parts
/// of the pipeline.
pub fn velocity(
    state: &SurfaceState,
    geom: &GeometryFields,
    ambient: &AmbientSpace,
    kind: VelocityKind,
) -> Result<Vec<Vec4>> {
    let n = state.dims.len();
    let mut v = vec![[0.0f64; 4]; n];
    match kind {
        VelocityKind::HflowGradient => {
            for k in 0..n {
                let lam = geom.induced.lambda[k];
                let gl = &geom.grad_lambda[k];
                let u = &geom.partials.d1f[k];
                let w = &geom.partials.d2f[k];
                let h = &geom.curvature.mean[k];
                for c in 0..4 {
                    v[k][c] = lam * (gl[0] * u[c] + gl[1] * w[c]) + lam * lam * h[c];
                }
            }
        }
        VelocityKind::HflowHamiltonian => {
            for k in 0..n {
                let u = &geom.partials.d1f[k];
                let w = &geom.partials.d2f[k];
                for a in 0..3 {
                    let xi = &geom.xi[a][k];
                    let mut push = [0.0f64; 4];
                    for c in 0..4 {
                        push[c] = xi[0] * u[c] + xi[1] * w[c];
                    }
                    let rotated = mat_vec(&ambient.j_mats[a], &push);
                    for c in 0..4 {
                        v[k][c] += rotated[c];
                    }
                }
            }
        }
        VelocityKind::Mcf => {
            v.copy_from_slice(&geom.curvature.mean);
        }
    }
    for (k, vk) in v.iter().enumerate() {
        if vk.iter().any(|c| !c.is_finite()) {
            return Err(HflowError::NonFiniteVelocity {
                i: k / state.dims.n2,
                j: k % state.dims.n2,
            });
        }
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeMethod {
    Euler,
    Rk4,
}

impl TimeMethod {
    pub fn name(&self) -> &'static str {
        match self {
            TimeMethod::Euler => "euler",
            TimeMethod::Rk4 => "rk4",
        }
    }
}

impl std::str::FromStr for TimeMethod {
    type Err = HflowError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(TimeMethod::Euler),
            "rk4" => Ok(TimeMethod::Rk4),
            other => Err(HflowError::Config(format!(
                "unknown integrator method '{other}' (expected euler or rk4)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtMode {
    Fixed(f64),
    Cfl { safety: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub method: TimeMethod,
    pub dt_mode: DtMode,
    pub t_end: f64,
    pub max_steps: usize,
    pub stop_on_blowup: f64,
    pub stop_on_degeneracy: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: TimeMethod::Rk4,
            dt_mode: DtMode::Cfl { safety: 0.2 },
            t_end: 0.1,
            max_steps: 1_000_000,
            stop_on_blowup: 1e6,
            stop_on_degeneracy: 1e-8,
        }
    }
}

/// Parabolic step-size bound dt = safety * min(h)^2 / (4 * max(lambda^2, 1)).
pub fn cfl_dt(dims: GridDims, max_lambda: f64, safety: f64) -> f64 {
    let (h1, h2) = dims.spacing();
    let h = h1.min(h2);
    safety * h * h / (4.0 * (max_lambda * max_lambda).max(1.0))
}

fn eval_velocity(
    state: &SurfaceState,
    ambient: &AmbientSpace,
    kind: VelocityKind,
    degeneracy: f64,
) -> Result<Vec<Vec4>> {
    let geom = GeometryFields::compute(state, ambient, degeneracy)?;
    velocity(state, &geom, ambient, kind)
}

/// Advance the state in place by one step of the requested method,
/// reusing the geometry already computed for the current state in the
/// first stage.
pub fn step(
    state: &mut SurfaceState,
    geom: &GeometryFields,
    ambient: &AmbientSpace,
    kind: VelocityKind,
    method: TimeMethod,
    dt: f64,
    degeneracy: f64,
) -> Result<()> {
    match method {
        TimeMethod::Euler => {
            let v = velocity(state, geom, ambient, kind)?;
            for (p, vk) in state.periodic_part.iter_mut().zip(&v) {
                for c in 0..4 {
                    p[c] += dt * vk[c];
                }
            }
        }
        TimeMethod::Rk4 => {
            let base = state.periodic_part.clone();
            let k1 = velocity(state, geom, ambient, kind)?;
            let stage = |slope: &[Vec4], h: f64, scratch: &mut SurfaceState| {
                for (k, p) in scratch.periodic_part.iter_mut().enumerate() {
                    for c in 0..4 {
                        p[c] = base[k][c] + h * slope[k][c];
                    }
                }
            };
            let mut scratch = state.clone();
            stage(&k1, dt / 2.0, &mut scratch);
            let k2 = eval_velocity(&scratch, ambient, kind, degeneracy)?;
            stage(&k2, dt / 2.0, &mut scratch);
            let k3 = eval_velocity(&scratch, ambient, kind, degeneracy)?;
            stage(&k3, dt, &mut scratch);
            let k4 = eval_velocity(&scratch, ambient, kind, degeneracy)?;
            for (k, p) in state.periodic_part.iter_mut().enumerate() {
                for c in 0..4 {
                    p[c] = base[k][c]
                        + dt / 6.0 * (k1[k][c] + 2.0 * k2[k][c] + 2.0 * k3[k][c] + k4[k][c]);
                }
            }
        }
    }
    state.time += dt;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Completed,
    Blowup { step: usize },
    Degenerate { step: usize },
    StepLimit,
}

impl FlowStatus {
    pub fn label(&self) -> String {
        match self {
            FlowStatus::Completed => "completed".to_string(),
            FlowStatus::Blowup { step } => format!("blowup at step {step}"),
            FlowStatus::Degenerate { step } => format!("degenerate at step {step}"),
            FlowStatus::StepLimit => "step limit reached".to_string(),
        }
    }
}

pub struct FlowTrajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<(usize, SurfaceState)>,
    pub final_state: SurfaceState,
    pub status: FlowStatus,
    pub steps: usize,
}

/// Run the flow until t_end, a stop condition, or the step limit.
/// Diagnostics are recorded every `diagnostics_cadence` steps and always
/// at the initial and terminal states; snapshots are cloned every
/// `snapshot_cadence` steps when that cadence is nonzero.
pub fn run_flow(
    initial: &SurfaceState,
    ambient: &AmbientSpace,
    kind: VelocityKind,
    config: &IntegratorConfig,
    diagnostics_cadence: usize,
    snapshot_cadence: usize,
) -> Result<FlowTrajectory> {
    if config.t_end <= initial.time {
        return Err(HflowError::config("t_end must exceed the initial time"));
    }
    if let DtMode::Fixed(dt) = config.dt_mode {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(HflowError::config("fixed dt must be positive"));
        }
    }
    let cadence = diagnostics_cadence.max(1);
    let mut state = initial.clone();
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut step_count = 0usize;

    let status = loop {
        let geom = match GeometryFields::compute(&state, ambient, config.stop_on_degeneracy) {
            Ok(g) => g,
            Err(HflowError::ImmersionDegenerate { .. }) => {
                break FlowStatus::Degenerate { step: step_count };
            }
            Err(e) => return Err(e),
        };
        let max_a2 = geom.max_norm_sq_a();
        let blown_up = !max_a2.is_finite() || max_a2 >= config.stop_on_blowup;

        let dt_raw = match config.dt_mode {
            DtMode::Fixed(dt) => dt,
            DtMode::Cfl { safety } => cfl_dt(state.dims, geom.max_lambda(), safety),
        };
        let remaining = config.t_end - state.time;
        let finishing = remaining <= dt_raw * (1.0 + 1e-6);
        let dt_apply = if finishing { remaining } else { dt_raw };
        let at_limit = step_count >= config.max_steps;

        if step_count % cadence == 0 || blown_up || at_limit {
            records.push(compute_record(&state, &geom, ambient, dt_apply));
        }
        if snapshot_cadence > 0 && step_count % snapshot_cadence == 0 {
            snapshots.push((step_count, state.clone()));
        }
        if blown_up {
            break FlowStatus::Blowup { step: step_count };
        }
        if at_limit {
            break FlowStatus::StepLimit;
        }

        match step(
            &mut state,
            &geom,
            ambient,
            kind,
            config.method,
            dt_apply,
            config.stop_on_degeneracy,
        ) {
            Ok(()) => {}
            Err(HflowError::ImmersionDegenerate { .. }) => {
                break FlowStatus::Degenerate { step: step_count };
            }
            Err(e) => return Err(e),
        }
        step_count += 1;
        if finishing {
            state.time = config.t_end;
            let geom = match GeometryFields::compute(&state, ambient, config.stop_on_degeneracy) {
                Ok(g) => g,
                Err(HflowError::ImmersionDegenerate { .. }) => {
                    break FlowStatus::Degenerate { step: step_count };
                }
                Err(e) => return Err(e),
            };
            records.push(compute_record(&state, &geom, ambient, dt_apply));
            if snapshot_cadence > 0 && step_count % snapshot_cadence == 0 {
                snapshots.push((step_count, state.clone()));
            }
            break FlowStatus::Completed;
        }
    };

    Ok(FlowTrajectory {
        records,
        snapshots,
        final_state: state,
        status,
        steps: step_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deriv::Scheme;
    use crate::surface::DEGENERACY_THRESHOLD;

    fn graph_winding() -> [Vec4; 2] {
        [[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]]
    }

    fn identity_state(n: usize, scheme: Scheme) -> SurfaceState {
        let dims = GridDims::new(n, n);
        SurfaceState::new(
            dims,
            graph_winding(),
            vec![[0.0; 4]; dims.len()],
            vec![2.0; dims.len()],
            scheme,
        )
        .unwrap()
    }

    fn shear_state(n: usize, eps: f64, scheme: Scheme) -> SurfaceState {
        let dims = GridDims::new(n, n);
        let mut p = vec![[0.0; 4]; dims.len()];
        for i in 0..n {
            for j in 0..n {
                let (_, x2) = dims.coords(i, j);
                p[dims.idx(i, j)][1] = eps * (2.0 * std::f64::consts::PI * x2).sin();
            }
        }
        SurfaceState::new(dims, graph_winding(), p, vec![2.0; dims.len()], scheme).unwrap()
    }

    #[test]
    fn both_hflow_velocity_routes_agree_on_the_shear_graph() {
        let ambient = AmbientSpace::standard_unit();
        let state = shear_state(32, 0.05, Scheme::Spectral);
        let geom = GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD).unwrap();
        let vg = velocity(&state, &geom, &ambient, VelocityKind::HflowGradient).unwrap();
        let vh = velocity(&state, &geom, &ambient, VelocityKind::HflowHamiltonian).unwrap();
        let mut max_diff = 0.0f64;
        let mut max_mag = 0.0f64;
        for k in 0..state.dims.len() {
            for c in 0..4 {
                max_diff = max_diff.max((vg[k][c] - vh[k][c]).abs());
                max_mag = max_mag.max(vg[k][c].abs());
            }
        }
        assert!(max_mag > 0.1, "velocity should be nontrivial");
        assert!(max_diff < 1e-9 * max_mag.max(1.0), "route gap {max_diff}");
    }

    #[test]
    fn mcf_velocity_is_the_mean_curvature() {
        let ambient = AmbientSpace::standard_unit();
        let state = shear_state(16, 0.05, Scheme::Spectral);
        let geom = GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD).unwrap();
        let v = velocity(&state, &geom, &ambient, VelocityKind::Mcf).unwrap();
        for k in 0..state.dims.len() {
            assert_eq!(v[k], geom.curvature.mean[k]);
        }
    }

    #[test]
    fn the_identity_graph_is_stationary_for_every_route_and_method() {
        let ambient = AmbientSpace::standard_unit();
        for scheme in [Scheme::Spectral, Scheme::Central4] {
            for kind in [
                VelocityKind::HflowGradient,
                VelocityKind::HflowHamiltonian,
                VelocityKind::Mcf,
            ] {
                for method in [TimeMethod::Euler, TimeMethod::Rk4] {
                    let mut state = identity_state(16, scheme);
                    for _ in 0..20 {
                        let geom =
                            GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD)
                                .unwrap();
                        step(&mut state, &geom, &ambient, kind, method, 1e-4, 1e-8).unwrap();
                    }
                    let drift = state
                        .periodic_part
                        .iter()
                        .flatten()
                        .fold(0.0f64, |m, &v| m.max(v.abs()));
                    assert!(
                        drift <= 1e-14,
                        "drift {drift} for {} / {}",
                        kind.name(),
                        method.name()
                    );
                }
            }
        }
    }

    #[test]
    fn stepper_orders_match_euler_one_and_rk4_four() {
        let ambient = AmbientSpace::standard_unit();
        let t_end = 8e-4;
        let solve = |method: TimeMethod, dt: f64| -> Vec<Vec4> {
            let cfg = IntegratorConfig {
                method,
                dt_mode: DtMode::Fixed(dt),
                t_end,
                ..IntegratorConfig::default()
            };
            let state = shear_state(16, 0.05, Scheme::Spectral);
            run_flow(&state, &ambient, VelocityKind::HflowGradient, &cfg, 1000, 0)
                .unwrap()
                .final_state
                .periodic_part
        };
        let reference = solve(TimeMethod::Rk4, 1e-5);
        let err = |p: &[Vec4]| -> f64 {
            p.iter()
                .zip(&reference)
                .flat_map(|(a, b)| (0..4).map(move |c| (a[c] - b[c]).abs()))
                .fold(0.0f64, f64::max)
        };
        let e_coarse = err(&solve(TimeMethod::Euler, 2e-4));
        let e_fine = err(&solve(TimeMethod::Euler, 1e-4));
        let euler_order = (e_coarse / e_fine).log2();
        assert!(
            (euler_order - 1.0).abs() < 0.25,
            "euler order {euler_order}"
        );
        let r_coarse = err(&solve(TimeMethod::Rk4, 2e-4));
        let r_fine = err(&solve(TimeMethod::Rk4, 1e-4));
        let rk4_order = (r_coarse / r_fine).log2();
        assert!(rk4_order > 3.3, "rk4 order {rk4_order}");
    }

    #[test]
    fn the_driver_clamps_the_final_step_onto_t_end() {
        let ambient = AmbientSpace::standard_unit();
        let cfg = IntegratorConfig {
            method: TimeMethod::Euler,
            dt_mode: DtMode::Fixed(0.3),
            t_end: 0.1,
            ..IntegratorConfig::default()
        };
        let state = identity_state(8, Scheme::Spectral);
        let traj = run_flow(&state, &ambient, VelocityKind::Mcf, &cfg, 1, 0).unwrap();
        assert_eq!(traj.status, FlowStatus::Completed);
        assert_eq!(traj.steps, 1);
        assert_eq!(traj.final_state.time, 0.1);
        assert_eq!(traj.records.len(), 2);
        assert_eq!(traj.records[0].t, 0.0);
        assert_eq!(traj.records[1].t, 0.1);
    }

    #[test]
    fn a_tight_blowup_gate_stops_immediately_with_a_terminal_record() {
        let ambient = AmbientSpace::standard_unit();
        let cfg = IntegratorConfig {
            stop_on_blowup: 1e-9,
            ..IntegratorConfig::default()
        };
        let state = shear_state(16, 0.05, Scheme::Spectral);
        let traj = run_flow(&state, &ambient, VelocityKind::HflowGradient, &cfg, 50, 0).unwrap();
        assert_eq!(traj.status, FlowStatus::Blowup { step: 0 });
        assert_eq!(traj.records.len(), 1);
    }

    #[test]
    fn the_step_limit_reports_without_reaching_t_end() {
        let ambient = AmbientSpace::standard_unit();
        let cfg = IntegratorConfig {
            method: TimeMethod::Euler,
            dt_mode: DtMode::Fixed(1e-6),
            t_end: 1.0,
            max_steps: 3,
            ..IntegratorConfig::default()
        };
        let state = shear_state(8, 0.02, Scheme::Spectral);
        let traj = run_flow(&state, &ambient, VelocityKind::Mcf, &cfg, 1, 2).unwrap();
        assert_eq!(traj.status, FlowStatus::StepLimit);
        assert_eq!(traj.steps, 3);
        assert_eq!(traj.records.len(), 4);
        assert_eq!(
            traj.snapshots.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
            vec![0, 2]
        );
    }

    #[test]
    fn snapshots_follow_their_own_cadence() {
        let ambient = AmbientSpace::standard_unit();
        let cfg = IntegratorConfig {
            method: TimeMethod::Euler,
            dt_mode: DtMode::Fixed(1e-5),
            t_end: 6e-5,
            ..IntegratorConfig::default()
        };
        let state = shear_state(8, 0.02, Scheme::Spectral);
        let traj = run_flow(&state, &ambient, VelocityKind::HflowGradient, &cfg, 2, 3).unwrap();
        assert_eq!(traj.status, FlowStatus::Completed);
        assert_eq!(traj.steps, 6);
        assert_eq!(
            traj.snapshots.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
            vec![0, 3, 6]
        );
        // records at steps 0, 2, 4, and the terminal state
        assert_eq!(traj.records.len(), 4);
    }
}
