//! Scenario configuration: a line-oriented `key = value` text format, a
//! canonical serializer, and construction of the initial surface each
//! scenario describes.

use crate::ambient::{AmbientSpace, Mat4, Vec4, MAT4_ID};
use crate::deriv::Scheme;
use crate::error::{HflowError, Result};
use crate::flow::{DtMode, IntegratorConfig, VelocityKind};
use crate::grid::GridDims;
use crate::surface::{lift_partials, SurfaceState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One explicit Fourier mode added to the periodic part:
/// amp_cos * cos(2 pi (k1 x^1 + k2 x^2)) + amp_sin * sin(...)
/// in the given ambient component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierMode {
    pub component: usize,
    pub k1: i32,
    pub k2: i32,
    pub amp_cos: f64,
    pub amp_sin: f64,
}

/// Seeded random mode table: `count` modes with wavenumbers in
/// [-max_wavenumber, max_wavenumber] and amplitudes in [-amplitude, amplitude].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomModes {
    pub count: usize,
    pub max_wavenumber: u32,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialMap {
    IdentityGraph,
    ShearGraph {
        eps1: f64,
        eps2: f64,
        wavenumber: u32,
    },
    NormalSinusoid {
        eps: f64,
        wavenumber: u32,
    },
    FourierPerturbation {
        modes: Vec<FourierMode>,
        random: Option<RandomModes>,
    },
}

impl InitialMap {
    pub fn name(&self) -> &'static str {
        match self {
            InitialMap::IdentityGraph => "identity_graph",
            InitialMap::ShearGraph { .. } => "shear_graph",
            InitialMap::NormalSinusoid { .. } => "normal_sinusoid",
            InitialMap::FourierPerturbation { .. } => "fourier_perturbation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoMode {
    PullbackOmega2,
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub lattice: Mat4,
    pub initial_map: InitialMap,
    pub rho_mode: RhoMode,
    pub flow_kind: VelocityKind,
    pub scheme: Scheme,
    pub grid: GridDims,
    pub integrator: IntegratorConfig,
    pub diagnostics_cadence: usize,
    pub snapshot_cadence: usize,
    pub output_dir: Option<String>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "scenario".to_string(),
            lattice: MAT4_ID,
            initial_map: InitialMap::IdentityGraph,
            rho_mode: RhoMode::PullbackOmega2,
            flow_kind: VelocityKind::HflowGradient,
            scheme: Scheme::Spectral,
            grid: GridDims::new(64, 64),
            integrator: IntegratorConfig::default(),
            diagnostics_cadence: 10,
            snapshot_cadence: 100,
            output_dir: None,
            seed: 0,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> HflowError {
    HflowError::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| parse_err(line, format!("invalid value '{raw}' for {key}")))
}

fn num_list<T: std::str::FromStr>(line: usize, key: &str, raw: &str, want: usize) -> Result<Vec<T>> {
    let vals: Vec<&str> = raw.split_whitespace().collect();
    if vals.len() != want {
        return Err(parse_err(
            line,
            format!("{key} expects {want} whitespace-separated values, got {}", vals.len()),
        ));
    }
    vals.into_iter().map(|v| num(line, key, v)).collect()
}

/// Raw key table with duplicate detection (fourierMode may repeat).
struct RawDoc {
    entries: Vec<(usize, String, String)>,
}

impl RawDoc {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        let pos = self.entries.iter().position(|(_, k, _)| k == key)?;
        let (line, _, value) = self.entries.remove(pos);
        Some((line, value))
    }

    fn take_all(&mut self, key: &str) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        while let Some(e) = self.take(key) {
            out.push(e);
        }
        out
    }
}

const KNOWN_KEYS: &[&str] = &[
    "name",
    "gridSize",
    "scheme",
    "flowKind",
    "initialMap",
    "epsilon1",
    "epsilon2",
    "epsilon",
    "wavenumber",
    "fourierMode",
    "fourierRandom",
    "rhoMode",
    "rhoValue",
    "lattice",
    "seed",
    "diagnosticsCadence",
    "snapshotCadence",
    "outputDir",
    "integrator.method",
    "integrator.dt_mode",
    "integrator.dt",
    "integrator.cfl_safety",
    "integrator.t_end",
    "integrator.max_steps",
    "integrator.stop_on_blowup",
    "integrator.stop_on_degeneracy",
];

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(parse_err(line_no, format!("unknown key '{key}'")));
        }
        if key != "fourierMode" && entries.iter().any(|(_, k, _)| k == key) {
            return Err(parse_err(line_no, format!("duplicate key '{key}'")));
        }
        entries.push((line_no, key.to_string(), value.to_string()));
    }
    let mut doc = RawDoc { entries };
    let mut config = ScenarioConfig::default();

    if let Some((_, v)) = doc.take("name") {
        config.name = v;
    }
    if let Some((line, v)) = doc.take("gridSize") {
        let parts: Vec<&str> = v.split_whitespace().collect();
        let (n1, n2) = match parts.len() {
            1 => {
                let n: usize = num(line, "gridSize", parts[0])?;
                (n, n)
            }
            2 => (num(line, "gridSize", parts[0])?, num(line, "gridSize", parts[1])?),
            _ => return Err(parse_err(line, "gridSize expects one or two integers")),
        };
        config.grid = GridDims::new(n1, n2);
    }
    if let Some((line, v)) = doc.take("scheme") {
        config.scheme = v.parse().map_err(|e: HflowError| parse_err(line, e.to_string()))?;
    }
    if let Some((line, v)) = doc.take("flowKind") {
        config.flow_kind = v.parse().map_err(|e: HflowError| parse_err(line, e.to_string()))?;
    }
    if let Some((line, v)) = doc.take("lattice") {
        let vals: Vec<f64> = num_list(line, "lattice", &v, 16)?;
        for (i, val) in vals.into_iter().enumerate() {
            config.lattice[i / 4][i % 4] = val;
        }
    }
    if let Some((line, v)) = doc.take("seed") {
        config.seed = num(line, "seed", &v)?;
    }
    if let Some((line, v)) = doc.take("diagnosticsCadence") {
        config.diagnostics_cadence = num(line, "diagnosticsCadence", &v)?;
    }
    if let Some((line, v)) = doc.take("snapshotCadence") {
        config.snapshot_cadence = num(line, "snapshotCadence", &v)?;
    }
    if let Some((_, v)) = doc.take("outputDir") {
        config.output_dir = Some(v);
    }

    let map_name = doc.take("initialMap");
    let eps1 = doc.take("epsilon1");
    let eps2 = doc.take("epsilon2");
    let eps = doc.take("epsilon");
    let wavenumber = doc.take("wavenumber");
    let fourier_modes = doc.take_all("fourierMode");
    let fourier_random = doc.take("fourierRandom");

    let map_name = match map_name {
        Some((line, v)) => (line, v),
        None => (0, "identity_graph".to_string()),
    };
    config.initial_map = match map_name.1.as_str() {
        "identity_graph" => InitialMap::IdentityGraph,
        "shear_graph" => InitialMap::ShearGraph {
            eps1: eps1.map(|(l, v)| num(l, "epsilon1", &v)).transpose()?.unwrap_or(0.05),
            eps2: eps2.map(|(l, v)| num(l, "epsilon2", &v)).transpose()?.unwrap_or(0.0),
            wavenumber: wavenumber
                .map(|(l, v)| num(l, "wavenumber", &v))
                .transpose()?
                .unwrap_or(1),
        },
        "normal_sinusoid" => InitialMap::NormalSinusoid {
            eps: eps.map(|(l, v)| num(l, "epsilon", &v)).transpose()?.unwrap_or(0.1),
            wavenumber: wavenumber
                .map(|(l, v)| num(l, "wavenumber", &v))
                .transpose()?
                .unwrap_or(1),
        },
        "fourier_perturbation" => {
            let mut modes = Vec::new();
            for (line, v) in fourier_modes {
                let parts: Vec<&str> = v.split_whitespace().collect();
                if parts.len() != 5 {
                    return Err(parse_err(
                        line,
                        "fourierMode expects: component k1 k2 amp_cos amp_sin",
                    ));
                }
                modes.push(FourierMode {
                    component: num(line, "fourierMode", parts[0])?,
                    k1: num(line, "fourierMode", parts[1])?,
                    k2: num(line, "fourierMode", parts[2])?,
                    amp_cos: num(line, "fourierMode", parts[3])?,
                    amp_sin: num(line, "fourierMode", parts[4])?,
                });
            }
            let random = match fourier_random {
                Some((line, v)) => {
                    let vals: Vec<&str> = v.split_whitespace().collect();
                    if vals.len() != 3 {
                        return Err(parse_err(
                            line,
                            "fourierRandom expects: count max_wavenumber amplitude",
                        ));
                    }
                    Some(RandomModes {
                        count: num(line, "fourierRandom", vals[0])?,
                        max_wavenumber: num(line, "fourierRandom", vals[1])?,
                        amplitude: num(line, "fourierRandom", vals[2])?,
                    })
                }
                None => None,
            };
            InitialMap::FourierPerturbation { modes, random }
        }
        other => {
            return Err(parse_err(
                map_name.0,
                format!(
                    "unknown initialMap '{other}' (expected identity_graph, shear_graph, \
                     normal_sinusoid, or fourier_perturbation)"
                ),
            ))
        }
    };

    let rho_value = doc.take("rhoValue");
    config.rho_mode = match doc.take("rhoMode") {
        None => RhoMode::PullbackOmega2,
        Some((_, v)) if v == "pullback_omega2" => RhoMode::PullbackOmega2,
        Some((_, v)) if v == "constant" => RhoMode::Constant(
            rho_value
                .map(|(l, val)| num(l, "rhoValue", &val))
                .transpose()?
                .unwrap_or(1.0),
        ),
        Some((line, v)) => {
            return Err(parse_err(
                line,
                format!("unknown rhoMode '{v}' (expected pullback_omega2 or constant)"),
            ))
        }
    };

    if let Some((line, v)) = doc.take("integrator.method") {
        config.integrator.method =
            v.parse().map_err(|e: HflowError| parse_err(line, e.to_string()))?;
    }
    let dt = doc.take("integrator.dt");
    let safety = doc.take("integrator.cfl_safety");
    let dt_mode = doc.take("integrator.dt_mode");
    config.integrator.dt_mode = match dt_mode.as_ref().map(|(_, v)| v.as_str()) {
        None | Some("cfl") => DtMode::Cfl {
            safety: safety
                .map(|(l, v)| num(l, "integrator.cfl_safety", &v))
                .transpose()?
                .unwrap_or(0.2),
        },
        Some("fixed") => {
            let (l, v) = dt.ok_or_else(|| {
                parse_err(
                    dt_mode.as_ref().unwrap().0,
                    "integrator.dt_mode = fixed requires integrator.dt",
                )
            })?;
            DtMode::Fixed(num(l, "integrator.dt", &v)?)
        }
        Some(other) => {
            return Err(parse_err(
                dt_mode.as_ref().unwrap().0,
                format!("unknown integrator.dt_mode '{other}' (expected fixed or cfl)"),
            ))
        }
    };
    if let Some((line, v)) = doc.take("integrator.t_end") {
        config.integrator.t_end = num(line, "integrator.t_end", &v)?;
    }
    if let Some((line, v)) = doc.take("integrator.max_steps") {
        config.integrator.max_steps = num(line, "integrator.max_steps", &v)?;
    }
    if let Some((line, v)) = doc.take("integrator.stop_on_blowup") {
        config.integrator.stop_on_blowup = num(line, "integrator.stop_on_blowup", &v)?;
    }
    if let Some((line, v)) = doc.take("integrator.stop_on_degeneracy") {
        config.integrator.stop_on_degeneracy = num(line, "integrator.stop_on_degeneracy", &v)?;
    }

    validate_config(&config)?;
    Ok(config)
}

fn check(cond: bool, message: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(HflowError::Config(message.into()))
    }
}

pub fn validate_config(config: &ScenarioConfig) -> Result<()> {
    let (n1, n2) = (config.grid.n1, config.grid.n2);
    check(
        n1 >= 8 && n2 >= 8 && n1 % 2 == 0 && n2 % 2 == 0,
        format!("gridSize components must be even and at least 8 (got {n1} {n2})"),
    )?;
    match &config.initial_map {
        InitialMap::IdentityGraph => {}
        InitialMap::ShearGraph { eps1, eps2, wavenumber } => {
            check(*eps1 >= 0.0, "epsilon1 must be nonnegative")?;
            check(*eps2 >= 0.0, "epsilon2 must be nonnegative")?;
            check(*wavenumber >= 1, "wavenumber must be at least 1")?;
        }
        InitialMap::NormalSinusoid { eps, wavenumber } => {
            check(*eps >= 0.0, "epsilon must be nonnegative")?;
            check(*wavenumber >= 1, "wavenumber must be at least 1")?;
        }
        InitialMap::FourierPerturbation { modes, random } => {
            for m in modes {
                check(m.component < 4, "fourierMode component must be 0..3")?;
            }
            if let Some(r) = random {
                check(r.amplitude >= 0.0, "fourierRandom amplitude must be nonnegative")?;
                check(r.max_wavenumber >= 1, "fourierRandom max_wavenumber must be at least 1")?;
            }
        }
    }
    if let RhoMode::Constant(c) = config.rho_mode {
        check(
            c > 0.0 && c.is_finite(),
            format!("rhoValue must be positive and finite (got {c})"),
        )?;
    }
    match config.integrator.dt_mode {
        DtMode::Fixed(dt) => check(
            dt > 0.0 && dt.is_finite(),
            format!("integrator.dt must be positive (got {dt})"),
        )?,
        DtMode::Cfl { safety } => check(
            safety > 0.0 && safety <= 1.0,
            format!("integrator.cfl_safety must lie in (0, 1] (got {safety})"),
        )?,
    }
    check(
        config.integrator.t_end > 0.0,
        "integrator.t_end must be positive",
    )?;
    check(
        config.integrator.max_steps >= 1,
        "integrator.max_steps must be at least 1",
    )?;
    check(
        config.integrator.stop_on_blowup > 0.0,
        "integrator.stop_on_blowup must be positive",
    )?;
    check(
        config.integrator.stop_on_degeneracy > 0.0,
        "integrator.stop_on_degeneracy must be positive",
    )?;
    Ok(())
}

/// Canonical text form: fixed key order, every applicable key written.
/// `parse_scenario(serialize_scenario(c))` reproduces `c` exactly.
pub fn serialize_scenario(config: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    push("name", config.name.clone());
    push("gridSize", format!("{} {}", config.grid.n1, config.grid.n2));
    push("scheme", config.scheme.name().to_string());
    push("flowKind", config.flow_kind.name().to_string());
    push("initialMap", config.initial_map.name().to_string());
    match &config.initial_map {
        InitialMap::IdentityGraph => {}
        InitialMap::ShearGraph { eps1, eps2, wavenumber } => {
            push("epsilon1", format!("{eps1}"));
            push("epsilon2", format!("{eps2}"));
            push("wavenumber", format!("{wavenumber}"));
        }
        InitialMap::NormalSinusoid { eps, wavenumber } => {
            push("epsilon", format!("{eps}"));
            push("wavenumber", format!("{wavenumber}"));
        }
        InitialMap::FourierPerturbation { modes, random } => {
            for m in modes {
                push(
                    "fourierMode",
                    format!("{} {} {} {} {}", m.component, m.k1, m.k2, m.amp_cos, m.amp_sin),
                );
            }
            if let Some(r) = random {
                push(
                    "fourierRandom",
                    format!("{} {} {}", r.count, r.max_wavenumber, r.amplitude),
                );
            }
        }
    }
    match config.rho_mode {
        RhoMode::PullbackOmega2 => push("rhoMode", "pullback_omega2".to_string()),
        RhoMode::Constant(c) => {
            push("rhoMode", "constant".to_string());
            push("rhoValue", format!("{c}"));
        }
    }
    let lat: Vec<String> = config
        .lattice
        .iter()
        .flatten()
        .map(|v| format!("{v}"))
        .collect();
    push("lattice", lat.join(" "));
    push("seed", format!("{}", config.seed));
    push("diagnosticsCadence", format!("{}", config.diagnostics_cadence));
    push("snapshotCadence", format!("{}", config.snapshot_cadence));
    if let Some(dir) = &config.output_dir {
        push("outputDir", dir.clone());
    }
    push("integrator.method", config.integrator.method.name().to_string());
    match config.integrator.dt_mode {
        DtMode::Fixed(dt) => {
            push("integrator.dt_mode", "fixed".to_string());
            push("integrator.dt", format!("{dt}"));
        }
        DtMode::Cfl { safety } => {
            push("integrator.dt_mode", "cfl".to_string());
            push("integrator.cfl_safety", format!("{safety}"));
        }
    }
    push("integrator.t_end", format!("{}", config.integrator.t_end));
    push("integrator.max_steps", format!("{}", config.integrator.max_steps));
    push(
        "integrator.stop_on_blowup",
        format!("{}", config.integrator.stop_on_blowup),
    );
    push(
        "integrator.stop_on_degeneracy",
        format!("{}", config.integrator.stop_on_degeneracy),
    );
    out
}

/// The ambient space a scenario runs in.
pub fn build_ambient(config: &ScenarioConfig) -> Result<AmbientSpace> {
    AmbientSpace::standard(config.lattice)
}

/// Construct the t = 0 surface: the lift f_0(x) = x^1 W_1 + x^2 W_2 + p(x)
/// for the configured family, with the background density either sampled
/// from the discrete pullback f_0^* omega_2 or held constant.
pub fn build_initial_surface(config: &ScenarioConfig, ambient: &AmbientSpace) -> Result<SurfaceState> {
    validate_config(config)?;
    let dims = config.grid;
    let two_pi = 2.0 * std::f64::consts::PI;
    let graph: [Vec4; 2] = [[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]];
    let mut p = vec![[0.0f64; 4]; dims.len()];
    let winding = match &config.initial_map {
        InitialMap::IdentityGraph => graph,
        InitialMap::ShearGraph { eps1, eps2, wavenumber } => {
            let k = *wavenumber as f64;
            for i in 0..dims.n1 {
                for j in 0..dims.n2 {
                    let (x1, x2) = dims.coords(i, j);
                    let phi1 = x1 + eps1 * (two_pi * k * x2).sin();
                    let phi2 = x2 + eps2 * (two_pi * k * phi1).sin();
                    let q = &mut p[dims.idx(i, j)];
                    q[1] = phi1 - x1;
                    q[3] = phi2 - x2;
                }
            }
            graph
        }
        InitialMap::NormalSinusoid { eps, wavenumber } => {
            let k = *wavenumber as f64;
            for i in 0..dims.n1 {
                for j in 0..dims.n2 {
                    let (x1, _) = dims.coords(i, j);
                    p[dims.idx(i, j)][2] = eps * (two_pi * k * x1).sin();
                }
            }
            [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
        }
        InitialMap::FourierPerturbation { modes, random } => {
            let mut all_modes = modes.clone();
            if let Some(r) = random {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                let kmax = r.max_wavenumber as i32;
                while all_modes.len() < modes.len() + r.count {
                    let k1 = rng.gen_range(-kmax..=kmax);
                    let k2 = rng.gen_range(-kmax..=kmax);
                    if k1 == 0 && k2 == 0 {
                        continue;
                    }
                    all_modes.push(FourierMode {
                        component: rng.gen_range(0..4),
                        k1,
                        k2,
                        amp_cos: rng.gen_range(-r.amplitude..=r.amplitude),
                        amp_sin: rng.gen_range(-r.amplitude..=r.amplitude),
                    });
                }
            }
            for m in &all_modes {
                for i in 0..dims.n1 {
                    for j in 0..dims.n2 {
                        let (x1, x2) = dims.coords(i, j);
                        let phase = two_pi * (m.k1 as f64 * x1 + m.k2 as f64 * x2);
                        p[dims.idx(i, j)][m.component] +=
                            m.amp_cos * phase.cos() + m.amp_sin * phase.sin();
                    }
                }
            }
            graph
        }
    };

    let mut state = SurfaceState::new(dims, winding, p, vec![1.0; dims.len()], config.scheme)?;
    state.validate_winding(ambient)?;

    match config.rho_mode {
        RhoMode::Constant(c) => {
            state.background_density = vec![c; dims.len()];
        }
        RhoMode::PullbackOmega2 => {
            let partials = lift_partials(&state);
            let mut rho = vec![0.0; dims.len()];
            for k in 0..dims.len() {
                let w2 = ambient.omega_eval(1, &partials.d1f[k], &partials.d2f[k]);
                if !(w2 > 0.0) {
                    return Err(HflowError::Config(format!(
                        "rhoMode = pullback_omega2 requires f0*omega2 > 0 everywhere; \
                         found {w2} at node ({}, {})",
                        k / dims.n2,
                        k % dims.n2
                    )));
                }
                let w3 = ambient.omega_eval(2, &partials.d1f[k], &partials.d2f[k]);
                if w3.abs() > 1e-12 {
                    return Err(HflowError::Config(format!(
                        "rhoMode = pullback_omega2 requires f0*omega3 = 0 (omega_3-Lagrangian \
                         initial data); found {w3} at node ({}, {})",
                        k / dims.n2,
                        k % dims.n2
                    )));
                }
                rho[k] = w2;
            }
            state.background_density = rho;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::q_field;
    use crate::surface::{GeometryFields, DEGENERACY_THRESHOLD};

    #[test]
    fn a_minimal_document_fills_in_every_default() {
        let config = parse_scenario("initialMap = identity_graph\n").unwrap();
        assert_eq!(config, ScenarioConfig::default());
        assert_eq!(config.grid, GridDims::new(64, 64));
        assert_eq!(config.flow_kind, VelocityKind::HflowGradient);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let doc = "\n# a comment\nname = demo # trailing comment\n\ngridSize = 32\n";
        let config = parse_scenario(doc).unwrap();
        assert_eq!(config.name, "demo");
        assert_eq!(config.grid, GridDims::new(32, 32));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line_number() {
        let doc = "name = x\nbogus = 1\n";
        match parse_scenario(doc).unwrap_err() {
            HflowError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn semantic_violations_name_the_offending_key() {
        let doc = "initialMap = shear_graph\nepsilon1 = -0.1\n";
        match parse_scenario(doc).unwrap_err() {
            HflowError::Config(message) => assert!(message.contains("epsilon1")),
            other => panic!("unexpected error {other:?}"),
        }
        let doc = "gridSize = 6\n";
        assert!(parse_scenario(doc).is_err());
        let doc = "gridSize = 63 64\n";
        assert!(parse_scenario(doc).is_err());
    }

    #[test]
    fn parse_serialize_round_trip_is_the_identity() {
        let docs = [
            "initialMap = identity_graph\n",
            "name = shear\ninitialMap = shear_graph\nepsilon1 = 0.05\nepsilon2 = 0.02\n\
             wavenumber = 2\nintegrator.method = euler\nintegrator.dt_mode = fixed\n\
             integrator.dt = 1e-5\nsnapshotCadence = 0\n",
            "initialMap = normal_sinusoid\nepsilon = 0.1\nrhoMode = constant\nrhoValue = 2.5\n\
             scheme = central4\nflowKind = mcf\noutputDir = /tmp/x\n",
            "initialMap = fourier_perturbation\nfourierMode = 1 2 -1 0.01 0.02\n\
             fourierMode = 3 0 1 -0.005 0\nfourierRandom = 4 3 0.01\nseed = 7\n",
        ];
        for doc in docs {
            let config = parse_scenario(doc).unwrap();
            let text = serialize_scenario(&config);
            let reparsed = parse_scenario(&text).unwrap();
            assert_eq!(config, reparsed, "value round trip failed for:\n{doc}");
            assert_eq!(
                text,
                serialize_scenario(&reparsed),
                "text round trip failed for:\n{doc}"
            );
        }
    }

    #[test]
    fn the_identity_scenario_builds_the_stationary_state() {
        let config = parse_scenario("initialMap = identity_graph\ngridSize = 16\n").unwrap();
        let ambient = build_ambient(&config).unwrap();
        let state = build_initial_surface(&config, &ambient).unwrap();
        let geom = GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD).unwrap();
        for k in 0..state.dims.len() {
            assert_eq!(state.background_density[k], 2.0);
            assert_eq!(geom.induced.lambda[k], 1.0);
            assert_eq!(geom.curvature.norm_sq_h[k], 0.0);
        }
        let q = q_field(&geom);
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pullback_density_makes_graph_scenarios_exactly_special_at_t_zero() {
        let doc = "initialMap = shear_graph\nepsilon1 = 0.05\nepsilon2 = 0.03\ngridSize = 32\n";
        let config = parse_scenario(doc).unwrap();
        let ambient = build_ambient(&config).unwrap();
        let state = build_initial_surface(&config, &ambient).unwrap();
        let geom = GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD).unwrap();
        let q = q_field(&geom);
        let max_q = q.iter().fold(0.0f64, |m, &v| m.max(v));
        assert!(max_q <= 1e-12, "maxQ = {max_q}");
    }

    #[test]
    fn the_shear_scenario_matches_its_closed_form_lambda() {
        let doc = "initialMap = shear_graph\nepsilon1 = 0.05\nepsilon2 = 0\ngridSize = 64\n";
        let config = parse_scenario(doc).unwrap();
        let ambient = build_ambient(&config).unwrap();
        let state = build_initial_surface(&config, &ambient).unwrap();
        let geom = GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        for i in 0..64 {
            for j in 0..64 {
                let (_, x2) = state.dims.coords(i, j);
                let c = two_pi * 0.05 * (two_pi * x2).cos();
                let want = (4.0 + c * c).sqrt() / 2.0;
                let got = geom.induced.lambda[state.dims.idx(i, j)];
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_sinusoids_cannot_use_the_pullback_density() {
        let doc = "initialMap = normal_sinusoid\nepsilon = 0.1\n";
        let config = parse_scenario(doc).unwrap();
        let ambient = build_ambient(&config).unwrap();
        let err = build_initial_surface(&config, &ambient).unwrap_err();
        match err {
            HflowError::Config(message) => assert!(message.contains("omega2")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn seeded_fourier_scenarios_are_deterministic() {
        let doc = "initialMap = fourier_perturbation\nfourierRandom = 5 3 0.02\nseed = 11\n\
                   rhoMode = constant\ngridSize = 16\n";
        let config = parse_scenario(doc).unwrap();
        let ambient = build_ambient(&config).unwrap();
        let a = build_initial_surface(&config, &ambient).unwrap();
        let b = build_initial_surface(&config, &ambient).unwrap();
        assert_eq!(a.periodic_part, b.periodic_part);
        let other = parse_scenario(&doc.replace("seed = 11", "seed = 12")).unwrap();
        let c = build_initial_surface(&other, &ambient).unwrap();
        assert_ne!(a.periodic_part, c.periodic_part);
    }

    #[test]
    fn the_double_shear_meets_the_calibration_hypotheses() {
        let doc = "initialMap = shear_graph\nepsilon1 = 0.02\nepsilon2 = 0.02\ngridSize = 64\n";
        let config = parse_scenario(doc).unwrap();
        let ambient = build_ambient(&config).unwrap();
        let state = build_initial_surface(&config, &ambient).unwrap();
        let geom = GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD).unwrap();
        let (b1, b2) = crate::diagnostics::beta_fields(&state, &geom, &ambient);
        let min_b1 = b1.iter().fold(f64::MAX, |m, &v| m.min(v));
        let min_b2 = b2.iter().fold(f64::MAX, |m, &v| m.min(v));
        assert!(min_b1 > 0.98, "minBeta1 = {min_b1}");
        assert!(min_b2 > 0.98, "minBeta2 = {min_b2}");
    }
}
