//! Shared fixtures for the benchmark targets.

use hflow_core::ambient::AmbientSpace;
use hflow_core::scenario::{build_ambient, build_initial_surface, parse_scenario};
use hflow_core::surface::SurfaceState;

/// The standard measurement state: a small shear at the production grid size.
pub fn shear_fixture(n: usize, scheme: &str) -> (AmbientSpace, SurfaceState) {
    let doc = format!(
        "initialMap = shear_graph\nepsilon1 = 0.05\ngridSize = {n}\nscheme = {scheme}\n"
    );
    let config = parse_scenario(&doc).expect("fixture scenario parses");
    let ambient = build_ambient(&config).expect("ambient builds");
    let state = build_initial_surface(&config, &ambient).expect("fixture builds");
    (ambient, state)
}
