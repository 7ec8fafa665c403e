//! Fixtures shared by the solver benchmarks.

use palign::initial::{prepare_initial, BumpShape, GridSpec, SmoothPreset};
use palign::PhaseDensity;

/// Well-prepared default data on an nx×nv grid.
pub fn phase_fixture(nx: usize, nv: usize, epsilon: f64) -> PhaseDensity {
    let grid = GridSpec { nx, nv, ..GridSpec::default() };
    prepare_initial(&SmoothPreset::default(), epsilon, &grid, BumpShape::Forward)
        .expect("default preset is well prepared")
        .f
}
