//! Trajectory analytics: critical learning-rate constants, interpolation
//! barriers, intermediate-saturation curves, `c_crit`, regime segmentation
//! and phase diagrams against `d/w`.

mod barrier;
mod catapult;
mod diagram;
mod grid;
mod regimes;
mod saturation;
mod scan;

pub use barrier::{barrier_profile, InterpolationProfile};
pub use catapult::{detect_catapult, ratio_catapults, round2, CatapultMode};
pub use diagram::{
    assemble_phase_diagram, ConstantFit, ConstantStats, PhaseCell, PhaseDiagram, PhaseDiagramRow,
    CONSTANT_NAMES, MIN_SEEDS,
};
pub use grid::CGrid;
pub use regimes::{segment_regimes, RegimeParams, Regimes};
pub use saturation::{
    extract_c_crit, saturation_sharpness, ChiCurves, SaturationCurve, SaturationProtocol, TauRule,
};
pub use scan::{
    detect_c_barrier, scan_critical_constants, scan_from_init, CriticalConstants, GridPoint,
    ScanConfig, ScanTargets,
};
