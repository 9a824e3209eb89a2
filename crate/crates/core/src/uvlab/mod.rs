//! Exact results for the `uv` model and the Monte Carlo checks that tie
//! them to simulation.

mod closed_form;
mod montecarlo;
mod sim;
mod validation;

pub use closed_form::{
    uv_cmax_ratio, uv_expected_first_step_loss_ratio, uv_expected_frobenius_change,
    uv_frobenius_sq, uv_k_frob, uv_k_loss, uv_moments, uv_step_fn, uv_trace_sq_change,
    uv_weight_correlation, UvMoments,
};
pub use montecarlo::{
    frobenius_sq_blocks, mc_estimate, mc_first_step_loss_ratio, mc_frobenius_change, mc_moments,
    uv_gd_step, Estimate,
};
pub use sim::{
    uv_arch, uv_dataset, uv_initial_state, uv_saturation_curve, uv_saturation_protocol,
    uv_saturation_sharpness, uv_scan_config,
};
pub use validation::{
    run_uv_validation, UvValidateOptions, UvValidationReport, ValidationRow, Z_LIMIT,
};
