//! Local linear maps, net bias, homogeneity and the singular value study.

mod jacobian;
mod svd;
mod sweep;

pub use jacobian::{
    frozen_response, homogeneity_deviation, jacobian_full, jacobian_row, net_bias, trace64,
    LocalLinearModel, MAX_JACOBIAN_PIXELS,
};
pub use svd::{nested_overlap, projection_energy, svd_analyze, svd_of, SvdAnalysis};
pub use sweep::{
    bias_sweep, dimensionality_vs_sigma, eval_sweep, fit_line, noise_stream, psnr_slope, LineFit,
    SweepTable, PSNR_CAP,
};
