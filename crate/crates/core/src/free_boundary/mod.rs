mod checks;
mod curve;

pub use checks::{
    containment, derivative_band_check, far_field, limit_diagnostics, lipschitz_estimate, separation, BandFit,
    ContainmentReport, FarFieldReport, LimitReport, LimitSlice, LipschitzReport,
};
pub use curve::{extract_chi, to_original, FreeBoundaryCurve, OriginalBoundary, Side, SliceContact};
