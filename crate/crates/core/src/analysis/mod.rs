//! Coincidence analysis of two time-tag streams.

mod correlate;
mod fit;

pub use correlate::{
    count_coincidences, cross_correlate, cross_correlate_chunked, find_peak, CoincidenceMode,
    CorrelationHistogram, PeakSearch,
};
pub use fit::{fit_gaussian_peak, fit_gaussian_peak_with, FitSettings, PeakFit};
