//! Shot-referenced analysis of synthesized or recorded quadrature traces.

mod combo;
mod fit;
mod mode;
mod report;
mod stats;
mod width;

pub use combo::{ComboLabel, ComboSpec};
pub use fit::{fit_efficiencies, model_db, FitResult, Observation, ObservedQuadrature, R0Mode};
pub use mode::{ModeFunction, ModeShape, ModeSpec};
pub use report::{analyze_run, AnalysisReport, ComboReport, DuanReport};
pub use stats::{
    autocorrelation, combo_statistics, duan_from_traces, noise_power_db, ratio_db, wavepacket_db,
    wavepacket_quadrature, AnalysisOptions, AutoCorrelation, ComboStats, DuanValue,
};
pub use width::correlation_width;
