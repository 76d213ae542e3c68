use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{table}: wavelength {wavelength_nm} nm outside tabulated range [{min_nm}, {max_nm}] nm")]
    WavelengthOutOfRange {
        table: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("wavelength #{index}: {source}")]
    SweepPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid dispersion table: {0}")]
    InvalidDispersion(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Efficiency is zero along the whole recovery, so the detector never fires.
    #[error("detector never fires at operating current {operating_current_ua} uA (zero efficiency along the recovery)")]
    NeverFires { operating_current_ua: f64 },

    #[error("efficiency at operating current {operating_current_ua} uA is zero; normalization undefined")]
    UndefinedNormalization { operating_current_ua: f64 },

    #[error("{what} did not converge after {iterations} iterations (bracket [{lo}, {hi}])")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        lo: f64,
        hi: f64,
    },

    #[error("total count rate is zero on channel {channel}; g2 normalization undefined")]
    ZeroTotalRate { channel: usize },

    #[error("channel {channel}: no signal to compensate (S = I - N = {signal_cps} cps)")]
    NoSignal { channel: usize, signal_cps: f64 },

    #[error("grid spacing {spacing_ns} ns too coarse for jitter sigma; need spacing <= {required_ns} ns")]
    GridTooCoarse { spacing_ns: f64, required_ns: f64 },

    #[error("fit did not converge (residual norm {residual_norm})")]
    FitFailed { residual_norm: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
