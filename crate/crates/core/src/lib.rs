//! Simulation library for N-continuous GFDM: matrix-based GFDM modulation,
//! time-domain sidelobe-suppression smoothing, iterative signal recovery,
//! channel models and spectral/SIR analysis.

pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod filterbank;
pub mod linalg;
pub mod nc;
pub mod spectral;
pub mod transceiver;

pub use channel::{
    apply_channel, awgn, eva_realization, zf_equalize, ChannelProfile, ChannelRealization, FadingProcess,
    StreamConvolver,
};
pub use config::{
    demap, hard_decision, map_bits, random_grid, validate_params, Constellation, FilterKind, SeededRng, SymbolGrid,
    ValidatedParams, WaveformParams,
};
pub use error::{Error, Result};
pub use experiment::{
    run_ber, run_power, run_psd, run_sir, run_validation, ExperimentConfig, ExperimentKind, ResultTable,
    ValidationReport, Variant,
};
pub use filterbank::{
    build_transmit_matrix, prototype_filter, shifted_filter, transmitter, PrototypeFilter, TransmitMatrix,
};
pub use linalg::{CMat, C64};
pub use nc::{
    basis_signal, boundary_derivatives, build_nc_operators, nc_setup, synthesis_waveform, BasisSet,
    BoundaryDerivatives, IdentityCheck, NcOperators, SmootherState,
};
pub use spectral::{
    closed_form_sir, converged_sir, empirical_sir, oversample_stream, oversample_symbol, sidelobe_level,
    theoretical_power_curves, theoretical_sir, welch_psd, PowerCurves, PsdEstimate, SirAccumulator, SirReport,
    WelchAccumulator, WelchConfig, WindowKind,
};
pub use transceiver::{
    demodulate, frame, gfdm_modulate, nc_transmit_stream, recover_iterative, unframe, Demodulator, Frame,
    RecoveryConfig, RecoveryOutput, SignalRecovery,
};
