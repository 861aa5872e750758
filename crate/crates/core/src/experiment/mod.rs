//! Declarative experiments: configuration, presets, and the PSD, BER,
//! SIR/power and validation pipelines.

mod output;
mod run;
mod validation;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelProfile;
use crate::config::{validate_params, FilterKind, ValidatedParams, WaveformParams};
use crate::error::{Error, Result};
use crate::spectral::{WelchConfig, WindowKind};
use crate::transceiver::Demodulator;

pub use output::{Cell, Provenance, ResultTable, SNR_CONVENTION};
pub use run::{ebn0_to_noise_variance, run_ber, run_power, run_psd, run_sir, PsdRun};
pub use validation::{run_validation, ValidationReport, ValidationRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Psd,
    Ber,
    Sir,
    Power,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Psd => "psd",
            ExperimentKind::Ber => "ber",
            ExperimentKind::Sir => "sir",
            ExperimentKind::Power => "power",
            ExperimentKind::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    #[default]
    Awgn,
    Eva,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub kind: ChannelKind,
    /// Multipath profile for `kind = "eva"`; the EVA table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ChannelProfile>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            kind: ChannelKind::Awgn,
            profile: None,
        }
    }
}

impl ChannelConfig {
    pub fn profile(&self) -> ChannelProfile {
        self.profile.clone().unwrap_or_else(ChannelProfile::eva)
    }
}

/// Which waveforms an experiment compares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    /// Rectangular OFDM: `M = 1`, Dirichlet, no smoothing.
    #[serde(default = "yes")]
    pub ofdm: bool,
    /// Conventional GFDM with the configured prototype.
    #[serde(default = "yes")]
    pub gfdm: bool,
    /// NC-GFDM, one variant per HDO.
    #[serde(default = "default_nc")]
    pub nc_gfdm: Vec<usize>,
    /// Time-domain N-continuous OFDM (`M = 1` with smoothing), one per HDO.
    #[serde(default)]
    pub td_nc_ofdm: Vec<usize>,
}

fn yes() -> bool {
    true
}

fn default_nc() -> Vec<usize> {
    vec![2, 6]
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            ofdm: true,
            gfdm: true,
            nc_gfdm: default_nc(),
            td_nc_ofdm: Vec::new(),
        }
    }
}

/// One transmit waveform of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    Ofdm,
    Gfdm,
    NcGfdm { hdo: usize },
    TdNcOfdm { hdo: usize },
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Ofdm => "ofdm".into(),
            Variant::Gfdm => "gfdm".into(),
            Variant::NcGfdm { hdo } => format!("nc-gfdm-v{hdo}"),
            Variant::TdNcOfdm { hdo } => format!("td-nc-ofdm-v{hdo}"),
        }
    }

    pub fn smoothed(&self) -> bool {
        matches!(self, Variant::NcGfdm { .. } | Variant::TdNcOfdm { .. })
    }

    /// Waveform parameters of this variant derived from the base waveform.
    pub fn params(&self, cfg: &ExperimentConfig) -> Result<ValidatedParams> {
        let w = &cfg.waveform;
        let ofdm = |hdo: usize| {
            WaveformParams::new(w.k, 1, cfg.ofdm_cp(), 0.0, hdo)
                .with_filter(FilterKind::Dirichlet)
                .with_oversample(w.oversample)
        };
        let p = match *self {
            Variant::Ofdm => ofdm(0),
            Variant::TdNcOfdm { hdo } => ofdm(hdo),
            Variant::Gfdm => WaveformParams {
                hdo: 0,
                n: None,
                ..w.clone()
            },
            Variant::NcGfdm { hdo } => WaveformParams {
                hdo,
                n: None,
                ..w.clone()
            },
        };
        validate_params(p)
    }
}

impl VariantConfig {
    pub fn list(&self) -> Vec<Variant> {
        let mut v = Vec::new();
        if self.ofdm {
            v.push(Variant::Ofdm);
        }
        if self.gfdm {
            v.push(Variant::Gfdm);
        }
        v.extend(self.nc_gfdm.iter().map(|&hdo| Variant::NcGfdm { hdo }));
        v.extend(self.td_nc_ofdm.iter().map(|&hdo| Variant::TdNcOfdm { hdo }));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdConfig {
    pub symbols: usize,
    pub window_len: usize,
    pub overlap: usize,
    #[serde(default = "default_window")]
    pub window: WindowKind,
    /// Out-of-band offsets, in subcarrier spacings beyond the band edge, at
    /// which sidelobe levels are tabulated.
    #[serde(default = "default_offsets")]
    pub offsets: Vec<f64>,
}

fn default_window() -> WindowKind {
    WindowKind::Hann
}

fn default_offsets() -> Vec<f64> {
    vec![0.5, 1.0]
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            symbols: 100_000,
            window_len: 7168,
            overlap: 1792,
            window: WindowKind::Hann,
            offsets: default_offsets(),
        }
    }
}

impl PsdConfig {
    pub fn welch(&self) -> WelchConfig {
        WelchConfig::new(self.window_len, self.overlap, self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerConfig {
    /// Eb/N0 grid in dB; `inf` runs noise-free.
    pub snr_db: Vec<f64>,
    /// Minimum number of bits simulated per point and variant.
    pub bits: usize,
    /// Symbols per independent stream (fresh smoother and fading process).
    #[serde(default = "default_stream_symbols")]
    pub stream_symbols: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_demodulator")]
    pub demodulator: Demodulator,
    /// Also report smoothed variants decoded without recovery.
    #[serde(default = "yes")]
    pub without_recovery: bool,
}

fn default_stream_symbols() -> usize {
    20
}

fn default_iterations() -> usize {
    8
}

fn default_demodulator() -> Demodulator {
    Demodulator::ZeroForcing
}

impl Default for BerConfig {
    fn default() -> Self {
        Self {
            snr_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            bits: 1_000_000,
            stream_symbols: default_stream_symbols(),
            iterations: default_iterations(),
            demodulator: default_demodulator(),
            without_recovery: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirConfig {
    pub betas: Vec<f64>,
    pub hdos: Vec<usize>,
    /// Monte-Carlo symbols per grid point (one stream); 0 skips the
    /// empirical column.
    pub symbols: usize,
    /// Recursion length cap when searching for the SIR plateau.
    #[serde(default = "default_max_index")]
    pub max_index: usize,
}

fn default_max_index() -> usize {
    400
}

impl Default for SirConfig {
    fn default() -> Self {
        Self {
            betas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            hdos: vec![0, 2, 4, 6],
            symbols: 10_000,
            max_index: default_max_index(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub betas: Vec<f64>,
    pub hdos: Vec<usize>,
    /// Largest symbol index `i` evaluated.
    pub max_index: usize,
    /// Monte-Carlo streams of `max_index + 1` symbols; 0 skips simulation.
    pub streams: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.0, 0.1, 0.5],
            hdos: vec![2],
            max_index: 20,
            streams: 10_000,
        }
    }
}

/// Standard identity matrix for `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    pub shapes: Vec<(usize, usize)>,
    pub betas: Vec<f64>,
    pub hdos: Vec<usize>,
    /// CP length per shape; `round(280 N / 1792)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cp: Option<usize>,
    /// Literal `N x N` evaluation up to this block length, factored above.
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
    /// Fault injection: perturbs `P_2` before checking.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    #[doc(hidden)]
    pub corrupt_p2: bool,
}

fn default_dense_limit() -> usize {
    256
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            shapes: vec![(4, 2), (8, 4), (256, 7)],
            betas: vec![0.0, 0.1, 0.5],
            hdos: vec![0, 1, 2, 4, 6],
            n_cp: None,
            dense_limit: default_dense_limit(),
            corrupt_p2: false,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// A complete experiment description, normally read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub waveform: WaveformParams,
    /// CP of the `M = 1` baselines; `round(n_cp / M)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ofdm_cp: Option<usize>,
    #[serde(default)]
    pub variants: VariantConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub psd: PsdConfig,
    #[serde(default)]
    pub ber: BerConfig,
    #[serde(default)]
    pub sir: SirConfig,
    #[serde(default)]
    pub power: PowerConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    /// Free-form values copied into every provenance block.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Full-size setup: `K=256, M=7, N_cp=280, beta=0.1, V=2`, oversampling 4.
    pub fn full() -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("sample_interval_ns".into(), "9.3".into());
        metadata.insert("max_doppler_hz".into(), "100".into());
        metadata.insert("modulation".into(), "16qam-gray".into());
        Self {
            kind: None,
            seed: 1,
            output_dir: default_output_dir(),
            waveform: WaveformParams::new(256, 7, 280, 0.1, 2).with_oversample(4),
            ofdm_cp: None,
            variants: VariantConfig::default(),
            channel: ChannelConfig::default(),
            psd: PsdConfig::default(),
            ber: BerConfig::default(),
            sir: SirConfig::default(),
            power: PowerConfig::default(),
            validate: ValidateConfig::default(),
            metadata,
        }
    }

    /// Same waveform with laptop-sized counts; PSD window and overlap keep
    /// the 4:1 ratio.
    pub fn desk() -> Self {
        let mut c = Self::full();
        c.psd.symbols = 10_000;
        c.psd.window_len = 1792;
        c.psd.overlap = 448;
        c.ber.bits = 100_000;
        c.ber.snr_db = vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0];
        c.sir.betas = vec![0.0, 0.1, 0.3, 0.5];
        c.sir.symbols = 10_000;
        c.power.streams = 1000;
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected desk or full)"
            ))),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overrides one dotted key, e.g. `ber.snr_db=[0, 10]` or
    /// `waveform.beta=0.5`. The value is parsed as TOML, falling back to a
    /// bare string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml()?).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = parse_value(value);
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("malformed key {key:?}")));
        }
        let (last, path) = parts.split_last().expect("split produces at least one part");
        let mut table = &mut doc;
        for p in path {
            table = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("{p:?} in {key:?} is not a table")))?;
        }
        table.insert(last.to_string(), parsed);
        *self = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        Ok(())
    }

    /// `key=value` form of [`ExperimentConfig::set`].
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn ofdm_cp(&self) -> usize {
        self.ofdm_cp
            .unwrap_or_else(|| (self.waveform.n_cp as f64 / self.waveform.m.max(1) as f64).round() as usize)
    }

    pub fn params(&self) -> Result<ValidatedParams> {
        validate_params(self.waveform.clone())
    }

    /// Checks everything the selected experiment needs.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        self.check_kind(kind)?;
        self.params()?;
        let variants = || -> Result<()> {
            let list = self.variants.list();
            if list.is_empty() {
                return Err(Error::Config("no waveform variants selected".into()));
            }
            for v in list {
                v.params(self)
                    .map_err(|e| Error::Config(format!("variant {}: {e}", v.label())))?;
            }
            Ok(())
        };
        match kind {
            ExperimentKind::Psd => {
                variants()?;
                if self.psd.symbols == 0 {
                    return Err(Error::Config("psd.symbols must be positive".into()));
                }
                self.psd.welch().validate()?;
            }
            ExperimentKind::Ber => {
                variants()?;
                if self.ber.snr_db.is_empty() {
                    return Err(Error::Config("ber.snr_db must not be empty".into()));
                }
                if self.ber.snr_db.iter().any(|s| s.is_nan()) {
                    return Err(Error::Config("ber.snr_db contains NaN".into()));
                }
                if self.ber.bits == 0 || self.ber.stream_symbols == 0 || self.ber.iterations == 0 {
                    return Err(Error::Config(
                        "ber.bits, ber.stream_symbols and ber.iterations must be positive".into(),
                    ));
                }
                if self.channel.kind == ChannelKind::Eva {
                    let profile = self.channel.profile();
                    profile.validate()?;
                    let memory = profile.tap_indices().into_iter().max().unwrap_or(0);
                    for v in self.variants.list() {
                        let n = v.params(self)?.n();
                        if memory >= n {
                            return Err(Error::Config(format!(
                                "variant {}: channel delay of {memory} samples does not fit its {n}-sample block; \
                                 deselect it for multipath runs",
                                v.label()
                            )));
                        }
                    }
                }
            }
            ExperimentKind::Sir => {
                if self.sir.betas.is_empty() || self.sir.hdos.is_empty() {
                    return Err(Error::Config("sir.betas and sir.hdos must not be empty".into()));
                }
                for &beta in &self.sir.betas {
                    for &hdo in &self.sir.hdos {
                        self.grid_params(beta, hdo)?;
                    }
                }
            }
            ExperimentKind::Power => {
                if self.power.betas.is_empty() || self.power.hdos.is_empty() || self.power.max_index == 0 {
                    return Err(Error::Config(
                        "power.betas, power.hdos and power.max_index must be set".into(),
                    ));
                }
                for &beta in &self.power.betas {
                    for &hdo in &self.power.hdos {
                        self.grid_params(beta, hdo)?;
                    }
                }
            }
            ExperimentKind::Validate => {}
        }
        Ok(())
    }

    fn check_kind(&self, kind: ExperimentKind) -> Result<()> {
        match self.kind {
            Some(k) if k != kind => Err(Error::Config(format!(
                "config is for a {} experiment, not {}",
                k.name(),
                kind.name()
            ))),
            _ => Ok(()),
        }
    }

    /// Base waveform with `beta` and `hdo` replaced; `beta = 0` selects the
    /// Dirichlet pulse.
    pub fn grid_params(&self, beta: f64, hdo: usize) -> Result<ValidatedParams> {
        let filter = if beta == 0.0 {
            FilterKind::Dirichlet
        } else {
            FilterKind::RaisedCosine
        };
        validate_params(WaveformParams {
            beta,
            hdo,
            filter,
            n: None,
            ..self.waveform.clone()
        })
    }
}

fn parse_value(s: &str) -> toml::Value {
    let wrapped = format!("v = {s}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(s.to_string())),
        Err(_) => toml::Value::String(s.to_string()),
    }
}
