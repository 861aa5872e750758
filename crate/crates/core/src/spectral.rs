//! Welch PSD estimation, band-limited oversampling, sidelobe metrics and the
//! power/SIR evaluators of the smoothing recursion.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ValidatedParams;
use crate::error::{Error, Result};
use crate::filterbank::{centered_bin, TransmitMatrix};
use crate::linalg::{self, CMat, C64};
use crate::nc::NcOperators;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// Periodic Hann window.
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            WindowKind::Hann => (0..len)
                .map(|n| {
                    let s = (std::f64::consts::PI * n as f64 / len as f64).sin();
                    s * s
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelchConfig {
    pub window_len: usize,
    pub overlap: usize,
    #[serde(default = "default_window")]
    pub window: WindowKind,
}

fn default_window() -> WindowKind {
    WindowKind::Hann
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            window_len: 7168,
            overlap: 1792,
            window: WindowKind::Hann,
        }
    }
}

impl WelchConfig {
    pub fn new(window_len: usize, overlap: usize, window: WindowKind) -> Self {
        Self {
            window_len,
            overlap,
            window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::InvalidParams("window length must be positive".into()));
        }
        if self.overlap >= self.window_len {
            return Err(Error::InvalidParams(format!(
                "overlap {} must be smaller than the window length {}",
                self.overlap, self.window_len
            )));
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        self.window_len - self.overlap
    }
}

/// Streaming Welch estimator. Samples can be pushed in arbitrary chunks;
/// segments start every `window_len - overlap` samples.
#[derive(Debug, Clone)]
pub struct WelchAccumulator {
    cfg: WelchConfig,
    window: Vec<f64>,
    window_power: f64,
    buffer: Vec<C64>,
    sum: Vec<f64>,
    segments: usize,
    seen: usize,
}

impl WelchAccumulator {
    pub fn new(cfg: WelchConfig) -> Result<Self> {
        cfg.validate()?;
        let window = cfg.window.coefficients(cfg.window_len);
        let window_power = window.iter().map(|w| w * w).sum();
        Ok(Self {
            cfg,
            window,
            window_power,
            buffer: Vec::with_capacity(2 * cfg.window_len),
            sum: vec![0.0; cfg.window_len],
            segments: 0,
            seen: 0,
        })
    }

    pub fn push(&mut self, samples: &[C64]) {
        self.seen += samples.len();
        self.buffer.extend_from_slice(samples);
        let w = self.cfg.window_len;
        let hop = self.cfg.hop();
        let mut start = 0;
        let mut seg = vec![C64::new(0.0, 0.0); w];
        while self.buffer.len() - start >= w {
            for (i, s) in seg.iter_mut().enumerate() {
                *s = self.buffer[start + i] * self.window[i];
            }
            linalg::fft(&mut seg);
            for (acc, s) in self.sum.iter_mut().zip(&seg) {
                *acc += s.norm_sqr();
            }
            self.segments += 1;
            start += hop;
        }
        self.buffer.drain(..start);
    }

    /// Combines two estimators fed with disjoint streams. Partial segments
    /// of `other` are discarded.
    pub fn merge(&mut self, other: &WelchAccumulator) -> Result<()> {
        if self.cfg != other.cfg {
            return Err(Error::InvalidParams(
                "cannot merge Welch estimators with different settings".into(),
            ));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.segments += other.segments;
        self.seen += other.seen;
        Ok(())
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Averaged periodogram in linear units, natural FFT bin order.
    pub fn linear_psd(&self) -> Result<Vec<f64>> {
        if self.segments == 0 {
            return Err(Error::StreamTooShort {
                len: self.seen,
                window: self.cfg.window_len,
            });
        }
        let s = 1.0 / (self.segments as f64 * self.window_power);
        Ok(self.sum.iter().map(|v| v * s).collect())
    }

    /// Normalized estimate; the occupied band is `|f| <= band_half_width`.
    pub fn finish(&self, band_half_width: f64) -> Result<PsdEstimate> {
        let lin = self.linear_psd()?;
        PsdEstimate::from_linear(&lin, band_half_width)
    }
}

/// PSD on a centered grid `f in [-1/2, 1/2)`, in dB relative to the in-band mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub psd_db: Vec<f64>,
    pub band_half_width: f64,
    /// Linear in-band mean that was mapped to 0 dB, in dB.
    pub reference_level_db: f64,
}

impl PsdEstimate {
    /// From a linear periodogram in natural FFT order.
    pub fn from_linear(lin: &[f64], band_half_width: f64) -> Result<Self> {
        let w = lin.len();
        if w == 0 {
            return Err(Error::InvalidParams("empty periodogram".into()));
        }
        if !(band_half_width > 0.0) {
            return Err(Error::InvalidParams(format!(
                "band half width must be positive, got {band_half_width}"
            )));
        }
        let lo = w / 2;
        let (freqs, vals): (Vec<f64>, Vec<f64>) = (0..w)
            .map(|i| {
                let bin = (i + w - lo) % w;
                (centered_bin(bin, w) as f64 / w as f64, lin[bin])
            })
            .unzip();
        let in_band: Vec<f64> = freqs
            .iter()
            .zip(&vals)
            .filter(|(f, _)| f.abs() <= band_half_width)
            .map(|(_, v)| *v)
            .collect();
        if in_band.is_empty() {
            return Err(Error::InvalidParams("no bins inside the occupied band".into()));
        }
        let mean = in_band.iter().sum::<f64>() / in_band.len() as f64;
        if !(mean > 0.0) {
            return Err(Error::InvalidParams("in-band power is zero".into()));
        }
        let psd_db = vals.iter().map(|v| 10.0 * (v / mean).log10()).collect();
        Ok(Self {
            freqs,
            psd_db,
            band_half_width,
            reference_level_db: 10.0 * mean.log10(),
        })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Linear interpolation of `psd_db` at `f`.
    pub fn level_at(&self, f: f64) -> Result<f64> {
        let (first, last) = (self.freqs[0], self.freqs[self.len() - 1]);
        if !(f >= first && f <= last) {
            return Err(Error::OutOfRange(format!("frequency {f} outside [{first}, {last}]")));
        }
        let step = 1.0 / self.len() as f64;
        let pos = (f - first) / step;
        let i = (pos.floor() as usize).min(self.len() - 1);
        if i + 1 >= self.len() {
            return Ok(self.psd_db[i]);
        }
        let t = pos - i as f64;
        Ok(self.psd_db[i] * (1.0 - t) + self.psd_db[i + 1] * t)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "freq,psd_db")?;
        for (f, p) in self.freqs.iter().zip(&self.psd_db) {
            writeln!(w, "{f:.9},{p:.6}")?;
        }
        Ok(())
    }
}

pub fn welch_psd(stream: &[C64], cfg: &WelchConfig, band_half_width: f64) -> Result<PsdEstimate> {
    cfg.validate()?;
    if stream.len() < cfg.window_len {
        return Err(Error::StreamTooShort {
            len: stream.len(),
            window: cfg.window_len,
        });
    }
    let mut acc = WelchAccumulator::new(*cfg)?;
    acc.push(stream);
    acc.finish(band_half_width)
}

/// Worst of the two band edges at `offset` beyond `±band_half_width`.
pub fn sidelobe_level(psd: &PsdEstimate, offset: f64) -> Result<f64> {
    let edge = psd.band_half_width + offset;
    let hi = psd.level_at(edge)?;
    let lo = psd.level_at(-edge)?;
    Ok(hi.max(lo))
}

/// Band-limited interpolation of the whole stream by zero padding its DFT.
/// Output samples keep the input amplitude, so energy grows by `factor`.
pub fn oversample_stream(x: &[C64], factor: usize) -> Result<Vec<C64>> {
    if factor == 0 {
        return Err(Error::InvalidParams("oversampling factor must be at least 1".into()));
    }
    if factor == 1 || x.is_empty() {
        return Ok(x.to_vec());
    }
    let n = x.len();
    let big = n * factor;
    let spec = linalg::dft(x);
    let mut padded = vec![C64::new(0.0, 0.0); big];
    for (l, v) in spec.into_iter().enumerate() {
        let b = centered_bin(l, n);
        padded[b.rem_euclid(big as i64) as usize] = v * factor as f64;
    }
    linalg::ifft(&mut padded);
    Ok(padded)
}

/// Oversamples one `N`-sample block, keeping DFT bins `0..N` as the positive
/// baseband frequencies in which the smoothing basis is defined.
pub fn oversample_symbol(x: &[C64], factor: usize) -> Result<Vec<C64>> {
    if factor == 0 {
        return Err(Error::InvalidParams("oversampling factor must be at least 1".into()));
    }
    let n = x.len();
    let mut padded = vec![C64::new(0.0, 0.0); n * factor];
    for (l, v) in linalg::dft(x).into_iter().enumerate() {
        padded[l] = v * factor as f64;
    }
    linalg::ifft(&mut padded);
    Ok(padded)
}

/// Oversampled block with a cyclic prefix of `factor * n_cp` samples.
pub fn oversample_frame(block: &[C64], n_cp: usize, factor: usize) -> Result<Vec<C64>> {
    let up = oversample_symbol(block, factor)?;
    let cp = n_cp * factor;
    if cp > up.len() {
        return Err(Error::InvalidParams(format!(
            "cyclic prefix {n_cp} longer than the block"
        )));
    }
    let mut out = Vec::with_capacity(cp + up.len());
    out.extend_from_slice(&up[up.len() - cp..]);
    out.extend_from_slice(&up);
    Ok(out)
}

/// Centre of the occupied band of an `n`-bin block oversampled by `factor`.
pub fn band_center(n: usize, factor: usize) -> f64 {
    (n as f64 - 1.0) / (2.0 * (n * factor) as f64)
}

/// Multiplies by `e^{-j 2 pi f (start + t)}`, continuing the phase from `start`.
pub fn shift_frequency(x: &mut [C64], f: f64, start: u64) {
    for (t, v) in x.iter_mut().enumerate() {
        let phase = -2.0 * std::f64::consts::PI * (f * (start + t as u64) as f64).fract();
        *v *= C64::from_polar(1.0, phase);
    }
}

/// Expected per-symbol powers of the smoothed stream.
///
/// `data_power[i] = E{||dbar_i||^2}`, `smooth_power[i] = E{||A^-1 w_i||^2}`
/// for unit-energy i.i.d. data and an unsmoothed first symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurves {
    pub data_power: Vec<f64>,
    pub smooth_power: Vec<f64>,
}

/// Evaluates `E_i = (I - Pt)(I - Pt)^H + Ph E_{i-1} Ph^H`, `E_0 = I`, for
/// `i = 0..=i_max`, carrying only the `(V+1)`-square projection `P_1 E P_1^H`.
pub fn theoretical_power_curves(ops: &NcOperators, i_max: usize) -> Result<PowerCurves> {
    if i_max == 0 {
        return Err(Error::InvalidParams("i_max must be at least 1".into()));
    }
    let n = ops.n() as f64;
    let (p1, p2, m_q) = (ops.p1(), ops.p2(), ops.m_q());
    let p1h = p1.adjoint().to_owned();
    let p2h = p2.adjoint().to_owned();
    let gm = m_q.adjoint() * m_q;
    let p1m = p1 * m_q;
    let p1mh = p1m.adjoint().to_owned();
    let p1p1 = p1 * &p1h;
    let p2p2 = p2 * &p2h;
    let p2p1 = p2 * &p1h;
    let c0: CMat = &p1p1 - &p1m * &p2p1 - &p2p1.adjoint() * &p1mh + &p1m * &p2p2 * &p1mh;
    let x_trace = linalg::trace_of_product(p2.as_ref(), m_q.as_ref()).re;
    let tilde_power = linalg::trace_of_product(gm.as_ref(), p2p2.as_ref()).re;

    let mut data_power = vec![n];
    let mut smooth_power = vec![0.0];
    let mut s: CMat = p1p1;
    for _ in 1..=i_max {
        let hat_power = linalg::trace_of_product(gm.as_ref(), s.as_ref()).re;
        data_power.push(n - 2.0 * x_trace + tilde_power + hat_power);
        smooth_power.push(tilde_power + hat_power);
        s = &c0 + &p1m * &s * &p1mh;
    }
    Ok(PowerCurves {
        data_power,
        smooth_power,
    })
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        10.0 * (num / den).log10()
    } else {
        f64::INFINITY
    }
}

/// SIR of symbol `i`: data power `N` over the expected smooth-signal power.
pub fn theoretical_sir(ops: &NcOperators, i: usize) -> Result<f64> {
    if i == 0 {
        return Err(Error::ZeroSmoothPower);
    }
    let curves = theoretical_power_curves(ops, i)?;
    Ok(ratio_db(ops.n() as f64, curves.smooth_power[i]))
}

/// Large-`i` plateau: iterates until successive values agree within
/// `tol_db` (at most `max_i` symbols).
pub fn converged_sir(ops: &NcOperators, tol_db: f64, max_i: usize) -> Result<(usize, f64)> {
    let curves = theoretical_power_curves(ops, max_i.max(2))?;
    let n = ops.n() as f64;
    let sir: Vec<f64> = curves.smooth_power.iter().map(|&s| ratio_db(n, s)).collect();
    for i in 2..sir.len() {
        if (sir[i] - sir[i - 1]).abs() < tol_db {
            return Ok((i, sir[i]));
        }
    }
    let last = sir.len() - 1;
    Ok((last, sir[last]))
}

/// `10 log10(KM / (2V + 2))`, valid only for a unitary transmit matrix.
pub fn closed_form_sir(p: &ValidatedParams) -> Result<f64> {
    if !p.is_dirichlet() {
        return Err(Error::ClosedFormNeedsUnitary { beta: p.beta });
    }
    Ok(ratio_db(p.n() as f64, 2.0 * (p.hdo as f64 + 1.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirReport {
    pub per_symbol_power: Vec<f64>,
    pub smooth_power: Vec<f64>,
    pub sir_db: Vec<f64>,
    pub closed_form_db: Option<f64>,
}

impl SirReport {
    pub fn theoretical(ops: &NcOperators, p: &ValidatedParams, i_max: usize) -> Result<Self> {
        let curves = theoretical_power_curves(ops, i_max)?;
        let n = ops.n() as f64;
        let sir_db = curves.smooth_power.iter().map(|&s| ratio_db(n, s)).collect();
        Ok(Self {
            per_symbol_power: curves.data_power,
            smooth_power: curves.smooth_power,
            sir_db,
            closed_form_db: closed_form_sir(p).ok(),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,data_power,smooth_power,sir_db")?;
        for i in 0..self.sir_db.len() {
            writeln!(
                w,
                "{i},{:.9},{:.9},{:.6}",
                self.per_symbol_power[i], self.smooth_power[i], self.sir_db[i]
            )?;
        }
        Ok(())
    }
}

/// Fewest symbols accepted by [`SirAccumulator::sir_db`].
pub const MIN_SIR_SYMBOLS: usize = 1000;

/// Sample-average SIR `mean ||d_i||^2 / mean ||A^-1 w_i||^2`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SirAccumulator {
    data: f64,
    smooth: f64,
    count: usize,
}

impl SirAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// `correction` is the data-domain smooth signal `A^-1 w_i = dbar_i - d_i`.
    pub fn push(&mut self, d: &[C64], correction: &[C64]) {
        self.data += linalg::energy(d);
        self.smooth += linalg::energy(correction);
        self.count += 1;
    }

    /// Accepts the time-domain smooth signal `w_i`.
    pub fn push_time_domain(&mut self, tx: &TransmitMatrix, d: &[C64], w: &[C64]) {
        let c = tx.invert(w);
        self.push(d, &c);
    }

    pub fn merge(&mut self, other: &SirAccumulator) {
        self.data += other.data;
        self.smooth += other.smooth;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean_data_power(&self) -> f64 {
        self.data / self.count.max(1) as f64
    }

    pub fn mean_smooth_power(&self) -> f64 {
        self.smooth / self.count.max(1) as f64
    }

    pub fn sir_db(&self) -> Result<f64> {
        if self.count < MIN_SIR_SYMBOLS {
            return Err(Error::InvalidParams(format!(
                "empirical SIR needs at least {MIN_SIR_SYMBOLS} symbols, got {}",
                self.count
            )));
        }
        if !(self.smooth > self.data * 1e-20) {
            return Err(Error::ZeroSmoothPower);
        }
        Ok(ratio_db(self.data, self.smooth))
    }
}

/// Empirical SIR over `(d_i, A^-1 w_i)` pairs.
pub fn empirical_sir<'a>(pairs: impl IntoIterator<Item = (&'a [C64], &'a [C64])>) -> Result<f64> {
    let mut acc = SirAccumulator::new();
    for (d, c) in pairs {
        acc.push(d, c);
    }
    acc.sir_db()
}

/// `trace(P_hat P_hat^H + P_tilde P_tilde^H)`, equal to `2(V+1)` for a unitary `A`.
pub fn smooth_power_trace(ops: &NcOperators) -> f64 {
    let gm = ops.m_q().adjoint() * ops.m_q();
    let p1p1 = ops.p1() * ops.p1().adjoint();
    let p2p2 = ops.p2() * ops.p2().adjoint();
    linalg::trace_of_product(gm.as_ref(), p1p1.as_ref()).re + linalg::trace_of_product(gm.as_ref(), p2p2.as_ref()).re
}

/// Dense reference for [`theoretical_power_curves`], `O(i_max N^3)`.
pub fn dense_power_curves(ops: &NcOperators, i_max: usize) -> PowerCurves {
    let n = ops.n();
    let pt = ops.p_tilde();
    let ph = ops.p_hat();
    let eye = linalg::identity(n);
    let base = &eye - &pt;
    let c0 = &base * base.adjoint();
    let tt = &pt * pt.adjoint();
    let mut e: CMat = eye;
    let mut data_power = vec![linalg::trace(e.as_ref()).re];
    let mut smooth_power = vec![0.0];
    for _ in 1..=i_max {
        let carried = &ph * &e * ph.adjoint();
        smooth_power.push(linalg::trace(tt.as_ref()).re + linalg::trace(carried.as_ref()).re);
        e = &c0 + carried;
        data_power.push(linalg::trace(e.as_ref()).re);
    }
    PowerCurves {
        data_power,
        smooth_power,
    }
}
