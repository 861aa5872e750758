//! AWGN, tapped-delay-line Rayleigh channels with Jakes block fading, and
//! zero-forcing equalization.

use std::f64::consts::TAU;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::SeededRng;
use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// Bins with `|H|` at or below this are refused by [`zf_equalize`].
pub const DEEP_FADE: f64 = 1e-12;

/// Sinusoids per path in the fading generator.
pub const JAKES_SINUSOIDS: usize = 64;

pub const EVA_DELAYS_NS: [f64; 9] = [0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0];
pub const EVA_POWERS_DB: [f64; 9] = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9];

/// Adds circular complex Gaussian noise of variance `sigma2`.
pub fn awgn(x: &[C64], sigma2: f64, rng: &mut SeededRng) -> Vec<C64> {
    let mut y = x.to_vec();
    add_awgn(&mut y, sigma2, rng);
    y
}

pub fn add_awgn(x: &mut [C64], sigma2: f64, rng: &mut SeededRng) {
    assert!(sigma2 >= 0.0, "noise variance must be non-negative");
    if sigma2 == 0.0 {
        return;
    }
    let s = (sigma2 / 2.0).sqrt();
    for v in x.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += C64::new(re * s, im * s);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProfile {
    pub delays_ns: Vec<f64>,
    pub powers_db: Vec<f64>,
    #[serde(default = "default_interval")]
    pub sample_interval_ns: f64,
    #[serde(default = "default_doppler")]
    pub doppler_hz: f64,
}

fn default_interval() -> f64 {
    9.3
}

fn default_doppler() -> f64 {
    100.0
}

impl ChannelProfile {
    pub fn new(delays_ns: Vec<f64>, powers_db: Vec<f64>, sample_interval_ns: f64, doppler_hz: f64) -> Result<Self> {
        let p = Self {
            delays_ns,
            powers_db,
            sample_interval_ns,
            doppler_hz,
        };
        p.validate()?;
        Ok(p)
    }

    /// Extended Vehicular A at 9.3 ns sampling and 100 Hz Doppler.
    pub fn eva() -> Self {
        Self {
            delays_ns: EVA_DELAYS_NS.to_vec(),
            powers_db: EVA_POWERS_DB.to_vec(),
            sample_interval_ns: default_interval(),
            doppler_hz: default_doppler(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.delays_ns.is_empty() || self.delays_ns.len() != self.powers_db.len() {
            return bad(format!(
                "channel profile needs equal, non-empty delay/power lists ({} vs {})",
                self.delays_ns.len(),
                self.powers_db.len()
            ));
        }
        if self.delays_ns.iter().chain(&self.powers_db).any(|v| !v.is_finite()) {
            return bad("channel profile contains non-finite values".into());
        }
        if self.delays_ns[0] < 0.0 || self.delays_ns.windows(2).any(|w| w[1] <= w[0]) {
            return bad("path delays must be non-negative and strictly increasing".into());
        }
        if !(self.sample_interval_ns > 0.0) || !(self.doppler_hz >= 0.0) {
            return bad("sample interval must be positive and Doppler non-negative".into());
        }
        Ok(())
    }

    /// Path powers in linear scale, normalized to unit sum.
    pub fn linear_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }

    /// Path delays rounded to the nearest sample.
    pub fn tap_indices(&self) -> Vec<usize> {
        self.delays_ns
            .iter()
            .map(|d| (d / self.sample_interval_ns).round() as usize)
            .collect()
    }
}

/// Block-constant channel of one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<C64>,
    h_diag: Vec<C64>,
}

impl ChannelRealization {
    pub fn from_taps(taps: Vec<C64>) -> Self {
        let h_diag = linalg::dft(&taps);
        Self { taps, h_diag }
    }

    pub fn identity(n: usize) -> Self {
        let mut taps = vec![C64::new(0.0, 0.0); n];
        taps[0] = C64::new(1.0, 0.0);
        Self::from_taps(taps)
    }

    /// Taps from `(delay, gain)` pairs; gains at equal delays add up.
    pub fn from_paths(paths: &[(usize, C64)], n: usize) -> Result<Self> {
        let mut taps = vec![C64::new(0.0, 0.0); n];
        for &(d, g) in paths {
            if d >= n {
                return Err(Error::DelayTooLong { delay: d, len: n });
            }
            taps[d] += g;
        }
        Ok(Self::from_taps(taps))
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn h_diag(&self) -> &[C64] {
        &self.h_diag
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Largest nonzero tap index.
    pub fn memory(&self) -> usize {
        self.taps.iter().rposition(|t| t.norm() != 0.0).unwrap_or(0)
    }

    /// Linear convolution of an arbitrary-length block with the taps.
    pub fn convolve_linear(&self, x: &[C64]) -> Vec<C64> {
        let mem = self.memory();
        let mut y = vec![C64::new(0.0, 0.0); x.len() + mem];
        for (d, &g) in self.taps.iter().enumerate().take(mem + 1) {
            if g.norm() == 0.0 {
                continue;
            }
            for (i, &v) in x.iter().enumerate() {
                y[i + d] += g * v;
            }
        }
        y
    }
}

/// Circular convolution `H x` through the DFT.
pub fn apply_channel(h: &ChannelRealization, x: &[C64]) -> Result<Vec<C64>> {
    if x.len() != h.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            actual: x.len(),
        });
    }
    let mut buf = x.to_vec();
    linalg::fft(&mut buf);
    for (v, hv) in buf.iter_mut().zip(&h.h_diag) {
        *v *= hv;
    }
    linalg::ifft(&mut buf);
    Ok(buf)
}

/// `H^-1 y` through the DFT.
pub fn zf_equalize(h: &ChannelRealization, y: &[C64]) -> Result<Vec<C64>> {
    if y.len() != h.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            actual: y.len(),
        });
    }
    if let Some((bin, hv)) = h.h_diag.iter().enumerate().find(|(_, v)| v.norm() <= DEEP_FADE) {
        return Err(Error::DeepFade {
            bin,
            magnitude: hv.norm(),
        });
    }
    let mut buf = y.to_vec();
    linalg::fft(&mut buf);
    for (v, hv) in buf.iter_mut().zip(&h.h_diag) {
        *v /= hv;
    }
    linalg::ifft(&mut buf);
    Ok(buf)
}

#[derive(Debug, Clone)]
struct PathProcess {
    delay: usize,
    amplitude: f64,
    /// Per-sinusoid Doppler frequency `f_D cos(alpha_n)` and phase.
    tones: Vec<(f64, f64)>,
}

/// Time-correlated Rayleigh gains for every path of a profile.
///
/// Each path is `sqrt(p / S) sum_n exp(j (2 pi f_D cos(alpha_n) t + phi_n))`
/// with `alpha_n = (2 pi n + theta) / S`, `S = 64`, and `theta`, `phi_n`
/// uniform. The gain has exact power `p` and Jakes autocorrelation
/// `p J0(2 pi f_D tau)` in expectation over `theta`.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    paths: Vec<PathProcess>,
    sample_interval_s: f64,
}

impl FadingProcess {
    pub fn new(profile: &ChannelProfile, rng: &mut SeededRng) -> Result<Self> {
        profile.validate()?;
        let s = JAKES_SINUSOIDS;
        let paths = profile
            .tap_indices()
            .into_iter()
            .zip(profile.linear_powers())
            .map(|(delay, p)| {
                let theta = rng.phase();
                let tones = (0..s)
                    .map(|n| {
                        let alpha = (TAU * n as f64 + theta) / s as f64;
                        (profile.doppler_hz * alpha.cos(), rng.phase())
                    })
                    .collect();
                PathProcess {
                    delay,
                    amplitude: (p / s as f64).sqrt(),
                    tones,
                }
            })
            .collect();
        Ok(Self {
            paths,
            sample_interval_s: profile.sample_interval_ns * 1e-9,
        })
    }

    /// `(delay, gain)` of every path at time `t` seconds.
    pub fn gains_at(&self, t: f64) -> Vec<(usize, C64)> {
        self.paths
            .iter()
            .map(|p| {
                let g: C64 = p
                    .tones
                    .iter()
                    .map(|&(f, phase)| C64::from_polar(1.0, TAU * f * t + phase))
                    .sum();
                (p.delay, g * p.amplitude)
            })
            .collect()
    }

    /// Block-constant realization of symbol `symbol_index` for blocks of
    /// `n + n_cp` samples.
    pub fn realization(&self, symbol_index: usize, n: usize, n_cp: usize) -> Result<ChannelRealization> {
        let t = symbol_index as f64 * (n + n_cp) as f64 * self.sample_interval_s;
        ChannelRealization::from_paths(&self.gains_at(t), n)
    }
}

/// Draws an independent fading process and returns its realization for
/// `symbol_index`.
pub fn eva_realization(
    profile: &ChannelProfile,
    symbol_index: usize,
    n: usize,
    n_cp: usize,
    rng: &mut SeededRng,
) -> Result<ChannelRealization> {
    FadingProcess::new(profile, rng)?.realization(symbol_index, n, n_cp)
}

/// Linear convolution across consecutive framed blocks; each block's tail
/// spills into the next one, as on a physical link.
#[derive(Debug, Clone, Default)]
pub struct StreamConvolver {
    carry: Vec<C64>,
}

impl StreamConvolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, h: &ChannelRealization, frame: &[C64]) -> Vec<C64> {
        let mut y = h.convolve_linear(frame);
        if y.len() < self.carry.len() {
            y.resize(self.carry.len(), C64::new(0.0, 0.0));
        }
        for (v, c) in y.iter_mut().zip(&self.carry) {
            *v += c;
        }
        self.carry = y.split_off(frame.len());
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_vec(rng: &mut SeededRng, n: usize) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = SeededRng::new(1);
        let x = random_vec(&mut rng, 32);
        assert_eq!(awgn(&x, 0.0, &mut rng), x);
    }

    #[test]
    fn noise_variance_and_determinism() {
        let x = vec![C64::new(0.0, 0.0); 1_000_000];
        let y = awgn(&x, 0.3, &mut SeededRng::new(7));
        let var = linalg::energy(&y) / y.len() as f64;
        assert!((var / 0.3 - 1.0).abs() < 0.01, "{var}");
        let z = awgn(&x[..100], 0.3, &mut SeededRng::new(7));
        assert_eq!(&y[..100], z.as_slice());
    }

    #[test]
    fn eva_taps_on_sample_grid() {
        let p = ChannelProfile::eva();
        assert_eq!(p.tap_indices(), vec![0, 3, 16, 33, 40, 76, 117, 186, 270]);
        assert!((p.linear_powers().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(ChannelProfile::new(vec![0.0, 10.0], vec![0.0], 9.3, 0.0).is_err());
        assert!(ChannelProfile::new(vec![10.0, 5.0], vec![0.0, 0.0], 9.3, 0.0).is_err());
        assert!(ChannelProfile::new(vec![-1.0], vec![0.0], 9.3, 0.0).is_err());
        assert!(ChannelProfile::new(vec![], vec![], 9.3, 0.0).is_err());
    }

    #[test]
    fn delay_beyond_block_rejected() {
        let p = ChannelProfile::eva();
        assert!(matches!(
            eva_realization(&p, 0, 256, 0, &mut SeededRng::new(1)),
            Err(Error::DelayTooLong { delay: 270, len: 256 })
        ));
    }

    #[test]
    fn flat_rayleigh_single_path() {
        let p = ChannelProfile::new(vec![0.0], vec![0.0], 9.3, 0.0).unwrap();
        let root = SeededRng::new(3);
        let mut power = 0.0;
        let trials = 10_000;
        for t in 0..trials {
            let h = eva_realization(&p, 0, 8, 0, &mut root.child(t)).unwrap();
            assert!(h.taps()[1..].iter().all(|v| v.norm() == 0.0));
            power += h.taps()[0].norm_sqr();
        }
        assert!((power / trials as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn ensemble_path_powers_match_profile() {
        let p = ChannelProfile::eva();
        let root = SeededRng::new(5);
        let lin = p.linear_powers();
        let idx = p.tap_indices();
        let mut acc = vec![0.0; 9];
        let trials = 10_000u64;
        for t in 0..trials {
            let h = eva_realization(&p, 3, 1792, 280, &mut root.child(t)).unwrap();
            for (a, &d) in acc.iter_mut().zip(&idx) {
                *a += h.taps()[d].norm_sqr();
            }
        }
        for (a, l) in acc.iter().zip(&lin) {
            let mean = a / trials as f64;
            assert!((mean / l - 1.0).abs() < 0.03, "{mean} vs {l}");
        }
    }

    #[test]
    fn gains_follow_jakes_correlation() {
        // Ensemble correlation of the flat path at lag tau against J0 by
        // its power series.
        let fd = 100.0;
        let p = ChannelProfile::new(vec![0.0], vec![0.0], 9.3, fd).unwrap();
        let tau = 1.5e-3;
        let root = SeededRng::new(8);
        let mut corr = C64::new(0.0, 0.0);
        let trials = 20_000u64;
        for t in 0..trials {
            let f = FadingProcess::new(&p, &mut root.child(t)).unwrap();
            let a = f.gains_at(0.0)[0].1;
            let b = f.gains_at(tau)[0].1;
            corr += b * a.conj();
        }
        corr /= trials as f64;
        let x = TAU * fd * tau;
        let mut j0 = 0.0;
        let mut term = 1.0;
        for k in 0..30 {
            if k > 0 {
                term *= -(x * x / 4.0) / (k * k) as f64;
            }
            j0 += term;
        }
        assert!((corr.re - j0).abs() < 0.03 && corr.im.abs() < 0.03, "{corr} vs {j0}");
    }

    #[test]
    fn circular_convolution_matches_direct() {
        let mut rng = SeededRng::new(9);
        let taps = random_vec(&mut rng, 16);
        let x = random_vec(&mut rng, 16);
        let h = ChannelRealization::from_taps(taps.clone());
        let y = apply_channel(&h, &x).unwrap();
        for n in 0..16 {
            let mut s = C64::new(0.0, 0.0);
            for m in 0..16 {
                s += taps[m] * x[(n + 16 - m) % 16];
            }
            assert!((s - y[n]).norm() < 1e-10);
        }
        assert!(apply_channel(&h, &x[..15]).is_err());
    }

    #[test]
    fn identity_and_two_tap_channels() {
        let mut rng = SeededRng::new(10);
        let x = random_vec(&mut rng, 8);
        let id = ChannelRealization::identity(8);
        for (a, b) in apply_channel(&id, &x).unwrap().iter().zip(&x) {
            assert!((a - b).norm() < 1e-14);
        }
        for (a, b) in zf_equalize(&id, &x).unwrap().iter().zip(&x) {
            assert!((a - b).norm() < 1e-14);
        }
        let h = ChannelRealization::from_paths(&[(0, C64::new(1.0, 0.0)), (7, C64::new(0.5, 0.0))], 8).unwrap();
        let mut imp = vec![C64::new(0.0, 0.0); 8];
        imp[3] = C64::new(1.0, 0.0);
        let y = apply_channel(&h, &imp).unwrap();
        assert!((y[3] - 1.0).norm() < 1e-14 && (y[2] - 0.5).norm() < 1e-14);
    }

    #[test]
    fn equalizer_inverts_channel() {
        let mut rng = SeededRng::new(11);
        let h = eva_realization(&ChannelProfile::eva(), 0, 512, 0, &mut rng).unwrap();
        let x = random_vec(&mut rng, 512);
        let y = apply_channel(&h, &x).unwrap();
        for (a, b) in zf_equalize(&h, &y).unwrap().iter().zip(&x) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn deep_fade_reports_bin() {
        // Two equal taps cancel at the Nyquist bin.
        let h = ChannelRealization::from_paths(&[(0, C64::new(1.0, 0.0)), (1, C64::new(1.0, 0.0))], 8).unwrap();
        match zf_equalize(&h, &[C64::new(1.0, 0.0); 8]) {
            Err(Error::DeepFade { bin, .. }) => assert_eq!(bin, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cp_removal_turns_linear_into_circular() {
        let mut rng = SeededRng::new(12);
        let n = 64;
        let n_cp = 8;
        let h = ChannelRealization::from_paths(
            &[
                (0, C64::new(0.8, 0.1)),
                (3, C64::new(-0.3, 0.2)),
                (8, C64::new(0.1, -0.4)),
            ],
            n,
        )
        .unwrap();
        let core = random_vec(&mut rng, n);
        let framed: Vec<C64> = core[n - n_cp..].iter().chain(&core).copied().collect();
        let lin = h.convolve_linear(&framed);
        let circ = apply_channel(&h, &core).unwrap();
        for (a, b) in lin[n_cp..n_cp + n].iter().zip(&circ) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn stream_convolver_matches_whole_stream() {
        let mut rng = SeededRng::new(13);
        let h = ChannelRealization::from_paths(&[(0, C64::new(1.0, 0.0)), (5, C64::new(0.5, -0.5))], 16).unwrap();
        let a = random_vec(&mut rng, 6);
        let b = random_vec(&mut rng, 6);
        let whole: Vec<C64> = a.iter().chain(&b).copied().collect();
        let reference = h.convolve_linear(&whole);
        let mut conv = StreamConvolver::new();
        let mut out = conv.push(&h, &a);
        out.extend(conv.push(&h, &b));
        for (x, y) in out.iter().zip(&reference) {
            assert!((x - y).norm() < 1e-14);
        }
    }
}
