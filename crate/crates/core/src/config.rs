//! Waveform parameters, constellations, symbol grids and seeded randomness.

use std::io::Write;
use std::ops::Deref;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    RaisedCosine,
    Dirichlet,
}

/// Dimensional and filter parameters of one waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformParams {
    /// Subcarriers.
    pub k: usize,
    /// Subsymbols per block.
    pub m: usize,
    /// Optional explicit block length; must equal `k * m` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub n_cp: usize,
    pub beta: f64,
    /// Highest derivative order made continuous.
    pub hdo: usize,
    #[serde(default = "default_filter")]
    pub filter: FilterKind,
    /// Oversampling factor for spectral measurements.
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

fn default_filter() -> FilterKind {
    FilterKind::RaisedCosine
}

fn default_oversample() -> usize {
    1
}

impl WaveformParams {
    pub fn new(k: usize, m: usize, n_cp: usize, beta: f64, hdo: usize) -> Self {
        Self {
            k,
            m,
            n: None,
            n_cp,
            beta,
            hdo,
            filter: FilterKind::RaisedCosine,
            oversample: 1,
        }
    }

    pub fn with_filter(mut self, filter: FilterKind) -> Self {
        self.filter = filter;
        self
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample;
        self
    }

    pub fn with_hdo(mut self, hdo: usize) -> Self {
        self.hdo = hdo;
        self
    }

    /// Block length `K * M` (saturating; validation rejects overflow).
    pub fn n(&self) -> usize {
        self.k.saturating_mul(self.m)
    }
}

/// Parameters that passed [`validate_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedParams(WaveformParams);

impl Deref for ValidatedParams {
    type Target = WaveformParams;
    fn deref(&self) -> &WaveformParams {
        &self.0
    }
}

impl ValidatedParams {
    pub fn params(&self) -> &WaveformParams {
        &self.0
    }

    /// True when the prototype reduces to the Dirichlet pulse.
    pub fn is_dirichlet(&self) -> bool {
        self.filter == FilterKind::Dirichlet || self.beta == 0.0
    }
}

pub fn validate_params(p: WaveformParams) -> Result<ValidatedParams> {
    let bad = |msg: String| Err(Error::InvalidParams(msg));
    if p.k == 0 || p.m == 0 {
        return bad(format!("K and M must be positive (K={}, M={})", p.k, p.m));
    }
    let n = match p.k.checked_mul(p.m) {
        Some(n) => n,
        None => return bad("K*M overflows".into()),
    };
    if let Some(explicit) = p.n {
        if explicit != n {
            return bad(format!("N = K*M violated: N={explicit}, K*M={n}"));
        }
    }
    if !(0.0..=1.0).contains(&p.beta) || !p.beta.is_finite() {
        return bad(format!("beta must lie in [0, 1], got {}", p.beta));
    }
    if p.filter == FilterKind::Dirichlet && p.beta != 0.0 {
        return bad(format!("Dirichlet filter requires beta = 0, got {}", p.beta));
    }
    if 2 * p.hdo + 1 > n {
        return bad(format!("2V+1 <= N violated: 2V+1={}, N={n}", 2 * p.hdo + 1));
    }
    if p.n_cp >= n {
        return bad(format!("N_cp < N violated: N_cp={}, N={n}", p.n_cp));
    }
    if p.oversample == 0 {
        return bad("oversample must be >= 1".into());
    }
    Ok(ValidatedParams(p))
}

/// A labeled constellation; point `i` carries the bit label `i` written
/// MSB-first over `bits_per_symbol` bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<C64>,
    bits_per_symbol: usize,
}

/// Gray-coded 4-PAM levels indexed by the two-bit label.
const PAM4_GRAY: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

impl Constellation {
    pub fn new(points: Vec<C64>) -> Result<Self> {
        let count = points.len();
        if count < 2 || !count.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "constellation size must be a power of two >= 2, got {count}"
            )));
        }
        let mean = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / count as f64;
        if (mean - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "constellation mean energy is {mean}, expected 1"
            )));
        }
        Ok(Self {
            bits_per_symbol: count.trailing_zeros() as usize,
            points,
        })
    }

    /// Scales arbitrary points to unit mean energy first.
    pub fn normalized(points: Vec<C64>) -> Result<Self> {
        let mean = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len().max(1) as f64;
        if mean <= 0.0 {
            return Err(Error::InvalidParams("constellation has zero energy".into()));
        }
        let s = 1.0 / mean.sqrt();
        Self::new(points.into_iter().map(|p| p * s).collect())
    }

    /// Square 16QAM; label bits `b0 b1` select the in-phase level and
    /// `b2 b3` the quadrature level, each Gray-coded 00,01,11,10 -> -3,-1,+1,+3.
    pub fn qam16() -> Self {
        let s = 1.0 / 10f64.sqrt();
        let points = (0..16)
            .map(|i| C64::new(PAM4_GRAY[i >> 2] * s, PAM4_GRAY[i & 3] * s))
            .collect();
        Self::new(points).expect("16QAM table is normalized")
    }

    /// Gray QPSK; bit 0 selects the in-phase sign, bit 1 the quadrature sign.
    pub fn qpsk() -> Self {
        let s = 1.0 / 2f64.sqrt();
        let sign = |b: usize| if b == 0 { -s } else { s };
        let points = (0..4).map(|i| C64::new(sign(i >> 1), sign(i & 1))).collect();
        Self::new(points).expect("QPSK table is normalized")
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn point(&self, index: usize) -> C64 {
        self.points[index]
    }

    /// Label of point `index` as bits, MSB first.
    pub fn label(&self, index: usize) -> Vec<u8> {
        (0..self.bits_per_symbol)
            .map(|b| ((index >> (self.bits_per_symbol - 1 - b)) & 1) as u8)
            .collect()
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn decide(&self, y: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,bits,real,imag")?;
        for (i, p) in self.points.iter().enumerate() {
            let bits: String = self.label(i).iter().map(|b| char::from(b'0' + b)).collect();
            writeln!(w, "{i},{bits},{},{}", p.re, p.im)?;
        }
        Ok(())
    }
}

pub fn hard_decision(y: C64, c: &Constellation) -> C64 {
    c.point(c.decide(y))
}

/// One block of data symbols, stored vectorized with index `m*K + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    k: usize,
    m: usize,
    data: Vec<C64>,
}

impl SymbolGrid {
    pub fn zeros(k: usize, m: usize) -> Self {
        Self {
            k,
            m,
            data: vec![C64::new(0.0, 0.0); k * m],
        }
    }

    pub fn from_vec(k: usize, m: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != k * m {
            return Err(Error::LengthMismatch {
                expected: k * m,
                actual: data.len(),
            });
        }
        Ok(Self { k, m, data })
    }

    /// Builds a grid from a `[k][m]` accessor.
    pub fn from_fn(k: usize, m: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(k * m);
        for mi in 0..m {
            for ki in 0..k {
                data.push(f(ki, mi));
            }
        }
        Self { k, m, data }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, k: usize, m: usize) -> C64 {
        assert!(k < self.k && m < self.m);
        self.data[m * self.k + k]
    }

    pub fn set(&mut self, k: usize, m: usize, v: C64) {
        assert!(k < self.k && m < self.m);
        self.data[m * self.k + k] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }
}

/// Maps `K*M*bits_per_symbol` bits (values 0/1, MSB first per symbol).
pub fn map_bits(bits: &[u8], c: &Constellation, k: usize, m: usize) -> Result<SymbolGrid> {
    let bps = c.bits_per_symbol();
    let expected = k * m * bps;
    if bits.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: bits.len(),
        });
    }
    let data = bits
        .chunks_exact(bps)
        .map(|chunk| {
            let idx = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            c.point(idx)
        })
        .collect();
    SymbolGrid::from_vec(k, m, data)
}

/// Hard-decides every sample and returns the decided labels' bits.
pub fn demap(samples: &[C64], c: &Constellation) -> Vec<u8> {
    let mut bits = Vec::with_capacity(samples.len() * c.bits_per_symbol());
    for &y in samples {
        bits.extend(c.label(c.decide(y)));
    }
    bits
}

/// ChaCha8 generator tagged with the seed it was created from.
///
/// Child generators share the key and use the trial index as the ChaCha
/// stream id, so parallel trials are independent and reproducible.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child(&self, index: u64) -> SeededRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(index.wrapping_add(1));
        SeededRng { seed: self.seed, inner }
    }

    pub fn bits(&mut self, count: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let word = self.inner.next_u64();
            let take = (count - out.len()).min(64);
            out.extend((0..take).map(|b| ((word >> b) & 1) as u8));
        }
        out
    }

    /// Uniform phase in `[0, 2 pi)`.
    pub fn phase(&mut self) -> f64 {
        self.inner.random::<f64>() * std::f64::consts::TAU
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Random bits and the grid they map to.
pub fn random_grid(rng: &mut SeededRng, c: &Constellation, k: usize, m: usize) -> (Vec<u8>, SymbolGrid) {
    let bits = rng.bits(k * m * c.bits_per_symbol());
    let grid = map_bits(&bits, c, k, m).expect("bit count matches grid");
    (bits, grid)
}
