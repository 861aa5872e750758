//! Prototype pulse, shifted filters and the transmit matrix.

use std::f64::consts::PI;
use std::io::Write;

use faer::Mat;

use crate::config::{FilterKind, ValidatedParams};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    samples: Vec<C64>,
    kind: FilterKind,
    beta: f64,
    k: usize,
    m: usize,
}

impl PrototypeFilter {
    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    /// Kind actually realized; RC with `beta = 0` reports `Dirichlet`.
    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn frequency_response(&self) -> Vec<C64> {
        linalg::dft(&self.samples)
    }

    /// CSV with columns `n, g_re, g_im, abs_G`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,g_re,g_im,abs_G")?;
        for (n, (g, big)) in self.samples.iter().zip(self.frequency_response()).enumerate() {
            writeln!(w, "{n},{},{},{}", g.re, g.im, big.norm())?;
        }
        Ok(())
    }
}

/// Signed bin index of DFT bin `l` of an `n`-point transform, in
/// `[-floor(n/2), ceil(n/2) - 1]`.
pub fn centered_bin(l: usize, n: usize) -> i64 {
    if l < n.div_ceil(2) {
        l as i64
    } else {
        l as i64 - n as i64
    }
}

/// Real raised-cosine taper evaluated at `x` subcarrier spacings from DC.
pub fn raised_cosine(x: f64, beta: f64) -> f64 {
    let x = x.abs();
    let lo = (1.0 - beta) / 2.0;
    let hi = (1.0 + beta) / 2.0;
    if beta == 0.0 {
        // Half-open so exactly M bins survive; the extra bin sits on the
        // negative side when the edge lands on a bin.
        return if x < 0.5 { 1.0 } else { 0.0 };
    }
    if x <= lo {
        1.0
    } else if x < hi {
        0.5 * (1.0 + (PI / beta * (x - lo)).cos())
    } else {
        0.0
    }
}

/// Frequency response `G(l)` of the prototype before normalization.
pub fn prototype_response(k: usize, m: usize, beta: f64, dirichlet: bool) -> Vec<C64> {
    let n = k * m;
    let lo_bin = -((m / 2) as i64);
    let hi_bin = m.div_ceil(2) as i64 - 1;
    (0..n)
        .map(|l| {
            let lc = centered_bin(l, n);
            if dirichlet {
                let on = lc >= lo_bin && lc <= hi_bin;
                return C64::new(if on { 1.0 } else { 0.0 }, 0.0);
            }
            let amp = raised_cosine(lc as f64 / m as f64, beta);
            if m % 2 == 0 {
                // Half-sample delay; a zero-phase even-M taper makes A singular.
                amp * C64::from_polar(1.0, -PI * lc as f64 / n as f64)
            } else {
                C64::new(amp, 0.0)
            }
        })
        .collect()
}

pub fn prototype_filter(p: &ValidatedParams) -> Result<PrototypeFilter> {
    let dirichlet = p.is_dirichlet();
    let response = prototype_response(p.k, p.m, p.beta, dirichlet);
    let mut g = linalg::idft(&response);
    let e = linalg::energy(&g);
    if e <= 0.0 {
        return Err(Error::InvalidParams("prototype has zero energy".into()));
    }
    let s = 1.0 / e.sqrt();
    for v in g.iter_mut() {
        *v *= s;
    }
    Ok(PrototypeFilter {
        samples: g,
        kind: if dirichlet {
            FilterKind::Dirichlet
        } else {
            FilterKind::RaisedCosine
        },
        beta: p.beta,
        k: p.k,
        m: p.m,
    })
}

/// `g_{k,m}(n) = g((n - mK) mod N) e^{-j 2 pi k n / K}`.
pub fn shifted_filter(g: &PrototypeFilter, k: usize, m: usize) -> Result<Vec<C64>> {
    if k >= g.k {
        return Err(Error::IndexOutOfRange {
            what: "subcarrier",
            index: k as i64,
            limit: g.k as i64,
        });
    }
    if m >= g.m {
        return Err(Error::IndexOutOfRange {
            what: "subsymbol",
            index: m as i64,
            limit: g.m as i64,
        });
    }
    let n = g.len();
    let kk = g.k;
    Ok((0..n)
        .map(|i| g.samples[(i + n - m * kk) % n] * linalg::twiddle((k * i) as i64, kk))
        .collect())
}

/// Modulation matrix `A` (column `m*K + k` is `g_{k,m}`) and its inverse.
#[derive(Debug, Clone)]
pub struct TransmitMatrix {
    a: CMat,
    a_inv: CMat,
    unitary: bool,
    condition: f64,
    k: usize,
    m: usize,
    pulse: Vec<C64>,
    /// Dual pulse: row `m K + k` of `A_inv` is `conj(gamma_{k,m})`.
    dual: Vec<C64>,
}

impl TransmitMatrix {
    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn a_inv(&self) -> &CMat {
        &self.a_inv
    }

    /// True when `A_inv` was taken as the conjugate transpose.
    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// 1-norm condition number of `A`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `A d` evaluated per subsymbol with K-point FFTs, `O(N M)`.
    pub fn modulate(&self, d: &[C64]) -> Vec<C64> {
        synthesize(&self.pulse, self.k, self.m, d)
    }

    /// `A_inv x` through the dual pulse, `O(N M)`.
    pub fn invert(&self, x: &[C64]) -> Vec<C64> {
        analyze(&self.dual, self.k, self.m, x)
    }

    /// `A^H x`, the matched filter.
    pub fn matched_filter(&self, x: &[C64]) -> Vec<C64> {
        analyze(&self.pulse, self.k, self.m, x)
    }

    pub fn dual_pulse(&self) -> &[C64] {
        &self.dual
    }

    /// `||A A_inv - I||_F / sqrt(N)`.
    pub fn inverse_residual(&self) -> f64 {
        let p = &self.a * &self.a_inv;
        let diff = p - linalg::identity(self.n());
        linalg::fro_norm(diff.as_ref()) / (self.n() as f64).sqrt()
    }

    /// `||A^H A - I||_F / sqrt(N)`.
    pub fn unitarity_residual(&self) -> f64 {
        let p = self.a.adjoint() * &self.a;
        let diff = p - linalg::identity(self.n());
        linalg::fro_norm(diff.as_ref()) / (self.n() as f64).sqrt()
    }

    /// `F A`, the DFT of every column.
    pub fn frequency_matrix(&self) -> CMat {
        let n = self.n();
        let mut g = Mat::zeros(n, n);
        for j in 0..n {
            let col = linalg::dft(&linalg::column(self.a.as_ref(), j));
            for (i, v) in col.into_iter().enumerate() {
                g[(i, j)] = v;
            }
        }
        g
    }
}

pub fn build_transmit_matrix(g: &PrototypeFilter, p: &ValidatedParams) -> Result<TransmitMatrix> {
    let n = p.n();
    if g.len() != n || g.k != p.k || g.m != p.m {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: g.len(),
        });
    }
    let (k, m) = (p.k, p.m);
    let tw: Vec<C64> = (0..k).map(|r| linalg::twiddle(r as i64, k)).collect();
    let a = Mat::from_fn(n, n, |row, col| {
        let (mi, ki) = (col / k, col % k);
        g.samples[(row + n - (mi * k) % n) % n] * tw[(ki * row) % k]
    });
    let unitary = g.kind == FilterKind::Dirichlet;
    let (a_inv, condition) = if unitary {
        let a_inv = linalg::adjoint(a.as_ref());
        let cond = linalg::one_norm(a.as_ref()) * linalg::one_norm(a_inv.as_ref());
        (a_inv, cond)
    } else {
        linalg::inverse_with_condition(a.as_ref(), "transmit matrix")?
    };
    let dual = (0..n).map(|j| a_inv[(0, j)].conj()).collect();
    Ok(TransmitMatrix {
        a,
        a_inv,
        unitary,
        condition,
        k,
        m,
        pulse: g.samples.clone(),
        dual,
    })
}

/// `x(n) = sum_m g((n - mK) mod N) D_m(n mod K)` with `D_m` the K-point DFT
/// of subsymbol `m`.
fn synthesize(pulse: &[C64], k: usize, m: usize, d: &[C64]) -> Vec<C64> {
    let n = k * m;
    assert_eq!(d.len(), n);
    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut sub = vec![C64::new(0.0, 0.0); k];
    for mi in 0..m {
        sub.copy_from_slice(&d[mi * k..(mi + 1) * k]);
        linalg::fft(&mut sub);
        let off = mi * k;
        for (t, xt) in x.iter_mut().enumerate() {
            *xt += pulse[(t + n - off) % n] * sub[t % k];
        }
    }
    x
}

/// `y_{k,m} = sum_n conj(h((n - mK) mod N)) e^{j 2 pi k n / K} x(n)`.
pub(crate) fn analyze(pulse: &[C64], k: usize, m: usize, x: &[C64]) -> Vec<C64> {
    let n = k * m;
    assert_eq!(x.len(), n);
    let mut out = vec![C64::new(0.0, 0.0); n];
    let mut fold = vec![C64::new(0.0, 0.0); k];
    for mi in 0..m {
        fold.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let off = mi * k;
        for (t, xt) in x.iter().enumerate() {
            fold[t % k] += pulse[(t + n - off) % n].conj() * xt;
        }
        linalg::ifft(&mut fold);
        for (kk, v) in fold.iter().enumerate() {
            out[off + kk] = v * k as f64;
        }
    }
    out
}

/// Convenience: validated params straight to the transmit matrix.
pub fn transmitter(p: &ValidatedParams) -> Result<TransmitMatrix> {
    build_transmit_matrix(&prototype_filter(p)?, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_params, WaveformParams};

    fn params(k: usize, m: usize, beta: f64) -> ValidatedParams {
        validate_params(WaveformParams::new(k, m, 0, beta, 0)).unwrap()
    }

    #[test]
    fn dirichlet_has_m_equal_bins() {
        for (k, m) in [(4, 2), (8, 4), (16, 7), (5, 3)] {
            let g = prototype_filter(&params(k, m, 0.0)).unwrap();
            let big = g.frequency_response();
            let nz: Vec<f64> = big.iter().map(|v| v.norm()).filter(|v| *v > 1e-9).collect();
            assert_eq!(nz.len(), m, "K={k} M={m}");
            for v in &nz {
                assert!((v - nz[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn even_m_extra_bin_is_negative() {
        let g = prototype_filter(&params(4, 2, 0.0)).unwrap();
        let big = g.frequency_response();
        // N = 8: bins 0 and -1 (= 7).
        assert!(big[0].norm() > 0.1 && big[7].norm() > 0.1);
        assert!(big[1].norm() < 1e-12);
    }

    #[test]
    fn unit_energy_for_every_beta() {
        for beta in [0.0, 0.1, 0.3, 0.5, 1.0] {
            for (k, m) in [(4, 2), (8, 3), (16, 5)] {
                let g = prototype_filter(&params(k, m, beta)).unwrap();
                assert!((linalg::energy(g.samples()) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rc_matches_direct_evaluation() {
        // Independent route: explicit inverse-DFT double loop of the
        // piecewise RC response with its own bin bookkeeping.
        let (k, m, beta) = (256usize, 7usize, 0.1);
        let n = k * m;
        let g = prototype_filter(&params(k, m, beta)).unwrap();
        let resp: Vec<f64> = (0..n)
            .map(|l| {
                let f = if 2 * l < n { l as f64 } else { l as f64 - n as f64 } / m as f64;
                let af = f.abs();
                if af <= 0.45 {
                    1.0
                } else if af <= 0.55 {
                    0.5 * (1.0 + (PI / 0.1 * (af - 0.45)).cos())
                } else {
                    0.0
                }
            })
            .collect();
        let raw: Vec<C64> = (0..n)
            .map(|t| {
                let mut s = C64::new(0.0, 0.0);
                for (l, r) in resp.iter().enumerate() {
                    if *r != 0.0 {
                        s += C64::from_polar(*r, 2.0 * PI * ((l * t) % n) as f64 / n as f64);
                    }
                }
                s
            })
            .collect();
        let norm = linalg::energy(&raw).sqrt();
        let max_dev = raw
            .iter()
            .zip(g.samples())
            .map(|(a, b)| (a / norm - b).norm())
            .fold(0.0, f64::max);
        assert!(max_dev < 1e-10, "{max_dev}");
    }

    #[test]
    fn shifted_filter_basics() {
        let p = params(4, 2, 0.5);
        let g = prototype_filter(&p).unwrap();
        assert_eq!(shifted_filter(&g, 0, 0).unwrap(), g.samples());
        let s = shifted_filter(&g, 0, 1).unwrap();
        for i in 0..8 {
            assert_eq!(s[i], g.samples()[(i + 4) % 8]);
        }
        let s = shifted_filter(&g, 1, 1).unwrap();
        for (i, v) in s.iter().enumerate() {
            let idx = ((i as i64 - 4).rem_euclid(8)) as usize;
            let expect = g.samples()[idx] * C64::from_polar(1.0, -2.0 * PI * i as f64 / 4.0);
            assert!((v - expect).norm() < 1e-14);
        }
        assert!(shifted_filter(&g, 4, 0).is_err());
        assert!(shifted_filter(&g, 0, 2).is_err());
    }

    #[test]
    fn columns_follow_block_order() {
        let p = params(4, 2, 0.5);
        let g = prototype_filter(&p).unwrap();
        let tx = build_transmit_matrix(&g, &p).unwrap();
        for m in 0..2 {
            for k in 0..4 {
                let col = linalg::column(tx.a().as_ref(), m * 4 + k);
                assert_eq!(col, shifted_filter(&g, k, m).unwrap());
            }
        }
    }

    #[test]
    fn small_columns_have_unit_norm() {
        for beta in [0.0, 0.2, 0.7] {
            let tx = transmitter(&params(2, 2, beta)).unwrap();
            for j in 0..4 {
                let c = linalg::column(tx.a().as_ref(), j);
                assert!((linalg::energy(&c) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_residual_small() {
        for (k, m) in [(4, 2), (8, 4), (4, 3)] {
            for beta in [0.1, 0.5] {
                let tx = transmitter(&params(k, m, beta)).unwrap();
                assert!(!tx.is_unitary());
                assert!(tx.inverse_residual() < 1e-9, "{k} {m} {beta}");
            }
        }
    }

    #[test]
    fn dirichlet_is_unitary() {
        for (k, m) in [(4, 2), (8, 4), (16, 7), (32, 1)] {
            let tx = transmitter(&params(k, m, 0.0)).unwrap();
            assert!(tx.is_unitary());
            assert!(tx.unitarity_residual() < 1e-9);
        }
    }

    #[test]
    fn filter_csv_lists_every_sample() {
        let g = prototype_filter(&params(4, 2, 0.0)).unwrap();
        let mut out = Vec::new();
        g.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 9);
    }

    #[test]
    fn fast_paths_match_dense_matrices() {
        for &(k, m, beta) in &[
            (4usize, 2usize, 0.5),
            (8, 4, 0.1),
            (8, 4, 0.0),
            (16, 5, 0.3),
            (3, 3, 1.0),
        ] {
            let p = params(k, m, beta);
            let tx = transmitter(&p).unwrap();
            let n = k * m;
            let x: Vec<C64> = (0..n)
                .map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let pairs = [
                (tx.modulate(&x), linalg::matvec(tx.a().as_ref(), &x)),
                (tx.invert(&x), linalg::matvec(tx.a_inv().as_ref(), &x)),
                (
                    tx.matched_filter(&x),
                    linalg::matvec(linalg::adjoint(tx.a().as_ref()).as_ref(), &x),
                ),
            ];
            for (fast, dense) in pairs {
                let err: f64 = fast
                    .iter()
                    .zip(&dense)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(
                    err < 1e-10 * linalg::energy(&dense).sqrt().max(1.0),
                    "({k},{m},{beta}): {err}"
                );
            }
        }
    }
}
