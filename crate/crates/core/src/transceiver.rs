//! Modulation, CP framing, linear demodulators, the smoothed transmit stream
//! and the iterative smooth-signal cancelling receiver.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::config::{Constellation, SymbolGrid};
use crate::error::{Error, Result};
use crate::filterbank::{analyze, TransmitMatrix};
use crate::linalg::{self, CMat, C64};
use crate::nc::{NcOperators, SmootherState};

/// A core block with its cyclic prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    cp: Vec<C64>,
    core: Vec<C64>,
}

impl Frame {
    pub fn cp(&self) -> &[C64] {
        &self.cp
    }

    pub fn core(&self) -> &[C64] {
        &self.core
    }

    pub fn len(&self) -> usize {
        self.cp.len() + self.core.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// CP followed by the core.
    pub fn samples(&self) -> Vec<C64> {
        let mut s = Vec::with_capacity(self.len());
        s.extend_from_slice(&self.cp);
        s.extend_from_slice(&self.core);
        s
    }
}

pub fn frame(core: &[C64], n_cp: usize) -> Result<Frame> {
    if n_cp > core.len() {
        return Err(Error::LengthMismatch {
            expected: core.len(),
            actual: n_cp,
        });
    }
    Ok(Frame {
        cp: core[core.len() - n_cp..].to_vec(),
        core: core.to_vec(),
    })
}

/// Drops the first `n_cp` samples of an `n + n_cp` block.
pub fn unframe(samples: &[C64], n: usize, n_cp: usize) -> Result<Vec<C64>> {
    if samples.len() != n + n_cp {
        return Err(Error::LengthMismatch {
            expected: n + n_cp,
            actual: samples.len(),
        });
    }
    Ok(samples[n_cp..].to_vec())
}

/// Concatenates frames into one sample stream.
pub fn serialize(frames: &[Frame]) -> Vec<C64> {
    let mut out = Vec::with_capacity(frames.iter().map(Frame::len).sum());
    for f in frames {
        out.extend_from_slice(&f.cp);
        out.extend_from_slice(&f.core);
    }
    out
}

fn check_grid(tx: &TransmitMatrix, d: &SymbolGrid) -> Result<()> {
    if d.k() != tx.k() || d.m() != tx.m() {
        return Err(Error::LengthMismatch {
            expected: tx.n(),
            actual: d.as_slice().len(),
        });
    }
    Ok(())
}

/// `x = A vec(d)`.
pub fn gfdm_modulate(tx: &TransmitMatrix, d: &SymbolGrid) -> Result<Vec<C64>> {
    check_grid(tx, d)?;
    Ok(tx.modulate(d.as_slice()))
}

/// Applies `op` to a batch of column vectors with one matrix product.
pub fn apply_batch(op: &CMat, xs: &[Vec<C64>]) -> Vec<Vec<C64>> {
    if xs.is_empty() {
        return Vec::new();
    }
    let x = linalg::from_columns(xs, op.ncols());
    let y = op * &x;
    linalg::columns(y.as_ref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Demodulator {
    #[serde(alias = "mf")]
    MatchedFilter,
    #[serde(alias = "zf")]
    ZeroForcing,
    Mmse,
}

/// Linear GFDM demodulation.
///
/// MF and ZF take the ZF-equalized observation. MMSE takes the raw
/// observation and the channel: `(s2 I + A^H H^H H A)^-1 A^H H^H y`; without a
/// channel it assumes `H = I`.
pub fn demodulate(
    tx: &TransmitMatrix,
    y: &[C64],
    mode: Demodulator,
    noise_variance: f64,
    channel: Option<&ChannelRealization>,
) -> Result<Vec<C64>> {
    let n = tx.n();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    match mode {
        Demodulator::MatchedFilter => Ok(tx.matched_filter(y)),
        Demodulator::ZeroForcing => Ok(tx.invert(y)),
        Demodulator::Mmse => {
            let ha = match channel {
                Some(h) => {
                    let mut ha = Mat::zeros(n, n);
                    for j in 0..n {
                        let col = crate::channel::apply_channel(h, &linalg::column(tx.a().as_ref(), j))?;
                        for (i, v) in col.into_iter().enumerate() {
                            ha[(i, j)] = v;
                        }
                    }
                    ha
                }
                None => tx.a().clone(),
            };
            let gram = ha.adjoint() * &ha + linalg::identity(n) * faer::Scale(C64::new(noise_variance, 0.0));
            let rhs = linalg::matvec(linalg::adjoint(ha.as_ref()).as_ref(), y);
            solve_checked(&gram, &rhs)
        }
    }
}

fn solve_checked(m: &CMat, rhs: &[C64]) -> Result<Vec<C64>> {
    let (inv, _) = linalg::inverse_with_condition(m.as_ref(), "MMSE matrix")?;
    Ok(linalg::matvec(inv.as_ref(), rhs))
}

/// The equalized-signal linear map used by the receiver for `mode`.
pub fn demodulation_matrix(tx: &TransmitMatrix, mode: Demodulator, noise_variance: f64) -> Result<CMat> {
    match mode {
        Demodulator::MatchedFilter => Ok(linalg::adjoint(tx.a().as_ref())),
        Demodulator::ZeroForcing => Ok(tx.a_inv().clone()),
        Demodulator::Mmse => {
            let n = tx.n();
            let gram = tx.a().adjoint() * tx.a() + linalg::identity(n) * faer::Scale(C64::new(noise_variance, 0.0));
            let (inv, _) = linalg::inverse_with_condition(gram.as_ref(), "MMSE matrix")?;
            Ok(&inv * tx.a().adjoint())
        }
    }
}

/// Smoothed, CP-framed blocks for a sequence of grids (fresh stream).
pub fn nc_transmit_stream(ops: &NcOperators, tx: &TransmitMatrix, grids: &[SymbolGrid]) -> Result<Vec<Frame>> {
    let mut state = SmootherState::new(tx.n());
    let mut data = Vec::with_capacity(grids.len());
    for g in grids {
        check_grid(tx, g)?;
        data.push(ops.smooth_data(&mut state, g.as_slice()));
    }
    data.iter().map(|d| frame(&tx.modulate(d), ops.n_cp())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub iterations: usize,
    pub demodulator: Demodulator,
    #[serde(default)]
    pub noise_variance: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            iterations: 8,
            demodulator: Demodulator::ZeroForcing,
            noise_variance: 0.0,
        }
    }
}

impl RecoveryConfig {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParams("recovery needs at least one iteration".into()));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::InvalidParams("noise variance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutput {
    pub estimate: SymbolGrid,
    /// Constellation indices of the final decisions.
    pub decisions: Vec<usize>,
    /// Soft estimate after each iteration.
    pub trajectory: Vec<Vec<C64>>,
}

/// Iterative receiver with the per-configuration products precomputed.
///
/// Iteration `r` forms `c = P_f^-1 (P_2 A^-1 y - P_2 dhat)`, i.e. the smooth
/// coefficients of `w = P_w (A^-1 y) - Q P_f^-1 P_2 dhat`, and sets
/// `yhat = D (y - w) = D y - (D Q) c`.
#[derive(Debug, Clone)]
pub struct SignalRecovery {
    cfg: RecoveryConfig,
    k: usize,
    m: usize,
    dual: Vec<C64>,
    demod: Option<CMat>,
    d_q: CMat,
    p2: CMat,
    p_f_inv: CMat,
}

impl SignalRecovery {
    pub fn new(ops: &NcOperators, tx: &TransmitMatrix, cfg: RecoveryConfig) -> Result<Self> {
        cfg.validate()?;
        let (demod, d_q) = if cfg.demodulator == Demodulator::ZeroForcing {
            (None, ops.a_inv_q().clone())
        } else {
            let d = demodulation_matrix(tx, cfg.demodulator, cfg.noise_variance)?;
            let dq = &d * ops.q();
            (Some(d), dq)
        };
        Ok(Self {
            cfg,
            k: tx.k(),
            m: tx.m(),
            dual: tx.dual_pulse().to_vec(),
            demod,
            d_q,
            p2: ops.p2().clone(),
            p_f_inv: ops.p_f_inv().clone(),
        })
    }

    pub fn config(&self) -> &RecoveryConfig {
        &self.cfg
    }

    fn iterate(&self, z_d: &[C64], s: &[C64], c: &Constellation, mut on_iter: impl FnMut(&[C64])) -> Vec<usize> {
        let n = z_d.len();
        let mut d_hat = vec![C64::new(0.0, 0.0); n];
        let mut idx = vec![0usize; n];
        for _ in 0..self.cfg.iterations {
            let p2d = linalg::matvec(self.p2.as_ref(), &d_hat);
            let diff: Vec<C64> = s.iter().zip(&p2d).map(|(a, b)| a - b).collect();
            let coef = linalg::matvec(self.p_f_inv.as_ref(), &diff);
            let corr = linalg::matvec(self.d_q.as_ref(), &coef);
            let soft: Vec<C64> = z_d.iter().zip(&corr).map(|(a, b)| a - b).collect();
            for ((slot, out), y) in idx.iter_mut().zip(d_hat.iter_mut()).zip(&soft) {
                *slot = c.decide(*y);
                *out = c.point(*slot);
            }
            on_iter(&soft);
        }
        idx
    }

    /// Recovers one equalized block.
    pub fn recover(&self, y_tilde: &[C64], c: &Constellation) -> Result<RecoveryOutput> {
        let n = self.k * self.m;
        if y_tilde.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: y_tilde.len(),
            });
        }
        let z = analyze(&self.dual, self.k, self.m, y_tilde);
        let s = linalg::matvec(self.p2.as_ref(), &z);
        let z_d = match &self.demod {
            None => z,
            Some(d) => linalg::matvec(d.as_ref(), y_tilde),
        };
        let mut trajectory = Vec::with_capacity(self.cfg.iterations);
        let decisions = self.iterate(&z_d, &s, c, |soft| trajectory.push(soft.to_vec()));
        let estimate = SymbolGrid::from_vec(self.k, self.m, decisions.iter().map(|&i| c.point(i)).collect())?;
        Ok(RecoveryOutput {
            estimate,
            decisions,
            trajectory,
        })
    }

    /// Final decisions for a batch of equalized blocks.
    pub fn recover_batch(&self, ys: &[Vec<C64>], c: &Constellation) -> Vec<Vec<usize>> {
        if ys.is_empty() {
            return Vec::new();
        }
        let zs: Vec<Vec<C64>> = ys.iter().map(|y| analyze(&self.dual, self.k, self.m, y)).collect();
        let ss = apply_batch(&self.p2, &zs);
        let zds = match &self.demod {
            None => zs,
            Some(d) => apply_batch(d, ys),
        };
        zds.iter()
            .zip(&ss)
            .map(|(z, s)| self.iterate(z, s, c, |_| {}))
            .collect()
    }
}

/// One-shot form of [`SignalRecovery::recover`].
pub fn recover_iterative(
    ops: &NcOperators,
    tx: &TransmitMatrix,
    y_tilde: &[C64],
    cfg: &RecoveryConfig,
    c: &Constellation,
) -> Result<RecoveryOutput> {
    SignalRecovery::new(ops, tx, cfg.clone())?.recover(y_tilde, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{random_grid, validate_params, SeededRng, WaveformParams};
    use crate::filterbank::{prototype_filter, shifted_filter, transmitter};
    use crate::nc::{boundary_derivatives, nc_setup};

    fn ops_for(k: usize, m: usize, n_cp: usize, beta: f64, hdo: usize) -> (TransmitMatrix, NcOperators) {
        let p = validate_params(WaveformParams::new(k, m, n_cp, beta, hdo)).unwrap();
        nc_setup(&p).unwrap()
    }

    #[test]
    fn unit_grid_selects_column() {
        let p = validate_params(WaveformParams::new(4, 2, 1, 0.5, 0)).unwrap();
        let tx = transmitter(&p).unwrap();
        let mut d = SymbolGrid::zeros(4, 2);
        d.set(3, 1, C64::new(1.0, 0.0));
        let x = gfdm_modulate(&tx, &d).unwrap();
        for (a, b) in x.iter().zip(linalg::column(tx.a().as_ref(), 7)) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn modulation_matches_double_sum() {
        let p = validate_params(WaveformParams::new(4, 2, 1, 0.5, 0)).unwrap();
        let g = prototype_filter(&p).unwrap();
        let tx = transmitter(&p).unwrap();
        let (_, d) = random_grid(&mut SeededRng::new(2), &Constellation::qam16(), 4, 2);
        let x = gfdm_modulate(&tx, &d).unwrap();
        for n in 0..8 {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..4 {
                for m in 0..2 {
                    s += d.get(k, m) * shifted_filter(&g, k, m).unwrap()[n];
                }
            }
            assert!((s - x[n]).norm() < 1e-10);
        }
    }

    #[test]
    fn unitary_modulation_preserves_norm() {
        let p = validate_params(WaveformParams::new(16, 5, 4, 0.0, 0)).unwrap();
        let tx = transmitter(&p).unwrap();
        let (_, d) = random_grid(&mut SeededRng::new(3), &Constellation::qam16(), 16, 5);
        let x = gfdm_modulate(&tx, &d).unwrap();
        assert!((linalg::energy(&x).sqrt() - linalg::energy(d.as_slice()).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn framing() {
        let core: Vec<C64> = (0..8).map(|i| C64::new(i as f64, 0.0)).collect();
        let f0 = frame(&core, 0).unwrap();
        assert_eq!(f0.samples(), core);
        let f = frame(&core, 3).unwrap();
        assert_eq!(f.cp(), &core[5..]);
        assert_eq!(unframe(&f.samples(), 8, 3).unwrap(), core);
        assert!(unframe(&f.samples(), 8, 2).is_err());
        assert!(frame(&core, 9).is_err());
    }

    #[test]
    fn demodulator_relations() {
        let p = validate_params(WaveformParams::new(4, 2, 1, 0.0, 0)).unwrap();
        let tx = transmitter(&p).unwrap();
        let (_, d) = random_grid(&mut SeededRng::new(4), &Constellation::qam16(), 4, 2);
        let x = gfdm_modulate(&tx, &d).unwrap();
        let mf = demodulate(&tx, &x, Demodulator::MatchedFilter, 0.0, None).unwrap();
        let zf = demodulate(&tx, &x, Demodulator::ZeroForcing, 0.0, None).unwrap();
        for ((a, b), c) in mf.iter().zip(&zf).zip(d.as_slice()) {
            assert!((a - b).norm() < 1e-9 && (b - c).norm() < 1e-9);
        }
        for beta in [0.1, 0.5] {
            let p = validate_params(WaveformParams::new(4, 2, 1, beta, 0)).unwrap();
            let tx = transmitter(&p).unwrap();
            let x = gfdm_modulate(&tx, &d).unwrap();
            let zf = demodulate(&tx, &x, Demodulator::ZeroForcing, 0.0, None).unwrap();
            let mmse = demodulate(&tx, &x, Demodulator::Mmse, 1e-12, None).unwrap();
            let h = ChannelRealization::identity(8);
            let mmse_h = demodulate(&tx, &x, Demodulator::Mmse, 1e-12, Some(&h)).unwrap();
            for ((a, b), c) in zf.iter().zip(&mmse).zip(&mmse_h) {
                assert!((a - b).norm() < 1e-6 && (a - c).norm() < 1e-6);
            }
            for (a, b) in zf.iter().zip(d.as_slice()) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn mmse_undoes_channel() {
        let p = validate_params(WaveformParams::new(4, 2, 1, 0.5, 0)).unwrap();
        let tx = transmitter(&p).unwrap();
        let (_, d) = random_grid(&mut SeededRng::new(5), &Constellation::qam16(), 4, 2);
        let h = ChannelRealization::from_paths(&[(0, C64::new(1.0, 0.2)), (1, C64::new(0.3, -0.1))], 8).unwrap();
        let y = crate::channel::apply_channel(&h, &gfdm_modulate(&tx, &d).unwrap()).unwrap();
        let est = demodulate(&tx, &y, Demodulator::Mmse, 1e-12, Some(&h)).unwrap();
        for (a, b) in est.iter().zip(d.as_slice()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn single_symbol_stream_is_unsmoothed() {
        let (tx, ops) = ops_for(8, 4, 5, 0.1, 2);
        let (_, d) = random_grid(&mut SeededRng::new(6), &Constellation::qam16(), 8, 4);
        let frames = nc_transmit_stream(&ops, &tx, std::slice::from_ref(&d)).unwrap();
        let expect = frame(&gfdm_modulate(&tx, &d).unwrap(), 5).unwrap();
        for (a, b) in frames[0].samples().iter().zip(expect.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        let zero = nc_transmit_stream(&ops, &tx, &[SymbolGrid::zeros(8, 4), SymbolGrid::zeros(8, 4)]).unwrap();
        assert!(serialize(&zero).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn stream_is_continuous() {
        let (tx, ops) = ops_for(8, 4, 5, 0.1, 2);
        let c = Constellation::qam16();
        let mut rng = SeededRng::new(7);
        let grids: Vec<SymbolGrid> = (0..3).map(|_| random_grid(&mut rng, &c, 8, 4).1).collect();
        let frames = nc_transmit_stream(&ops, &tx, &grids).unwrap();
        for w in frames.windows(2) {
            let a = tx.invert(w[0].core());
            let b = tx.invert(w[1].core());
            assert!(boundary_derivatives(&tx, &a, &b, 2, 5).relative_mismatch() < 1e-6);
        }
    }

    /// Literal dense composition: `w = P_w A^-1 y - Q P_f^-1 P_2 dhat`,
    /// `yhat = A^-1 (y - w)`.
    fn dense_recovery(
        ops: &NcOperators,
        tx: &TransmitMatrix,
        y: &[C64],
        c: &Constellation,
        iters: usize,
    ) -> Vec<Vec<C64>> {
        let pw = ops.p_w();
        let qpp2 = ops.q_pf_inv() * ops.p2();
        let z = tx.invert(y);
        let mut d_hat = vec![C64::new(0.0, 0.0); y.len()];
        let mut out = Vec::new();
        for _ in 0..iters {
            let a = linalg::matvec(pw.as_ref(), &z);
            let b = linalg::matvec(qpp2.as_ref(), &d_hat);
            let w: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let r: Vec<C64> = y.iter().zip(&w).map(|(x, y)| x - y).collect();
            let soft = tx.invert(&r);
            d_hat = soft.iter().map(|v| crate::config::hard_decision(*v, c)).collect();
            out.push(soft);
        }
        out
    }

    #[test]
    fn factored_recovery_matches_dense() {
        let (tx, ops) = ops_for(8, 4, 5, 0.5, 2);
        let c = Constellation::qam16();
        let mut rng = SeededRng::new(8);
        let grids: Vec<SymbolGrid> = (0..2).map(|_| random_grid(&mut rng, &c, 8, 4).1).collect();
        let frames = nc_transmit_stream(&ops, &tx, &grids).unwrap();
        let noisy = crate::channel::awgn(frames[1].core(), 0.05, &mut rng);
        let fast = recover_iterative(&ops, &tx, &noisy, &RecoveryConfig::new(4), &c).unwrap();
        let slow = dense_recovery(&ops, &tx, &noisy, &c, 4);
        for (a, b) in fast.trajectory.iter().zip(&slow) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        // Residual interference after the first pass is ~(V+1)/N per
        // sample, so this needs a few hundred samples per block.
        let c = Constellation::qam16();
        for beta in [0.1, 0.5] {
            for hdo in [0, 2, 4] {
                let (tx, ops) = ops_for(64, 5, 40, beta, hdo);
                let mut rng = SeededRng::new(9);
                let grids: Vec<SymbolGrid> = (0..20).map(|_| random_grid(&mut rng, &c, 64, 5).1).collect();
                let frames = nc_transmit_stream(&ops, &tx, &grids).unwrap();
                let rec = SignalRecovery::new(&ops, &tx, RecoveryConfig::new(8)).unwrap();
                let cores: Vec<Vec<C64>> = frames.iter().map(|f| f.core().to_vec()).collect();
                let out = rec.recover_batch(&cores, &c);
                for (dec, g) in out.iter().zip(&grids) {
                    for (i, v) in dec.iter().zip(g.as_slice()) {
                        assert_eq!(c.point(*i), *v, "beta={beta} V={hdo}");
                    }
                }
            }
        }
    }

    #[test]
    fn unsmoothed_first_symbol_recovers_in_one_iteration() {
        let (tx, ops) = ops_for(256, 7, 280, 0.0, 2);
        let c = Constellation::qam16();
        let (_, d) = random_grid(&mut SeededRng::new(10), &c, 256, 7);
        let x = gfdm_modulate(&tx, &d).unwrap();
        let out = recover_iterative(&ops, &tx, &x, &RecoveryConfig::new(1), &c).unwrap();
        assert_eq!(out.estimate, d);
    }

    #[test]
    fn true_data_is_a_fixed_point() {
        // Start the recursion from the true data: one update returns it.
        let (tx, ops) = ops_for(8, 4, 5, 0.5, 2);
        let c = Constellation::qam16();
        let mut rng = SeededRng::new(11);
        let grids: Vec<SymbolGrid> = (0..2).map(|_| random_grid(&mut rng, &c, 8, 4).1).collect();
        let frames = nc_transmit_stream(&ops, &tx, &grids).unwrap();
        let y = frames[1].core();
        let d = grids[1].as_slice();
        let z = tx.invert(y);
        let s = linalg::matvec(ops.p2().as_ref(), &z);
        let p2d = linalg::matvec(ops.p2().as_ref(), d);
        let diff: Vec<C64> = s.iter().zip(&p2d).map(|(a, b)| a - b).collect();
        let corr = linalg::matvec(ops.m_q().as_ref(), &diff);
        for ((zz, cc), dd) in z.iter().zip(&corr).zip(d) {
            assert!((zz - cc - dd).norm() < 1e-8);
        }
    }

    #[test]
    fn other_demodulators_in_recovery() {
        // At beta = 0 the MF map equals A^-1 and MMSE with vanishing noise
        // approaches it, so all trajectories coincide with ZF.
        let (tx, ops) = ops_for(8, 4, 5, 0.0, 1);
        let c = Constellation::qam16();
        let mut rng = SeededRng::new(12);
        let grids: Vec<SymbolGrid> = (0..3).map(|_| random_grid(&mut rng, &c, 8, 4).1).collect();
        let frames = nc_transmit_stream(&ops, &tx, &grids).unwrap();
        let zf = SignalRecovery::new(&ops, &tx, RecoveryConfig::new(3)).unwrap();
        for demod in [Demodulator::MatchedFilter, Demodulator::Mmse] {
            let cfg = RecoveryConfig {
                iterations: 3,
                demodulator: demod,
                noise_variance: 1e-10,
            };
            let rec = SignalRecovery::new(&ops, &tx, cfg).unwrap();
            for f in &frames {
                let a = rec.recover(f.core(), &c).unwrap();
                let b = zf.recover(f.core(), &c).unwrap();
                for (x, y) in a.trajectory.iter().flatten().zip(b.trajectory.iter().flatten()) {
                    assert!((x - y).norm() < 1e-6);
                }
            }
        }
        assert!(RecoveryConfig::new(0).validate().is_err());
    }
}
