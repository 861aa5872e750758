//! Smoothness operators, the per-symbol smoothing recursion and boundary
//! diagnostics.

use std::f64::consts::PI;

use faer::Mat;

use crate::config::ValidatedParams;
use crate::error::{Error, Result};
use crate::filterbank::{PrototypeFilter, TransmitMatrix};
use crate::linalg::{self, CMat, C64};

/// `(j 2 pi l / N)^v` with the power of `j` applied exactly.
pub fn spectral_factor(l: usize, n: usize, v: usize) -> C64 {
    let mag = (2.0 * PI * l as f64 / n as f64).powi(v as i32);
    match v % 4 {
        0 => C64::new(mag, 0.0),
        1 => C64::new(0.0, mag),
        2 => C64::new(-mag, 0.0),
        _ => C64::new(0.0, -mag),
    }
}

/// `f_0(n) = g(n) sum_k e^{-j 2 pi k n / K}` and its DFT.
///
/// The sum is a comb: `K g(n)` on multiples of `K`, zero elsewhere.
pub fn synthesis_waveform(g: &PrototypeFilter, p: &ValidatedParams) -> (Vec<C64>, Vec<C64>) {
    let k = p.k;
    let f0: Vec<C64> = g
        .samples()
        .iter()
        .enumerate()
        .map(|(n, &v)| if n % k == 0 { v * k as f64 } else { C64::new(0.0, 0.0) })
        .collect();
    let big = linalg::dft(&f0);
    (f0, big)
}

/// `f_v(n) = (1/N) sum_l (j 2 pi l/N)^v F_0(l) e^{j 2 pi (n + N_cp) l / N}` by
/// direct summation.
pub fn basis_signal(f0_dft: &[C64], order: usize, n: i64, n_cp: usize) -> C64 {
    let len = f0_dft.len();
    let mut s = C64::new(0.0, 0.0);
    for (l, f) in f0_dft.iter().enumerate() {
        s += spectral_factor(l, len, order) * f * linalg::twiddle(-(n + n_cp as i64) * l as i64, len);
    }
    s / len as f64
}

/// Basis signals `f_0 .. f_{2V}` on `n = -N_cp .. N-1`.
#[derive(Debug, Clone)]
pub struct BasisSet {
    hdo: usize,
    n_cp: usize,
    f0_dft: Vec<C64>,
    q: CMat,
    q_ext: CMat,
}

impl BasisSet {
    pub fn new(g: &PrototypeFilter, p: &ValidatedParams) -> Self {
        let (_, f0_dft) = synthesis_waveform(g, p);
        Self::from_spectrum(f0_dft, p.hdo, p.n_cp)
    }

    pub fn from_spectrum(f0_dft: Vec<C64>, hdo: usize, n_cp: usize) -> Self {
        let n = f0_dft.len();
        let orders = 2 * hdo + 1;
        let mut q_ext = Mat::zeros(n_cp + n, orders);
        for v in 0..orders {
            let spec: Vec<C64> = (0..n)
                .map(|l| spectral_factor(l, n, v) * f0_dft[l] * linalg::twiddle(-((n_cp * l) as i64), n))
                .collect();
            let col = linalg::idft(&spec);
            for row in 0..n_cp + n {
                let t = (row as i64 - n_cp as i64).rem_euclid(n as i64) as usize;
                q_ext[(row, v)] = col[t];
            }
        }
        let q = Mat::from_fn(n, hdo + 1, |i, v| q_ext[(i + n_cp, v)]);
        Self {
            hdo,
            n_cp,
            f0_dft,
            q,
            q_ext,
        }
    }

    pub fn hdo(&self) -> usize {
        self.hdo
    }

    pub fn f0_dft(&self) -> &[C64] {
        &self.f0_dft
    }

    /// `N x (V+1)`, columns `f_0 .. f_V` on `n = 0..N-1`.
    pub fn q(&self) -> &CMat {
        &self.q
    }

    /// `(N_cp + N) x (2V+1)`, row `r` holds `n = r - N_cp`.
    pub fn q_ext(&self) -> &CMat {
        &self.q_ext
    }

    /// Tabulated `f_order(n)` for `n` in `-N_cp..N`.
    pub fn value(&self, order: usize, n: i64) -> Result<C64> {
        if order > 2 * self.hdo {
            return Err(Error::IndexOutOfRange {
                what: "basis order",
                index: order as i64,
                limit: 2 * self.hdo as i64 + 1,
            });
        }
        let row = n + self.n_cp as i64;
        if row < 0 || row >= self.q_ext.nrows() as i64 {
            return Err(Error::IndexOutOfRange {
                what: "basis sample",
                index: n,
                limit: self.q_ext.nrows() as i64 - self.n_cp as i64,
            });
        }
        Ok(self.q_ext[(row as usize, order)])
    }
}

/// One checked operator identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    /// False for identities that only hold for a unitary transmit matrix
    /// and are reported for information otherwise.
    pub enforced: bool,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// Relative tolerance for identities that go through `P_f^-1`.
pub fn inverse_tolerance(hdo: usize) -> f64 {
    if hdo >= 5 {
        1e-6
    } else {
        1e-9
    }
}

pub const EXACT_TOLERANCE: f64 = 1e-9;
pub const TRACE_TOLERANCE: f64 = 1e-6;

/// The smoothing and decoding operators for one waveform and order `V`.
///
/// The rank-`(V+1)` products (`P_w`, `P_tilde`, `P_hat`) are kept as factors
/// and materialized on demand.
#[derive(Debug, Clone)]
pub struct NcOperators {
    hdo: usize,
    n_cp: usize,
    unitary: bool,
    p_f: CMat,
    p_f_inv: CMat,
    p_f_condition: f64,
    b: CMat,
    phi: Vec<C64>,
    p1: CMat,
    p2: CMat,
    q: CMat,
    a_inv_q: CMat,
    q_pf_inv: CMat,
    m_q: CMat,
}

pub fn build_nc_operators(tx: &TransmitMatrix, basis: &BasisSet, p: &ValidatedParams) -> Result<NcOperators> {
    let ops = NcOperators::assemble(tx, basis, p)?;
    for check in ops.identity_checks() {
        if check.enforced && !check.passed() {
            return Err(Error::InvariantViolation {
                name: check.name,
                residual: check.residual,
                tolerance: check.tolerance,
            });
        }
    }
    Ok(ops)
}

/// Builds the operators without enforcing the identity checks, for callers
/// that report them instead.
pub fn assemble_nc_operators(tx: &TransmitMatrix, basis: &BasisSet, p: &ValidatedParams) -> Result<NcOperators> {
    NcOperators::assemble(tx, basis, p)
}

/// Prototype, transmit matrix, basis and operators in one call.
pub fn nc_setup(p: &ValidatedParams) -> Result<(TransmitMatrix, NcOperators)> {
    let g = crate::filterbank::prototype_filter(p)?;
    let tx = crate::filterbank::build_transmit_matrix(&g, p)?;
    let basis = BasisSet::new(&g, p);
    let ops = build_nc_operators(&tx, &basis, p)?;
    Ok((tx, ops))
}

impl NcOperators {
    fn assemble(tx: &TransmitMatrix, basis: &BasisSet, p: &ValidatedParams) -> Result<Self> {
        let n = tx.n();
        let v1 = p.hdo + 1;
        if basis.hdo != p.hdo || basis.q.nrows() != n || basis.n_cp != p.n_cp {
            return Err(Error::InvalidParams("basis set does not match the parameters".into()));
        }
        let p_f = Mat::from_fn(v1, v1, |v, w| basis.q_ext[(0, v + w)]);
        let b = Mat::from_fn(v1, n, |v, l| spectral_factor(l, n, v) / n as f64);
        let phi: Vec<C64> = (0..n).map(|l| linalg::twiddle((p.n_cp * l) as i64, n)).collect();

        // Rows of B F and B Phi F are forward DFTs of the rows of B (B Phi).
        let mut bf = Mat::zeros(v1, n);
        let mut bphif = Mat::zeros(v1, n);
        for v in 0..v1 {
            let row: Vec<C64> = (0..n).map(|l| b[(v, l)]).collect();
            let shifted: Vec<C64> = row.iter().zip(&phi).map(|(x, f)| x * f).collect();
            for (j, val) in linalg::dft(&row).into_iter().enumerate() {
                bf[(v, j)] = val;
            }
            for (j, val) in linalg::dft(&shifted).into_iter().enumerate() {
                bphif[(v, j)] = val;
            }
        }
        let p1 = &bf * tx.a();
        let p2 = &bphif * tx.a();
        let q = basis.q.clone();
        let a_inv_q = tx.a_inv() * &q;
        let (p_f_inv, p_f_condition) = linalg::equilibrated_inverse(p_f.as_ref(), "P_f")?;
        let q_pf_inv = &q * &p_f_inv;
        let m_q = &a_inv_q * &p_f_inv;
        Ok(Self {
            hdo: p.hdo,
            n_cp: p.n_cp,
            unitary: tx.is_unitary(),
            p_f,
            p_f_inv,
            p_f_condition,
            b,
            phi,
            p1,
            p2,
            q,
            a_inv_q,
            q_pf_inv,
            m_q,
        })
    }

    pub fn hdo(&self) -> usize {
        self.hdo
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn n_cp(&self) -> usize {
        self.n_cp
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn p_f(&self) -> &CMat {
        &self.p_f
    }

    pub fn p_f_inv(&self) -> &CMat {
        &self.p_f_inv
    }

    /// Condition of the equilibrated `P_f`.
    pub fn p_f_condition(&self) -> f64 {
        self.p_f_condition
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    /// Diagonal of `Phi`, `e^{-j 2 pi N_cp l / N}`.
    pub fn phi(&self) -> &[C64] {
        &self.phi
    }

    pub fn p1(&self) -> &CMat {
        &self.p1
    }

    pub fn p2(&self) -> &CMat {
        &self.p2
    }

    pub fn q(&self) -> &CMat {
        &self.q
    }

    /// `A^-1 Q`.
    pub fn a_inv_q(&self) -> &CMat {
        &self.a_inv_q
    }

    /// `Q P_f^-1`.
    pub fn q_pf_inv(&self) -> &CMat {
        &self.q_pf_inv
    }

    /// `A^-1 Q P_f^-1`.
    pub fn m_q(&self) -> &CMat {
        &self.m_q
    }

    /// Dense decoding matrix `P_w = Q P_f^-1 P_2`.
    pub fn p_w(&self) -> CMat {
        &self.q_pf_inv * &self.p2
    }

    /// Dense `P_tilde = A^-1 P_w`.
    pub fn p_tilde(&self) -> CMat {
        &self.m_q * &self.p2
    }

    /// Dense `P_hat = A^-1 Q P_f^-1 P_1`.
    pub fn p_hat(&self) -> CMat {
        &self.m_q * &self.p1
    }

    /// Dense diagonal `Phi`.
    pub fn phi_matrix(&self) -> CMat {
        let n = self.n();
        Mat::from_fn(n, n, |i, j| if i == j { self.phi[i] } else { C64::new(0.0, 0.0) })
    }

    /// Replaces `P_2` without re-running the build checks.
    #[doc(hidden)]
    pub fn with_p2(mut self, p2: CMat) -> Self {
        self.p2 = p2;
        self
    }

    /// `trace(P_tilde) = trace(P_2 A^-1 Q P_f^-1)`.
    pub fn p_tilde_trace(&self) -> C64 {
        linalg::trace_of_product(self.p2.as_ref(), self.m_q.as_ref())
    }

    /// Operator identities evaluated through the factors.
    pub fn identity_checks(&self) -> Vec<IdentityCheck> {
        let v1 = self.hdo + 1;
        let inv_tol = inverse_tolerance(self.hdo);
        let eye = linalg::identity(v1);
        let x = &self.p2 * &self.m_q;
        let e = &x - &eye;
        let g_mq = self.m_q.adjoint() * &self.m_q;
        let g_qp = self.q_pf_inv.adjoint() * &self.q_pf_inv;
        let g_p2 = &self.p2 * self.p2.adjoint();
        let g_p1 = &self.p1 * self.p1.adjoint();

        // ||L Y R||_F^2 = tr(Y^H (L^H L) Y (R R^H)).
        let sandwich = |gl: &CMat, y: &CMat, gr: &CMat| -> f64 {
            let t = y.adjoint() * gl * y;
            linalg::trace_of_product(t.as_ref(), gr.as_ref()).re.max(0.0).sqrt()
        };

        let sym = linalg::relative_residual(self.p_f.as_ref(), self.p_f.transpose());
        let gain = linalg::relative_residual((&self.p2 * &self.a_inv_q).as_ref(), self.p_f.as_ref());
        let idempotency = sandwich(&g_mq, &e, &g_p2) / sandwich(&g_mq, &eye, &g_p2);
        let decode = sandwich(&g_qp, &e, &g_p2) / sandwich(&g_qp, &eye, &g_p2);
        let decode_q = sandwich(&g_qp, &e, &eye) / sandwich(&g_qp, &eye, &eye);
        let tr = (self.p_tilde_trace() - C64::new(v1 as f64, 0.0)).norm();
        let gram = linalg::relative_residual(g_p1.as_ref(), g_p2.as_ref());

        vec![
            IdentityCheck {
                name: "P_f symmetric",
                residual: sym,
                tolerance: EXACT_TOLERANCE,
                enforced: true,
            },
            IdentityCheck {
                name: "P_2 A^-1 Q = P_f",
                residual: gain,
                tolerance: EXACT_TOLERANCE,
                enforced: true,
            },
            IdentityCheck {
                name: "P_tilde^2 = P_tilde",
                residual: idempotency,
                tolerance: inv_tol,
                enforced: true,
            },
            IdentityCheck {
                name: "P_w A^-1 Q P_f^-1 P_2 = P_w",
                residual: decode,
                tolerance: inv_tol,
                enforced: true,
            },
            IdentityCheck {
                name: "P_w A^-1 Q P_f^-1 = Q P_f^-1",
                residual: decode_q,
                tolerance: inv_tol,
                enforced: true,
            },
            IdentityCheck {
                name: "trace(P_tilde) = V+1",
                residual: tr,
                tolerance: TRACE_TOLERANCE,
                enforced: true,
            },
            IdentityCheck {
                name: "P_1 P_1^H = P_2 P_2^H",
                residual: gram,
                tolerance: EXACT_TOLERANCE,
                enforced: self.unitary,
            },
        ]
    }

    /// Same identities evaluated by literal dense `N x N` products.
    pub fn dense_identity_checks(&self, tx: &TransmitMatrix) -> Vec<IdentityCheck> {
        let v1 = self.hdo + 1;
        let inv_tol = inverse_tolerance(self.hdo);
        let a_inv = tx.a_inv();
        let pt = self.p_tilde();
        let pw = self.p_w();
        let pw_ainv = &pw * a_inv;
        let pw_ainv_q_pfi = &(&pw_ainv * &self.q) * &self.p_f_inv;
        let decode_lhs = &pw_ainv_q_pfi * &self.p2;
        let gain_lhs = &(&self.p2 * a_inv) * &self.q;
        let g_p1 = &self.p1 * self.p1.adjoint();
        let g_p2 = &self.p2 * self.p2.adjoint();
        let tr = (linalg::trace(pt.as_ref()) - C64::new(v1 as f64, 0.0)).norm();
        vec![
            IdentityCheck {
                name: "P_f symmetric",
                residual: linalg::relative_residual(self.p_f.as_ref(), self.p_f.transpose()),
                tolerance: EXACT_TOLERANCE,
                enforced: true,
            },
            IdentityCheck {
                name: "P_2 A^-1 Q = P_f",
                residual: linalg::relative_residual(gain_lhs.as_ref(), self.p_f.as_ref()),
                tolerance: EXACT_TOLERANCE,
                enforced: true,
            },
            IdentityCheck {
                name: "P_tilde^2 = P_tilde",
                residual: linalg::relative_residual((&pt * &pt).as_ref(), pt.as_ref()),
                tolerance: inv_tol,
                enforced: true,
            },
            IdentityCheck {
                name: "P_w A^-1 Q P_f^-1 P_2 = P_w",
                residual: linalg::relative_residual(decode_lhs.as_ref(), pw.as_ref()),
                tolerance: inv_tol,
                enforced: true,
            },
            IdentityCheck {
                name: "P_w A^-1 Q P_f^-1 = Q P_f^-1",
                residual: linalg::relative_residual(pw_ainv_q_pfi.as_ref(), self.q_pf_inv.as_ref()),
                tolerance: inv_tol,
                enforced: true,
            },
            IdentityCheck {
                name: "trace(P_tilde) = V+1",
                residual: tr,
                tolerance: TRACE_TOLERANCE,
                enforced: true,
            },
            IdentityCheck {
                name: "P_1 P_1^H = P_2 P_2^H",
                residual: linalg::relative_residual(g_p1.as_ref(), g_p2.as_ref()),
                tolerance: EXACT_TOLERANCE,
                enforced: self.unitary,
            },
        ]
    }

    /// `b_i = P_f^-1 (P_1 dbar_{i-1} - P_2 d_i)`; zero for the first symbol of
    /// a stream unless the state was created with [`SmootherState::from_silence`].
    pub fn smoothing_coefficients(&self, state: &SmootherState, d: &[C64]) -> Vec<C64> {
        let v1 = self.hdo + 1;
        if !state.active {
            return vec![C64::new(0.0, 0.0); v1];
        }
        let delta = self.boundary_mismatch(&state.d_bar_prev, d);
        linalg::matvec(self.p_f_inv.as_ref(), &delta)
    }

    /// `P_1 dbar_{i-1} - P_2 dbar_i`, the derivative gaps at the junction.
    pub fn boundary_mismatch(&self, d_bar_prev: &[C64], d_bar: &[C64]) -> Vec<C64> {
        let a = linalg::matvec(self.p1.as_ref(), d_bar_prev);
        let b = linalg::matvec(self.p2.as_ref(), d_bar);
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }

    /// Smooths one symbol in the data domain: returns `dbar_i = d_i + A^-1 w_i`
    /// and advances the state. The transmitted block is `A dbar_i`.
    pub fn smooth_data(&self, state: &mut SmootherState, d: &[C64]) -> Vec<C64> {
        let b = self.smoothing_coefficients(state, d);
        let correction = linalg::matvec(self.a_inv_q.as_ref(), &b);
        let d_bar: Vec<C64> = d.iter().zip(&correction).map(|(x, c)| x + c).collect();
        state.w_prev = linalg::matvec(self.q.as_ref(), &b);
        state.b_prev = b;
        state.d_bar_prev.clone_from(&d_bar);
        state.active = true;
        state.index += 1;
        d_bar
    }

    /// `xbar_i = A d_i + Q b_i`.
    pub fn smooth_symbol(&self, tx: &TransmitMatrix, state: &mut SmootherState, d: &[C64]) -> Vec<C64> {
        let _ = self.smooth_data(state, d);
        let x = tx.modulate(d);
        x.iter().zip(&state.w_prev).map(|(a, w)| a + w).collect()
    }
}

/// Cross-symbol memory of the smoother for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherState {
    w_prev: Vec<C64>,
    d_bar_prev: Vec<C64>,
    b_prev: Vec<C64>,
    active: bool,
    index: usize,
}

impl SmootherState {
    /// Fresh stream: the first symbol goes out unsmoothed.
    pub fn new(n: usize) -> Self {
        Self {
            w_prev: vec![C64::new(0.0, 0.0); n],
            d_bar_prev: vec![C64::new(0.0, 0.0); n],
            b_prev: Vec::new(),
            active: false,
            index: 0,
        }
    }

    /// Stream preceded by silence: the first symbol is already smoothed
    /// against an all-zero predecessor.
    pub fn from_silence(n: usize) -> Self {
        Self {
            active: true,
            ..Self::new(n)
        }
    }

    pub fn w_prev(&self) -> &[C64] {
        &self.w_prev
    }

    pub fn d_bar_prev(&self) -> &[C64] {
        &self.d_bar_prev
    }

    /// Coefficients `b` used for the most recent symbol.
    pub fn b_prev(&self) -> &[C64] {
        &self.b_prev
    }

    /// Number of symbols smoothed so far.
    pub fn index(&self) -> usize {
        self.index
    }
}

/// Spectral derivatives of orders `0..=V` on both sides of a symbol junction.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDerivatives {
    /// Previous symbol at `n = N` (equal to `n = 0` by periodicity).
    pub end_of_prev: Vec<C64>,
    /// Current symbol at `n = -N_cp`.
    pub start_of_next: Vec<C64>,
}

impl BoundaryDerivatives {
    pub fn mismatch(&self) -> Vec<C64> {
        self.end_of_prev
            .iter()
            .zip(&self.start_of_next)
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Largest `|gap_v| / max(|left_v|, |right_v|)` over the orders.
    pub fn relative_mismatch(&self) -> f64 {
        self.end_of_prev
            .iter()
            .zip(&self.start_of_next)
            .map(|(a, b)| {
                let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
                (a - b).norm() / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Evaluates the junction derivatives from the DFT of the time samples
/// `A dbar`, independently of the stored `P_1`/`P_2`.
pub fn boundary_derivatives(
    tx: &TransmitMatrix,
    d_bar_prev: &[C64],
    d_bar: &[C64],
    hdo: usize,
    n_cp: usize,
) -> BoundaryDerivatives {
    let n = tx.n();
    let prev = linalg::dft(&tx.modulate(d_bar_prev));
    let next = linalg::dft(&tx.modulate(d_bar));
    let eval = |spec: &[C64], offset: i64, v: usize| -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (l, x) in spec.iter().enumerate() {
            s += spectral_factor(l, n, v) * x * linalg::twiddle(-offset * l as i64, n);
        }
        s / n as f64
    };
    BoundaryDerivatives {
        end_of_prev: (0..=hdo).map(|v| eval(&prev, n as i64, v)).collect(),
        start_of_next: (0..=hdo).map(|v| eval(&next, -(n_cp as i64), v)).collect(),
    }
}
