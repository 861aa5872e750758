//! Dense complex helpers on top of `faer`, cached FFT plans, and the binary
//! matrix container.

use std::cell::RefCell;
use std::io::{Read, Write};

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

/// Matrices whose 1-norm condition estimate exceeds this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{-j 2 pi num / den}` with the phase reduced exactly in integers first.
pub fn twiddle(num: i64, den: usize) -> C64 {
    let r = num.rem_euclid(den as i64) as f64 / den as f64;
    C64::from_polar(1.0, -2.0 * std::f64::consts::PI * r)
}

pub fn matvec(a: MatRef<'_, C64>, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![C64::new(0.0, 0.0); a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
    y
}

/// Stacks equal-length vectors as the columns of a matrix.
pub fn from_columns(cols: &[Vec<C64>], nrows: usize) -> CMat {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub fn column(a: MatRef<'_, C64>, j: usize) -> Vec<C64> {
    let col = a.col(j);
    (0..a.nrows()).map(|i| col[i]).collect()
}

pub fn columns(a: MatRef<'_, C64>) -> Vec<Vec<C64>> {
    (0..a.ncols()).map(|j| column(a, j)).collect()
}

pub fn fro_norm(a: MatRef<'_, C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        let col = a.col(j);
        for i in 0..a.nrows() {
            s += col[i].norm_sqr();
        }
    }
    s.sqrt()
}

/// Maximum absolute column sum.
pub fn one_norm(a: MatRef<'_, C64>) -> f64 {
    (0..a.ncols())
        .map(|j| {
            let col = a.col(j);
            (0..a.nrows()).map(|i| col[i].norm()).sum::<f64>()
        })
        .fold(0.0, |acc, v| {
            if v.is_nan() || acc.is_nan() {
                f64::NAN
            } else {
                acc.max(v)
            }
        })
}

pub fn trace(a: MatRef<'_, C64>) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `tr(X Y)` without forming the product.
pub fn trace_of_product(x: MatRef<'_, C64>, y: MatRef<'_, C64>) -> C64 {
    assert_eq!(x.ncols(), y.nrows());
    assert_eq!(x.nrows(), y.ncols());
    let mut s = C64::new(0.0, 0.0);
    for i in 0..x.nrows() {
        for k in 0..x.ncols() {
            s += x[(i, k)] * y[(k, i)];
        }
    }
    s
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(
        n,
        n,
        |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) },
    )
}

/// `||a - b||_F / ||b||_F`, falling back to the absolute norm when `b` vanishes.
pub fn relative_residual(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    let diff = a - b;
    let den = fro_norm(b);
    let num = fro_norm(diff.as_ref());
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

pub fn adjoint(a: MatRef<'_, C64>) -> CMat {
    a.adjoint().to_owned()
}

/// LU inverse with the exact 1-norm condition number `||A||_1 ||A^-1||_1`.
pub fn inverse_with_condition(a: MatRef<'_, C64>, what: &'static str) -> Result<(CMat, f64)> {
    assert_eq!(a.nrows(), a.ncols());
    let inv = a.partial_piv_lu().inverse();
    let cond = one_norm(a) * one_norm(inv.as_ref());
    if !cond.is_finite() || cond > SINGULAR_CONDITION {
        return Err(Error::Singular {
            what,
            condition: if cond.is_finite() { cond } else { f64::INFINITY },
        });
    }
    Ok((inv, cond))
}

/// Inverse of a small, badly scaled matrix after symmetric diagonal
/// equilibration `D A D` (Ruiz iterations until every row max is ~1).
///
/// Returns the inverse and the condition estimate of the equilibrated matrix.
pub fn equilibrated_inverse(a: MatRef<'_, C64>, what: &'static str) -> Result<(CMat, f64)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut d = vec![1.0; n];
    for _ in 0..64 {
        let mut worst: f64 = 0.0;
        let maxes: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| (a[(i, j)] * (d[i] * d[j])).norm()).fold(0.0, f64::max))
            .collect();
        for (di, m) in d.iter_mut().zip(&maxes) {
            if *m == 0.0 || !m.is_finite() {
                return Err(Error::Singular {
                    what,
                    condition: f64::INFINITY,
                });
            }
            *di /= m.sqrt();
            worst = worst.max((m - 1.0).abs());
        }
        if worst < 1e-3 {
            break;
        }
    }
    let scaled = Mat::from_fn(n, n, |i, j| a[(i, j)] * (d[i] * d[j]));
    let (inv_s, cond) = inverse_with_condition(scaled.as_ref(), what)?;
    let inv = Mat::from_fn(n, n, |i, j| inv_s[(i, j)] * (d[i] * d[j]));
    Ok((inv, cond))
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward DFT, `X(l) = sum_n x(n) e^{-j 2 pi l n / N}`.
pub fn fft(buf: &mut [C64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse DFT including the `1/N` factor.
pub fn ifft(buf: &mut [C64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let s = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

pub fn dft(x: &[C64]) -> Vec<C64> {
    let mut v = x.to_vec();
    fft(&mut v);
    v
}

pub fn idft(x: &[C64]) -> Vec<C64> {
    let mut v = x.to_vec();
    ifft(&mut v);
    v
}

pub fn energy(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

const MATRIX_MAGIC: &[u8; 8] = b"NCGFDMMX";

/// Writes a complex matrix as: magic, `u64` rows, `u64` cols, then row-major
/// little-endian `f64` pairs (re, im).
pub fn write_matrix<W: Write>(mut w: W, a: MatRef<'_, C64>) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(a.nrows() * a.ncols() * 16);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<CMat> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::MatrixFormat("bad magic".into()));
    }
    let mut dim = [0u8; 8];
    r.read_exact(&mut dim)?;
    let rows = u64::from_le_bytes(dim) as usize;
    r.read_exact(&mut dim)?;
    let cols = u64::from_le_bytes(dim) as usize;
    let len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| Error::MatrixFormat("dimensions overflow".into()))?;
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() != len {
        return Err(Error::MatrixFormat(format!(
            "expected {len} payload bytes, found {}",
            data.len()
        )));
    }
    let f = |off: usize| f64::from_le_bytes(data[off..off + 8].try_into().unwrap());
    Ok(Mat::from_fn(rows, cols, |i, j| {
        let off = (i * cols + j) * 16;
        C64::new(f(off), f(off + 8))
    }))
}
