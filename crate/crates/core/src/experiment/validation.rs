use rayon::prelude::*;

use super::output::{Provenance, ResultTable};
use super::{ExperimentConfig, ExperimentKind};
use crate::config::{validate_params, FilterKind, WaveformParams};
use crate::error::Result;
use crate::filterbank::{build_transmit_matrix, prototype_filter};
use crate::nc::{assemble_nc_operators, BasisSet, EXACT_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub k: usize,
    pub m: usize,
    pub beta: f64,
    /// `None` for checks on the transmit matrix alone.
    pub hdo: Option<usize>,
    pub n_cp: usize,
    pub identity: String,
    pub method: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub enforced: bool,
}

impl ValidationRow {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }

    pub fn config_label(&self) -> String {
        match self.hdo {
            Some(v) => format!("K={} M={} beta={} V={} Ncp={}", self.k, self.m, self.beta, v, self.n_cp),
            None => format!("K={} M={} beta={} Ncp={}", self.k, self.m, self.beta, self.n_cp),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub provenance: Provenance,
}

impl ValidationReport {
    /// True when every enforced identity holds.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| !r.enforced || r.passed())
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationRow> {
        self.rows.iter().filter(|r| r.enforced && !r.passed())
    }

    pub fn table(&self) -> ResultTable {
        let mut t = ResultTable::new(
            "validate",
            &[
                "config",
                "k",
                "m",
                "beta",
                "hdo",
                "n_cp",
                "identity",
                "method",
                "residual",
                "tolerance",
                "enforced",
                "passed",
            ],
            self.provenance.clone(),
        );
        for r in &self.rows {
            t.push(vec![
                r.config_label().into(),
                r.k.into(),
                r.m.into(),
                r.beta.into(),
                match r.hdo {
                    Some(v) => v.into(),
                    None => "".into(),
                },
                r.n_cp.into(),
                r.identity.clone().into(),
                r.method.into(),
                r.residual.into(),
                r.tolerance.into(),
                r.enforced.into(),
                r.passed().into(),
            ]);
        }
        t
    }
}

fn default_cp(n: usize) -> usize {
    (280.0 * n as f64 / 1792.0).round() as usize
}

/// Evaluates every operator identity over the configured matrix of shapes,
/// roll-offs and HDOs. Configurations with `2V + 1 > N` are skipped.
/// Failures are report content, never errors.
pub fn run_validation(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate(ExperimentKind::Validate)?;
    let vc = &cfg.validate;
    let mut jobs = Vec::new();
    for &(k, m) in &vc.shapes {
        for &beta in &vc.betas {
            jobs.push((k, m, beta));
        }
    }
    let rows: Vec<Vec<ValidationRow>> = jobs
        .par_iter()
        .map(|&(k, m, beta)| validate_shape(cfg, k, m, beta))
        .collect();
    Ok(ValidationReport {
        rows: rows.into_iter().flatten().collect(),
        provenance: Provenance::new(cfg, "validate")?,
    })
}

fn validate_shape(cfg: &ExperimentConfig, k: usize, m: usize, beta: f64) -> Vec<ValidationRow> {
    let vc = &cfg.validate;
    let n = k * m;
    let n_cp = vc.n_cp.unwrap_or_else(|| default_cp(n));
    let filter = if beta == 0.0 {
        FilterKind::Dirichlet
    } else {
        FilterKind::RaisedCosine
    };
    let row =
        |hdo: Option<usize>, identity: &str, method: &'static str, residual: f64, tolerance: f64, enforced: bool| {
            ValidationRow {
                k,
                m,
                beta,
                hdo,
                n_cp,
                identity: identity.to_string(),
                method,
                residual,
                tolerance,
                enforced,
            }
        };
    let mut rows = Vec::new();
    let p0 = match validate_params(WaveformParams::new(k, m, n_cp, beta, 0).with_filter(filter)) {
        Ok(p) => p,
        Err(_) => {
            rows.push(row(None, "parameters valid", "check", f64::INFINITY, 0.0, true));
            return rows;
        }
    };
    let built = prototype_filter(&p0).and_then(|g| build_transmit_matrix(&g, &p0).map(|tx| (g, tx)));
    let (g, tx) = match built {
        Ok(v) => v,
        Err(_) => {
            rows.push(row(None, "A invertible", "lu", f64::INFINITY, 0.0, true));
            return rows;
        }
    };
    rows.push(row(
        None,
        "A A^-1 = I",
        "dense",
        tx.inverse_residual(),
        EXACT_TOLERANCE,
        true,
    ));
    if tx.is_unitary() {
        rows.push(row(
            None,
            "A^H A = I",
            "dense",
            tx.unitarity_residual(),
            EXACT_TOLERANCE,
            true,
        ));
    }
    let method = if n <= vc.dense_limit { "dense" } else { "factored" };
    for &hdo in &vc.hdos {
        if 2 * hdo + 1 > n {
            continue;
        }
        let p = match validate_params(WaveformParams::new(k, m, n_cp, beta, hdo).with_filter(filter)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let mut ops = match assemble_nc_operators(&tx, &BasisSet::new(&g, &p), &p) {
            Ok(ops) => ops,
            Err(_) => {
                rows.push(row(Some(hdo), "P_f invertible", "lu", f64::INFINITY, 0.0, true));
                continue;
            }
        };
        if vc.corrupt_p2 {
            let mut p2 = ops.p2().clone();
            let scale = linalg_scale(&p2);
            p2[(0, 0)] += crate::linalg::c(scale, 0.0);
            ops = ops.with_p2(p2);
        }
        let checks = if method == "dense" {
            ops.dense_identity_checks(&tx)
        } else {
            ops.identity_checks()
        };
        for chk in checks {
            rows.push(row(
                Some(hdo),
                chk.name,
                method,
                chk.residual,
                chk.tolerance,
                chk.enforced,
            ));
        }
    }
    rows
}

fn linalg_scale(a: &crate::linalg::CMat) -> f64 {
    1e-2 * crate::linalg::fro_norm(a.as_ref()) / ((a.nrows() * a.ncols()) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.validate.shapes = vec![(4, 2), (8, 4)];
        cfg
    }

    #[test]
    fn small_matrix_passes_and_skips_infeasible() {
        let report = run_validation(&small()).unwrap();
        if let Some(r) = report.failures().next() {
            panic!(
                "{} {}: {:e} > {:e}",
                r.config_label(),
                r.identity,
                r.residual,
                r.tolerance
            );
        }
        assert!(report.passed());
        assert!(report
            .rows
            .iter()
            .all(|r| !(r.k == 4 && r.hdo.map_or(false, |v| v > 3))));
        let unitary_rows: Vec<_> = report.rows.iter().filter(|r| r.beta == 0.0).collect();
        assert!(unitary_rows.iter().any(|r| r.identity == "A^H A = I"));
        assert!(unitary_rows.iter().any(|r| r.identity == "trace(P_tilde) = V+1"));
        assert_eq!(report.table().rows.len(), report.rows.len());
    }

    #[test]
    fn corrupted_p2_is_reported() {
        let mut cfg = small();
        cfg.validate.corrupt_p2 = true;
        let report = run_validation(&cfg).unwrap();
        assert!(!report.passed());
        assert!(report.failures().any(|r| r.identity == "P_tilde^2 = P_tilde"));
    }
}
