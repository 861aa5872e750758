use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::output::{Cell, Provenance, ResultTable};
use super::{ChannelKind, ExperimentConfig, ExperimentKind, Variant};
use crate::channel::{add_awgn, zf_equalize, ChannelRealization, FadingProcess, StreamConvolver};
use crate::config::{random_grid, Constellation, SeededRng, ValidatedParams};
use crate::error::Result;
use crate::filterbank::{build_transmit_matrix, prototype_filter, TransmitMatrix};
use crate::linalg::{self, CMat, C64};
use crate::nc::{build_nc_operators, BasisSet, NcOperators, SmootherState};
use crate::spectral::{
    band_center, closed_form_sir, converged_sir, oversample_frame, shift_frequency, sidelobe_level,
    theoretical_power_curves, PsdEstimate, SirAccumulator, WelchAccumulator,
};
use crate::transceiver::{demodulation_matrix, frame, unframe, Demodulator, RecoveryConfig, SignalRecovery};

/// Noise variance per complex sample for unit-energy symbols at `ebn0_db`.
pub fn ebn0_to_noise_variance(p: &ValidatedParams, bits_per_symbol: usize, ebn0_db: f64) -> f64 {
    if ebn0_db == f64::INFINITY {
        return 0.0;
    }
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    let n = p.n() as f64;
    (n + p.n_cp as f64) / (n * bits_per_symbol as f64 * ebn0)
}

struct Prepared {
    variant: Variant,
    params: ValidatedParams,
    tx: Arc<TransmitMatrix>,
    ops: Option<NcOperators>,
}

/// Builds every variant, sharing transmit matrices between variants that
/// only differ in the HDO.
fn prepare(cfg: &ExperimentConfig) -> Result<Vec<Prepared>> {
    let mut cache: BTreeMap<(usize, usize, u64, bool), Arc<TransmitMatrix>> = BTreeMap::new();
    let mut out = Vec::new();
    for variant in cfg.variants.list() {
        let params = variant.params(cfg)?;
        let g = prototype_filter(&params)?;
        let key = (params.k, params.m, params.beta.to_bits(), params.is_dirichlet());
        let tx = match cache.get(&key) {
            Some(tx) => tx.clone(),
            None => {
                let tx = Arc::new(build_transmit_matrix(&g, &params)?);
                cache.insert(key, tx.clone());
                tx
            }
        };
        let ops = if variant.smoothed() {
            Some(build_nc_operators(&tx, &BasisSet::new(&g, &params), &params)?)
        } else {
            None
        };
        out.push(Prepared {
            variant,
            params,
            tx,
            ops,
        });
    }
    Ok(out)
}

/// Output of [`run_psd`]: the per-variant spectra and their sidelobe table.
#[derive(Debug, Clone)]
pub struct PsdRun {
    pub spectra: Vec<(Variant, PsdEstimate)>,
    pub sidelobes: ResultTable,
}

impl PsdRun {
    /// Level of `variant` at `offset` subcarrier spacings beyond the band edge.
    pub fn level(&self, variant: Variant, offset: f64) -> Option<f64> {
        let label = variant.label();
        let iv = self.sidelobes.column_index("variant").ok()?;
        let io = self.sidelobes.column_index("offset_spacings").ok()?;
        let il = self.sidelobes.column_index("level_db").ok()?;
        self.sidelobes
            .rows
            .iter()
            .find(|r| r[iv].as_str() == Some(label.as_str()) && r[io].as_f64() == Some(offset))
            .and_then(|r| r[il].as_f64())
    }

    /// One `(freq, psd_db)` table per variant followed by the sidelobe table.
    pub fn tables(&self) -> Vec<ResultTable> {
        let mut out: Vec<ResultTable> = self
            .spectra
            .iter()
            .map(|(v, psd)| {
                let mut t = ResultTable::new(
                    format!("psd-{}", v.label()),
                    &["freq", "psd_db"],
                    self.sidelobes.provenance.clone(),
                );
                for (f, p) in psd.freqs.iter().zip(&psd.psd_db) {
                    t.push(vec![(*f).into(), (*p).into()]);
                }
                t
            })
            .collect();
        out.push(self.sidelobes.clone());
        out
    }
}

/// Smoothed (where applicable), oversampled, band-centred transmit stream
/// of every variant pushed through a streaming Welch estimator.
pub fn run_psd(cfg: &ExperimentConfig) -> Result<PsdRun> {
    cfg.validate(ExperimentKind::Psd)?;
    let prepared = prepare(cfg)?;
    let c = Constellation::qam16();
    let base = SeededRng::new(cfg.seed);
    let spectra: Vec<(Variant, PsdEstimate)> = prepared
        .par_iter()
        .map(|w| -> Result<(Variant, PsdEstimate)> {
            let (k, m, n, n_cp) = (w.params.k, w.params.m, w.params.n(), w.params.n_cp);
            let l = w.params.oversample;
            let shift = band_center(n, l);
            let mut rng = base.child(0);
            let mut state = SmootherState::new(n);
            let mut acc = WelchAccumulator::new(cfg.psd.welch())?;
            let mut t = 0u64;
            for _ in 0..cfg.psd.symbols {
                let (_, grid) = random_grid(&mut rng, &c, k, m);
                let x = match &w.ops {
                    Some(ops) => w.tx.modulate(&ops.smooth_data(&mut state, grid.as_slice())),
                    None => w.tx.modulate(grid.as_slice()),
                };
                let mut f = oversample_frame(&x, n_cp, l)?;
                shift_frequency(&mut f, shift, t);
                t += f.len() as u64;
                acc.push(&f);
            }
            Ok((w.variant, acc.finish(0.5 / l as f64)?))
        })
        .collect::<Result<_>>()?;

    let prov = Provenance::new(cfg, "psd")?;
    let mut sidelobes = ResultTable::new(
        "psd-sidelobes",
        &["variant", "offset_spacings", "offset_norm", "level_db"],
        prov,
    );
    for (w, (variant, psd)) in prepared.iter().zip(&spectra) {
        let spacing = 1.0 / (w.params.k * w.params.oversample) as f64;
        for &off in &cfg.psd.offsets {
            let level = sidelobe_level(psd, off * spacing)?;
            sidelobes.push(vec![
                variant.label().into(),
                off.into(),
                (off * spacing).into(),
                level.into(),
            ]);
        }
    }
    Ok(PsdRun { spectra, sidelobes })
}

#[derive(Default, Clone, Copy)]
struct Counts {
    bits: u64,
    errors: u64,
    errors_linear: u64,
}

fn count_errors(c: &Constellation, sent: &[u8], decisions: &[usize]) -> u64 {
    let bps = c.bits_per_symbol();
    decisions
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            c.label(d)
                .iter()
                .zip(&sent[i * bps..(i + 1) * bps])
                .filter(|(a, b)| a != b)
                .count() as u64
        })
        .sum()
}

/// Monte-Carlo BER of every variant over the Eb/N0 grid.
///
/// Columns: `snr_db, variant, receiver, ber, bit_errors, bits, noise_variance`.
/// Smoothed variants report `receiver = recovery` and, when enabled,
/// `receiver = linear` for the same received blocks decoded without it.
pub fn run_ber(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate(ExperimentKind::Ber)?;
    let prepared = prepare(cfg)?;
    let c = Constellation::qam16();
    let bps = c.bits_per_symbol();
    let base = SeededRng::new(cfg.seed);
    let profile = cfg.channel.profile();
    let prov = Provenance::new(cfg, "ber")?.with_snr_convention();
    let mut table = ResultTable::new(
        "ber",
        &[
            "snr_db",
            "variant",
            "receiver",
            "ber",
            "bit_errors",
            "bits",
            "noise_variance",
        ],
        prov,
    );
    let bc = &cfg.ber;

    for (si, &snr_db) in bc.snr_db.iter().enumerate() {
        for w in &prepared {
            let (k, m, n, n_cp) = (w.params.k, w.params.m, w.params.n(), w.params.n_cp);
            let sigma2 = match cfg.channel.kind {
                ChannelKind::None => 0.0,
                _ => ebn0_to_noise_variance(&w.params, bps, snr_db),
            };
            let linear: Option<CMat> = match bc.demodulator {
                Demodulator::Mmse => Some(demodulation_matrix(&w.tx, Demodulator::Mmse, sigma2)?),
                _ => None,
            };
            let recovery = match &w.ops {
                Some(ops) => Some(SignalRecovery::new(
                    ops,
                    &w.tx,
                    RecoveryConfig {
                        iterations: bc.iterations,
                        demodulator: bc.demodulator,
                        noise_variance: sigma2,
                    },
                )?),
                None => None,
            };
            let bits_per_stream = (bc.stream_symbols * n * bps) as u64;
            let streams = (bc.bits as u64).div_ceil(bits_per_stream);

            let per_stream: Vec<Counts> = (0..streams)
                .into_par_iter()
                .map(|s| -> Result<Counts> {
                    let mut rng = base.child(((si as u64) << 32) | s);
                    let fading = match cfg.channel.kind {
                        ChannelKind::Eva => Some(FadingProcess::new(&profile, &mut rng)?),
                        _ => None,
                    };
                    let mut conv = StreamConvolver::new();
                    let mut state = SmootherState::new(n);
                    let mut counts = Counts::default();
                    for i in 0..bc.stream_symbols {
                        let (bits, grid) = random_grid(&mut rng, &c, k, m);
                        let x = match &w.ops {
                            Some(ops) => w.tx.modulate(&ops.smooth_data(&mut state, grid.as_slice())),
                            None => w.tx.modulate(grid.as_slice()),
                        };
                        let framed = frame(&x, n_cp)?.samples();
                        let (h, mut y) = match &fading {
                            Some(f) => {
                                let h = f.realization(i, n, n_cp)?;
                                let y = conv.push(&h, &framed);
                                (h, y)
                            }
                            None => (ChannelRealization::identity(n), framed),
                        };
                        if sigma2 > 0.0 {
                            add_awgn(&mut y, sigma2, &mut rng);
                        }
                        let core = unframe(&y, n, n_cp)?;
                        let eq = if fading.is_some() {
                            zf_equalize(&h, &core)?
                        } else {
                            core
                        };

                        let soft = match (bc.demodulator, &linear) {
                            (Demodulator::MatchedFilter, _) => w.tx.matched_filter(&eq),
                            (Demodulator::Mmse, Some(d)) => linalg::matvec(d.as_ref(), &eq),
                            _ => w.tx.invert(&eq),
                        };
                        let lin: Vec<usize> = soft.iter().map(|&v| c.decide(v)).collect();
                        counts.errors_linear += count_errors(&c, &bits, &lin);
                        if let Some(r) = &recovery {
                            let out = r.recover(&eq, &c)?;
                            counts.errors += count_errors(&c, &bits, &out.decisions);
                        }
                        counts.bits += bits.len() as u64;
                    }
                    Ok(counts)
                })
                .collect::<Result<_>>()?;

            let total = per_stream.iter().fold(Counts::default(), |a, b| Counts {
                bits: a.bits + b.bits,
                errors: a.errors + b.errors,
                errors_linear: a.errors_linear + b.errors_linear,
            });
            let mut push = |receiver: &str, errors: u64| {
                table.push(vec![
                    snr_db.into(),
                    w.variant.label().into(),
                    receiver.into(),
                    (errors as f64 / total.bits as f64).into(),
                    errors.into(),
                    total.bits.into(),
                    sigma2.into(),
                ]);
            };
            if recovery.is_some() {
                push("recovery", total.errors);
                if bc.without_recovery {
                    push("linear", total.errors_linear);
                }
            } else {
                push("linear", total.errors_linear);
            }
        }
    }
    Ok(table)
}

fn grid_operators(
    cfg: &ExperimentConfig,
    beta: f64,
    hdos: &[usize],
) -> Result<(TransmitMatrix, Vec<(ValidatedParams, NcOperators)>)> {
    let p0 = cfg.grid_params(beta, 0)?;
    let g = prototype_filter(&p0)?;
    let tx = build_transmit_matrix(&g, &p0)?;
    let ops = hdos
        .iter()
        .map(|&hdo| {
            let p = cfg.grid_params(beta, hdo)?;
            let ops = build_nc_operators(&tx, &BasisSet::new(&g, &p), &p)?;
            Ok((p, ops))
        })
        .collect::<Result<_>>()?;
    Ok((tx, ops))
}

/// Data-domain smoothing of one fresh stream; returns the accumulated powers.
fn simulate_sir(ops: &NcOperators, p: &ValidatedParams, symbols: usize, rng: &mut SeededRng) -> SirAccumulator {
    let c = Constellation::qam16();
    let mut state = SmootherState::new(p.n());
    let mut acc = SirAccumulator::new();
    for _ in 0..symbols {
        let (_, grid) = random_grid(rng, &c, p.k, p.m);
        let d = grid.as_slice();
        let d_bar = ops.smooth_data(&mut state, d);
        let corr: Vec<C64> = d_bar.iter().zip(d).map(|(a, b)| a - b).collect();
        acc.push(d, &corr);
    }
    acc
}

fn optional(v: Option<f64>) -> Cell {
    match v {
        Some(x) => x.into(),
        None => "".into(),
    }
}

/// SIR over the `beta x V` grid: recursion plateau, closed form (unitary
/// only) and a Monte-Carlo estimate.
pub fn run_sir(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate(ExperimentKind::Sir)?;
    let sc = &cfg.sir;
    let base = SeededRng::new(cfg.seed);
    let rows: Vec<Vec<Vec<Cell>>> = sc
        .betas
        .par_iter()
        .enumerate()
        .map(|(bi, &beta)| -> Result<Vec<Vec<Cell>>> {
            let (_tx, ops) = grid_operators(cfg, beta, &sc.hdos)?;
            let mut rows = Vec::new();
            for (hi, (p, op)) in ops.iter().enumerate() {
                let (index, plateau) = converged_sir(op, 0.01, sc.max_index)?;
                let curves = theoretical_power_curves(op, index)?;
                let empirical = if sc.symbols > 0 {
                    let mut rng = base.child(((bi as u64) << 32) | hi as u64);
                    Some(simulate_sir(op, p, sc.symbols, &mut rng).sir_db()?)
                } else {
                    None
                };
                rows.push(vec![
                    beta.into(),
                    p.hdo.into(),
                    p.n().into(),
                    plateau.into(),
                    index.into(),
                    (10.0 * curves.smooth_power[index].log10()).into(),
                    optional(closed_form_sir(p).ok()),
                    optional(empirical),
                ]);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut table = ResultTable::new(
        "sir",
        &[
            "beta",
            "hdo",
            "n",
            "theory_sir_db",
            "plateau_index",
            "smooth_power_db",
            "closed_form_db",
            "empirical_sir_db",
        ],
        Provenance::new(cfg, "sir")?,
    );
    for r in rows.into_iter().flatten() {
        table.push(r);
    }
    Ok(table)
}

/// Per-symbol data and smooth-signal power versus symbol index: the matrix
/// recursion and a Monte-Carlo average over independent streams.
pub fn run_power(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate(ExperimentKind::Power)?;
    let pc = &cfg.power;
    let base = SeededRng::new(cfg.seed);
    let c = Constellation::qam16();
    let len = pc.max_index + 1;
    let mut table = ResultTable::new(
        "power",
        &[
            "beta",
            "hdo",
            "index",
            "theory_data_power",
            "theory_smooth_power",
            "theory_sir_db",
            "mc_data_power",
            "mc_smooth_power",
        ],
        Provenance::new(cfg, "power")?,
    );
    for (bi, &beta) in pc.betas.iter().enumerate() {
        let (_tx, ops) = grid_operators(cfg, beta, &pc.hdos)?;
        for (hi, (p, op)) in ops.iter().enumerate() {
            let curves = theoretical_power_curves(op, pc.max_index)?;
            let per_stream: Vec<Vec<(f64, f64)>> = (0..pc.streams as u64)
                .into_par_iter()
                .map(|s| {
                    let tag = ((bi as u64) << 48) | ((hi as u64) << 32) | s;
                    let mut rng = base.child(tag);
                    let mut state = SmootherState::new(p.n());
                    (0..len)
                        .map(|_| {
                            let (_, grid) = random_grid(&mut rng, &c, p.k, p.m);
                            let d = grid.as_slice();
                            let d_bar = op.smooth_data(&mut state, d);
                            let corr: f64 = d_bar.iter().zip(d).map(|(a, b)| (a - b).norm_sqr()).sum();
                            (linalg::energy(&d_bar), corr)
                        })
                        .collect()
                })
                .collect();
            let mut mc = vec![(0.0, 0.0); len];
            for stream in &per_stream {
                for (acc, v) in mc.iter_mut().zip(stream) {
                    acc.0 += v.0;
                    acc.1 += v.1;
                }
            }
            let count = pc.streams.max(1) as f64;
            let n = p.n() as f64;
            for i in 0..len {
                let smooth = curves.smooth_power[i];
                let sir = if smooth > 0.0 {
                    10.0 * (n / smooth).log10()
                } else {
                    f64::INFINITY
                };
                let (mc_data, mc_smooth) = if pc.streams > 0 {
                    (Some(mc[i].0 / count), Some(mc[i].1 / count))
                } else {
                    (None, None)
                };
                table.push(vec![
                    beta.into(),
                    p.hdo.into(),
                    i.into(),
                    curves.data_power[i].into(),
                    smooth.into(),
                    sir.into(),
                    optional(mc_data),
                    optional(mc_smooth),
                ]);
            }
        }
    }
    Ok(table)
}
