use std::sync::OnceLock;

use ncgfdm::linalg::{self, c};
use ncgfdm::transceiver::serialize;
use ncgfdm::{
    apply_channel, demap, frame, hard_decision, map_bits, nc_setup, unframe, validate_params, zf_equalize,
    ChannelRealization, Constellation, NcOperators, SmootherState, StreamConvolver, TransmitMatrix, WaveformParams,
    WelchAccumulator, WelchConfig, WindowKind, C64,
};
use proptest::prelude::*;

fn cplx() -> impl Strategy<Value = C64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| c(re, im))
}

fn cvec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(cplx(), n)
}

fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

struct Setup {
    tx: TransmitMatrix,
    ops: NcOperators,
}

/// Non-unitary RC pulse with an odd M, and a unitary Dirichlet case.
fn setups() -> &'static [Setup; 2] {
    static S: OnceLock<[Setup; 2]> = OnceLock::new();
    S.get_or_init(|| {
        let mk = |p: WaveformParams| {
            let (tx, ops) = nc_setup(&validate_params(p).unwrap()).unwrap();
            Setup { tx, ops }
        };
        [
            mk(WaveformParams::new(8, 5, 6, 0.3, 2)),
            mk(WaveformParams::new(8, 4, 5, 0.0, 3)),
        ]
    })
}

fn constellation(qam: bool) -> Constellation {
    if qam {
        Constellation::qam16()
    } else {
        Constellation::qpsk()
    }
}

proptest! {
    #[test]
    fn bits_survive_map_and_demap(qam in any::<bool>(), seed in prop::collection::vec(0u8..2, 160)) {
        let cst = constellation(qam);
        let n_bits = 8 * 5 * cst.bits_per_symbol();
        let bits: Vec<u8> = seed.iter().cycle().take(n_bits).copied().collect();
        let grid = map_bits(&bits, &cst, 8, 5).unwrap();
        prop_assert_eq!(demap(grid.as_slice(), &cst), bits);
    }

    #[test]
    fn hard_decision_is_idempotent(qam in any::<bool>(), y in cplx()) {
        let cst = constellation(qam);
        let once = hard_decision(y, &cst);
        prop_assert_eq!(hard_decision(once, &cst), once);
        prop_assert!(cst.points().contains(&once));
    }

    #[test]
    fn framing_round_trips(core in cvec(24), n_cp in 0usize..=24) {
        let f = frame(&core, n_cp).unwrap();
        prop_assert_eq!(f.len(), core.len() + n_cp);
        prop_assert_eq!(unframe(&f.samples(), core.len(), n_cp).unwrap(), core);
    }

    #[test]
    fn equalizer_inverts_channel(x in cvec(32), taps in cvec(4)) {
        let mut t = vec![c(3.0, 0.0)];
        t.extend(taps);
        let h = ChannelRealization::from_paths(&t.iter().copied().enumerate().collect::<Vec<_>>(), 32).unwrap();
        prop_assume!(h.h_diag().iter().all(|v| v.norm() > 1e-3));
        let y = apply_channel(&h, &x).unwrap();
        prop_assert!(max_abs_diff(&zf_equalize(&h, &y).unwrap(), &x) < 1e-9);
    }

    #[test]
    fn cp_turns_stream_convolution_circular(cores in prop::collection::vec(cvec(16), 3), taps in cvec(3)) {
        let h = ChannelRealization::from_paths(&taps.iter().copied().enumerate().collect::<Vec<_>>(), 16).unwrap();
        let n_cp = 4;
        let mut conv = StreamConvolver::new();
        for core in &cores {
            let f = frame(core, n_cp).unwrap();
            let rx = unframe(&conv.push(&h, &f.samples()), 16, n_cp).unwrap();
            prop_assert!(max_abs_diff(&rx, &apply_channel(&h, core).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn fast_modulation_matches_dense(which in 0usize..2, d in cvec(40)) {
        let s = &setups()[which];
        let d = &d[..s.tx.n()];
        let x = s.tx.modulate(d);
        prop_assert!(max_abs_diff(&x, &linalg::matvec(s.tx.a().as_ref(), d)) < 1e-10);
        prop_assert!(max_abs_diff(&s.tx.invert(&x), d) < 1e-9);
        let mf = linalg::matvec(linalg::adjoint(s.tx.a().as_ref()).as_ref(), &x);
        prop_assert!(max_abs_diff(&s.tx.matched_filter(&x), &mf) < 1e-10);
    }

    #[test]
    fn projector_is_idempotent_on_data(which in 0usize..2, d in cvec(40)) {
        let s = &setups()[which];
        let pt = s.ops.p_tilde();
        let once = linalg::matvec(pt.as_ref(), &d[..s.tx.n()]);
        let twice = linalg::matvec(pt.as_ref(), &once);
        let scale = linalg::energy(&d).sqrt();
        prop_assert!(max_abs_diff(&once, &twice) <= 1e-8 * scale);
    }

    #[test]
    fn welch_scales_with_power(x in cvec(300), gain in 0.1f64..10.0, phase in 0.0..std::f64::consts::TAU) {
        let cfg = WelchConfig::new(64, 16, WindowKind::Hann);
        let psd = |s: &[C64]| {
            let mut acc = WelchAccumulator::new(cfg).unwrap();
            acc.push(s);
            acc.linear_psd().unwrap()
        };
        let g = C64::from_polar(gain, phase);
        let scaled: Vec<C64> = x.iter().map(|v| v * g).collect();
        for (a, b) in psd(&x).iter().zip(psd(&scaled)) {
            prop_assert!((a * gain * gain - b).abs() <= 1e-9 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn smoothed_stream_is_continuous(which in 0usize..2, blocks in prop::collection::vec(cvec(40), 3)) {
        let s = &setups()[which];
        let n = s.tx.n();
        let mut state = SmootherState::new(n);
        let mut prev: Option<Vec<C64>> = None;
        for b in &blocks {
            let d_bar = s.ops.smooth_data(&mut state, &b[..n]);
            if let Some(p) = &prev {
                let gap = s.ops.boundary_mismatch(p, &d_bar);
                let scale = linalg::energy(p).max(linalg::energy(&d_bar)).sqrt();
                prop_assert!(gap.iter().all(|g| g.norm() <= 1e-8 * scale), "{gap:?}");
            }
            prev = Some(d_bar);
        }
        prop_assert_eq!(state.index(), 3);
    }

    #[test]
    fn cloned_state_resumes_the_stream(which in 0usize..2, blocks in prop::collection::vec(cvec(40), 4)) {
        let s = &setups()[which];
        let n = s.tx.n();
        let mut whole = SmootherState::new(n);
        let all: Vec<Vec<C64>> = blocks.iter().map(|b| s.ops.smooth_data(&mut whole, &b[..n])).collect();
        let mut resumed = SmootherState::new(n);
        for b in &blocks[..2] {
            s.ops.smooth_data(&mut resumed, &b[..n]);
        }
        let mut cloned = resumed.clone();
        for (i, b) in blocks[2..].iter().enumerate() {
            let d_bar = s.ops.smooth_data(&mut cloned, &b[..n]);
            prop_assert_eq!(&d_bar, &all[i + 2]);
        }
    }
}

#[test]
fn serialized_frames_keep_order() {
    let a = frame(&[c(1.0, 0.0), c(2.0, 0.0)], 1).unwrap();
    let b = frame(&[c(3.0, 0.0), c(4.0, 0.0)], 1).unwrap();
    let s = serialize(&[a, b]);
    let re: Vec<f64> = s.iter().map(|v| v.re).collect();
    assert_eq!(re, vec![2.0, 1.0, 2.0, 4.0, 3.0, 4.0]);
}
