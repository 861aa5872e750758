//! Shared fixtures for the criterion benches.

use ncgfdm::{
    nc_setup, random_grid, validate_params, Constellation, NcOperators, SeededRng, TransmitMatrix, ValidatedParams,
    WaveformParams, C64,
};

/// Validated parameters for `(K, M)` with the default CP ratio and `beta = 0.1`.
pub fn params(k: usize, m: usize, hdo: usize) -> ValidatedParams {
    let n_cp = (280 * k * m).div_ceil(1792);
    validate_params(WaveformParams::new(k, m, n_cp, 0.1, hdo)).expect("bench parameters are valid")
}

pub struct Fixture {
    pub params: ValidatedParams,
    pub tx: TransmitMatrix,
    pub ops: NcOperators,
    /// A few random 16QAM blocks.
    pub blocks: Vec<Vec<C64>>,
}

pub fn fixture(k: usize, m: usize, hdo: usize) -> Fixture {
    let params = params(k, m, hdo);
    let (tx, ops) = nc_setup(&params).expect("bench operators build");
    let mut rng = SeededRng::new(7);
    let c = Constellation::qam16();
    let blocks = (0..8).map(|_| random_grid(&mut rng, &c, k, m).1.into_vec()).collect();
    Fixture {
        params,
        tx,
        ops,
        blocks,
    }
}
