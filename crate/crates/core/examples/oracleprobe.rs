// probe: grid-l1 oracle convergence on criterion-1-style instances
#[path = "../tests/common/mod.rs"]
mod common;

use common::{data_of, grid_l1_norm};
use manm2d::model::{sample_amplitude, sample_separated_frequencies, AmplitudeScheme, SpectralModel};
use manm2d::rng::stream_rng;

fn main() {
    for i in [0u64, 1, 2, 7, 13] {
        let k = 1 + (i as usize % 3);
        let mut rng = stream_rng(1000 + i, 0);
        let freqs = sample_separated_frequencies(k, 1.19 / 8.0, &mut rng).unwrap();
        let model = SpectralModel::new(
            freqs.iter().map(|f| (sample_amplitude(AmplitudeScheme::UnitModulusRandomPhase, &mut rng), *f)).collect(),
        ).unwrap();
        let x = data_of(&model, 8, 8);
        let truth = model.amplitude_l1();
        let fr: Vec<(f64,f64)> = model.frequencies().iter().map(|f| (f.fx, f.fy)).collect();
        print!("inst {i} (K={k}, truth {truth:.6}):");
        for iters in [300usize, 600, 1200, 2400] {
            let v = grid_l1_norm(&x, 512, &fr, iters);
            print!("  {iters}it:{:.2e}", (v - truth).abs());
        }
        println!();
    }
}
