//! Test D on the 16-bin oversampled grid, with the per-knot trace.

use sparse_doa::detector::{DetectOptions, Detector};
use sparse_doa::signal_model::{build_array_model, synthesize, ArrayConfig, GridMode, Scenario};
use sparse_doa::stat_tests::{DSpectrum, NoiseLevel, TestKind};

fn main() -> Result<(), sparse_doa::Error> {
    let model = build_array_model(&ArrayConfig::new(8, 16), GridMode::Oversampled)?;
    let scen = Scenario::on_grid(vec![6, 9], 25.0);
    let b = synthesize(&model, &scen, 5)?.measurement();
    let noise = NoiseLevel::from_variance(scen.noise_variance(&model))?;

    for spectrum in [DSpectrum::InactiveGram, DSpectrum::Projector] {
        let opts = DetectOptions::new(TestKind::D, 0.99).with_noise(noise).with_d_spectrum(spectrum);
        let r = Detector::new(model.clone(), opts)?.detect(&b)?;
        println!("{spectrum:?}: s_hat = {}, support = {:?} (truth {:?})", r.s_hat, r.support, scen.source_indices);
        for t in &r.trace {
            println!(
                "  knot {}  tau = {:.4}  D = {:8.3}  eta = {:7.3}  {}",
                t.knot,
                t.tau,
                t.statistic,
                t.threshold,
                if t.reject { "signal" } else { "noise" }
            );
        }
    }
    Ok(())
}
