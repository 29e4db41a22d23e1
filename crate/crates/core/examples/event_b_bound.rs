//! Marcum-Q lower bound on P(B) next to its simulated value, one source.

use sparse_doa::detector::{score, DetectOptions, Detector};
use sparse_doa::signal_model::{build_array_model, synthesize, ArrayConfig, GridMode, Scenario};
use sparse_doa::stat_tests::{event_b_bound_best, NoiseLevel, TestKind};

fn main() -> Result<(), sparse_doa::Error> {
    let model = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal)?;
    let trials = 4000;
    println!("SNR  bound   simulated");
    for snr in [5.0, 10.0, 15.0, 20.0, 25.0] {
        let scen = Scenario::on_grid(vec![3], snr);
        let noise = NoiseLevel::from_variance(scen.noise_variance(&model))?;
        let theta = scen.weights[0].norm() / noise.quadrature_std();
        let (bound, _) = event_b_bound_best(theta, 1, 8);
        let mut det = Detector::new(model.clone(), DetectOptions::new(TestKind::B, 0.99).with_noise(noise).with_min_path_entries(1))?;
        let mut hits = 0;
        for seed in 0..trials {
            let r = det.detect(&synthesize(&model, &scen, seed)?.measurement())?;
            hits += score(&r, &scen).event_b as usize;
        }
        println!("{snr:>3}  {bound:.4}  {:.4}", hits as f64 / trials as f64);
    }
    Ok(())
}
