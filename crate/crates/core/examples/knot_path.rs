//! Lasso knots of one snapshot, closed form against the homotopy solver.

use sparse_doa::lasso_path::{general_knots, orthogonal_knots};
use sparse_doa::signal_model::{build_array_model, synthesize, ArrayConfig, GridMode, Scenario};

fn main() -> Result<(), sparse_doa::Error> {
    let model = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal)?;
    let b = synthesize(&model, &Scenario::on_grid(vec![1, 4, 6], 15.0), 3)?.measurement();
    let closed = orthogonal_knots(&model, &b)?;
    let homotopy = general_knots(&model, &b, 8)?;
    println!("knot  index  tau (closed)  tau (homotopy)");
    for (k, (c, h)) in closed.knots.iter().zip(&homotopy.knots).enumerate() {
        println!("{:>4}  {:>5}  {:>12.6}  {:>14.6}", k + 1, c.entering_index, c.tau, h.tau);
    }

    let over = build_array_model(&ArrayConfig::new(8, 16), GridMode::Oversampled)?;
    let b = synthesize(&over, &Scenario::on_grid(vec![6, 9], 25.0), 3)?.measurement();
    println!("\noversampled path:");
    for (k, knot) in general_knots(&over, &b, 8)?.knots.iter().enumerate() {
        println!("{:>4}  {:?} {:>3}  tau = {:.6}  |J| = {}", k + 1, knot.event, knot.entering_index, knot.tau, knot.active_set.len());
    }
    Ok(())
}
