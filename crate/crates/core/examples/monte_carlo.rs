//! Rerun a published table at a reduced trial count and print the gap.
//!
//! Usage: `cargo run --release --example monte_carlo -- [table] [trials]`

use sparse_doa::montecarlo::{reproduce_table, worst_by_sources};

fn main() -> Result<(), sparse_doa::Error> {
    let args: Vec<String> = std::env::args().collect();
    let table: u8 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let trials: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let (report, cmp) = reproduce_table(table, trials, 1)?;
    println!("table {table}, {trials} trials");
    println!("   S  SNR   published  simulated    diff   +/-95%");
    for c in &cmp {
        println!(
            "{:>4} {:>4}   {:>9.4}  {:>9.4}  {:+.4}  {:.4}",
            c.num_sources, c.snr_db, c.published, c.simulated, c.diff, c.ci_halfwidth
        );
    }
    let wall: f64 = report.rows.iter().map(|r| r.wall_time_s).sum();
    println!("largest |diff| per S: {:?}", worst_by_sources(&cmp));
    println!("wall time {wall:.1} s");
    Ok(())
}
