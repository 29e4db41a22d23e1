//! Threshold tables for M = 8 at pc = 0.99, and a D threshold on the
//! oversampled grid.

use sparse_doa::signal_model::{build_array_model, ArrayConfig, GridMode};
use sparse_doa::stat_tests::TestKind;
use sparse_doa::thresholds::{build_table, ActiveSetThresholds};

fn main() -> Result<(), sparse_doa::Error> {
    let model = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal)?;
    let tests = [TestKind::CovExact, TestKind::CovAsymptotic, TestKind::A, TestKind::B, TestKind::C];
    print!("knot");
    for t in tests {
        print!("{:>12}", t.name());
    }
    println!();
    let tables: Vec<_> = tests.iter().map(|&t| build_table(t, &model, 0.99)).collect::<Result<_, _>>()?;
    for k in 1..=8 {
        print!("{k:>4}");
        for tab in &tables {
            match tab.eta_at(k) {
                Some(eta) => print!("{eta:>12.4}"),
                None => print!("{:>12}", "-"),
            }
        }
        println!();
    }

    let over = build_array_model(&ArrayConfig::new(8, 16), GridMode::Oversampled)?;
    let mut d = ActiveSetThresholds::new(TestKind::D, &over, 0.99)?;
    for active in [vec![], vec![8], vec![6, 9]] {
        println!("D threshold, active {:?}: {:.4}", active, d.eta(&active)?);
    }
    Ok(())
}
