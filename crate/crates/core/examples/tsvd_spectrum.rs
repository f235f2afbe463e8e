//! Singular spectrum of the linearized map and the projector onto its row space.
//!
//! `cargo run --release --example tsvd_spectrum [sv_count]`

use rytov::greens::build_greens_table;
use rytov::inversion::{assemble_j1, build_tsvd, projected_truth};
use rytov::model::{make_grid, true_profile, ProblemConfig, SvPolicy};

fn main() -> rytov::Result<()> {
    let count: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(23);
    let cfg = ProblemConfig::disk_benchmark(1.0);
    let grid = make_grid(&cfg)?;
    let table = build_greens_table(&cfg, &grid)?;
    let map = assemble_j1(&table);
    let inv = build_tsvd(&map, SvPolicy::Count(count))?;

    println!("{:?} branch, {} x {}", inv.branch(), map.rows(), map.cols());
    let s = inv.spectrum();
    for (j, v) in s.iter().enumerate().take(count + 3) {
        let mark = if j < inv.rank() { "*" } else { " " };
        println!("{mark} sigma_{:<3} {v:.6e}  ({:.2e})", j + 1, v / s[0]);
    }

    let eta = true_profile(&cfg, &grid);
    let proj = projected_truth(&eta, &map, &inv)?;
    let again = projected_truth(&proj, &map, &inv)?;
    let drift = proj.values.iter().zip(&again.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("\nprojector idempotence: {drift:.2e}");
    println!("{:>8} {:>10} {:>10}", "r", "eta", "eta_proj");
    for i in (0..grid.len()).step_by(10) {
        println!("{:>8.3} {:>10.4} {:>10.4}", grid.points()[i], eta.values[i], proj.values[i]);
    }
    Ok(())
}
