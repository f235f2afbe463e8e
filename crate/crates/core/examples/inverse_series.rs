//! Inverse Rytov series term by term, with the compositions each order expands into.
//!
//! `cargo run --release --example inverse_series [eta_a]`

use rytov::forward::exact_boundary_data;
use rytov::greens::build_greens_table;
use rytov::inversion::{assemble_j1, build_tsvd, InverseSeries};
use rytov::model::{make_grid, ProblemConfig, SvPolicy};

fn main() -> rytov::Result<()> {
    let eta_a: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let cfg = ProblemConfig::disk_benchmark(eta_a);
    let grid = make_grid(&cfg)?;
    let table = build_greens_table(&cfg, &grid)?;
    let inv = build_tsvd(&assemble_j1(&table), SvPolicy::Count(23))?;
    let psi = exact_boundary_data(&cfg)?;

    let mut series = InverseSeries::new(&inv, &table);
    for j in 1..=4 {
        let args = vec![&psi; j];
        let (term, trace) = series.evaluate_traced(&args)?;
        let parts: Vec<String> = trace.iter().map(|c| format!("{:?}", c.parts)).collect();
        let size = term.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!("order {j}: max|term| = {size:.4e}, forward calls so far {}", series.forward_calls());
        if !parts.is_empty() {
            println!("         expands over {}", parts.join(" "));
        }
    }
    Ok(())
}
