//! Terms of the forward Rytov series against the exact layered-disk data.
//!
//! `cargo run --release --example rytov_series [eta_a]`

use rytov::forward::exact_boundary_data;
use rytov::greens::build_greens_table;
use rytov::model::{make_grid, true_profile, ProblemConfig};
use rytov::series::{born_k0, born_vector, rytov_series};

fn main() -> rytov::Result<()> {
    let eta_a: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let cfg = ProblemConfig::disk_benchmark(eta_a);
    let grid = make_grid(&cfg)?;
    let table = build_greens_table(&cfg, &grid)?;
    let eta = true_profile(&cfg, &grid);

    let exact = exact_boundary_data(&cfg)?;
    let terms = rytov_series(&eta, 8, &table)?;

    let mut sum = vec![0.0; exact.len()];
    println!("{:>3} {:>12} {:>16}", "j", "max|psi_j|", "max|S_j - psi|");
    for (j, t) in terms.iter().enumerate() {
        sum.iter_mut().zip(&t.values).for_each(|(s, v)| *s += v);
        let size = t.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = sum.iter().zip(&exact.values).fold(0.0f64, |m, (s, e)| m.max((s - e).abs()));
        println!("{:>3} {size:>12.3e} {err:>16.3e}", j + 1);
    }

    // first-order Rytov term is minus the Born ratio
    let k0 = born_k0(&table);
    let k1 = born_vector(&[&eta], &table)?;
    println!("\npsi_1(alpha=1) = {:.15e}", terms[0].values[0]);
    println!("-K1/K0         = {:.15e}", -k1.boundary(1) / k0.boundary(1));
    Ok(())
}
