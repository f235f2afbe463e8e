//! Modal Green's function of the Robin disk and the precomputed kernel table.
//!
//! `cargo run --example greens_kernel [out_dir]`

use rytov::greens::{build_greens_table, d_coefficient, g_mode, g_mode_dr, u0_boundary};
use rytov::model::{make_grid, ProblemConfig};

fn main() -> rytov::Result<()> {
    let cfg = ProblemConfig::disk_benchmark(0.0);
    let r = cfg.radius;

    println!("alpha  u0 = g(R,R)          d_alpha              Robin residual at r'=1");
    for alpha in [1u32, 2, 5, 10, 30, 90] {
        let n = alpha as i64;
        let res = g_mode(n, r, 1.0, &cfg)? + cfg.robin_length * g_mode_dr(n, r, 1.0, &cfg)?;
        println!(
            "{alpha:>5}  {:<20.12e} {:<20.12e} {:.2e}",
            u0_boundary(alpha, &cfg)?,
            d_coefficient(alpha, &cfg)?,
            res.abs()
        );
    }

    // symmetric in (r, r')
    let (a, b) = (g_mode(3, 0.7, 2.1, &cfg)?, g_mode(3, 2.1, 0.7, &cfg)?);
    println!("\ng_3(0.7, 2.1) = {a:.15e}\ng_3(2.1, 0.7) = {b:.15e}");

    let grid = make_grid(&cfg)?;
    let start = std::time::Instant::now();
    let table = build_greens_table(&cfg, &grid)?;
    println!(
        "\nkernel table: {} modes x {}^2 entries in {:.1} ms",
        table.n_sources(),
        table.n_radial(),
        start.elapsed().as_secs_f64() * 1e3
    );

    if let Some(dir) = std::env::args().nth(1) {
        let files = table.dump_csv(&dir)?;
        println!("wrote {} files to {dir}", files.len());
    }
    Ok(())
}
