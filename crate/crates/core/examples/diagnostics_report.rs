//! Convergence-radius estimates and the finite-difference cross-check.
//!
//! `cargo run --release --example diagnostics_report [eta_a]`

use rytov::diagnostics::{estimate_mu_nu, fd_oracle};
use rytov::forward::exact_boundary_data;
use rytov::greens::{build_greens_table, g_mode};
use rytov::model::{make_grid, true_profile, ProblemConfig, ProfileRole, RadialProfile};

fn main() -> rytov::Result<()> {
    let eta_a: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let cfg = ProblemConfig::disk_benchmark(eta_a);
    let grid = make_grid(&cfg)?;
    let table = build_greens_table(&cfg, &grid)?;
    let eta = true_profile(&cfg, &grid);

    let rep = estimate_mu_nu(&cfg, &table, &eta)?;
    println!("mu = {:.5}, nu = {:.4e}, |eta| = {:.4}", rep.mu, rep.nu, rep.eta_norm);
    println!("forward radius product {:.4} -> ok = {}", rep.radius_product(), rep.forward_radius_ok);
    println!("maximizing modes p = {}, q = {}, r = {}", rep.p, rep.q, rep.r);

    let zero = RadialProfile::zeros(ProfileRole::Generic, grid.len());
    let psi = exact_boundary_data(&cfg)?;
    println!("\n{:>5} {:>16} {:>10} {:>16} {:>10}", "alpha", "g(R,R)", "FD dev", "psi", "FD dev");
    for alpha in [1u32, 2, 4, 8, 12] {
        let n = alpha;
        let g = g_mode(n as i64, cfg.radius, cfg.radius, &cfg)?;
        let v0 = fd_oracle(n, &zero, &cfg, 10_000)?;
        let v = fd_oracle(n, &eta, &cfg, 10_000)?;
        let p = psi.values[alpha as usize - 1];
        println!(
            "{alpha:>5} {g:>16.9e} {:>10.2e} {p:>16.9e} {:>10.2e}",
            ((v0 - g) / g).abs(),
            (((v0 / v).ln() - p) / p).abs()
        );
    }
    Ok(())
}
