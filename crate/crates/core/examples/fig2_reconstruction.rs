//! High-contrast reconstructions (eta_a = 2 and 5), where the series stops settling.
//!
//! `cargo run --release --example fig2_reconstruction [out_dir]`

use std::path::PathBuf;

use rytov::cli::{cmd_reconstruct, Common, ReconstructArgs};
use rytov::diagnostics::estimate_mu_nu;
use rytov::greens::build_greens_table;
use rytov::model::{make_grid, true_profile, ProblemConfig};

fn main() -> rytov::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "figures".into()));
    std::fs::create_dir_all(&out)?;
    for (panel, eta_a) in [("fig2_left", 2.0), ("fig2_right", 5.0)] {
        let cfg = ProblemConfig::disk_benchmark(eta_a);
        let cfg_path = out.join(format!("{panel}.cfg"));
        std::fs::write(&cfg_path, cfg.to_config_string())?;
        let manifest = cmd_reconstruct(&ReconstructArgs {
            common: Common { config: cfg_path, sv_count: None, sv_threshold: None },
            data: None,
            synthetic: true,
            order: Some(5),
            noise: None,
            seed: None,
            out: out.clone(),
            panel: panel.into(),
        })?;

        let grid = make_grid(&cfg)?;
        let table = build_greens_table(&cfg, &grid)?;
        let conv = estimate_mu_nu(&cfg, &table, &true_profile(&cfg, &grid))?;
        let errs: Vec<String> =
            manifest.errors.iter().map(|e| format!("{:.4}", e.rel_l2_error_vs_eta_proj)).collect();
        println!("{panel} (eta_a = {eta_a}): errors [{}]", errs.join(", "));
        println!("  forward radius product {:.3} (ok = {})", conv.radius_product(), conv.forward_radius_ok);
        if let Some(d) = &manifest.divergence {
            println!("  term ratio {:.3}, diverging = {}", d.last_term_ratio, d.diverging);
        }
    }
    Ok(())
}
