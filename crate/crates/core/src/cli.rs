//! Command implementations behind the `rytov` binary: `forward`,
//! `reconstruct`, `diagnose`.
//!
//! Every command writes plain CSV (header first, `\n` line endings, 17
//! significant digits) plus a JSON manifest next to it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::diagnostics::{estimate_mu_nu, fd_oracle, rel_l2_error, ConvergenceReport};
use crate::error::{Error, Result};
use crate::forward::{add_noise, boundary_fields, exact_boundary_data, log_ratio, PRNG_ALGORITHM};
use crate::greens::build_greens_table;
use crate::inversion::{assemble_j1, build_tsvd, projected_truth, reconstruct_with, DivergenceReport};
use crate::model::{make_grid, true_profile, BoundaryData, ProblemConfig, ProfileRole, RadialProfile, SvPolicy};

/// Largest reconstruction order accepted on the command line.
pub const MAX_CLI_ORDER: usize = 8;
pub const DEFAULT_FD_POINTS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "rytov", version, about = "Inverse Rytov series reconstruction in a radial disk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write exact (optionally noisy) boundary data.
    Forward(ForwardArgs),
    /// Reconstruct η from boundary data.
    Reconstruct(ReconstructArgs),
    /// Convergence-radius estimates and finite-difference oracle comparison.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Override `sv_count`.
    #[arg(long, conflicts_with = "sv_threshold")]
    pub sv_count: Option<usize>,
    /// Override `sv_threshold`.
    #[arg(long)]
    pub sv_threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ForwardArgs {
    #[command(flatten)]
    pub common: Common,
    /// Noise level γ (overrides `gamma`).
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    /// Data CSV as written by `forward`; the last column is used.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub data: Option<PathBuf>,
    /// Generate the data in-process from the configuration.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// File stem, e.g. `fig1_left`.
    #[arg(long, default_value = "reconstruction")]
    pub panel: String,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = DEFAULT_FD_POINTS)]
    pub fd_points: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also dump the kernel tables as CSV into this directory.
    #[arg(long)]
    pub dump_greens: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ProblemConfig,
    pub config_text: String,
    pub prng_algorithm: String,
    pub seed: u64,
    pub noise_level: f64,
    pub singular_values: Vec<f64>,
    pub errors: Vec<OrderError>,
    pub divergence: Option<DivergenceReport>,
    pub convergence: Option<ConvergenceReport>,
    pub timings_ms: BTreeMap<String, f64>,
    pub outputs: Vec<PathBuf>,
    pub revision: String,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrderError {
    pub order: usize,
    pub rel_l2_error_vs_eta_proj: f64,
}

impl RunManifest {
    fn new(command: &str, cfg: &ProblemConfig) -> Self {
        RunManifest {
            command: command.into(),
            config: cfg.clone(),
            config_text: cfg.to_config_string(),
            prng_algorithm: PRNG_ALGORITHM.into(),
            seed: cfg.seed,
            noise_level: cfg.noise_level,
            singular_values: Vec::new(),
            errors: Vec::new(),
            divergence: None,
            convergence: None,
            timings_ms: BTreeMap::new(),
            outputs: Vec::new(),
            revision: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
        }
    }

    fn time(&mut self, label: &str, start: Instant) {
        self.timings_ms.insert(label.into(), start.elapsed().as_secs_f64() * 1e3);
    }

    fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// 17 significant digits, round-trip exact.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn load_config(c: &Common) -> Result<ProblemConfig> {
    let mut cfg = ProblemConfig::load(&c.config)?;
    match (c.sv_count, c.sv_threshold) {
        (Some(_), Some(_)) => return Err(Error::Config("--sv-count and --sv-threshold are mutually exclusive".into())),
        (Some(n), None) => cfg.sv_policy = SvPolicy::Count(n),
        (None, Some(t)) => cfg.sv_policy = SvPolicy::Threshold(t),
        (None, None) => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_noise_flags(cfg: &mut ProblemConfig, noise: Option<f64>, seed: Option<u64>) -> Result<()> {
    if let Some(g) = noise {
        cfg.noise_level = g;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()
}

fn write_lines(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Clean data and, when `γ > 0`, data from noisy intensities.
pub fn synthetic_data(cfg: &ProblemConfig) -> Result<(BoundaryData, Option<BoundaryData>)> {
    let clean = exact_boundary_data(cfg)?;
    if cfg.noise_level == 0.0 {
        return Ok((clean, None));
    }
    let (u0, u) = boundary_fields(cfg)?;
    let noisy = add_noise(&u0, &u, cfg.noise_level, cfg.seed)?;
    Ok((clean, Some(log_ratio(&noisy.u0, &noisy.u)?)))
}

pub fn cmd_forward(args: &ForwardArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let mut cfg = load_config(&args.common)?;
    apply_noise_flags(&mut cfg, args.noise, args.seed)?;
    let mut manifest = RunManifest::new("forward", &cfg);
    let (clean, noisy) = synthetic_data(&cfg)?;
    let mut csv = String::new();
    match &noisy {
        None => {
            csv.push_str("alpha,psi\n");
            for (a, v) in clean.values.iter().enumerate() {
                let _ = writeln!(csv, "{},{}", a + 1, fmt_num(*v));
            }
        }
        Some(n) => {
            csv.push_str("alpha,psi_clean,psi_noisy\n");
            for (a, (c, v)) in clean.values.iter().zip(&n.values).enumerate() {
                let _ = writeln!(csv, "{},{},{}", a + 1, fmt_num(*c), fmt_num(*v));
            }
        }
    }
    write_lines(&args.out, &csv)?;
    manifest.outputs.push(args.out.clone());
    manifest.time("total", start);
    manifest.write(&manifest_path(&args.out))?;
    Ok(manifest)
}

/// Reads a data CSV (header row, first column `alpha`, last column used).
pub fn read_data_csv(path: &Path) -> Result<BoundaryData> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    if !header.starts_with("alpha") {
        return Err(Error::Data(format!("{}: expected header starting with `alpha`", path.display())));
    }
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let field = line.rsplit(',').next().unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .map_err(|_| Error::Data(format!("{}: row {}: cannot parse {field:?}", path.display(), i + 2)))?;
        values.push(v);
    }
    Ok(BoundaryData::new(values))
}

pub fn cmd_reconstruct(args: &ReconstructArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let mut cfg = load_config(&args.common)?;
    apply_noise_flags(&mut cfg, args.noise, args.seed)?;
    if let Some(n) = args.order {
        cfg.order = n;
    }
    if cfg.order == 0 || cfg.order > MAX_CLI_ORDER {
        return Err(Error::Config(format!("order must be in 1..={MAX_CLI_ORDER}, got {}", cfg.order)));
    }
    let mut manifest = RunManifest::new("reconstruct", &cfg);

    let psi = match (&args.data, args.synthetic) {
        (Some(p), false) => read_data_csv(p)?,
        (None, true) => {
            let (clean, noisy) = synthetic_data(&cfg)?;
            noisy.unwrap_or(clean)
        }
        _ => return Err(Error::Config("exactly one of --data or --synthetic is required".into())),
    };
    if psi.len() != cfg.n_sources {
        return Err(Error::Dimension { what: "data vs M_SD", expected: cfg.n_sources, got: psi.len() });
    }

    let t = Instant::now();
    let grid = make_grid(&cfg)?;
    let table = build_greens_table(&cfg, &grid)?;
    manifest.time("greens", t);
    let t = Instant::now();
    let map = assemble_j1(&table);
    let inv = build_tsvd(&map, cfg.sv_policy)?;
    manifest.singular_values = inv.retained();
    manifest.time("tsvd", t);

    let t = Instant::now();
    let rec = reconstruct_with(&psi, cfg.order, &inv, &table)?;
    manifest.time("series", t);

    let eta_true = true_profile(&cfg, &grid);
    let eta_proj = projected_truth(&eta_true, &map, &inv)?;
    manifest.errors = rec
        .partial_sums
        .iter()
        .enumerate()
        .map(|(j, p)| OrderError { order: j + 1, rel_l2_error_vs_eta_proj: rel_l2_error(p, &eta_proj, &grid) })
        .collect();
    manifest.divergence = Some(rec.divergence.clone());

    std::fs::create_dir_all(&args.out)?;
    let n = cfg.order;
    let mut csv = String::from("r,eta_true,eta_proj");
    for j in 1..=n {
        let _ = write!(csv, ",eta_sum_{j}");
    }
    let _ = writeln!(csv, ",mu_a_{n}");
    for (i, r) in grid.points().iter().enumerate() {
        let _ = write!(csv, "{},{},{}", fmt_num(*r), fmt_num(eta_true.values[i]), fmt_num(eta_proj.values[i]));
        for p in &rec.partial_sums {
            let _ = write!(csv, ",{}", fmt_num(p.values[i]));
        }
        let _ = writeln!(csv, ",{}", fmt_num(rec.mu_a.values[i]));
    }
    let recon_path = args.out.join(format!("{}.csv", args.panel));
    write_lines(&recon_path, &csv)?;

    let mut err_csv = String::from("order,rel_l2_error_vs_eta_proj\n");
    for e in &manifest.errors {
        let _ = writeln!(err_csv, "{},{}", e.order, fmt_num(e.rel_l2_error_vs_eta_proj));
    }
    let err_path = args.out.join(format!("{}_errors.csv", args.panel));
    write_lines(&err_path, &err_csv)?;

    manifest.outputs = vec![recon_path, err_path];
    manifest.time("total", start);
    manifest.write(&args.out.join(format!("{}.manifest.json", args.panel)))?;
    Ok(manifest)
}

/// One row of the oracle comparison.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleRow {
    pub alpha: u32,
    pub u0_exact: f64,
    pub u0_fd: f64,
    pub u_exact: f64,
    pub u_fd: f64,
}

impl OracleRow {
    pub fn max_rel_dev(&self) -> f64 {
        ((self.u0_fd - self.u0_exact) / self.u0_exact).abs().max(((self.u_fd - self.u_exact) / self.u_exact).abs())
    }
}

pub fn oracle_table(cfg: &ProblemConfig, fd_points: usize) -> Result<Vec<OracleRow>> {
    use rayon::prelude::*;
    let grid = make_grid(cfg)?;
    let eta = true_profile(cfg, &grid);
    let zero = RadialProfile::zeros(ProfileRole::Generic, grid.len());
    let (u0, u) = boundary_fields(cfg)?;
    (1..=cfg.n_sources as u32)
        .into_par_iter()
        .map(|a| {
            Ok(OracleRow {
                alpha: a,
                u0_exact: u0[a as usize - 1],
                u0_fd: fd_oracle(a, &zero, cfg, fd_points)?,
                u_exact: u[a as usize - 1],
                u_fd: fd_oracle(a, &eta, cfg, fd_points)?,
            })
        })
        .collect()
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let cfg = load_config(&args.common)?;
    let mut manifest = RunManifest::new("diagnose", &cfg);
    let grid = make_grid(&cfg)?;
    let table = build_greens_table(&cfg, &grid)?;
    if let Some(dir) = &args.dump_greens {
        manifest.outputs.extend(table.dump_csv(dir)?);
    }
    let eta = true_profile(&cfg, &grid);
    let report = estimate_mu_nu(&cfg, &table, &eta)?;

    let t = Instant::now();
    let rows = oracle_table(&cfg, args.fd_points)?;
    manifest.time("oracle", t);
    let max_dev = rows.iter().map(|r| r.max_rel_dev()).fold(0.0, f64::max);

    std::fs::create_dir_all(&args.out)?;
    let mut text = String::new();
    let _ = writeln!(text, "mu = {}", fmt_num(report.mu));
    let _ = writeln!(text, "nu = {}  (single-detector surrogate)", fmt_num(report.nu));
    let _ = writeln!(text, "eta_norm = {}", fmt_num(report.eta_norm));
    let _ = writeln!(text, "eta_norm*(mu+nu) = {}", fmt_num(report.radius_product()));
    let _ = writeln!(text, "forward_radius_ok = {}", report.forward_radius_ok);
    let _ = writeln!(text, "exponents p = q = r = 2");
    let _ = writeln!(text, "fd_points = {}", args.fd_points);
    let _ = writeln!(text, "oracle_max_rel_dev = {}", fmt_num(max_dev));
    let report_path = args.out.join("diagnostics.txt");
    write_lines(&report_path, &text)?;

    let mut csv = String::from("alpha,mu_alpha,nu_alpha,u0_exact,u0_fd,u_exact,u_fd,max_rel_dev\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.alpha,
            fmt_num(report.mu_per_mode[i]),
            fmt_num(report.nu_per_mode[i]),
            fmt_num(r.u0_exact),
            fmt_num(r.u0_fd),
            fmt_num(r.u_exact),
            fmt_num(r.u_fd),
            fmt_num(r.max_rel_dev())
        );
    }
    let csv_path = args.out.join("oracle.csv");
    write_lines(&csv_path, &csv)?;

    manifest.outputs.extend([report_path, csv_path]);
    manifest.convergence = Some(report);
    manifest.time("total", start);
    manifest.write(&args.out.join("diagnose.manifest.json"))?;
    Ok(manifest)
}

pub fn run(cli: &Cli) -> Result<RunManifest> {
    match &cli.command {
        Command::Forward(a) => cmd_forward(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    }
}
