//! Radial modes of the homogeneous-disk Green's function.
//!
//! For angular order `n`,
//!
//! ```text
//! g_n(r, r') = K_n(k max) I_n(k min) - c_n I_n(kr) I_n(kr'),
//! c_n = (K_n(kR) + kℓ K_n'(kR)) / (I_n(kR) + kℓ I_n'(kR)),
//! ```
//!
//! which satisfies `g_n + ℓ ∂_r g_n = 0` at `r = R`. The weighted kernel used by
//! the discrete series is `G(r, r') = g_n(r, r') r'` (not symmetric).

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bessel::{bessel_i_orders, bessel_k_orders, derivatives_from_orders, ScaledValue};
use crate::error::{Error, Result};
use crate::model::{ProblemConfig, RadialGrid};

/// Bessel data of one order at the boundary argument `kR`.
#[derive(Clone, Copy, Debug)]
struct BoundaryMode {
    i: ScaledValue,
    k: ScaledValue,
    /// `c_n` above.
    coef: ScaledValue,
}

fn boundary_mode_from_tables(n: usize, i: &[ScaledValue], k: &[ScaledValue], kl: f64) -> BoundaryMode {
    let (di, dk) = derivatives_from_orders(n, i, k);
    let coef = (k[n] + dk * kl) / (i[n] + di * kl);
    BoundaryMode { i: i[n], k: k[n], coef }
}

fn boundary_mode(n: u32, cfg: &ProblemConfig) -> Result<BoundaryMode> {
    let x = cfg.k * cfg.radius;
    let i = bessel_i_orders(n + 1, x)?;
    let k = bessel_k_orders(n + 1, x)?;
    Ok(boundary_mode_from_tables(n as usize, &i, &k, cfg.k * cfg.robin_length))
}

fn check_radius(r: f64, cfg: &ProblemConfig) -> Result<()> {
    if r > 0.0 && r <= cfg.radius {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius {r} outside (0, {}]", cfg.radius)))
    }
}

/// Combines scaled Bessel values into `g_n`. `lo`/`hi` refer to the smaller
/// and larger radius so that the result is symmetric bit for bit.
fn combine(i_lo: ScaledValue, i_hi: ScaledValue, k_hi: ScaledValue, coef: ScaledValue) -> f64 {
    (k_hi * i_lo - coef * (i_lo * i_hi)).to_f64()
}

/// `g_n(r, r')`. Negative orders are folded onto `|n|`.
pub fn g_mode(n: i64, r: f64, rp: f64, cfg: &ProblemConfig) -> Result<f64> {
    check_radius(r, cfg)?;
    check_radius(rp, cfg)?;
    let n = order(n)?;
    let bm = boundary_mode(n, cfg)?;
    let (lo, hi) = if r <= rp { (r, rp) } else { (rp, r) };
    // same table length as boundary_mode so g_n(R, R) == u0_boundary bitwise
    let i_lo = bessel_i_orders(n + 1, cfg.k * lo)?[n as usize];
    let i_hi = bessel_i_orders(n + 1, cfg.k * hi)?[n as usize];
    let k_hi = bessel_k_orders(n + 1, cfg.k * hi)?[n as usize];
    Ok(combine(i_lo, i_hi, k_hi, bm.coef))
}

/// `∂_r g_n(r, r')` from the analytic Bessel derivatives. At `r = r'` this is
/// the limit from `r > r'`.
pub fn g_mode_dr(n: i64, r: f64, rp: f64, cfg: &ProblemConfig) -> Result<f64> {
    check_radius(r, cfg)?;
    check_radius(rp, cfg)?;
    let n = order(n)?;
    let bm = boundary_mode(n, cfg)?;
    let kk = cfg.k;
    let ir = bessel_i_orders(n + 1, kk * r)?;
    let kr = bessel_k_orders(n + 1, kk * r)?;
    let ip = bessel_i_orders(n, kk * rp)?[n as usize];
    let kp = bessel_k_orders(n, kk * rp)?[n as usize];
    let (di, dk) = derivatives_from_orders(n as usize, &ir, &kr);
    let own = if r >= rp { dk * ip } else { kp * di };
    Ok(((own - bm.coef * (di * ip)) * kk).to_f64())
}

fn order(n: i64) -> Result<u32> {
    u32::try_from(n.unsigned_abs())
        .map_err(|_| Error::Domain(format!("mode order {n} out of range")))
}

/// `d_α = c_α I_α(kR)`.
pub fn d_coefficient(alpha: u32, cfg: &ProblemConfig) -> Result<f64> {
    let bm = boundary_mode(alpha, cfg)?;
    Ok((bm.coef * bm.i).to_f64())
}

/// Unperturbed boundary intensity `u_0(α) = g_α(R, R)`; must be positive.
pub fn u0_boundary(alpha: u32, cfg: &ProblemConfig) -> Result<f64> {
    let bm = boundary_mode(alpha, cfg)?;
    let u0 = combine(bm.i, bm.i, bm.k, bm.coef);
    if u0 > 0.0 {
        Ok(u0)
    } else {
        Err(Error::NonPositiveIntensity { mode: alpha, value: u0 })
    }
}

/// Kernel values of one source order.
#[derive(Clone, Debug)]
pub struct ModeKernel {
    pub alpha: u32,
    n_r: usize,
    /// Row-major `G(r_i, r_n)`.
    matrix: Vec<f64>,
    boundary_row: Vec<f64>,
    boundary_col: Vec<f64>,
    pub g_rr: f64,
    pub u0: f64,
    pub d: f64,
}

impl ModeKernel {
    /// `G(r_i, r_n)` (zero-based indices).
    #[inline]
    pub fn at(&self, i: usize, n: usize) -> f64 {
        self.matrix[i * self.n_r + n]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_r..(i + 1) * self.n_r]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// `G(R, r_n)`.
    pub fn boundary_row(&self) -> &[f64] {
        &self.boundary_row
    }

    /// `G(r_n, R) = g(r_n, R) R`.
    pub fn boundary_col(&self) -> &[f64] {
        &self.boundary_col
    }
}

/// Dense kernels for `α = 1..M_SD` on a fixed grid.
#[derive(Clone, Debug)]
pub struct GreensTable {
    modes: Vec<ModeKernel>,
    grid: RadialGrid,
    g: f64,
}

impl GreensTable {
    pub fn modes(&self) -> &[ModeKernel] {
        &self.modes
    }

    /// Kernel of source order `α` (one-based).
    pub fn mode(&self, alpha: usize) -> &ModeKernel {
        &self.modes[alpha - 1]
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn n_radial(&self) -> usize {
        self.grid.len()
    }

    pub fn n_sources(&self) -> usize {
        self.modes.len()
    }

    /// Background absorption `g = k²`.
    pub fn g(&self) -> f64 {
        self.g
    }

    /// `u_0(α)` for every order.
    pub fn u0(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.u0).collect()
    }

    /// One CSV per mode, `greens_alpha_<α>.csv`, header `alpha,i,n,value`,
    /// one-based indices.
    pub fn dump_csv(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::with_capacity(self.modes.len());
        for m in &self.modes {
            let path = dir.join(format!("greens_alpha_{}.csv", m.alpha));
            let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
            writeln!(w, "alpha,i,n,value")?;
            for i in 0..m.n_r {
                for n in 0..m.n_r {
                    writeln!(w, "{},{},{},{:.16e}", m.alpha, i + 1, n + 1, m.at(i, n))?;
                }
            }
            w.flush()?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Precomputes `G^{(α)}(r_i, r_n)` and the boundary slices for every source
/// order. Orders are independent and built in parallel.
pub fn build_greens_table(cfg: &ProblemConfig, grid: &RadialGrid) -> Result<GreensTable> {
    cfg.validate()?;
    if (grid.radius() - cfg.radius).abs() > 1e-12 * cfg.radius {
        return Err(Error::Config(format!(
            "grid radius {} does not match R = {}",
            grid.radius(),
            cfg.radius
        )));
    }
    let n_max = u32::try_from(cfg.n_sources)
        .map_err(|_| Error::Domain(format!("M_SD = {} too large", cfg.n_sources)))?;
    let pts = grid.points();
    let n_r = pts.len();
    let kk = cfg.k;
    let radius = cfg.radius;

    // order tables at every node and at R; one extra order for derivatives
    let tables: Vec<(Vec<ScaledValue>, Vec<ScaledValue>)> = pts
        .par_iter()
        .map(|&r| Ok((bessel_i_orders(n_max + 1, kk * r)?, bessel_k_orders(n_max + 1, kk * r)?)))
        .collect::<Result<_>>()?;
    let (i_b, k_b) = (bessel_i_orders(n_max + 1, kk * radius)?, bessel_k_orders(n_max + 1, kk * radius)?);
    let kl = kk * cfg.robin_length;

    let modes = (1..=n_max as usize)
        .into_par_iter()
        .map(|a| {
            let bm = boundary_mode_from_tables(a, &i_b, &k_b, kl);
            let g = |i: usize, n: usize| {
                let (lo, hi) = if pts[i] <= pts[n] { (i, n) } else { (n, i) };
                combine(tables[lo].0[a], tables[hi].0[a], tables[hi].1[a], bm.coef)
            };
            let mut matrix = vec![0.0; n_r * n_r];
            for i in 0..n_r {
                for n in 0..n_r {
                    matrix[i * n_r + n] = g(i, n) * pts[n];
                }
            }
            let g_rb: Vec<f64> = (0..n_r)
                .map(|n| {
                    let (i_lo, i_hi, k_hi) = (tables[n].0[a], bm.i, bm.k);
                    combine(i_lo, i_hi, k_hi, bm.coef)
                })
                .collect();
            let boundary_row = g_rb.iter().zip(pts).map(|(v, r)| v * r).collect();
            let boundary_col = g_rb.iter().map(|v| v * radius).collect();
            let u0 = combine(bm.i, bm.i, bm.k, bm.coef);
            if !(u0 > 0.0) {
                return Err(Error::NonPositiveIntensity { mode: a as u32, value: u0 });
            }
            Ok(ModeKernel {
                alpha: a as u32,
                n_r,
                matrix,
                boundary_row,
                boundary_col,
                g_rr: u0 * radius,
                u0,
                d: (bm.coef * bm.i).to_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GreensTable { modes, grid: grid.clone(), g: cfg.g() })
}
