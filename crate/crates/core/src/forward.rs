//! Exact boundary data for the two-layer disk and the measurement noise model.
//!
//! Inside `r ≤ R_a` the mode is `a_n I_n(k_a r)` with `k_a = k sqrt(1 + η_a)`;
//! outside it is `I_n(kr) K_n(kR) + b_n K_n(kr) + c_n I_n(kr)`. Continuity of
//! value and flux at `R_a` and the boundary source at `R` give a 3×3 system.
//! The boundary source enters as the inhomogeneous Robin condition
//! `v + ℓ v' = ℓ/R`, so with the Wronskian `I K' - I' K = -1/x` the third
//! right-hand side is `-(kℓ I_n(kR) K_n'(kR) + I_n(kR) K_n(kR))`.
//!
//! The homogeneous disk has `b = 0`, `c = -d_n`. The system is solved for the
//! scattered coefficient `c̃ = c + d_n`, which keeps `u - u_0 = b K + c̃ I`
//! free of cancellation even when `ψ` is far below machine epsilon relative
//! to `u_0`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::bessel::{bessel_i_orders, bessel_k_orders, derivatives_from_orders, ScaledValue};
use crate::error::{Error, Result};
use crate::model::{BoundaryData, ProblemConfig};

/// Identifier of the noise generator, recorded in run manifests.
pub const PRNG_ALGORITHM: &str =
    "ChaCha20Rng (rand_chacha 0.9, seed_from_u64) + rand_distr 0.5 Normal (ziggurat)";

const MAX_CONDITION: f64 = 1e14;

#[derive(Clone, Copy, Debug)]
pub struct LayerCoefficients {
    pub n: u32,
    pub k_a: f64,
    pub a: ScaledValue,
    pub b: ScaledValue,
    pub c: ScaledValue,
    /// `c + d_n`.
    pub c_scattered: ScaledValue,
    /// `u_0 = g_n(R, R)`.
    pub u0: f64,
    /// `(u - u_0)/u_0` at the detector.
    pub relative_change: f64,
    /// Max row residual of the original (unscaled) system, relative to the
    /// largest term in that row.
    pub residual: f64,
    /// 1-norm condition estimate of the equilibrated matrix.
    pub condition: f64,
}

impl LayerCoefficients {
    /// Boundary value `u` of the perturbed mode.
    pub fn u(&self) -> f64 {
        self.u0 * (1.0 + self.relative_change)
    }

    /// `ψ_n = ln(u_0/u)`.
    pub fn psi(&self) -> Result<f64> {
        if 1.0 + self.relative_change <= 0.0 {
            return Err(Error::NonPositiveLog { mode: self.n, value: 1.0 + self.relative_change });
        }
        Ok(-self.relative_change.ln_1p())
    }
}

/// Solves `A x = rhs` with partial pivoting; returns `None` on an exact zero pivot.
fn solve3(mut a: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let p = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col] == 0.0 {
            return None;
        }
        a.swap(col, p);
        rhs.swap(col, p);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / a[row][row];
    }
    Some(x)
}

fn norm1(a: &[[f64; 3]; 3]) -> f64 {
    (0..3).map(|j| (0..3).map(|i| a[i][j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn condition(a: &[[f64; 3]; 3]) -> f64 {
    let mut inv = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        match solve3(*a, e) {
            Some(col) => (0..3).for_each(|i| inv[i][j] = col[i]),
            None => return f64::INFINITY,
        }
    }
    norm1(a) * norm1(&inv)
}

struct Tables {
    i: Vec<ScaledValue>,
    k: Vec<ScaledValue>,
}

impl Tables {
    fn at(n: u32, x: f64) -> Result<Self> {
        Ok(Tables { i: bessel_i_orders(n + 1, x)?, k: bessel_k_orders(n + 1, x)? })
    }
}

/// Layer coefficients for angular order `n`.
pub fn solve_layer_coefficients(n: u32, cfg: &ProblemConfig) -> Result<LayerCoefficients> {
    if !(1.0 + cfg.amplitude > 0.0) {
        return Err(Error::Domain(format!("1 + eta_a must be positive, got {}", 1.0 + cfg.amplitude)));
    }
    let nn = n as usize;
    let k = cfg.k;
    let k_a = k * (1.0 + cfg.amplitude).sqrt();
    let kl = k * cfg.robin_length;
    let s = ScaledValue::new;

    let inner = Tables::at(n, k_a * cfg.support_radius)?;
    let iface = Tables::at(n, k * cfg.support_radius)?;
    let outer = Tables::at(n, k * cfg.radius)?;
    let (di_in, _) = derivatives_from_orders(nn, &inner.i, &inner.k);
    let (di_if, dk_if) = derivatives_from_orders(nn, &iface.i, &iface.k);
    let (di_r, dk_r) = derivatives_from_orders(nn, &outer.i, &outer.k);

    let (i_in, i_if, k_if, i_r, k_r) = (inner.i[nn], iface.i[nn], iface.k[nn], outer.i[nn], outer.k[nn]);
    let robin_k = k_r + dk_r * kl;
    let robin_i = i_r + di_r * kl;
    let d = robin_k / robin_i * i_r;
    let k_minus_d = k_r - d;

    // unknowns (a, b, c̃); column scales make row 1 exactly (1, -1, -1)
    let mat = [
        [i_in, -k_if, -i_if],
        [di_in * k_a, -(dk_if * k), -(di_if * k)],
        [ScaledValue::ZERO, robin_k, robin_i],
    ];
    let rhs = [i_if * k_minus_d, di_if * k * k_minus_d, ScaledValue::ZERO];
    let col_scale = [i_in, k_if, i_if];

    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for r in 0..3 {
        let scaled: Vec<ScaledValue> = (0..3).map(|c| mat[r][c] / col_scale[c]).collect();
        let row_max = scaled.iter().map(|v| v.abs()).fold(ScaledValue::ZERO, |m, v| if v > m { v } else { m });
        if row_max.is_zero() {
            return Err(Error::Singular { mode: n, cond: f64::INFINITY });
        }
        for c in 0..3 {
            a[r][c] = (scaled[c] / row_max).to_f64();
        }
        b[r] = (rhs[r] / row_max).to_f64();
    }
    let cond = condition(&a);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular { mode: n, cond });
    }
    let x = solve3(a, b).ok_or(Error::Singular { mode: n, cond })?;
    let coef_a = s(x[0]) / col_scale[0];
    let coef_b = s(x[1]) / col_scale[1];
    let c_scat = s(x[2]) / col_scale[2];
    let coef_c = c_scat - d;

    // residual of the system as written, third row with the corrected sign
    let rows = [
        ([i_in, -k_if, -i_if], i_if * k_r),
        ([di_in * k_a, -(dk_if * k), -(di_if * k)], di_if * k * k_r),
        ([ScaledValue::ZERO, robin_k, robin_i], -(i_r * k_r + i_r * dk_r * kl)),
    ];
    let unknowns = [coef_a, coef_b, coef_c];
    let mut residual: f64 = 0.0;
    for (coefs, r) in rows {
        let terms: Vec<ScaledValue> = coefs.iter().zip(&unknowns).map(|(m, u)| *m * *u).collect();
        let sum = terms.iter().fold(-r, |acc, t| acc + *t);
        let scale = terms.iter().chain(std::iter::once(&r)).map(|t| t.abs()).fold(ScaledValue::ZERO, |m, v| {
            if v > m {
                v
            } else {
                m
            }
        });
        if !scale.is_zero() {
            residual = residual.max((sum.abs() / scale).to_f64());
        }
    }

    let u0_scaled = i_r * k_minus_d;
    let u0 = u0_scaled.to_f64();
    if !(u0 > 0.0) {
        return Err(Error::NonPositiveIntensity { mode: n, value: u0 });
    }
    let relative_change = ((coef_b * k_r + c_scat * i_r) / u0_scaled).to_f64();

    Ok(LayerCoefficients {
        n,
        k_a,
        a: coef_a,
        b: coef_b,
        c: coef_c,
        c_scattered: c_scat,
        u0,
        relative_change,
        residual,
        condition: cond,
    })
}

/// Layer solutions for `α = 1..M_SD`, in order.
pub fn layer_solutions(cfg: &ProblemConfig) -> Result<Vec<LayerCoefficients>> {
    cfg.validate()?;
    (1..=cfg.n_sources as u32).into_par_iter().map(|a| solve_layer_coefficients(a, cfg)).collect()
}

/// `ψ_α = ln(u_0/u)` at the detector, `α = 1..M_SD`.
pub fn exact_boundary_data(cfg: &ProblemConfig) -> Result<BoundaryData> {
    let sols = layer_solutions(cfg)?;
    let values = sols.iter().map(|s| s.psi()).collect::<Result<Vec<_>>>()?;
    Ok(BoundaryData::new(values))
}

/// Unperturbed and perturbed boundary intensities `(u_0, u)`.
pub fn boundary_fields(cfg: &ProblemConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let sols = layer_solutions(cfg)?;
    Ok((sols.iter().map(|s| s.u0).collect(), sols.iter().map(|s| s.u()).collect()))
}

/// `ψ = ln(u_0/u)` entrywise.
pub fn log_ratio(u0: &[f64], u: &[f64]) -> Result<BoundaryData> {
    if u0.len() != u.len() {
        return Err(Error::Dimension { what: "log_ratio", expected: u0.len(), got: u.len() });
    }
    let values = u0
        .iter()
        .zip(u)
        .enumerate()
        .map(|(i, (&a, &b))| {
            let q = a / b;
            if q > 0.0 && q.is_finite() {
                Ok(q.ln())
            } else {
                Err(Error::NonPositiveLog { mode: i as u32 + 1, value: q })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryData::new(values))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisyFields {
    pub u0: Vec<f64>,
    pub u: Vec<f64>,
    /// Noise standard deviation, `γ · std(u_0)`.
    pub sigma: f64,
    /// Entries left unperturbed because the draw would make them negative.
    pub skipped: usize,
}

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Adds `N(0, (γ std(u_0))²)` to every entry of `u_0` then `u`, drawing from a
/// single stream in that order. An entry whose perturbed value would be
/// negative keeps its original value (the draw is still consumed).
pub fn add_noise(u0: &[f64], u: &[f64], gamma: f64, seed: u64) -> Result<NoisyFields> {
    if u0.len() != u.len() {
        return Err(Error::Dimension { what: "add_noise", expected: u0.len(), got: u.len() });
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be finite and ≥ 0, got {gamma}")));
    }
    let sigma = gamma * population_std(u0);
    if sigma == 0.0 {
        return Ok(NoisyFields { u0: u0.to_vec(), u: u.to_vec(), sigma, skipped: 0 });
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut skipped = 0;
    let mut perturb = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&x| {
                let y = x + normal.sample(&mut rng);
                if y < 0.0 {
                    skipped += 1;
                    x
                } else {
                    y
                }
            })
            .collect()
    };
    let nu0 = perturb(u0);
    let nu = perturb(u);
    Ok(NoisyFields { u0: nu0, u: nu, sigma, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::u0_boundary;

    #[test]
    fn unperturbed_data_vanishes() {
        let cfg = ProblemConfig::disk_benchmark(0.0);
        let psi = exact_boundary_data(&cfg).unwrap();
        assert_eq!(psi.len(), 90);
        let worst = psi.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-9, "{worst}");
    }

    #[test]
    fn residuals_small_across_regime() {
        for eta in [0.0, 0.2, 1.0, 2.0, 5.0] {
            let cfg = ProblemConfig::disk_benchmark(eta);
            for s in layer_solutions(&cfg).unwrap() {
                assert!(s.residual <= 1e-12, "eta={eta} n={}: {}", s.n, s.residual);
                assert!(s.psi().unwrap().is_finite());
            }
        }
    }

    #[test]
    fn u0_matches_greens() {
        let cfg = ProblemConfig::disk_benchmark(1.0);
        for s in layer_solutions(&cfg).unwrap() {
            let g = u0_boundary(s.n, &cfg).unwrap();
            assert!(((s.u0 - g) / g).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_perturbation_gives_homogeneous_coefficients() {
        let cfg = ProblemConfig::disk_benchmark(0.0);
        let s = solve_layer_coefficients(3, &cfg).unwrap();
        let d = crate::greens::d_coefficient(3, &cfg).unwrap();
        assert!(s.b.to_f64().abs() < 1e-12);
        assert!(((s.c.to_f64() + d) / d).abs() < 1e-12);
        // inner amplitude continues I_n(kr) (K_n(kR) - d_n)
        let k = crate::bessel::bessel_k(3, 3.0).unwrap().to_f64();
        assert!(((s.a.to_f64() - (k - d)) / (k - d)).abs() < 1e-12);
    }

    #[test]
    fn linear_in_small_amplitude() {
        let eps = 1e-3;
        let p1 = exact_boundary_data(&ProblemConfig::disk_benchmark(eps)).unwrap();
        let p2 = exact_boundary_data(&ProblemConfig::disk_benchmark(2.0 * eps)).unwrap();
        for (a, b) in p1.values.iter().zip(&p2.values) {
            assert!((b / a - 2.0).abs() <= 1e-2, "{a} {b}");
        }
    }

    #[test]
    fn high_modes_see_less() {
        let psi = exact_boundary_data(&ProblemConfig::disk_benchmark(1.0)).unwrap();
        assert!(psi.values[89].abs() < psi.values[0].abs());
        assert!(psi.values[0] > 0.0);
    }

    #[test]
    fn amplitude_at_minus_one_rejected() {
        assert!(solve_layer_coefficients(1, &ProblemConfig::disk_benchmark(-1.0)).is_err());
    }

    #[test]
    fn noise_free_is_identity() {
        let u0 = vec![1.0, 2.0, 3.0];
        let u = vec![0.5, 1.5, 2.5];
        let n = add_noise(&u0, &u, 0.0, 7).unwrap();
        assert_eq!(n.u0, u0);
        assert_eq!(n.u, u);
        assert!(add_noise(&u0, &u[..2], 0.1, 7).is_err());
    }

    #[test]
    fn noise_is_deterministic() {
        let cfg = ProblemConfig::disk_benchmark(1.0);
        let (u0, u) = boundary_fields(&cfg).unwrap();
        let a = add_noise(&u0, &u, 1e-4, 99).unwrap();
        let b = add_noise(&u0, &u, 1e-4, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.u0.iter().zip(&b.u0).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = add_noise(&u0, &u, 1e-4, 100).unwrap();
        assert_ne!(a.u0, c.u0);
    }

    #[test]
    fn no_skips_at_weak_noise() {
        let cfg = ProblemConfig::disk_benchmark(1.0);
        let (u0, u) = boundary_fields(&cfg).unwrap();
        assert_eq!(add_noise(&u0, &u, 1e-5, 3).unwrap().skipped, 0);
    }

    #[test]
    fn negative_draws_are_skipped() {
        let u0 = vec![1e-9, 10.0, 20.0];
        let n = add_noise(&u0, &u0, 1.0, 1).unwrap();
        assert!(n.skipped >= 1);
        assert!(n.u0.iter().chain(&n.u).all(|&v| v >= 0.0));
    }

    #[test]
    fn noise_has_requested_spread() {
        let n = 100_000;
        let u0: Vec<f64> = (0..n).map(|i| 1.0 + (i % 100) as f64 / 100.0).collect();
        let gamma = 1e-3;
        let out = add_noise(&u0, &u0, gamma, 2024).unwrap();
        assert_eq!(out.skipped, 0);
        let d: Vec<f64> = out.u0.iter().zip(&u0).map(|(a, b)| a - b).collect();
        let sd = population_std(&d);
        let target = gamma * population_std(&u0);
        assert!(((sd - target) / target).abs() < 0.02, "{sd} vs {target}");
    }

    #[test]
    fn log_ratio_checks_sign() {
        assert!(log_ratio(&[1.0], &[-1.0]).is_err());
        assert_eq!(log_ratio(&[2.0], &[2.0]).unwrap().values, vec![0.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn log_ratio_ignores_source_scale(eta_a in 0.0f64..3.0, s in 1e-6f64..1e6) {
                let (u0, u) = boundary_fields(&ProblemConfig::disk_benchmark(eta_a)).unwrap();
                let a = log_ratio(&u0, &u).unwrap();
                let scaled0: Vec<f64> = u0.iter().map(|v| v * s).collect();
                let scaled: Vec<f64> = u.iter().map(|v| v * s).collect();
                let b = log_ratio(&scaled0, &scaled).unwrap();
                for (x, y) in a.values.iter().zip(&b.values) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300) + 1e-15);
                }
            }

            #[test]
            fn absorber_dims_the_boundary(eta_a in 0.01f64..3.0, alpha in 1u32..=10) {
                let c = solve_layer_coefficients(alpha, &ProblemConfig::disk_benchmark(eta_a)).unwrap();
                prop_assert!(c.psi().unwrap() > 0.0);
            }
        }
    }
}
