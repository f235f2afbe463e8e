//! Problem configuration, radial grid and the vector types shared by every
//! other module.
//!
//! The diffusion coefficient is fixed to 1, so the Robin length `ℓ` is the
//! only boundary parameter and the background absorption is `g = k²`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many singular values the truncated pseudoinverse keeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SvPolicy {
    /// Keep the `n` largest.
    Count(usize),
    /// Keep every singular value strictly above `σ_0`.
    Threshold(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    /// Wavenumber-like parameter; background absorption is `k²`.
    pub k: f64,
    /// Disk radius `R`.
    pub radius: f64,
    /// Radius `R_a` of the perturbation support.
    pub support_radius: f64,
    /// Robin length `ℓ`.
    pub robin_length: f64,
    /// Perturbation amplitude `η_a` inside the support.
    pub amplitude: f64,
    /// Number of radial grid points `N_r`.
    pub n_radial: usize,
    /// Number of sources (= data entries) `M_SD`; one detector at θ = 0.
    pub n_sources: usize,
    pub sv_policy: SvPolicy,
    /// Truncation order `N` of the inverse series.
    pub order: usize,
    /// Noise level `γ`.
    pub noise_level: f64,
    pub seed: u64,
}

const KEYS: [&str; 12] = [
    "k", "R", "R_a", "ell", "eta_a", "N_r", "M_SD", "sv_count", "sv_threshold", "order", "gamma",
    "seed",
];

impl ProblemConfig {
    /// The disk benchmark: k = 1, R = 3, R_a = 1.5, ℓ = 0.3, N_r = M_SD = 90,
    /// 23 singular values, order 5, no noise.
    pub fn disk_benchmark(amplitude: f64) -> Self {
        ProblemConfig {
            k: 1.0,
            radius: 3.0,
            support_radius: 1.5,
            robin_length: 0.3,
            amplitude,
            n_radial: 90,
            n_sources: 90,
            sv_policy: SvPolicy::Count(23),
            order: 5,
            noise_level: 0.0,
            seed: 0,
        }
    }

    /// Background absorption `g = k²`.
    pub fn g(&self) -> f64 {
        self.k * self.k
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let finite = [
            ("k", self.k),
            ("R", self.radius),
            ("R_a", self.support_radius),
            ("ell", self.robin_length),
            ("eta_a", self.amplitude),
            ("gamma", self.noise_level),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return bad(format!("{name} = {v} is not finite"));
            }
        }
        if self.k <= 0.0 {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if self.radius <= 0.0 {
            return bad(format!("R must be positive, got {}", self.radius));
        }
        if !(self.support_radius > 0.0 && self.support_radius < self.radius) {
            return bad(format!("R_a must lie in (0, R = {}), got {}", self.radius, self.support_radius));
        }
        if self.robin_length <= 0.0 {
            return bad(format!("ell must be positive, got {}", self.robin_length));
        }
        if self.amplitude < -1.0 {
            return bad(format!("eta_a must be ≥ -1, got {}", self.amplitude));
        }
        if self.n_radial < 1 {
            return bad("N_r must be at least 1".into());
        }
        if self.n_sources < 1 {
            return bad("M_SD must be at least 1".into());
        }
        match self.sv_policy {
            SvPolicy::Count(c) => {
                let cap = self.n_sources.min(self.n_radial);
                if c < 1 || c > cap {
                    return bad(format!("sv_count must be in 1..={cap}, got {c}"));
                }
            }
            SvPolicy::Threshold(t) => {
                if !(t > 0.0 && t.is_finite()) {
                    return bad(format!("sv_threshold must be positive, got {t}"));
                }
            }
        }
        if self.order < 1 {
            return bad("order must be at least 1".into());
        }
        if self.noise_level < 0.0 {
            return bad(format!("gamma must be ≥ 0, got {}", self.noise_level));
        }
        Ok(())
    }

    /// Parses the flat `key = value` format. `#` starts a comment; unknown or
    /// repeated keys are errors. `order`, `gamma` and `seed` default to 5, 0, 0.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, msg: format!("expected key=value, got {content:?}") })?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Parse { line, msg: format!("unknown key {key:?}") });
            }
            if map.insert(key, (line, value)).is_some() {
                return Err(Error::Parse { line, msg: format!("duplicate key {key:?}") });
            }
        }

        fn get<T: std::str::FromStr>(map: &BTreeMap<&str, (usize, &str)>, key: &str) -> Result<Option<T>> {
            match map.get(key) {
                None => Ok(None),
                Some(&(line, v)) => v
                    .parse::<T>()
                    .map(Some)
                    .map_err(|_| Error::Parse { line, msg: format!("cannot parse {key} = {v:?}") }),
            }
        }
        fn req<T: std::str::FromStr>(map: &BTreeMap<&str, (usize, &str)>, key: &str) -> Result<T> {
            get(map, key)?.ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
        }

        let count: Option<usize> = get(&map, "sv_count")?;
        let threshold: Option<f64> = get(&map, "sv_threshold")?;
        let sv_policy = match (count, threshold) {
            (Some(c), None) => SvPolicy::Count(c),
            (None, Some(t)) => SvPolicy::Threshold(t),
            (Some(_), Some(_)) => {
                return Err(Error::Config("sv_count and sv_threshold are mutually exclusive".into()))
            }
            (None, None) => return Err(Error::Config("one of sv_count or sv_threshold is required".into())),
        };
        let cfg = ProblemConfig {
            k: req(&map, "k")?,
            radius: req(&map, "R")?,
            support_radius: req(&map, "R_a")?,
            robin_length: req(&map, "ell")?,
            amplitude: req(&map, "eta_a")?,
            n_radial: req(&map, "N_r")?,
            n_sources: req(&map, "M_SD")?,
            sv_policy,
            order: get(&map, "order")?.unwrap_or(5),
            noise_level: get(&map, "gamma")?.unwrap_or(0.0),
            seed: get(&map, "seed")?.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes to the config format. Floats use the shortest exact
    /// representation, so `parse(to_config_string())` is the identity.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "R = {}", self.radius);
        let _ = writeln!(s, "R_a = {}", self.support_radius);
        let _ = writeln!(s, "ell = {}", self.robin_length);
        let _ = writeln!(s, "eta_a = {}", self.amplitude);
        let _ = writeln!(s, "N_r = {}", self.n_radial);
        let _ = writeln!(s, "M_SD = {}", self.n_sources);
        match self.sv_policy {
            SvPolicy::Count(c) => {
                let _ = writeln!(s, "sv_count = {c}");
            }
            SvPolicy::Threshold(t) => {
                let _ = writeln!(s, "sv_threshold = {t}");
            }
        }
        let _ = writeln!(s, "order = {}", self.order);
        let _ = writeln!(s, "gamma = {}", self.noise_level);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

/// Points `r_i = i Δr`, `i = 1..N_r`, `Δr = R / N_r`. The origin is not a node
/// and the last node sits on the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    points: Vec<f64>,
    spacing: f64,
    radius: f64,
}

impl RadialGrid {
    pub fn new(radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || n == 0 {
            return Err(Error::Config(format!("grid needs R > 0 and N_r ≥ 1 (got R = {radius}, N_r = {n})")));
        }
        // i*R/N keeps r_i exact whenever i*R/N is representable
        let mut points: Vec<f64> = (1..=n).map(|i| i as f64 * radius / n as f64).collect();
        points[n - 1] = radius;
        Ok(RadialGrid { points, spacing: radius / n as f64, radius })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Polar quadrature weights `r_i Δr`.
    pub fn polar_weights(&self) -> Vec<f64> {
        self.points.iter().map(|r| r * self.spacing).collect()
    }
}

pub fn make_grid(cfg: &ProblemConfig) -> Result<RadialGrid> {
    cfg.validate()?;
    RadialGrid::new(cfg.radius, cfg.n_radial)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileRole {
    EtaTrue,
    EtaProj,
    EtaOrder(usize),
    EtaPartialSum(usize),
    MuA,
    /// Intermediate or user-supplied profile.
    Generic,
}

/// A real function sampled on the radial grid: η, a series term, or μ_a.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub role: ProfileRole,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(role: ProfileRole, values: Vec<f64>) -> Self {
        RadialProfile { role, values }
    }

    pub fn zeros(role: ProfileRole, n: usize) -> Self {
        RadialProfile { role, values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_role(mut self, role: ProfileRole) -> Self {
        self.role = role;
        self
    }

    pub fn scaled(&self, t: f64) -> Self {
        RadialProfile::new(self.role, self.values.iter().map(|v| v * t).collect())
    }
}

/// Piecewise-constant truth: `η_a` for `r_i ≤ R_a`, zero outside.
pub fn true_profile(cfg: &ProblemConfig, grid: &RadialGrid) -> RadialProfile {
    let values = grid
        .points()
        .iter()
        .map(|&r| if r <= cfg.support_radius { cfg.amplitude } else { 0.0 })
        .collect();
    RadialProfile::new(ProfileRole::EtaTrue, values)
}

/// Boundary data `ψ_α = ln(u_0/u)` at the detector, indexed by source order
/// `α = 1..M_SD` (stored zero-based).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    pub values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(values: Vec<f64>) -> Self {
        BoundaryData { values }
    }

    pub fn zeros(n: usize) -> Self {
        BoundaryData { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Self {
        BoundaryData::new(self.values.iter().map(|v| v * t).collect())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
