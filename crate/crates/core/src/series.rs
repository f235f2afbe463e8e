//! Discrete Born vectors `K_j` and Rytov terms `J_j`.
//!
//! For each source order `α`, with `G = G^{(α)}` and weights `gΔr`:
//!
//! ```text
//! K_0       = -G(R, R)
//! K_1(b)_i  =  gΔr Σ_n G(r_i, r_n) G(r_n, R) b_n
//! K_j(..)_i = -gΔr Σ_n G(r_i, r_n) (b_j)_n K_{j-1}(b_1..b_{j-1})_n
//! J_j(b_1..b_j) = Σ_{m=1}^{j} (-1)^m / (m K_0^m)
//!                 Σ_{i_1+..+i_m=j} K_{i_1}(..)_R ⋯ K_{i_m}(..)_R
//! ```
//!
//! The first factor of a composition consumes the first `i_1` arguments, the
//! next one the following `i_2`, and so on. Only boundary entries
//! (`r = R`, the last node) of the `K_j` enter `J_j`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greens::{GreensTable, ModeKernel};
use crate::model::{BoundaryData, RadialProfile};

impl AsRef<[f64]> for RadialProfile {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl AsRef<[f64]> for BoundaryData {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Ordered tuple of positive integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Composition {
    pub parts: Vec<usize>,
}

impl Composition {
    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    /// `(start, len)` of the argument slice each part consumes.
    pub fn slices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parts.iter().scan(0, |start, &len| {
            let s = *start;
            *start += len;
            Some((s, len))
        })
    }
}

/// Compositions of `j` into exactly `m` parts, lexicographic. Empty if `m > j`
/// or either is zero.
pub fn compositions(j: usize, m: usize) -> Vec<Composition> {
    fn go(rest: usize, m: usize, prefix: &mut Vec<usize>, out: &mut Vec<Composition>) {
        if m == 1 {
            prefix.push(rest);
            out.push(Composition { parts: prefix.clone() });
            prefix.pop();
            return;
        }
        for first in 1..=rest - (m - 1) {
            prefix.push(first);
            go(rest - first, m - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m == 0 || j == 0 || m > j {
        return out;
    }
    go(j, m, &mut Vec::with_capacity(m), &mut out);
    out
}

/// `K_j` for every source order. Entry `i + (α-1) N_r` (zero-based `i`); the
/// zeroth order holds one value per source.
#[derive(Clone, Debug, PartialEq)]
pub struct BornVector {
    pub order: usize,
    pub n_radial: usize,
    pub values: Vec<f64>,
}

impl BornVector {
    /// The `N_r` values of source order `α` (one-based).
    pub fn mode(&self, alpha: usize) -> &[f64] {
        &self.values[(alpha - 1) * self.n_radial..alpha * self.n_radial]
    }

    /// `{K_j}_{α N_r}`, the value at `r = R`.
    pub fn boundary(&self, alpha: usize) -> f64 {
        if self.order == 0 {
            self.values[alpha - 1]
        } else {
            self.values[alpha * self.n_radial - 1]
        }
    }
}

fn check_inputs<P: AsRef<[f64]>>(inputs: &[P], n_r: usize) -> Result<()> {
    for p in inputs {
        let len = p.as_ref().len();
        if len != n_r {
            return Err(Error::Dimension { what: "series input", expected: n_r, got: len });
        }
    }
    Ok(())
}

fn weight(table: &GreensTable) -> f64 {
    table.g() * table.grid().spacing()
}

/// `K_1(b)` over the grid for one source order.
fn k1(mode: &ModeKernel, b: &[f64], w: f64) -> Vec<f64> {
    let src: Vec<f64> = mode.boundary_col().iter().zip(b).map(|(g, b)| g * b).collect();
    (0..b.len()).map(|i| w * dot(mode.row(i), &src)).collect()
}

/// One step `K_j = -gΔr G (b_j ⊙ K_{j-1})`.
fn k_step(mode: &ModeKernel, b: &[f64], prev: &[f64], w: f64) -> Vec<f64> {
    let src: Vec<f64> = b.iter().zip(prev).map(|(b, k)| b * k).collect();
    (0..b.len()).map(|i| -w * dot(mode.row(i), &src)).collect()
}

/// Boundary entry of `K_j = -gΔr G (b_j ⊙ K_{j-1})` without the interior.
fn k_step_boundary(mode: &ModeKernel, b: &[f64], prev: &[f64], w: f64) -> f64 {
    let row = mode.boundary_row();
    -w * row.iter().zip(b).zip(prev).map(|((g, b), k)| g * b * k).sum::<f64>()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `K_0 = -G(R, R)` per source order.
pub fn born_k0(table: &GreensTable) -> BornVector {
    BornVector {
        order: 0,
        n_radial: table.n_radial(),
        values: table.modes().iter().map(|m| -m.g_rr).collect(),
    }
}

/// `K_j(b_1, …, b_j)` for `j = inputs.len() ≥ 1`.
pub fn born_vector<P: AsRef<[f64]> + Sync>(inputs: &[P], table: &GreensTable) -> Result<BornVector> {
    if inputs.is_empty() {
        return Ok(born_k0(table));
    }
    let n_r = table.n_radial();
    check_inputs(inputs, n_r)?;
    let w = weight(table);
    let per_mode: Vec<Vec<f64>> = table
        .modes()
        .par_iter()
        .map(|mode| {
            let mut v = k1(mode, inputs[0].as_ref(), w);
            for b in &inputs[1..] {
                v = k_step(mode, b.as_ref(), &v, w);
            }
            v
        })
        .collect();
    Ok(BornVector { order: inputs.len(), n_radial: n_r, values: per_mode.concat() })
}

/// Boundary values `{K_len(b_s, …, b_{s+len-1})}_R` for every contiguous
/// slice, indexed `[s][len - 1]`.
fn boundary_slices(mode: &ModeKernel, inputs: &[&[f64]], w: f64) -> Vec<Vec<f64>> {
    let j = inputs.len();
    let last = mode.boundary_row().len() - 1;
    (0..j)
        .map(|s| {
            let mut out = Vec::with_capacity(j - s);
            let mut v = k1(mode, inputs[s], w);
            out.push(v[last]);
            for len in 2..=j - s {
                let b = inputs[s + len - 1];
                if s + len == j {
                    out.push(k_step_boundary(mode, b, &v, w));
                } else {
                    v = k_step(mode, b, &v, w);
                    out.push(v[last]);
                }
            }
            out
        })
        .collect()
}

/// Combines boundary slice values into `J_j` for one source order.
fn assemble_j(bnd: &[Vec<f64>], k0: f64, comps: &[Vec<Composition>]) -> f64 {
    let mut total = 0.0;
    for (m_idx, list) in comps.iter().enumerate() {
        let m = m_idx + 1;
        let mut acc = 0.0;
        for c in list {
            acc += c.slices().map(|(s, len)| bnd[s][len - 1]).product::<f64>();
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * acc / (m as f64 * k0.powi(m as i32));
    }
    total
}

fn all_compositions(j: usize) -> Vec<Vec<Composition>> {
    (1..=j).map(|m| compositions(j, m)).collect()
}

/// `J_j(b_1, …, b_j)`, one value per source order; `j = inputs.len() ≥ 1`.
pub fn rytov_forward<P: AsRef<[f64]> + Sync>(inputs: &[P], table: &GreensTable) -> Result<BoundaryData> {
    let j = inputs.len();
    if j == 0 {
        return Err(Error::Config("rytov_forward needs at least one argument".into()));
    }
    check_inputs(inputs, table.n_radial())?;
    let w = weight(table);
    let comps = all_compositions(j);
    let args: Vec<&[f64]> = inputs.iter().map(|p| p.as_ref()).collect();
    let values = table
        .modes()
        .par_iter()
        .map(|mode| assemble_j(&boundary_slices(mode, &args, w), -mode.g_rr, &comps))
        .collect();
    Ok(BoundaryData::new(values))
}

/// Forward Rytov terms `ψ_j = J_j(η, …, η)` for `j = 1..order`. With equal
/// arguments every slice of a given length coincides, so one chain suffices.
pub fn rytov_series(eta: &RadialProfile, order: usize, table: &GreensTable) -> Result<Vec<BoundaryData>> {
    check_inputs(std::slice::from_ref(eta), table.n_radial())?;
    let w = weight(table);
    let b = eta.values.as_slice();
    let last = table.n_radial() - 1;
    let comps: Vec<Vec<Vec<Composition>>> = (1..=order).map(all_compositions).collect();
    let per_mode: Vec<Vec<f64>> = table
        .modes()
        .par_iter()
        .map(|mode| {
            let mut chain = Vec::with_capacity(order);
            let mut v = k1(mode, b, w);
            chain.push(v[last]);
            for _ in 1..order {
                v = k_step(mode, b, &v, w);
                chain.push(v[last]);
            }
            (1..=order)
                .map(|j| {
                    // bnd[s][len-1] = chain[len-1] for every start s
                    let bnd: Vec<Vec<f64>> = (0..j).map(|s| chain[..j - s].to_vec()).collect();
                    assemble_j(&bnd, -mode.g_rr, &comps[j - 1])
                })
                .collect()
        })
        .collect();
    Ok((0..order)
        .map(|j| BoundaryData::new(per_mode.iter().map(|m| m[j]).collect()))
        .collect())
}
