//! Modified Bessel functions `I_n(x)` and `K_n(x)` of integer order.
//!
//! Algorithms:
//!
//! * `I_n`: ascending power series for `x < 0.5`, otherwise Miller's backward
//!   recurrence normalized by `e^x = I_0(x) + 2 Σ_{k≥1} I_k(x)`.
//! * `K_0`, `K_1`: ascending series for `x ≤ 2`, Steed's continued fraction
//!   (the CF2 of Temme's method) for `x > 2`.
//! * `K_n`: upward recurrence `K_{k+1} = K_{k-1} + (2k/x) K_k`, which is
//!   stable for `K`.
//!
//! All values are returned as [`ScaledValue`] so that orders up to 200 stay
//! representable. Target accuracy is 1e-12 relative over `n ≤ 200`,
//! `0 ≤ x ≤ 50`.

mod scaled;

pub use scaled::ScaledValue;

use crate::error::{Error, Result};

/// Largest order accepted by [`bessel_i`] and [`bessel_k`].
pub const MAX_ORDER: u32 = 200;
/// Largest argument accepted.
pub const MAX_ARG: f64 = 50.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_EPS: f64 = 1e-17;

fn check_arg(x: f64, allow_zero: bool) -> Result<()> {
    let ok = x.is_finite() && x <= MAX_ARG && if allow_zero { x >= 0.0 } else { x > 0.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Bessel argument {x} outside {}, {MAX_ARG}]",
            if allow_zero { "[0" } else { "(0" }
        )))
    }
}

// Orders up to MAX_ORDER + 1 are reachable through the derivative identities.
fn check_order(n: u32) -> Result<()> {
    if n <= MAX_ORDER + 1 {
        Ok(())
    } else {
        Err(Error::Domain(format!("Bessel order {n} exceeds {MAX_ORDER}")))
    }
}

/// `I_n(x)`.
pub fn bessel_i(n: u32, x: f64) -> Result<ScaledValue> {
    if n > MAX_ORDER {
        return Err(Error::Domain(format!("Bessel order {n} exceeds {MAX_ORDER}")));
    }
    Ok(bessel_i_orders(n, x)?[n as usize])
}

/// `K_n(x)`, strictly positive.
pub fn bessel_k(n: u32, x: f64) -> Result<ScaledValue> {
    if n > MAX_ORDER {
        return Err(Error::Domain(format!("Bessel order {n} exceeds {MAX_ORDER}")));
    }
    Ok(bessel_k_orders(n, x)?[n as usize])
}

/// `(I_n'(x), K_n'(x))` from `I_n' = (I_{n-1} + I_{n+1})/2` and
/// `K_n' = -(K_{n-1} + K_{n+1})/2`, with `I_{-1} = I_1`, `K_{-1} = K_1`.
pub fn bessel_pair_derivatives(n: u32, x: f64) -> Result<(ScaledValue, ScaledValue)> {
    if n > MAX_ORDER {
        return Err(Error::Domain(format!("Bessel order {n} exceeds {MAX_ORDER}")));
    }
    let i = bessel_i_orders(n + 1, x)?;
    let k = bessel_k_orders(n + 1, x)?;
    Ok(derivatives_from_orders(n as usize, &i, &k))
}

/// Derivatives at order `n` from precomputed order tables (`len > n + 1`).
pub(crate) fn derivatives_from_orders(
    n: usize,
    i: &[ScaledValue],
    k: &[ScaledValue],
) -> (ScaledValue, ScaledValue) {
    let below = if n == 0 { 1 } else { n - 1 };
    let di = (i[below] + i[n + 1]).mul_pow2(-1);
    let dk = -(k[below] + k[n + 1]).mul_pow2(-1);
    (di, dk)
}

/// `I_0(x), …, I_{n_max}(x)`.
pub fn bessel_i_orders(n_max: u32, x: f64) -> Result<Vec<ScaledValue>> {
    check_arg(x, true)?;
    check_order(n_max)?;
    let len = n_max as usize + 1;
    if x == 0.0 {
        let mut out = vec![ScaledValue::ZERO; len];
        out[0] = ScaledValue::ONE;
        return Ok(out);
    }
    if x < 0.5 {
        Ok(i_series(n_max, x))
    } else {
        Ok(i_miller(n_max, x))
    }
}

fn i_series(n_max: u32, x: f64) -> Vec<ScaledValue> {
    let q = 0.25 * x * x;
    let half = ScaledValue::new(0.5 * x);
    let mut prefactor = ScaledValue::ONE;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        if n > 0 {
            prefactor = prefactor * half / n as f64;
        }
        let nf = n as f64;
        let (mut term, mut sum) = (1.0, 1.0);
        let mut m = 1.0;
        loop {
            term *= q / (m * (m + nf));
            sum += term;
            if term < SERIES_EPS * sum {
                break;
            }
            m += 1.0;
        }
        out.push(prefactor * sum);
    }
    out
}

fn miller_start(n_max: u32, x: f64) -> usize {
    let top = (n_max as f64).max(x.ceil());
    let start = top + 24.0 + (60.0 * (n_max as f64 + x)).sqrt();
    // even start keeps the normalization sum in phase
    2 * (start as usize).div_ceil(2)
}

fn i_miller(n_max: u32, x: f64) -> Vec<ScaledValue> {
    let start = miller_start(n_max, x);
    let two_over_x = 2.0 / x;
    let mut next = ScaledValue::ZERO; // b_{k+1}
    let mut cur = ScaledValue::from_parts(1.0, -600); // b_k
    let mut sum = ScaledValue::ZERO;
    let mut kept = vec![ScaledValue::ZERO; n_max as usize + 1];
    for k in (1..=start).rev() {
        if k <= n_max as usize {
            kept[k] = cur;
        }
        sum = sum + cur.mul_pow2(1);
        let prev = cur * (two_over_x * k as f64) + next;
        next = cur;
        cur = prev;
    }
    kept[0] = cur;
    sum = sum + cur;
    let scale = ScaledValue::new(x.exp()) / sum;
    kept.into_iter().map(|b| b * scale).collect()
}

/// `K_0(x), …, K_{n_max}(x)`.
pub fn bessel_k_orders(n_max: u32, x: f64) -> Result<Vec<ScaledValue>> {
    check_arg(x, false)?;
    check_order(n_max)?;
    let (k0, k1) = if x <= 2.0 { k01_series(x) } else { k01_steed(x) };
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(ScaledValue::new(k0));
    if n_max == 0 {
        return Ok(out);
    }
    out.push(ScaledValue::new(k1));
    let two_over_x = 2.0 / x;
    for k in 1..n_max as usize {
        let next = out[k - 1] + out[k] * (two_over_x * k as f64);
        out.push(next);
    }
    Ok(out)
}

fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let ln_half = (0.5 * x).ln();
    // K_0 = -(ln(x/2) + γ) I_0 + Σ_{m≥1} H_m q^m / (m!)^2
    // K_1 = 1/x + ln(x/2) I_1 - (x/4) Σ_{m≥0} (ψ(m+1) + ψ(m+2)) q^m / (m!(m+1)!)
    let mut t0 = 1.0; // q^m/(m!)^2
    let mut t1 = 1.0; // q^m/(m!(m+1)!)
    let mut i0 = 1.0;
    let mut i1 = 1.0;
    let mut harmonic = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 1.0 - 2.0 * EULER_GAMMA; // m = 0: ψ(1) + ψ(2) = -2γ + 1
    let mut m = 1.0;
    loop {
        t0 *= q / (m * m);
        t1 *= q / (m * (m + 1.0));
        harmonic += 1.0 / m;
        i0 += t0;
        i1 += t1;
        s0 += harmonic * t0;
        // ψ(m+1) + ψ(m+2) = -2γ + 2 H_m + 1/(m+1)
        s1 += (2.0 * harmonic + 1.0 / (m + 1.0) - 2.0 * EULER_GAMMA) * t1;
        if t0 < SERIES_EPS * i0 && t1 < SERIES_EPS * i1 {
            break;
        }
        m += 1.0;
    }
    let i1 = 0.5 * x * i1;
    let k0 = -(ln_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + ln_half * i1 - 0.25 * x * s1;
    (k0, k1)
}

fn k01_steed(x: f64) -> (f64, f64) {
    const MAX_IT: usize = 10_000;
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_IT {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct power-series summation of `I_n(x)` in plain `f64`.
    fn i_oracle(n: u32, x: f64) -> f64 {
        let mut pre = 1.0;
        for j in 1..=n {
            pre *= 0.5 * x / j as f64;
        }
        let q = 0.25 * x * x;
        let (mut t, mut s) = (1.0, 1.0);
        for m in 1..400 {
            t *= q / (m as f64 * (m as f64 + n as f64));
            s += t;
            if t < 1e-18 * s {
                break;
            }
        }
        pre * s
    }

    /// Trapezoid rule on `∫_0^∞ e^{-x cosh t} cosh(n t) dt`; spectrally
    /// convergent for this analytic, doubly-exponentially decaying integrand.
    fn k_oracle(n: u32, x: f64) -> f64 {
        let h: f64 = 0.005;
        let mut sum = 0.5 * (-x).exp();
        let mut t = h;
        loop {
            let v = (-x * t.cosh() + n as f64 * t).exp() * 0.5 + (-x * t.cosh() - n as f64 * t).exp() * 0.5;
            sum += v;
            if x * t.cosh() - n as f64 * t > 760.0 {
                break;
            }
            t += h;
        }
        sum * h
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn exact_at_origin() {
        assert_eq!(bessel_i(0, 0.0).unwrap().to_f64(), 1.0);
        assert_eq!(bessel_i(1, 0.0).unwrap().to_f64(), 0.0);
        assert!(bessel_i(7, 0.0).unwrap().is_zero());
    }

    #[test]
    fn i0_at_one_matches_series() {
        // Σ (1/2)^{2m}/(m!)^2
        let mut t = 1.0;
        let mut s = 1.0;
        for m in 1..30 {
            t *= 0.25 / (m * m) as f64;
            s += t;
        }
        let v = bessel_i(0, 1.0).unwrap().to_f64();
        assert!(rel(v, s) < 1e-14, "{v} vs {s}");
        assert!((v - 1.266_065_877_752_008_4).abs() < 1e-15);
    }

    #[test]
    fn i_matches_power_series_on_grid() {
        for &x in &[0.01, 0.3, 0.49, 0.5, 0.8, 1.0, 2.0, 3.0, 4.5, 7.0, 12.0, 25.0, 40.0, 50.0] {
            let orders = bessel_i_orders(60, x).unwrap();
            for n in 0..=60u32 {
                let want = i_oracle(n, x);
                if want < 1e-290 {
                    continue;
                }
                let got = orders[n as usize].to_f64();
                assert!(rel(got, want) < 1e-12, "I_{n}({x}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn i_high_order_small_argument_in_log_space() {
        // I_n(x) ~ (x/2)^n / n! for x ≪ √n; compare logs at n = 200, x = 3.
        let n = 200u32;
        let x = 3.0;
        let mut log_pre = n as f64 * (0.5 * x as f64).ln();
        for j in 1..=n {
            log_pre -= (j as f64).ln();
        }
        let q = 0.25 * x * x;
        let (mut t, mut s) = (1.0f64, 1.0f64);
        for m in 1..100 {
            t *= q / (m as f64 * (m as f64 + n as f64));
            s += t;
        }
        let want = log_pre + s.ln();
        let got = bessel_i(n, x).unwrap().ln_abs();
        assert!((got - want).abs() < 1e-12 * want.abs(), "{got} vs {want}");
    }

    #[test]
    fn k1_at_three_matches_quadrature() {
        let want = k_oracle(1, 3.0);
        let got = bessel_k(1, 3.0).unwrap().to_f64();
        assert!(rel(got, want) < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn k_matches_quadrature_across_branches() {
        for &x in &[0.1, 0.7, 1.5, 2.0, 2.0001, 3.0, 8.0, 20.0, 45.0] {
            for n in [0u32, 1, 2, 5, 12] {
                let want = k_oracle(n, x);
                let got = bessel_k(n, x).unwrap().to_f64();
                assert!(rel(got, want) < 1e-12, "K_{n}({x}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn k0_i0_product_large_argument() {
        let x = 40.0;
        let p = (bessel_k(0, x).unwrap() * bessel_i(0, x).unwrap()).to_f64();
        assert!(rel(p, 1.0 / (2.0 * x)) < 0.01);
    }

    #[test]
    fn wronskian_order_three() {
        let (n, x) = (3, 2.5);
        let i = bessel_i(n, x).unwrap();
        let k = bessel_k(n, x).unwrap();
        let (di, dk) = bessel_pair_derivatives(n, x).unwrap();
        let w = ((i * dk - di * k) * x).to_f64();
        assert!((w + 1.0).abs() < 1e-13, "{w}");
    }

    #[test]
    fn derivative_at_order_zero_uses_symmetry() {
        for &x in &[0.2, 1.0, 3.0, 10.0] {
            let (di, dk) = bessel_pair_derivatives(0, x).unwrap();
            assert_eq!(di.to_f64(), bessel_i(1, x).unwrap().to_f64());
            assert_eq!(dk.to_f64(), -bessel_k(1, x).unwrap().to_f64());
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let (x, h) = (3.0, 1e-5);
        let (di, dk) = bessel_pair_derivatives(1, x).unwrap();
        let fd_k = (bessel_k(1, x + h).unwrap().to_f64() - bessel_k(1, x - h).unwrap().to_f64()) / (2.0 * h);
        let fd_i = (bessel_i(1, x + h).unwrap().to_f64() - bessel_i(1, x - h).unwrap().to_f64()) / (2.0 * h);
        assert!(rel(dk.to_f64(), fd_k) < 1e-8, "{} vs {fd_k}", dk.to_f64());
        assert!(rel(di.to_f64(), fd_i) < 1e-8, "{} vs {fd_i}", di.to_f64());
        let k0 = bessel_k(0, x).unwrap().to_f64();
        let k2 = bessel_k(2, x).unwrap().to_f64();
        assert!(rel(dk.to_f64(), -(k0 + k2) / 2.0) < 1e-15);
    }

    #[test]
    fn monotone_in_argument() {
        let xs: Vec<f64> = (1..=250).map(|j| 0.1 * j as f64).collect();
        for n in [0u32, 1, 7, 40, 120] {
            let mut last_i = ScaledValue::ZERO;
            let mut last_k: Option<ScaledValue> = None;
            for &x in &xs {
                let i = bessel_i(n, x).unwrap();
                let k = bessel_k(n, x).unwrap();
                assert!(i > last_i, "I_{n} not increasing at {x}");
                if let Some(prev) = last_k {
                    assert!(k < prev, "K_{n} not decreasing at {x}");
                }
                assert!(k.signum() > 0.0);
                last_i = i;
                last_k = Some(k);
            }
        }
    }

    #[test]
    fn three_term_recurrence_residual() {
        for &x in &[0.1, 0.6, 2.0, 5.0, 17.0, 25.0] {
            let orders = bessel_i_orders(121, x).unwrap();
            for n in 1..=120usize {
                let lhs = orders[n - 1] - orders[n + 1] - orders[n] * (2.0 * n as f64 / x);
                let bound = orders[n - 1].abs().mul_pow2(0) * 1e-10;
                assert!(lhs.abs() <= bound, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_i(0, -1.0).is_err());
        assert!(bessel_i(201, 1.0).is_err());
        assert!(bessel_i(0, 50.5).is_err());
        assert!(bessel_k(0, 0.0).is_err());
        assert!(bessel_k(3, -2.0).is_err());
        assert!(bessel_pair_derivatives(2, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            #[test]
            fn wronskian_holds(n in 0u32..=120, x in 0.1f64..25.0) {
                let i = bessel_i(n, x).unwrap();
                let k = bessel_k(n, x).unwrap();
                let (di, dk) = bessel_pair_derivatives(n, x).unwrap();
                let w = ((i * dk - di * k) * x).to_f64();
                prop_assert!((w + 1.0).abs() <= 1e-10, "n={n} x={x} w={w}");
            }

            #[test]
            fn monotone_in_argument(n in 0u32..=120, x in 0.01f64..24.0, dx in 1e-3f64..1.0) {
                let y = (x + dx).min(25.0);
                prop_assert!(bessel_i(n, y).unwrap() > bessel_i(n, x).unwrap());
                prop_assert!(bessel_k(n, y).unwrap() < bessel_k(n, x).unwrap());
            }
        }
    }
}
