//! Modified Bessel functions with an extended exponent range.
//!
//! `cargo run --example bessel_values`

use rytov::bessel::{bessel_i, bessel_k, bessel_pair_derivatives};

fn main() -> rytov::Result<()> {
    println!("{:>5} {:>8} {:>24} {:>24} {:>10}", "n", "x", "I_n(x)", "K_n(x)", "|xW+1|");
    for &n in &[0u32, 1, 10, 90, 150, 200] {
        for &x in &[0.1, 1.0, 3.0, 25.0] {
            let i = bessel_i(n, x)?;
            let k = bessel_k(n, x)?;
            let (di, dk) = bessel_pair_derivatives(n, x)?;
            // x (I K' - I' K) = -1 for every order
            let w = ((i * dk - di * k) * x).to_f64();
            println!("{n:>5} {x:>8} {i:>24} {k:>24} {:>10.2e}", (w + 1.0).abs());
        }
    }

    // products stay representable even when the factors are not
    let i = bessel_i(200, 0.1)?;
    let k = bessel_k(200, 0.1)?;
    println!("\nI_200(0.1) K_200(0.1) = {:.12e}  (1/(2n) = {:.12e})", (i * k).to_f64(), 1.0 / 400.0);
    Ok(())
}
