// Cross-check the closed form against the exact recursion, both enumerations
// and Monte Carlo for a handful of random pairs.

use kerf_lab::equivalence::{equivalence_report, EquivalenceConfig};

pub fn run() -> kerf_lab::Result<usize> {
    let config = EquivalenceConfig { pairs: 3, k_max: 3, d_max: 2, mc_samples: 20_000, seed: 1 };
    let rows = equivalence_report(&config)?;
    for r in &rows {
        println!(
            "d={} k={} x={} z={}  K={:.6}  mc=({:.4}, {:.4})  {}",
            r.d,
            r.k,
            r.x,
            r.z,
            r.kernel_closed_form,
            r.mc_centered.unwrap_or(f64::NAN),
            r.mc_directional.unwrap_or(f64::NAN),
            if r.pass() { "ok" } else { "MISMATCH" }
        );
    }
    let failing = rows.iter().filter(|r| !r.pass()).count();
    println!("{} rows, {failing} failing", rows.len());
    Ok(failing)
}

fn main() -> kerf_lab::Result<()> {
    run().map(|_| ())
}
