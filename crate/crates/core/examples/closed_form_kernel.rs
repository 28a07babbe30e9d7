// Closed-form connection probability K_k(x, z), as a float and as an exact
// rational, and its decay with depth.

use kerf_lab::kernel::{centered_kernel, centered_kernel_exact};
use kerf_lab::{KernelSpec, Point};

pub fn run() -> kerf_lab::Result<Vec<f64>> {
    let x = Point::new(vec![0.1, 0.6])?;
    let z = Point::new(vec![0.2, 0.4])?;
    let mut values = Vec::new();
    for k in 0..=6 {
        let spec = KernelSpec::centered(k, 2)?;
        let p = centered_kernel(&spec, &x, &z)?;
        println!("k={k}  K={p:<10}  exact={}", centered_kernel_exact(&spec, &x, &z)?);
        values.push(p);
    }
    Ok(values)
}

fn main() -> kerf_lab::Result<()> {
    run().map(|_| ())
}
