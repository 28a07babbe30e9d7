// Fit finite centered and directional KeRF on noisy data and compare with the
// infinite KeRF and the plain forest average.

use kerf_lab::experiment::{generate_dataset, TargetFunction, TargetKind};
use kerf_lab::forests::forest_predict;
use kerf_lab::kernel::{kerf_predict_finite, kerf_predict_infinite};
use kerf_lab::rng::substream;
use kerf_lab::{CenteredTree, DirectionalSchedule, KernelSpec, Point};

pub fn run() -> kerf_lab::Result<[f64; 4]> {
    let (k, d, m) = (5, 2, 300);
    let target = TargetFunction::benchmark(TargetKind::Quadratic);
    let data = generate_dataset(&target, 400, d, &mut substream(11, &[0]))?;
    let x = Point::new(vec![0.7, 0.2])?;

    let mut rng = substream(11, &[1]);
    let centered: Vec<_> = (0..m).map(|_| CenteredTree::sample(k, d, &mut rng)).collect::<Result<_, _>>()?;
    let directional: Vec<_> = (0..m).map(|_| DirectionalSchedule::sample(k, d, &mut rng)).collect::<Result<_, _>>()?;

    let out = [
        kerf_predict_finite(&centered, &data, &x)?.value,
        kerf_predict_finite(&directional, &data, &x)?.value,
        kerf_predict_infinite(&KernelSpec::centered(k, d)?, &data, &x)?.value,
        forest_predict(&centered, &data, &x)?.value,
    ];
    println!("m(x)                    {:.4}", target.mean(x.coords()));
    println!("centered KeRF   (M={m}) {:.4}", out[0]);
    println!("directional KeRF(M={m}) {:.4}", out[1]);
    println!("infinite KeRF           {:.4}", out[2]);
    println!("centered forest         {:.4}", out[3]);
    Ok(out)
}

fn main() -> kerf_lab::Result<()> {
    run().map(|_| ())
}
