//! The closed-form flow on a toy 2-D point cloud. A handful of samples are
//! transported from Gaussian noise to a four-point target distribution, once
//! with the exact mixture velocity and once with a top-1 truncation.
//!
//!     cargo run --example flow_field

use nifty::flow::{compute_weights, euler_step, exact_velocity, knn, velocity};
use nifty::patch::PatchSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> nifty::Result<()> {
    let targets = [[2.0, 2.0], [-2.0, 2.0], [-2.0, -2.0], [2.0, -2.0]];
    let data: Vec<f64> = targets.concat();
    let reference = PatchSet::from_parts(1, 1, 2, (0..4).map(|i| (i, 0)).collect(), data)?;
    let pool: Vec<usize> = (0..reference.len()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let steps = 10;
    for sample in 0..5 {
        let start: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (mut exact, mut top1) = (start.clone(), start.clone());
        for i in 0..steps {
            let (t0, t1) = (i as f64 / steps as f64, (i + 1) as f64 / steps as f64);
            let v = exact_velocity(&exact, t0, &reference)?;
            euler_step(&mut exact, t0, t1, &v);

            let v = if t0 == 0.0 {
                exact_velocity(&top1, t0, &reference)?
            } else {
                let q: Vec<f64> = top1.iter().map(|x| x / t0).collect();
                let nn = knn(&q, &pool, &reference, 1)?;
                let nbrs = [reference.patch(nn[0].index)];
                let w = compute_weights(&top1, t0, &nbrs)?;
                velocity(&top1, t0, &nbrs, &w)?
            };
            euler_step(&mut top1, t0, t1, &v);
        }
        println!(
            "sample {sample}: start ({:5.2}, {:5.2})  exact -> ({:5.2}, {:5.2})  top-1 -> ({:5.2}, {:5.2})",
            start[0], start[1], exact[0], exact[1], top1[0], top1[1]
        );
    }

    // Posterior weights sharpen as t grows.
    let psi = [0.3, 0.1];
    let nbrs: Vec<&[f64]> = (0..4).map(|i| reference.patch(i)).collect();
    for t in [0.0, 0.3, 0.6, 0.9] {
        let w = compute_weights(&psi, t, &nbrs)?;
        println!("t = {t:.1}: weights {:?}", w.as_slice().iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>());
    }
    Ok(())
}
