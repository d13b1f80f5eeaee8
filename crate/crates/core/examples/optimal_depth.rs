// Picks the duct depth from simulated noisy CTD casts.

use std::path::Path;

use auvnet::channel::SoundSpeedProfile;
use auvnet::vehicle::{optimal_depth, CtdCast};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct DepthReport {
    pub true_minimum_m: f64,
    pub noiseless_m: f64,
    pub noisy: Vec<f64>,
}

pub fn run_example() -> Result<DepthReport, Box<dyn std::error::Error>> {
    let ssp = SoundSpeedProfile::load(Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/ssp_afternoon.csv"
    )))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noiseless_m = optimal_depth(&CtdCast::descend(&ssp, 0.0, 40.0, 0.0, 0.5, &mut rng))?;
    let noisy = (0..200)
        .map(|_| optimal_depth(&CtdCast::descend(&ssp, 0.0, 40.0, 0.05, 0.5, &mut rng)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DepthReport {
        true_minimum_m: ssp.minimum().0,
        noiseless_m,
        noisy,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = run_example()?;
    let within = r.noisy.iter().filter(|d| (*d - r.true_minimum_m).abs() <= 2.0).count();
    println!(
        "profile minimum {:.2} m, noiseless cast picks {:.2} m",
        r.true_minimum_m, r.noiseless_m
    );
    println!("{within}/{} noisy casts within 2 m of the minimum", r.noisy.len());
    Ok(())
}
