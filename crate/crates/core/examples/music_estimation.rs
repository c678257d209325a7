// End-to-end estimation of one channel with each receiver front end.
//
// ```bash
// cargo run --release -p sdmimo --example music_estimation
// ```

use sdmimo::channel::{make_los_channel, ArrayGeometry, ReceiverNoise};
use sdmimo::estimator::AngleGrid;
use sdmimo::experiments::{db_to_linear, Method, MethodPipeline};
use sdmimo::pilots::predistort_pilots;
use sdmimo::Complex64;

pub fn run_example() -> sdmimo::Result<()> {
    let bs = ArrayGeometry::with_ratio(128, 0.125)?;
    let ms = ArrayGeometry::with_ratio(8, 0.125)?;
    let pilots = predistort_pilots(8)?;
    let scenario = make_los_channel(23.7, -41.2, Complex64::from_polar(1.0, 2.1), bs, ms)?;
    println!("true θ = 23.7°, φ = −41.2°, α = {:.4}", scenario.gain);

    for snr_db in [-5.0, 10.0] {
        let p = db_to_linear(snr_db);
        for method in [Method::Uq, Method::Sd, Method::OneBit] {
            let pipeline =
                MethodPipeline::new(method, p, bs, ms, &pilots, 1, AngleGrid::default())?;
            let outcome = pipeline.run(&scenario, ReceiverNoise::Seeded(11))?;
            println!(
                "{snr_db:>5} dB {method:<6} NMSE {:.3e}{}",
                outcome.nmse(),
                pipeline
                    .level_b()
                    .map(|b| format!("  (b = {b:.4})"))
                    .unwrap_or_default()
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdmimo::Result<()> {
    run_example()
}
