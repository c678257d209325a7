// Averaged spatial periodogram of the shaped quantization noise.
//
// ```bash
// cargo run --release -p sdmimo --example noise_shaping
// ```

use sdmimo::experiments::noise_shaping_experiment;

pub fn run_example() -> sdmimo::Result<()> {
    let n = 128;
    let report = noise_shaping_experiment(n, 4.37, 500, 9)?;
    println!("  ω/π     power");
    for k in (0..=n / 2).step_by(8) {
        let bar = "#".repeat((report.periodogram[k] / 4.0).round() as usize);
        println!(
            "{:>5.3}  {:>8.3}  {bar}",
            2.0 * k as f64 / n as f64,
            report.periodogram[k]
        );
    }
    println!(
        "|ω| < π/2: {:.1}   |ω| ≥ π/2: {:.1}",
        report.lower_band_power, report.upper_band_power
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdmimo::Result<()> {
    run_example()
}
