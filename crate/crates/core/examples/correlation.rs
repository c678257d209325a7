// Correlation between converter input and quantization noise per antenna,
// for the sigma-delta receiver and a plain 1-bit receiver at the same
// level, broadside channel, SNR −5 dB.
//
// ```bash
// cargo run --release -p sdmimo --example correlation
// ```

use sdmimo::experiments::{correlation_experiment, CorrelationConfig, CorrelationProfile};

pub fn run_example() -> sdmimo::Result<()> {
    let profile = correlation_experiment(&CorrelationConfig::default())?;
    println!("b = {:.5}, {} draws", profile.level_b, profile.n_draws);
    println!("antenna   corr_sd   corr_onebit");
    for i in [1, 2, 3, 4, 8, 16, 32, 64, 96, 128] {
        let fmt = |v: Option<f64>| {
            v.map(|c| format!("{c:+.4}"))
                .unwrap_or_else(|| "   n/a".into())
        };
        println!(
            "{i:>7}   {:>7}   {:>7}",
            fmt(profile.sd[i - 1]),
            fmt(profile.onebit[i - 1])
        );
    }
    let sd = CorrelationProfile::mean_abs(&profile.sd, 65..=128).unwrap_or(f64::NAN);
    let ob = CorrelationProfile::mean_abs(&profile.onebit, 65..=128).unwrap_or(f64::NAN);
    println!(
        "mean |corr| over antennas 65–128: SD {sd:.4}, 1-bit {ob:.4} ({:.1}×)",
        ob / sd
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdmimo::Result<()> {
    run_example()
}
