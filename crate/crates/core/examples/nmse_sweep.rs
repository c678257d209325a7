// A reduced NMSE-versus-SNR sweep printed as CSV.
//
// The full-size run (200 trials, six SNR points) is
// `sdmimo nmse --config <file>`; this example keeps it short.
//
// ```bash
// cargo run --release -p sdmimo --example nmse_sweep
// ```

use sdmimo::experiments::{nmse_sweep, MonteCarloConfig};
use sdmimo::output::nmse_csv;

pub fn run_example() -> sdmimo::Result<()> {
    let config = MonteCarloConfig {
        snr_db_list: vec![-10.0, 0.0, 10.0],
        n_trials: 20,
        base_seed: 2024,
        ..MonteCarloConfig::default()
    };
    let table = nmse_sweep(&config)?;
    print!("{}", nmse_csv(&table));
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdmimo::Result<()> {
    run_example()
}
