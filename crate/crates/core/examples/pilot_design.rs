// Predistorted Hadamard pilots for a 1-bit sigma-delta transmitter.
//
// Feeding `T = (1 + j)·G'` (a Hadamard matrix with its first row zeroed)
// through the `b = 1` converter emits exactly `S = G + jG`, whose rows are
// orthogonal: `S·Sᴴ = 2N_t·I`.
//
// ```bash
// cargo run -p sdmimo --example pilot_design
// ```

use sdmimo::pilots::{predistort_pilots, verify_pilots};
use sdmimo::quantizer::{sigma_delta_columns, SigmaDeltaConfig};
use sdmimo::CMatrix;

fn show(label: &str, m: &CMatrix) {
    println!("{label}:");
    for row in m.row_iter() {
        let cells: Vec<String> = row
            .iter()
            .map(|z| format!("{:>+2}{:>+2}j", z.re, z.im))
            .collect();
        println!("  {}", cells.join(" "));
    }
}

pub fn run_example() -> sdmimo::Result<()> {
    let pilots = predistort_pilots(4)?;
    println!("Hadamard G:\n{}", pilots.hadamard);
    show("predistorted T", &pilots.predistorted);
    let emitted = sigma_delta_columns(&pilots.predistorted, &SigmaDeltaConfig::new(4, 1.0)?)?;
    show("converter output", &emitted);
    println!("S·Sᴴ = {}", &pilots.transmit * pilots.transmit.adjoint());

    for n_t in [2, 4, 8, 16, 32, 64] {
        println!(
            "N_t = {n_t:>2}: verified = {}",
            verify_pilots(&predistort_pilots(n_t)?)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdmimo::Result<()> {
    run_example()
}
