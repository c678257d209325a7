// Line-of-sight channel and one received pilot block.
//
// ```bash
// cargo run -p sdmimo --example los_channel
// ```

use sdmimo::channel::{
    make_los_channel, receive_sigma_delta, steering_vector, synthesize_received, ArrayGeometry,
    ReceiverNoise,
};
use sdmimo::experiments::{db_to_linear, select_voltage_level};
use sdmimo::pilots::predistort_pilots;
use sdmimo::quantizer::SigmaDeltaConfig;
use sdmimo::{max_abs, Complex64};

pub fn run_example() -> sdmimo::Result<()> {
    let bs = ArrayGeometry::with_ratio(128, 0.125)?;
    let ms = ArrayGeometry::with_ratio(8, 0.125)?;
    let a = steering_vector(20.0, &bs);
    println!(
        "a_BS(20°)[0..4] = {:.4} {:.4} {:.4} {:.4}",
        a[0], a[1], a[2], a[3]
    );

    let scenario = make_los_channel(20.0, -10.0, Complex64::from_polar(1.0, 0.7), bs, ms)?;
    let svals = scenario.channel.singular_values();
    println!(
        "H is {}×{}, ‖H‖_F² = {:.3}, σ₁ = {:.3}, σ₂ = {:.2e}",
        scenario.channel.nrows(),
        scenario.channel.ncols(),
        scenario.channel.norm_squared(),
        svals[0],
        svals[1]
    );

    let snr_db = 0.0;
    let p = db_to_linear(snr_db);
    let pilots = predistort_pilots(8)?;
    let record = synthesize_received(&scenario, &pilots.transmit, p, ReceiverNoise::Seeded(7))?;
    let b = select_voltage_level(p, 8);
    println!(
        "SNR {snr_db} dB: max |X| component {:.3}, voltage level b = {b:.5}",
        max_abs(&record.received_x)
    );

    let record = receive_sigma_delta(record, &SigmaDeltaConfig::new(128, b)?)?;
    let y = record.quantized_y.as_ref().expect("quantized");
    let levels = y.iter().all(|z| z.re.abs() == b && z.im.abs() == b);
    println!("receiver output on {{±b ± jb}}: {levels}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdmimo::Result<()> {
    run_example()
}
