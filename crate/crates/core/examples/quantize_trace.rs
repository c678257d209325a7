// One pass through the spatial sigma-delta converter.
//
// Prints the recursion intermediates for a short array and checks them
// against the closed-form noise, the floor identity and the linearized
// reconstruction `y = x + 2b·U⁻¹·q̃`.
//
// ```bash
// cargo run -p sdmimo --example quantize_trace
// ```

use sdmimo::quantizer::{
    floor_identity_residual, quantization_noise_closed_form, sigma_delta_forward, SigmaDeltaConfig,
};
use sdmimo::{max_abs, CVector, Complex64};

pub fn run_example() -> sdmimo::Result<()> {
    let b = 1.0;
    let config = SigmaDeltaConfig::new(8, b)?;
    let x = CVector::from_fn(8, |i, _| {
        let t = i as f64 * 0.4;
        Complex64::new(0.6 * t.cos(), 0.6 * t.sin())
    });
    let trace = sigma_delta_forward(&x, &config)?;

    println!("  i        x_i                r_i                y_i            q̃_i");
    for i in 0..8 {
        println!(
            "{i:>3}  {:>+6.3}{:>+7.3}j  {:>+6.3}{:>+7.3}j  {:>+3}{:>+3}j  {:>+6.3}{:>+7.3}j",
            trace.input_x[i].re,
            trace.input_x[i].im,
            trace.prequant_r[i].re,
            trace.prequant_r[i].im,
            trace.output_y[i].re,
            trace.output_y[i].im,
            trace.floor_noise_qtilde[i].re,
            trace.floor_noise_qtilde[i].im,
        );
    }

    let closed = quantization_noise_closed_form(&trace.input_x, &config)?;
    println!(
        "closed form vs y − r:      {:e}",
        max_abs(&(closed - &trace.noise_e))
    );
    println!(
        "floor identity residual:   {:e}",
        floor_identity_residual(&trace, &config)
    );
    let shaped =
        config.accumulator_inverse().map(|v| Complex64::new(v, 0.0)) * &trace.floor_noise_qtilde;
    let rebuilt = &trace.input_x + shaped * Complex64::new(2.0 * b, 0.0);
    println!(
        "reconstruction error:      {:e}",
        max_abs(&(rebuilt - &trace.output_y))
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdmimo::Result<()> {
    run_example()
}
