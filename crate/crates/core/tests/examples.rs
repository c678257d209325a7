mod quantize_trace_example {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/quantize_trace.rs"
    ));
}

mod pilot_design_example {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/pilot_design.rs"
    ));
}

mod los_channel_example {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/los_channel.rs"
    ));
}

mod music_estimation_example {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/music_estimation.rs"
    ));
}

mod correlation_example {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/correlation.rs"
    ));
}

mod nmse_sweep_example {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/nmse_sweep.rs"
    ));
}

mod noise_shaping_example {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/noise_shaping.rs"
    ));
}

#[test]
fn quantize_trace_example_runs() {
    quantize_trace_example::run_example().expect("quantize_trace example should run");
}

#[test]
fn pilot_design_example_runs() {
    pilot_design_example::run_example().expect("pilot_design example should run");
}

#[test]
fn los_channel_example_runs() {
    los_channel_example::run_example().expect("los_channel example should run");
}

#[test]
fn music_estimation_example_runs() {
    music_estimation_example::run_example().expect("music_estimation example should run");
}

#[test]
fn correlation_example_runs() {
    correlation_example::run_example().expect("correlation example should run");
}

#[test]
fn nmse_sweep_example_runs() {
    nmse_sweep_example::run_example().expect("nmse_sweep example should run");
}

#[test]
fn noise_shaping_example_runs() {
    noise_shaping_example::run_example().expect("noise_shaping example should run");
}
