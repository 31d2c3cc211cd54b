//! Butterworth design, zero-phase filtering and decimation.
//!
//! ```text
//! cargo run --example filter_design
//! ```

use std::f64::consts::PI;

use dermalab::dsp::{decimate, design_butterworth, zero_phase_filter, DspError, FilterKind};

fn main() -> Result<(), DspError> {
    let lp = design_butterworth(FilterKind::Lowpass, 1.5, 32, 10.0)?;
    println!("lowpass 1.5 Hz, order {} ({} sections)", lp.order, lp.sections.len());
    for f in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
        println!("  {f:>4.1} Hz  {:>9.2} dB", lp.gain_db(f));
    }

    // slow wave plus 3 Hz interference
    let fs = 10.0;
    let x: Vec<f64> = (0..1200)
        .map(|i| {
            let t = i as f64 / fs;
            (2.0 * PI * 0.1 * t).sin() + 0.3 * (2.0 * PI * 3.0 * t).sin()
        })
        .collect();
    let y = zero_phase_filter(&lp, &x)?;
    let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
    println!("rms before {:.4}, after {:.4} (pure 0.1 Hz: {:.4})", rms(&x), rms(&y), 0.5f64.sqrt());

    let slow = decimate(&y, fs, 2.0)?;
    println!("decimated {} -> {} samples", y.len(), slow.len());

    let hp = design_butterworth(FilterKind::Highpass, 0.01, 8, 2.0)?;
    let drift: Vec<f64> = slow.iter().enumerate().map(|(i, v)| v + 5.0 + 0.001 * i as f64).collect();
    let detrended = zero_phase_filter(&hp, &drift)?;
    let mean = detrended.iter().sum::<f64>() / detrended.len() as f64;
    println!("highpass 0.01 Hz removes the offset: mean {mean:.4}");
    Ok(())
}
