//! NSSCR, TVSymp and EDASymp on a window with responses and a 0.12 Hz
//! oscillation, compared with a calm window. Crests of the oscillation pass
//! the SCR amplitude threshold, so NSSCR counts them too.

use std::f64::consts::PI;

use dermalab::cvxeda::{decompose, CvxEdaParams};
use dermalab::features::{detect_scrs, edasymp, nsscr, tvsymp, FeatureParams, SPECTRAL_RATE};
use dermalab::dsp::decimate;
use dermalab::synth::{gen_eda, Oscillation, SynthSpec};

fn describe(name: &str, spec: &SynthSpec) -> Result<(), Box<dyn std::error::Error>> {
    let params = FeatureParams::default();
    let (trace, _) = gen_eda(spec)?;
    let d = decompose(&trace.samples, trace.sample_rate, &CvxEdaParams::default())?;
    let events = detect_scrs(&d.phasic, d.sample_rate, &params);
    let rate = nsscr(&events, spec.duration_s)?;

    let slow = decimate(&trace.samples, trace.sample_rate, SPECTRAL_RATE)?;
    let tv = tvsymp(&slow, &params)?;
    let eda = edasymp(&slow, &params)?;
    println!(
        "{name:<7} NSSCR {rate:.2}/min ({:.1} planted)  TVSymp {:.3}  EDASymp {:.4}  EDASymp_n {:.3}",
        spec.scr_times.len() as f64 * 60.0 / spec.duration_s,
        tv.window_mean,
        eda.band_power,
        eda.normalized
    );
    for e in events.iter().take(3) {
        println!("        onset {:.1} s, peak {:.1} s, rise {:.3}", e.onset_s, e.peak_s, e.amplitude);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let aroused = SynthSpec {
        duration_s: 120.0,
        scr_times: (0..10).map(|k| 4.0 + 11.0 * k as f64 + (k as f64 * 1.7).sin()).collect(),
        scr_amplitudes: vec![0.4; 10],
        noise_std: 0.003,
        oscillations: vec![Oscillation {
            start_s: 0.0,
            end_s: 120.0,
            freq: 0.12,
            amplitude: 0.15,
        }],
        seed: 3,
        ..SynthSpec::default()
    };
    let calm = SynthSpec {
        scr_times: vec![40.0],
        scr_amplitudes: vec![0.2],
        oscillations: vec![Oscillation {
            start_s: 0.0,
            end_s: 120.0,
            freq: 0.02,
            amplitude: 0.3,
        }],
        ..aroused.clone()
    };
    describe("aroused", &aroused)?;
    describe("calm", &calm)?;

    let tone: Vec<f64> = (0..600)
        .map(|i| 2f64.sqrt() * (2.0 * PI * 0.1 * i as f64 / SPECTRAL_RATE).sin())
        .collect();
    println!("unit-variance 0.1 Hz tone: TVSymp {:.4}", tvsymp(&tone, &FeatureParams::default())?.window_mean);
    Ok(())
}
