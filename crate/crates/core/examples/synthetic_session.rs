//! A synthetic session with a planted CO2 relation, written in the ingest
//! formats and read back.
//!
//! ```text
//! cargo run --example synthetic_session -- /tmp/session
//! ```

use dermalab::ingest::{parse_eda_csv, parse_env_csv, parse_events_csv, window_align, EnvChannel};
use dermalab::synth::{gen_session, write_session, Relation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dermalab_synthetic_session"));
    let bundle = gen_session(6, Relation::Co2SuppressesFeature, 7)?;
    write_session(&bundle, &dir)?;
    println!("wrote {}", dir.display());

    for w in &bundle.truth.windows {
        println!(
            "  event {:>2}: co2 {:>6.0} ppm  oscillation {:.3}  {:.1} SCR/min  arousal {:.2}",
            w.event_id, w.co2_ppm, w.oscillation_amplitude, w.scr_per_min, w.arousal_proxy
        );
    }

    let eda = parse_eda_csv(&dir.join("eda.csv"))?;
    let env = parse_env_csv(&dir.join("env.csv"))?;
    let events = parse_events_csv(&dir.join("events.csv"))?;
    println!("eda: {} samples at {} Hz, {:.0} s", eda.len(), eda.sample_rate, eda.duration_s());
    for w in window_align(&eda, &env, &events)? {
        println!(
            "  {:>2} {:<9} {:>5.0} s  co2 {:>6.0}",
            w.event_id,
            w.label.as_str(),
            w.duration_s(),
            w.env.get(EnvChannel::Co2Ppm)
        );
    }
    Ok(())
}
