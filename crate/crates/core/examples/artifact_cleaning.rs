//! Z-score artifact removal and standardization.

use dermalab::dsp::{standardize, zscore_clean, CleanParams, Replacement};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut x: Vec<f64> = (0..600).map(|i| 2.0 + 0.2 * (i as f64 * 0.05).sin()).collect();
    // electrode pops
    x[120] = 9.0;
    x[121] = 8.5;
    x[400] = -3.0;

    let params = CleanParams::default();
    let (cleaned, flagged) = zscore_clean(&x, &params)?;
    println!("flagged {flagged:?}");
    println!("sample 120: {:.3} -> {:.3}", x[120], cleaned[120]);

    let (dropped, _) = zscore_clean(
        &x,
        &CleanParams {
            replacement: Replacement::Drop,
            ..params
        },
    )?;
    println!("drop mode keeps {} of {} samples", dropped.len(), x.len());

    let z = standardize(&cleaned)?;
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64;
    println!("standardized mean {mean:.2e}, variance {var:.6}");
    Ok(())
}
