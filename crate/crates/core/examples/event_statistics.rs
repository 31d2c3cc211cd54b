//! Kruskal-Wallis and Spearman on hand-made event groups.

use dermalab::stats::{chi2_upper_tail, kruskal_wallis, midranks, spearman_rho};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rest = vec![0.41, 0.55, 0.38, 0.61, 0.47];
    let pristine = vec![0.52, 0.66, 0.49, 0.71];
    let polluted = vec![0.93, 1.12, 0.85, 1.30, 0.99, 1.05];
    let k = kruskal_wallis(&[rest.clone(), pristine.clone(), polluted.clone()])?;
    println!("rest/pristine/polluted: H {:.3}, df {}, p {:.4}", k.h, k.df, k.p);

    let k = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]])?;
    println!("ordered triples: H {:.1}, p {:.5} (e^-3.6 = {:.5})", k.h, k.p, (-3.6f64).exp());
    println!("chi2 tail, df 1 at 3.841: {:.4}", chi2_upper_tail(3.841, 1)?);

    println!("midranks of [3, 1, 3, 2]: {:?}", midranks(&[3.0, 1.0, 3.0, 2.0]));
    let arousal = [2.0, 3.0, 3.0, 5.0, 6.0, 8.0];
    let nsscr = [0.5, 1.1, 0.9, 2.4, 2.0, 3.7];
    println!("Spearman(arousal, nsscr) {:.3}", spearman_rho(&arousal, &nsscr)?);
    println!("Spearman([1,2,3], [3,1,2]) {}", spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0])?);
    Ok(())
}
