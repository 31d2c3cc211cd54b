//! Random forest regression with exact Shapley attributions.

use dermalab::forest::{
    evaluate_regression, exact_shapley, fit, shap_summary_points, train_test_split, ForestParams, Task,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x: Vec<Vec<f64>> = (0..400)
        .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    // x1 matters most, x2 a little, x3 interacts with x1, x4 is noise
    let y: Vec<f64> = x
        .iter()
        .map(|r| 3.0 * r[0] + 0.5 * r[1] + 2.0 * r[0] * r[2] + 0.05 * rng.random_range(-1.0..1.0))
        .collect();
    let names: Vec<String> = ["x1", "x2", "x3", "x4"].iter().map(|s| s.to_string()).collect();

    let (train, test) = train_test_split(x.len(), 0.7, 7)?;
    let rows = |idx: &[usize]| idx.iter().map(|&i| x[i].clone()).collect::<Vec<_>>();
    let targets = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<_>>();
    let params = ForestParams {
        n_trees: 200,
        seed: 7,
        ..ForestParams::regression()
    };
    let model = fit(&rows(&train), &targets(&train), Task::Regression, &names, &params)?;
    println!("held-out R2 {:.3}", evaluate_regression(&model, &rows(&test), &targets(&test))?);
    println!("impurity importance {:?}", model.impurity_importance().iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());

    let background: Vec<Vec<f64>> = rows(&train).into_iter().take(40).collect();
    let row = [0.9, 0.2, 0.8, 0.5];
    let s = exact_shapley(&model, &row, &background)?;
    println!("row {row:?}");
    println!("  base {:.3} + phi {:?} = {:.3} (prediction {:.3})",
        s.base_value,
        s.values.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
        s.base_value + s.values.iter().sum::<f64>(),
        s.prediction
    );

    let points = shap_summary_points(&model, &rows(&test)[..20], &background)?;
    let mut mean_abs = [0.0; 4];
    for p in &points {
        mean_abs[p.feature] += p.shap.abs() / 20.0;
    }
    for (name, v) in names.iter().zip(mean_abs) {
        println!("  mean |phi| {name}: {v:.3}");
    }
    Ok(())
}
