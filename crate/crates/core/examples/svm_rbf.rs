//! RBF-kernel SVM trained by SMO on an XOR layout, with the raw dual solve
//! shown alongside the one-vs-one multiclass wrapper.

use mmsb::fusion::{smo_solve, svm_train, SvmModel, SvmParams};
use mmsb::seed;
use rand::Rng;

fn main() -> mmsb::Result<()> {
    let mut rng = seed::rng(5, 0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..200 {
        let p: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        ys.push(usize::from(p[0] * p[1] > 0.0));
        xs.push(p);
    }
    let (train_x, test_x) = xs.split_at(150);
    let (train_y, test_y) = ys.split_at(150);

    let params = SvmParams {
        c: 10.0,
        gamma: Some(2.0),
        ..Default::default()
    };
    let model = svm_train(train_x, train_y, 2, &params, 5)?;
    let preds = model.predict_all(test_x)?;
    let correct = preds.iter().zip(test_y).filter(|(p, y)| p == y).count();
    let m = &model.machines[0];
    println!(
        "held-out accuracy {correct}/{}; {} support vectors, dual objective {:.4}",
        test_y.len(),
        m.support_vectors.len(),
        m.objective
    );

    // the same dual problem through the solver directly
    let n = train_x.len();
    let y: Vec<f64> = train_y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = train_x[i].iter().zip(&train_x[j]).map(|(a, b)| (a - b).powi(2)).sum();
            k[i * n + j] = (-2.0 * d2).exp();
        }
    }
    let sol = smo_solve(&k, &y, 10.0, 1e-3, 10_000_000, 5)?;
    println!("smo_solve: {} iterations, objective {:.4}, rho {:.4}", sol.iterations, sol.objective, sol.rho);

    let restored = SvmModel::from_json(&model.to_json()?)?;
    println!("JSON round-trip predicts identically: {}", restored.predict_all(test_x)? == preds);
    Ok(())
}
