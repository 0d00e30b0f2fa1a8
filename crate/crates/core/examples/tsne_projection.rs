//! 2-D t-SNE of three Gaussian clusters, scored by trustworthiness and
//! written as a projection CSV.

use mmsb::projection::{trustworthiness, tsne_2d, write_projection_csv, ProjectionConfig, ProjectionRow};
use mmsb::seed;
use rand_distr::{Distribution, StandardNormal};

fn main() -> mmsb::Result<()> {
    let mut rng = seed::rng(9, 0);
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3 {
        for _ in 0..50 {
            let p: Vec<f64> = (0..10)
                .map(|d| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    if d == c { 8.0 + noise } else { noise }
                })
                .collect();
            x.push(p);
            labels.push(c);
        }
    }
    let proj = tsne_2d(&x, &ProjectionConfig::default())?;
    let t = trustworthiness(&x, &proj.points, 10)?;
    println!(
        "KL at iteration 250: {:.3}, final: {:.3}, trustworthiness(k=10): {t:.3}",
        proj.kl_trace[249],
        proj.kl_trace.last().copied().unwrap_or(f64::NAN)
    );
    let rows: Vec<ProjectionRow> = proj
        .points
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (p, l))| ProjectionRow {
            utterance_id: format!("p{i:03}"),
            x: p[0],
            y: p[1],
            label: format!("cluster{l}"),
            modality_set: "raw".into(),
        })
        .collect();
    let path = std::env::temp_dir().join("mmsb-tsne.csv");
    write_projection_csv(&path, &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}
