// Evaluating Dist Loss on one batch and checking its gradient numerically.
//
// Run with `cargo run --example dist_loss_gradient`.

use distloss::label_space::{kde_density, Bandwidth, LabelSpace};
use distloss::loss::{DistLoss, DistLossConfig, SeqLossKind};
use distloss::softsort::SoftSortConfig;

pub fn run_example() -> distloss::Result<f64> {
    let space = LabelSpace::new(0.0, 10.0, 1.0)?;
    let train_labels: Vec<f64> = (0..500).map(|i| 10.0 * (i as f64 / 500.0).powi(2)).collect();
    let density = kde_density(&space, &train_labels, Bandwidth::Auto)?;

    let labels = [0.2, 0.5, 1.1, 2.0, 3.9, 8.7];
    let preds = [1.0, 0.4, 1.5, 2.2, 3.0, 5.1];
    let mut worst: f64 = 0.0;
    for kind in [SeqLossKind::INV_L2, SeqLossKind::INV_L1] {
        let cfg = DistLossConfig { kind, ..Default::default() };
        let mut loss = DistLoss::new(density.clone(), SoftSortConfig::ascending(), cfg)?;
        let out = loss.evaluate(&preds, &labels)?;
        println!("{kind}: total {:.4} = sample {:.4} + dist {:.4}", out.total, out.sample_term, out.dist_term);
        println!("  pseudo-labels {:?}", loss.pseudo_labels(labels.len())?.values());

        let h = 1e-6;
        for i in 0..preds.len() {
            let (mut up, mut dn) = (preds, preds);
            up[i] += h;
            dn[i] -= h;
            let fd = (loss.evaluate(&up, &labels)?.total - loss.evaluate(&dn, &labels)?.total) / (2.0 * h);
            let g = out.grad_predictions[i];
            println!("  d/dpred[{i}]: analytic {g:+.6}  numeric {fd:+.6}");
            worst = worst.max((g - fd).abs());
        }
    }
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> distloss::Result<()> {
    run_example().map(|_| ())
}
