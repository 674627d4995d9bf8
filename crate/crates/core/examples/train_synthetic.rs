// Training an MLP on an exponentially imbalanced synthetic task with and
// without the distribution term, then comparing the test-set regions.
//
// Run with `cargo run --release --example train_synthetic`.

use distloss::dataset::{synth_imbalanced, ShotScheme, Split, SynthSpec};
use distloss::evaluation::{region_metrics, RegionKey};
use distloss::label_space::LabelSpace;
use distloss::nnet::{train, TrainConfig};

pub fn run_example() -> distloss::Result<Vec<(f64, f64)>> {
    let spec = SynthSpec { seed: 1, ..Default::default() };
    let data = synth_imbalanced(&spec)?;
    let space = LabelSpace::new(spec.y_min, spec.y_max, 4.0)?;
    let (x_test, y_test) = data.split(Split::Test);

    let mut rows = Vec::new();
    for dist_weight in [0.0, 1.0] {
        let mut cfg = TrainConfig {
            shot_scheme: ShotScheme::NmaxFractions,
            shot_thresholds: (0.15, 0.5),
            seed: spec.seed,
            ..Default::default()
        };
        cfg.loss.dist_weight = dist_weight;
        let out = train(&data, &space, &cfg, None)?;
        let last = out.log.last().expect("at least one epoch");
        println!("dist_weight {dist_weight}: final train loss {:.3} (dist term {:.3})", last.train_loss, last.train_dist_term);

        let pred = out.params.predict(x_test.view())?;
        let report = region_metrics(&pred, &y_test, &out.regions, &space, cfg.gm_eps)?;
        for key in [RegionKey::All, RegionKey::Many, RegionKey::Median, RegionKey::Few] {
            let r = report.region(key);
            println!("  {:<6} n={:<5} MAE {:.3}", key.as_str(), r.count, r.mae.unwrap_or(f64::NAN));
        }
        println!("  W1(pred hist, label hist) = {:.3}", report.wasserstein1);
        rows.push((report.few_mae().unwrap_or(f64::NAN), report.wasserstein1));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> distloss::Result<()> {
    run_example().map(|_| ())
}
