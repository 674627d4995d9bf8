// Shot regions and the per-region report for a fixed set of predictions.
//
// Run with `cargo run --example shot_regions`.

use distloss::dataset::{assign_regions, ShotScheme};
use distloss::evaluation::{region_metrics, report_to_csv, RegionKey, RegionReport, DEFAULT_GM_EPS};
use distloss::label_space::LabelSpace;

pub fn run_example() -> distloss::Result<RegionReport> {
    let space = LabelSpace::new(0.0, 6.0, 1.0)?;
    let train: Vec<f64> = [(0.5, 300), (1.5, 150), (2.5, 60), (3.5, 25), (4.5, 8), (5.5, 2)]
        .iter()
        .flat_map(|&(y, n)| std::iter::repeat_n(y, n))
        .collect();

    for scheme in [ShotScheme::AbsoluteCounts, ShotScheme::NmaxFractions] {
        let r = assign_regions(&train, &space, scheme, scheme.default_thresholds())?;
        let names: Vec<&str> = r.regions.iter().map(|g| g.as_str()).collect();
        println!("{scheme:?} {:?}: {names:?}", scheme.default_thresholds());
    }

    // A regressor that shrinks everything toward the head of the distribution.
    let regions = assign_regions(&train, &space, ShotScheme::AbsoluteCounts, (20.0, 100.0))?;
    let targets: Vec<f64> = (0..60).map(|i| 0.05 + i as f64 * 0.1).collect();
    let preds: Vec<f64> = targets.iter().map(|y| 0.6 * y + 0.3).collect();
    let report = region_metrics(&preds, &targets, &regions, &space, DEFAULT_GM_EPS)?;
    print!("{}", report_to_csv(&report));
    println!("few-shot MAE {:?}, all {:?}", report.few_mae(), report.region(RegionKey::All).mae);
    Ok(report)
}

#[allow(dead_code)]
fn main() -> distloss::Result<()> {
    run_example().map(|_| ())
}
