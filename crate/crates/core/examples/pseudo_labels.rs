// From training labels to the pseudo-label sequence a batch is matched against.
//
// Run with `cargo run --example pseudo_labels`.

use distloss::label_space::{kde_density, Bandwidth, LabelDensity, LabelSpace};
use distloss::pseudo::{expand_pseudo_labels, expected_frequencies, make_pseudo_labels, round_frequencies};

pub fn run_example() -> distloss::Result<Vec<f64>> {
    // Frequencies (1, 2, 3, 1) over labels (1, 3, 4, 6).
    let space = LabelSpace::new(1.0, 7.0, 1.0)?;
    let seq = expand_pseudo_labels(&space, &[1, 0, 2, 3, 0, 1])?;
    println!("expanded: {:?}", seq.values());

    // Batch sizes rarely divide evenly: the leftover units go to both ends.
    let density = LabelDensity::from_probs(LabelSpace::new(0.0, 3.0, 1.0)?, vec![0.35, 0.35, 0.30])?;
    let real = expected_frequencies(&density, 10)?;
    let ints = round_frequencies(&real, 10)?;
    println!("expected {real:?} -> rounded {ints:?}");

    // Skewed labels, smoothed with a Gaussian KDE.
    let labels: Vec<f64> = (0..200).map(|i| 10.0 * (i as f64 / 200.0).powi(3)).collect();
    let space = LabelSpace::new(0.0, 10.0, 1.0)?;
    let density = kde_density(&space, &labels, Bandwidth::Auto)?;
    for (c, p) in space.centers().iter().zip(density.probs()) {
        println!("{c:>5.1} {p:.4} {}", "#".repeat((p * 100.0).round() as usize));
    }
    let batch = make_pseudo_labels(&density, 32)?;
    println!("32 pseudo-labels: {:?}", batch.values());
    Ok(batch.values().to_vec())
}

#[allow(dead_code)]
fn main() -> distloss::Result<()> {
    run_example().map(|_| ())
}
