// Differentiable sorting: exact at small epsilon, pooled at large epsilon,
// with a closed-form backward pass.
//
// Run with `cargo run --example soft_sort`.

use distloss::softsort::{soft_sort, SoftSortConfig};

pub fn run_example() -> distloss::Result<Vec<f64>> {
    let x = [5.0, 2.0, 6.0, 3.0, 2.0, 7.0, 1.0];
    let hard = soft_sort(&x, &SoftSortConfig::ascending())?;
    println!("sorted:      {:?}", hard.sorted_values);
    println!("permutation: {:?}", hard.permutation);

    for eps in [0.1, 0.5, 1.0, 10.0] {
        let r = soft_sort(&x, &SoftSortConfig::ascending().with_epsilon(eps))?;
        let vals: Vec<String> = r.sorted_values.iter().map(|v| format!("{v:.3}")).collect();
        println!("eps {eps:>4}: [{}]  blocks {:?}", vals.join(", "), r.blocks);
    }

    // Pulling the largest output up moves every input pooled with it.
    let r = soft_sort(&x, &SoftSortConfig::ascending().with_epsilon(1.0))?;
    let mut upstream = vec![0.0; x.len()];
    upstream[x.len() - 1] = 1.0;
    let grad = r.vjp(&upstream)?;
    println!("d(sorted[last])/dx = {grad:?}");
    Ok(grad)
}

#[allow(dead_code)]
fn main() -> distloss::Result<()> {
    run_example().map(|_| ())
}
