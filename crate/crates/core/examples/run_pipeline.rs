// The file-based workflow behind the `distloss` binary: a flat config,
// then gen, train, eval and a loss-variant sweep in one run directory.
//
// Run with `cargo run --release --example run_pipeline [out_dir]`.

use std::path::PathBuf;

use distloss::run::{cmd_ablate, cmd_eval, cmd_gen, cmd_train, AblationAxis, RunConfig};

const CONFIG: &str = "
# small and quick
tag = pipeline
n_train = 3000
n_eval = 500
epochs = 6
milestones = 4,5
batch_size = 128
threads = 2
";

pub fn run_example(out_dir: PathBuf) -> distloss::Result<PathBuf> {
    let mut cfg = RunConfig::parse(CONFIG)?;
    cfg.out_dir = out_dir;

    let gen = cmd_gen(&cfg)?;
    println!("dataset: {} rows at {}", gen.dataset.len(), gen.dataset_path.display());
    cmd_train(&cfg)?;
    let report = cmd_eval(&cfg, None)?;
    println!("few-shot MAE {:?}, W1 {:.3}", report.few_mae(), report.wasserstein1);

    let table = cmd_ablate(&cfg, AblationAxis::SeqLossKind, &[])?;
    print!("{}", table.to_csv().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n") + "\n");

    std::fs::write(cfg.run_dir().join("config.txt"), cfg.to_text()).map_err(|e| distloss::Error::Io { path: cfg.run_dir(), source: e })?;
    Ok(cfg.run_dir())
}

#[allow(dead_code)]
fn main() -> distloss::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("distloss-example"));
    let dir = run_example(out)?;
    println!("outputs in {}", dir.display());
    Ok(())
}
