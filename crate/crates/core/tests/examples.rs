mod pseudo_labels {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/pseudo_labels.rs"));
}
mod soft_sort {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/soft_sort.rs"));
}
mod dist_loss_gradient {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/dist_loss_gradient.rs"));
}
mod shot_regions {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/shot_regions.rs"));
}
mod train_synthetic {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/train_synthetic.rs"));
}
mod run_pipeline {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/run_pipeline.rs"));
}

#[test]
fn pseudo_labels_example() {
    let seq = pseudo_labels::run_example().unwrap();
    assert_eq!(seq.len(), 32);
    assert!(seq.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn soft_sort_example() {
    let grad = soft_sort::run_example().unwrap();
    assert!((grad.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn dist_loss_gradient_example() {
    assert!(dist_loss_gradient::run_example().unwrap() < 1e-6);
}

#[test]
fn shot_regions_example() {
    let report = shot_regions::run_example().unwrap();
    assert_eq!(report.region(distloss::evaluation::RegionKey::All).count, 60);
}

#[test]
fn train_synthetic_example() {
    let rows = train_synthetic::run_example().unwrap();
    assert!(rows[1].0 < rows[0].0, "{rows:?}");
}

#[test]
fn run_pipeline_example() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = run_pipeline::run_example(dir.path().to_path_buf()).unwrap();
    let cfg = distloss::run::RunConfig::load(&run_dir.join("config.txt")).unwrap();
    assert_eq!(cfg.tag, "pipeline");
    assert!(run_dir.join("ablate_seq_loss_kind.csv").exists());
}
