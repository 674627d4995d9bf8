use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use distloss::evaluation::RegionKey;
use distloss::run::{cmd_ablate, cmd_eval, cmd_gen, cmd_train, AblationAxis, RunConfig};
use distloss::{Error, Result};

fn cli() -> Command {
    let mut cmd = Command::new("distloss")
        .about("Synthesize imbalanced regression data, train with Dist Loss, evaluate, and sweep")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("flat key = value config file"));
    for &key in RunConfig::KEYS {
        cmd = cmd.arg(Arg::new(key).long(key).global(true).value_name("VALUE").hide_short_help(true));
    }
    cmd.subcommand(Command::new("gen").about("write the synthetic dataset and print its train-label histogram"))
        .subcommand(Command::new("train").about("train and write checkpoint.json and epochs.json"))
        .subcommand(
            Command::new("eval")
                .about("evaluate on the test split and write report and histogram files")
                .arg(Arg::new("checkpoint").long("checkpoint").value_name("FILE")),
        )
        .subcommand(
            Command::new("ablate")
                .about("train and evaluate one run per value of an axis and write a table")
                .arg(
                    Arg::new("axis")
                        .long("axis")
                        .required(true)
                        .value_parser(["seq_loss_kind", "batch_size", "dist_weight", "imbalance_ratio"]),
                )
                .arg(Arg::new("values").long("values").value_name("V1,V2,...")),
        )
}

fn resolve(m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => RunConfig::load(&PathBuf::from(path))?,
        None => RunConfig::default(),
    };
    for &key in RunConfig::KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn fmt_mae(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

fn run(m: &ArgMatches) -> Result<()> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    let cfg = resolve(sub)?;
    match name {
        "gen" => {
            let out = cmd_gen(&cfg)?;
            eprintln!("wrote {} ({} rows)", out.dataset_path.display(), out.dataset.len());
            print!("{}", out.train_histogram);
        }
        "train" => {
            let out = cmd_train(&cfg)?;
            for e in &out.log {
                let few = e.val.as_ref().and_then(|v| v.iter().find(|r| r.region == RegionKey::Few)).and_then(|r| r.mae);
                println!("epoch {:>3}  lr {:.1e}  loss {:.4}  val few-shot MAE {}", e.epoch, e.lr, e.train_loss, fmt_mae(few));
            }
            eprintln!("wrote {}", cfg.run_dir().join("checkpoint.json").display());
        }
        "eval" => {
            let ckpt = sub.get_one::<String>("checkpoint").map(PathBuf::from);
            let report = cmd_eval(&cfg, ckpt.as_deref())?;
            for r in &report.regions {
                println!("{:<7} n={:<6} MAE {:>8}  GM {:>8}", r.region.as_str(), r.count, fmt_mae(r.mae), fmt_mae(r.gm));
            }
            println!("wasserstein1 {:.4}", report.wasserstein1);
        }
        "ablate" => {
            let axis: AblationAxis = sub.get_one::<String>("axis").expect("required").parse()?;
            let values: Vec<String> = sub
                .get_one::<String>("values")
                .map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
                .unwrap_or_default();
            let table = cmd_ablate(&cfg, axis, &values)?;
            print!("{}", table.to_csv().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n") + "\n");
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Error::exit_code(&e) as u8)
        }
    }
}
