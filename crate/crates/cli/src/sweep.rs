use risopt_core::config::SweepConfig;
use risopt_core::harness::run_sweep;
use risopt_core::plot::sweep_chart;

use crate::{env_workers, Failure, SweepArgs};

pub fn run(args: &SweepArgs, seed: Option<u64>) -> Result<(), Failure> {
    let config = SweepConfig::load(&args.config)?;
    let mut experiment = config.experiment;
    if let Some(seed) = seed {
        experiment.seed = seed;
    }
    if let Some(w) = env_workers()? {
        experiment.workers = Some(w);
    }
    let csv_path = args.out.clone().or(config.csv).ok_or_else(|| {
        Failure::Usage("no CSV destination: pass --out or set [output] csv".into())
    })?;
    let svg_path = args.svg.clone().or(config.svg);

    let result = run_sweep(&experiment)?;
    std::fs::write(&csv_path, result.to_csv())
        .map_err(|e| Failure::Usage(format!("{}: {e}", csv_path.display())))?;
    for r in &result.rows {
        println!(
            "N={} Gs={} mean={:.4e} W stderr={:.2e} W analytic={}",
            r.n,
            r.group_size,
            r.mean_power_w,
            r.stderr_w,
            r.analytic_power_w
                .map(|a| format!("{a:.4e} W"))
                .unwrap_or_else(|| "-".into())
        );
    }
    println!("csv_written: {}", csv_path.display());
    if let Some(svg) = svg_path {
        std::fs::write(&svg, sweep_chart(&result, &experiment.architectures))
            .map_err(|e| Failure::Usage(format!("{}: {e}", svg.display())))?;
        println!("svg_written: {}", svg.display());
    }
    Ok(())
}
