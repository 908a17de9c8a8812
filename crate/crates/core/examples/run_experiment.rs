//! Runs one batch experiment in-process and writes its tables.

use capillary_lab::experiments::{run_experiment, write_report, ExperimentConfig, ExperimentKind};

fn main() -> capillary_lab::Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::CurveBound);
    cfg.samples = Some(50);
    let report = run_experiment(&cfg, 17)?;
    for c in &report.criteria {
        println!("{}", c.line());
    }
    let dir = std::env::temp_dir().join("caplab-example");
    for path in write_report(&report, &dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
