//! Runs every verification experiment at its default configuration and
//! prints one PASS/FAIL line per criterion.

use meanfield::experiments::{Experiment, EXPERIMENT_NAMES};

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for name in EXPERIMENT_NAMES {
        let experiment = Experiment::by_name(name).expect("registered experiment");
        match experiment.run() {
            Ok(report) => {
                println!("{}", report.summary_line());
                for (label, value) in &report.info {
                    println!("    {label}: {value:.6}");
                }
                for note in &report.notes {
                    println!("    note: {note}");
                }
                if !report.passed {
                    failed.push(name);
                }
            }
            Err(e) => {
                println!("criterion {} {name}: FAIL (error: {e})", experiment.id());
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
