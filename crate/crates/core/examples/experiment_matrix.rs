// A reduced experiment matrix: both objectives, all three train/test
// settings, two seeds and short schedules.
//
// ```text
// cargo run --release --example experiment_matrix
// ```
//
// The full run is `wlm experiment` with the defaults.

use wlm::experiment::{cmd_experiment, RunConfig};

pub fn run_example() -> wlm::Result<()> {
    let dir = tempfile::tempdir()?;
    let cfg = RunConfig {
        epochs: Some(1),
        ft_epochs: Some(4),
        seeds: Some(vec![0, 1]),
        out_dir: Some(dir.path().to_path_buf()),
        ..RunConfig::default()
    };
    let report = cmd_experiment(&cfg, &mut std::io::stdout(), |msg| println!("{msg}"))?;
    assert_eq!(report.runs.len(), 2 * 3 * 2);
    for name in ["report.txt", "report.jsonl", "pretrain_mlm.ckpt", "pretrain_wlm.ckpt"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> wlm::Result<()> {
    run_example()
}
