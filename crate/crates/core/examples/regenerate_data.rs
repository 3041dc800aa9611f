// Rewrites the bundled data files from the synthetic grammar.
//
// ```text
// cargo run --example regenerate_data
// cargo run --example regenerate_data -- --full DIR
// ```
//
// `--full` writes a 4478/500/893 task to DIR instead, for use with the
// `slu_train`, `slu_val` and `slu_test` config keys.
//
// Run as a test, it writes to a scratch directory and checks the output
// against the files compiled into the library.

use std::path::Path;

pub fn write_bundled(dir: &Path) -> wlm::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in wlm::synth::regenerate_bundled() {
        std::fs::write(dir.join(name), text)?;
        println!("wrote {}", dir.join(name).display());
    }
    Ok(())
}

pub fn run_example() -> wlm::Result<()> {
    let dir = tempfile::tempdir()?;
    write_bundled(dir.path())?;
    for (name, text) in wlm::synth::bundled::FILES {
        let written = std::fs::read_to_string(dir.path().join(name))?;
        assert_eq!(written, text, "{name} is stale; run this example to refresh it");
    }
    write_full_task(&dir.path().join("full"))?;
    let train = wlm::slu::SluDataset::load(dir.path().join("full/slu_train.tsv"))?;
    assert_eq!(train.len(), wlm::synth::FULL_SPLIT[0]);
    Ok(())
}

pub fn write_full_task(dir: &Path) -> wlm::Result<()> {
    std::fs::create_dir_all(dir)?;
    let sets = wlm::synth::generate_task(wlm::synth::TASK_SEED, wlm::synth::FULL_SPLIT);
    for (name, set) in ["slu_train.tsv", "slu_val.tsv", "slu_test.tsv"].iter().zip(&sets) {
        set.save(dir.join(name))?;
        println!("wrote {} ({} utterances)", dir.join(name).display(), set.len());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> wlm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.as_slice() {
        [] => write_bundled(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data")),
        [flag, dir] if flag == "--full" => write_full_task(Path::new(dir)),
        _ => Err(wlm::Error::InvalidConfig("usage: regenerate_data [--full DIR]".into())),
    }
}
