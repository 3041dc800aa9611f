// Simulates recognition errors on the bundled test set and shows how slot
// labels follow the alignment.
//
// ```text
// cargo run --example asr_noise
// ```

use wlm::asrsim::{align, make_noisy_slu_set, NoiseConfig};
use wlm::synth::bundled_task;
use wlm::textcore::Vocab;

pub fn run_example() -> wlm::Result<()> {
    let ops = align(&["show", "flights", "to", "denver"], &["show", "me", "flights", "two", "denver"]);
    println!("alignment: {}", serde_json::to_string(&ops)?);

    let [_, _, test] = bundled_task()?;
    let vocab = Vocab::build(wlm::synth::bundled::PRETRAIN_TRAIN, 1, usize::MAX, true)?;
    let cfg = NoiseConfig::test();
    let noisy = make_noisy_slu_set(&test, &cfg, &vocab, 5)?;
    for (clean, hyp) in test.utterances.iter().zip(&noisy.dataset.utterances).take(3) {
        println!("intent {}", clean.intent);
        println!("  ref: {}", tagged(&clean.tokens, &clean.tags));
        println!("  hyp: {}", tagged(&hyp.tokens, &hyp.tags));
    }
    let s = noisy.stats;
    println!(
        "{} reference words: {} sub, {} del, {} ins, WER {:.3} (nominal {:.3})",
        s.n_ref,
        s.n_sub,
        s.n_del,
        s.n_ins,
        s.wer,
        cfg.nominal_wer()
    );
    assert!(noisy.dataset.utterances.iter().all(|u| wlm::slu::iob::is_valid(&u.tags)));
    Ok(())
}

fn tagged(tokens: &[String], tags: &[String]) -> String {
    tokens
        .iter()
        .zip(tags)
        .map(|(w, t)| if t == "O" { w.clone() } else { format!("{w}/{t}") })
        .collect::<Vec<_>>()
        .join(" ")
}

#[allow(dead_code)]
fn main() -> wlm::Result<()> {
    run_example()
}
