// Pretrains a desk-size encoder for one epoch, fine-tunes it on the
// bundled intent/slot task and scores clean and noisy test sets.
//
// ```text
// cargo run --release --example slu_finetune
// ```

use wlm::asrsim::make_noisy_slu_set;
use wlm::experiment::matrix::pretrain_encoder;
use wlm::experiment::RunConfig;
use wlm::nnet::Objective;
use wlm::slu::{evaluate, finetune, SluLabels};
use wlm::synth::{bundled, bundled_task};
use wlm::textcore::{Corpus, Vocab};

pub fn run_example() -> wlm::Result<()> {
    let cfg = RunConfig {
        epochs: Some(1),
        ft_epochs: Some(8),
        ..RunConfig::default()
    };
    let vocab = Vocab::build(bundled::PRETRAIN_TRAIN, 1, usize::MAX, true)?;
    let train = Corpus::from_text(&vocab, bundled::PRETRAIN_TRAIN, "pretrain_train.txt");
    let val = Corpus::from_text(&vocab, bundled::PRETRAIN_VAL, "pretrain_val.txt");
    let (ckpt, reports) = pretrain_encoder(&cfg, Objective::Wlm, &vocab, &train.sentences, &val.sentences, |_| {})?;
    println!(
        "pretrained: val perplexity {:.1} -> {:.1}",
        reports[0].val_perplexity,
        reports.last().unwrap().val_perplexity
    );

    let [slu_train, slu_val, slu_test] = bundled_task()?;
    let labels = SluLabels::from_datasets(&[&slu_train])?;
    let outcome = finetune(&ckpt, &vocab, &labels, &slu_train, &slu_val, &cfg.finetune_config(0)?, |m| {
        println!(
            "epoch {:2}  loss {:.3}  val joint {:.3}",
            m.epoch, m.train_loss, m.val.joint_accuracy
        )
    })?;
    println!("kept epoch {}", outcome.best_epoch);

    let noisy_test = make_noisy_slu_set(&slu_test, &cfg.test_noise()?, &vocab, 1)?;
    for (name, set) in [("clean", &slu_test), ("noisy", &noisy_test.dataset)] {
        let (m, _) = evaluate(&outcome.model, set, &vocab)?;
        println!(
            "{name} test: intent {:.3}  slot F1 {:.3}  joint {:.3}",
            m.intent_accuracy, m.slot_f1, m.joint_accuracy
        );
    }
    let (m, preds) = evaluate(&outcome.model, &slu_test, &vocab)?;
    let u = &slu_test.utterances[0];
    println!("{}\n  gold {} {:?}\n  pred {} {:?}", u.tokens.join(" "), u.intent, u.tags, preds[0].intent, preds[0].tags);
    assert!(m.intent_accuracy > 0.5);
    Ok(())
}

#[allow(dead_code)]
fn main() -> wlm::Result<()> {
    run_example()
}
