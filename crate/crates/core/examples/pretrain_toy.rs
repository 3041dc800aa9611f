// Pretrains a small encoder on the toy corpus with the warped objective,
// then round-trips it through a checkpoint file.
//
// ```text
// cargo run --release --example pretrain_toy
// ```

use wlm::nnet::{pretrain, Checkpoint, EncoderModel, ModelConfig, Objective, PretrainConfig};
use wlm::seed::derived_rng;
use wlm::synth::bundled;
use wlm::textcore::{Corpus, Vocab, INS};

pub fn run_example() -> wlm::Result<()> {
    let vocab = Vocab::build(bundled::TOY_TRAIN, 1, usize::MAX, true)?;
    let train = Corpus::from_text(&vocab, bundled::TOY_TRAIN, "toy_train.txt");
    let val = Corpus::from_text(&vocab, bundled::TOY_VAL, "toy_val.txt");
    println!("vocab {} types, {} training tokens", vocab.len(), train.num_tokens());

    let mcfg = ModelConfig {
        d_model: 32,
        n_layers: 1,
        n_heads: 2,
        d_ff: 64,
        ..ModelConfig::desk(vocab.len())
    };
    let mut model = EncoderModel::<f32>::new(mcfg, &mut derived_rng(7, 0))?;
    let ins_before = model.ins_embedding().to_vec();
    let mut cfg = PretrainConfig::new(Objective::Wlm, 7);
    cfg.epochs = 6;
    cfg.adam.lr = 3e-3;
    let reports = pretrain(&mut model, &vocab, &train.sentences, &val.sentences, &cfg, |r| {
        println!(
            "epoch {:2}  loss {:>7}  val perplexity {:7.2}  val accuracy {:.3}",
            r.epoch,
            r.train_loss.map_or("-".into(), |l| format!("{l:.3}")),
            r.val_perplexity,
            r.val_accuracy
        )
    })?;
    let (first, last) = (reports[0].val_perplexity, reports.last().unwrap().val_perplexity);
    println!("perplexity {first:.1} -> {last:.1}");
    assert!(last < first);
    assert_eq!(model.ins_embedding(), &ins_before[..], "the [INS] row is frozen");
    assert_eq!(INS, 4);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("toy.ckpt");
    model.to_checkpoint(&vocab.hash(), Some("wlm")).save(&path)?;
    let ckpt = Checkpoint::load(&path)?;
    ckpt.check_vocab(&vocab)?;
    let reloaded = EncoderModel::<f32>::from_checkpoint(&ckpt)?;
    assert_eq!(reloaded.config, model.config);
    println!("checkpoint: {} bytes", std::fs::metadata(&path)?.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> wlm::Result<()> {
    run_example()
}
