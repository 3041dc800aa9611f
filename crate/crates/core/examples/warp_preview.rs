// Warps a sentence under both objectives and prints what the model sees.
//
// ```text
// cargo run --example warp_preview
// ```

use wlm::nnet::Objective;
use wlm::synth::bundled;
use wlm::textcore::Vocab;
use wlm::warp::{render_preview, warp, WarpOp};

const SENTENCE: &str = "show me the cheapest flights from boston to denver on monday morning";

pub fn run_example() -> wlm::Result<()> {
    let vocab = Vocab::build(bundled::TOY_TRAIN, 1, usize::MAX, true)?;
    let ids = vocab.encode(SENTENCE);
    for objective in Objective::ALL {
        let cfg = objective.warp_config();
        println!("== {objective} ==");
        for seed in 0..4 {
            let ex = warp(&ids, &cfg, &vocab, seed)?;
            let counts: Vec<String> = WarpOp::ALL
                .iter()
                .filter(|&&op| ex.plan.count(op) > 0)
                .map(|&op| format!("{}={}", op.name(), ex.plan.count(op)))
                .collect();
            println!("seed {seed}: {} -> {} tokens [{}]", ids.len(), ex.input_ids.len(), counts.join(" "));
            print!("{}", render_preview(&ex, &vocab)?);
            if objective == Objective::Mlm {
                assert_eq!(ex.input_ids.len(), ids.len());
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> wlm::Result<()> {
    run_example()
}
