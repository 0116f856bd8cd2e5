//! Labelling the synthetic relevance tasks and checking a small net's gradients.
use ragdepth::rng;
use ragdepth::toy::{brute_force_labels, counting_labels, gen_task, random_gradcheck, PredicateKind};

fn main() -> ragdepth::Result<()> {
    let mut r = rng::stream(3, 0);
    for kind in [PredicateKind::Pairwise, PredicateKind::Triplewise, PredicateKind::VirtualPairwise] {
        let task = gen_task(kind, 6, 7, &mut r)?;
        let values: Vec<u32> = task.tokens.iter().map(|t| t.w_part).collect();
        let (labels, _) = brute_force_labels(kind, task.modulus, &task.tokens)?;
        assert_eq!(labels, counting_labels(kind, task.modulus, &task.tokens));
        println!("{:<17} values {values:?} labels {:?}", kind.name(), task.labels);
    }
    for k in 0..3 {
        let row = random_gradcheck(0, k)?;
        println!("net {k}: {} params, max relative error {:.2e}", row.params, row.max_rel_error);
    }
    Ok(())
}
