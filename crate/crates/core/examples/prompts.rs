//! Renders one synthetic QA example under several document layouts.
use ragdepth::harness::{assemble_prompt, gen_synthetic_qa, render, to_messages, PromptLayout};
use ragdepth::rng;

fn main() -> ragdepth::Result<()> {
    let ex = gen_synthetic_qa(1, 2, &mut rng::stream(5, 0))?.remove(0);
    for name in ["query_first+gold", "query_last+gold+1", "query_both+gold+2"] {
        let layout = PromptLayout::parse(name)?;
        println!("===== {name}");
        println!("{}", render(&to_messages(&assemble_prompt(&ex, &layout)?)));
    }
    Ok(())
}
