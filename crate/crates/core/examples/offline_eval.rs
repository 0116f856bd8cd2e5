//! Scores a synthetic dataset against a local stand-in model that only
//! answers when the gold document precedes the question.
//!
//! Swap in `ChatClient::from_env(EndpointConfig { .. })` to hit a real
//! endpoint; the key is read from RALM_API_KEY.

use ragdepth::harness::{
    gen_synthetic_qa, run_eval, EndpointError, EvalLimits, FnCompleter, Message, PromptLayout,
};
use ragdepth::rng;

fn main() -> ragdepth::Result<()> {
    let examples = gen_synthetic_qa(12, 2, &mut rng::stream(9, 0))?;
    let layouts = ["query_first+gold", "query_last+gold", "query_last+gold+2"]
        .iter()
        .map(|s| PromptLayout::parse(s))
        .collect::<ragdepth::Result<Vec<_>>>()?;

    let lookup: Vec<(String, String)> = examples
        .iter()
        .map(|e| (e.gold_document.clone(), e.answers[0].clone()))
        .collect();
    let model = FnCompleter(|messages: &[Message]| {
        let user = &messages.last().expect("user message").content;
        let q_pos = user.find("Question:").unwrap_or(0);
        let answer = lookup
            .iter()
            .find(|(doc, _)| user.find(doc.as_str()).is_some_and(|d| d < q_pos))
            .map_or("NO-RES".to_string(), |(_, a)| a.clone());
        Ok::<_, EndpointError>(answer)
    });

    let report = run_eval(&examples, &layouts, &model, EvalLimits::default())?;
    for s in &report.summary {
        println!(
            "{:<20} accuracy {:.3}  abstained {:.3}",
            s.layout, s.accuracy, s.abstention_rate
        );
    }
    Ok(())
}
