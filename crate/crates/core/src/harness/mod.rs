//! Question-answering harness: dataset ingestion, prompt layouts, an
//! OpenAI-compatible chat client and answer scoring.

pub mod client;
mod dataset;
mod eval;
mod prompt;
mod score;
mod synth;

pub use client::{
    ChatClient, Completer, Completion, EndpointConfig, EndpointError, FnCompleter, TokenBucket, API_KEY_ENV,
};
pub use dataset::{load_dataset, write_dataset, Dataset, QAExample, QARecord, Violation};
pub use eval::{run_eval, write_results_csv, write_summary_csv, EvalLimits, EvalRecord, EvalReport, LayoutSummary};
pub use prompt::{
    assemble_prompt, render, to_messages, DocSet, Message, PromptLayout, QueryOrder, Segment, SegmentKind,
    INSTRUCTION_QUERY_AFTER, INSTRUCTION_QUERY_FIRST,
};
pub use score::{normalize, score, Score};
pub use synth::gen_synthetic_qa;
