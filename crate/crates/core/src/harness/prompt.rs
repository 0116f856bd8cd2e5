use serde::{Deserialize, Serialize};

use super::dataset::QAExample;
use crate::error::{Error, Result};

/// Instruction used when the question precedes the documents.
pub const INSTRUCTION_QUERY_FIRST: &str = "You are given a question and you MUST respond with a short answer (max 5 tokens) based on the provided documents. If none of the documents contain the answer and you do not know the answer, please respond with NO-RES.";

/// Instruction used whenever the question follows the documents.
pub const INSTRUCTION_QUERY_AFTER: &str = "You are given a question and you MUST respond with a short answer (max 5 tokens) based on the provided documents. If none of the documents contain the answer and you do not know the answer, please respond with NO-RES. The question will be presented both before and after the documents.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOrder {
    QueryFirst,
    QueryLast,
    QueryBoth,
}

impl QueryOrder {
    pub fn name(self) -> &'static str {
        match self {
            QueryOrder::QueryFirst => "query_first",
            QueryOrder::QueryLast => "query_last",
            QueryOrder::QueryBoth => "query_both",
        }
    }

    pub fn instruction(self) -> &'static str {
        match self {
            QueryOrder::QueryFirst => INSTRUCTION_QUERY_FIRST,
            QueryOrder::QueryLast | QueryOrder::QueryBoth => INSTRUCTION_QUERY_AFTER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocSet {
    GoldOnly,
    GoldPlusDistractors(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptLayout {
    pub order: QueryOrder,
    pub doc_set: DocSet,
}

impl PromptLayout {
    pub fn new(order: QueryOrder, doc_set: DocSet) -> Result<Self> {
        if doc_set == DocSet::GoldPlusDistractors(0) {
            return Err(Error::Config("GoldPlusDistractors needs k >= 1".into()));
        }
        Ok(Self { order, doc_set })
    }

    /// Stable label such as `query_both+gold+2`.
    pub fn name(&self) -> String {
        match self.doc_set {
            DocSet::GoldOnly => format!("{}+gold", self.order.name()),
            DocSet::GoldPlusDistractors(k) => format!("{}+gold+{k}", self.order.name()),
        }
    }

    /// Inverse of [`Self::name`].
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown layout '{s}'"));
        let mut parts = s.split('+');
        let order = match parts.next() {
            Some("query_first") => QueryOrder::QueryFirst,
            Some("query_last") => QueryOrder::QueryLast,
            Some("query_both") => QueryOrder::QueryBoth,
            _ => return Err(bad()),
        };
        if parts.next() != Some("gold") {
            return Err(bad());
        }
        let doc_set = match parts.next() {
            None => DocSet::GoldOnly,
            Some(k) => DocSet::GoldPlusDistractors(k.parse().map_err(|_| bad())?),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Self::new(order, doc_set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Instruction,
    Question,
    Document,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

/// Ordered prompt segments; documents are the gold document followed by the
/// first `k` distractors.
pub fn assemble_prompt(example: &QAExample, layout: &PromptLayout) -> Result<Vec<Segment>> {
    let k = match layout.doc_set {
        DocSet::GoldOnly => 0,
        DocSet::GoldPlusDistractors(k) => k,
    };
    if k > example.distracting_documents.len() {
        return Err(Error::Config(format!(
            "layout {} needs {k} distractors, example has {}",
            layout.name(),
            example.distracting_documents.len()
        )));
    }
    let question = Segment {
        kind: SegmentKind::Question,
        text: format!("Question: {}", example.question),
    };
    let docs = std::iter::once(&example.gold_document)
        .chain(&example.distracting_documents[..k])
        .enumerate()
        .map(|(i, d)| Segment {
            kind: SegmentKind::Document,
            text: format!("Document [{}]: {d}", i + 1),
        });
    let mut out = vec![Segment {
        kind: SegmentKind::Instruction,
        text: layout.order.instruction().to_string(),
    }];
    match layout.order {
        QueryOrder::QueryFirst => {
            out.push(question);
            out.extend(docs);
        }
        QueryOrder::QueryLast => {
            out.extend(docs);
            out.push(question);
        }
        QueryOrder::QueryBoth => {
            out.push(question.clone());
            out.extend(docs);
            out.push(question);
        }
    }
    Ok(out)
}

/// Instruction as the system message; everything else, blank-line
/// separated, as one user message.
pub fn to_messages(segments: &[Segment]) -> Vec<Message> {
    let mut system = Vec::new();
    let mut user = Vec::new();
    for s in segments {
        match s.kind {
            SegmentKind::Instruction => system.push(s.text.as_str()),
            _ => user.push(s.text.as_str()),
        }
    }
    let mut out = Vec::new();
    if !system.is_empty() {
        out.push(Message {
            role: "system".into(),
            content: system.join("\n\n"),
        });
    }
    out.push(Message {
        role: "user".into(),
        content: user.join("\n\n"),
    });
    out
}

/// Plain-text rendering of the messages, used for golden files.
pub fn render(messages: &[Message]) -> String {
    messages
        .iter()
        .map(|m| format!("[{}]\n{}\n", m.role, m.content))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> QAExample {
        QAExample::new(
            "who wrote hamlet?".into(),
            vec!["Shakespeare".into()],
            "Hamlet is a tragedy by William Shakespeare.".into(),
            vec!["Macbeth is short.".into(), "Ulysses is long.".into()],
        )
        .unwrap()
    }

    #[test]
    fn gold_only_query_first() {
        let layout = PromptLayout::new(QueryOrder::QueryFirst, DocSet::GoldOnly).unwrap();
        let segs = assemble_prompt(&example(), &layout).unwrap();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[0].text, INSTRUCTION_QUERY_FIRST);
        assert_eq!(segs[1].kind, SegmentKind::Question);
    }

    #[test]
    fn query_both_repeats_question() {
        let layout = PromptLayout::new(QueryOrder::QueryBoth, DocSet::GoldPlusDistractors(2)).unwrap();
        let segs = assemble_prompt(&example(), &layout).unwrap();
        assert_eq!(segs.len(), 6);
        let text = render(&to_messages(&segs));
        assert_eq!(text.matches("who wrote hamlet?").count(), 2);
        assert_eq!(segs[0].text, INSTRUCTION_QUERY_AFTER);
        assert!(segs[2].text.starts_with("Document [1]: Hamlet"));
    }

    #[test]
    fn query_last_puts_question_at_end() {
        let layout = PromptLayout::new(QueryOrder::QueryLast, DocSet::GoldPlusDistractors(1)).unwrap();
        let segs = assemble_prompt(&example(), &layout).unwrap();
        assert_eq!(segs.last().unwrap().kind, SegmentKind::Question);
        assert_eq!(segs.iter().filter(|s| s.kind == SegmentKind::Question).count(), 1);
    }

    #[test]
    fn too_few_distractors() {
        let layout = PromptLayout::new(QueryOrder::QueryLast, DocSet::GoldPlusDistractors(3)).unwrap();
        assert!(matches!(assemble_prompt(&example(), &layout), Err(Error::Config(_))));
        assert!(PromptLayout::new(QueryOrder::QueryLast, DocSet::GoldPlusDistractors(0)).is_err());
    }

    #[test]
    fn layout_names_round_trip() {
        for order in [QueryOrder::QueryFirst, QueryOrder::QueryLast, QueryOrder::QueryBoth] {
            for doc_set in [DocSet::GoldOnly, DocSet::GoldPlusDistractors(2)] {
                let l = PromptLayout::new(order, doc_set).unwrap();
                assert_eq!(PromptLayout::parse(&l.name()).unwrap(), l);
            }
        }
        assert!(PromptLayout::parse("query_first+gold+x").is_err());
    }
}
