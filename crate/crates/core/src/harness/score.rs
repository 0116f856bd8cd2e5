use serde::Serialize;

/// Lowercase, drop punctuation, collapse whitespace.
pub fn normalize(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Score {
    pub matched: bool,
    pub abstained: bool,
}

/// Abstention (the model answering `NO-RES`) wins over matching, so the two
/// flags are never both set.
pub fn score(completion: &str, answers: &[String]) -> Score {
    let norm = normalize(completion);
    if norm == normalize("NO-RES") {
        return Score {
            matched: false,
            abstained: true,
        };
    }
    let matched = answers
        .iter()
        .map(|a| normalize(a))
        .any(|a| !a.is_empty() && norm.contains(&a));
    Score {
        matched,
        abstained: false,
    }
}
