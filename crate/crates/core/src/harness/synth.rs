//! Offline stand-in corpus: templated factoid questions about invented
//! places and people.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::dataset::QAExample;
use crate::error::Result;

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "th", "br", "kr", "st",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ae", "io", "ou"];
const CODAS: &[&str] = &["", "n", "r", "l", "s", "th", "m"];

fn name<R: Rng + ?Sized>(rng: &mut R) -> String {
    let syllables = rng.random_range(2..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push_str(ONSETS.choose(rng).unwrap());
        s.push_str(VOWELS.choose(rng).unwrap());
        s.push_str(CODAS.choose(rng).unwrap());
    }
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => s,
    }
}

struct Template {
    question: fn(&str) -> String,
    fact: fn(&str, &str) -> String,
}

const TEMPLATES: &[Template] = &[
    Template {
        question: |s| format!("what is the capital of {s}?"),
        fact: |s, a| format!("{s} is a small inland republic. Its capital and largest city is {a}."),
    },
    Template {
        question: |s| format!("who founded the city of {s}?"),
        fact: |s, a| format!("The city of {s} was founded by the merchant {a} after a long drought."),
    },
    Template {
        question: |s| format!("which river flows through {s}?"),
        fact: |s, a| format!("The {a} river flows through {s} before reaching the coast."),
    },
    Template {
        question: |s| format!("who wrote the novel {s}?"),
        fact: |s, a| format!("{s} is a novel written by {a} and published to wide acclaim."),
    },
];

/// `n_distractors` documents per example, each a fact of the same template
/// about a different subject.
pub fn gen_synthetic_qa<R: Rng + ?Sized>(n: usize, n_distractors: usize, rng: &mut R) -> Result<Vec<QAExample>> {
    (0..n)
        .map(|_| {
            let t = TEMPLATES.choose(rng).unwrap();
            let subject = name(rng);
            let answer = loop {
                let a = name(rng);
                if !a.eq_ignore_ascii_case(&subject) {
                    break a;
                }
            };
            let lower = answer.to_lowercase();
            let mut distractors = Vec::with_capacity(n_distractors);
            while distractors.len() < n_distractors {
                let doc = (t.fact)(&name(rng), &name(rng));
                if !doc.to_lowercase().contains(&lower) {
                    distractors.push(doc);
                }
            }
            QAExample::new(
                (t.question)(&subject),
                vec![answer.clone()],
                (t.fact)(&subject, &answer),
                distractors,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn examples_are_valid_and_seeded() {
        let a = gen_synthetic_qa(50, 3, &mut rng::stream(1, 0)).unwrap();
        let b = gen_synthetic_qa(50, 3, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(a, b);
        for ex in &a {
            assert!(ex.is_valid(), "{ex:?}");
            assert_eq!(ex.distracting_documents.len(), 3);
            let ans = ex.answers[0].to_lowercase();
            assert!(ex.distracting_documents.iter().all(|d| !d.to_lowercase().contains(&ans)));
        }
    }
}
