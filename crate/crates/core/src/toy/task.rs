//! Synthetic relevance tasks.
//!
//! Every token carries an inference payload `s` and relevance information
//! `w` in `[0, M)`. A token is noise (`r = 0`) when some combination of other
//! tokens "cancels" it:
//!
//! - pair-wise: some other `b` has `w_i + w_b = 0 (mod M)`;
//! - triple-wise: distinct others `a, b` have `w_i + w_a + w_b = 0 (mod M)`;
//! - virtual pair-wise: a summary token `v` sits at position 0 and the
//!   triple is `(i, v, b)`, so only `b` varies;
//! - disjointness: the set-disjointness embedding, where the probe token is
//!   noise iff the two halves of the sequence share a set bit.
//!
//! Document `w` values are drawn from `[1, M)`. With attention over a bag of
//! tokens, a token cannot tell itself apart from an identical copy, and
//! `w = 0` would be its own complement.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{Sample, Target};
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Query,
    Document,
    Virtual,
}

impl Role {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            Role::Query => 0,
            Role::Document => 1,
            Role::Virtual => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyToken {
    pub s_part: u32,
    pub w_part: u32,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    Pairwise,
    Triplewise,
    VirtualPairwise,
    Disjointness,
}

impl PredicateKind {
    pub fn name(self) -> &'static str {
        match self {
            PredicateKind::Pairwise => "pairwise",
            PredicateKind::Triplewise => "triplewise",
            PredicateKind::VirtualPairwise => "virtual_pairwise",
            PredicateKind::Disjointness => "disjointness",
        }
    }
}

/// Range of the (unused by the relevance nets) inference payload.
const S_RANGE: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyTask {
    pub kind: PredicateKind,
    pub modulus: u32,
    pub tokens: Vec<ToyToken>,
    /// Relevance bits; 0 marks noise.
    pub labels: Vec<u8>,
    /// Positions whose label is part of the task (the virtual token and the
    /// disjointness filler tokens are not).
    pub scored: Vec<bool>,
}

impl ToyTask {
    pub fn from_tokens(kind: PredicateKind, modulus: u32, tokens: Vec<ToyToken>) -> Result<Self> {
        if tokens.len() < 2 {
            return domain("a task needs at least 2 tokens");
        }
        if tokens.iter().any(|t| t.w_part >= modulus) {
            return domain("token relevance value outside [0, M)");
        }
        let (labels, scored) = brute_force_labels(kind, modulus, &tokens)?;
        Ok(Self {
            kind,
            modulus,
            tokens,
            labels,
            scored,
        })
    }

    /// One-hot `w` followed by one-hot role.
    pub fn input_dim(modulus: u32) -> usize {
        modulus as usize + Role::COUNT
    }

    pub fn to_sample(&self) -> Sample {
        let m = self.modulus as usize;
        let mut inputs = Array2::zeros((self.tokens.len(), Self::input_dim(self.modulus)));
        for (i, tok) in self.tokens.iter().enumerate() {
            inputs[[i, tok.w_part as usize]] = 1.0;
            inputs[[i, m + tok.role.index()]] = 1.0;
        }
        let targets = self
            .labels
            .iter()
            .zip(&self.scored)
            .enumerate()
            .filter(|(_, (_, &s))| s)
            .map(|(pos, (&label, _))| Target {
                pos,
                slot: 0,
                label: label as f64,
            })
            .collect();
        Sample { inputs, targets }
    }
}

fn doc<R: Rng + ?Sized>(w: u32, rng: &mut R) -> ToyToken {
    ToyToken {
        s_part: rng.random_range(0..S_RANGE),
        w_part: w,
        role: Role::Document,
    }
}

/// Draws a task of `kind`. For [`PredicateKind::Disjointness`], `n_tokens`
/// must be even: the halves encode the two bit vectors.
pub fn gen_task<R: Rng + ?Sized>(
    kind: PredicateKind,
    n_tokens: usize,
    modulus: u32,
    rng: &mut R,
) -> Result<ToyTask> {
    if modulus < 3 {
        return domain(format!("modulus {modulus} must be at least 3"));
    }
    let min_tokens = match kind {
        PredicateKind::Triplewise | PredicateKind::VirtualPairwise => 3,
        PredicateKind::Pairwise => 2,
        PredicateKind::Disjointness => 4,
    };
    if n_tokens < min_tokens {
        return domain(format!("{} needs at least {min_tokens} tokens", kind.name()));
    }
    let tokens = match kind {
        PredicateKind::Pairwise | PredicateKind::Triplewise => (0..n_tokens)
            .map(|_| {
                let w = rng.random_range(1..modulus);
                doc(w, rng)
            })
            .collect(),
        PredicateKind::VirtualPairwise => {
            let docs: Vec<ToyToken> = (1..n_tokens)
                .map(|_| {
                    let w = rng.random_range(1..modulus);
                    doc(w, rng)
                })
                .collect();
            let signature = virtual_signature(&docs, modulus);
            let mut tokens = Vec::with_capacity(n_tokens);
            tokens.push(ToyToken {
                s_part: 0,
                w_part: signature,
                role: Role::Virtual,
            });
            tokens.extend(docs);
            tokens
        }
        PredicateKind::Disjointness => {
            if n_tokens % 2 != 0 {
                return domain("disjointness needs an even token count");
            }
            let half = n_tokens / 2;
            let probe = rng.random_range(1..modulus - 1);
            let (a_val, b_val) = disjointness_values(probe, modulus);
            let mut tokens = Vec::with_capacity(n_tokens);
            tokens.push(ToyToken {
                s_part: 0,
                w_part: probe,
                role: Role::Query,
            });
            for _ in 1..half {
                let w = if rng.random_bool(0.5) { a_val } else { 0 };
                tokens.push(doc(w, rng));
            }
            // Slot 0 of the second half pairs with the probe itself.
            tokens.push(doc(0, rng));
            for _ in 1..half {
                let w = if rng.random_bool(0.5) { b_val } else { 0 };
                tokens.push(doc(w, rng));
            }
            tokens
        }
    };
    ToyTask::from_tokens(kind, modulus, tokens)
}

/// Builds a disjointness task directly from the two bit vectors. Position
/// `0` of `a` is the probe itself and is ignored.
pub fn disjointness_task(a: &[bool], b: &[bool], probe: u32, modulus: u32) -> Result<ToyTask> {
    if a.len() != b.len() || a.len() < 2 {
        return domain("disjointness vectors must have equal length >= 2");
    }
    if probe == 0 || probe + 1 >= modulus {
        return domain("probe value must lie in [1, M - 1)");
    }
    let (a_val, b_val) = disjointness_values(probe, modulus);
    let mut tokens = vec![ToyToken {
        s_part: 0,
        w_part: probe,
        role: Role::Query,
    }];
    let filler = |w| ToyToken {
        s_part: 0,
        w_part: w,
        role: Role::Document,
    };
    tokens.extend(a[1..].iter().map(|&bit| filler(if bit { a_val } else { 0 })));
    tokens.push(filler(0));
    tokens.extend(b[1..].iter().map(|&bit| filler(if bit { b_val } else { 0 })));
    ToyTask::from_tokens(PredicateKind::Disjointness, modulus, tokens)
}

/// Values carried by set bits of `a` and `b`: `a + b + probe = 0 (mod M)`.
/// Both are non-zero for probes in `[1, M - 1)`, so 0 can mark an unset bit.
fn disjointness_values(probe: u32, modulus: u32) -> (u32, u32) {
    let a_val = 1;
    let b_val = (2 * modulus - probe - a_val) % modulus;
    (a_val, b_val)
}

/// Multiset summary of the document `w` values, folded to one residue.
pub fn virtual_signature(docs: &[ToyToken], modulus: u32) -> u32 {
    docs.iter().fold(0, |acc, t| (acc + t.w_part) % modulus)
}

fn cancels(modulus: u32, values: &[u32]) -> bool {
    values.iter().map(|&v| v as u64).sum::<u64>() % modulus as u64 == 0
}

/// Exhaustive labeller: checks every pair / triple of positions.
pub fn brute_force_labels(
    kind: PredicateKind,
    modulus: u32,
    tokens: &[ToyToken],
) -> Result<(Vec<u8>, Vec<bool>)> {
    let n = tokens.len();
    let w: Vec<u32> = tokens.iter().map(|t| t.w_part).collect();
    let mut labels = vec![1u8; n];
    let mut scored = vec![true; n];
    match kind {
        PredicateKind::Pairwise => {
            for i in 0..n {
                if (0..n).any(|b| b != i && cancels(modulus, &[w[i], w[b]])) {
                    labels[i] = 0;
                }
            }
        }
        PredicateKind::Triplewise => {
            for i in 0..n {
                let hit = (0..n).any(|a| {
                    a != i && (a + 1..n).any(|b| b != i && cancels(modulus, &[w[i], w[a], w[b]]))
                });
                if hit {
                    labels[i] = 0;
                }
            }
        }
        PredicateKind::VirtualPairwise => {
            if tokens[0].role != Role::Virtual {
                return domain("virtual pair-wise tasks need the summary token at position 0");
            }
            scored[0] = false;
            for i in 1..n {
                if (1..n).any(|b| b != i && cancels(modulus, &[w[i], w[0], w[b]])) {
                    labels[i] = 0;
                }
            }
        }
        PredicateKind::Disjointness => {
            if n % 2 != 0 {
                return domain("disjointness needs an even token count");
            }
            let half = n / 2;
            scored.iter_mut().skip(1).for_each(|s| *s = false);
            let hit = (1..half).any(|k| {
                w[k] != 0 && w[k + half] != 0 && cancels(modulus, &[w[0], w[k], w[k + half]])
            });
            if hit {
                labels[0] = 0;
            }
        }
    }
    Ok((labels, scored))
}

/// Independent labeller working from value counts instead of positions.
pub fn counting_labels(kind: PredicateKind, modulus: u32, tokens: &[ToyToken]) -> Vec<u8> {
    let m = modulus as usize;
    let mut counts = vec![0usize; m];
    for t in tokens {
        counts[t.w_part as usize] += 1;
    }
    // Count of value `v` among tokens other than the excluded ones.
    let avail = |v: usize, excluded: &[usize]| {
        counts[v] - excluded.iter().filter(|&&e| e == v).count()
    };
    let neg = |x: usize| (m - x % m) % m;
    match kind {
        PredicateKind::Pairwise => tokens
            .iter()
            .map(|t| {
                let wi = t.w_part as usize;
                u8::from(avail(neg(wi), &[wi]) == 0)
            })
            .collect(),
        PredicateKind::Triplewise => tokens
            .iter()
            .map(|t| {
                let wi = t.w_part as usize;
                let hit = (0..m).any(|a| {
                    let b = neg(wi + a);
                    if avail(a, &[wi]) == 0 {
                        return false;
                    }
                    avail(b, &[wi, a]) > 0
                });
                u8::from(!hit)
            })
            .collect(),
        PredicateKind::VirtualPairwise => {
            // The virtual token is excluded alongside the token itself.
            let v = tokens[0].w_part as usize;
            std::iter::once(1)
                .chain(tokens[1..].iter().map(|t| {
                    let wi = t.w_part as usize;
                    u8::from(avail(neg(wi + v), &[wi, v]) == 0)
                }))
                .collect()
        }
        PredicateKind::Disjointness => {
            let half = tokens.len() / 2;
            let a: Vec<bool> = tokens[1..half].iter().map(|t| t.w_part != 0).collect();
            let b: Vec<bool> = tokens[half + 1..].iter().map(|t| t.w_part != 0).collect();
            let disj = a.iter().zip(&b).any(|(&x, &y)| x && y);
            let mut labels = vec![1u8; tokens.len()];
            labels[0] = u8::from(!disj);
            labels
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn docs(ws: &[u32]) -> Vec<ToyToken> {
        ws.iter()
            .map(|&w| ToyToken {
                s_part: 0,
                w_part: w,
                role: Role::Document,
            })
            .collect()
    }

    #[test]
    fn triple_reference_cases() {
        let t = ToyTask::from_tokens(PredicateKind::Triplewise, 7, docs(&[1, 2, 4])).unwrap();
        assert_eq!(t.labels, vec![0, 0, 0]);
        let t = ToyTask::from_tokens(PredicateKind::Triplewise, 7, docs(&[1, 1, 1])).unwrap();
        assert_eq!(t.labels, vec![1, 1, 1]);
    }

    #[test]
    fn pair_excludes_self() {
        // 7 + 7 = 14 = 0 mod 14, but a single 7 has no partner.
        let t = ToyTask::from_tokens(PredicateKind::Pairwise, 14, docs(&[7, 3, 11])).unwrap();
        assert_eq!(t.labels, vec![1, 0, 0]);
    }

    #[test]
    fn disjoint_vectors_are_relevant() {
        let a = [false, true, false, true];
        let b = [false, false, true, false];
        let t = disjointness_task(&a, &b, 3, 11).unwrap();
        assert!(t.labels.iter().all(|&l| l == 1));
        let b = [false, true, false, false];
        let t = disjointness_task(&a, &b, 3, 11).unwrap();
        assert_eq!(t.labels[0], 0);
    }

    #[test]
    fn labellers_agree() {
        let mut r = rng::stream(4, 0);
        for kind in [
            PredicateKind::Pairwise,
            PredicateKind::Triplewise,
            PredicateKind::VirtualPairwise,
            PredicateKind::Disjointness,
        ] {
            for _ in 0..200 {
                let task = gen_task(kind, 8, 7, &mut r).unwrap();
                let other = counting_labels(kind, 7, &task.tokens);
                assert_eq!(task.labels, other, "{kind:?} {:?}", task.tokens);
            }
        }
    }

    #[test]
    fn sample_encoding() {
        let t = ToyTask::from_tokens(PredicateKind::Pairwise, 5, docs(&[1, 4])).unwrap();
        let s = t.to_sample();
        assert_eq!(s.inputs.dim(), (2, 8));
        assert_eq!(s.inputs[[0, 1]], 1.0);
        assert_eq!(s.inputs[[1, 4]], 1.0);
        assert_eq!(s.inputs[[0, 5 + Role::Document.index()]], 1.0);
        assert_eq!(s.targets.len(), 2);
    }

    #[test]
    fn rejects_short_triple() {
        assert!(gen_task(PredicateKind::Triplewise, 2, 7, &mut rng::stream(0, 0)).is_err());
        assert!(gen_task(PredicateKind::Disjointness, 5, 7, &mut rng::stream(0, 0)).is_err());
    }
}
