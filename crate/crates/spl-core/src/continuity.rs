//! Token-successor prediction graphs and the abstract-continuity check:
//! a sequence is continuous when its contiguous subsequences keep nonempty
//! successor predictions, and the knowing predicate combines that with a
//! live membrane and a loop-level intersection.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedset::{FixedSetId, FixedSetRegistry};
use crate::membrane::Membrane;

/// Ordered token sequence. Whitespace tokenization of one corpus line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn parse(line: &str) -> TokenSeq {
        TokenSeq(line.split_whitespace().map(str::to_string).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ContinuityError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("max_order must be >= 1")]
    InvalidOrder,
    #[error("required_coverage must lie in (0, 1], got {0}")]
    InvalidCoverage(f64),
    #[error("orders {0:?} exceed the graph's max_order {1}")]
    OrdersOutOfRange(Vec<usize>, usize),
}

/// Context (an n-gram of up to `max_order` tokens) -> possible next tokens.
///
/// A synthesized empty context records sentence-initial tokens so the empty
/// prefix has defined predictions. Successor pairs observed in the training
/// corpus are tracked separately from manually added links so pruning can
/// protect them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionGraph {
    successors: BTreeMap<Vec<String>, BTreeSet<String>>,
    vocabulary: BTreeSet<String>,
    max_order: usize,
    /// (context, next) pairs attested by the training corpus.
    training_pairs: BTreeSet<(Vec<String>, String)>,
    /// Scenario-supplied word -> fixed-set association.
    #[serde(default)]
    pub token_to_fixedset: BTreeMap<String, FixedSetId>,
}

impl PredictionGraph {
    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn contains_token(&self, token: &str) -> bool {
        self.vocabulary.contains(token)
    }

    pub fn successors(&self, context: &[String]) -> Option<&BTreeSet<String>> {
        self.successors.get(context)
    }

    pub fn context_count(&self) -> usize {
        self.successors.len()
    }

    /// Add a successor link outside the training corpus (the "extraneous
    /// link" a learner forms spontaneously). Tokens must already be known.
    pub fn add_link(&mut self, context: &[&str], next: &str) {
        let ctx: Vec<String> = context.iter().map(|s| s.to_string()).collect();
        self.successors
            .entry(ctx)
            .or_default()
            .insert(next.to_string());
    }

    pub fn is_training_pair(&self, context: &[String], next: &str) -> bool {
        // borrow-friendly lookup
        self.training_pairs
            .iter()
            .any(|(c, n)| c == context && n == next)
    }

    /// Remove a non-training successor entry. Returns whether anything was
    /// removed. Training-attested pairs are never touched.
    pub fn remove_link(&mut self, context: &[String], next: &str) -> bool {
        if self.is_training_pair(context, next) {
            return false;
        }
        if let Some(set) = self.successors.get_mut(context) {
            let removed = set.remove(next);
            if set.is_empty() {
                self.successors.remove(context);
            }
            return removed;
        }
        false
    }
}

/// Build the successor map from a corpus: `successors(c)` holds every token
/// that follows context `c` anywhere in the corpus, for all n-gram contexts
/// with `1 <= n <= max_order`, plus the sentence-initial set under the empty
/// context.
pub fn build_prediction_graph(
    corpus: &[TokenSeq],
    max_order: usize,
) -> Result<PredictionGraph, ContinuityError> {
    if corpus.is_empty() {
        return Err(ContinuityError::EmptyCorpus);
    }
    if max_order == 0 {
        return Err(ContinuityError::InvalidOrder);
    }
    let mut successors: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
    let mut vocabulary = BTreeSet::new();
    let mut training_pairs = BTreeSet::new();

    for seq in corpus {
        let tokens = seq.tokens();
        if tokens.is_empty() {
            continue;
        }
        vocabulary.extend(tokens.iter().cloned());
        // start-of-sequence context
        successors
            .entry(Vec::new())
            .or_default()
            .insert(tokens[0].clone());
        training_pairs.insert((Vec::new(), tokens[0].clone()));

        for next_pos in 1..tokens.len() {
            let next = &tokens[next_pos];
            let max_n = max_order.min(next_pos);
            for n in 1..=max_n {
                let ctx: Vec<String> = tokens[next_pos - n..next_pos].to_vec();
                successors
                    .entry(ctx.clone())
                    .or_default()
                    .insert(next.clone());
                training_pairs.insert((ctx, next.clone()));
            }
        }
    }

    Ok(PredictionGraph {
        successors,
        vocabulary,
        max_order,
        training_pairs,
        token_to_fixedset: BTreeMap::new(),
    })
}

/// Predicted next tokens after a prefix: the successor set of the prefix's
/// final `min(len, max_order)` tokens.
///
/// There is no backoff to shorter contexts: once the heard context itself is
/// unknown, the predictions are gone even if its last word alone is common.
/// The empty prefix returns the sentence-initial set.
pub fn predictions<'g>(graph: &'g PredictionGraph, prefix: &[String]) -> BTreeSet<&'g str> {
    let n = prefix.len().min(graph.max_order);
    let context = &prefix[prefix.len() - n..];
    graph
        .successors(context)
        .map(|set| set.iter().map(String::as_str).collect())
        .unwrap_or_default()
}

/// Outcome of an abstract-continuity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityVerdict {
    pub continuous: bool,
    /// Earliest subsequence with an empty prediction: `(start position,
    /// offending context)`.
    pub first_break: Option<(usize, Vec<String>)>,
    /// Fraction of checked subsequences that had nonempty predictions.
    pub coverage: f64,
    /// Out-of-vocabulary tokens encountered, in order of first appearance.
    pub unknown_tokens: Vec<String>,
    /// Set when the unknown-token share exceeded the tolerated fraction.
    pub too_many_unknown: bool,
}

/// Fraction of a sequence that may be out-of-vocabulary before the verdict
/// is forced to discontinuous. Unknown-containing windows below this share
/// are skipped rather than counted as breaks.
pub const MAX_UNKNOWN_FRACTION: f64 = 0.25;

/// Check nonempty predictions along every contiguous subsequence of `seq`
/// whose length is in `orders`, excluding subsequences that end at the final
/// token (the final token needs no successor). Continuous iff the nonempty
/// fraction reaches `required_coverage`.
///
/// A single-token sequence has no such subsequence; it is judged by the
/// token's own successor set instead.
pub fn is_abstractly_continuous(
    graph: &PredictionGraph,
    seq: &TokenSeq,
    orders: &BTreeSet<usize>,
    required_coverage: f64,
) -> Result<ContinuityVerdict, ContinuityError> {
    if !(required_coverage > 0.0 && required_coverage <= 1.0) {
        return Err(ContinuityError::InvalidCoverage(required_coverage));
    }
    let out_of_range: Vec<usize> = orders
        .iter()
        .copied()
        .filter(|&n| n == 0 || n > graph.max_order)
        .collect();
    if !out_of_range.is_empty() {
        return Err(ContinuityError::OrdersOutOfRange(
            out_of_range,
            graph.max_order,
        ));
    }

    let tokens = seq.tokens();
    let mut unknown_tokens = Vec::new();
    for tok in tokens {
        if !graph.contains_token(tok) && !unknown_tokens.contains(tok) {
            unknown_tokens.push(tok.clone());
        }
    }
    let unknown_count = tokens
        .iter()
        .filter(|t| !graph.contains_token(t))
        .count();
    let too_many_unknown = !tokens.is_empty()
        && (unknown_count as f64) / (tokens.len() as f64) > MAX_UNKNOWN_FRACTION;

    let mut checked = 0usize;
    let mut nonempty = 0usize;
    let mut first_break: Option<(usize, Vec<String>)> = None;

    if tokens.len() > 1 {
        // windows in (start, order) scan order; a window ending at the final
        // position is excluded
        for start in 0..tokens.len() {
            for &n in orders.iter() {
                let end = start + n; // exclusive
                if end >= tokens.len() {
                    continue;
                }
                let window = &tokens[start..end];
                if window.iter().any(|t| !graph.contains_token(t)) {
                    continue; // skipped, not a break
                }
                checked += 1;
                if predictions(graph, window).is_empty() {
                    if first_break.is_none() {
                        first_break = Some((start, window.to_vec()));
                    }
                } else {
                    nonempty += 1;
                }
            }
        }
    } else if tokens.len() == 1 && graph.contains_token(&tokens[0]) {
        // judged by the lone token's own successor set
        checked = 1;
        if predictions(graph, tokens).is_empty() {
            first_break = Some((0, tokens.to_vec()));
        } else {
            nonempty = 1;
        }
    }

    let coverage = if checked == 0 {
        0.0
    } else {
        nonempty as f64 / checked as f64
    };
    let continuous =
        !too_many_unknown && checked > 0 && coverage >= required_coverage - 1e-12;

    Ok(ContinuityVerdict {
        continuous,
        first_break,
        coverage,
        unknown_tokens,
        too_many_unknown,
    })
}

/// Which of the knowing conditions failed, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KnowsEvidence {
    /// All three conditions hold.
    Knows {
        membrane_sets: BTreeSet<FixedSetId>,
        intersecting_tokens: Vec<String>,
    },
    /// (a) no self-sustaining membrane.
    NoMembrane,
    /// (b) the sequence is not abstractly continuous.
    NotContinuous(ContinuityVerdict),
    /// (c) no token's fixed set shares a loop with the membrane.
    EmptyIntersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowsOutcome {
    pub knows: bool,
    pub evidence: KnowsEvidence,
}

/// The knowing predicate: a membrane exists, the sequence is abstractly
/// continuous, and at least one token maps to a fixed set whose loops
/// intersect the loops of the membrane's active sets.
pub fn knows(
    membrane: Option<&Membrane>,
    graph: &PredictionGraph,
    registry: &FixedSetRegistry,
    seq: &TokenSeq,
    orders: &BTreeSet<usize>,
    required_coverage: f64,
) -> Result<KnowsOutcome, ContinuityError> {
    let Some(membrane) = membrane else {
        return Ok(KnowsOutcome {
            knows: false,
            evidence: KnowsEvidence::NoMembrane,
        });
    };

    let verdict = is_abstractly_continuous(graph, seq, orders, required_coverage)?;
    if !verdict.continuous {
        return Ok(KnowsOutcome {
            knows: false,
            evidence: KnowsEvidence::NotContinuous(verdict),
        });
    }

    let membrane_loops = registry.loops_of(&membrane.active_sets);
    let mut intersecting_tokens = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for token in seq.tokens() {
        if !seen.insert(token) {
            continue;
        }
        let Some(fs_id) = graph.token_to_fixedset.get(token) else {
            continue;
        };
        let Some(fs) = registry.get(fs_id) else {
            continue;
        };
        if fs.loop_ids.iter().any(|l| membrane_loops.contains(l)) {
            intersecting_tokens.push(token.clone());
        }
    }

    if intersecting_tokens.is_empty() {
        return Ok(KnowsOutcome {
            knows: false,
            evidence: KnowsEvidence::EmptyIntersection,
        });
    }
    Ok(KnowsOutcome {
        knows: true,
        evidence: KnowsEvidence::Knows {
            membrane_sets: membrane.active_sets.clone(),
            intersecting_tokens,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_from(lines: &[&str], max_order: usize) -> PredictionGraph {
        let corpus: Vec<TokenSeq> = lines.iter().map(|l| TokenSeq::parse(l)).collect();
        build_prediction_graph(&corpus, max_order).unwrap()
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn successors_are_direct_counts() {
        let g = graph_from(&["a b", "a c"], 2);
        let s = g.successors(&toks(&["a"])).unwrap();
        let got: Vec<&str> = s.iter().map(String::as_str).collect();
        assert_eq!(got, vec!["b", "c"]);
    }

    #[test]
    fn two_word_context() {
        let g = graph_from(&["I like to eat pizza tonight"], 3);
        let s = g.successors(&toks(&["I", "like"])).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec!["to"]);
    }

    #[test]
    fn unknown_context_has_no_predictions_even_with_known_suffix() {
        let g = graph_from(&["I like to eat pizza tonight"], 3);
        // "to" alone predicts "eat", but the heard context "pizza to" is
        // unknown and kills the prediction set
        assert!(!predictions(&g, &toks(&["to"])).is_empty());
        assert!(predictions(&g, &toks(&["pizza", "to"])).is_empty());
    }

    #[test]
    fn empty_prefix_predicts_sentence_initials() {
        let g = graph_from(&["a b", "c d"], 2);
        let p = predictions(&g, &[]);
        assert_eq!(p.into_iter().collect::<Vec<_>>(), vec!["a", "c"]);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert_eq!(
            build_prediction_graph(&[], 2).unwrap_err(),
            ContinuityError::EmptyCorpus
        );
    }

    #[test]
    fn training_sentence_is_continuous() {
        let g = graph_from(&["I like to eat pizza tonight"], 3);
        let orders: BTreeSet<usize> = [1, 2, 3].into_iter().collect();
        let verdict = is_abstractly_continuous(
            &g,
            &TokenSeq::parse("I like to eat pizza tonight"),
            &orders,
            1.0,
        )
        .unwrap();
        assert!(verdict.continuous);
        assert_eq!(verdict.coverage, 1.0);
        assert!(verdict.first_break.is_none());
    }

    #[test]
    fn scrambled_sentence_breaks_at_pizza_to() {
        let g = graph_from(
            &[
                "I like to eat pizza tonight",
                "pizza is delicious",
                "pizza has cheese",
            ],
            3,
        );
        let orders: BTreeSet<usize> = [1, 2, 3].into_iter().collect();
        let verdict = is_abstractly_continuous(
            &g,
            &TokenSeq::parse("pizza to like I tonight eat"),
            &orders,
            0.9,
        )
        .unwrap();
        assert!(!verdict.continuous);
        let (pos, ctx) = verdict.first_break.unwrap();
        assert_eq!(pos, 0);
        assert_eq!(ctx, toks(&["pizza", "to"]));
    }

    #[test]
    fn single_known_token_is_continuous_via_own_successors() {
        let g = graph_from(&["pizza is delicious", "pizza has cheese"], 2);
        let orders: BTreeSet<usize> = [1].into_iter().collect();
        let verdict =
            is_abstractly_continuous(&g, &TokenSeq::parse("pizza"), &orders, 1.0).unwrap();
        assert!(verdict.continuous);
    }

    #[test]
    fn too_many_unknown_tokens_fail() {
        let g = graph_from(&["a b c d"], 2);
        let orders: BTreeSet<usize> = [1].into_iter().collect();
        let verdict =
            is_abstractly_continuous(&g, &TokenSeq::parse("a x y z"), &orders, 0.5).unwrap();
        assert!(verdict.too_many_unknown);
        assert!(!verdict.continuous);
        assert_eq!(verdict.unknown_tokens, vec!["x", "y", "z"]);
    }

    #[test]
    fn few_unknown_tokens_are_skipped_not_breaks() {
        let g = graph_from(&["a b c d e f g h"], 2);
        let orders: BTreeSet<usize> = [1].into_iter().collect();
        // one unknown of eight tokens: 12.5% <= 25%
        let verdict =
            is_abstractly_continuous(&g, &TokenSeq::parse("a b c X e f g h"), &orders, 0.9)
                .unwrap();
        assert!(!verdict.too_many_unknown);
        assert!(verdict.continuous, "verdict: {verdict:?}");
    }
}
