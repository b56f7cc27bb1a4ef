//! Cross-dataset duplicate detection. Two sentences are the same tweet
//! when their tokens joined by single spaces are exactly equal; the
//! matched pairs carry the tags from each side and become the parallel
//! validation set.

use std::collections::HashMap;

use crate::corpus::types::{ParallelPair, Sentence, Side};
use crate::error::Result;

#[derive(Debug, Clone, Default)]
pub struct OverlapReport {
    pub pairs: Vec<ParallelPair>,
    /// Shared texts whose token counts differed between the corpora
    /// (e.g. a multiword token split on one side); excluded from `pairs`.
    pub mismatched_tokenizations: usize,
    /// Texts appearing more than once inside corpus A / corpus B; only the
    /// first occurrence participates in matching.
    pub duplicates_within_a: usize,
    pub duplicates_within_b: usize,
}

/// Find sentences whose exact text appears in both corpora. Corpus A
/// supplies tags for `side_a`, corpus B for the other side. Matching is
/// case-sensitive by design (strictest reproducible criterion); pass
/// `fold_case` to compare case-insensitively as an audit option.
pub fn detect_overlap(
    corpus_a: &[Sentence],
    corpus_b: &[Sentence],
    side_a: Side,
    fold_case: bool,
) -> Result<OverlapReport> {
    let key = |s: &Sentence| {
        let text = s.text();
        if fold_case {
            text.to_lowercase()
        } else {
            text
        }
    };

    let mut report = OverlapReport::default();
    let mut first_a: HashMap<String, &Sentence> = HashMap::new();
    for s in corpus_a {
        if first_a.contains_key(&key(s)) {
            report.duplicates_within_a += 1;
        } else {
            first_a.insert(key(s), s);
        }
    }

    let mut seen_b: HashMap<String, ()> = HashMap::new();
    for b in corpus_b {
        let k = key(b);
        if seen_b.contains_key(&k) {
            report.duplicates_within_b += 1;
            continue;
        }
        seen_b.insert(k.clone(), ());
        let Some(a) = first_a.get(&k) else { continue };
        if a.tokens.len() != b.tokens.len() {
            report.mismatched_tokenizations += 1;
            continue;
        }
        let (y, z) = match side_a {
            Side::Y => (a.tags(Side::Y), b.tags(Side::Z)),
            Side::Z => (b.tags(Side::Y), a.tags(Side::Z)),
        };
        let (Some(y), Some(z)) = (y, z) else { continue };
        report
            .pairs
            .push(ParallelPair::new(a.tokens.clone(), y.to_vec(), z.to_vec())?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_tags(text: &str, side: Side) -> Sentence {
        let tokens: Vec<String> = text.split(' ').map(String::from).collect();
        let tags = Some((0..tokens.len()).collect());
        Sentence {
            tokens,
            y_tags: if side == Side::Y { tags.clone() } else { None },
            z_tags: if side == Side::Z { tags } else { None },
            source: "test".into(),
        }
    }

    #[test]
    fn planted_duplicate_found_once() {
        let a = vec![with_tags("the same tweet", Side::Y), with_tags("only in a", Side::Y)];
        let b = vec![with_tags("the same tweet", Side::Z), with_tags("only in b", Side::Z)];
        let report = detect_overlap(&a, &b, Side::Y, false).unwrap();
        assert_eq!(report.pairs.len(), 1);
        assert_eq!(report.pairs[0].tokens, vec!["the", "same", "tweet"]);
    }

    #[test]
    fn disjoint_corpora_yield_nothing() {
        let a = vec![with_tags("alpha beta", Side::Y)];
        let b = vec![with_tags("gamma delta", Side::Z)];
        let report = detect_overlap(&a, &b, Side::Y, false).unwrap();
        assert!(report.pairs.is_empty());
    }

    #[test]
    fn symmetric_up_to_orientation() {
        let a = vec![with_tags("x y z", Side::Y), with_tags("p q", Side::Y)];
        let b = vec![with_tags("p q", Side::Z), with_tags("m n o", Side::Z)];
        let ab = detect_overlap(&a, &b, Side::Y, false).unwrap();
        let ba = detect_overlap(&b, &a, Side::Z, false).unwrap();
        assert_eq!(ab.pairs.len(), 1);
        assert_eq!(ab.pairs, ba.pairs);
    }

    #[test]
    fn mismatched_token_counts_are_audited_not_paired() {
        // Same joined text, different tokenization: "New York" as one token
        // versus two.
        let a = vec![Sentence {
            tokens: vec!["New York".into()],
            y_tags: Some(vec![0]),
            z_tags: None,
            source: "a".into(),
        }];
        let b = vec![with_tags("New York", Side::Z)];
        let report = detect_overlap(&a, &b, Side::Y, false).unwrap();
        assert!(report.pairs.is_empty());
        assert_eq!(report.mismatched_tokenizations, 1);
    }

    #[test]
    fn within_corpus_duplicates_counted() {
        let a = vec![with_tags("dup", Side::Y), with_tags("dup", Side::Y)];
        let b = vec![with_tags("dup", Side::Z)];
        let report = detect_overlap(&a, &b, Side::Y, false).unwrap();
        assert_eq!(report.pairs.len(), 1);
        assert_eq!(report.duplicates_within_a, 1);
    }

    #[test]
    fn case_folding_is_opt_in() {
        let a = vec![with_tags("Hello World", Side::Y)];
        let b = vec![with_tags("hello world", Side::Z)];
        assert!(detect_overlap(&a, &b, Side::Y, false).unwrap().pairs.is_empty());
        assert_eq!(detect_overlap(&a, &b, Side::Y, true).unwrap().pairs.len(), 1);
    }
}
