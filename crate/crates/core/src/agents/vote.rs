use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AgentError;

/// How [`majority_vote`] resolves a tie between equally frequent answers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Smallest canonical answer wins. Order-independent.
    #[default]
    Lexicographic,
    /// The tied answer that appears first in the input wins.
    FirstSeen,
}

/// Canonical form used for comparing answers: trimmed and upper-cased.
pub fn canonical_answer(answer: &str) -> String {
    answer.trim().to_uppercase()
}

/// Most frequent answer after canonicalization.
pub fn majority_vote<S: AsRef<str>>(answers: &[S], tie_break: TieBreak) -> Result<String, AgentError> {
    if answers.is_empty() {
        return Err(AgentError::EmptyInput);
    }
    // canonical -> (count, first index)
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (i, a) in answers.iter().enumerate() {
        tally.entry(canonical_answer(a.as_ref())).or_insert((0, i)).0 += 1;
    }
    let best = tally.values().map(|(c, _)| *c).max().expect("non-empty tally");
    let mut tied = tally.into_iter().filter(|(_, (c, _))| *c == best);
    let winner = match tie_break {
        TieBreak::Lexicographic => tied.next().expect("at least one winner").0,
        TieBreak::FirstSeen => tied.min_by_key(|(_, (_, first))| *first).expect("at least one winner").0,
    };
    Ok(winner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_majority() {
        assert_eq!(majority_vote(&["A", "A", "B"], TieBreak::default()).unwrap(), "A");
    }

    #[test]
    fn tie_goes_to_smallest() {
        assert_eq!(majority_vote(&["A", "B"], TieBreak::default()).unwrap(), "A");
        assert_eq!(majority_vote(&["B", "A"], TieBreak::default()).unwrap(), "A");
    }

    #[test]
    fn first_seen_tie_break() {
        assert_eq!(majority_vote(&["C", "B", "B", "C"], TieBreak::FirstSeen).unwrap(), "C");
    }

    #[test]
    fn canonicalizes() {
        assert_eq!(majority_vote(&["a ", "A"], TieBreak::default()).unwrap(), "A");
        assert_eq!(majority_vote(&[" b", "B", "a"], TieBreak::default()).unwrap(), "B");
    }

    #[test]
    fn empty_is_error() {
        let none: [&str; 0] = [];
        assert!(matches!(majority_vote(&none, TieBreak::default()), Err(AgentError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut answers in prop::collection::vec("[abAB ]{0,3}", 1..9), seed in any::<u64>()) {
            let before = majority_vote(&answers, TieBreak::Lexicographic).unwrap();
            let n = answers.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                answers.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(before, majority_vote(&answers, TieBreak::Lexicographic).unwrap());
        }

        #[test]
        fn winner_is_a_most_frequent_answer(answers in prop::collection::vec("[ABC]", 1..12)) {
            let w = majority_vote(&answers, TieBreak::Lexicographic).unwrap();
            let count = |x: &str| answers.iter().filter(|a| a.as_str() == x).count();
            prop_assert!(answers.iter().all(|a| count(a) <= count(&w)));
        }
    }
}
