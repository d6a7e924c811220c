//! English function words excluded from word-level marking and scoring.

use std::collections::BTreeSet;
use std::io::{self, BufRead};
use std::sync::LazyLock;

/// The shipped list: articles, prepositions, pronouns, auxiliaries and conjunctions.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    // articles and determiners
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "no",
    "all", "both", "either", "neither", "such",
    // prepositions
    "about", "above", "across", "after", "against", "along", "among", "around", "at", "before",
    "behind", "below", "beneath", "beside", "between", "beyond", "by", "down", "during", "for",
    "from", "in", "inside", "into", "near", "of", "off", "on", "onto", "out", "over", "per",
    "since", "through", "to", "toward", "towards", "under", "until", "up", "upon", "with",
    "within", "without", "via",
    // pronouns
    "i", "me", "my", "mine", "we", "us", "our", "ours", "you", "your", "yours", "he", "him",
    "his", "she", "her", "hers", "it", "its", "they", "them", "their", "theirs", "who", "whom",
    "whose", "which", "what", "myself", "itself", "themselves", "himself", "herself",
    // auxiliaries
    "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having",
    "do", "does", "did", "will", "would", "shall", "should", "can", "could", "may", "might",
    "must",
    // conjunctions and particles
    "and", "or", "but", "nor", "so", "yet", "if", "then", "than", "as", "because", "while",
    "when", "where", "whether", "although", "though", "not", "also", "just", "there", "here",
    "how", "why", "very", "too",
];

static DEFAULT_SET: LazyLock<Stopwords> = LazyLock::new(Stopwords::default);

/// Case-insensitive stopword membership against the shipped list.
pub fn is_stopword(surface: &str) -> bool {
    DEFAULT_SET.contains(surface)
}

/// A set of lowercase stopwords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: BTreeSet<String>,
}

impl Default for Stopwords {
    fn default() -> Self {
        Self {
            words: DEFAULT_STOPWORDS.iter().map(|w| (*w).to_owned()).collect(),
        }
    }
}

impl Stopwords {
    /// Reads an override list: one lowercase word per line. Blank lines are ignored.
    pub fn from_reader<R: BufRead>(reader: R) -> io::Result<Self> {
        let mut words = BTreeSet::new();
        for line in reader.lines() {
            let line = line?;
            let word = line.trim();
            if !word.is_empty() {
                words.insert(word.to_lowercase());
            }
        }
        Ok(Self { words })
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.words.contains(&surface.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_and_case_insensitive() {
        assert!(is_stopword("the"));
        assert!(is_stopword("The"));
        assert!(!is_stopword("bizarre"));
    }

    #[test]
    fn shipped_list_size() {
        let n = Stopwords::default().len();
        assert!((120..=150).contains(&n), "{n}");
        assert_eq!(n, DEFAULT_STOPWORDS.len(), "duplicate entries in the shipped list");
    }

    #[test]
    fn override_file() {
        let sw = Stopwords::from_reader("foo\n\nBar\n".as_bytes()).unwrap();
        assert!(sw.contains("FOO"));
        assert!(sw.contains("bar"));
        assert!(!sw.contains("the"));
    }
}
