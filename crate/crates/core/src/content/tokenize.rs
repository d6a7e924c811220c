use serde::{Deserialize, Serialize};

use super::{ContentError, Stopwords};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub is_stopword: bool,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits `text` into word tokens using the shipped stopword list.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ContentError> {
    tokenize_with(text, &Stopwords::default())
}

/// Word tokens are maximal runs of letters and digits. An apostrophe is kept
/// when it sits between two such characters ("Trump's"); all other
/// punctuation and whitespace separates tokens and is dropped.
pub fn tokenize_with(text: &str, stopwords: &Stopwords) -> Result<Vec<Token>, ContentError> {
    if text.trim().is_empty() {
        return Err(ContentError::EmptyText);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut surfaces = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else if !current.is_empty() {
            surfaces.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        surfaces.push(current);
    }
    Ok(surfaces
        .into_iter()
        .enumerate()
        .map(|(index, surface)| Token {
            index,
            is_stopword: stopwords.contains(&surface),
            surface,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).unwrap().into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn drops_punctuation() {
        assert_eq!(surfaces("We have on beautiful law."), ["We", "have", "on", "beautiful", "law"]);
    }

    #[test]
    fn keeps_internal_apostrophes() {
        assert_eq!(surfaces("Trump's speech"), ["Trump's", "speech"]);
        assert_eq!(surfaces("Trump\u{2019}s 'quoted'"), ["Trump\u{2019}s", "quoted"]);
        assert_eq!(surfaces("players' scores"), ["players", "scores"]);
    }

    #[test]
    fn splits_hyphens_and_keeps_digits() {
        assert_eq!(surfaces("a life-altering 2020 event"), ["a", "life", "altering", "2020", "event"]);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert_eq!(tokenize("   "), Err(ContentError::EmptyText));
        assert_eq!(tokenize(""), Err(ContentError::EmptyText));
    }

    #[test]
    fn flags_stopwords() {
        let tokens = tokenize("The bizarre law").unwrap();
        assert!(tokens[0].is_stopword);
        assert!(!tokens[1].is_stopword);
    }

    proptest! {
        #[test]
        fn indices_are_dense(text in "\\PC{1,80}") {
            prop_assume!(!text.trim().is_empty());
            let tokens = tokenize(&text).unwrap();
            for (i, t) in tokens.iter().enumerate() {
                prop_assert_eq!(t.index, i);
                prop_assert!(!t.surface.is_empty());
            }
            prop_assert_eq!(tokenize(&text).unwrap(), tokens);
        }

        #[test]
        fn only_punctuation_and_whitespace_is_lost(text in "[a-zA-Z0-9 ,.;!?'-]{1,60}") {
            prop_assume!(!text.trim().is_empty());
            let kept: String = tokenize(&text).unwrap().iter().map(|t| t.surface.as_str()).collect();
            let alnum: String = text.chars().filter(|c| c.is_alphanumeric()).collect();
            let kept_alnum: String = kept.chars().filter(|c| c.is_alphanumeric()).collect();
            prop_assert_eq!(kept_alnum, alnum);
        }
    }
}
