//! Rule-based English pattern matcher.
//!
//! Sentences are split on periods and semicolons; each sentence is matched
//! against a phrase dictionary (relation phrases, placement-attribute
//! phrases and unary group phrases), longest phrase first. The words before
//! the phrase form the target noun phrase, the words after it the reference.
//! Repeated mentions resolve positionally: `the X` binds to the most
//! recently introduced X, `a`/`another X` allocates a new ID.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{
    Diagnostic, ObjectRef, ParseError, Query, Relation, SemanticTriplet, Severity,
};
use crate::scene::ObjectLibrary;

pub const DEFAULT_RELATION_DICTIONARY_TOML: &str =
    include_str!("../../data/relation_dictionary.toml");

/// Phrase tables driving the English parser.
#[derive(Clone, Debug)]
pub struct RelationDictionary {
    /// (phrase words, what the phrase means), longest phrase first.
    entries: Vec<(Vec<String>, PhraseKind)>,
}

#[derive(Clone, Debug, PartialEq)]
enum PhraseKind {
    Relation(Relation),
    Attribute(String),
    GroupRelation(Relation),
}

#[derive(Debug, thiserror::Error)]
pub enum DictionaryError {
    #[error("relation dictionary parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("relation dictionary: unknown relation token `{0}`")]
    UnknownRelation(String),
}

#[derive(Deserialize)]
struct DictionaryFile {
    #[serde(default)]
    relation_phrases: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    attribute_phrases: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    group_phrases: BTreeMap<String, Vec<String>>,
}

impl RelationDictionary {
    pub fn builtin() -> RelationDictionary {
        Self::from_toml_str(DEFAULT_RELATION_DICTIONARY_TOML)
            .expect("builtin relation dictionary is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<RelationDictionary, DictionaryError> {
        let file: DictionaryFile = toml::from_str(text)?;
        let mut entries = Vec::new();
        for (token, phrases) in &file.relation_phrases {
            let rel = Relation::parse(token)
                .ok_or_else(|| DictionaryError::UnknownRelation(token.clone()))?;
            for p in phrases {
                entries.push((split_words(p), PhraseKind::Relation(rel)));
            }
        }
        for (attr, phrases) in &file.attribute_phrases {
            for p in phrases {
                entries.push((split_words(p), PhraseKind::Attribute(attr.clone())));
            }
        }
        for (token, phrases) in &file.group_phrases {
            let rel = Relation::parse(token)
                .ok_or_else(|| DictionaryError::UnknownRelation(token.clone()))?;
            for p in phrases {
                entries.push((split_words(p), PhraseKind::GroupRelation(rel)));
            }
        }
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
        Ok(RelationDictionary { entries })
    }
}

fn split_words(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_string()).collect()
}

fn number_word(w: &str) -> Option<u32> {
    let n = match w {
        "one" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        _ => return w.parse().ok().filter(|&n| n >= 1),
    };
    Some(n)
}

fn singularize(w: &str) -> Option<String> {
    for suffix in ["xes", "ses", "shes", "ches"] {
        if let Some(stem) = w.strip_suffix("es") {
            if w.ends_with(suffix) {
                return Some(stem.to_string());
            }
        }
    }
    if let Some(stem) = w.strip_suffix("ies") {
        return Some(format!("{stem}y"));
    }
    if w.ends_with('s') && !w.ends_with("ss") {
        return Some(w[..w.len() - 1].to_string());
    }
    None
}

/// Parses English sentences into a query, returning the query together with
/// the diagnostics accumulated for skipped sentences and assumptions made.
pub fn parse_english(
    text: &str,
    lib: &ObjectLibrary,
    dict: &RelationDictionary,
) -> Result<(Query, Vec<Diagnostic>), ParseError> {
    let mut parser = EnglishParser {
        lib,
        dict,
        next_id: BTreeMap::new(),
        q: Query::default(),
        diags: Vec::new(),
    };
    let joined = text.replace(['\n', '\r'], " ");
    for (idx, sentence) in joined.split(['.', ';', '!']).enumerate() {
        parser.sentence(idx + 1, sentence)?;
    }
    parser.q.normalize();
    Ok((parser.q, parser.diags))
}

struct EnglishParser<'a> {
    lib: &'a ObjectLibrary,
    dict: &'a RelationDictionary,
    next_id: BTreeMap<String, u32>,
    q: Query,
    diags: Vec<Diagnostic>,
}

impl<'a> EnglishParser<'a> {
    fn warn(&mut self, line: usize, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            line,
            severity: Severity::Warning,
            message: message.into(),
        });
    }

    fn sentence(&mut self, line: usize, raw: &str) -> Result<(), ParseError> {
        let mut words: Vec<String> = raw
            .chars()
            .map(|c| {
                let c = c.to_ascii_lowercase();
                if c.is_ascii_alphanumeric() || c == '-' {
                    c
                } else {
                    ' '
                }
            })
            .collect::<String>()
            .replace('-', " ")
            .split_whitespace()
            .map(|w| w.to_string())
            .collect();
        if words.is_empty() {
            return Ok(());
        }
        while matches!(words.first().map(|s| s.as_str()), Some("and" | "then")) {
            words.remove(0);
        }
        words.retain(|w| w != "also");
        if words.is_empty() {
            return Ok(());
        }

        if words[0] == "there" && words.len() > 1 && matches!(words[1].as_str(), "is" | "are") {
            self.parse_np(&words[2..], line)?;
            return Ok(());
        }

        let Some((start, len, kind)) = self.find_phrase(&words) else {
            self.warn(line, format!("no recognizable relation pattern in `{}`", raw.trim()));
            return Ok(());
        };
        if start == 0 {
            self.warn(line, "sentence has no subject; skipped");
            return Ok(());
        }
        let before = &words[..start];
        let after = &words[start + len..];
        match kind {
            PhraseKind::Relation(rel) => {
                if after.is_empty() {
                    self.warn(line, "relation phrase without a reference object; skipped");
                    return Ok(());
                }
                let target = self.parse_np(before, line)?;
                let reference = self.parse_np(after, line)?;
                if target.base() == reference.base() && !rel.chains_over_group() {
                    self.warn(line, "target and reference resolve to the same object; skipped");
                    return Ok(());
                }
                self.q.triplets.push(SemanticTriplet {
                    target,
                    reference,
                    relation: rel,
                });
            }
            PhraseKind::Attribute(attr) => {
                if !after.is_empty() {
                    self.warn(line, "ignoring words after attribute phrase");
                }
                let obj = self.parse_np(before, line)?;
                let base = obj.base();
                self.q.attributes.entry(base.clone()).or_default().push(attr.clone());
                self.q.counts.entry(base).or_insert(1);
                dedup_attrs(&mut self.q, &obj);
            }
            PhraseKind::GroupRelation(rel) => {
                if !after.is_empty() {
                    self.warn(line, "ignoring words after group relation phrase");
                }
                let obj = self.parse_np(before, line)?;
                let count = self.q.counts.get(&obj.base()).copied().unwrap_or(1);
                if count < 2 {
                    self.warn(line, format!("`{rel}` needs a counted group; skipped"));
                    return Ok(());
                }
                self.q.triplets.push(SemanticTriplet {
                    target: obj.base(),
                    reference: obj.base(),
                    relation: rel,
                });
            }
        }
        Ok(())
    }

    fn find_phrase(&self, words: &[String]) -> Option<(usize, usize, PhraseKind)> {
        let mut best: Option<(usize, usize, PhraseKind)> = None;
        for (phrase, kind) in &self.dict.entries {
            if let Some(start) = find_subsequence(words, phrase) {
                let better = match &best {
                    None => true,
                    Some((bs, bl, _)) => phrase.len() > *bl || (phrase.len() == *bl && start < *bs),
                };
                if better {
                    best = Some((start, phrase.len(), kind.clone()));
                }
            }
        }
        best
    }

    /// Parses a noun phrase, allocating or resolving its ID and recording
    /// counts and attributes.
    fn parse_np(&mut self, words: &[String], line: usize) -> Result<ObjectRef, ParseError> {
        // sub-object pattern: [det] <region> of <inner NP>
        if let Some(of_pos) = words.iter().position(|w| w == "of") {
            let mut region_words: &[String] = &words[..of_pos];
            if matches!(
                region_words.first().map(|s| s.as_str()),
                Some("a" | "an" | "the")
            ) {
                region_words = &region_words[1..];
            }
            if region_words.len() == 1 && of_pos + 1 < words.len() {
                let region = region_words[0].clone();
                let known_region = self
                    .lib
                    .phrases()
                    .iter()
                    .any(|(_, cat)| {
                        self.lib
                            .get(cat)
                            .map(|m| m.regions.contains_key(&region))
                            .unwrap_or(false)
                    });
                if known_region {
                    let inner = self.parse_np(&words[of_pos + 1..], line)?;
                    let model = self.lib.get(&inner.category).expect("validated");
                    if model.regions.contains_key(&region) {
                        return Ok(inner.with_sub(region));
                    }
                    self.warn(
                        line,
                        format!(
                            "`{region}` is not a sub-object of {}; using the whole object",
                            inner.category
                        ),
                    );
                    return Ok(inner);
                }
            }
        }

        let mut rest = words;
        let mut determiner: Option<&str> = None;
        let mut count: Option<u32> = None;
        if let Some(first) = rest.first() {
            match first.as_str() {
                "a" | "an" | "the" | "another" | "some" => {
                    determiner = Some(match first.as_str() {
                        "an" => "a",
                        d => d,
                    });
                    rest = &rest[1..];
                }
                _ => {}
            }
        }
        if let Some(first) = rest.first() {
            if let Some(n) = number_word(first) {
                count = Some(n);
                rest = &rest[1..];
            }
        }
        if rest.is_empty() {
            return Err(ParseError::new(line, "empty noun phrase"));
        }

        let (start, category, plural) = self.match_category(rest).ok_or_else(|| {
            ParseError::new(
                line,
                format!("unknown head noun in `{}`", words.join(" ")),
            )
        })?;

        // leading words that are neither determiner nor count: attributes or
        // ignored adjectives
        let mut attrs: Vec<String> = Vec::new();
        for w in &rest[..start] {
            if self.is_known_attribute(&category, w) {
                attrs.push(w.clone());
            } else {
                self.warn(line, format!("ignoring word `{w}`"));
            }
        }

        if count.is_none() {
            if determiner == Some("some") {
                count = Some(2);
                self.warn(line, "reading `some` as a count of 2");
            } else if plural && determiner.is_none() {
                count = Some(2);
                self.warn(line, "bare plural read as a count of 2");
            }
        }

        let reuse = determiner == Some("the") && count.is_none();
        let next = self.next_id.entry(category.clone()).or_insert(0);
        let id = if reuse && *next > 0 {
            *next - 1
        } else {
            let id = *next;
            *next += 1;
            id
        };
        let r = ObjectRef::new(category, id);
        if let Some(k) = count {
            self.q.counts.insert(r.clone(), k);
        } else {
            self.q.counts.entry(r.clone()).or_insert(1);
        }
        for a in attrs {
            let entry = self.q.attributes.entry(r.clone()).or_default();
            if !entry.contains(&a) {
                entry.push(a);
            }
        }
        Ok(r)
    }

    /// Longest library phrase that is a suffix of the word list, trying the
    /// plural-normalized form as well. Returns (suffix start, category,
    /// was_plural).
    fn match_category(&self, words: &[String]) -> Option<(usize, String, bool)> {
        let singular_last = words.last().and_then(|w| singularize(w)).map(|s| {
            let mut v: Vec<String> = words.to_vec();
            *v.last_mut().unwrap() = s;
            v
        });
        for (phrase, cat) in self.lib.phrases() {
            let pw = split_words(phrase);
            if pw.is_empty() || pw.len() > words.len() {
                continue;
            }
            let start = words.len() - pw.len();
            if words[start..] == pw[..] {
                return Some((start, cat.clone(), false));
            }
            if let Some(sing) = &singular_last {
                if sing[start..] == pw[..] {
                    return Some((start, cat.clone(), true));
                }
            }
        }
        None
    }

    fn is_known_attribute(&self, category: &str, word: &str) -> bool {
        self.lib
            .get(category)
            .map(|m| m.variants.contains_key(word))
            .unwrap_or(false)
    }
}

fn dedup_attrs(q: &mut Query, r: &ObjectRef) {
    if let Some(attrs) = q.attributes.get_mut(&r.base()) {
        let mut seen = Vec::new();
        attrs.retain(|a| {
            if seen.contains(a) {
                false
            } else {
                seen.push(a.clone());
                true
            }
        });
    }
}

fn find_subsequence(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| haystack[i..i + needle.len()] == needle[..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> (Query, Vec<Diagnostic>) {
        let lib = ObjectLibrary::builtin();
        let dict = RelationDictionary::builtin();
        parse_english(text, &lib, &dict).unwrap()
    }

    pub const TABLE1: &str = "A picture is above a bed. \
        A night stand is on the right side of the head of the bed. \
        A lamp is on the night stand. \
        Another picture is above the lamp. \
        A dresser is on the left side of the head of the bed.";

    #[test]
    fn table1_paragraph_parses_to_the_five_triplets() {
        let (q, diags) = parse(TABLE1);
        let rendered = q.render_triplets();
        assert_eq!(
            rendered,
            vec![
                "(picture-0, bed-0, above)",
                "(night-stand-0, bed-0:head, right)",
                "(lamp-0, night-stand-0, on)",
                "(picture-1, lamp-0, above)",
                "(dresser-0, bed-0:head, left)",
            ]
        );
        assert!(diags.is_empty(), "unexpected diagnostics: {diags:?}");
    }

    #[test]
    fn another_allocates_a_new_id() {
        let (q, _) = parse("A picture is above a bed. Another picture is above the bed.");
        assert_eq!(q.triplets[0].target.canonical(), "picture-0");
        assert_eq!(q.triplets[1].target.canonical(), "picture-1");
        assert_eq!(q.triplets[1].reference.canonical(), "bed-0");
    }

    #[test]
    fn the_binds_to_most_recent_introduction() {
        let (q, _) = parse(
            "A chair is in front of the desk. A monitor is on the desk. \
             Another chair is behind the desk.",
        );
        assert_eq!(q.triplets[0].reference.canonical(), "desk-0");
        assert_eq!(q.triplets[1].reference.canonical(), "desk-0");
        assert_eq!(q.triplets[2].target.canonical(), "chair-1");
    }

    #[test]
    fn counts_and_attributes() {
        let (q, _) = parse(
            "There is a triple sofa. The sofa is against the wall. \
             Two pictures are above the sofa.",
        );
        let sofa = ObjectRef::new("sofa", 0);
        assert_eq!(q.attributes[&sofa], vec!["triple", "against-wall"]);
        let picture = ObjectRef::new("picture", 0);
        assert_eq!(q.counts[&picture], 2);
        assert_eq!(q.triplets.len(), 1);
        assert_eq!(q.triplets[0].canonical(), "(picture-0, sofa-0, above)");
    }

    #[test]
    fn fig7c_style_paragraph() {
        let (q, diags) = parse(
            "A chair is in front of the desk. Some boxes are on the desk. \
             A monitor is on the desk. The desk is against the wall.",
        );
        assert_eq!(
            q.render_triplets(),
            vec![
                "(chair-0, desk-0, front)",
                "(box-0, desk-0, on)",
                "(monitor-0, desk-0, on)",
            ]
        );
        assert_eq!(q.counts[&ObjectRef::new("box", 0)], 2);
        assert_eq!(
            q.attributes[&ObjectRef::new("desk", 0)],
            vec!["against-wall"]
        );
        // the `some` count assumption is surfaced
        assert!(diags.iter().any(|d| d.message.contains("some")));
    }

    #[test]
    fn group_row_sentence() {
        let (q, _) = parse("Three chairs are in a row.");
        assert_eq!(q.counts[&ObjectRef::new("chair", 0)], 3);
        assert_eq!(q.triplets.len(), 1);
        assert_eq!(q.triplets[0].relation, Relation::InARow);
        assert_eq!(q.triplets[0].target, q.triplets[0].reference);
    }

    #[test]
    fn unrecognized_sentence_warns_and_skips() {
        let (q, diags) = parse("The bed sparkles merrily. A lamp is on the bed.");
        assert_eq!(q.triplets.len(), 1);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 1);
        assert_eq!(diags[0].severity, Severity::Warning);
    }

    #[test]
    fn unknown_head_noun_is_an_error() {
        let lib = ObjectLibrary::builtin();
        let dict = RelationDictionary::builtin();
        let err = parse_english("A unicorn is above the bed.", &lib, &dict).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("unknown head noun"));
    }

    #[test]
    fn number_words_and_digits() {
        let (q, _) = parse("3 chairs are in front of a dining table.");
        assert_eq!(q.counts[&ObjectRef::new("chair", 0)], 3);
        assert_eq!(q.triplets[0].reference.category, "dining-table");
    }
}
