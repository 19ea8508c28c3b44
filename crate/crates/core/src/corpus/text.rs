//! Transcript statistics: per-class TF-IDF and token counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::Sample;
use crate::error::{Error, Result};

pub fn whitespace_tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTerms {
    pub class: String,
    /// `(term, score)`, best first.
    pub terms: Vec<(String, f64)>,
}

/// Each class is one aggregate document: `tf = count / class tokens`,
/// `idf = ln(classes / classes containing the term)`. Ties rank
/// lexicographically. Classes come out in lexicographic order.
pub fn tfidf_top_terms(docs: &[(String, Vec<String>)], k: usize) -> Result<Vec<ClassTerms>> {
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for (class, tokens) in docs {
        let c = counts.entry(class).or_default();
        for t in tokens {
            *c.entry(t).or_default() += 1;
        }
    }
    if counts.len() < 2 {
        return Err(Error::Data(format!(
            "TF-IDF needs at least 2 classes, found {}",
            counts.len()
        )));
    }
    if let Some((class, _)) = counts.iter().find(|(_, c)| c.is_empty()) {
        return Err(Error::Data(format!("class '{class}' has no tokens")));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for c in counts.values() {
        for t in c.keys() {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = counts.len() as f64;
    Ok(counts
        .iter()
        .map(|(class, c)| {
            let total = c.values().sum::<usize>() as f64;
            let mut terms: Vec<(String, f64)> = c
                .iter()
                .map(|(t, &cnt)| {
                    let idf = (n / df[t] as f64).ln();
                    (t.to_string(), cnt as f64 / total * idf)
                })
                .collect();
            terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            terms.truncate(k);
            ClassTerms {
                class: class.to_string(),
                terms,
            }
        })
        .collect())
}

/// `class,word,score` rows.
pub fn tfidf_csv(classes: &[ClassTerms]) -> String {
    let mut out = String::from("class,word,score\n");
    for c in classes {
        for (t, s) in &c.terms {
            writeln!(out, "{},{},{:.6}", c.class, t, s).expect("string write");
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenRow {
    pub class: String,
    pub samples: usize,
    pub tokens: usize,
}

impl TokenRow {
    pub fn average(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.tokens as f64 / self.samples as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenStats {
    pub per_class: Vec<TokenRow>,
    pub overall: TokenRow,
}

impl TokenStats {
    pub fn render(&self) -> String {
        let mut out = String::from("| Dialect | # samples | # tokens | avg tokens/sample |\n|---|---|---|---|\n");
        for r in self.per_class.iter().chain([&self.overall]) {
            writeln!(out, "| {} | {} | {} | {:.2} |", r.class, r.samples, r.tokens, r.average())
                .expect("string write");
        }
        out
    }
}

/// Token counts per dialect. Samples without a dialect label are grouped
/// as `unlabelled`.
pub fn token_stats<F>(samples: &[&Sample], tokenizer: F) -> Result<TokenStats>
where
    F: Fn(&str) -> Vec<String>,
{
    let mut rows: BTreeMap<String, TokenRow> = BTreeMap::new();
    let mut overall = TokenRow {
        class: "Overall".into(),
        samples: 0,
        tokens: 0,
    };
    for s in samples {
        let text = s
            .transcript
            .as_deref()
            .ok_or_else(|| Error::Data(format!("sample '{}' has no transcript", s.id)))?;
        let n = tokenizer(text).len();
        let class = s.dialect.map_or("unlabelled", |d| d.name()).to_string();
        let row = rows.entry(class.clone()).or_insert(TokenRow {
            class,
            samples: 0,
            tokens: 0,
        });
        row.samples += 1;
        row.tokens += n;
        overall.samples += 1;
        overall.tokens += n;
    }
    Ok(TokenStats {
        per_class: rows.into_values().collect(),
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::Dialect;

    fn toks(s: &str) -> Vec<String> {
        whitespace_tokenize(s)
    }

    fn sample(id: &str, dialect: Dialect, text: Option<&str>) -> Sample {
        Sample {
            id: id.into(),
            speaker_id: "spk".into(),
            dialect: Some(dialect),
            gender: None,
            age: None,
            duration_seconds: 1.0,
            transcript: text.map(str::to_string),
            features_path: None,
            frames: None,
        }
    }

    #[test]
    fn hand_computed_two_class_scores() {
        let docs = vec![("A".to_string(), toks("x x y")), ("B".to_string(), toks("y z"))];
        let out = tfidf_top_terms(&docs, 10).unwrap();
        assert_eq!(out[0].class, "A");
        assert_eq!(out[0].terms[0].0, "x");
        assert!((out[0].terms[0].1 - 2.0 / 3.0 * 2f64.ln()).abs() <= 1e-12);
        let y = out[0].terms.iter().find(|(t, _)| t == "y").unwrap();
        assert_eq!(y.1, 0.0);
        assert_eq!(out[0].terms.last().unwrap().0, "y");
    }

    #[test]
    fn ties_break_lexicographically_and_k_truncates() {
        let docs = vec![("A".to_string(), toks("b a c")), ("B".to_string(), toks("d"))];
        let out = tfidf_top_terms(&docs, 2).unwrap();
        let words: Vec<&str> = out[0].terms.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(words, ["a", "b"]);
        assert!(tfidf_csv(&out).starts_with("class,word,score\nA,a,"));
    }

    #[test]
    fn tfidf_rejects_degenerate_inputs() {
        assert!(tfidf_top_terms(&[("A".to_string(), toks("x"))], 3).is_err());
        let docs = vec![("A".to_string(), toks("x")), ("B".to_string(), vec![])];
        assert!(tfidf_top_terms(&docs, 3).is_err());
    }

    #[test]
    fn token_averages() {
        let one = sample("a", Dialect::Moldavian, Some("a b c"));
        let st = token_stats(&[&one], whitespace_tokenize).unwrap();
        assert_eq!(st.overall.average(), 3.0);

        let s = [
            sample("a", Dialect::Moldavian, Some("a b c")),
            sample("b", Dialect::Moldavian, Some("d e f")),
            sample("c", Dialect::StandardRomanian, Some("1 2 3 4 5 6")),
        ];
        let refs: Vec<&Sample> = s.iter().collect();
        let st = token_stats(&refs, whitespace_tokenize).unwrap();
        assert_eq!(st.per_class[0].average(), 3.0);
        assert_eq!(st.per_class[1].average(), 6.0);
        assert_eq!(st.overall.average(), 4.0);
        assert!(st.render().contains("| Overall | 3 | 12 | 4.00 |"));
    }

    #[test]
    fn custom_tokenizer_and_missing_transcript() {
        let s = sample("a", Dialect::Moldavian, Some("a-b-c"));
        let st = token_stats(&[&s], |t| t.split('-').map(str::to_string).collect()).unwrap();
        assert_eq!(st.overall.tokens, 3);
        let missing = sample("gone", Dialect::Moldavian, None);
        let err = token_stats(&[&missing], whitespace_tokenize).unwrap_err();
        assert!(err.to_string().contains("gone"));
    }
}
