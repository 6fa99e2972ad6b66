//! Review corpus data model and corpus file I/O.
//!
//! A corpus is a set of reviewed articles, each carrying the expert review
//! statements published alongside it. The interchange format is line-delimited
//! JSON, one article object per line.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::LazyLock;

use chrono::{DateTime, NaiveDate, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while reading or validating a corpus file.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
}

impl CorpusError {
    fn schema(line: usize, message: impl Into<String>) -> Self {
        CorpusError::Schema {
            line,
            message: message.into(),
        }
    }
}

/// One expert review statement within an article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    /// Unique within the parent article.
    pub statement_id: String,
    pub reviewer: Option<String>,
    pub text: String,
}

/// A reviewed primary study together with its review statements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RicArticle {
    pub article_id: String,
    pub title: String,
    pub published: NaiveDate,
    /// Normalized DOI (lowercase, starts with "10.", contains "/"), if known.
    pub doi: Option<String>,
    pub statements: Vec<Statement>,
}

/// A set of articles read from one source.
///
/// `source_label` and `extracted_at` are local provenance; the corpus file
/// carries only the article records themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub articles: Vec<RicArticle>,
    pub source_label: String,
    pub extracted_at: DateTime<Utc>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn statement_count(&self) -> usize {
        self.articles.iter().map(|a| a.statements.len()).sum()
    }
}

/// Ingest-time validation knobs.
#[derive(Debug, Clone)]
pub struct CorpusOptions {
    /// Minimum number of non-whitespace characters per statement. Statements
    /// below the threshold are treated as extraction artifacts and rejected.
    pub min_statement_chars: usize,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            min_statement_chars: 20,
        }
    }
}

/// True if `s` is a DOI in the normalized form used throughout the pipeline.
pub fn is_normalized_doi(s: &str) -> bool {
    s.starts_with("10.") && s.contains('/') && !s.chars().any(|c| c.is_uppercase())
}

static DOI_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"10\.\d{4,9}/[^\s"'<>]+"#).expect("doi regex"));

/// Find the first DOI-shaped substring in `text` and normalize it.
///
/// Normalization: any `https://doi.org/` or `doi:` prefix is dropped (the
/// match starts at `10.`), the result is lowercased, and trailing `.,;)`
/// punctuation is stripped. Returns `None` when nothing matches.
pub fn extract_doi(text: &str) -> Option<String> {
    let m = DOI_RE.find(text)?;
    let mut doi = m.as_str().to_lowercase();
    while doi.ends_with(['.', ',', ';', ')']) {
        doi.pop();
    }
    if is_normalized_doi(&doi) {
        Some(doi)
    } else {
        None
    }
}

fn validate_article(article: &RicArticle, line: usize, opts: &CorpusOptions) -> Result<(), CorpusError> {
    if article.article_id.trim().is_empty() {
        return Err(CorpusError::schema(line, "empty article_id"));
    }
    if let Some(doi) = &article.doi {
        if !is_normalized_doi(doi) {
            return Err(CorpusError::schema(
                line,
                format!(
                    "article '{}': doi '{}' is not normalized (expected lowercase, starting with \"10.\" and containing \"/\")",
                    article.article_id, doi
                ),
            ));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for st in &article.statements {
        if !seen.insert(st.statement_id.as_str()) {
            return Err(CorpusError::schema(
                line,
                format!(
                    "article '{}': duplicate statement_id '{}'",
                    article.article_id, st.statement_id
                ),
            ));
        }
        if st.text.trim().is_empty() {
            return Err(CorpusError::schema(
                line,
                format!(
                    "article '{}': statement '{}' has empty text",
                    article.article_id, st.statement_id
                ),
            ));
        }
        let non_ws = st.text.chars().filter(|c| !c.is_whitespace()).count();
        if non_ws < opts.min_statement_chars {
            return Err(CorpusError::schema(
                line,
                format!(
                    "article '{}': statement '{}' has {} non-whitespace characters (minimum {})",
                    article.article_id, st.statement_id, non_ws, opts.min_statement_chars
                ),
            ));
        }
    }
    Ok(())
}

/// Parse a line-delimited corpus file with the default validation options.
pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    parse_corpus_with(path, &CorpusOptions::default())
}

/// Parse a line-delimited corpus file.
///
/// Every line must hold one well-formed article record; malformed lines are
/// rejected with the offending line number, never skipped.
pub fn parse_corpus_with(path: impl AsRef<Path>, opts: &CorpusOptions) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path)?;
    let mut articles = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (idx, raw) in contents.lines().enumerate() {
        let line = idx + 1;
        let article: RicArticle = serde_json::from_str(raw)
            .map_err(|e| CorpusError::schema(line, format!("invalid article record: {e}")))?;
        validate_article(&article, line, opts)?;
        if !seen_ids.insert(article.article_id.clone()) {
            return Err(CorpusError::schema(
                line,
                format!("duplicate article_id '{}'", article.article_id),
            ));
        }
        articles.push(article);
    }
    Ok(Corpus {
        articles,
        source_label: path.display().to_string(),
        extracted_at: DateTime::<Utc>::UNIX_EPOCH,
    })
}

/// Serialize a corpus back to its line-delimited file form.
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut out = fs::File::create(path)?;
    for article in &corpus.articles {
        let line = serde_json::to_string(article).expect("article serializes");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn article_json(id: &str) -> String {
        format!(
            r#"{{"article_id":"{id}","title":"Study {id}","published":"2023-05-11","doi":"10.1000/{id}","statements":[{{"statement_id":"s1","reviewer":"Prof. A","text":"The methodology is sound and the cohort is large enough."}}]}}"#
        )
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn parses_two_valid_articles() {
        let f = write_lines(&[article_json("a1"), article_json("a2")]);
        let corpus = parse_corpus(f.path()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.articles[0].article_id, "a1");
        assert_eq!(corpus.articles[1].doi.as_deref(), Some("10.1000/a2"));
    }

    #[test]
    fn duplicate_article_id_is_rejected_with_id_and_line() {
        let f = write_lines(&[article_json("dup"), article_json("dup")]);
        let err = parse_corpus(f.path()).unwrap_err();
        match err {
            CorpusError::Schema { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("dup"), "message: {message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let f = write_lines(&[]);
        let corpus = parse_corpus(f.path()).unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn malformed_line_is_an_error_not_a_skip() {
        let f = write_lines(&[article_json("a1"), "not json".to_string()]);
        let err = parse_corpus(f.path()).unwrap_err();
        assert!(matches!(err, CorpusError::Schema { line: 2, .. }));
    }

    #[test]
    fn short_statement_is_rejected_at_ingest() {
        let line = r#"{"article_id":"a1","title":"T","published":"2020-01-01","doi":null,"statements":[{"statement_id":"s1","reviewer":null,"text":"too short"}]}"#;
        let err = parse_corpus(write_lines(&[line.to_string()]).path()).unwrap_err();
        assert!(matches!(err, CorpusError::Schema { line: 1, .. }));

        // The threshold is configurable.
        let opts = CorpusOptions {
            min_statement_chars: 5,
        };
        let corpus = parse_corpus_with(write_lines(&[line.to_string()]).path(), &opts).unwrap();
        assert_eq!(corpus.statement_count(), 1);
    }

    #[test]
    fn non_normalized_doi_is_rejected() {
        let line = r#"{"article_id":"a1","title":"T","published":"2020-01-01","doi":"DOI:10.1/X","statements":[]}"#;
        let err = parse_corpus(write_lines(&[line.to_string()]).path()).unwrap_err();
        assert!(matches!(err, CorpusError::Schema { .. }));
    }

    #[test]
    fn duplicate_statement_id_within_article_is_rejected() {
        let line = r#"{"article_id":"a1","title":"T","published":"2020-01-01","doi":null,"statements":[{"statement_id":"s1","reviewer":null,"text":"A perfectly reasonable review statement."},{"statement_id":"s1","reviewer":null,"text":"Another perfectly reasonable review statement."}]}"#;
        let err = parse_corpus(write_lines(&[line.to_string()]).path()).unwrap_err();
        match err {
            CorpusError::Schema { message, .. } => assert!(message.contains("s1")),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn extract_doi_normalizes_prefix_and_case() {
        assert_eq!(
            extract_doi("https://doi.org/10.1000/XYZ123"),
            Some("10.1000/xyz123".to_string())
        );
    }

    #[test]
    fn extract_doi_absent_is_none() {
        assert_eq!(extract_doi("no identifier here"), None);
    }

    #[test]
    fn extract_doi_strips_trailing_punctuation() {
        assert_eq!(
            extract_doi("see DOI:10.1000/abc.def."),
            Some("10.1000/abc.def".to_string())
        );
        assert_eq!(
            extract_doi("(10.5555/j.abc;)"),
            Some("10.5555/j.abc".to_string())
        );
    }

    #[test]
    fn extract_doi_is_idempotent() {
        for input in [
            "https://doi.org/10.1000/XYZ123",
            "doi:10.1234/a-b_c.d,",
            "plain 10.99999/x/y/z here",
        ] {
            let first = extract_doi(input).unwrap();
            assert_eq!(extract_doi(&first), Some(first.clone()));
        }
    }

    #[test]
    fn corpus_round_trips_through_file_form() {
        let f = write_lines(&[article_json("a1"), article_json("a2"), article_json("a3")]);
        let corpus = parse_corpus(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_corpus(&corpus, out.path()).unwrap();
        let reparsed = parse_corpus(out.path()).unwrap();
        assert_eq!(corpus.articles, reparsed.articles);
    }
}
