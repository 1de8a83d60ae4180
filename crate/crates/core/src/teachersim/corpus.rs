use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::treebank::{parse_bracketed, serialize_bracketed, tokens_from_words, ConstituencyTree, Token};

use super::TeacherSimError;

/// One sentence with whichever trees are known for it.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedExample {
    pub id: String,
    pub tokens: Vec<Token>,
    pub gold: Option<ConstituencyTree>,
    pub teacher: Option<ConstituencyTree>,
    pub noise_tier: Option<usize>,
    pub student: Option<ConstituencyTree>,
}

impl AnnotatedExample {
    pub fn with_gold(id: String, gold: ConstituencyTree) -> Self {
        AnnotatedExample {
            id,
            tokens: gold.tokens().to_vec(),
            gold: Some(gold),
            teacher: None,
            noise_tier: None,
            student: None,
        }
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn to_record(&self) -> ExampleRecord {
        ExampleRecord {
            id: self.id.clone(),
            tokens: self.tokens.iter().map(|t| t.surface.clone()).collect(),
            gold: self.gold.as_ref().map(serialize_bracketed),
            teacher: self.teacher.as_ref().map(serialize_bracketed),
            noise_tier: self.noise_tier,
            student: self.student.as_ref().map(serialize_bracketed),
        }
    }

    fn from_record(rec: ExampleRecord, line: usize) -> Result<Self, TeacherSimError> {
        let parse = |text: &Option<String>, field: &'static str| -> Result<Option<ConstituencyTree>, TeacherSimError> {
            let Some(text) = text else { return Ok(None) };
            let tree = parse_bracketed(text).map_err(|e| TeacherSimError::MalformedRecord {
                line,
                reason: format!("{field}: {e}"),
            })?;
            if tree.words() != rec.tokens.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(TeacherSimError::TokenMismatch { line, field });
            }
            Ok(Some(tree))
        };
        let gold = parse(&rec.gold, "gold")?;
        let teacher = parse(&rec.teacher, "teacher")?;
        let student = parse(&rec.student, "student")?;
        // prefer tokens that carry tags from a tree
        let tokens = gold
            .as_ref()
            .or(teacher.as_ref())
            .map(|t| t.tokens().to_vec())
            .unwrap_or_else(|| tokens_from_words(&rec.tokens));
        Ok(AnnotatedExample {
            id: rec.id,
            tokens,
            gold,
            teacher,
            noise_tier: rec.noise_tier,
            student,
        })
    }
}

/// The on-disk shape of one example line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub gold: Option<String>,
    #[serde(default)]
    pub teacher: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_tier: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    header: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusFile {
    /// Provenance record written as the first line, if any.
    pub header: Option<serde_json::Value>,
    pub examples: Vec<AnnotatedExample>,
}

pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<CorpusFile, TeacherSimError> {
    let mut file = CorpusFile::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| TeacherSimError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if value.get("header").is_some() && file.examples.is_empty() && file.header.is_none() {
            let h: HeaderRecord = serde_json::from_value(value).map_err(|e| TeacherSimError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
            file.header = Some(h.header);
            continue;
        }
        let rec: ExampleRecord = serde_json::from_value(value).map_err(|e| TeacherSimError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        file.examples.push(AnnotatedExample::from_record(rec, line_no)?);
    }
    Ok(file)
}

pub fn ingest_jsonl(path: impl AsRef<Path>) -> Result<CorpusFile, TeacherSimError> {
    let f = std::fs::File::open(path)?;
    parse_jsonl(BufReader::new(f))
}

pub fn write_jsonl<W: Write>(
    mut out: W,
    header: Option<&serde_json::Value>,
    examples: &[AnnotatedExample],
) -> Result<(), TeacherSimError> {
    let to_io = |e: serde_json::Error| TeacherSimError::Io(e.into());
    if let Some(h) = header {
        let line = serde_json::to_string(&HeaderRecord { header: h.clone() }).map_err(to_io)?;
        writeln!(out, "{line}")?;
    }
    for ex in examples {
        writeln!(out, "{}", serde_json::to_string(&ex.to_record()).map_err(to_io)?)?;
    }
    Ok(())
}
