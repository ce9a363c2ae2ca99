//! JSONL readers and writers. Readers never abort on a bad line: every
//! line yields either a record or a line-numbered error.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use docforge_core::corpus::{SampleRecord, VerdictRecord};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: io::Error },
    #[error("failed reading {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("failed writing {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

impl<T> Loaded<T> {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn summary(&self) -> String {
        format!("{} records, {} errors", self.records.len(), self.errors.len())
    }
}

/// Turns serde's messages into the field-naming form used in reports.
fn describe(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            return format!("missing required field '{field}'");
        }
    }
    msg
}

/// Reads JSONL, requiring `required` keys on every object and running
/// `check` on each decoded record. Blank lines count as errors so that
/// records plus errors always equals the line count.
pub fn read_jsonl<T, R>(
    reader: R,
    required: &[&str],
    mut check: impl FnMut(&T) -> Result<(), String>,
) -> io::Result<Loaded<T>>
where
    T: DeserializeOwned,
    R: BufRead,
{
    let mut out = Loaded {
        records: Vec::new(),
        errors: Vec::new(),
    };
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let number = index + 1;
        let mut fail = |message: String| out.errors.push(LineError { line: number, message });
        if line.trim().is_empty() {
            fail("empty line".into());
            continue;
        }
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                fail(format!("invalid JSON: {e}"));
                continue;
            }
        };
        let Some(object) = value.as_object() else {
            fail("record must be a JSON object".into());
            continue;
        };
        if let Some(missing) = required.iter().find(|k| !object.contains_key(**k)) {
            fail(format!("missing required field '{missing}'"));
            continue;
        }
        match serde_json::from_value::<T>(value) {
            Ok(record) => match check(&record) {
                Ok(()) => out.records.push(record),
                Err(message) => fail(message),
            },
            Err(e) => fail(describe(&e)),
        }
    }
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(|source| IoError::Open {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_jsonl_file<T: DeserializeOwned>(
    path: &Path,
    required: &[&str],
    check: impl FnMut(&T) -> Result<(), String>,
) -> Result<Loaded<T>, IoError> {
    read_jsonl(open(path)?, required, check).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Corpus reader: schema-checks each record and rejects duplicate ids.
pub fn read_corpus<R: BufRead>(reader: R) -> io::Result<Loaded<SampleRecord>> {
    let mut seen = HashSet::new();
    read_jsonl(reader, &["id", "candidates"], |r: &SampleRecord| {
        r.validate().map_err(|e| e.to_string())?;
        if !seen.insert(r.id.clone()) {
            return Err(format!("duplicate id {:?}", r.id));
        }
        Ok(())
    })
}

pub fn load_corpus(path: &Path) -> Result<Loaded<SampleRecord>, IoError> {
    read_corpus(open(path)?).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_verdicts(path: &Path) -> Result<Loaded<VerdictRecord>, IoError> {
    read_jsonl_file(path, &["sample_id", "state", "layer"], |_: &VerdictRecord| Ok(()))
}

pub fn write_jsonl_to<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> io::Result<usize> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(items.len())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<usize, IoError> {
    let wrap = |source| IoError::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    write_jsonl_to(BufWriter::new(file), items).map_err(wrap)
}

pub fn write_verdicts(path: &Path, verdicts: &[VerdictRecord]) -> Result<usize, IoError> {
    write_jsonl(path, verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use docforge_core::corpus::{CandidateAnnotation, Layer, ModalityConfidence, VerdictState};
    use std::collections::BTreeMap;

    fn corpus(text: &str) -> Loaded<SampleRecord> {
        read_corpus(text.as_bytes()).unwrap()
    }

    #[test]
    fn valid_lines_pass_through() {
        let line = r#"{"id":"a","candidates":[{"source_id":"s","markdown":"x"}]}"#;
        let text = format!("{line}\n{}\n{}\n", line.replace("\"a\"", "\"b\""), line.replace("\"a\"", "\"c\""));
        let loaded = corpus(&text);
        assert_eq!(loaded.records.len(), 3);
        assert!(loaded.is_clean());
        assert_eq!(loaded.records[2].id, "c");
    }

    #[test]
    fn errors_name_line_and_field() {
        let text = concat!(
            r#"{"id":"a","candidates":[{"source_id":"s","markdown":"x"}]}"#,
            "\n",
            r#"{"candidates":[{"source_id":"s","markdown":"x"}]}"#,
            "\n",
            r#"{"id":"b","candidates":[]}"#,
            "\nnot json\n\n",
            r#"{"id":"a","candidates":[{"source_id":"s","markdown":"x"}]}"#,
            "\n",
            r#"{"id":"c","candidates":[{"markdown":"x"}]}"#,
        );
        let loaded = corpus(text);
        assert_eq!(loaded.records.len(), 1);
        let lines: Vec<usize> = loaded.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, [2, 3, 4, 5, 6, 7]);
        assert_eq!(loaded.errors[0].to_string(), "line 2: missing required field 'id'");
        assert!(loaded.errors[4].message.contains("duplicate"));
        assert!(loaded.errors[5].message.contains("source_id"), "{}", loaded.errors[5]);
        assert_eq!(loaded.records.len() + loaded.errors.len(), 7);
    }

    #[test]
    fn verdicts_round_trip() {
        let mut evidence = BTreeMap::new();
        evidence.insert("ed".to_string(), 0.1 + 0.2);
        let pending = VerdictRecord {
            sample_id: "p".into(),
            state: VerdictState::Pending,
            layer: Layer::L3,
            consensus: Some(0.123456789012345),
            modality_confidence: Some(ModalityConfidence {
                c_text: 0.9,
                c_formula: 1.0 / 3.0,
                c_table: 1.0,
                c_layout: 0.5,
            }),
            error_tags: vec![],
            evidence,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.jsonl");
        assert_eq!(write_verdicts(&path, std::slice::from_ref(&pending)).unwrap(), 1);
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["c_text", "c_formula", "c_table", "c_layout"] {
            assert!(text.contains(key));
        }
        assert_eq!(read_verdicts(&path).unwrap().records, vec![pending]);

        let empty = dir.path().join("e.jsonl");
        assert_eq!(write_verdicts(&empty, &[]).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&empty).unwrap(), "");
        assert!(read_verdicts(&empty).unwrap().records.is_empty());
    }

    #[test]
    fn large_file_keeps_order() {
        let mut text = String::new();
        for i in 0..10_000 {
            let r = SampleRecord::new(format!("r{i}"), vec![CandidateAnnotation::new("s", "x")]);
            text.push_str(&serde_json::to_string(&r).unwrap());
            text.push('\n');
        }
        let loaded = corpus(&text);
        assert_eq!(loaded.records.len(), 10_000);
        assert!(loaded.records.iter().enumerate().all(|(i, r)| r.id == format!("r{i}")));
    }
}
