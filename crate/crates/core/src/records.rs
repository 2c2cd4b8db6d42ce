//! JSON-lines record streams.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::caption::{tokenize, CaptionItem};
use crate::error::{Error, Result};

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::format(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::format(lineno, e.to_string()))?;
        out.push(value);
    }
    Ok(out)
}

pub fn load_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Format { line, message } => Error::Format {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Captions file line: `{image_id, candidate, references}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub image_id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

impl CaptionRecord {
    pub fn to_item(&self) -> CaptionItem {
        CaptionItem {
            image_id: self.image_id.clone(),
            candidate: tokenize(&self.candidate),
            references: self.references.iter().map(|r| tokenize(r)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Detection;
    use crate::scoring::CellEmbedding;

    #[test]
    fn parses_detections_and_reports_bad_line() {
        let text = r#"{"image_id":"a","class":"cat","score":0.5,"bbox":[0,0,1,1]}

{"image_id":"a","class":"cat","score":0.5,"bbox":[0,0,1]}
"#;
        let err = read_jsonl::<Detection>(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
        let ok: Vec<Detection> = read_jsonl(text.lines().next().unwrap().as_bytes()).unwrap();
        assert_eq!(ok[0].class_name, "cat");
    }

    #[test]
    fn cell_label_and_bbox_are_optional() {
        let text = r#"{"image_id":"a","cell_index":3,"objectness":0.9,"vector":[1,2]}"#;
        let cells: Vec<CellEmbedding> = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(cells[0].label, None);
        assert_eq!(cells[0].bbox, None);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &cells).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), text.replace("[1,2]", "[1.0,2.0]"));
    }
}
