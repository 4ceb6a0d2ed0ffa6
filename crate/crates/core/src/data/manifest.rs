use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::{DataError, Label, Result};

pub const HEADER: [&str; 5] = ["subject_id", "label", "aal_path", "cc200_path", "dos160_path"];

/// Atlas slots in manifest column order.
pub const ATLAS_SLOTS: [&str; 3] = ["AAL", "CC200", "DOS160"];

/// One manifest row. Paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectDescriptor {
    pub subject_id: String,
    pub label: Label,
    pub paths: [PathBuf; 3],
}

pub fn load_manifest(path: &Path) -> Result<Vec<SubjectDescriptor>> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<SubjectDescriptor>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| DataError::ParseError {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(DataError::ParseError {
            line: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| DataError::ParseError {
            line,
            message: e.to_string(),
        })?;
        let field = |j: usize| record.get(j).unwrap_or("");
        let subject_id = field(0).to_string();
        if subject_id.is_empty() {
            return Err(DataError::ParseError {
                line,
                message: "empty subject_id".into(),
            });
        }
        let label: Label = field(1)
            .parse()
            .map_err(|message| DataError::ParseError { line, message })?;
        let mut paths: [PathBuf; 3] = Default::default();
        for (slot, p) in paths.iter_mut().enumerate() {
            let raw = field(2 + slot);
            if raw.is_empty() {
                return Err(DataError::MissingAtlasPath(subject_id, ATLAS_SLOTS[slot].into()));
            }
            *p = base.join(raw);
        }
        if !seen.insert(subject_id.clone()) {
            return Err(DataError::DuplicateSubject(subject_id));
        }
        out.push(SubjectDescriptor {
            subject_id,
            label,
            paths,
        });
    }
    Ok(out)
}

/// Renders manifest rows; paths are written as given.
pub fn render_manifest(rows: &[(String, Label, [String; 3])]) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for (id, label, paths) in rows {
        out.push_str(&format!("{id},{label},{},{},{}\n", paths[0], paths[1], paths[2]));
    }
    out
}
