//! Line-delimited corpus files and the JSON database / dictionary files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::db::Database;
use super::delex::PlaceholderDict;
use super::types::DialogueExample;
use super::CorpusError;

/// Reads one example per non-blank line. Schema and invariant violations are
/// reported with their 1-based line number.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<DialogueExample>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: DialogueExample = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Schema { line: i + 1, message: e.to_string() })?;
        ex.validate()
            .map_err(|e| CorpusError::Schema { line: i + 1, message: e.to_string() })?;
        out.push(ex);
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(mut writer: W, examples: &[DialogueExample]) -> Result<(), CorpusError> {
    for ex in examples {
        serde_json::to_writer(&mut writer, ex).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<DialogueExample>, CorpusError> {
    read_corpus(BufReader::new(File::open(path)?))
}

pub fn save_corpus(examples: &[DialogueExample], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    write_corpus(BufWriter::new(File::create(path)?), examples)
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let file = BufReader::new(File::open(path)?);
    serde_json::from_reader(file).map_err(|e| CorpusError::Schema { line: e.line(), message: e.to_string() })
}

fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_database(path: impl AsRef<Path>) -> Result<Database, CorpusError> {
    let db: Database = load_json(path.as_ref())?;
    db.validate()?;
    Ok(db)
}

pub fn save_database(db: &Database, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    save_json(db, path.as_ref())
}

pub fn load_dict(path: impl AsRef<Path>) -> Result<PlaceholderDict, CorpusError> {
    load_json(path.as_ref())
}

pub fn save_dict(dict: &PlaceholderDict, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    save_json(dict, path.as_ref())
}
