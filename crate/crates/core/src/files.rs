//! File-level helpers: SIGMORPHON part naming, atomic writes and the small
//! auxiliary formats the command line reads.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::corpus::{parse_unimorph, CorpusError, LanguageDataset, ParseOptions};
use crate::splitter::Part;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Table {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FileError + '_ {
    move |source| FileError::Io {
        path: path.to_owned(),
        source,
    }
}

/// `deu.tsv` -> `deu`.
pub fn language_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// `<dir>/<lang>.trn` and friends.
pub fn part_path(dir: &Path, language: &str, part: Part) -> PathBuf {
    dir.join(format!("{language}.{}", part.extension()))
}

/// `<dir>/<lang>.split.json`.
pub fn sidecar_path(dir: &Path, language: &str) -> PathBuf {
    dir.join(format!("{language}.split.json"))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, FileError> {
    fs::read(path).map_err(io_err(path))
}

pub fn read_dataset(
    path: &Path,
    language: &str,
    family: &str,
    options: ParseOptions,
) -> Result<LanguageDataset, FileError> {
    let bytes = read_bytes(path)?;
    parse_unimorph(&bytes, language, family, options).map_err(|source| FileError::Corpus {
        path: path.to_owned(),
        source,
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), FileError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| FileError::Io {
        path: path.to_owned(),
        source: e.error,
    })?;
    Ok(())
}

/// Files with `extension` directly inside `dir`, sorted by name.
pub fn list_with_extension(dir: &Path, extension: &str) -> Result<Vec<PathBuf>, FileError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == extension) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Two-column TSV (`key<TAB>value`), blank lines and `#` comments skipped.
pub fn read_two_column(path: &Path) -> Result<Vec<(String, String)>, FileError> {
    let text = String::from_utf8(read_bytes(path)?).map_err(|e| FileError::Corpus {
        path: path.to_owned(),
        source: CorpusError::Decode {
            offset: e.utf8_error().valid_up_to(),
        },
    })?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split('\t').collect::<Vec<_>>().as_slice() {
            [k, v] if !k.trim().is_empty() && !v.trim().is_empty() => {
                out.push((k.trim().to_owned(), v.trim().to_owned()))
            }
            _ => {
                return Err(FileError::Table {
                    path: path.to_owned(),
                    line: idx + 1,
                    message: "expected two non-empty tab-separated fields".into(),
                })
            }
        }
    }
    Ok(out)
}

pub fn read_family_map(path: &Path) -> Result<HashMap<String, String>, FileError> {
    Ok(read_two_column(path)?.into_iter().collect())
}

pub fn read_size_map(path: &Path) -> Result<HashMap<String, usize>, FileError> {
    read_two_column(path)?
        .into_iter()
        .enumerate()
        .map(|(i, (lang, n))| {
            n.parse().map(|n| (lang, n)).map_err(|_| FileError::Table {
                path: path.to_owned(),
                line: i + 1,
                message: format!("{n:?} is not a count"),
            })
        })
        .collect()
}

/// Reads every JSON value in a file: one object, an array of objects, or a
/// stream of concatenated / newline-delimited objects.
pub fn read_json_values<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FileError> {
    let json_err = |source| FileError::Json {
        path: path.to_owned(),
        source,
    };
    let bytes = read_bytes(path)?;
    let mut out = Vec::new();
    for value in serde_json::Deserializer::from_slice(&bytes).into_iter::<serde_json::Value>() {
        match value.map_err(json_err)? {
            serde_json::Value::Array(items) => {
                for item in items {
                    out.push(serde_json::from_value(item).map_err(json_err)?);
                }
            }
            other => out.push(serde_json::from_value(other).map_err(json_err)?),
        }
    }
    Ok(out)
}
