//! Line-delimited JSON reading and writing shared by every file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Reads every non-blank line of `path` as a `T`, paired with its 1-based
/// line number.
pub fn read<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<(usize, T)>, JsonlError> {
    let path = path.as_ref();
    let io_err = |source| JsonlError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| JsonlError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            source,
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}

/// Like [`read`] but drops line numbers.
pub fn read_records<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, JsonlError> {
    Ok(read(path)?.into_iter().map(|(_, r)| r).collect())
}

pub fn write<'a, T, I>(path: impl AsRef<Path>, records: I) -> Result<(), JsonlError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let path = path.as_ref();
    let io_err = |source| JsonlError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = BufWriter::new(File::create(path).map_err(io_err)?);
    for record in records {
        let line = to_line(record);
        writer.write_all(line.as_bytes()).map_err(io_err)?;
        writer.write_all(b"\n").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

pub(crate) fn to_line<T: Serialize>(record: &T) -> String {
    // Serializing plain data structs with string keys cannot fail.
    serde_json::to_string(record).expect("record serializes to JSON")
}
