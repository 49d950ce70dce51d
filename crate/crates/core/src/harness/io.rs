use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::design_space::MorphologyGenome;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read(path: &Path) -> Result<Vec<u8>, HarnessError> {
    fs::read(path).map_err(io_err(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String, HarnessError> {
    Ok(sha256_hex(&read(path)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    serde_json::from_slice(&read(path)?).map_err(|e| HarnessError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), HarnessError> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, &r).expect("values serialize");
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| HarnessError::Format {
                path: format!("{}:{}", path.display(), i + 1),
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    let bytes = w.into_inner().expect("in-memory writer");
    write_atomic(path, &bytes)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| HarnessError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeMeta {
    pub seed: u64,
}

/// One line of a design file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeRecord {
    pub id: usize,
    #[serde(flatten)]
    pub genome: MorphologyGenome,
    pub meta: GenomeMeta,
}

pub fn write_designs(
    path: &Path,
    genomes: &[MorphologyGenome],
    seed: u64,
) -> Result<(), HarnessError> {
    write_jsonl(
        path,
        genomes.iter().enumerate().map(|(id, g)| GenomeRecord {
            id,
            genome: g.clone(),
            meta: GenomeMeta { seed },
        }),
    )
}

pub fn read_designs(path: &Path) -> Result<Vec<MorphologyGenome>, HarnessError> {
    Ok(read_jsonl::<GenomeRecord>(path)?
        .into_iter()
        .map(|r| r.genome)
        .collect())
}
