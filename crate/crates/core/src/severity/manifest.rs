//! The corpus manifest: one CSV row per generated file.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{CellId, Label};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One generated file. `output_path` is relative to the manifest's
/// directory and always uses `/` separators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub item_id: String,
    pub source_path: String,
    pub output_path: String,
    pub cell: String,
    pub op_kind: String,
    pub params: String,
    pub severity_index: usize,
    #[serde(with = "seed_column")]
    pub seed: Option<u64>,
    #[serde(with = "label_column")]
    pub label: Option<Label>,
}

impl ManifestRow {
    pub fn cell_id(&self) -> CellId {
        if self.cell == "Unaltered" {
            CellId::Unaltered
        } else {
            CellId::rung(self.cell.clone(), self.severity_index, self.params.clone())
        }
    }
}

mod seed_column {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_str(v),
            None => s.serialize_str(""),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        let text = String::deserialize(d)?;
        if text.is_empty() {
            return Ok(None);
        }
        text.parse().map(Some).map_err(serde::de::Error::custom)
    }
}

mod label_column {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::metrics::Label;

    pub fn serialize<S: Serializer>(v: &Option<Label>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(v.map(Label::as_str).unwrap_or(""))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Label>, D::Error> {
        let text = String::deserialize(d)?;
        if text.is_empty() {
            return Ok(None);
        }
        text.parse().map(Some).map_err(serde::de::Error::custom)
    }
}

/// All rows of a generated corpus, in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    /// Sorts rows by item id, then cell order (unaltered first).
    pub fn sort_canonical(&mut self) {
        self.rows
            .sort_by(|a, b| a.item_id.cmp(&b.item_id).then_with(|| a.cell_id().cmp(&b.cell_id())));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| ManifestError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        read_manifest(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ManifestError> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        write_manifest(&mut buf, self)?;
        std::fs::write(path, buf).map_err(|e| ManifestError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

pub fn write_manifest<W: Write>(writer: W, manifest: &Manifest) -> Result<(), ManifestError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in &manifest.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_manifest<R: Read>(reader: R) -> Result<Manifest, ManifestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in rdr.deserialize::<ManifestRow>() {
        rows.push(row.map_err(|e| ManifestError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?);
    }
    Ok(Manifest { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(item: &str, cell: &str, idx: usize, seed: Option<u64>, label: Option<Label>) -> ManifestRow {
        ManifestRow {
            item_id: item.into(),
            source_path: format!("in/{item}.png"),
            output_path: format!("{cell}/{idx}/{item}.png"),
            cell: cell.into(),
            op_kind: "gamma".into(),
            params: "2".into(),
            severity_index: idx,
            seed,
            label,
        }
    }

    #[test]
    fn csv_round_trip_with_empty_optionals() {
        let m = Manifest {
            rows: vec![
                row("a", "Gamma", 0, None, None),
                row("b", "GauNoise", 2, Some(u64::MAX), Some(Label::Fake)),
            ],
        };
        let mut buf = Vec::new();
        write_manifest(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "item_id,source_path,output_path,cell,op_kind,params,severity_index,seed,label\n"
        ));
        assert_eq!(read_manifest(&buf[..]).unwrap(), m);
    }

    #[test]
    fn canonical_order() {
        let mut m = Manifest {
            rows: vec![
                row("b", "Gamma", 1, None, None),
                row("a", "Resize", 0, None, None),
                row("a", "Unaltered", 0, None, None),
                row("a", "JPEG", 0, None, None),
            ],
        };
        m.sort_canonical();
        let order: Vec<(String, String)> = m.rows.iter().map(|r| (r.item_id.clone(), r.cell.clone())).collect();
        assert_eq!(
            order,
            [("a", "Unaltered"), ("a", "JPEG"), ("a", "Resize"), ("b", "Gamma")]
                .map(|(a, b)| (a.to_string(), b.to_string()))
        );
    }

    #[test]
    fn bad_rows_report_line() {
        let text = "item_id,source_path,output_path,cell,op_kind,params,severity_index,seed,label\n\
                    a,s,o,Gamma,gamma,2,zero,,\n";
        assert!(matches!(read_manifest(text.as_bytes()), Err(ManifestError::Parse { line: 2, .. })));
    }
}
