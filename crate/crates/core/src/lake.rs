//! On-disk data lake: a directory of CSV files plus a JSON catalog.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::table::{HeaderMode, Table};

pub const MANIFEST_FILE: &str = "lake.manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub table_id: String,
    pub path: String,
    pub rows: usize,
    pub cols: usize,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarning {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tables: Vec<CatalogEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<IngestWarning>,
}

impl Manifest {
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let path = root.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// An ingested lake. Tables are kept in memory, keyed and ordered by id.
#[derive(Debug, Clone)]
pub struct Lake {
    root: PathBuf,
    catalog: Vec<CatalogEntry>,
    tables: BTreeMap<String, Arc<Table>>,
    warnings: Vec<IngestWarning>,
}

impl Lake {
    /// Ingest every `*.csv` file under `dir`. Table ids are paths relative to
    /// `dir` with `/` separators, in lexicographic order. Files that fail to
    /// parse are skipped and reported in [`Lake::warnings`].
    pub fn ingest(dir: impl AsRef<Path>, exec: Exec) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(Error::io(
                &root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
            ));
        }
        let mut files: Vec<(String, PathBuf)> = Vec::new();
        for entry in walkdir::WalkDir::new(&root).follow_links(true) {
            let entry = entry.map_err(|e| {
                let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.clone());
                Error::io(path, std::io::Error::other(e.to_string()))
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let is_csv = entry
                .path()
                .extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
            if !is_csv {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(&root)
                .expect("walkdir yields paths under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            files.push((rel, entry.path().to_path_buf()));
        }
        files.sort();

        let loaded = exec.map(&files, |(id, path)| -> Result<(Table, String)> {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let hash = hex::encode(Sha256::digest(&bytes));
            let text = String::from_utf8(bytes).map_err(|e| Error::Csv {
                path: id.clone(),
                message: format!("invalid UTF-8: {e}"),
            })?;
            let table = Table::from_csv_str(id, &text, HeaderMode::Auto)?;
            Ok((table, hash))
        });

        let mut lake = Lake {
            root,
            catalog: Vec::new(),
            tables: BTreeMap::new(),
            warnings: Vec::new(),
        };
        for ((id, path), outcome) in files.into_iter().zip(loaded) {
            match outcome {
                Ok((mut table, content_hash)) => {
                    table = table.with_source(path);
                    lake.catalog.push(CatalogEntry {
                        table_id: id.clone(),
                        path: id.clone(),
                        rows: table.num_rows(),
                        cols: table.num_columns(),
                        content_hash,
                    });
                    lake.tables.insert(id, Arc::new(table));
                }
                Err(e) => lake.warnings.push(IngestWarning {
                    path: id,
                    message: e.to_string(),
                }),
            }
        }
        Ok(lake)
    }

    /// An in-memory lake, e.g. for synthetic benchmarks. Ids must be unique.
    pub fn from_tables(root: impl Into<PathBuf>, tables: Vec<Table>) -> Result<Self> {
        let mut lake = Lake {
            root: root.into(),
            catalog: Vec::new(),
            tables: BTreeMap::new(),
            warnings: Vec::new(),
        };
        for t in tables {
            let id = t.id().to_string();
            if lake.tables.contains_key(&id) {
                return Err(Error::InvalidParameter(format!("duplicate table id `{id}`")));
            }
            let content_hash = hex::encode(Sha256::digest(t.to_csv_string().as_bytes()));
            lake.catalog.push(CatalogEntry {
                table_id: id.clone(),
                path: id.clone(),
                rows: t.num_rows(),
                cols: t.num_columns(),
                content_hash,
            });
            lake.tables.insert(id, Arc::new(t));
        }
        lake.catalog.sort_by(|a, b| a.table_id.cmp(&b.table_id));
        Ok(lake)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn catalog(&self) -> &[CatalogEntry] {
        &self.catalog
    }

    pub fn warnings(&self) -> &[IngestWarning] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn contains(&self, table_id: &str) -> bool {
        self.tables.contains_key(table_id)
    }

    pub fn table(&self, table_id: &str) -> Result<&Arc<Table>> {
        self.tables
            .get(table_id)
            .ok_or_else(|| Error::UnknownTable(table_id.to_string()))
    }

    /// Tables in catalog (lexicographic id) order.
    pub fn tables(&self) -> impl Iterator<Item = &Arc<Table>> + '_ {
        self.tables.values()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            tables: self.catalog.clone(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn write_manifest(&self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest())?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
