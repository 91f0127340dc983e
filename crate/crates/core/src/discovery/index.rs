//! Partitioned MinHash LSH index for containment (joinable) search.
//!
//! Column signatures are sorted by cardinality and split into equal-frequency
//! partitions. Within a partition, banded hash tables are kept for every band
//! width `r` in `1..=max_rows`, with `num_perm / r` bands each. Converting a
//! containment threshold into a Jaccard threshold needs the query size, so
//! the band count and width used for a partition are picked per query.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::minhash::{estimate_containment, mix64, ColumnRef, ColumnSignature, MinHasher, Signature};
use super::{rank, DiscoveryResult, QueryDescriptor};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lake::Lake;
use crate::table::Table;

pub const INDEX_FILE: &str = "join.index.bin";
pub const INDEX_SIDECAR: &str = "join.index.json";
const MAGIC: &[u8; 8] = b"LFJIDX01";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub num_perm: usize,
    pub partitions: usize,
    /// Default containment threshold for queries.
    pub threshold: f64,
    pub seed: u64,
    /// Widest band kept in the index.
    pub max_rows: usize,
    /// Required collision probability at the partition's Jaccard threshold.
    pub min_recall: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            num_perm: 128,
            partitions: 8,
            threshold: 0.5,
            seed: 1,
            max_rows: 8,
            min_recall: 0.95,
            exec: Exec::default(),
        }
    }
}

impl IndexParams {
    fn validate(&self) -> Result<()> {
        if self.num_perm == 0 || self.partitions == 0 || self.max_rows == 0 {
            return Err(Error::InvalidParameter(
                "num_perm, partitions and max_rows must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) || !(0.0..=1.0).contains(&self.min_recall) {
            return Err(Error::InvalidParameter(
                "threshold and min_recall must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One banding layout: `bands[j]` maps a band key to column slots.
#[derive(Debug, Clone, Default)]
struct BandTables {
    rows: usize,
    bands: Vec<HashMap<u64, Vec<u32>>>,
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub lower: usize,
    pub upper: usize,
    pub columns: Vec<ColumnSignature>,
    layouts: Vec<BandTables>,
}

impl Partition {
    fn new(columns: Vec<ColumnSignature>, num_perm: usize, max_rows: usize) -> Self {
        let lower = columns.first().map_or(0, |c| c.signature.cardinality);
        let upper = columns.last().map_or(0, |c| c.signature.cardinality);
        let layouts = (1..=max_rows.min(num_perm))
            .map(|rows| {
                let mut bands = vec![HashMap::new(); num_perm / rows];
                for (slot, col) in columns.iter().enumerate() {
                    if col.signature.is_empty() {
                        continue;
                    }
                    for (j, band) in bands.iter_mut().enumerate() {
                        let key = band_key(&col.signature.minhash[j * rows..(j + 1) * rows]);
                        band.entry(key).or_insert_with(Vec::new).push(slot as u32);
                    }
                }
                BandTables { rows, bands }
            })
            .collect();
        Partition {
            lower,
            upper,
            columns,
            layouts,
        }
    }

    fn probe(&self, query: &Signature, bands: usize, rows: usize, out: &mut BTreeSet<u32>) {
        let layout = &self.layouts[rows - 1];
        debug_assert_eq!(layout.rows, rows);
        for (j, table) in layout.bands.iter().take(bands).enumerate() {
            let key = band_key(&query.minhash[j * rows..(j + 1) * rows]);
            if let Some(slots) = table.get(&key) {
                out.extend(slots.iter().copied());
            }
        }
    }
}

fn band_key(slice: &[u64]) -> u64 {
    slice
        .iter()
        .fold(0x9e37_79b9_7f4a_7c15u64, |acc, &v| mix64(acc ^ v).wrapping_add(v))
}

/// Probability that a column with Jaccard `s` shares at least one band.
pub fn collision_probability(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

/// Jaccard similarity of a query of size `q` and a candidate of size `x`
/// when a fraction `t` of the query is contained in the candidate.
pub fn containment_to_jaccard(t: f64, q: f64, x: f64) -> f64 {
    let overlap = t * q;
    let union = q + x - overlap;
    if union <= 0.0 {
        0.0
    } else {
        (overlap / union).clamp(0.0, 1.0)
    }
}

fn false_positive_area(s_star: f64, bands: usize, rows: usize) -> f64 {
    const STEPS: usize = 32;
    if s_star <= 0.0 {
        return 0.0;
    }
    let h = s_star / STEPS as f64;
    let mut area = 0.0;
    for i in 0..STEPS {
        let a = collision_probability(i as f64 * h, bands, rows);
        let b = collision_probability((i + 1) as f64 * h, bands, rows);
        area += 0.5 * (a + b) * h;
    }
    area
}

/// Choose `(bands, rows)` for a Jaccard threshold `s_star`: the most selective
/// layout whose collision probability at `s_star` reaches `min_recall`, or the
/// most sensitive one if none does.
pub fn choose_banding(s_star: f64, num_perm: usize, max_rows: usize, min_recall: f64) -> (usize, usize) {
    let mut feasible: Option<(f64, usize, usize)> = None;
    let mut fallback: Option<(f64, usize, usize)> = None;
    for rows in 1..=max_rows.min(num_perm) {
        for bands in 1..=num_perm / rows {
            let p = collision_probability(s_star, bands, rows);
            if p >= min_recall {
                let fp = false_positive_area(s_star, bands, rows);
                if feasible.is_none_or(|(best, _, _)| fp < best) {
                    feasible = Some((fp, bands, rows));
                }
            } else if fallback.is_none_or(|(best, _, _)| p > best) {
                fallback = Some((p, bands, rows));
            }
        }
    }
    let (_, b, r) = feasible.or(fallback).expect("at least one layout");
    (b, r)
}

#[derive(Debug, Clone)]
pub struct JoinIndex {
    params: IndexParams,
    hasher: MinHasher,
    partitions: Vec<Partition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionInfo {
    pub lower: usize,
    pub upper: usize,
    pub columns: usize,
}

/// Human-readable description written next to the binary index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSidecar {
    pub num_perm: usize,
    pub seed: u64,
    pub threshold: f64,
    pub max_rows: usize,
    pub min_recall: f64,
    pub total_columns: usize,
    pub partitions: Vec<PartitionInfo>,
}

impl JoinIndex {
    /// Signatures for every column of every lake table, then partitioned.
    pub fn build(lake: &Lake, params: IndexParams) -> Result<Self> {
        params.validate()?;
        let hasher = MinHasher::new(params.num_perm, params.seed)?;
        let tables: Vec<_> = lake.tables().cloned().collect();
        let per_table = params.exec.map(&tables, |t| table_signatures(&hasher, t));
        let signatures = per_table.into_iter().flatten().collect();
        Ok(Self::from_signatures(signatures, params, hasher))
    }

    fn from_signatures(mut signatures: Vec<ColumnSignature>, params: IndexParams, hasher: MinHasher) -> Self {
        signatures.sort_by(|a, b| {
            a.signature
                .cardinality
                .cmp(&b.signature.cardinality)
                .then_with(|| a.owner.cmp(&b.owner))
        });
        let n = signatures.len();
        let parts = params.partitions.min(n);
        let mut bounds: Vec<usize> = (0..=parts).map(|i| i * n / parts.max(1)).collect();
        bounds.dedup();
        let mut groups = Vec::with_capacity(parts);
        let mut rest = signatures;
        for w in bounds.windows(2).rev() {
            let tail = rest.split_off(w[0]);
            groups.push(tail);
        }
        groups.reverse();
        let partitions = params
            .exec
            .map(&groups, |g| Partition::new(g.clone(), params.num_perm, params.max_rows));
        JoinIndex {
            params,
            hasher,
            partitions,
        }
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn len(&self) -> usize {
        self.partitions.iter().map(|p| p.columns.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hasher(&self) -> &MinHasher {
        &self.hasher
    }

    /// Signature of a query column under this index's hash family.
    pub fn signature_of(&self, table: &Table, column: &str) -> Result<Signature> {
        let values = table.column_values(column)?;
        Ok(self.hasher.signature(values.iter().map(String::as_str)))
    }

    /// Candidate columns colliding with `query` for containment `threshold`.
    pub fn candidates(&self, query: &Signature, threshold: f64) -> Result<Vec<&ColumnSignature>> {
        if query.is_empty() {
            return Err(Error::EmptyQueryColumn);
        }
        if query.len() != self.params.num_perm {
            return Err(Error::SignatureMismatch(query.len(), self.params.num_perm));
        }
        let q = query.cardinality as f64;
        let mut out = Vec::new();
        for part in &self.partitions {
            if threshold <= 0.0 {
                out.extend(part.columns.iter().filter(|c| !c.signature.is_empty()));
                continue;
            }
            let s_star = containment_to_jaccard(threshold, q, part.upper as f64);
            let (bands, rows) =
                choose_banding(s_star, self.params.num_perm, self.params.max_rows, self.params.min_recall);
            let mut slots = BTreeSet::new();
            part.probe(query, bands, rows, &mut slots);
            out.extend(slots.into_iter().map(|s| &part.columns[s as usize]));
        }
        Ok(out)
    }

    /// Top-k tables joinable with `query_column` of `query`, scored by the
    /// best estimated containment over each table's colliding columns.
    pub fn query_joinable(
        &self,
        query: &Table,
        query_column: &str,
        k: usize,
        threshold: f64,
    ) -> Result<DiscoveryResult> {
        let sig = self.signature_of(query, query_column)?;
        if sig.is_empty() {
            return Err(Error::EmptyQueryColumn);
        }
        let mut best: BTreeMap<&str, f64> = BTreeMap::new();
        for cand in self.candidates(&sig, threshold)? {
            if cand.owner.table_id == query.id() {
                continue;
            }
            let score = estimate_containment(&sig, &cand.signature)?;
            let slot = best.entry(cand.owner.table_id.as_str()).or_insert(0.0);
            if score > *slot {
                *slot = score;
            }
        }
        let scored = best.into_iter().map(|(id, s)| (id.to_string(), s)).collect();
        Ok(DiscoveryResult {
            method: super::JOINABLE_LSH.to_string(),
            query: QueryDescriptor {
                table_id: query.id().to_string(),
                column: Some(query_column.to_string()),
            },
            results: rank(scored, k),
        })
    }

    pub fn sidecar(&self) -> IndexSidecar {
        IndexSidecar {
            num_perm: self.params.num_perm,
            seed: self.params.seed,
            threshold: self.params.threshold,
            max_rows: self.params.max_rows,
            min_recall: self.params.min_recall,
            total_columns: self.len(),
            partitions: self
                .partitions
                .iter()
                .map(|p| PartitionInfo {
                    lower: p.lower,
                    upper: p.upper,
                    columns: p.columns.len(),
                })
                .collect(),
        }
    }

    /// Binary layout, all integers little-endian:
    ///
    /// ```text
    /// magic        [u8; 8]   "LFJIDX01"
    /// num_perm     u32
    /// seed         u64
    /// partitions   u32
    /// max_rows     u32
    /// threshold    f64
    /// min_recall   f64
    /// per partition:
    ///   lower      u64
    ///   upper      u64
    ///   columns    u32
    ///   per column:
    ///     table_id     u32 length + UTF-8 bytes
    ///     column       u32 length + UTF-8 bytes
    ///     cardinality  u64
    ///     minhash      num_perm x u64
    /// ```
    ///
    /// Band tables are not stored; they are rebuilt on load.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, self.params.num_perm as u32);
        buf.extend_from_slice(&self.params.seed.to_le_bytes());
        put_u32(&mut buf, self.partitions.len() as u32);
        put_u32(&mut buf, self.params.max_rows as u32);
        buf.extend_from_slice(&self.params.threshold.to_le_bytes());
        buf.extend_from_slice(&self.params.min_recall.to_le_bytes());
        for p in &self.partitions {
            buf.extend_from_slice(&(p.lower as u64).to_le_bytes());
            buf.extend_from_slice(&(p.upper as u64).to_le_bytes());
            put_u32(&mut buf, p.columns.len() as u32);
            for c in &p.columns {
                put_str(&mut buf, &c.owner.table_id);
                put_str(&mut buf, &c.owner.column);
                buf.extend_from_slice(&(c.signature.cardinality as u64).to_le_bytes());
                for h in &c.signature.minhash {
                    buf.extend_from_slice(&h.to_le_bytes());
                }
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8], exec: Exec) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::CorruptIndex("bad magic".into()));
        }
        let num_perm = r.u32()? as usize;
        let seed = r.u64()?;
        let nparts = r.u32()? as usize;
        let max_rows = r.u32()? as usize;
        let threshold = r.f64()?;
        let min_recall = r.f64()?;
        let params = IndexParams {
            num_perm,
            partitions: nparts.max(1),
            threshold,
            seed,
            max_rows,
            min_recall,
            exec,
        };
        params
            .validate()
            .map_err(|e| Error::CorruptIndex(e.to_string()))?;
        let mut groups = Vec::with_capacity(nparts);
        for _ in 0..nparts {
            let _lower = r.u64()?;
            let _upper = r.u64()?;
            let ncols = r.u32()? as usize;
            let mut cols = Vec::with_capacity(ncols);
            for _ in 0..ncols {
                let table_id = r.string()?;
                let column = r.string()?;
                let cardinality = r.u64()? as usize;
                let minhash = (0..num_perm).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
                cols.push(ColumnSignature {
                    owner: ColumnRef { table_id, column },
                    signature: Signature {
                        minhash,
                        cardinality,
                    },
                });
            }
            groups.push(cols);
        }
        if r.pos != bytes.len() {
            return Err(Error::CorruptIndex("trailing bytes".into()));
        }
        let hasher = MinHasher::new(num_perm, seed)?;
        let partitions = exec.map(&groups, |g| Partition::new(g.clone(), num_perm, max_rows));
        Ok(JoinIndex {
            params,
            hasher,
            partitions,
        })
    }

    /// Write `join.index.bin` and `join.index.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        let bin = dir.join(INDEX_FILE);
        let json = dir.join(INDEX_SIDECAR);
        crate::artifact::write_atomic(&bin, self.to_bytes())?;
        crate::artifact::write_json(&json, &self.sidecar())?;
        Ok((bin, json))
    }

    pub fn load(dir: impl AsRef<Path>, exec: Exec) -> Result<Self> {
        let bin = dir.as_ref().join(INDEX_FILE);
        let mut bytes = Vec::new();
        std::fs::File::open(&bin)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(&bin, e))?;
        Self::from_bytes(&bytes, exec)
    }

    /// The index saved in the lake root when it covers exactly the lake's
    /// columns; otherwise a fresh in-memory build with `params`.
    pub fn load_or_build(lake: &Lake, params: IndexParams) -> Result<Self> {
        if lake.root().join(INDEX_FILE).is_file() {
            let idx = Self::load(lake.root(), params.exec)?;
            let columns: usize = lake.tables().map(|t| t.num_columns()).sum();
            if idx.len() == columns {
                return Ok(idx);
            }
        }
        Self::build(lake, params)
    }
}

fn table_signatures(hasher: &MinHasher, table: &Table) -> Vec<ColumnSignature> {
    (0..table.num_columns())
        .map(|i| {
            let values = table.column_values_at(i);
            ColumnSignature {
                owner: ColumnRef::new(table.id(), table.columns()[i].clone()),
                signature: hasher.signature(values.iter().map(String::as_str)),
            }
        })
        .collect()
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptIndex(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::CorruptIndex(e.to_string()))
    }
}
