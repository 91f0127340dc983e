//! Holistic column matching across an integration set.
//!
//! Columns of different tables are linked when their similarity reaches `tau`;
//! each connected component becomes one integration ID. Components holding two
//! columns of one table are split by repeatedly deleting their weakest edge.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::discovery::ColumnRef;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub value: f64,
    pub name: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights { value: 0.7, name: 0.3 }
    }
}

/// Name and normalized value set of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnProfile {
    pub owner: ColumnRef,
    pub values: BTreeSet<String>,
    pub synthetic: bool,
}

impl ColumnProfile {
    pub fn from_table(t: &Table, idx: usize) -> Self {
        ColumnProfile {
            owner: ColumnRef::new(t.id(), &t.columns()[idx]),
            values: t.column_values_at(idx),
            synthetic: t.is_synthetic(idx),
        }
    }

    pub fn name(&self) -> &str {
        &self.owner.column
    }
}

/// Jaccard similarity of two sets; two empty sets score 0.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|v| large.contains(*v)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn name_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&a.to_lowercase(), &b.to_lowercase())
}

/// `value·Jaccard + name·name_similarity`; synthetic headers carry no signal,
/// so the value term takes the full weight when either header is synthetic.
pub fn column_similarity(a: &ColumnProfile, b: &ColumnProfile, w: SimilarityWeights) -> f64 {
    let j = jaccard(&a.values, &b.values);
    let s = if a.synthetic || b.synthetic {
        j
    } else {
        w.value * j + w.name * name_similarity(a.name(), b.name())
    };
    s.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub tau: f64,
    pub weights: SimilarityWeights,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            tau: 0.5,
            weights: SimilarityWeights::default(),
            exec: Exec::default(),
        }
    }
}

/// Assignment of every (table, column) of an integration set to an ID.
///
/// Serialized as `{"I0": [["T1", "City"], ["T2", "City"]], ...}` in ID order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntegrationMapping {
    ids: Vec<String>,
    members: Vec<Vec<ColumnRef>>,
    lookup: BTreeMap<ColumnRef, usize>,
}

fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (head, tail) = s.split_at(s.len() - digits);
        (head, tail.parse().ok())
    }
    let (ha, na) = split(a);
    let (hb, nb) = split(b);
    ha.cmp(hb).then(na.cmp(&nb)).then_with(|| a.cmp(b))
}

impl IntegrationMapping {
    /// Build from `(id, members)` groups. Fails if a column appears twice or
    /// an ID is repeated.
    pub fn from_groups(groups: Vec<(String, Vec<ColumnRef>)>) -> Result<Self> {
        let mut m = IntegrationMapping::default();
        let mut seen_ids = BTreeSet::new();
        for (id, cols) in groups {
            if !seen_ids.insert(id.clone()) {
                return Err(Error::InvalidMapping(format!("integration id `{id}` appears twice")));
            }
            let idx = m.ids.len();
            for c in &cols {
                if m.lookup.insert(c.clone(), idx).is_some() {
                    return Err(Error::InvalidMapping(format!(
                        "column `{}`.`{}` is assigned to more than one id",
                        c.table_id, c.column
                    )));
                }
            }
            m.ids.push(id);
            m.members.push(cols);
        }
        Ok(m)
    }

    /// One ID per distinct column name, named after it, in first-seen order.
    pub fn by_column_name(tables: &[Arc<Table>]) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, Vec<ColumnRef>> = BTreeMap::new();
        for t in tables {
            for c in t.columns() {
                let g = groups.entry(c.clone()).or_default();
                if g.is_empty() {
                    order.push(c.clone());
                }
                g.push(ColumnRef::new(t.id(), c));
            }
        }
        Self::from_groups(
            order
                .into_iter()
                .map(|name| {
                    let members = groups.remove(&name).unwrap_or_default();
                    (name, members)
                })
                .collect(),
        )
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn members(&self, idx: usize) -> &[ColumnRef] {
        &self.members[idx]
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, &[ColumnRef])> + '_ {
        self.ids.iter().map(String::as_str).zip(self.members.iter().map(Vec::as_slice))
    }

    /// Position of the ID assigned to a column.
    pub fn id_of(&self, table_id: &str, column: &str) -> Option<usize> {
        self.lookup.get(&ColumnRef::new(table_id, column)).copied()
    }

    /// Restrict the mapping to `tables`, dropping members of other tables and
    /// IDs left without members. Fails unless every column of every table is
    /// covered and no ID holds two columns of the same table.
    pub fn restrict_to(&self, tables: &[Arc<Table>]) -> Result<Self> {
        let known: BTreeMap<&str, &Table> = tables.iter().map(|t| (t.id(), t.as_ref())).collect();
        let mut groups = Vec::new();
        for (id, cols) in self.groups() {
            let mut kept = Vec::new();
            let mut owners = BTreeSet::new();
            for c in cols {
                let Some(t) = known.get(c.table_id.as_str()) else {
                    continue;
                };
                t.column_index(&c.column).map_err(|_| {
                    Error::InvalidMapping(format!("table `{}` has no column `{}`", c.table_id, c.column))
                })?;
                if !owners.insert(c.table_id.as_str()) {
                    return Err(Error::InvalidMapping(format!(
                        "id `{id}` holds two columns of table `{}`",
                        c.table_id
                    )));
                }
                kept.push(c.clone());
            }
            if !kept.is_empty() {
                groups.push((id.to_string(), kept));
            }
        }
        let m = Self::from_groups(groups)?;
        for t in tables {
            for c in t.columns() {
                if m.id_of(t.id(), c).is_none() {
                    return Err(Error::InvalidMapping(format!(
                        "column `{}`.`{c}` has no integration id",
                        t.id()
                    )));
                }
            }
        }
        Ok(m)
    }

    /// Partition of columns as sorted sets, independent of ID names.
    pub fn partition(&self) -> BTreeSet<BTreeSet<ColumnRef>> {
        self.members.iter().map(|m| m.iter().cloned().collect()).collect()
    }

    pub fn to_json_string(&self) -> String {
        crate::artifact::json_string(self).expect("mapping serializes")
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::artifact::write_atomic(path, self.to_json_string())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidMapping(e.to_string()))
    }
}

impl Serialize for IntegrationMapping {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.ids.len()))?;
        for (id, cols) in self.groups() {
            let pairs: Vec<[&str; 2]> = cols.iter().map(|c| [c.table_id.as_str(), c.column.as_str()]).collect();
            map.serialize_entry(id, &pairs)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for IntegrationMapping {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<(String, Vec<ColumnRef>)>;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map from integration id to [table_id, column] pairs")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((id, pairs)) = access.next_entry::<String, Vec<(String, String)>>()? {
                    out.push((id, pairs.into_iter().map(|(t, c)| ColumnRef::new(t, c)).collect()));
                }
                Ok(out)
            }
        }
        let mut groups = d.deserialize_map(V)?;
        groups.sort_by(|a, b| natural_cmp(&a.0, &b.0));
        IntegrationMapping::from_groups(groups).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub mapping: IntegrationMapping,
    pub warnings: Vec<String>,
}

struct Edge {
    a: usize,
    b: usize,
    weight: f64,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn components(n: usize, edges: &[Edge], alive: &[bool]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    for (e, _) in edges.iter().zip(alive).filter(|(_, a)| **a) {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..n).map(|x| find(&mut parent, x)).collect()
}

/// Cluster the columns of `tables` into integration IDs `I0, I1, ...`,
/// numbered by each cluster's first column in input order.
pub fn assign_integration_ids(tables: &[Arc<Table>], cfg: &AlignConfig) -> Alignment {
    let mut profiles = Vec::new();
    let mut table_of = Vec::new();
    for (ti, t) in tables.iter().enumerate() {
        for ci in 0..t.num_columns() {
            profiles.push(ColumnProfile::from_table(t, ci));
            table_of.push(ti);
        }
    }
    let n = profiles.len();
    let mut warnings = Vec::new();
    for p in &profiles {
        if p.values.is_empty() {
            warnings.push(format!(
                "column `{}` of table `{}` has no values; it keeps its own integration id",
                p.owner.column, p.owner.table_id
            ));
        }
    }

    let weights = cfg.exec.map_range(n, |i| {
        let mut out = Vec::new();
        if profiles[i].values.is_empty() {
            return out;
        }
        for j in i + 1..n {
            if table_of[j] == table_of[i] || profiles[j].values.is_empty() {
                continue;
            }
            // Score in key order so the value does not depend on input order.
            let (x, y) = if profiles[i].owner <= profiles[j].owner { (i, j) } else { (j, i) };
            let w = column_similarity(&profiles[x], &profiles[y], cfg.weights);
            if w >= cfg.tau {
                out.push(Edge { a: i, b: j, weight: w });
            }
        }
        out
    });
    let edges: Vec<Edge> = weights.into_iter().flatten().collect();
    let mut alive = vec![true; edges.len()];

    let edge_key = |e: &Edge| {
        let (a, b) = (&profiles[e.a].owner, &profiles[e.b].owner);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    };

    loop {
        let comp = components(n, &edges, &alive);
        let mut bad = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for i in 0..n {
            if !seen.insert((comp[i], &profiles[i].owner.table_id)) {
                bad.insert(comp[i]);
            }
        }
        if bad.is_empty() {
            let mut order: Vec<usize> = Vec::new();
            let mut members: BTreeMap<usize, Vec<ColumnRef>> = BTreeMap::new();
            for i in 0..n {
                let group = members.entry(comp[i]).or_default();
                if group.is_empty() {
                    order.push(comp[i]);
                }
                group.push(profiles[i].owner.clone());
            }
            let groups = order
                .iter()
                .enumerate()
                .map(|(k, root)| (format!("I{k}"), members.remove(root).unwrap_or_default()))
                .collect();
            let mapping = IntegrationMapping::from_groups(groups).expect("columns are distinct");
            return Alignment { mapping, warnings };
        }
        // Weakest edge per violating component.
        let mut weakest: BTreeMap<usize, usize> = BTreeMap::new();
        for (ei, e) in edges.iter().enumerate() {
            if !alive[ei] || !bad.contains(&comp[e.a]) {
                continue;
            }
            let slot = weakest.entry(comp[e.a]).or_insert(ei);
            let cur = &edges[*slot];
            let ord = e
                .weight
                .total_cmp(&cur.weight)
                .then_with(|| edge_key(e).cmp(&edge_key(cur)));
            if ord == Ordering::Less {
                *slot = ei;
            }
        }
        for ei in weakest.into_values() {
            alive[ei] = false;
        }
    }
}
