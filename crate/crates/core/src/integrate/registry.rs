use std::collections::BTreeMap;
use std::sync::Arc;

use super::{full_disjunction, outer_join_integrate, FdConfig, IntegratedTable, DEFAULT_ROW_LIMIT};
use crate::align::IntegrationMapping;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::table::Table;

pub const FD: &str = "fd";
pub const OUTER_JOIN: &str = "outer-join";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrateOptions {
    pub row_limit: usize,
    /// Join order for order-sensitive operators; empty means input order.
    pub order: Vec<String>,
    pub exec: Exec,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            row_limit: DEFAULT_ROW_LIMIT,
            order: Vec::new(),
            exec: Exec::default(),
        }
    }
}

pub trait IntegrationOperator: Send + Sync {
    fn name(&self) -> &str;

    fn integrate(
        &self,
        tables: &[Arc<Table>],
        mapping: &IntegrationMapping,
        opts: &IntegrateOptions,
    ) -> Result<IntegratedTable>;
}

#[derive(Debug, Default)]
pub struct FullDisjunction;

impl IntegrationOperator for FullDisjunction {
    fn name(&self) -> &str {
        FD
    }

    fn integrate(&self, tables: &[Arc<Table>], mapping: &IntegrationMapping, opts: &IntegrateOptions) -> Result<IntegratedTable> {
        let cfg = FdConfig {
            row_limit: opts.row_limit,
            exec: opts.exec,
        };
        full_disjunction(tables, mapping, &cfg)
    }
}

#[derive(Debug, Default)]
pub struct OuterJoin;

impl IntegrationOperator for OuterJoin {
    fn name(&self) -> &str {
        OUTER_JOIN
    }

    fn integrate(&self, tables: &[Arc<Table>], mapping: &IntegrationMapping, opts: &IntegrateOptions) -> Result<IntegratedTable> {
        outer_join_integrate(tables, mapping, &opts.order)
    }
}

#[derive(Clone)]
pub struct OperatorRegistry {
    ops: BTreeMap<String, Arc<dyn IntegrationOperator>>,
}

impl std::fmt::Debug for OperatorRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.ops.keys()).finish()
    }
}

impl Default for OperatorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl OperatorRegistry {
    pub fn empty() -> Self {
        OperatorRegistry { ops: BTreeMap::new() }
    }

    /// `fd` and `outer-join`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(FullDisjunction)).expect("distinct built-ins");
        r.register(Arc::new(OuterJoin)).expect("distinct built-ins");
        r
    }

    pub fn register(&mut self, op: Arc<dyn IntegrationOperator>) -> Result<()> {
        let name = op.name().to_string();
        if self.ops.contains_key(&name) {
            return Err(Error::DuplicateName {
                kind: "integration operator",
                name,
            });
        }
        self.ops.insert(name, op);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn IntegrationOperator>> {
        self.ops.get(name).ok_or_else(|| Error::UnknownName {
            kind: "integration operator",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.ops.keys().map(String::as_str)
    }

    pub fn integrate_with(
        &self,
        name: &str,
        tables: &[Arc<Table>],
        mapping: &IntegrationMapping,
        opts: &IntegrateOptions,
    ) -> Result<IntegratedTable> {
        self.get(name)?.integrate(tables, mapping, opts)
    }
}
