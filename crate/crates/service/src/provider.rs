//! Query-table generation from a text prompt.

use std::collections::BTreeMap;
use std::sync::Arc;

use lakefuse_core::table::{Cell, HeaderMode, Table};

use crate::config::ProviderConfig;
use crate::error::{Result, ServiceError};

pub const STUB: &str = "stub";
pub const REMOTE: &str = "remote";
pub const GENERATED_ID: &str = "generated.csv";

pub trait TableGenProvider: Send + Sync {
    fn name(&self) -> &str;

    /// A table with a header row and `rows` x `cols` cells.
    fn generate(&self, prompt: &str, rows: usize, cols: usize) -> Result<Table>;
}

const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "by", "column", "columns", "data", "for", "from", "generate", "in", "is", "make",
    "of", "on", "or", "per", "row", "rows", "table", "that", "the", "to", "with",
];

/// Distinct prompt words, in order, minus stopwords and bare numbers.
pub fn prompt_keywords(prompt: &str) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    prompt
        .split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_'))
        .map(|w| w.trim_matches(|c| c == '-' || c == '_'))
        .filter(|w| !w.is_empty() && !w.chars().all(|c| c.is_ascii_digit()))
        .filter(|w| !STOPWORDS.contains(&w.to_lowercase().as_str()))
        .filter(|w| seen.insert(w.to_lowercase()))
        .map(str::to_string)
        .collect()
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.iter().chain(&[0xff]) {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Offline provider. Headers come from the prompt's keywords, padded with
/// `attribute_<n>`; the first column holds labels, the rest small integers
/// hashed from the prompt and cell position.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubProvider;

impl TableGenProvider for StubProvider {
    fn name(&self) -> &str {
        STUB
    }

    fn generate(&self, prompt: &str, rows: usize, cols: usize) -> Result<Table> {
        let mut headers = prompt_keywords(prompt);
        headers.truncate(cols);
        for i in headers.len()..cols {
            headers.push(format!("attribute_{}", i + 1));
        }
        let label = headers[0].to_lowercase();
        let body = (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| {
                        if c == 0 {
                            Cell::value(format!("{label}-{}", r + 1))
                        } else {
                            let h = fnv1a(&[prompt.as_bytes(), &r.to_le_bytes(), &c.to_le_bytes()]);
                            Cell::value((h % 1000).to_string())
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Table::new(GENERATED_ID, headers, body)?)
    }
}

/// Completion-style HTTP provider. Sends `{model?, prompt, max_tokens}` and
/// reads `choices[0].text`, `choices[0].message.content` or the raw body.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    pub endpoint: String,
    pub key_env: Option<String>,
    pub model: Option<String>,
}

impl RemoteProvider {
    fn instruction(prompt: &str, rows: usize, cols: usize) -> String {
        format!(
            "Produce a CSV table with a header row followed by exactly {rows} data rows and {cols} columns. \
             Output only the CSV. Topic: {prompt}"
        )
    }
}

/// Pull CSV text out of a provider response body.
pub fn extract_completion(body: &str) -> String {
    let text = match serde_json::from_str::<serde_json::Value>(body) {
        Ok(v) => {
            let choice = &v["choices"][0];
            choice["text"]
                .as_str()
                .or_else(|| choice["message"]["content"].as_str())
                .unwrap_or(body)
                .to_string()
        }
        Err(_) => body.to_string(),
    };
    let trimmed = text.trim();
    let unfenced = trimmed
        .strip_prefix("```csv")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .unwrap_or(trimmed);
    unfenced.trim().to_string() + "\n"
}

/// Parse generated CSV and check its shape.
pub fn parse_generated(text: &str, rows: usize, cols: usize) -> Result<Table> {
    let t = Table::from_csv_str(GENERATED_ID, text, HeaderMode::Present)
        .map_err(|e| ServiceError::MalformedGenerated(e.to_string()))?;
    if t.num_rows() != rows || t.num_columns() != cols {
        return Err(ServiceError::MalformedGenerated(format!(
            "expected {rows}x{cols} cells, got {}x{}",
            t.num_rows(),
            t.num_columns()
        )));
    }
    Ok(t)
}

impl TableGenProvider for RemoteProvider {
    fn name(&self) -> &str {
        REMOTE
    }

    fn generate(&self, prompt: &str, rows: usize, cols: usize) -> Result<Table> {
        let mut body = serde_json::json!({
            "prompt": Self::instruction(prompt, rows, cols),
            "max_tokens": 64 + 16 * rows * cols,
        });
        if let Some(m) = &self.model {
            body["model"] = m.clone().into();
        }
        let mut req = ureq::post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(var) = &self.key_env {
            let key = std::env::var(var).map_err(|_| ServiceError::Provider(format!("environment variable `{var}` is not set")))?;
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| ServiceError::Provider(e.to_string()))?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ServiceError::Provider(e.to_string()))?;
        parse_generated(&extract_completion(&text), rows, cols)
    }
}

#[derive(Clone)]
pub struct ProviderRegistry {
    providers: BTreeMap<String, Arc<dyn TableGenProvider>>,
    default: String,
}

impl ProviderRegistry {
    pub fn stub_only() -> Self {
        let mut providers: BTreeMap<String, Arc<dyn TableGenProvider>> = BTreeMap::new();
        providers.insert(STUB.into(), Arc::new(StubProvider));
        ProviderRegistry {
            providers,
            default: STUB.into(),
        }
    }

    /// The stub, plus the remote provider when an endpoint is configured. The
    /// remote one becomes the default.
    pub fn from_config(cfg: &ProviderConfig) -> Self {
        let mut reg = Self::stub_only();
        if let Some(endpoint) = &cfg.endpoint {
            reg.providers.insert(
                REMOTE.into(),
                Arc::new(RemoteProvider {
                    endpoint: endpoint.clone(),
                    key_env: cfg.key_env.clone(),
                    model: cfg.model.clone(),
                }),
            );
            reg.default = REMOTE.into();
        }
        reg
    }

    pub fn register(&mut self, provider: Arc<dyn TableGenProvider>) -> Result<()> {
        let name = provider.name().to_string();
        if self.providers.contains_key(&name) {
            return Err(lakefuse_core::Error::DuplicateName { kind: "provider", name }.into());
        }
        self.providers.insert(name, provider);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.providers.keys().map(String::as_str)
    }

    pub fn default_name(&self) -> &str {
        &self.default
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn TableGenProvider>> {
        self.providers.get(name).ok_or_else(|| {
            lakefuse_core::Error::UnknownName {
                kind: "provider",
                name: name.to_string(),
            }
            .into()
        })
    }
}

pub fn generate_query_table(
    registry: &ProviderRegistry,
    prompt: &str,
    rows: usize,
    cols: usize,
    provider: Option<&str>,
) -> Result<Table> {
    if rows == 0 || cols == 0 {
        return Err(ServiceError::BadRequest(format!("rows and cols must be >= 1 (got {rows}x{cols})")));
    }
    let p = registry.get(provider.unwrap_or(registry.default_name()))?;
    let t = p.generate(prompt, rows, cols)?;
    if t.num_rows() != rows || t.num_columns() != cols {
        return Err(ServiceError::MalformedGenerated(format!(
            "provider `{}` returned {}x{} cells",
            p.name(),
            t.num_rows(),
            t.num_columns()
        )));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stub_covid_five_by_five() {
        let reg = ProviderRegistry::stub_only();
        let a = generate_query_table(&reg, "COVID-19 cases", 5, 5, None).unwrap();
        assert_eq!((a.num_rows(), a.num_columns()), (5, 5));
        assert_eq!(a.columns()[..2], ["COVID-19".to_string(), "cases".to_string()]);
        assert_eq!(a.columns()[4], "attribute_5");
        let b = generate_query_table(&reg, "COVID-19 cases", 5, 5, Some(STUB)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn zero_dimensions_fail() {
        let reg = ProviderRegistry::stub_only();
        assert!(generate_query_table(&reg, "x", 0, 3, None).is_err());
        assert!(generate_query_table(&reg, "x", 3, 0, None).is_err());
    }

    #[test]
    fn keyword_extraction() {
        assert_eq!(
            prompt_keywords("a query table about COVID-19 cases that has 5 columns and 5 rows, cases again"),
            ["query", "COVID-19", "cases", "has", "again"]
        );
    }

    #[test]
    fn remote_absent_unless_configured() {
        let reg = ProviderRegistry::from_config(&ProviderConfig::default());
        assert_eq!(reg.names().collect::<Vec<_>>(), [STUB]);
        let reg = ProviderRegistry::from_config(&ProviderConfig {
            endpoint: Some("http://127.0.0.1:9/".into()),
            ..Default::default()
        });
        assert_eq!(reg.default_name(), REMOTE);
    }

    #[test]
    fn completion_parsing() {
        assert_eq!(extract_completion(r#"{"choices":[{"text":"a,b\n1,2"}]}"#), "a,b\n1,2\n");
        assert_eq!(extract_completion(r#"{"choices":[{"message":{"content":"```csv\na\n1\n```"}}]}"#), "a\n1\n");
        assert_eq!(extract_completion("x,y\n3,4"), "x,y\n3,4\n");
        assert!(matches!(parse_generated("a,b\n1,2\n", 2, 2), Err(ServiceError::MalformedGenerated(_))));
        assert!(parse_generated("a,b\n1,2\n", 1, 2).is_ok());
    }
}
