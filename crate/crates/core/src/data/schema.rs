use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovariateKind {
    Continuous,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    #[serde(flatten)]
    pub kind: CovariateKind,
}

/// Ordered covariate declarations.
///
/// Categorical covariates with `q` levels expand to `q` indicator columns in
/// level order; continuous covariates occupy one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSchema {
    #[serde(rename = "covariate", default)]
    entries: Vec<Covariate>,
}

impl CovariateSchema {
    pub fn new(entries: Vec<Covariate>) -> Result<Self> {
        let schema = Self { entries };
        schema.validate()?;
        Ok(schema)
    }

    pub fn continuous(name: &str) -> Covariate {
        Covariate {
            name: name.to_string(),
            kind: CovariateKind::Continuous,
        }
    }

    pub fn categorical<S: AsRef<str>>(name: &str, levels: &[S]) -> Covariate {
        Covariate {
            name: name.to_string(),
            kind: CovariateKind::Categorical {
                levels: levels.iter().map(|l| l.as_ref().to_string()).collect(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for c in &self.entries {
            if c.name.trim().is_empty() {
                return Err(Error::Schema("empty covariate name".into()));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate covariate '{}'", c.name)));
            }
            if let CovariateKind::Categorical { levels } = &c.kind {
                if levels.len() < 2 {
                    return Err(Error::Schema(format!(
                        "categorical '{}' needs at least 2 levels",
                        c.name
                    )));
                }
                let unique: HashSet<&String> = levels.iter().collect();
                if unique.len() != levels.len() {
                    return Err(Error::Schema(format!(
                        "categorical '{}' has repeated levels",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: CovariateSchema = toml::from_str(s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema is always representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn entries(&self) -> &[Covariate] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of columns after categorical expansion.
    pub fn width(&self) -> usize {
        self.entries.iter().map(|c| c.kind.width()).sum()
    }

    /// Expanded column range of variable `var`.
    pub fn columns_of(&self, var: usize) -> Range<usize> {
        let start: usize = self.entries[..var].iter().map(|c| c.kind.width()).sum();
        start..start + self.entries[var].kind.width()
    }

    /// Maps each expanded column to the index of the variable that owns it.
    pub fn column_owners(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .flat_map(|(i, c)| std::iter::repeat_n(i, c.kind.width()))
            .collect()
    }

    /// Expanded column names; indicator columns are named `name=level`.
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for c in &self.entries {
            match &c.kind {
                CovariateKind::Continuous => out.push(c.name.clone()),
                CovariateKind::Categorical { levels } => {
                    out.extend(levels.iter().map(|l| format!("{}={}", c.name, l)))
                }
            }
        }
        out
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|c| c.name == name)
    }

    /// Resolves a variable name or an expanded `name=level` column name to
    /// an expanded column index.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names().iter().position(|c| c == name).or_else(|| {
            let var = self.position(name)?;
            matches!(self.entries[var].kind, CovariateKind::Continuous)
                .then(|| self.columns_of(var).start)
        })
    }

    /// Appends covariates to this schema.
    pub fn extended(&self, extra: impl IntoIterator<Item = Covariate>) -> Result<Self> {
        let mut entries = self.entries.clone();
        entries.extend(extra);
        Self::new(entries)
    }
}

impl CovariateKind {
    pub fn width(&self) -> usize {
        match self {
            CovariateKind::Continuous => 1,
            CovariateKind::Categorical { levels } => levels.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CovariateSchema {
        CovariateSchema::new(vec![
            CovariateSchema::continuous("a"),
            CovariateSchema::categorical("c", &["red", "blue", "green"]),
            CovariateSchema::continuous("b"),
        ])
        .unwrap()
    }

    #[test]
    fn expansion_layout() {
        let s = sample();
        assert_eq!(s.width(), 5);
        assert_eq!(s.columns_of(1), 1..4);
        assert_eq!(s.column_owners(), vec![0, 1, 1, 1, 2]);
        assert_eq!(s.column_names(), vec!["a", "c=red", "c=blue", "c=green", "b"]);
        assert_eq!(s.column_index("b"), Some(4));
        assert_eq!(s.column_index("c=blue"), Some(2));
        assert_eq!(s.column_index("c"), None);
    }

    #[test]
    fn rejects_bad_declarations() {
        let dup = CovariateSchema::new(vec![
            CovariateSchema::continuous("a"),
            CovariateSchema::continuous("a"),
        ]);
        assert!(dup.is_err());
        assert!(CovariateSchema::new(vec![CovariateSchema::categorical("c", &["x"])]).is_err());
        assert!(CovariateSchema::new(vec![CovariateSchema::categorical("c", &["x", "x"])]).is_err());
        assert!(CovariateSchema::new(vec![CovariateSchema::continuous(" ")]).is_err());
    }

    #[test]
    fn toml_sidecar_round_trip() {
        let text = r#"
[[covariate]]
name = "a"
kind = "continuous"

[[covariate]]
name = "c"
kind = "categorical"
levels = ["red", "blue", "green"]

[[covariate]]
name = "b"
kind = "continuous"
"#;
        let s = CovariateSchema::from_toml_str(text).unwrap();
        assert_eq!(s, sample());
        assert_eq!(CovariateSchema::from_toml_str(&s.to_toml_string()).unwrap(), s);
    }
}
