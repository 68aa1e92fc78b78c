//! The TOML schema file that accompanies a CSV.
//!
//! ```toml
//! [[column]]
//! name = "colour"
//! role = "feature"          # or "label"
//! kind = "categorical"      # categorical | ordinal | continuous
//! categories = ["red", "blue"]   # optional; inferred in first-appearance order
//!
//! [[column]]
//! name = "income"
//! kind = "continuous"
//! range = [0.0, 100.0]      # optional; widened to cover the data
//! immutable = true          # optional, default false
//!
//! [[column]]
//! name = "y"
//! role = "label"
//! ```

use std::fs;
use std::path::Path;

use flexcf_core::dataset::{FeatureKind, Schema};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Feature,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(default)]
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FeatureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub immutable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    pub column: Vec<ColumnSpec>,
}

impl SchemaFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text).map_err(|e| Error::SchemaFile(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Exactly one label column; every feature column has a kind.
    pub fn validate(&self) -> Result<()> {
        let labels = self.column.iter().filter(|c| c.role == Role::Label).count();
        if labels != 1 {
            return Err(Error::SchemaFile(format!("expected exactly one label column, found {labels}")));
        }
        for c in &self.column {
            if c.role == Role::Feature && c.kind.is_none() {
                return Err(Error::SchemaFile(format!("feature column `{}` has no kind", c.name)));
            }
            if let Some([lo, hi]) = c.range {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::SchemaFile(format!("column `{}`: bad range [{lo}, {hi}]", c.name)));
                }
            }
        }
        for (i, c) in self.column.iter().enumerate() {
            if self.column[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::SchemaFile(format!("duplicate column `{}`", c.name)));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &ColumnSpec {
        self.column.iter().find(|c| c.role == Role::Label).expect("validated")
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.column.iter().find(|c| c.name == name)
    }

    /// Fully resolved schema file (vocabularies and ranges written out).
    pub fn from_schema(schema: &Schema) -> Self {
        let mut column: Vec<ColumnSpec> = schema
            .features
            .iter()
            .map(|f| ColumnSpec {
                name: f.name.clone(),
                role: Role::Feature,
                kind: Some(f.kind),
                categories: f.kind.is_discrete().then(|| f.categories.clone()),
                range: (!f.kind.is_discrete()).then_some([f.range_min, f.range_max]),
                immutable: f.immutable,
            })
            .collect();
        column.push(ColumnSpec {
            name: schema.label.clone(),
            role: Role::Label,
            kind: None,
            categories: None,
            range: None,
            immutable: false,
        });
        SchemaFile { column }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema file serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_file() {
        let s = SchemaFile::parse(
            r#"
            [[column]]
            name = "colour"
            kind = "categorical"
            [[column]]
            name = "y"
            role = "label"
            "#,
        )
        .unwrap();
        assert_eq!(s.label().name, "y");
        assert_eq!(s.column("colour").unwrap().kind, Some(FeatureKind::Categorical));
    }

    #[test]
    fn rejects_two_labels_and_missing_kind() {
        let two = "[[column]]\nname='a'\nrole='label'\n[[column]]\nname='b'\nrole='label'\n";
        assert!(matches!(SchemaFile::parse(two), Err(Error::SchemaFile(_))));
        let kindless = "[[column]]\nname='a'\n[[column]]\nname='y'\nrole='label'\n";
        assert!(matches!(SchemaFile::parse(kindless), Err(Error::SchemaFile(_))));
    }

    #[test]
    fn rejects_unknown_keys() {
        let typo = "[[column]]\nname='a'\nkind='continuous'\nimmutible=true\n[[column]]\nname='y'\nrole='label'\n";
        assert!(SchemaFile::parse(typo).is_err());
    }
}
