//! CSV ingestion and export.
//!
//! Columns: `feature_0..feature_{d-1}`, `label` (0/1), `group` (string),
//! optional `gold_label` (0/1 or empty), optional `proxy_<name>` (0/1 or
//! empty), optional `attr_<name>` (string).

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dataset::{Dataset, Sample};

/// Column-name mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    /// Explicit feature columns; when absent every column starting with
    /// `feature_prefix` is a feature, in header order.
    pub features: Option<Vec<String>>,
    pub feature_prefix: String,
    pub label: String,
    pub group: String,
    pub gold_label: String,
    pub proxy_prefix: String,
    pub attribute_prefix: String,
    /// Allowed group values, in id order. Defaults to first-appearance order.
    pub group_vocab: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            features: None,
            feature_prefix: "feature_".into(),
            label: "label".into(),
            group: "group".into(),
            gold_label: "gold_label".into(),
            proxy_prefix: "proxy_".into(),
            attribute_prefix: "attr_".into(),
            group_vocab: None,
        }
    }
}

fn parse_binary(raw: &str, column: &str, line: usize) -> Result<bool> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::data(format!(
            "line {line}: column {column:?} must be 0 or 1, got {other:?}"
        ))),
    }
}

fn parse_optional_binary(raw: &str, column: &str, line: usize) -> Result<Option<bool>> {
    if raw.trim().is_empty() {
        Ok(None)
    } else {
        parse_binary(raw, column, line).map(Some)
    }
}

/// Reads a dataset, preserving row order.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, schema)
}

/// Parses CSV text; see [`load_csv`].
pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<Dataset> {
    if text.trim().is_empty() {
        return Err(Error::data("csv input is empty"));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| find(name).ok_or_else(|| Error::data(format!("missing column {name:?}")));

    let feature_cols: Vec<usize> = match &schema.features {
        Some(names) => names.iter().map(|n| require(n)).collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with(&schema.feature_prefix))
            .map(|(i, _)| i)
            .collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::data("no feature columns found"));
    }
    let label_col = require(&schema.label)?;
    let group_col = require(&schema.group)?;
    let gold_col = find(&schema.gold_label);
    let prefixed = |prefix: &str| -> Vec<(usize, String)> {
        headers
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.strip_prefix(prefix).map(|n| (i, n.to_owned())))
            .collect()
    };
    let proxy_cols = prefixed(&schema.proxy_prefix);
    let attr_cols = prefixed(&schema.attribute_prefix);

    let mut vocab: Vec<String> = schema.group_vocab.clone().unwrap_or_default();
    let fixed_vocab = schema.group_vocab.is_some();
    let mut unknown: Vec<(usize, String)> = Vec::new();
    let mut samples = Vec::new();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let field = |i: usize| record.get(i).unwrap_or("");
        let mut features = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let raw = field(c).trim();
            let v: f64 = raw.parse().map_err(|_| {
                Error::data(format!("line {line}: column {:?} is not numeric: {raw:?}", headers[c]))
            })?;
            features.push(v);
        }
        let label = parse_binary(field(label_col), &schema.label, line)?;
        let group_name = field(group_col).to_owned();
        let group = match vocab.iter().position(|g| *g == group_name) {
            Some(g) => g,
            None if fixed_vocab => {
                unknown.push((line, group_name));
                continue;
            }
            None => {
                vocab.push(group_name);
                vocab.len() - 1
            }
        };
        let mut s = Sample::new(features, label, group);
        if let Some(c) = gold_col {
            s.gold_label = parse_optional_binary(field(c), &schema.gold_label, line)?;
        }
        for (c, name) in &proxy_cols {
            if let Some(v) = parse_optional_binary(field(*c), &headers[*c], line)? {
                s.proxies.insert(name.clone(), v);
            }
        }
        for (c, name) in &attr_cols {
            let v = field(*c);
            if !v.is_empty() {
                s.attributes.insert(name.clone(), v.to_owned());
            }
        }
        samples.push(s);
    }

    if !unknown.is_empty() {
        let listed: Vec<String> = unknown.iter().map(|(l, g)| format!("line {l} ({g:?})")).collect();
        return Err(Error::data(format!("unknown group values at {}", listed.join(", "))));
    }
    if samples.is_empty() {
        return Err(Error::data("csv input has a header but no rows"));
    }
    Dataset::new(samples, vocab)
}

/// Serialises a dataset to CSV text in the default schema.
pub fn to_csv_string(dataset: &Dataset) -> Result<String> {
    let d = dataset.feature_dim();
    let has_gold = dataset.samples().iter().any(|s| s.gold_label.is_some());
    let proxies: BTreeSet<&String> = dataset.samples().iter().flat_map(|s| s.proxies.keys()).collect();
    let attrs: BTreeSet<&String> = dataset.samples().iter().flat_map(|s| s.attributes.keys()).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..d).map(|j| format!("feature_{j}")).collect();
    header.push("label".into());
    header.push("group".into());
    if has_gold {
        header.push("gold_label".into());
    }
    header.extend(proxies.iter().map(|p| format!("proxy_{p}")));
    header.extend(attrs.iter().map(|a| format!("attr_{a}")));
    w.write_record(&header)?;

    let bit = |b: bool| if b { "1".to_owned() } else { "0".to_owned() };
    for s in dataset.samples() {
        let mut rec: Vec<String> = s.features.iter().map(|v| format!("{v}")).collect();
        rec.push(bit(s.label));
        rec.push(dataset.group_vocab()[s.group].clone());
        if has_gold {
            rec.push(s.gold_label.map(bit).unwrap_or_default());
        }
        for p in &proxies {
            rec.push(s.proxies.get(*p).copied().map(bit).unwrap_or_default());
        }
        for a in &attrs {
            rec.push(s.attributes.get(*a).cloned().unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::data(format!("csv writer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes a dataset to `path` in the default schema.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_csv_string(dataset)?;
    crate::bench::write_atomic(path, text.as_bytes())
}

/// Group-name vocabulary in a form ready for [`CsvSchema::group_vocab`].
pub fn vocab_of(dataset: &Dataset) -> Vec<String> {
    dataset.group_vocab().to_vec()
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_two_features() {
        let text = "feature_0,feature_1,label,group\n0.5,1,1,a\n-2,3.25,0,b\n1e-3,0,1,a\n";
        let d = parse_csv(text, &CsvSchema::default()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.feature_dim(), 2);
        assert_eq!(d.group_vocab(), &["a".to_owned(), "b".to_owned()]);
        assert_eq!(d.samples()[1].features, vec![-2.0, 3.25]);
        assert!(!d.samples()[1].label);
    }

    #[test]
    fn bad_label_names_the_line() {
        let text = "feature_0,label,group\n0.5,1,a\n0.1,2,b\n";
        let err = parse_csv(text, &CsvSchema::default()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn contract_errors() {
        let s = CsvSchema::default();
        assert!(parse_csv("", &s).is_err());
        assert!(parse_csv("feature_0,label,group\n", &s).is_err());
        assert!(parse_csv("feature_0,group\n1,a\n", &s).unwrap_err().to_string().contains("label"));
        assert!(parse_csv("feature_0,label,group\nx,1,a\n0,0,b\n", &s).is_err());
    }

    #[test]
    fn unknown_groups_are_listed() {
        let schema = CsvSchema { group_vocab: Some(vec!["a".into(), "b".into()]), ..Default::default() };
        let text = "feature_0,label,group\n0,1,a\n0,0,c\n1,1,b\n2,0,d\n";
        let err = parse_csv(text, &schema).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("line 5"), "{err}");
    }

    #[test]
    fn explicit_feature_columns() {
        let schema = CsvSchema { features: Some(vec!["x".into(), "y".into()]), ..Default::default() };
        let text = "y,x,label,group,proxy_p,attr_sex\n1,2,1,a,0,F\n3,4,0,b,,M\n";
        let d = parse_csv(text, &schema).unwrap();
        assert_eq!(d.samples()[0].features, vec![2.0, 1.0]);
        assert_eq!(d.samples()[0].proxies.get("p"), Some(&false));
        assert!(d.samples()[1].proxies.is_empty());
        assert_eq!(d.samples()[1].attributes["sex"], "M");
    }
}
