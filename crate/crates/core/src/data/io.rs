use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Column, Dataset};
use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::tree::{evaluate, render_infix, ExprTree};

pub const LABEL_UNIT: &str = "CLASS";

/// Sidecar description of an untyped CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub columns: Vec<SchemaColumn>,
    pub label: String,
    #[serde(default)]
    pub missing_values: Vec<String>,
    /// Label spellings in class-id order; inferred when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaColumn {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

struct Layout {
    /// `(csv index, name, unit)` of kept feature columns.
    features: Vec<(usize, String, String)>,
    label: (usize, String),
    missing: Missing,
    classes: Option<Vec<String>>,
}

struct Missing {
    tokens: Vec<String>,
    numbers: Vec<f64>,
}

impl Missing {
    fn new(tokens: Vec<String>) -> Missing {
        let numbers = tokens
            .iter()
            .filter_map(|t| t.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .collect();
        Missing { tokens, numbers }
    }

    fn parse(&self, cell: &str) -> std::result::Result<f64, ()> {
        let cell = cell.trim();
        if self.tokens.iter().any(|t| t.trim() == cell) {
            return Ok(f64::NAN);
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                if self.numbers.contains(&v) {
                    Ok(f64::NAN)
                } else {
                    Ok(v)
                }
            }
            _ => Err(()),
        }
    }
}

/// Reads a CSV whose header cells are `name:TYPE`, with exactly one column
/// typed `CLASS`. Cells equal to `missing_token` are missing; any other cell
/// that is not a finite number (including `NaN`) is an error.
pub fn load_csv(path: impl AsRef<Path>, missing_token: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| parse_err(path, e.to_string()))?;
    read_csv(file, missing_token, path)
}

pub fn read_csv<R: Read>(reader: R, missing_token: &str, source: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut features = Vec::new();
    let mut label = None;
    for (i, cell) in header.iter().enumerate() {
        let (name, unit) = cell
            .rsplit_once(':')
            .ok_or_else(|| parse_err(source, format!("header cell {cell:?} is not name:TYPE")))?;
        let (name, unit) = (name.trim(), unit.trim());
        if name.is_empty() || unit.is_empty() {
            return Err(parse_err(
                source,
                format!("header cell {cell:?} is not name:TYPE"),
            ));
        }
        if unit == LABEL_UNIT {
            if label.is_some() {
                return Err(parse_err(source, "more than one CLASS column".into()));
            }
            label = Some((i, name.to_string()));
        } else {
            features.push((i, name.to_string(), unit.to_string()));
        }
    }
    let label = label.ok_or_else(|| parse_err(source, "no CLASS column".into()))?;
    let layout = Layout {
        features,
        label,
        missing: Missing::new(vec![missing_token.to_string()]),
        classes: None,
    };
    read_rows(rdr, &layout, source)
}

/// Reads a plain-header CSV described by a schema sidecar. Columns not
/// listed in the schema are ignored.
pub fn load_with_schema(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| parse_err(path, e.to_string()))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, format!("schema column {name} is not in the header")))
    };
    let features = schema
        .columns
        .iter()
        .map(|c| Ok((find(&c.name)?, c.name.clone(), c.ty.clone())))
        .collect::<Result<Vec<_>>>()?;
    let layout = Layout {
        features,
        label: (find(&schema.label)?, schema.label.clone()),
        missing: Missing::new(schema.missing_values.clone()),
        classes: schema.classes.clone(),
    };
    read_rows(rdr, &layout, path)
}

/// Loads `path` with a schema sidecar when given, else as a typed CSV with
/// empty cells missing.
pub fn load(path: impl AsRef<Path>, schema_path: Option<&Path>) -> Result<Dataset> {
    match schema_path {
        Some(sp) => {
            let text = std::fs::read_to_string(sp).map_err(|e| parse_err(sp, e.to_string()))?;
            let schema: Schema =
                serde_json::from_str(&text).map_err(|e| parse_err(sp, e.to_string()))?;
            load_with_schema(path, &schema)
        }
        None => load_csv(path, ""),
    }
}

fn read_rows<R: Read>(mut rdr: csv::Reader<R>, layout: &Layout, source: &Path) -> Result<Dataset> {
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); layout.features.len()];
    let mut raw_labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 2;
        for ((i, name, _), col) in layout.features.iter().zip(&mut values) {
            let cell = rec
                .get(*i)
                .ok_or_else(|| parse_err(source, format!("row {row}: too few cells")))?;
            let v = layout.missing.parse(cell).map_err(|_| {
                parse_err(
                    source,
                    format!("row {row}, column {name}: invalid number {cell:?}"),
                )
            })?;
            col.push(v);
        }
        let cell = rec
            .get(layout.label.0)
            .ok_or_else(|| parse_err(source, format!("row {row}: too few cells")))?;
        raw_labels.push(cell.to_string());
    }
    if raw_labels.is_empty() {
        return Err(parse_err(source, "no data rows".into()));
    }
    let (labels, n_classes, class_names) =
        encode_labels(&raw_labels, layout.classes.as_deref()).map_err(|m| parse_err(source, m))?;
    let columns = layout
        .features
        .iter()
        .zip(values)
        .map(|((_, name, unit), v)| Column::new(name.clone(), unit.clone(), v))
        .collect();
    Dataset::with_classes(
        columns,
        labels,
        n_classes,
        layout.label.1.clone(),
        class_names,
    )
    .map_err(|e| parse_err(source, e.to_string()))
}

type Encoded = (Vec<usize>, usize, Option<Vec<String>>);

/// Integer labels are used as class ids directly; other spellings are
/// numbered in sorted order unless `classes` fixes the order.
fn encode_labels(
    raw: &[String],
    classes: Option<&[String]>,
) -> std::result::Result<Encoded, String> {
    if let Some(classes) = classes {
        let ids = raw
            .iter()
            .map(|s| {
                classes
                    .iter()
                    .position(|c| c == s)
                    .ok_or_else(|| format!("label {s:?} is not among the declared classes"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        return Ok((ids, classes.len(), Some(classes.to_vec())));
    }
    let ints: Option<Vec<usize>> = raw.iter().map(|s| s.parse().ok()).collect();
    if let Some(ids) = ints {
        let n = ids.iter().max().map_or(0, |m| m + 1);
        return Ok((ids, n, None));
    }
    let names: Vec<String> = raw
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ids = raw
        .iter()
        .map(|s| names.binary_search(s).expect("label in its own set"))
        .collect();
    Ok((ids, names.len(), Some(names)))
}

fn parse_err(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message,
    }
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `d` as a typed CSV with missing values as empty cells.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_table(d, &[], path.as_ref())
}

fn write_table(d: &Dataset, extra: &[(String, Vec<f64>)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header: Vec<String> = d
        .columns()
        .iter()
        .map(|c| format!("{}:{}", c.name, c.unit))
        .collect();
    header.extend(extra.iter().map(|(h, _)| h.clone()));
    header.push(format!("{}:{LABEL_UNIT}", d.label_name()));
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for r in 0..d.n_rows() {
        rec.clear();
        rec.extend(d.columns().iter().map(|c| format_value(c.values[r])));
        rec.extend(extra.iter().map(|(_, c)| format_value(c[r])));
        let l = d.labels()[r];
        rec.push(match d.class_names() {
            Some(names) => names[l].clone(),
            None => l.to_string(),
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `d` plus one `gp_feat_i:TYPE` column per tree as a typed CSV
/// (missing values as empty cells), and the rendered formulas, one per
/// line, next to it. Returns the formulas path.
pub fn export_augmented(
    d: &Dataset,
    g: &Grammar,
    trees: &[ExprTree],
    path: impl AsRef<Path>,
) -> Result<PathBuf> {
    let path = path.as_ref();
    let extra = trees
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Ok((
                format!("gp_feat_{i}:{}", g.type_name(t.return_type)),
                evaluate(t, g, d)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    write_table(d, &extra, path)?;

    let formulas_path = formulas_path(path);
    let mut f = BufWriter::new(File::create(&formulas_path)?);
    for t in trees {
        writeln!(f, "{}", render_infix(t, g))?;
    }
    f.flush()?;
    Ok(formulas_path)
}

fn formulas_path(path: &Path) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(".formulas.txt");
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, missing: &str) -> Result<Dataset> {
        read_csv(text.as_bytes(), missing, Path::new("inline.csv"))
    }

    #[test]
    fn typed_header() {
        let d = read("pt_lep:E,phi_lep:A,label:CLASS\n1.5,0.3,0\n2.5,,1\n", "").unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(
            d.schema(),
            vec![
                ("pt_lep".into(), "E".into()),
                ("phi_lep".into(), "A".into())
            ]
        );
        assert_eq!(d.labels(), &[0, 1]);
        assert_eq!(d.columns()[1].missing_count(), 1);
    }

    #[test]
    fn rejects_nan_and_bad_headers() {
        let e = read("x:E,label:CLASS\nNaN,0\n1,1\n", "").unwrap_err();
        assert!(e.to_string().contains("row 2, column x"), "{e}");
        assert!(read("x,label:CLASS\n1,0\n", "").is_err());
        assert!(read("x:E,label:CLASS,y:CLASS\n1,0,1\n", "").is_err());
        assert!(read("x:E,label:CLASS\n", "").is_err());
        assert!(read("x:E,label:CLASS\nabc,0\n1,1\n", "").is_err());
    }

    #[test]
    fn named_labels_and_missing_token() {
        let d = read("x:E,label:CLASS\n-999.0,s\n2,b\n3,s\n", "-999.0").unwrap();
        assert_eq!(
            d.class_names().unwrap(),
            &["b".to_string(), "s".to_string()]
        );
        assert_eq!(d.labels(), &[1, 0, 1]);
        assert!(d.columns()[0].values[0].is_nan());
    }

    #[test]
    fn schema_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("h.csv");
        std::fs::write(
            &csv_path,
            "EventId,PRI_tau_pt,PRI_tau_phi,Label\n1,20.5,0.1,s\n2,-999.0,0.2,b\n",
        )
        .unwrap();
        let schema: Schema = serde_json::from_str(
            r#"{"columns":[{"name":"PRI_tau_pt","type":"E"},{"name":"PRI_tau_phi","type":"A"}],
                "label":"Label","missing_values":["-999"],"classes":["b","s"]}"#,
        )
        .unwrap();
        let d = load_with_schema(&csv_path, &schema).unwrap();
        assert_eq!(d.columns().len(), 2);
        assert!(d.columns()[0].values[1].is_nan());
        assert_eq!(d.labels(), &[1, 0]);
    }
}
