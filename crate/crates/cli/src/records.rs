//! Record tables and their text framings.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        Value::Num(v.unwrap_or(f64::NAN))
    }
}

impl Value {
    fn csv_field(&self) -> String {
        match self {
            Value::Num(v) => match serde_json::Number::from_f64(*v) {
                Some(n) => n.to_string(),
                None => v.to_string(),
            },
            Value::Int(v) => v.to_string(),
            Value::Bool(v) => v.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Value::Num(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, serde_json::Value::Number),
            Value::Int(v) => (*v).into(),
            Value::Bool(v) => (*v).into(),
            Value::Text(s) => s.clone().into(),
        }
    }
}

/// Headered table; every row has one value per column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Comma-separated with a header line.
    Csv,
    /// One JSON object per line.
    Jsonl,
}

pub fn emit_records(table: &Table, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.columns).expect("in-memory csv");
            for row in &table.rows {
                w.write_record(row.iter().map(Value::csv_field)).expect("in-memory csv");
            }
            w.into_inner().expect("in-memory csv")
        }
        Format::Jsonl => {
            let mut out = String::new();
            for row in &table.rows {
                out.push('{');
                for (i, (c, v)) in table.columns.iter().zip(row).enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{}:{}", serde_json::Value::from(c.as_str()), v.json());
                }
                out.push_str("}\n");
            }
            out.into_bytes()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framings_differ_values_agree() {
        let mut t = Table::new(&["name", "value", "n"]);
        t.push(vec!["a,b".into(), 0.1f64.into(), 3usize.into()]);
        let csv = String::from_utf8(emit_records(&t, Format::Csv)).unwrap();
        let jsonl = String::from_utf8(emit_records(&t, Format::Jsonl)).unwrap();
        assert_eq!(csv, "name,value,n\n\"a,b\",0.1,3\n");
        assert_eq!(jsonl, "{\"name\":\"a,b\",\"value\":0.1,\"n\":3}\n");
    }
}
