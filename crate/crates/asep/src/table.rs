//! Tables written as CSV with `#` metadata lines, or as JSON.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Rows keyed by site with metadata in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<(i64, Vec<f64>)>,
}

/// Shortest representation that reads back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { meta: Vec::new(), columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, x: i64, values: Vec<f64>) {
        self.rows.push((x, values));
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "# columns={}", self.columns.join(","));
        for (x, vals) in &self.rows {
            let _ = write!(s, "{x}");
            for v in vals {
                let _ = write!(s, ",{}", num(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let meta: Vec<Value> = self.meta.iter().map(|(k, v)| json!([k, v])).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|(x, vals)| {
                let mut r = vec![json!(x)];
                r.extend(vals.iter().map(|v| json!(v)));
                Value::Array(r)
            })
            .collect();
        let mut m = Map::new();
        m.insert("meta".into(), Value::Array(meta));
        m.insert("columns".into(), json!(self.columns));
        m.insert("rows".into(), Value::Array(rows));
        let mut out = serde_json::to_string_pretty(&Value::Object(m)).expect("tables serialize");
        out.push('\n');
        out
    }

    /// Parses the CSV form back.
    pub fn parse_csv(text: &str) -> Result<Self, String> {
        let mut t = Table::default();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once('=').ok_or_else(|| format!("bad header line {line:?}"))?;
                if k == "columns" {
                    t.columns = v.split(',').map(String::from).collect();
                } else {
                    t.meta.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            let mut parts = line.split(',');
            let x = parts
                .next()
                .ok_or("empty row")?
                .parse::<i64>()
                .map_err(|e| format!("row {line:?}: {e}"))?;
            let vals = parts.map(|v| v.parse::<f64>().map_err(|e| format!("row {line:?}: {e}"))).collect::<Result<_, _>>()?;
            t.rows.push((x, vals));
        }
        Ok(t)
    }

    /// Column `name` as `(x, value)` pairs.
    pub fn column(&self, name: &str) -> Option<Vec<(i64, f64)>> {
        let j = self.columns.iter().position(|c| c == name)?.checked_sub(1)?;
        Some(self.rows.iter().map(|(x, v)| (*x, v[j])).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["x", "value"]);
        t.meta("p", 0.3).meta("note", "a b");
        t.row(-1, vec![0.1 + 0.2]);
        t.row(0, vec![1.0]);
        let s = t.to_csv();
        assert_eq!(s, "# p=0.3\n# note=a b\n# columns=x,value\n-1,0.30000000000000004\n0,1.0\n");
        assert_eq!(Table::parse_csv(&s).unwrap(), t);
        assert_eq!(t.column("value").unwrap(), vec![(-1, 0.30000000000000004), (0, 1.0)]);
        let j: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(j["rows"][1], json!([0, 1.0]));
    }
}
