//! Row-oriented tables rendered as CSV with round-trip-safe numbers.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// 17 significant digits per float; text cells are quoted when needed.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Num(v) => write!(out, "{v:.16e}").unwrap(),
                    Cell::Int(v) => write!(out, "{v}").unwrap(),
                    Cell::Text(s) if s.contains([',', '"', '\n']) => {
                        write!(out, "\"{}\"", s.replace('"', "\"\"")).unwrap()
                    }
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        let mut t = Table::new(vec!["a", "b", "c"]);
        let v = 0.1 + 0.2;
        t.push(vec![v.into(), 3usize.into(), "x,y".into()]);
        let csv = t.to_csv();
        let line = csv.lines().nth(1).unwrap();
        let first: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, v);
        assert!(line.ends_with("\"x,y\""));
    }
}
