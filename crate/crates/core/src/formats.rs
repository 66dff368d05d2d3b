//! Text formats shared by the CLI: number formatting, vector and range
//! arguments, and the CSV tables this crate writes.

use std::fmt;

use thiserror::Error;

/// 17 significant digits, so values round-trip exactly through text.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("invalid number `{0}`")]
    Number(String),
    #[error("empty vector")]
    EmptyVector,
    #[error("range must be lo:hi:step, got `{0}`")]
    RangeShape(String),
    #[error("range needs lo ≤ hi and step > 0 (got {lo}:{hi}:{step})")]
    RangeBounds { lo: f64, hi: f64, step: f64 },
    #[error("range has more than {0} points")]
    RangeTooLong(usize),
}

/// Parse a finite real; accepts scientific notation.
pub fn parse_real(s: &str) -> Result<f64, ParseError> {
    let t = s.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParseError::Number(t.to_string())),
    }
}

/// Comma-separated list of reals, e.g. `1,-2.5,3e-4`.
pub fn parse_vector(s: &str) -> Result<Vec<f64>, ParseError> {
    if s.trim().is_empty() {
        return Err(ParseError::EmptyVector);
    }
    s.split(',').map(parse_real).collect()
}

/// Upper bound on the number of cells an α range may expand to.
pub const MAX_RANGE_POINTS: usize = 10_000;

/// `lo:hi:step` (inclusive of `hi` up to rounding) or a single value.
pub fn parse_alpha_range(s: &str) -> Result<Vec<f64>, ParseError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![parse_real(single)?]),
        [lo, hi, step] => {
            let (lo, hi, step) = (parse_real(lo)?, parse_real(hi)?, parse_real(step)?);
            if !(lo <= hi && step > 0.0) {
                return Err(ParseError::RangeBounds { lo, hi, step });
            }
            let count = ((hi - lo) / step + 1e-9).floor();
            if !(count < MAX_RANGE_POINTS as f64) {
                return Err(ParseError::RangeTooLong(MAX_RANGE_POINTS));
            }
            Ok((0..=count as usize).map(|i| lo + i as f64 * step).collect())
        }
        _ => Err(ParseError::RangeShape(s.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

/// A numeric CSV table. Empty cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Rows where both columns are present.
    pub fn pairs(&self, x: usize, y: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| Some((r[x]?, r[y]?)))
            .collect()
    }

    pub fn column(&self, idx: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[idx]).collect()
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.header.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| fmt_opt(*c)).collect();
            writeln!(f, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Parse a header line plus numeric rows. Line numbers in errors are 1-based.
pub fn parse_table(text: &str) -> Result<Table, CsvError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or(CsvError {
        line: 1,
        message: "missing header".into(),
    })?;
    let header: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
    if header.iter().any(String::is_empty) {
        return Err(CsvError { line: 1, message: "empty column name in header".into() });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(CsvError {
                line: i + 1,
                message: format!("expected {} fields, found {}", header.len(), cells.len()),
            });
        }
        let row = cells
            .iter()
            .map(|c| {
                let c = c.trim();
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>().map(Some).map_err(|_| CsvError {
                        line: i + 1,
                        message: format!("not a number: `{c}`"),
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vectors_and_ranges() {
        assert_eq!(parse_vector("1,-2.5,3e-4").unwrap(), vec![1.0, -2.5, 3e-4]);
        assert!(parse_vector("1,,2").is_err());
        assert!(parse_vector("").is_err());
        assert!(parse_vector("nan").is_err());
        assert_eq!(parse_alpha_range("3:6:1").unwrap(), vec![3.0, 4.0, 5.0, 6.0]);
        assert_eq!(parse_alpha_range("3:4:0.5").unwrap(), vec![3.0, 3.5, 4.0]);
        assert_eq!(parse_alpha_range("4.5").unwrap(), vec![4.5]);
        assert!(parse_alpha_range("6:3:1").is_err());
        assert!(parse_alpha_range("3:6:0").is_err());
        assert!(parse_alpha_range("1:2").is_err());
        assert!(parse_alpha_range("0:1e9:1e-9").is_err());
    }

    #[test]
    fn table_errors_carry_line_numbers() {
        let err = parse_table("t,gap\n1,2\n3\n").unwrap_err();
        assert_eq!(err.line, 3);
        let err = parse_table("t,gap\n1,2\n3,abc\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(parse_table("").is_err());
        let t = parse_table("t,gap\n1,\n2,0.5\n").unwrap();
        assert_eq!(t.rows[0], vec![Some(1.0), None]);
        assert_eq!(t.pairs(0, 1), vec![(2.0, 0.5)]);
    }

    proptest! {
        #[test]
        fn formatted_reals_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(parse_real(&fmt_f64(v)).unwrap().to_bits(), v.to_bits());
        }

        #[test]
        fn table_round_trip(rows in proptest::collection::vec(proptest::collection::vec(proptest::option::of(-1e300f64..1e300), 3), 0..20)) {
            let table = Table { header: vec!["a".into(), "b".into(), "c".into()], rows };
            let parsed = parse_table(&table.to_string()).unwrap();
            prop_assert_eq!(parsed, table);
        }
    }
}
