//! LIBSVM / SVMlight text format.
//!
//! ```text
//! +1 3:0.5 7:1
//! -1 1:2
//! ```
//!
//! One row per line: a numeric label followed by `index:value` pairs with
//! 1-based, strictly increasing indices. Blank lines and `#` comments are
//! skipped. Absent features are zero.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    /// `(index, value)` pairs, 1-based indices in increasing order.
    entries: Vec<(u32, f64)>,
    pub label: f64,
}

impl SparseRow {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    /// Value of feature `index` (1-based); zero when absent.
    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    /// `⟨φ, w⟩` with `w` indexed from zero.
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * w[i as usize - 1]).sum()
    }

    /// `out += alpha * φ`
    pub fn add_to(&self, alpha: f64, out: &mut [f64]) {
        for &(i, v) in &self.entries {
            out[i as usize - 1] += alpha * v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<SparseRow>,
    n_features: usize,
}

impl Dataset {
    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Builds a dataset from `(entries, label)` pairs, validating the same
    /// constraints the parser enforces.
    pub fn from_rows(rows: Vec<(Vec<(u32, f64)>, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut out = Vec::with_capacity(rows.len());
        let mut n_features = 0usize;
        for (line, (entries, label)) in rows.into_iter().enumerate() {
            if !label.is_finite() {
                return Err(Error::Parse { line: line + 1, msg: "non-finite label".into() });
            }
            let mut prev = 0u32;
            for &(i, v) in &entries {
                if i <= prev {
                    return Err(Error::Parse { line: line + 1, msg: format!("non-increasing index {i}") });
                }
                if !v.is_finite() {
                    return Err(Error::Parse { line: line + 1, msg: format!("non-finite value at {i}") });
                }
                prev = i;
            }
            n_features = n_features.max(prev as usize);
            out.push(SparseRow { entries, label });
        }
        if n_features == 0 {
            n_features = 1;
        }
        Ok(Self { rows: out, n_features })
    }

    /// Appends a constant feature `n_features + 1` equal to one on every row.
    pub fn with_intercept(mut self) -> Self {
        let idx = self.n_features as u32 + 1;
        for row in &mut self.rows {
            row.entries.push((idx, 1.0));
        }
        self.n_features += 1;
        self
    }

    /// Keeps only features `1..=k` and fixes the dimension to `k`.
    pub fn project_features(mut self, k: usize) -> Self {
        for row in &mut self.rows {
            row.entries.retain(|&(i, _)| i as usize <= k);
        }
        self.n_features = k;
        self
    }

    /// Serializes back to LIBSVM text; `parse_libsvm` inverts this exactly.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = write!(out, "{}", row.label);
            for (i, v) in &row.entries {
                let _ = write!(out, " {i}:{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut n_features = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else { continue };
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|l: &f64| l.is_finite())
            .ok_or_else(|| Error::Parse { line: lineno, msg: format!("non-numeric label {label_tok:?}") })?;

        let mut entries = Vec::new();
        let mut prev = 0u32;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("malformed token {tok:?}") })?;
            let idx: u32 = idx
                .parse()
                .ok()
                .filter(|&i| i > 0)
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("bad feature index in {tok:?}") })?;
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("bad feature value in {tok:?}") })?;
            if idx <= prev {
                return Err(Error::Parse { line: lineno, msg: format!("non-increasing index {idx} after {prev}") });
            }
            prev = idx;
            entries.push((idx, val));
        }
        n_features = n_features.max(prev as usize);
        rows.push(SparseRow { entries, label });
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset { rows, n_features: n_features.max(1) })
}

pub fn read_libsvm_file(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_libsvm(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn parses_two_rows() {
        let ds = parse_libsvm("1 3:0.5\n-1 1:2".as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_features(), 3);
        assert_eq!(ds.rows()[0].entries(), &[(3, 0.5)]);
        assert_eq!(ds.rows()[0].label, 1.0);
        assert_eq!(ds.rows()[0].get(1), 0.0);
        assert_eq!(ds.rows()[1].get(1), 2.0);
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(parse_libsvm("".as_bytes()), Err(Error::EmptyDataset)));
        assert!(matches!(parse_libsvm("\n# only a comment\n".as_bytes()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn malformed_lines() {
        for bad in ["+1 1:1 1:2", "1 2:1 1:1", "abc 1:1", "1 1-1", "1 0:1", "1 1:x", "1 x:1", "nan 1:1"] {
            assert!(matches!(parse_libsvm(bad.as_bytes()), Err(Error::Parse { line: 1, .. })), "{bad}");
        }
        let err = parse_libsvm("+1 1:1 1:2".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("non-increasing"));
    }

    #[test]
    fn comments_and_intercept() {
        let ds = parse_libsvm("+1 2:1 # first\n\n-1 1:1\n".as_bytes()).unwrap().with_intercept();
        assert_eq!(ds.n_features(), 3);
        assert_eq!(ds.rows()[1].entries(), &[(1, 1.0), (3, 1.0)]);
    }

    fn dataset_strategy() -> impl Strategy<Value = Dataset> {
        let row = (
            proptest::collection::btree_map(1u32..50, -1e6f64..1e6, 0..8),
            prop_oneof![Just(1.0), Just(-1.0), -10.0f64..10.0],
        );
        proptest::collection::vec(row, 1..20).prop_map(|rows| {
            Dataset::from_rows(rows.into_iter().map(|(m, y)| (m.into_iter().collect(), y)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn serialize_round_trip(ds in dataset_strategy()) {
            let back = parse_libsvm(ds.to_libsvm().as_bytes()).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
