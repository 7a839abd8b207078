//! Whitespace text formats.
//!
//! Embedding and feature files share one layout: a header line `N D`
//! followed by `N` lines `name v1 ... vD`. Values are written with Rust's
//! shortest round-trip float formatting, so save → load → save is
//! byte-identical. Split files hold `seen <name>` / `unseen <name>` lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ClassEmbeddingTable, LabeledFeatureSet, ZslSplit};
use crate::error::{Result, VaweError};
use crate::numerics::DenseMatrix;

struct Rows {
    names: Vec<String>,
    data: Vec<f64>,
    dim: usize,
    /// 1-based line number of each row.
    lines: Vec<usize>,
}

fn parse_rows(text: &str) -> Result<Rows> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| VaweError::parse(1, "no rows: file is empty"))?;
    let mut head = header.split_ascii_whitespace();
    let mut count = |what: &str| -> Result<usize> {
        let tok = head
            .next()
            .ok_or_else(|| VaweError::parse(1, format!("malformed header: missing {what}")))?;
        tok.parse::<usize>()
            .map_err(|_| VaweError::parse(1, format!("malformed header: {what} `{tok}` is not a count")))
    };
    let n = count("row count")?;
    let dim = count("dimension")?;
    if head.next().is_some() {
        return Err(VaweError::parse(1, "malformed header: expected exactly two fields"));
    }
    if dim == 0 {
        return Err(VaweError::parse(1, "malformed header: dimension must be positive"));
    }

    let mut rows = Rows {
        names: Vec::with_capacity(n),
        data: Vec::with_capacity(n * dim),
        dim,
        lines: Vec::with_capacity(n),
    };
    for (lineno, line) in lines {
        if rows.names.len() == n {
            return Err(VaweError::parse(
                lineno,
                format!("header declares {n} rows but more follow"),
            ));
        }
        let mut toks = line.split_ascii_whitespace();
        let name = toks
            .next()
            .ok_or_else(|| VaweError::parse(lineno, "empty line"))?;
        let start = rows.data.len();
        for tok in toks {
            let v: f64 = tok
                .parse()
                .map_err(|_| VaweError::parse(lineno, format!("non-numeric token `{tok}`")))?;
            if !v.is_finite() {
                return Err(VaweError::parse(lineno, format!("non-finite value `{tok}`")));
            }
            rows.data.push(v);
        }
        let got = rows.data.len() - start;
        if got != dim {
            return Err(VaweError::parse(
                lineno,
                format!("expected {dim} values, found {got}"),
            ));
        }
        rows.names.push(name.to_string());
        rows.lines.push(lineno);
    }
    if rows.names.len() != n {
        return Err(VaweError::parse(
            rows.lines.last().copied().unwrap_or(1) + 1,
            format!("header declares {n} rows, file has {}", rows.names.len()),
        ));
    }
    Ok(rows)
}

fn write_rows<'a>(names: impl Iterator<Item = &'a str>, m: &DenseMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for (name, row) in names.zip(m.row_iter()) {
        out.push_str(name);
        for v in row {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| VaweError::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| VaweError::io(path, e))
}

pub fn parse_embeddings(text: &str) -> Result<ClassEmbeddingTable> {
    let rows = parse_rows(text)?;
    for (i, name) in rows.names.iter().enumerate() {
        if let Some(j) = rows.names[..i].iter().position(|n| n == name) {
            return Err(VaweError::parse(
                rows.lines[i],
                format!("duplicate class name `{name}` (first on line {})", rows.lines[j]),
            ));
        }
    }
    let n = rows.names.len();
    let vectors = DenseMatrix::from_vec(n, rows.dim, rows.data)?;
    ClassEmbeddingTable::new(rows.names, vectors)
}

pub fn write_embeddings(table: &ClassEmbeddingTable) -> String {
    write_rows(table.class_names().iter().map(String::as_str), table.vectors())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<ClassEmbeddingTable> {
    let path = path.as_ref();
    parse_embeddings(&read_file(path)?).map_err(|e| e.at_path(path))
}

pub fn save_embeddings(table: &ClassEmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_embeddings(table))
}

pub fn parse_features(text: &str) -> Result<LabeledFeatureSet> {
    let rows = parse_rows(text)?;
    if rows.names.is_empty() {
        return Err(VaweError::parse(1, "no rows"));
    }
    let n = rows.names.len();
    let features = DenseMatrix::from_vec(n, rows.dim, rows.data)?;
    LabeledFeatureSet::new(rows.names, features)
}

pub fn write_features(set: &LabeledFeatureSet) -> String {
    write_rows(set.class_labels().iter().map(String::as_str), set.features())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<LabeledFeatureSet> {
    let path = path.as_ref();
    parse_features(&read_file(path)?).map_err(|e| e.at_path(path))
}

pub fn save_features(set: &LabeledFeatureSet, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_features(set))
}

pub fn parse_split(text: &str) -> Result<ZslSplit> {
    let (mut seen, mut unseen) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let mut toks = line.split_ascii_whitespace();
        let (kind, name) = match (toks.next(), toks.next(), toks.next()) {
            (Some(k), Some(n), None) => (k, n.to_string()),
            _ => {
                return Err(VaweError::parse(
                    i + 1,
                    "expected `seen <class>` or `unseen <class>`",
                ))
            }
        };
        match kind {
            "seen" => seen.push(name),
            "unseen" => unseen.push(name),
            other => {
                return Err(VaweError::parse(i + 1, format!("unknown split tag `{other}`")));
            }
        }
    }
    ZslSplit::new(seen, unseen)
}

pub fn write_split(split: &ZslSplit) -> String {
    let mut out = String::new();
    for c in split.seen() {
        let _ = writeln!(out, "seen {c}");
    }
    for c in split.unseen() {
        let _ = writeln!(out, "unseen {c}");
    }
    out
}

pub fn load_split(path: impl AsRef<Path>) -> Result<ZslSplit> {
    let path = path.as_ref();
    parse_split(&read_file(path)?).map_err(|e| e.at_path(path))
}

pub fn save_split(split: &ZslSplit, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_split(split))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_line(e: VaweError) -> usize {
        match e {
            VaweError::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_embedding_file() {
        let t = parse_embeddings("2 3\ncat 1 0 0\ndog 0 1 0").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.class_names(), ["cat", "dog"]);
        assert_eq!(t.row(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn embedding_errors_name_the_line() {
        let dup = parse_embeddings("3 1\na 1\nb 2\na 3\n").unwrap_err();
        assert_eq!(parse_line(dup), 4);
        assert_eq!(parse_line(parse_embeddings("2 x\n").unwrap_err()), 1);
        assert_eq!(parse_line(parse_embeddings("2\n").unwrap_err()), 1);
        assert_eq!(parse_line(parse_embeddings("1 2\na 1 2 3\n").unwrap_err()), 2);
        assert_eq!(parse_line(parse_embeddings("2 2\na 1 2\nb 1 q\n").unwrap_err()), 3);
        assert_eq!(parse_line(parse_embeddings("1 1\na NaN\n").unwrap_err()), 2);
        assert_eq!(parse_line(parse_embeddings("1 1\na 1\nb 2\n").unwrap_err()), 3);
        assert_eq!(parse_line(parse_embeddings("3 1\na 1\nb 2\n").unwrap_err()), 4);
    }

    #[test]
    fn feature_file_basics() {
        let f = parse_features("3 2\ncat 1 2\ncat 3 4\ndog 5 6\n").unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.classes(), ["cat", "dog"]);
        let e = parse_features("").unwrap_err();
        assert!(e.to_string().contains("no rows"), "{e}");
        assert!(parse_features("0 2\n").unwrap_err().to_string().contains("no rows"));
        assert_eq!(parse_line(parse_features("2 2\na 1 2\nb 1\n").unwrap_err()), 3);
    }

    #[test]
    fn split_roundtrip_and_errors() {
        let s = parse_split("seen a\nseen b\nunseen c\n").unwrap();
        assert_eq!(s.seen(), ["a", "b"]);
        assert_eq!(write_split(&s), "seen a\nseen b\nunseen c\n");
        assert!(matches!(parse_split("seen a\nunseen a\n"), Err(VaweError::Protocol(_))));
        assert!(matches!(parse_split("seen a\n"), Err(VaweError::Protocol(_))));
        assert_eq!(parse_line(parse_split("seen a\nmaybe b\n").unwrap_err()), 2);
    }

    #[test]
    fn writer_uses_shortest_roundtrip() {
        let t = ClassEmbeddingTable::new(
            vec!["x".into()],
            DenseMatrix::from_rows(&[[0.1, -2.0, 1e-7]]).unwrap(),
        )
        .unwrap();
        assert_eq!(write_embeddings(&t), "1 3\nx 0.1 -2 0.0000001\n");
    }
}
