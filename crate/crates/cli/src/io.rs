//! File formats: CSV observation matrices, TSV weight matrices and edge
//! lists, atomic writes and content digests.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use jdag_core::{BinaryDigraph, GroupedDataset};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    Ok(sha256_hex(&bytes))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let ctx = || format!("writing {}", path.display());
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(ctx(), e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(ctx(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(ctx(), e))?;
    tmp.persist(path)
        .map_err(|e| CliError::io(ctx(), e.error))?;
    Ok(())
}

/// One parsed CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    pub header: Option<Vec<String>>,
    pub data: DMatrix<f64>,
}

/// Parses an `n x d` numeric CSV. The first record is a header when none of
/// its cells parse as numbers. Locations in errors are 1-based lines and
/// columns (or header names).
pub fn parse_csv(path: &Path, text: &str) -> Result<CsvMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(path, format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        let cells: Vec<&str> = rec.iter().map(str::trim).collect();
        if cells.len() == 1 && cells[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(CliError::data(
                    path,
                    format!("row {line} has {} fields, expected {w}", cells.len()),
                ));
            }
            Some(_) => {}
        }
        if header.is_none() && rows.is_empty() && cells.iter().all(|c| c.parse::<f64>().is_err()) {
            header = Some(cells.iter().map(|c| c.to_string()).collect());
            continue;
        }
        let mut row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let col = match &header {
                Some(h) => format!("\"{}\"", h[c]),
                None => (c + 1).to_string(),
            };
            let v: f64 = cell.parse().map_err(|_| {
                CliError::data(
                    path,
                    format!("non-numeric value {cell:?} at row {line}, column {col}"),
                )
            })?;
            if !v.is_finite() {
                return Err(CliError::data(
                    path,
                    format!("non-finite value {cell:?} at row {line}, column {col}"),
                ));
            }
            row.push(v);
        }
        rows.push(row);
    }
    let Some(d) = width else {
        return Err(CliError::data(path, "file is empty"));
    };
    if rows.is_empty() {
        return Err(CliError::data(path, "no data rows"));
    }
    let data = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]);
    Ok(CsvMatrix { header, data })
}

pub fn read_csv(path: &Path) -> Result<CsvMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    parse_csv(path, &text)
}

/// Loads one CSV per group. Headers must agree exactly across files; files
/// without a header get `x0..`. The result is mean-centered per group, after
/// optional scaling to unit variance.
pub fn load_dataset(
    paths: &[PathBuf],
    group_names: &[String],
    standardize: bool,
) -> Result<GroupedDataset> {
    if paths.is_empty() {
        return Err(CliError::Usage("--data needs at least one CSV file".into()));
    }
    if paths.len() != group_names.len() {
        return Err(CliError::Usage(format!(
            "{} group names for {} data files",
            group_names.len(),
            paths.len()
        )));
    }
    let mut mats = Vec::with_capacity(paths.len());
    let mut names: Option<(Vec<String>, &Path)> = None;
    let mut d = None;
    for path in paths {
        let m = read_csv(path)?;
        if let Some((d0, first)) = d {
            if m.data.ncols() != d0 {
                return Err(CliError::data(
                    path,
                    format!(
                        "{} columns, but {} has {d0}",
                        m.data.ncols(),
                        Path::display(first)
                    ),
                ));
            }
        } else {
            d = Some((m.data.ncols(), path.as_path()));
        }
        let header = m
            .header
            .clone()
            .unwrap_or_else(|| (0..m.data.ncols()).map(|i| format!("x{i}")).collect());
        match &names {
            None => names = Some((header, path)),
            Some((h0, first)) if *h0 != header => {
                let at = h0
                    .iter()
                    .zip(&header)
                    .position(|(a, b)| a != b)
                    .unwrap_or(0);
                return Err(CliError::data(
                    path,
                    format!(
                        "header differs from {} at column {}: {:?} vs {:?}",
                        first.display(),
                        at + 1,
                        header[at],
                        h0[at]
                    ),
                ));
            }
            Some(_) => {}
        }
        mats.push(m.data);
    }
    let (vars, _) = names.expect("at least one file");
    let ds = GroupedDataset::new(mats, vars, group_names.to_vec())
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(if standardize {
        ds.standardized().centered()
    } else {
        ds.centered()
    })
}

/// Group names from file stems, which must be distinct.
pub fn default_group_names(paths: &[PathBuf]) -> Result<Vec<String>> {
    let names: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "group".into())
        })
        .collect();
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(CliError::Usage(format!(
                "two data files share the name {a:?}; pass --group-names"
            )));
        }
    }
    Ok(names)
}

/// Makes a label safe to use inside a file name.
pub fn file_stem_safe(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains(['\t', '\n', '\r', ' ']) {
        return Err(CliError::Input(format!(
            "node label {label:?} cannot be written to a TSV edge list"
        )));
    }
    Ok(())
}

pub fn matrix_csv(header: &[String], m: &DMatrix<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Input(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(io)?;
    for r in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|c| fmt_f64(m[(r, c)])))
            .map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Input(format!("CSV encoding failed: {e}")))
}

/// Square weight matrix with row and column labels; row `i` column `j` is
/// the weight of edge `i -> j`.
pub fn weight_matrix_tsv(labels: &[String], m: &DMatrix<f64>) -> String {
    let mut s = String::from("source");
    for l in labels {
        s.push('\t');
        s.push_str(l);
    }
    s.push('\n');
    for (i, l) in labels.iter().enumerate() {
        s.push_str(l);
        for j in 0..m.ncols() {
            s.push('\t');
            s.push_str(&fmt_f64(m[(i, j)]));
        }
        s.push('\n');
    }
    s
}

/// Edge list with a leading `# nodes:` line so isolated nodes survive.
/// `weights`, when given, supplies the third column.
pub fn edge_list_tsv(g: &BinaryDigraph, weights: Option<&DMatrix<f64>>) -> Result<String> {
    let labels = g.node_labels();
    for l in labels {
        check_label(l)?;
    }
    let mut s = format!("# nodes: {}\n", labels.join(" "));
    s.push_str(if weights.is_some() {
        "source\ttarget\tweight\n"
    } else {
        "source\ttarget\n"
    });
    for (i, j) in g.edges() {
        s.push_str(&labels[i]);
        s.push('\t');
        s.push_str(&labels[j]);
        if let Some(w) = weights {
            s.push('\t');
            s.push_str(&fmt_f64(w[(i, j)]));
        }
        s.push('\n');
    }
    Ok(s)
}

/// Reads an edge list written by [`edge_list_tsv`]. Without a `# nodes:`
/// line the node set is the set of endpoints in order of appearance.
pub fn parse_edge_list(path: &Path, text: &str) -> Result<BinaryDigraph> {
    let mut nodes: Option<Vec<String>> = None;
    let mut edges: Vec<(usize, String, String)> = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(list) = rest.trim_start().strip_prefix("nodes:") {
                if nodes.is_some() {
                    return Err(CliError::data(
                        path,
                        format!("second `# nodes:` line at line {line_no}"),
                    ));
                }
                nodes = Some(list.split_whitespace().map(String::from).collect());
            }
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if !saw_header && cells.first() == Some(&"source") {
            saw_header = true;
            continue;
        }
        if cells.len() < 2 || cells.len() > 3 {
            return Err(CliError::data(
                path,
                format!("line {line_no}: expected `source<TAB>target[<TAB>weight]`"),
            ));
        }
        edges.push((line_no, cells[0].to_string(), cells[1].to_string()));
    }
    let nodes = match nodes {
        Some(n) => n,
        None => {
            let mut n: Vec<String> = Vec::new();
            for (_, a, b) in &edges {
                for x in [a, b] {
                    if !n.contains(x) {
                        n.push(x.clone());
                    }
                }
            }
            n
        }
    };
    for (i, a) in nodes.iter().enumerate() {
        if nodes[..i].contains(a) {
            return Err(CliError::data(path, format!("node {a:?} listed twice")));
        }
    }
    let index = |line: usize, name: &str| {
        nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CliError::data(path, format!("line {line}: unknown node {name:?}")))
    };
    let mut g = BinaryDigraph::empty(nodes.len());
    for (line, a, b) in &edges {
        let (i, j) = (index(*line, a)?, index(*line, b)?);
        if i == j {
            return Err(CliError::data(
                path,
                format!("line {line}: self-loop on {a:?}"),
            ));
        }
        g.add_edge(i, j)
            .map_err(|e| CliError::data(path, e.to_string()))?;
    }
    g.with_labels(nodes)
        .map_err(|e| CliError::data(path, e.to_string()))
}

pub fn read_edge_list(path: &Path) -> Result<BinaryDigraph> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    parse_edge_list(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("t.csv")
    }

    #[test]
    fn csv_with_and_without_header() {
        let m = parse_csv(p(), "a,b\n1,2\n3,4.5\n").unwrap();
        assert_eq!(m.header, Some(vec!["a".to_string(), "b".to_string()]));
        assert_eq!(m.data, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.5]));
        let m = parse_csv(p(), "1,2\n3,4\n").unwrap();
        assert!(m.header.is_none());
        assert_eq!(m.data.nrows(), 2);
    }

    #[test]
    fn quoted_header_cells() {
        let m = parse_csv(p(), "\"ROI, left\",b\n1,2\n").unwrap();
        assert_eq!(m.header.unwrap()[0], "ROI, left");
    }

    #[test]
    fn error_names_row_and_column() {
        let text = "ROI_1,ROI_7\n1,2\n3,oops\n";
        let err = parse_csv(p(), text).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        assert!(err.contains("\"ROI_7\""), "{err}");
        assert!(err.contains("t.csv"), "{err}");
        let err = parse_csv(p(), "1,2\n3,x\n").unwrap_err().to_string();
        assert!(err.contains("row 2, column 2"), "{err}");
    }

    #[test]
    fn rejects_ragged_and_nonfinite() {
        assert!(parse_csv(p(), "1,2\n3\n")
            .unwrap_err()
            .to_string()
            .contains("row 2"));
        assert!(parse_csv(p(), "1,2\n3,NaN\n").is_err());
        assert!(parse_csv(p(), "1,2\n3,inf\n").is_err());
        assert!(parse_csv(p(), "").is_err());
        assert!(parse_csv(p(), "a,b\n").is_err());
    }

    #[test]
    fn float_format_roundtrips() {
        for v in [0.1, -2.5e-300, 1.0 / 3.0, 123456789.125, 0.0, 1e22] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn edge_list_roundtrip_keeps_isolated_nodes() {
        let g = BinaryDigraph::from_edges(4, [(0, 2), (3, 1)])
            .unwrap()
            .with_labels(vec!["a".into(), "b".into(), "c".into(), "lonely".into()])
            .unwrap();
        let text = edge_list_tsv(&g, None).unwrap();
        let back = parse_edge_list(Path::new("e.tsv"), &text).unwrap();
        assert_eq!(back.num_nodes(), 4);
        assert_eq!(back.node_labels(), g.node_labels());
        assert!(back.has_edge(0, 2) && back.has_edge(3, 1));
        assert_eq!(back.num_edges(), 2);
    }

    #[test]
    fn edge_list_errors() {
        let path = Path::new("e.tsv");
        assert!(parse_edge_list(path, "# nodes: a b\na\tc\n").is_err());
        assert!(parse_edge_list(path, "# nodes: a b\na\ta\n").is_err());
        assert!(parse_edge_list(path, "# nodes: a a\n").is_err());
        let g = parse_edge_list(path, "source\ttarget\nx\ty\n").unwrap();
        assert_eq!(g.num_nodes(), 2);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("sub/out.txt");
        write_atomic(&f, b"one").unwrap();
        write_atomic(&f, b"two").unwrap();
        assert_eq!(fs::read(&f).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
