//! Text formats: embeddings (`n d` header, then `token v₁ … v_d`), edge lists
//! (`src dst [weight]`), labels (`index class_id`) and the Cora content/cites
//! pair. All UTF-8 with LF line endings; reals are written with 17
//! significant digits.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use spectral_impute::graph::SparseGraph;
use spectral_impute::tensor_io::format_value;
use spectral_impute::DenseMatrix;

use crate::error::{HarnessError, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn numbered_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let reader = open(path)?;
    Ok(reader
        .lines()
        .enumerate()
        .map(move |(i, l)| l.map(|l| (i + 1, l)).map_err(|e| HarnessError::io(path, e))))
}

fn parse_f64(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| HarnessError::parse(path, line, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(HarnessError::parse(path, line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

fn parse_usize(path: &Path, line: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| HarnessError::parse(path, line, format!("{what} `{tok}` is not a non-negative integer")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub tokens: Vec<String>,
    pub vectors: DenseMatrix,
}

impl Embeddings {
    pub fn new(tokens: Vec<String>, vectors: DenseMatrix) -> Result<Self> {
        if tokens.len() != vectors.rows() {
            return Err(HarnessError::InvalidArgument(format!(
                "{} tokens for {} vectors",
                tokens.len(),
                vectors.rows()
            )));
        }
        Ok(Self { tokens, vectors })
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect()
    }
}

pub fn load_embeddings(path: &Path) -> Result<Embeddings> {
    let mut lines = numbered_lines(path)?;
    let (ln, header) = lines
        .next()
        .ok_or_else(|| HarnessError::parse(path, 1, "missing `n d` header"))??;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(HarnessError::parse(path, ln, "header must be `n d`"));
    }
    let n = parse_usize(path, ln, dims[0], "row count")?;
    let d = parse_usize(path, ln, dims[1], "dimension")?;

    let mut tokens = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * d);
    let mut seen = HashMap::new();
    for item in lines {
        let (ln, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default().to_string();
        let before = values.len();
        for tok in parts {
            values.push(parse_f64(path, ln, tok)?);
        }
        if values.len() - before != d {
            return Err(HarnessError::parse(
                path,
                ln,
                format!("expected {d} values after `{token}`, found {}", values.len() - before),
            ));
        }
        if let Some(first) = seen.insert(token.clone(), ln) {
            return Err(HarnessError::parse(path, ln, format!("duplicate token `{token}` (first on line {first})")));
        }
        tokens.push(token);
    }
    if tokens.len() != n {
        return Err(HarnessError::parse(
            path,
            ln,
            format!("header declares {n} rows, file has {}", tokens.len()),
        ));
    }
    let vectors = DenseMatrix::from_vec(n, d, values)?;
    Ok(Embeddings { tokens, vectors })
}

pub fn save_embeddings(path: &Path, emb: &Embeddings) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| HarnessError::io(path, e);
    writeln!(w, "{} {}", emb.vectors.rows(), emb.vectors.cols()).map_err(io)?;
    for (i, tok) in emb.tokens.iter().enumerate() {
        if tok.is_empty() || tok.chars().any(char::is_whitespace) {
            return Err(HarnessError::InvalidArgument(format!("token `{tok}` contains whitespace")));
        }
        write!(w, "{tok}").map_err(io)?;
        for v in emb.vectors.row(i) {
            write!(w, " {}", format_value(*v)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Duplicate edges are merged by summing weights; self-loops are kept.
pub fn load_edge_list(path: &Path, n: usize) -> Result<SparseGraph> {
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for item in numbered_lines(path)? {
        let (ln, line) = item?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.is_empty() {
            continue;
        }
        if parts.len() < 2 || parts.len() > 3 {
            return Err(HarnessError::parse(path, ln, "expected `src dst [weight]`"));
        }
        let src = parse_usize(path, ln, parts[0], "source")?;
        let dst = parse_usize(path, ln, parts[1], "destination")?;
        if src >= n || dst >= n {
            return Err(HarnessError::parse(path, ln, format!("edge {src} -> {dst} out of range for {n} nodes")));
        }
        let w = match parts.get(2) {
            Some(t) => parse_f64(path, ln, t)?,
            None => 1.0,
        };
        if w < 0.0 {
            return Err(HarnessError::parse(path, ln, format!("negative weight {w}")));
        }
        *merged.entry((src, dst)).or_insert(0.0) += w;
    }
    let edges = merged.into_iter().map(|((s, d), w)| (s, d, w));
    Ok(SparseGraph::from_edges(n, edges, vec![false; n])?)
}

pub fn save_edge_list(path: &Path, g: &SparseGraph) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| HarnessError::io(path, e);
    for (s, d, wt) in g.edges() {
        writeln!(w, "{s} {d} {}", format_value(wt)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `index class_id` per line; every index in `0..n` must appear exactly once.
pub fn load_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let mut out = vec![None; n];
    for item in numbered_lines(path)? {
        let (ln, line) = item?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.is_empty() {
            continue;
        }
        if parts.len() != 2 {
            return Err(HarnessError::parse(path, ln, "expected `index class_id`"));
        }
        let i = parse_usize(path, ln, parts[0], "index")?;
        let c = parse_usize(path, ln, parts[1], "class id")?;
        if i >= n {
            return Err(HarnessError::parse(path, ln, format!("index {i} out of range for {n} nodes")));
        }
        if out[i].replace(c).is_some() {
            return Err(HarnessError::parse(path, ln, format!("index {i} labelled twice")));
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| HarnessError::InvalidArgument(format!("{}: node {i} has no label", path.display()))))
        .collect()
}

pub fn save_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| HarnessError::io(path, e);
    for (i, c) in labels.iter().enumerate() {
        writeln!(w, "{i} {c}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Node-classification dataset in memory.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    pub features: DenseMatrix,
    pub classes: Vec<usize>,
    pub class_names: Vec<String>,
    pub graph: SparseGraph,
}

/// Reads `cora.content` (`id f₁ … f_d class`) and `cora.cites`
/// (`cited citing`) from `dir`. Citations become undirected unit edges;
/// citations to unknown ids are skipped.
pub fn load_cora(dir: &Path) -> Result<LabeledGraph> {
    let content = dir.join("cora.content");
    let mut ids = HashMap::new();
    let mut class_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut rows: Vec<(Vec<f64>, String)> = Vec::new();
    let mut d = None;
    for item in numbered_lines(&content)? {
        let (ln, line) = item?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.is_empty() {
            continue;
        }
        if parts.len() < 3 {
            return Err(HarnessError::parse(&content, ln, "expected `id features… class`"));
        }
        let feats = parts[1..parts.len() - 1]
            .iter()
            .map(|t| parse_f64(&content, ln, t))
            .collect::<Result<Vec<_>>>()?;
        match d {
            None => d = Some(feats.len()),
            Some(d) if d != feats.len() => {
                return Err(HarnessError::parse(&content, ln, format!("expected {d} features, found {}", feats.len())))
            }
            _ => {}
        }
        if ids.insert(parts[0].to_string(), rows.len()).is_some() {
            return Err(HarnessError::parse(&content, ln, format!("duplicate id `{}`", parts[0])));
        }
        let class = parts[parts.len() - 1].to_string();
        class_ids.entry(class.clone()).or_insert(0);
        rows.push((feats, class));
    }
    for (i, v) in class_ids.values_mut().enumerate() {
        *v = i;
    }
    let n = rows.len();
    let d = d.unwrap_or(0);
    let features = DenseMatrix::from_fn(n, d, |i, j| rows[i].0[j]);
    let classes = rows.iter().map(|(_, c)| class_ids[c]).collect();

    let cites = dir.join("cora.cites");
    let mut edges = std::collections::BTreeSet::new();
    for item in numbered_lines(&cites)? {
        let (ln, line) = item?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.is_empty() {
            continue;
        }
        if parts.len() != 2 {
            return Err(HarnessError::parse(&cites, ln, "expected `cited citing`"));
        }
        if let (Some(&a), Some(&b)) = (ids.get(parts[0]), ids.get(parts[1])) {
            if a != b {
                edges.insert((a, b));
                edges.insert((b, a));
            }
        }
    }
    let graph = SparseGraph::from_edges(n, edges.into_iter().map(|(a, b)| (a, b, 1.0)), vec![false; n])?;
    Ok(LabeledGraph {
        features,
        classes,
        class_names: class_ids.into_keys().collect(),
        graph,
    })
}
