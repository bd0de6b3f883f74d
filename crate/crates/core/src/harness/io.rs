use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph_model::Adjacency;

/// An undirected simple graph read from an edge list.
#[derive(Debug, Clone)]
pub struct EdgeList {
    /// Vertex tokens in order of first appearance; row `i` of the adjacency
    /// matrix is `vertices[i]`.
    pub vertices: Vec<String>,
    pub adjacency: Adjacency,
    pub self_loops: usize,
    pub duplicates: usize,
    /// Zero-degree vertices removed at load time.
    pub dropped_isolated: Vec<String>,
}

pub fn load_edgelist(path: &Path, drop_isolated: bool) -> Result<EdgeList> {
    let file = File::open(path)?;
    parse_edgelist(BufReader::new(file), &path.display().to_string(), drop_isolated)
}

/// Reads lines of two whitespace-separated vertex tokens. Blank lines and
/// lines starting with `#` are skipped; duplicate edges are collapsed and
/// self-loops dropped and counted.
pub fn parse_edgelist(reader: impl BufRead, source: &str, drop_isolated: bool) -> Result<EdgeList> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut edges = BTreeSet::new();
    let mut self_loops = 0;
    let mut duplicates = 0;
    let mut intern = |tok: &str, vertices: &mut Vec<String>| -> usize {
        *index.entry(tok.to_string()).or_insert_with(|| {
            vertices.push(tok.to_string());
            vertices.len() - 1
        })
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                path: source.to_string(),
                line: lineno + 1,
                message: format!("expected two vertex tokens, found {}", tokens.len()),
            });
        }
        let a = intern(tokens[0], &mut vertices);
        let b = intern(tokens[1], &mut vertices);
        if a == b {
            self_loops += 1;
        } else if !edges.insert((a.min(b), a.max(b))) {
            duplicates += 1;
        }
    }

    let mut degree = vec![0usize; vertices.len()];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let keep: Vec<usize> = (0..vertices.len()).filter(|&v| !drop_isolated || degree[v] > 0).collect();
    let dropped_isolated = (0..vertices.len())
        .filter(|&v| drop_isolated && degree[v] == 0)
        .map(|v| vertices[v].clone())
        .collect();
    let mut position = vec![usize::MAX; vertices.len()];
    for (new, &old) in keep.iter().enumerate() {
        position[old] = new;
    }
    let n = keep.len();
    let mut matrix = Array2::zeros((n, n));
    for &(a, b) in &edges {
        let (i, j) = (position[a], position[b]);
        matrix[[i, j]] = 1.0;
        matrix[[j, i]] = 1.0;
    }
    Ok(EdgeList {
        vertices: keep.iter().map(|&v| vertices[v].clone()).collect(),
        adjacency: Adjacency::from_matrix(matrix)?,
        self_loops,
        duplicates,
        dropped_isolated,
    })
}

/// Writes one `i j` line per edge with `i < j`, using `names` as vertex
/// tokens when given and 0-based indices otherwise.
pub fn write_edgelist(a: &Adjacency, names: Option<&[String]>, mut out: impl Write) -> Result<()> {
    let n = a.n();
    if let Some(names) = names {
        if names.len() != n {
            return Err(Error::invalid(format!("{} names for {n} vertices", names.len())));
        }
    }
    let name = |i: usize| names.map_or_else(|| i.to_string(), |ns| ns[i].clone());
    let m = a.matrix();
    for i in 0..n {
        for j in (i + 1)..n {
            if m[[i, j]] != 0.0 {
                writeln!(out, "{} {}", name(i), name(j))?;
            }
        }
    }
    Ok(())
}

/// Ground-truth labels aligned to a vertex list.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    /// 0-based class ids, one per vertex.
    pub ids: Vec<usize>,
    /// Class tokens sorted; id `c` is `classes[c]`.
    pub classes: Vec<String>,
}

impl Labels {
    /// Assigns ids to label tokens in sorted token order.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Labels {
        let classes: Vec<String> = tokens
            .iter()
            .map(|t| t.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let ids = tokens
            .iter()
            .map(|t| classes.binary_search_by(|c| c.as_str().cmp(t.as_ref())).expect("token collected above"))
            .collect();
        Labels { ids, classes }
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }
}

/// Reads a `vertex,label` CSV with a header row.
pub fn read_label_map(reader: impl Read) -> Result<HashMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut map = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() < 2 {
            return Err(Error::invalid(format!("label row {:?} has fewer than two fields", row)));
        }
        map.insert(row[0].to_string(), row[1].to_string());
    }
    Ok(map)
}

pub fn load_labels(path: &Path, vertices: &[String]) -> Result<Labels> {
    align_labels(&read_label_map(File::open(path)?)?, vertices)
}

/// Looks up every vertex; fails listing all vertices without a label.
pub fn align_labels(map: &HashMap<String, String>, vertices: &[String]) -> Result<Labels> {
    let missing: Vec<String> = vertices.iter().filter(|v| !map.contains_key(*v)).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }
    let tokens: Vec<&str> = vertices.iter().map(|v| map[v].as_str()).collect();
    Ok(Labels::from_tokens(&tokens))
}

/// Writes a `vertex,label` CSV with 1-based labels.
pub fn write_labels(vertices: &[String], labels: &[usize], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vertex", "label"])?;
    for (v, &l) in vertices.iter().zip(labels) {
        w.write_record([v.as_str(), &(l + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Dense numeric matrix, one row per line, fields split on commas and/or
/// whitespace.
pub fn read_matrix(reader: impl BufRead, source: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: source.to_string(),
            line: lineno + 1,
            message,
        };
        let row = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("{t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(format!("expected {} fields, found {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j]))
}

/// Plain label file: one token per line, in matrix row order.
pub fn read_label_lines(reader: impl BufRead) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

/// Binarizes a similarity matrix: `A_ij = 1` when `(S_ij + S_ji)/2 ≥ threshold`, `i ≠ j`.
pub fn threshold_similarity(s: ArrayView2<'_, f64>, threshold: f64) -> Result<Adjacency> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::invalid(format!("similarity matrix is {:?}, not square", s.dim())));
    }
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if 0.5 * (s[[i, j]] + s[[j, i]]) >= threshold {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
        }
    }
    Adjacency::from_matrix(a)
}

/// Threshold that keeps the given fraction of off-diagonal pairs.
pub fn density_threshold(s: ArrayView2<'_, f64>, density: f64) -> Result<f64> {
    let n = s.nrows();
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid(format!("density {density} must be in (0, 1]")));
    }
    let mut vals: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| 0.5 * (s[[i, j]] + s[[j, i]]))
        .collect();
    if vals.is_empty() {
        return Err(Error::invalid("similarity matrix has no off-diagonal pairs"));
    }
    vals.sort_by(|a, b| b.total_cmp(a));
    let keep = ((density * vals.len() as f64).ceil() as usize).clamp(1, vals.len());
    Ok(vals[keep - 1])
}

/// Indices of vertices whose class is among the `k` most frequent, ties
/// broken by class id.
pub fn top_classes(labels: &[usize], k: usize) -> Vec<usize> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts: Vec<(usize, usize)> = (0..classes).map(|c| (labels.iter().filter(|&&l| l == c).count(), c)).collect();
    counts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let chosen: BTreeSet<usize> = counts.iter().take(k).map(|&(_, c)| c).collect();
    (0..labels.len()).filter(|&i| chosen.contains(&labels[i])).collect()
}
