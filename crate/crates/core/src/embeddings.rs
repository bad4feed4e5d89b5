//! Token vectors for vocabulary refinement.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Token string to dense vector, all of one dimensionality.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

/// Result of [`load_embeddings`].
#[derive(Debug, Clone)]
pub struct LoadedEmbeddings {
    pub table: EmbeddingTable,
    /// Tokens seen more than once; the last row wins.
    pub duplicate_warnings: usize,
    pub zero_vectors: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    /// Inserts a vector, returning the previous one for the token.
    pub fn insert(&mut self, token: impl Into<String>, v: Vec<f64>) -> Result<Option<Vec<f64>>> {
        if v.len() != self.dim {
            return Err(Error::InvalidConfig(format!(
                "vector of length {} in table of dimension {}",
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("non-finite embedding component".into()));
        }
        Ok(self.vectors.insert(token.into(), v))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Writes the plain-text format read by [`load_embeddings`].
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (tok, v) in &self.vectors {
            let mut line = tok.clone();
            for x in v {
                line.push(' ');
                line.push_str(&x.to_string());
            }
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads `token c1 c2 ...` lines. A leading `count dim` header is skipped.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<LoadedEmbeddings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table: Option<EmbeddingTable> = None;
    let mut duplicate_warnings = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if values.is_empty() {
            return Err(Error::parse(path, i + 1, "token without components"));
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if values.len() != t.dim {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {} components, found {}", t.dim, values.len()),
            ));
        }
        if t.insert(fields[0], values).map_err(|e| Error::parse(path, i + 1, e.to_string()))?.is_some() {
            duplicate_warnings += 1;
        }
    }
    let table = table.unwrap_or_default();
    let zero_vectors = table.vectors.values().filter(|v| v.iter().all(|&x| x == 0.0)).count();
    Ok(LoadedEmbeddings {
        table,
        duplicate_warnings,
        zero_vectors,
    })
}

/// Vector of a token: its own row for a plain token, the component-wise mean
/// of the known component rows for an underscore-joined n-gram.
pub fn collocation_vector(table: &EmbeddingTable, token: &str) -> Option<Vec<f64>> {
    if !token.contains('_') {
        return table.get(token).map(<[f64]>::to_vec);
    }
    let known: Vec<&[f64]> = token.split('_').filter_map(|c| table.get(c)).collect();
    if known.is_empty() {
        return None;
    }
    let mut mean = vec![0.0; table.dim()];
    for v in &known {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    let n = known.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Some(mean)
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}
