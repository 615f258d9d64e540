//! Dataset directory format.
//!
//! ```text
//! meta.json   {"num_nodes": N, "num_features": F, "num_classes": J}
//! nodes.csv   node_id,label,f_0,...,f_{F-1}     one row per node
//! edges.csv   src,dst                           one row per undirected edge
//! masks.json  {"train": [..], "val": [..], "test": [..]}   (optional)
//! ```
//!
//! Ids are 0-based. A first line whose leading field is not an integer is
//! treated as a header and skipped. Reals are written in Rust's shortest
//! round-trip form, so write → load reproduces the graph exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Graph, Masks};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .skip_while(|(_, l)| {
            l.split(',')
                .next()
                .map(|f| f.trim().parse::<usize>().is_err())
                .unwrap_or(false)
        })
}

fn field<T: std::str::FromStr>(raw: Option<&str>, file: &str, line: usize) -> Result<T> {
    let raw = raw.ok_or_else(|| Error::Dataset(format!("{file}:{line}: missing field")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Dataset(format!("{file}:{line}: cannot parse {raw:?}")))
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let meta: Meta = serde_json::from_str(&read(&dir.join("meta.json"))?)?;

    let mut features = Array2::zeros((meta.num_nodes, meta.num_features));
    let mut labels = vec![usize::MAX; meta.num_nodes];
    let nodes = read(&dir.join("nodes.csv"))?;
    for (line, row) in data_lines(&nodes) {
        let mut it = row.split(',');
        let id: usize = field(it.next(), "nodes.csv", line)?;
        let label: usize = field(it.next(), "nodes.csv", line)?;
        if id >= meta.num_nodes {
            return Err(Error::Dataset(format!(
                "nodes.csv:{line}: node id {id} not below {}",
                meta.num_nodes
            )));
        }
        if labels[id] != usize::MAX {
            return Err(Error::Dataset(format!("nodes.csv:{line}: duplicate node {id}")));
        }
        labels[id] = label;
        let mut width = 0;
        for (j, raw) in it.enumerate() {
            if j >= meta.num_features {
                width = j + 1;
                continue;
            }
            features[[id, j]] = field(Some(raw), "nodes.csv", line)?;
            width = j + 1;
        }
        if width != meta.num_features {
            return Err(Error::Dataset(format!(
                "nodes.csv:{line}: {width} features, expected {}",
                meta.num_features
            )));
        }
    }
    if let Some(missing) = labels.iter().position(|&l| l == usize::MAX) {
        return Err(Error::Dataset(format!("nodes.csv: node {missing} missing")));
    }

    let edges_text = read(&dir.join("edges.csv"))?;
    let mut edges = Vec::new();
    for (line, row) in data_lines(&edges_text) {
        let mut it = row.split(',');
        let a: usize = field(it.next(), "edges.csv", line)?;
        let b: usize = field(it.next(), "edges.csv", line)?;
        edges.push((a, b));
    }

    let graph = Graph::new(features, labels, meta.num_classes, edges)?;
    let masks_path = dir.join("masks.json");
    if masks_path.exists() {
        let masks: Masks = serde_json::from_str(&read(&masks_path)?)?;
        graph.with_masks(masks)
    } else {
        Ok(graph)
    }
}

/// Writes `g` in the directory format read by [`load_dataset`].
pub fn write_dataset(g: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        num_nodes: g.num_nodes,
        num_features: g.num_features(),
        num_classes: g.num_classes,
    };
    let write = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    write("meta.json", serde_json::to_string_pretty(&meta)?)?;

    let mut nodes = String::new();
    for (v, row) in g.features.rows().into_iter().enumerate() {
        write!(nodes, "{v},{}", g.labels[v]).unwrap();
        for x in row {
            write!(nodes, ",{x}").unwrap();
        }
        nodes.push('\n');
    }
    write("nodes.csv", nodes)?;

    let mut edges = String::new();
    for &(a, b) in &g.edges {
        writeln!(edges, "{a},{b}").unwrap();
    }
    write("edges.csv", edges)?;

    if let Some(m) = &g.masks {
        write("masks.json", serde_json::to_string(m)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn empty_edges_gives_isolated_nodes() {
        let d = tmp();
        fs::write(
            d.path().join("meta.json"),
            r#"{"num_nodes":3,"num_features":1,"num_classes":2}"#,
        )
        .unwrap();
        fs::write(d.path().join("nodes.csv"), "0,0,1.5\n1,1,2\n2,0,0\n").unwrap();
        fs::write(d.path().join("edges.csv"), "").unwrap();
        let g = load_dataset(d.path()).unwrap();
        assert_eq!(g.num_nodes, 3);
        assert!(g.edges.is_empty());
        assert_eq!(g.features[[0, 0]], 1.5);
        assert!(g.masks.is_none());
    }

    #[test]
    fn self_loop_is_dropped() {
        let d = tmp();
        fs::write(
            d.path().join("meta.json"),
            r#"{"num_nodes":2,"num_features":1,"num_classes":1}"#,
        )
        .unwrap();
        fs::write(d.path().join("nodes.csv"), "node_id,label,f0\n0,0,1\n1,0,1\n").unwrap();
        fs::write(d.path().join("edges.csv"), "src,dst\n0,1\n0,0\n").unwrap();
        let g = load_dataset(d.path()).unwrap();
        assert_eq!(g.edges, vec![(0, 1)]);
    }

    #[test]
    fn error_paths() {
        let d = tmp();
        assert!(matches!(load_dataset(d.path()), Err(Error::Io { .. })));

        fs::write(
            d.path().join("meta.json"),
            r#"{"num_nodes":2,"num_features":2,"num_classes":2}"#,
        )
        .unwrap();
        fs::write(d.path().join("edges.csv"), "0,1\n").unwrap();

        fs::write(d.path().join("nodes.csv"), "0,0,1\n1,0,1,2\n").unwrap();
        assert!(matches!(load_dataset(d.path()), Err(Error::Dataset(_))));

        fs::write(d.path().join("nodes.csv"), "0,0,1,1\n1,5,1,2\n").unwrap();
        assert!(matches!(load_dataset(d.path()), Err(Error::Dataset(_))));

        fs::write(d.path().join("nodes.csv"), "0,0,1,1\n1,1,1,2\n").unwrap();
        fs::write(d.path().join("edges.csv"), "0,7\n").unwrap();
        assert!(matches!(load_dataset(d.path()), Err(Error::Dataset(_))));
    }

    #[test]
    fn write_then_load_is_identity() {
        let g = Graph::new(
            array![[0.1, -2.5e-7], [std::f64::consts::PI, 1e300], [0.0, 3.0]],
            vec![1, 0, 1],
            2,
            [(0, 2), (1, 2)],
        )
        .unwrap()
        .with_masks(Masks {
            train: vec![0],
            val: vec![1],
            test: vec![2],
        })
        .unwrap();
        let d = tmp();
        write_dataset(&g, d.path()).unwrap();
        assert_eq!(load_dataset(d.path()).unwrap(), g);
    }
}
