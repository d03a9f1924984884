use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Edge, RoadGraph};

/// A road graph together with any non-fatal problems found while loading it.
#[derive(Clone, Debug)]
pub struct LoadedEdges {
    pub graph: RoadGraph,
    pub warnings: Vec<String>,
}

/// Reads a `from,to,distance` CSV whose ids refer to `node_ids`.
///
/// A repeated `(from, to)` pair keeps the distance of its last occurrence
/// and produces a warning.
pub fn load_edges_csv(path: impl AsRef<Path>, node_ids: &[String]) -> Result<LoadedEdges> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let ingest = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| ingest(format!("unreadable header: {e}")))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["from", "to", "distance"] {
        return Err(ingest("header must be 'from,to,distance'".into()));
    }

    let index: HashMap<&str, usize> = node_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut edges: Vec<Edge> = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut warnings = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ingest(e.to_string()))?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(ingest(format!("row {row} has {} fields, expected 3", record.len())));
        }
        let lookup = |col: usize| {
            index
                .get(&record[col])
                .copied()
                .ok_or_else(|| ingest(format!("row {row}: unknown node id '{}'", &record[col])))
        };
        let (from, to) = (lookup(0)?, lookup(1)?);
        let distance: f64 = record[2].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: 3,
            message: format!("non-numeric distance '{}'", &record[2]),
        })?;
        if let Some(&pos) = seen.get(&(from, to)) {
            let msg = format!(
                "row {row}: duplicate edge {}->{}, keeping distance {distance}",
                &record[0], &record[1]
            );
            log::warn!("{}: {msg}", path.display());
            warnings.push(msg);
            edges[pos].distance = distance;
        } else {
            seen.insert((from, to), edges.len());
            edges.push(Edge { from, to, distance });
        }
    }
    let graph = RoadGraph::new(node_ids.to_vec(), edges).map_err(|e| ingest(e.to_string()))?;
    Ok(LoadedEdges { graph, warnings })
}

pub fn write_edges_csv(graph: &RoadGraph, path: impl AsRef<Path>, header: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(header.as_bytes()).map_err(io)?;
    writeln!(w, "from,to,distance").map_err(io)?;
    let ids = graph.node_ids();
    for e in graph.edges() {
        writeln!(w, "{},{},{}", ids[e.from], ids[e.to], e.distance).map_err(io)?;
    }
    w.flush().map_err(io)
}
