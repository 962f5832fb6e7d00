//! On-disk formats: graph JSON, CSV edge lists and attribute tables,
//! partition and assignment CSV, curvature and flow-history CSV, coarse
//! graphs with provenance, and JSON report helpers.
//!
//! Integer fields round-trip bit-exactly. Reals are written in shortest
//! round-trip decimal form, which re-parses to the identical bit
//! pattern and therefore subsumes a 17-significant-digit guarantee.
//! Writers are deterministic: the same data always produces byte-identical
//! files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curvature::EdgeCurvatures;
use crate::graph::{build_graph, Graph};
use crate::pooling::{Assignment, CoarsenedGraph};
use crate::{Error, Result};

/// JSON schema for a graph on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attributes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
}

impl GraphFile {
    fn from_graph(g: &Graph) -> GraphFile {
        GraphFile {
            n: g.node_count(),
            edges: g.edges().iter().map(|e| (e.u, e.v, e.w)).collect(),
            attributes: g.attributes().map(|a| a.to_vec()),
            labels: g.labels().map(|l| l.to_vec()),
        }
    }

    fn into_graph(self) -> Result<Graph> {
        let g = build_graph(&self.edges, self.n, self.attributes)?;
        match self.labels {
            Some(l) => g.with_labels(l),
            None => Ok(g),
        }
    }
}

/// Origin of a coarse graph: flow iterations, cluster count, selection
/// mode, and the seed that drove it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    /// Flow iterations applied before selection.
    pub t: usize,
    /// Requested number of supernodes.
    pub k: usize,
    /// Selection mode name (`"spectral"` or `"trained"`).
    pub mode: String,
    /// Seed that drove selection randomness.
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CoarseFile {
    #[serde(flatten)]
    graph: GraphFile,
    provenance: Provenance,
}

/// Serialize a graph to the JSON schema.
pub fn graph_to_json_string(g: &Graph) -> String {
    let mut s = serde_json::to_string_pretty(&GraphFile::from_graph(g))
        .expect("graph serialization cannot fail");
    s.push('\n');
    s
}

/// Parse a graph from the JSON schema.
pub fn graph_from_json_str(text: &str) -> Result<Graph> {
    let file: GraphFile = serde_json::from_str(text)
        .map_err(|e| Error::Validation(format!("graph JSON does not match the schema: {}", e)))?;
    file.into_graph()
}

/// Write a graph as JSON.
pub fn write_graph_json<P: AsRef<Path>>(g: &Graph, path: P) -> Result<()> {
    fs::write(path, graph_to_json_string(g))?;
    Ok(())
}

/// Read a graph from JSON.
pub fn read_graph_json<P: AsRef<Path>>(path: P) -> Result<Graph> {
    graph_from_json_str(&fs::read_to_string(path)?)
}

/// Write a coarse graph with its provenance block. The payload uses the
/// plain graph schema plus a `provenance` object, so coarse graphs load
/// back through [`read_graph_json`] as ordinary graphs.
pub fn write_coarse_json<P: AsRef<Path>>(
    coarse: &CoarsenedGraph,
    provenance: &Provenance,
    path: P,
) -> Result<()> {
    let file = CoarseFile {
        graph: GraphFile::from_graph(&coarse.graph),
        provenance: provenance.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("coarse serialization cannot fail");
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn parses_as<T: std::str::FromStr>(field: &str) -> bool {
    field.trim().parse::<T>().is_ok()
}

/// Write a graph as a `u,v,w` edge list with a header row.
pub fn write_edge_list_csv<P: AsRef<Path>>(g: &Graph, path: P) -> Result<()> {
    let mut out = String::from("u,v,w\n");
    for e in g.edges() {
        out.push_str(&format!("{},{},{}\n", e.u, e.v, e.w));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a `u,v[,w]` edge list (header optional, default weight 1). The
/// node count is one past the largest endpoint.
pub fn read_edge_list_csv<P: AsRef<Path>>(path: P) -> Result<Graph> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && !parses_as::<usize>(fields[0]) {
            continue; // header row
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Validation(format!(
                "edge list line {} has {} fields, expected u,v[,w]",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_node = |f: &str| -> Result<usize> {
            f.parse().map_err(|_| {
                Error::Validation(format!("edge list line {}: bad node id {:?}", lineno + 1, f))
            })
        };
        let u = parse_node(fields[0])?;
        let v = parse_node(fields[1])?;
        let w = if fields.len() == 3 {
            fields[2].parse().map_err(|_| {
                Error::Validation(format!(
                    "edge list line {}: bad weight {:?}",
                    lineno + 1,
                    fields[2]
                ))
            })?
        } else {
            1.0
        };
        edges.push((u, v, w));
    }
    if edges.is_empty() {
        return Err(Error::Validation(
            "edge list contains no edges".to_string(),
        ));
    }
    let n = edges.iter().map(|&(u, v, _)| u.max(v)).max().unwrap() + 1;
    build_graph(&edges, n, None)
}

/// Write node attributes, one CSV row per node.
pub fn write_attributes_csv<P: AsRef<Path>>(attributes: &[Vec<f64>], path: P) -> Result<()> {
    let mut out = String::new();
    for row in attributes {
        let cells: Vec<String> = row.iter().map(|x| format!("{}", x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read node attributes (one row per node, header optional, uniform
/// width).
pub fn read_attributes_csv<P: AsRef<Path>>(path: P) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && !parses_as::<f64>(fields[0]) {
            continue; // header row
        }
        let mut row = Vec::with_capacity(fields.len());
        for f in &fields {
            row.push(f.parse().map_err(|_| {
                Error::Validation(format!(
                    "attribute line {}: bad value {:?}",
                    lineno + 1,
                    f
                ))
            })?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Validation(format!(
                    "attribute line {} has {} columns, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Validation("attribute table is empty".to_string()));
    }
    Ok(rows)
}

fn write_labeled_csv<P: AsRef<Path>>(header: &str, labels: &[usize], path: P) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for (node, &label) in labels.iter().enumerate() {
        out.push_str(&format!("{},{}\n", node, label));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a partition as `node,label` rows.
pub fn write_partition_csv<P: AsRef<Path>>(labels: &[usize], path: P) -> Result<()> {
    write_labeled_csv("node,label", labels, path)
}

/// Write a hard assignment as `node,cluster` rows.
pub fn write_assignment_csv<P: AsRef<Path>>(assignment: &Assignment, path: P) -> Result<()> {
    write_labeled_csv("node,cluster", &assignment.labels(), path)
}

/// Read a partition from `node,label` rows (header optional, any row
/// order). Every node in `0..n` must appear exactly once.
pub fn read_partition_csv<P: AsRef<Path>>(path: P) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && !parses_as::<usize>(fields[0]) {
            continue; // header row
        }
        if fields.len() != 2 {
            return Err(Error::Validation(format!(
                "partition line {} has {} fields, expected node,label",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |f: &str| -> Result<usize> {
            f.parse().map_err(|_| {
                Error::Validation(format!(
                    "partition line {}: bad integer {:?}",
                    lineno + 1,
                    f
                ))
            })
        };
        pairs.push((parse(fields[0])?, parse(fields[1])?));
    }
    let n = pairs.len();
    if n == 0 {
        return Err(Error::Validation("partition table is empty".to_string()));
    }
    let mut labels = vec![usize::MAX; n];
    for (node, label) in pairs {
        if node >= n {
            return Err(Error::Validation(format!(
                "partition names node {} but only {} rows exist",
                node, n
            )));
        }
        if labels[node] != usize::MAX {
            return Err(Error::Validation(format!(
                "partition lists node {} twice",
                node
            )));
        }
        labels[node] = label;
    }
    Ok(labels)
}

/// Write per-edge curvatures as `u,v,kappa` rows (plus
/// `kappa_low,kappa_up` columns when bounds are present), in the
/// graph's canonical edge order.
pub fn write_curvature_csv<P: AsRef<Path>>(
    curvatures: &EdgeCurvatures,
    g: &Graph,
    path: P,
) -> Result<()> {
    if curvatures.values.len() != g.edge_count() {
        return Err(Error::Parameter(format!(
            "{} curvature values for {} edges",
            curvatures.values.len(),
            g.edge_count()
        )));
    }
    let mut out = String::new();
    match &curvatures.bounds {
        Some(bounds) => {
            out.push_str("u,v,kappa,kappa_low,kappa_up\n");
            for (i, e) in g.edges().iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    e.u, e.v, curvatures.values[i], bounds[i].0, bounds[i].1
                ));
            }
        }
        None => {
            out.push_str("u,v,kappa\n");
            for (i, e) in g.edges().iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", e.u, e.v, curvatures.values[i]));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a flow weight history as `t,u,v,w` rows: one block per
/// recorded iteration (starting at `t = 0`), edges in canonical order.
pub fn write_history_csv<P: AsRef<Path>>(
    history: &[Vec<f64>],
    g: &Graph,
    path: P,
) -> Result<()> {
    if history.is_empty() {
        return Err(Error::Parameter(
            "flow history is empty — rerun with history recording enabled".to_string(),
        ));
    }
    let mut out = String::from("t,u,v,w\n");
    for (t, weights) in history.iter().enumerate() {
        if weights.len() != g.edge_count() {
            return Err(Error::Parameter(format!(
                "history step {} has {} weights for {} edges",
                t,
                weights.len(),
                g.edge_count()
            )));
        }
        for (e, &w) in g.edges().iter().zip(weights) {
            out.push_str(&format!("{},{},{},{}\n", t, e.u, e.v, w));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// One row of tidy plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    /// Iteration index.
    pub t: usize,
    /// Series key (for example an edge name or a metric name).
    pub key: String,
    /// Value at `(t, key)`.
    pub value: f64,
}

/// Write tidy `t,key,value` plot data.
pub fn write_plot_csv<P: AsRef<Path>>(rows: &[PlotRow], path: P) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Parameter("plot data is empty".to_string()));
    }
    let mut out = String::from("t,key,value\n");
    for row in rows {
        if row.key.contains(',') || row.key.contains('\n') {
            return Err(Error::Validation(format!(
                "plot key {:?} contains a delimiter",
                row.key
            )));
        }
        out.push_str(&format!("{},{},{}\n", row.t, row.key, row.value));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a modularity (or any scalar) series as `t,Q` rows.
pub fn write_series_csv<P: AsRef<Path>>(series: &[f64], path: P) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Parameter("series is empty".to_string()));
    }
    let mut out = String::from("t,Q\n");
    for (t, &q) in series.iter().enumerate() {
        out.push_str(&format!("{},{}\n", t, q));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write any serializable report as pretty JSON with a trailing
/// newline.
pub fn write_json_report<T: Serialize, P: AsRef<Path>>(value: &T, path: P) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Validation(format!("report serialization failed: {}", e)))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{orc_all, CurvatureMethod};
    use crate::flow::{ricci_flow, FlowOptions};
    use crate::graph::generate_dumbbell;
    use crate::pooling::{pool, PoolConfig, PoolMode};

    fn awkward_graph() -> Graph {
        let attrs = vec![
            vec![0.1 + 0.2, 1.0 / 3.0],
            vec![-7.25e-9, 2.0f64.sqrt()],
            vec![1e17, 0.0],
        ];
        build_graph(&[(0, 1, 1.0 / 3.0), (1, 2, 0.7)], 3, Some(attrs))
            .unwrap()
            .with_labels(vec![0, 1, 1])
            .unwrap()
    }

    #[test]
    fn graph_json_round_trips_bitwise() {
        let g = awkward_graph();
        let text = graph_to_json_string(&g);
        let back = graph_from_json_str(&text).unwrap();
        assert_eq!(back.node_count(), g.node_count());
        for (a, b) in g.edges().iter().zip(back.edges()) {
            assert_eq!((a.u, a.v), (b.u, b.v));
            assert_eq!(a.w.to_bits(), b.w.to_bits());
        }
        assert_eq!(g.attributes(), back.attributes());
        assert_eq!(g.labels(), back.labels());
        // Determinism: serializing again is byte-identical.
        assert_eq!(text, graph_to_json_string(&back));
    }

    #[test]
    fn graph_json_rejects_schema_violations() {
        assert!(graph_from_json_str("{\"edges\": []}").is_err());
        assert!(graph_from_json_str("not json").is_err());
        // Out-of-range endpoint caught by graph validation.
        assert!(graph_from_json_str("{\"n\": 2, \"edges\": [[0, 5, 1.0]]}").is_err());
    }

    #[test]
    fn optional_json_fields_stay_optional() {
        let g = build_graph(&[(0, 1, 2.5)], 2, None).unwrap();
        let text = graph_to_json_string(&g);
        assert!(!text.contains("attributes"));
        assert!(!text.contains("labels"));
        let back = graph_from_json_str(&text).unwrap();
        assert!(back.attributes().is_none());
        assert!(back.labels().is_none());
    }

    #[test]
    fn edge_list_round_trips_and_defaults_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.csv");
        let g = build_graph(&[(0, 2, 0.125), (1, 2, 3.0)], 3, None).unwrap();
        write_edge_list_csv(&g, &path).unwrap();
        let back = read_edge_list_csv(&path).unwrap();
        assert_eq!(back.node_count(), 3);
        for (a, b) in g.edges().iter().zip(back.edges()) {
            assert_eq!((a.u, a.v), (b.u, b.v));
            assert_eq!(a.w.to_bits(), b.w.to_bits());
        }
        // Two-column form without a header defaults weights to 1.
        let path2 = dir.path().join("bare.csv");
        fs::write(&path2, "0,1\n1,2\n").unwrap();
        let bare = read_edge_list_csv(&path2).unwrap();
        assert!(bare.edges().iter().all(|e| e.w == 1.0));
        assert_eq!(bare.edge_count(), 2);
    }

    #[test]
    fn malformed_edge_lists_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "u,v,w\n0\n").unwrap();
        assert!(read_edge_list_csv(&path).is_err());
        fs::write(&path, "0,1,abc\n").unwrap();
        assert!(read_edge_list_csv(&path).is_err());
        fs::write(&path, "u,v,w\n").unwrap();
        assert!(read_edge_list_csv(&path).is_err());
        assert!(read_edge_list_csv(dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn attribute_table_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("attrs.csv");
        let attrs = vec![vec![0.1, -2.0], vec![1.0 / 7.0, 1e-300]];
        write_attributes_csv(&attrs, &path).unwrap();
        let back = read_attributes_csv(&path).unwrap();
        assert_eq!(attrs.len(), back.len());
        for (a, b) in attrs.iter().zip(&back) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        fs::write(&path, "x,y\n1.0,2.0\n3.0\n").unwrap();
        assert!(read_attributes_csv(&path).is_err());
    }

    #[test]
    fn partition_round_trips_in_any_row_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("part.csv");
        write_partition_csv(&[1, 0, 2, 1], &path).unwrap();
        assert_eq!(read_partition_csv(&path).unwrap(), vec![1, 0, 2, 1]);
        fs::write(&path, "node,label\n2,5\n0,3\n1,4\n").unwrap();
        assert_eq!(read_partition_csv(&path).unwrap(), vec![3, 4, 5]);
        fs::write(&path, "0,1\n0,2\n").unwrap();
        assert!(read_partition_csv(&path).is_err());
        fs::write(&path, "0,1\n5,2\n").unwrap();
        assert!(read_partition_csv(&path).is_err());
    }

    #[test]
    fn assignment_export_uses_cluster_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let a = Assignment::from_labels(&[0, 1, 0], 2).unwrap();
        write_assignment_csv(&a, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "node,cluster\n0,0\n1,1\n2,0\n");
    }

    #[test]
    fn curvature_csv_orders_rows_canonically() {
        let dir = tempfile::tempdir().unwrap();
        let (g, _) = generate_dumbbell(3, 1).unwrap();
        let exact = orc_all(&g, 0.0, CurvatureMethod::Exact, 1).unwrap();
        let path = dir.path().join("kappa.csv");
        write_curvature_csv(&exact, &g, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("u,v,kappa"));
        assert_eq!(text.lines().count(), g.edge_count() + 1);
        let bounded = orc_all(&g, 0.0, CurvatureMethod::Combinatorial, 1).unwrap();
        let path2 = dir.path().join("kappa_bounds.csv");
        write_curvature_csv(&bounded, &g, &path2).unwrap();
        let text2 = fs::read_to_string(&path2).unwrap();
        assert!(text2.starts_with("u,v,kappa,kappa_low,kappa_up\n"));
        let first = text2.lines().nth(1).unwrap();
        assert_eq!(first.split(',').count(), 5);
    }

    #[test]
    fn history_csv_has_one_block_per_iteration() {
        let dir = tempfile::tempdir().unwrap();
        let (g, _) = generate_dumbbell(3, 1).unwrap();
        let opts = FlowOptions {
            record_history: true,
            ..FlowOptions::default()
        };
        let (_, state) = ricci_flow(&g, 2, &opts).unwrap();
        let history = state.history.unwrap();
        let path = dir.path().join("history.csv");
        write_history_csv(&history, &g, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * g.edge_count());
        assert!(text.starts_with("t,u,v,w\n0,"));
        assert!(write_history_csv(&[], &g, dir.path().join("e.csv")).is_err());
    }

    #[test]
    fn coarse_json_carries_provenance_and_reloads_as_a_graph() {
        let dir = tempfile::tempdir().unwrap();
        let (g, _) = generate_dumbbell(4, 1).unwrap();
        let coarse = pool(&g, 2, 1, PoolMode::Spectral, &PoolConfig::default()).unwrap();
        let prov = Provenance {
            t: 1,
            k: 2,
            mode: "spectral".to_string(),
            seed: 0,
        };
        let path = dir.path().join("coarse.json");
        write_coarse_json(&coarse, &prov, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"provenance\""));
        assert!(text.contains("\"mode\": \"spectral\""));
        let back = read_graph_json(&path).unwrap();
        assert_eq!(back.node_count(), 2);
    }

    #[test]
    fn plot_and_series_writers_validate_input() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            PlotRow {
                t: 0,
                key: "0-1".to_string(),
                value: 1.0,
            },
            PlotRow {
                t: 1,
                key: "0-1".to_string(),
                value: 0.5,
            },
        ];
        let path = dir.path().join("plot.csv");
        write_plot_csv(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,key,value\n0,0-1,1\n1,0-1,0.5\n");
        assert!(write_plot_csv(&[], dir.path().join("x.csv")).is_err());
        let bad = vec![PlotRow {
            t: 0,
            key: "a,b".to_string(),
            value: 0.0,
        }];
        assert!(write_plot_csv(&bad, dir.path().join("y.csv")).is_err());
        let spath = dir.path().join("series.csv");
        write_series_csv(&[0.5, 0.25], &spath).unwrap();
        assert_eq!(
            fs::read_to_string(&spath).unwrap(),
            "t,Q\n0,0.5\n1,0.25\n"
        );
        assert!(write_series_csv(&[], dir.path().join("z.csv")).is_err());
    }
}
