//! CSV traces of geodesics.

use std::fmt::Write as _;
use std::path::Path;

use finsler_core::{GeodesicPath, MetricModel};

/// Writes `t,x1..xn,v1..vn`, one row per node, with 17 significant digits.
/// Nodes stored in another chart are expressed in the chart of the first
/// node, so every row uses the same coordinates.
pub fn emit_geodesic_csv(path: &Path, model: &MetricModel, geo: &GeodesicPath) -> Result<(), String> {
    let nodes = geo.nodes();
    if nodes.is_empty() {
        return Err(format!("{}: geodesic path has no nodes", path.display()));
    }
    let n = geo.dim;
    let chart = nodes[0].chart;
    let mut out = String::from("t");
    for prefix in ["x", "v"] {
        for i in 1..=n {
            write!(out, ",{prefix}{i}").unwrap();
        }
    }
    out.push('\n');
    for node in nodes {
        let (p, v) = model
            .tangent_to_chart(&node.point(n), node.v(n), chart)
            .ok_or_else(|| format!("{}: node at t = {} cannot be expressed in chart {chart}", path.display(), node.t))?;
        write!(out, "{:.16e}", node.t).unwrap();
        for value in p.x.iter().chain(&v) {
            write!(out, ",{value:.16e}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| format!("{}: {e}", path.display()))
}
