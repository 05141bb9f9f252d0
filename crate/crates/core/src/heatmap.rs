//! Static SVG heatmaps of a biclustered matrix.
//!
//! Rows and columns are grouped by cluster (in label order) and, inside each
//! cluster, ordered by an average-linkage dendrogram. Cells use a blue-white-red
//! scale symmetric about zero. A bicluster block whose cells all map to the
//! same colour is drawn as one rectangle; other blocks are drawn cell by cell.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1, Axis};

use crate::biclusters::Partition;
use crate::error::{Result, SubicError};
use crate::weights::Axis2;

/// Leaf order of an average-linkage (UPGMA) dendrogram over `items`, using
/// Euclidean distance between their rows (or columns) of `x`.
///
/// Ties between candidate merges go to the lowest index pair, and each merge
/// puts the cluster holding the smaller original index on the left, so the
/// order is fully deterministic.
pub fn average_linkage_order(x: &Array2<f64>, axis: Axis2, items: &[usize]) -> Vec<usize> {
    let m = items.len();
    if m <= 2 {
        return items.to_vec();
    }
    let ax = match axis {
        Axis2::Rows => Axis(0),
        Axis2::Columns => Axis(1),
    };
    let vecs: Vec<ArrayView1<f64>> = items.iter().map(|&i| x.index_axis(ax, i)).collect();
    let mut dist = vec![vec![0.0f64; m]; m];
    for a in 0..m {
        for b in a + 1..m {
            let d = vecs[a]
                .iter()
                .zip(vecs[b].iter())
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            dist[a][b] = d;
            dist[b][a] = d;
        }
    }
    // leaves[c] is the leaf order of cluster c while alive[c]
    let mut leaves: Vec<Vec<usize>> = (0..m).map(|a| vec![a]).collect();
    let mut alive = vec![true; m];
    for _ in 1..m {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..m {
            if !alive[a] {
                continue;
            }
            for b in a + 1..m {
                if alive[b] && best.is_none_or(|(d, _, _)| dist[a][b] < d) {
                    best = Some((dist[a][b], a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two live clusters");
        let (na, nb) = (leaves[a].len() as f64, leaves[b].len() as f64);
        for k in 0..m {
            if alive[k] && k != a && k != b {
                let d = (na * dist[k][a] + nb * dist[k][b]) / (na + nb);
                dist[k][a] = d;
                dist[a][k] = d;
            }
        }
        let right = std::mem::take(&mut leaves[b]);
        leaves[a].extend(right);
        alive[b] = false;
    }
    let root = alive.iter().position(|&v| v).unwrap_or(0);
    leaves[root].iter().map(|&l| items[l]).collect()
}

/// Display order along one axis: clusters in label order, each internally
/// ordered by average linkage.
pub fn display_order(x: &Array2<f64>, axis: Axis2, part: &Partition) -> Vec<usize> {
    part.members()
        .iter()
        .flat_map(|members| average_linkage_order(x, axis, members))
        .collect()
}

/// Diverging colour for `v` on a scale symmetric in `[-limit, limit]`.
pub fn diverging_color(v: f64, limit: f64) -> (u8, u8, u8) {
    let s = if limit > 0.0 { (v / limit).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if s >= 0.0 {
        (255, fade(s), fade(s))
    } else {
        (fade(-s), fade(-s), 255)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStyle {
    /// Target size of the longer side of the cell area, in pixels.
    pub extent: f64,
    pub min_cell: f64,
    pub max_cell: f64,
    pub margin: f64,
}

impl Default for HeatmapStyle {
    fn default() -> Self {
        HeatmapStyle {
            extent: 800.0,
            min_cell: 2.0,
            max_cell: 24.0,
            margin: 10.0,
        }
    }
}

fn hex((r, g, b): (u8, u8, u8)) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Renders `x` with the given row and column clusters as an SVG document.
pub fn render_svg(x: &Array2<f64>, rows: &Partition, cols: &Partition, style: &HeatmapStyle) -> Result<String> {
    let (n, p) = x.dim();
    if rows.m() != n || cols.m() != p {
        return Err(SubicError::DimensionMismatch(format!(
            "matrix is {n}x{p} but clusters cover {} rows and {} columns",
            rows.m(),
            cols.m()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SubicError::Numeric("non-finite value in heatmap input".into()));
    }
    let row_order = display_order(x, Axis2::Rows, rows);
    let col_order = display_order(x, Axis2::Columns, cols);
    let limit = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cell = (style.extent / n.max(p) as f64).clamp(style.min_cell, style.max_cell);
    let (w, h) = (p as f64 * cell, n as f64 * cell);
    let (ox, oy) = (style.margin, style.margin);
    let colors = Array2::from_shape_fn((n, p), |(i, j)| hex(diverging_color(x[[row_order[i], col_order[j]]], limit)));

    let mut svg = String::new();
    let total_w = w + 2.0 * style.margin;
    let total_h = h + 2.0 * style.margin;
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.2}" height="{total_h:.2}" viewBox="0 0 {total_w:.2} {total_h:.2}">"#
    );
    let _ = writeln!(
        svg,
        "<title>{n} x {p} matrix, {} row clusters, {} column clusters</title>",
        rows.k(),
        cols.k()
    );
    let _ = writeln!(svg, r#"<g shape-rendering="crispEdges">"#);

    let spans = |part: &Partition, order: &[usize]| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=order.len() {
            if k == order.len() || part.labels()[order[k]] != part.labels()[order[start]] {
                out.push((start, k));
                start = k;
            }
        }
        out
    };
    let row_spans = spans(rows, &row_order);
    let col_spans = spans(cols, &col_order);
    let rect = |svg: &mut String, i: usize, j: usize, hi: usize, wj: usize, color: &str| {
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            ox + j as f64 * cell,
            oy + i as f64 * cell,
            wj as f64 * cell,
            hi as f64 * cell
        );
    };
    for &(r0, r1) in &row_spans {
        for &(c0, c1) in &col_spans {
            let first = &colors[[r0, c0]];
            let uniform = (r0..r1).all(|i| (c0..c1).all(|j| &colors[[i, j]] == first));
            if uniform {
                rect(&mut svg, r0, c0, r1 - r0, c1 - c0, first);
            } else {
                for i in r0..r1 {
                    for j in c0..c1 {
                        rect(&mut svg, i, j, 1, 1, &colors[[i, j]]);
                    }
                }
            }
        }
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r##"<g stroke="#000000" stroke-width="1">"##);
    for &(_, r1) in &row_spans[..row_spans.len() - 1] {
        let y = oy + r1 as f64 * cell;
        let _ = writeln!(svg, r#"<line x1="{ox:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#, ox + w);
    }
    for &(_, c1) in &col_spans[..col_spans.len() - 1] {
        let x = ox + c1 as f64 * cell;
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{oy:.2}" x2="{x:.2}" y2="{:.2}"/>"#, oy + h);
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}
