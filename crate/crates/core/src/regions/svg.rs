use std::fmt::Write;

use super::RegionMap;
use crate::error::{Error, Result};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 10] =
    ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

/// Clips a convex polygon against `a·p ≤ b`.
fn clip(poly: &[[f64; 2]], a: [f64; 2], b: f64) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| a[0] * p[0] + a[1] * p[1] - b;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (sp, sq) = (side(&p), side(&q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Polygon of every region of a two-parameter map, in region order.
pub fn region_polygons(map: &RegionMap) -> Result<Vec<Vec<[f64; 2]>>> {
    if map.bx.len() != 2 {
        return Err(Error::InvalidInput("polygons need exactly two parameters".into()));
    }
    let (x0, x1) = map.bx[0];
    let (y0, y1) = map.bx[1];
    Ok(map
        .regions
        .iter()
        .map(|r| {
            let mut poly = vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
            for i in 0..r.e_mat.nrows() {
                poly = clip(&poly, [r.e_mat[(i, 0)], r.e_mat[(i, 1)]], r.e_vec[i]);
                if poly.is_empty() {
                    break;
                }
            }
            poly
        })
        .collect())
}

/// Filled polygons of a two-parameter region map, labelled by active set.
pub fn render_svg(map: &RegionMap) -> Result<String> {
    let polys = region_polygons(map)?;
    let (x0, x1) = map.bx[0];
    let (y0, y1) = map.bx[1];
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * SIZE;
    let sy = |y: f64| MARGIN + (y1 - y) / (y1 - y0) * SIZE;
    let total = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (k, (poly, region)) in polys.iter().zip(&map.regions).enumerate() {
        if poly.is_empty() {
            continue;
        }
        let pts: Vec<String> = poly.iter().map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1]))).collect();
        writeln!(
            s,
            r##"<polygon points="{}" fill="{}" fill-opacity="0.75" stroke="#333" stroke-width="1"/>"##,
            pts.join(" "),
            PALETTE[k % PALETTE.len()]
        )
        .unwrap();
        let cx = poly.iter().map(|p| p[0]).sum::<f64>() / poly.len() as f64;
        let cy = poly.iter().map(|p| p[1]).sum::<f64>() / poly.len() as f64;
        let label: Vec<String> = region.active_set.iter().map(|i| (i + 1).to_string()).collect();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{{{}}}</text>"#,
            sx(cx),
            sy(cy),
            label.join(",")
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">u1 ∈ [{x0}, {x1}]</text>"#,
        MARGIN + SIZE / 2.0,
        total - 12.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">u2 ∈ [{y0}, {y1}]</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}
