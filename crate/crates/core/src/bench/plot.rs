use std::collections::BTreeSet;
use std::fmt::Write;

use super::table::ResultsTable;
use crate::num::format_sig;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(y_label)
    );
    s
}

fn y_axis(s: &mut String, y_max: f64) {
    let plot_h = H - TOP - BOTTOM;
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#, H - BOTTOM);
    let _ =
        writeln!(s, r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - BOTTOM, W - RIGHT, H - BOTTOM);
    for t in 0..=5 {
        let v = y_max * t as f64 / 5.0;
        let y = H - BOTTOM - plot_h * t as f64 / 5.0;
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>"#, LEFT - 4.0);
        let _ =
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, format_sig(v, 3));
    }
}

fn legend(s: &mut String, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = W - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/>"#,
            y - 10.0,
            COLORS[i % COLORS.len()]
        );
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 18.0, escape(name));
    }
}

fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let p = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * p).find(|&c| c >= v).unwrap_or(10.0 * p)
}

/// Line chart of `(x, y)` series sharing one x axis.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).collect();
    let (x_min, x_max) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (x_min, x_max) = if x_min < x_max { (x_min, x_max) } else { (x_min - 1.0, x_min + 1.0) };
    let y_max = nice_max(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).fold(0.0, f64::max));
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + plot_w * (x - x_min) / (x_max - x_min);
    let sy = |y: f64| H - BOTTOM - plot_h * y / y_max;

    let mut s = header(title, y_label);
    y_axis(&mut s, y_max);
    let ticks: BTreeSet<u64> = xs.iter().map(|x| x.to_bits()).collect();
    for x in ticks.into_iter().map(f64::from_bits) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            sx(x),
            H - BOTTOM + 16.0,
            format_sig(x, 4)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        H - 10.0,
        escape(x_label)
    );
    for (i, (_, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
    }
    legend(&mut s, &series.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Grouped bar chart; `values[g][s]` is series `s` in group `g`.
pub fn bar_chart(
    title: &str,
    y_label: &str,
    groups: &[String],
    series: &[String],
    values: &[Vec<Option<f64>>],
) -> String {
    let y_max = nice_max(values.iter().flatten().flatten().fold(0.0, |m: f64, &v| m.max(v)));
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let gw = plot_w / groups.len().max(1) as f64;
    let bw = 0.8 * gw / series.len().max(1) as f64;
    let mut s = header(title, y_label);
    y_axis(&mut s, y_max);
    for (g, name) in groups.iter().enumerate() {
        let x0 = LEFT + gw * g as f64 + 0.1 * gw;
        for (k, v) in values[g].iter().enumerate() {
            let Some(v) = v else { continue };
            let h = plot_h * v / y_max;
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0 + bw * k as f64,
                H - BOTTOM - h,
                bw,
                h,
                COLORS[k % COLORS.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + 0.4 * gw,
            H - BOTTOM + 16.0,
            escape(name)
        );
    }
    legend(&mut s, series);
    s.push_str("</svg>\n");
    s
}

fn distinct<T: Ord + Clone>(it: impl Iterator<Item = T>) -> Vec<T> {
    it.collect::<BTreeSet<T>>().into_iter().collect()
}

/// One chart per experiment (per region count for the training-size sweep)
/// of mean MRE in percent, as `(file name, svg)`.
pub fn experiment_charts(table: &ResultsTable) -> Vec<(String, String)> {
    let means = table.means();
    let mut out = Vec::new();
    for exp in distinct(means.iter().map(|c| c.experiment.clone())) {
        let cells: Vec<_> = means.iter().filter(|c| c.experiment == exp).collect();
        let methods = distinct(cells.iter().map(|c| c.method.clone()));
        match exp.as_str() {
            "exp1" | "exp2a" => {
                for regions in distinct(cells.iter().map(|c| c.regions)) {
                    let series: Vec<(String, Vec<(f64, f64)>)> = methods
                        .iter()
                        .map(|m| {
                            let pts = cells
                                .iter()
                                .filter(|c| &c.method == m && c.regions == regions)
                                .map(|c| (c.k as f64, 100.0 * c.mre))
                                .collect();
                            (m.clone(), pts)
                        })
                        .collect();
                    let (name, title) = match regions {
                        Some(r) => (format!("{exp}_regions{r}.svg"), format!("{exp}: mean MRE vs K, {r} region(s)")),
                        None => (format!("{exp}.svg"), format!("{exp}: mean MRE vs K")),
                    };
                    out.push((name, line_chart(&title, "training set size K", "MRE %", &series)));
                }
            }
            _ => {
                for k in distinct(cells.iter().map(|c| c.k)) {
                    let at_k: Vec<_> = cells.iter().filter(|c| c.k == k).collect();
                    let keys = distinct(at_k.iter().map(|c| (c.regions, c.prior.clone())));
                    let groups: Vec<String> = keys
                        .iter()
                        .map(|(r, p)| match r {
                            Some(r) => format!("{r} region(s)"),
                            None => p.clone(),
                        })
                        .collect();
                    let values: Vec<Vec<Option<f64>>> = keys
                        .iter()
                        .map(|(r, p)| {
                            methods
                                .iter()
                                .map(|m| {
                                    at_k.iter()
                                        .find(|c| &c.method == m && c.regions == *r && &c.prior == p)
                                        .map(|c| 100.0 * c.mre)
                                })
                                .collect()
                        })
                        .collect();
                    let title = format!("{exp}: mean MRE, K = {k}");
                    out.push((format!("{exp}_K{k}.svg"), bar_chart(&title, "MRE %", &groups, &methods, &values)));
                }
            }
        }
    }
    out
}
