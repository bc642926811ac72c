use std::fmt::Write as _;

use super::quantile::QuantileTable;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Median (solid) and quartiles (dashed) of one coordinate against the
/// observation count.
pub fn quantile_plot(table: &QuantileTable, coordinate: &str) -> Result<String> {
    let rows = table.series(coordinate);
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("no rows for coordinate '{coordinate}'")));
    }
    let x_max = rows.iter().map(|r| r.observations).max().unwrap_or(1).max(1) as f64;
    let mut lo = rows.iter().map(|r| r.q1).fold(f64::INFINITY, f64::min);
    let mut hi = rows.iter().map(|r| r.q3).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let px = |x: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * x as f64 / x_max;
    let py = |y: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (y - lo) / (hi - lo);
    let line = |pick: &dyn Fn(usize) -> f64| {
        rows.iter().enumerate().map(|(i, r)| format!("{:.2},{:.2}", px(r.observations), py(pick(i)))).collect::<Vec<_>>().join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">observations</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" font-size="10" text-anchor="end">{}</text>"#, y0 + 15.0, x_max);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.4}</text>"#, x0 - 4.0, y0, lo);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.4}</text>"#, x0 - 4.0, y1 + 4.0, hi);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(coordinate));
    for (pick, dash) in [(&(|i: usize| rows[i].q1) as &dyn Fn(usize) -> f64, true), (&|i: usize| rows[i].q3, true), (&|i: usize| rows[i].median, false)] {
        let style = if dash { r#" stroke-dasharray="4 3""# } else { r#" stroke-width="2""# };
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue"{style}/>"#, line(pick));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::quantile::QuantileRow;

    #[test]
    fn plot_has_three_lines() {
        let rows = (1..=3)
            .map(|k| QuantileRow { observations: k * 100, coordinate: "phi".into(), q1: 0.1, median: 0.2 * k as f64, q3: 0.9 })
            .collect();
        let t = QuantileTable { config_hash: "0".into(), rows };
        let svg = quantile_plot(&t, "phi").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(quantile_plot(&t, "beta2").is_err());
    }
}
