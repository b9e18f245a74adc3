//! Bare-bones SVG plots: one panel, linear axes, points or a polyline.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

pub enum Mark {
    Dots,
    Line,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub log_y: bool,
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

impl Plot<'_> {
    pub fn render(&self, pts: &[(f64, f64)], mark: Mark) -> String {
        let ty = |y: f64| if self.log_y { y.max(1e-300).log10() } else { y };
        let pts: Vec<(f64, f64)> =
            pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| (x, ty(y))).collect();
        let (x0, x1) = bounds(pts.iter().map(|p| p.0));
        let (y0, y1) = bounds(pts.iter().map(|p| p.1));
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let _ =
            writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, self.title);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, self.xlabel);
        let ylabel = if self.log_y { format!("log10 {}", self.ylabel) } else { self.ylabel.to_string() };
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
            H / 2.0,
            H / 2.0
        );
        for (v, x, y, anchor) in [
            (x0, PAD, H - PAD + 14.0, "start"),
            (x1, W - PAD, H - PAD + 14.0, "end"),
            (y0, PAD - 4.0, H - PAD, "end"),
            (y1, PAD - 4.0, PAD + 8.0, "end"),
        ] {
            let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4}</text>"#);
        }
        match mark {
            Mark::Dots => {
                for &(x, y) in &pts {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.2" fill="black"/>"#, sx(x), sy(y));
                }
            }
            Mark::Line => {
                let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="black" stroke-width="0.8" points="{}"/>"#,
                    path.join(" ")
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_constant_series() {
        let p = Plot { title: "t", xlabel: "x", ylabel: "y", log_y: false };
        let out = p.render(&[(0.0, 1.0), (1.0, 1.0)], Mark::Line);
        assert!(out.starts_with("<svg") && out.ends_with("</svg>\n"));
        assert!(!out.contains("NaN"));
    }
}
