//! Atomic file output and the SVG overlay.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use orbitforge::{DomainChart, Point};

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Static figure: zero-level polylines, critical points and orbit curves.
pub struct Svg {
    lo: [f64; 2],
    hi: [f64; 2],
    width: f64,
    height: f64,
    body: String,
}

const PAD: f64 = 10.0;

impl Svg {
    pub fn new(chart: &DomainChart) -> Svg {
        let b = chart.bbox();
        let (lo, hi) = ([b.lo[0], b.lo[1]], [b.hi[0], b.hi[1]]);
        let width = 800.0;
        let height = (width * (hi[1] - lo[1]) / (hi[0] - lo[0])).round();
        let mut svg = Svg { lo, hi, width, height, body: String::new() };
        svg.chart(chart);
        svg
    }

    fn map(&self, p: &[f64]) -> (f64, f64) {
        let x = PAD + (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * self.width;
        let y = PAD + (self.hi[1] - p[1]) / (self.hi[1] - self.lo[1]) * self.height;
        (x, y)
    }

    fn points(&self, pts: &[Point]) -> String {
        let mut s = String::new();
        for p in pts {
            let (x, y) = self.map(p);
            let _ = write!(s, "{x:.3},{y:.3} ");
        }
        s.trim_end().to_string()
    }

    fn chart(&mut self, chart: &DomainChart) {
        for c in &chart.components {
            if c.is_singleton {
                let (x, y) = self.map(&c.polyline[0]);
                let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="5" fill="none" stroke="steelblue" stroke-width="2"/>"#);
            } else {
                let pts = self.points(&c.polyline);
                let _ = writeln!(self.body, r#"<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#);
            }
            if let Some(p) = c.polyline.first() {
                let (x, y) = self.map(p);
                let _ =
                    writeln!(self.body, r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="steelblue">Γ{}</text>"#, x + 4.0, y - 4.0, c.id);
            }
        }
        for cp in &chart.critical_points {
            let (x, y) = self.map(&cp.location);
            let colour = if cp.is_saddle() { "crimson" } else { "darkorange" };
            let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="{colour}"/>"#);
        }
    }

    pub fn orbit(&mut self, nodes: &[Point], colour: &str, dashed: bool) {
        let pts = self.points(nodes);
        let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(self.body, r#"<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2"{dash}/>"#);
    }

    pub fn marker(&mut self, p: &[f64], colour: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<rect x="{:.3}" y="{:.3}" width="6" height="6" fill="{colour}"/>"#, x - 3.0, y - 3.0);
    }

    pub fn finish(&self, title: &str) -> String {
        let (w, h) = (self.width + 2.0 * PAD, self.height + 2.0 * PAD);
        let axes = {
            let (x0, y0) = self.map(&[0.0, self.lo[1]]);
            let (x1, y1) = self.map(&[0.0, self.hi[1]]);
            let (a0, b0) = self.map(&[self.lo[0], 0.0]);
            let (a1, b1) = self.map(&[self.hi[0], 0.0]);
            format!(
                "<line x1=\"{x0:.3}\" y1=\"{y0:.3}\" x2=\"{x1:.3}\" y2=\"{y1:.3}\" stroke=\"#ccc\"/>\n<line x1=\"{a0:.3}\" y1=\"{b0:.3}\" x2=\"{a1:.3}\" y2=\"{b1:.3}\" stroke=\"#ccc\"/>\n"
            )
        };
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<title>{}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{axes}{}</svg>\n",
            escape(title),
            self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
