//! SVG polar plots of a grid map: one lobe per cell whose radius follows
//! the cell's directional density.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::circular::Angle;
use crate::dgm::DirectionalGridMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalize {
    /// Each lobe is scaled by its own maximum density.
    #[default]
    PerCell,
    /// All lobes share the scale of the densest cell.
    Global,
}

impl FromStr for Normalize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-cell" => Ok(Normalize::PerCell),
            "global" => Ok(Normalize::Global),
            _ => Err(Error::domain(format!(
                "unknown normalization '{s}', expected per-cell or global"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub cell_size_px: f64,
    pub samples_per_lobe: usize,
    pub normalize: Normalize,
    pub stroke: String,
    pub fill: String,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            cell_size_px: 80.0,
            samples_per_lobe: 360,
            normalize: Normalize::PerCell,
            stroke: "#1f4e99".into(),
            fill: "#8fb3e8".into(),
        }
    }
}

impl PlotSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_lobe < 36 {
            return Err(Error::domain("samples_per_lobe must be at least 36"));
        }
        if !(self.cell_size_px > 0.0 && self.cell_size_px.is_finite()) {
            return Err(Error::domain("cell_size_px must be positive"));
        }
        for c in [&self.stroke, &self.fill] {
            if c.is_empty() || c.chars().any(|ch| matches!(ch, '"' | '<' | '>' | '&')) {
                return Err(Error::domain(format!("invalid colour '{c}'")));
            }
        }
        Ok(())
    }
}

/// Sample directions used for every lobe: `−π + 2πi/n`.
pub fn lobe_angles(n: usize) -> Vec<Angle> {
    (0..n)
        .map(|i| Angle::new(-PI + TAU * i as f64 / n as f64).expect("finite"))
        .collect()
}

/// Renders the map as an SVG 1.1 document. Rows grow upwards, as in the world frame.
pub fn render_svg(map: &DirectionalGridMap, spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    let g = &map.spec;
    let cs = spec.cell_size_px;
    let (w, h) = (g.n_cols as f64 * cs, g.n_rows as f64 * cs);
    let max_r = 0.45 * cs;
    let angles = lobe_angles(spec.samples_per_lobe);

    let lobes: Vec<Option<Vec<f64>>> = map
        .cells()
        .iter()
        .map(|c| {
            c.mixture
                .as_ref()
                .map(|m| angles.iter().map(|&t| m.ln_pdf(t)).collect())
        })
        .collect();
    let global_max = lobes
        .iter()
        .flatten()
        .flat_map(|l| l.iter().copied())
        .fold((1.0 / TAU).ln(), f64::max);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    for (cell, lobe) in map.cells().iter().zip(&lobes) {
        let x0 = cell.col as f64 * cs;
        let y0 = (g.n_rows - 1 - cell.row) as f64 * cs;
        let (cx, cy) = (x0 + cs / 2.0, y0 + cs / 2.0);
        let _ = writeln!(
            svg,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{cs:.2}" height="{cs:.2}" fill="none" stroke="#cccccc" stroke-width="0.5"/>"##
        );
        match lobe {
            None => {
                let r = match spec.normalize {
                    Normalize::PerCell => max_r,
                    Normalize::Global => max_r * ((1.0 / TAU).ln() - global_max).exp(),
                };
                let _ = writeln!(
                    svg,
                    r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="none" stroke="#bbbbbb" stroke-dasharray="2,2" stroke-width="0.5"/>"##
                );
            }
            Some(ln) => {
                let top = match spec.normalize {
                    Normalize::PerCell => ln.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Normalize::Global => global_max,
                };
                let mut d = String::new();
                for (i, (t, l)) in angles.iter().zip(ln).enumerate() {
                    let r = max_r * (l - top).exp();
                    let [u, v] = t.unit();
                    let _ = write!(
                        d,
                        "{}{:.2},{:.2} ",
                        if i == 0 { "M" } else { "L" },
                        cx + r * u,
                        cy - r * v
                    );
                }
                d.push('Z');
                let _ = writeln!(
                    svg,
                    r#"<path d="{d}" fill="{}" fill-opacity="0.6" stroke="{}" stroke-width="1"/>"#,
                    spec.fill, spec.stroke
                );
            }
        }
        let _ = writeln!(svg, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="1" fill="black"/>"#);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
