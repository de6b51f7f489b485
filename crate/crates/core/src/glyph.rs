//! Star-glyph figures overlaying condition profiles, and condition delta tables.

use std::fmt::Write as _;

use crate::domain::{CameraView, Condition, JointId};
use crate::error::{Error, Result};
use crate::profile::ConditionProfile;

pub const CANVAS_PX: f64 = 600.0;
const CENTER_PX: f64 = 300.0;
const RADIUS_PX: f64 = 200.0;
pub const GRID_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_K_SD: f64 = 2.0;
pub const DELTA_CSV_HEADER: &str = "joint,cond_a,cond_b,mean_a,mean_b,delta,pooled_sd,flagged";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStyle {
    Solid,
    Dotted,
    Dashed,
}

impl LineStyle {
    /// KB solid, AB dotted, NW dashed.
    pub fn for_condition(condition: Condition) -> Self {
        match condition {
            Condition::Kb => LineStyle::Solid,
            Condition::Ab => LineStyle::Dotted,
            Condition::Nw => LineStyle::Dashed,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LineStyle::Solid => "solid",
            LineStyle::Dotted => "dotted",
            LineStyle::Dashed => "dashed",
        }
    }

    fn dasharray(self) -> Option<&'static str> {
        match self {
            LineStyle::Solid => None,
            LineStyle::Dotted => Some("2,4"),
            LineStyle::Dashed => Some("9,5"),
        }
    }
}

fn stroke_color(condition: Condition) -> &'static str {
    match condition {
        Condition::Kb => "#1b5e9e",
        Condition::Ab => "#b3261e",
        Condition::Nw => "#222222",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlyphPolygon {
    pub condition: Condition,
    /// One vertex per joint, in unit-circle figure space (y up).
    pub vertices: Vec<(f64, f64)>,
    pub style: LineStyle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlyphFigure {
    pub subject_id: String,
    pub camera: CameraView,
    pub joints: Vec<JointId>,
    pub scale_max: f64,
    pub polygons: Vec<GlyphPolygon>,
    pub labels: Vec<String>,
}

/// Spoke angle in radians: first joint at the top, then clockwise.
pub fn spoke_angle(k: usize, count: usize) -> f64 {
    (90.0 - 360.0 * k as f64 / count as f64).to_radians()
}

/// Round up to one significant digit: 0.437 → 0.5, 1.2 → 2, 30 → 30.
pub fn auto_scale(max_mean: f64) -> f64 {
    if !(max_mean > 0.0) {
        return 1.0;
    }
    let exponent = max_mean.log10().floor() as i32;
    let unit = 10f64.powi(exponent);
    let digit = (max_mean / unit * (1.0 - 1e-12)).ceil();
    if exponent < 0 {
        digit / 10f64.powi(-exponent)
    } else {
        digit * unit
    }
}

/// Lay out one polygon per profile on a shared radial scale.
///
/// With `scale_max = None` the scale is the largest mean across all profiles,
/// rounded up to one significant digit.
pub fn glyph_layout(
    profiles: &[ConditionProfile],
    joints: &[JointId],
    scale_max: Option<f64>,
) -> Result<GlyphFigure> {
    if joints.len() < 3 {
        return Err(Error::invalid(format!(
            "a glyph needs at least 3 joints, got {}",
            joints.len()
        )));
    }
    let first = profiles
        .first()
        .ok_or_else(|| Error::invalid("a glyph needs at least one profile"))?;
    for p in profiles {
        if p.subject_id != first.subject_id || p.camera != first.camera {
            return Err(Error::invalid(format!(
                "profiles must share subject and camera: {}/{} vs {}/{}",
                first.subject_id, first.camera, p.subject_id, p.camera
            )));
        }
    }
    for (i, p) in profiles.iter().enumerate() {
        if profiles[..i].iter().any(|q| q.condition == p.condition) {
            return Err(Error::invalid(format!("condition {} given twice", p.condition)));
        }
    }

    let mut means = Vec::with_capacity(profiles.len());
    for p in profiles {
        let row = joints
            .iter()
            .map(|&j| p.entry(j).map(|e| e.mean))
            .collect::<Result<Vec<f64>>>()?;
        means.push(row);
    }
    let max_mean = means.iter().flatten().copied().fold(0.0, f64::max);
    let scale = match scale_max {
        Some(s) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("scale_max must be > 0, got {s}")));
            }
            if max_mean > s {
                return Err(Error::domain(format!("mean {max_mean} exceeds scale_max {s}")));
            }
            s
        }
        None => auto_scale(max_mean),
    };

    let count = joints.len();
    let polygons = profiles
        .iter()
        .zip(&means)
        .map(|(p, row)| GlyphPolygon {
            condition: p.condition,
            style: LineStyle::for_condition(p.condition),
            vertices: row
                .iter()
                .enumerate()
                .map(|(k, &m)| {
                    let radius = m / scale;
                    let theta = spoke_angle(k, count);
                    (radius * theta.cos(), radius * theta.sin())
                })
                .collect(),
        })
        .collect();

    Ok(GlyphFigure {
        subject_id: first.subject_id.clone(),
        camera: first.camera,
        joints: joints.to_vec(),
        scale_max: scale,
        polygons,
        labels: joints.iter().map(|j| j.to_string()).collect(),
    })
}

/// Fixed-precision pixel coordinate; never prints `-0.00`.
fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn to_canvas((x, y): (f64, f64)) -> (f64, f64) {
    (CENTER_PX + RADIUS_PX * x, CENTER_PX - RADIUS_PX * y)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Deterministic SVG rendering on a 600×600 canvas. `comment` is embedded
/// verbatim as an XML comment after the root element opens.
pub fn render_svg(figure: &GlyphFigure, comment: Option<&str>) -> String {
    let mut s = String::new();
    let count = figure.joints.len();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        CANVAS_PX
    )
    .unwrap();
    if let Some(c) = comment {
        writeln!(s, "<!-- {} -->", c.replace("--", "- -")).unwrap();
    }
    writeln!(
        s,
        r##"<rect x="0" y="0" width="{0}" height="{0}" fill="#ffffff"/>"##,
        CANVAS_PX
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{} ({})</text>"#,
        px(CENTER_PX),
        escape(&figure.subject_id),
        figure.camera
    )
    .unwrap();

    writeln!(
        s,
        r##"<g id="grid" fill="none" stroke="#bbbbbb" stroke-width="1">"##
    )
    .unwrap();
    for f in GRID_FRACTIONS {
        writeln!(
            s,
            r#"<circle cx="{0}" cy="{0}" r="{1}"/>"#,
            px(CENTER_PX),
            px(RADIUS_PX * f)
        )
        .unwrap();
    }
    for k in 0..count {
        let theta = spoke_angle(k, count);
        let (x, y) = to_canvas((theta.cos(), theta.sin()));
        writeln!(
            s,
            r#"<line x1="{0}" y1="{0}" x2="{1}" y2="{2}"/>"#,
            px(CENTER_PX),
            px(x),
            px(y)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();

    writeln!(
        s,
        r##"<g id="scale" font-family="sans-serif" font-size="10" fill="#666666">"##
    )
    .unwrap();
    for f in GRID_FRACTIONS {
        let value = figure.scale_max * f;
        writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            px(CENTER_PX + 3.0),
            px(CENTER_PX - RADIUS_PX * f - 2.0),
            format_args!("{value:.3}")
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();

    writeln!(s, r#"<g id="labels" font-family="sans-serif" font-size="13">"#).unwrap();
    for (k, label) in figure.labels.iter().enumerate() {
        let theta = spoke_angle(k, count);
        let (x, y) = to_canvas((1.12 * theta.cos(), 1.12 * theta.sin()));
        let anchor = match theta.cos() {
            c if c > 0.1 => "start",
            c if c < -0.1 => "end",
            _ => "middle",
        };
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="{anchor}" dominant-baseline="middle">{}</text>"#,
            px(x),
            px(y),
            escape(label)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();

    for poly in &figure.polygons {
        let points: Vec<String> = poly
            .vertices
            .iter()
            .map(|&v| {
                let (x, y) = to_canvas(v);
                format!("{},{}", px(x), px(y))
            })
            .collect();
        let dash = poly
            .style
            .dasharray()
            .map(|d| format!(r#" stroke-dasharray="{d}""#))
            .unwrap_or_default();
        writeln!(
            s,
            r#"<polygon class="{}" points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            poly.condition,
            points.join(" "),
            stroke_color(poly.condition)
        )
        .unwrap();
    }

    writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="12">"#).unwrap();
    for (i, poly) in figure.polygons.iter().enumerate() {
        let y = 540.0 + 18.0 * i as f64;
        let dash = poly
            .style
            .dasharray()
            .map(|d| format!(r#" stroke-dasharray="{d}""#))
            .unwrap_or_default();
        writeln!(
            s,
            r#"<line x1="20.00" y1="{0}" x2="60.00" y2="{0}" stroke="{1}" stroke-width="2"{dash}/>"#,
            px(y),
            stroke_color(poly.condition)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="68.00" y="{}" dominant-baseline="middle">{} ({})</text>"#,
            px(y),
            poly.condition,
            poly.style.name()
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();
    writeln!(s, "</svg>").unwrap();
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaRow {
    pub joint: JointId,
    pub condition_a: Condition,
    pub condition_b: Condition,
    pub mean_a: f64,
    pub mean_b: f64,
    pub delta: f64,
    pub within_sd: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    pub rows: Vec<DeltaRow>,
}

impl DeltaTable {
    pub fn flagged(&self) -> impl Iterator<Item = JointId> + '_ {
        self.rows.iter().filter(|r| r.flagged).map(|r| r.joint)
    }

    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in metadata {
            writeln!(out, "# {k}={v}").unwrap();
        }
        writeln!(out, "{DELTA_CSV_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.joint, r.condition_a, r.condition_b, r.mean_a, r.mean_b, r.delta, r.within_sd, r.flagged
            )
            .unwrap();
        }
        out
    }
}

/// Per-joint change from `a` to `b`, flagged when it exceeds `k_sd` pooled SDs.
pub fn compare_conditions(
    a: &ConditionProfile,
    b: &ConditionProfile,
    joints: &[JointId],
    k_sd: f64,
) -> Result<DeltaTable> {
    if a.subject_id != b.subject_id || a.camera != b.camera {
        return Err(Error::invalid(format!(
            "cannot compare {}/{} with {}/{}: subject and camera must match",
            a.subject_id, a.camera, b.subject_id, b.camera
        )));
    }
    if !(k_sd >= 0.0 && k_sd.is_finite()) {
        return Err(Error::invalid(format!("k_sd must be ≥ 0, got {k_sd}")));
    }
    let mut rows = Vec::with_capacity(joints.len());
    for &joint in joints {
        let ea = a.entry(joint)?;
        let eb = b.entry(joint)?;
        let delta = eb.mean - ea.mean;
        let within_sd = ((ea.sd * ea.sd + eb.sd * eb.sd) / 2.0).sqrt();
        let flagged = if within_sd > 0.0 {
            delta.abs() > k_sd * within_sd
        } else {
            delta.abs() > 0.0
        };
        rows.push(DeltaRow {
            joint,
            condition_a: a.condition,
            condition_b: b.condition,
            mean_a: ea.mean,
            mean_b: eb.mean,
            delta,
            within_sd,
            flagged,
        });
    }
    Ok(DeltaTable { rows })
}
