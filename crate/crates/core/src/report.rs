//! Figures and cards: per-class density/CDF curves of mean cosines, 2D
//! token projections, and the per-example error card. All output is plain
//! SVG or Markdown text with fixed numeric formatting, so identical inputs
//! give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cdf::{ecdf_at, LayerCdf};
use crate::error::{Error, Result};
use crate::ingest::{HiddenDump, Label};
use crate::linalg::{project_2d_with, TsneConfig};
use crate::similarity::AnswerSimilarityProfile;

pub const GRID_POINTS: usize = 512;
const GRID_MIN: f64 = -1.0;
const GRID_MAX: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Pdf,
    Cdf,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub kind: CurveKind,
    pub class_tag: Option<Label>,
    pub layer: Option<usize>,
    /// Set when the sample was a point mass and a spike was drawn.
    pub warning: Option<String>,
}

impl DensityCurve {
    /// Linear interpolation of the curve at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&g| g <= x);
        if k == 0 {
            return self.ys[0];
        }
        if k == self.xs.len() {
            return self.ys[k - 1];
        }
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
            .sum()
    }
}

fn grid() -> Vec<f64> {
    let step = (GRID_MAX - GRID_MIN) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS)
        .map(|i| GRID_MIN + step * i as f64)
        .collect()
}

/// Silverman's rule: `0.9 · min(σ, IQR / 1.34) · n^(-1/5)`.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian KDE (normalized to unit mass over `[-1, 1]`) or interpolated
/// empirical CDF on a 512-point grid.
pub fn density_estimate(
    values: &[f64],
    kind: CurveKind,
    bandwidth: Bandwidth,
) -> Result<DensityCurve> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "density estimate needs at least 2 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite value in density sample".into(),
        ));
    }
    let xs = grid();
    let degenerate = values.iter().all(|&v| v == values[0]);
    let mut warning = None;

    let ys = match kind {
        CurveKind::Cdf => {
            let cdf = LayerCdf::new(0, Label::Correct, values.to_vec())?;
            if degenerate {
                warning = Some(format!("point mass at {}", values[0]));
            }
            xs.iter().map(|&x| ecdf_at(&cdf, x)).collect()
        }
        CurveKind::Pdf if degenerate => {
            warning = Some(format!("point mass at {}", values[0]));
            spike(&xs, values[0])
        }
        CurveKind::Pdf => {
            let h = match bandwidth {
                Bandwidth::Auto => silverman_bandwidth(values),
                Bandwidth::Fixed(h) if h > 0.0 => h,
                Bandwidth::Fixed(h) => {
                    return Err(Error::InvalidInput(format!(
                        "bandwidth must be positive, got {h}"
                    )))
                }
            };
            let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
            let mut ys: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    values
                        .iter()
                        .map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp())
                        .sum::<f64>()
                        * norm
                })
                .collect();
            let curve = DensityCurve {
                xs: xs.clone(),
                ys: ys.clone(),
                kind,
                class_tag: None,
                layer: None,
                warning: None,
            };
            let mass = curve.integral();
            if mass > 0.0 {
                ys.iter_mut().for_each(|y| *y /= mass);
                ys
            } else {
                warning = Some("sample lies outside [-1, 1]".into());
                ys
            }
        }
    };
    Ok(DensityCurve {
        xs,
        ys,
        kind,
        class_tag: None,
        layer: None,
        warning,
    })
}

fn spike(xs: &[f64], at: f64) -> Vec<f64> {
    let dx = xs[1] - xs[0];
    let k = xs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - at).abs().total_cmp(&(b.1 - at).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut ys = vec![0.0; xs.len()];
    // trapezoid mass of an interior spike is height · dx; edges get half
    let edge = k == 0 || k == xs.len() - 1;
    ys[k] = if edge { 2.0 / dx } else { 1.0 / dx };
    ys
}

/// Per-class curves of `mean_cos` at one layer.
pub fn class_curves(
    profiles: &[AnswerSimilarityProfile],
    layer: usize,
    kind: CurveKind,
    bandwidth: Bandwidth,
) -> Result<Vec<DensityCurve>> {
    let mut out = Vec::new();
    for class in [Label::Correct, Label::Incorrect] {
        let values: Vec<f64> = profiles
            .iter()
            .filter(|p| p.label == Some(class) && p.distribution_eligible && !p.single_token)
            .filter_map(|p| p.mean_cos.get(layer).copied())
            .collect();
        if values.len() < 2 {
            continue;
        }
        let mut c = density_estimate(&values, kind, bandwidth)?;
        c.class_tag = Some(class);
        c.layer = Some(layer);
        out.push(c);
    }
    Ok(out)
}

fn class_colour(class: Option<Label>) -> &'static str {
    match class {
        Some(Label::Correct) => "#1f77b4",
        Some(Label::Incorrect) => "#ff7f0e",
        None => "#444444",
    }
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

/// Line chart of one or more curves sharing the `[-1, 1]` x-axis.
pub fn render_curves_svg(title: &str, curves: &[DensityCurve]) -> String {
    let y_max = curves
        .iter()
        .flat_map(|c| c.ys.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let px = |x: f64| MARGIN + (x - GRID_MIN) / (GRID_MAX - GRID_MIN) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / y_max * (HEIGHT - 2.0 * MARGIN);

    let mut s = svg_open(title);
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000"/>"##,
        MARGIN,
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    );
    for (label, x) in [("-1", -1.0), ("0", 0.0), ("1", 1.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{label}</text>"#,
            px(x),
            HEIGHT - MARGIN + 14.0
        );
    }
    for (i, c) in curves.iter().enumerate() {
        let points: Vec<String> =
            c.xs.iter()
                .zip(&c.ys)
                .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
        let colour = class_colour(c.class_tag);
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let name = c.class_tag.map_or("sample", Label::as_str);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{colour}">{name}</text>"#,
            WIDTH - MARGIN - 70.0,
            MARGIN + 14.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        xml_escape(title)
    );
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Membership of a token in the projection plot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenRole {
    Question,
    Answer,
    Context,
    /// Outside both question and context (e.g. `[CLS]`, `[SEP]`); drawn as
    /// context.
    Other,
}

pub fn token_roles(dump: &HiddenDump) -> Vec<TokenRole> {
    (0..dump.token_count())
        .map(|t| {
            if dump.predicted_answer_span.contains(t) {
                TokenRole::Answer
            } else if dump.question_span.contains(t) {
                TokenRole::Question
            } else if dump.context_span.contains(t) {
                TokenRole::Context
            } else {
                TokenRole::Other
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ClusterPlot {
    pub coords: DMatrix<f64>,
    pub roles: Vec<TokenRole>,
    pub svg: String,
}

fn diamond(cx: f64, cy: f64, r: f64) -> String {
    format!(
        "{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}",
        cx,
        cy - r,
        cx + r,
        cy,
        cx,
        cy + r,
        cx - r,
        cy
    )
}

fn star(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|i| {
            let rad = if i % 2 == 0 { r } else { r * 0.45 };
            let a = std::f64::consts::PI * (i as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
            format!("{:.2},{:.2}", cx + rad * a.cos(), cy + rad * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Projects one layer's tokens to 2D and draws question tokens as blue
/// diamonds, answer tokens as red stars and everything else as grey dots.
pub fn cluster_plot(
    dump: &HiddenDump,
    layer: usize,
    seed: u64,
    config: &TsneConfig,
) -> Result<ClusterPlot> {
    if layer >= dump.layer_count {
        return Err(Error::InvalidInput(format!(
            "layer {layer} outside 0..{}",
            dump.layer_count
        )));
    }
    let coords = project_2d_with(&dump.layer_matrix(layer), config, seed)?.embedding;
    let roles = token_roles(dump);

    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for r in coords.row_iter() {
        lo_x = lo_x.min(r[0]);
        hi_x = hi_x.max(r[0]);
        lo_y = lo_y.min(r[1]);
        hi_y = hi_y.max(r[1]);
    }
    let span_x = (hi_x - lo_x).max(1e-12);
    let span_y = (hi_y - lo_y).max(1e-12);
    let px = |x: f64| MARGIN + (x - lo_x) / span_x * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - lo_y) / span_y * (HEIGHT - 2.0 * MARGIN);

    let title = format!("{} - layer {}", dump.example_id, layer + 1);
    let mut svg = svg_open(&title);
    // context first so question and answer markers stay on top
    let order = [
        TokenRole::Other,
        TokenRole::Context,
        TokenRole::Question,
        TokenRole::Answer,
    ];
    for role in order {
        for (t, _) in roles.iter().enumerate().filter(|(_, r)| **r == role) {
            let (x, y) = (px(coords[(t, 0)]), py(coords[(t, 1)]));
            let _ = match role {
                TokenRole::Question => writeln!(
                    svg,
                    r##"<polygon points="{}" fill="#1f4fd1"/>"##,
                    diamond(x, y, 5.0)
                ),
                TokenRole::Answer => writeln!(
                    svg,
                    r##"<polygon points="{}" fill="#d62728"/>"##,
                    star(x, y, 6.0)
                ),
                TokenRole::Context | TokenRole::Other => writeln!(
                    svg,
                    r##"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#9a9a9a"/>"##
                ),
            };
        }
    }
    svg.push_str("</svg>\n");
    Ok(ClusterPlot { coords, roles, svg })
}

/// Formats `x` with two decimals, rounding half away from zero on its
/// shortest decimal representation (so `0.065` becomes `0.07`).
pub fn round2(x: f64) -> String {
    let repr = format!("{}", x.abs());
    let (int_part, frac) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let mut f: Vec<u8> = frac.bytes().map(|b| b - b'0').collect();
    f.resize(f.len().max(3), 0);
    digits.extend_from_slice(&f[..2]);
    if f[2] >= 5 {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let n = digits.len();
    let int_digits: String = digits[..n - 2]
        .iter()
        .map(|d| char::from(b'0' + d))
        .collect();
    let frac_digits: String = digits[n - 2..]
        .iter()
        .map(|d| char::from(b'0' + d))
        .collect();
    let zero = digits.iter().all(|&d| d == 0);
    let sign = if x < 0.0 && !zero { "-" } else { "" };
    format!("{sign}{int_digits}.{frac_digits}")
}

/// `[a, b, ...]` with every entry through [`round2`].
pub fn format_cos_vector(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|&v| round2(v)).collect();
    format!("[{}]", parts.join(", "))
}

/// Markdown card for one example: question, answer, the QA model's verdict,
/// each scheme's verdict (✓ when it agrees with the QA verdict's truth,
/// ✗ otherwise) and the per-layer mean cosines.
pub fn error_card(
    dump: &HiddenDump,
    profile: &AnswerSimilarityProfile,
    predictions_by_scheme: &BTreeMap<String, Label>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "#### {}\n", dump.example_id);
    let question = dump.span_words(dump.question_span).join(" ");
    let answer = dump.span_words(dump.predicted_answer_span).join(" ");
    let _ = writeln!(s, "- Question: \"{question}\"");
    let _ = writeln!(s, "- Answer: \"{answer}\"");
    let verdict = dump.label.map_or("unlabeled", Label::as_str);
    let _ = writeln!(s, "- QA model: `{verdict}`");
    for (scheme, &pred) in predictions_by_scheme {
        let mark = match dump.label {
            Some(truth) if truth == pred => " ✓",
            Some(_) => " ✗",
            None => "",
        };
        let _ = writeln!(s, "- {scheme}: `{}`{mark}", pred.as_str());
    }
    let _ = writeln!(
        s,
        "- cos per layer: {}",
        format_cos_vector(&profile.mean_cos)
    );
    s
}
