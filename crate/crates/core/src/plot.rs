//! Static SVG line charts for curve files.
//!
//! Curve files are grouped into figure families by name:
//! `learning_<label>_p<p>` (one chart per strategy family and attack
//! probability, one line per exploration value), `cost_<label>_p<p>` (same
//! grouping on the attack-count axis) and the dynamic-ε family
//! `learning_dyn<L>_p<p>` (one chart, one line per attack probability).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::metrics::Curve;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 11] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#000000",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CurveKind {
    Learning,
    Cost,
    CostAveraged,
}

/// A curve file name split into its parts.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveName {
    pub kind: CurveKind,
    /// Strategy label, e.g. `eps0.1`, `tau0.01`, `dyn5000`.
    pub label: String,
    pub attack_probability: f64,
}

impl CurveName {
    pub fn parse(stem: &str) -> Option<Self> {
        let (kind, rest) = if let Some(r) = stem.strip_prefix("cost_avg_") {
            (CurveKind::CostAveraged, r)
        } else if let Some(r) = stem.strip_prefix("cost_") {
            (CurveKind::Cost, r)
        } else {
            (CurveKind::Learning, stem.strip_prefix("learning_")?)
        };
        let (label, p) = rest.rsplit_once("_p")?;
        let family = ["eps", "tau", "dyn"].iter().any(|f| label.starts_with(f));
        if !family {
            return None;
        }
        Some(Self {
            kind,
            label: label.to_string(),
            attack_probability: p.parse().ok()?,
        })
    }

    fn family(&self) -> &str {
        &self.label[..3]
    }
}

pub struct Series<'a> {
    pub label: String,
    pub curve: &'a Curve,
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{}", v.round() as i64)
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a line chart of the series' means.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let pts = series.iter().flat_map(|s| s.curve.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.mean);
        y1 = y1.max(p.mean);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1.partial_cmp(&y0) != Some(std::cmp::Ordering::Greater) {
        y1 = y0 + 1.0;
    }
    y1 += (y1 - y0) * 0.05;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for t in nice_ticks(x0, x1, 8) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            MARGIN_TOP,
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 16.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for p in &s.curve.points {
            let _ = write!(path, "{:.2},{:.2} ", sx(p.x), sy(p.mean));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.trim_end()
        );
        let ly = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Sort key, legend label and curve of one figure series.
type Member<'a> = (f64, String, &'a Curve);

/// Groups named curves into figures. Returns `(file name, svg)` pairs in a
/// stable order. Curves whose names do not follow the naming scheme are
/// rejected.
pub fn render_families(curves: &[(String, Curve)]) -> Result<Vec<(String, String)>, String> {
    // (kind, family, p) -> series; the dynamic family is keyed on p = -1.
    let mut figures: BTreeMap<(CurveKind, String, i64), Vec<Member<'_>>> = BTreeMap::new();
    for (name, curve) in curves {
        let parsed = CurveName::parse(name).ok_or_else(|| format!("unrecognised curve name {name:?}"))?;
        let family = parsed.family().to_string();
        let p_key = (parsed.attack_probability * 1000.0).round() as i64;
        if family == "dyn" {
            figures.entry((parsed.kind, family, -1)).or_default().push((
                parsed.attack_probability,
                format!("p={}", parsed.attack_probability),
                curve,
            ));
        } else {
            let value: f64 = parsed.label[3..].parse().unwrap_or(f64::NAN);
            let sym = if family == "eps" { "ε" } else { "τ" };
            figures
                .entry((parsed.kind, family, p_key))
                .or_default()
                .push((value, format!("{sym}={value}"), curve));
        }
    }
    let mut out = Vec::new();
    for ((kind, family, p_key), mut members) in figures {
        members.sort_by(|a, b| a.0.total_cmp(&b.0));
        let series: Vec<Series<'_>> = members
            .iter()
            .map(|(_, label, curve)| Series {
                label: label.clone(),
                curve,
            })
            .collect();
        let strategy = match family.as_str() {
            "eps" => "ε-greedy",
            "tau" => "softmax",
            _ => "dynamic ε-greedy",
        };
        let (prefix, x_label, what) = match kind {
            CurveKind::Learning => ("learning", "episode", "learning curves"),
            CurveKind::Cost => ("cost", "attacks performed", "performance vs cost"),
            CurveKind::CostAveraged => (
                "cost_avg",
                "attacks performed (replicate mean)",
                "performance vs mean cost",
            ),
        };
        let (file, title) = if p_key < 0 {
            (
                format!("{prefix}_dynamic.svg"),
                format!("{strategy}: {what} by attack probability"),
            )
        } else {
            let p = p_key as f64 / 1000.0;
            (
                format!("{prefix}_{family}_p{p}.svg"),
                format!("{strategy}, p = {p}: {what}"),
            )
        };
        out.push((file, render_svg(&title, x_label, "discounted return", &series)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::CurvePoint;

    fn line(v: f64) -> Curve {
        Curve::new(
            (0..5)
                .map(|i| CurvePoint {
                    x: i as f64,
                    mean: v * i as f64,
                    std: 0.0,
                    n: 1,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn names() {
        let n = CurveName::parse("cost_avg_tau0.01_p0.7").unwrap();
        assert_eq!(n.kind, CurveKind::CostAveraged);
        assert_eq!(n.label, "tau0.01");
        assert_eq!(n.attack_probability, 0.7);
        assert_eq!(CurveName::parse("learning_eps0_p0").unwrap().label, "eps0");
        assert!(CurveName::parse("weird_eps0_p0").is_none());
        assert!(CurveName::parse("learning_foo_p0").is_none());
    }

    #[test]
    fn families_and_determinism() {
        let curves = vec![
            ("learning_eps0.1_p0".to_string(), line(1.0)),
            ("learning_eps0.7_p0".to_string(), line(0.5)),
            ("cost_eps0.1_p0.3".to_string(), line(0.2)),
            ("learning_dyn5000_p0.2".to_string(), line(0.3)),
            ("learning_dyn5000_p0".to_string(), line(0.4)),
        ];
        let figs = render_families(&curves).unwrap();
        let names: Vec<&str> = figs.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            vec!["learning_dynamic.svg", "learning_eps_p0.svg", "cost_eps_p0.3.svg"]
        );
        assert!(figs[1].1.contains("ε=0.1") && figs[1].1.contains("ε=0.7"));
        assert_eq!(figs[1].1.matches("<polyline").count(), 2);
        assert_eq!(render_families(&curves).unwrap(), figs);
        assert!(render_families(&[("bogus".into(), line(1.0))]).is_err());
    }
}
