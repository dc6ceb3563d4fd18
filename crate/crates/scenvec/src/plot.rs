//! SVG line drawings of a scene: lane boundaries, the Co, the true Ego path
//! and optionally a predicted one.

use std::fmt::Write as _;

use scenvec_core::{SceneRecord, Trajectory};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 30.0;

struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn fit(points: &[[f64; 2]]) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let span = |k: usize| (hi[k] - lo[k]).max(1.0);
        Self {
            x0: lo[0],
            y0: lo[1],
            sx: (WIDTH - 2.0 * MARGIN) / span(0),
            sy: (HEIGHT - 2.0 * MARGIN) / span(1),
        }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (MARGIN + (p[0] - self.x0) * self.sx, HEIGHT - MARGIN - (p[1] - self.y0) * self.sy)
    }
}

fn polyline(out: &mut String, frame: &Frame, points: &[[f64; 2]], style: &str) {
    let coords: Vec<String> = points
        .iter()
        .map(|&p| {
            let (x, y) = frame.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"  <polyline fill="none" {style} points="{}"/>"#, coords.join(" "));
}

fn path(t: &Trajectory) -> Vec<[f64; 2]> {
    t.states.iter().map(|s| [s.x, s.y]).collect()
}

/// Renders `record` with an optional predicted Ego trajectory. The two axes
/// are scaled independently so lateral motion stays visible.
pub fn scene_svg(record: &SceneRecord, predicted: Option<&Trajectory>, title: &str) -> String {
    let lanes = &record.lanes;
    let left: Vec<[f64; 2]> = lanes.sample_x.iter().zip(&lanes.left_y).map(|(&x, &y)| [x, y]).collect();
    let right: Vec<[f64; 2]> = lanes.sample_x.iter().zip(&lanes.right_y).map(|(&x, &y)| [x, y]).collect();
    let ego = path(&record.ego);
    let co = record.co.as_ref().map(path);
    let pred = predicted.map(path);

    let mut all = left.clone();
    all.extend_from_slice(&right);
    all.extend_from_slice(&ego);
    all.extend(co.iter().flatten());
    all.extend(pred.iter().flatten());
    let frame = Frame::fit(&all);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"  <rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"  <text x="{MARGIN}" y="18" font-family="sans-serif" font-size="13">{}</text>"#, escape(title));
    polyline(&mut s, &frame, &left, r##"stroke="#555" stroke-width="1.5""##);
    polyline(&mut s, &frame, &right, r##"stroke="#555" stroke-width="1.5""##);
    if let Some(co) = &co {
        polyline(&mut s, &frame, co, r##"stroke="#d62728" stroke-width="2""##);
    }
    polyline(&mut s, &frame, &ego, r##"stroke="#1f77b4" stroke-width="2""##);
    if let Some(pred) = &pred {
        polyline(&mut s, &frame, pred, r##"stroke="#2ca02c" stroke-width="2" stroke-dasharray="6 4""##);
    }
    let legend = [("#1f77b4", "Ego"), ("#2ca02c", "Ego predicted"), ("#d62728", "Co"), ("#555", "lane")];
    for (i, (color, name)) in legend.iter().enumerate() {
        let x = WIDTH - 140.0;
        let y = 20.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"  <line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#, x + 20.0);
        let _ = writeln!(s, r#"  <text x="{}" y="{}" font-family="sans-serif" font-size="11">{name}</text>"#, x + 26.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use scenvec_core::sampler::{sample_scene, SamplerConfig};
    use scenvec_core::simulator::SimParams;
    use scenvec_core::ScenarioKind;

    #[test]
    fn draws_every_trajectory() {
        let cfg = SamplerConfig::new(ScenarioKind::AccLk, 1, 1).unwrap();
        let r = sample_scene(&cfg, 0, &SimParams::default()).unwrap();
        let svg = scene_svg(&r, Some(&r.ego), "ACC&LK <0>");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 5);
        assert!(svg.contains("ACC&amp;LK &lt;0&gt;"));
        let lk = sample_scene(&SamplerConfig::new(ScenarioKind::Lk, 1, 1).unwrap(), 0, &SimParams::default()).unwrap();
        assert_eq!(scene_svg(&lk, None, "LK").matches("<polyline").count(), 3);
    }
}
