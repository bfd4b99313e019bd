//! Hand-emitted SVG of credal sets in the probability simplex over three
//! states: one small ternary panel per selected time step, the polygon of
//! the step's constraint polytope drawn inside the simplex outline.

use imc::space::MassFunction;

const SIDE: f64 = 160.0;
const MARGIN: f64 = 26.0;
const PANEL_W: f64 = SIDE + 2.0 * MARGIN;
const PANEL_H: f64 = SIDE * 0.866 + 2.0 * MARGIN;
const PER_ROW: usize = 5;

/// Maps a three-state mass function into panel coordinates: the first state
/// sits bottom-left, the second bottom-right, the third on top.
fn project(m: &MassFunction) -> (f64, f64) {
    let x = MARGIN + (m.prob(1) + m.prob(2) / 2.0) * SIDE;
    let y = MARGIN + (1.0 - m.prob(2)) * SIDE * 0.866;
    (x, y)
}

/// Orders polygon vertices counter-clockwise around their centroid.
fn ordered(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let cx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let cy = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let mut out = points.to_vec();
    out.sort_by(|a, b| {
        let aa = (a.1 - cy).atan2(a.0 - cx);
        let bb = (b.1 - cy).atan2(b.0 - cx);
        aa.partial_cmp(&bb).expect("finite coordinates")
    });
    out
}

/// One panel: step number plus the vertices of the step's credal polytope.
pub struct Panel {
    pub step: usize,
    pub vertices: Vec<MassFunction>,
}

pub fn render(panels: &[Panel], labels: &[String]) -> String {
    let rows = panels.len().div_ceil(PER_ROW);
    let width = PANEL_W * panels.len().min(PER_ROW) as f64;
    let height = PANEL_H * rows as f64;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    ));
    for (i, panel) in panels.iter().enumerate() {
        let ox = PANEL_W * (i % PER_ROW) as f64;
        let oy = PANEL_H * (i / PER_ROW) as f64;
        out.push_str(&format!("  <g transform=\"translate({ox:.1},{oy:.1})\">\n"));
        // Simplex outline: corners follow the projection convention.
        let corners = [
            (MARGIN, MARGIN + SIDE * 0.866),
            (MARGIN + SIDE, MARGIN + SIDE * 0.866),
            (MARGIN + SIDE / 2.0, MARGIN),
        ];
        out.push_str(&format!(
            "    <polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"#f4f4f4\" \
             stroke=\"#555\" stroke-width=\"1\"/>\n",
            corners[0].0, corners[0].1, corners[1].0, corners[1].1, corners[2].0, corners[2].1
        ));
        let anchors = [("end", -4.0, 10.0), ("start", 4.0, 10.0), ("middle", 0.0, -6.0)];
        for (corner, label) in corners.iter().zip(labels) {
            let (anchor, dx, dy) = anchors[corners.iter().position(|c| c == corner).unwrap()];
            out.push_str(&format!(
                "    <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"{anchor}\">{label}</text>\n",
                corner.0 + dx,
                corner.1 + dy
            ));
        }
        let projected: Vec<(f64, f64)> = panel.vertices.iter().map(project).collect();
        if projected.len() >= 3 {
            let pts: Vec<String> = ordered(&projected)
                .iter()
                .map(|(x, y)| format!("{x:.2},{y:.2}"))
                .collect();
            out.push_str(&format!(
                "    <polygon points=\"{}\" fill=\"#c44\" fill-opacity=\"0.55\" \
                 stroke=\"#922\" stroke-width=\"1\"/>\n",
                pts.join(" ")
            ));
        } else {
            for (x, y) in &projected {
                out.push_str(&format!(
                    "    <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"#922\"/>\n"
                ));
            }
        }
        out.push_str(&format!(
            "    <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">n = {}</text>\n",
            PANEL_W / 2.0,
            PANEL_H - 6.0,
            panel.step
        ));
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}
