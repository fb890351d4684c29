//! Level sets of a field over the first two joints: sampled values as CSV,
//! marching-squares contours and trajectories as SVG.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kinematics::RobotModel;
use crate::planner::Trajectory;

/// Field values on a regular grid over joints 1 and 2. Joints past the
/// second are held at zero. `values[j * q1.len() + i]` is the value at
/// `(q1[i], q2[j])`; `None` where the field has no data.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn sample_field(
    robot: &RobotModel,
    resolution: [usize; 2],
    field: &(dyn Fn(&[f64]) -> Option<f64> + Sync),
) -> Result<FieldSample> {
    if robot.dof() < 2 {
        return Err(Error::Input("plots need at least two joints".into()));
    }
    if resolution[0] < 2 || resolution[1] < 2 {
        return Err(Error::Input("plot resolution must be at least 2 per axis".into()));
    }
    let lim = robot.joint_limits();
    let q1 = linspace(lim[0].0, lim[0].1, resolution[0]);
    let q2 = linspace(lim[1].0, lim[1].1, resolution[1]);
    let values = (0..q1.len() * q2.len())
        .into_par_iter()
        .map(|k| {
            let mut q = vec![0.0; robot.dof()];
            q[0] = q1[k % q1.len()];
            q[1] = q2[k / q1.len()];
            field(&q)
        })
        .collect();
    Ok(FieldSample { q1, q2, values })
}

impl FieldSample {
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.q1.len() + i]
    }

    /// Rows of `q1,q2,value`, with an empty value where there is no data.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q1", "q2", "value"])?;
        for (j, b) in self.q2.iter().enumerate() {
            for (i, a) in self.q1.iter().enumerate() {
                let v = self.value(i, j).map(|v| v.to_string()).unwrap_or_default();
                w.write_record([a.to_string(), b.to_string(), v])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Closed polylines at `level`. The grid is padded with one ring of
    /// samples above every level, and missing values count as above it, so
    /// every contour closes.
    pub fn contours(&self, level: f64) -> Vec<Vec<[f64; 2]>> {
        let (nx, ny) = (self.q1.len(), self.q2.len());
        let finite_max = self.values.iter().flatten().fold(level, |a, b| a.max(*b));
        let high = finite_max + 1.0;
        let dx = self.q1[1] - self.q1[0];
        let dy = self.q2[1] - self.q2[0];
        // Padded coordinates run from -1 to n.
        let val = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                high
            } else {
                self.value(i as usize, j as usize).unwrap_or(high)
            }
        };
        let pos = |i: isize, j: isize| [self.q1[0] + dx * i as f64, self.q2[0] + dy * j as f64];

        // Crossing point on the edge from (i, j) along axis `dir`.
        type Edge = (isize, isize, u8);
        let crossing = |(i, j, dir): Edge| -> [f64; 2] {
            let (i2, j2) = if dir == 0 { (i + 1, j) } else { (i, j + 1) };
            let (a, b) = (val(i, j), val(i2, j2));
            let t = (level - a) / (b - a);
            let (p, q) = (pos(i, j), pos(i2, j2));
            [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
        };

        let mut links: HashMap<Edge, Vec<Edge>> = HashMap::new();
        let mut link = |a: Edge, b: Edge| {
            links.entry(a).or_default().push(b);
            links.entry(b).or_default().push(a);
        };
        for j in -1..ny as isize {
            for i in -1..nx as isize {
                let corners = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
                let inside: Vec<bool> = corners.iter().map(|v| *v < level).collect();
                // Cell edges in corner order: bottom, right, top, left.
                let edges: [Edge; 4] = [(i, j, 0), (i + 1, j, 1), (i, j + 1, 0), (i, j, 1)];
                let cut: Vec<usize> = (0..4).filter(|&e| inside[e] != inside[(e + 1) % 4]).collect();
                match cut.len() {
                    2 => link(edges[cut[0]], edges[cut[1]]),
                    4 => {
                        let centre = corners.iter().sum::<f64>() / 4.0;
                        // Cut off the pair of corners that disagree with the centre.
                        let pair_at = if (centre < level) == inside[0] { 0 } else { 1 };
                        link(edges[pair_at], edges[pair_at + 1]);
                        link(edges[(pair_at + 2) % 4], edges[(pair_at + 3) % 4]);
                    }
                    _ => {}
                }
            }
        }

        let mut keys: Vec<Edge> = links.keys().copied().collect();
        keys.sort();
        let mut used = std::collections::HashSet::new();
        let mut out = Vec::new();
        for start in keys {
            if used.contains(&start) {
                continue;
            }
            let mut ring = vec![crossing(start)];
            used.insert(start);
            let (mut prev, mut cur) = (start, links[&start][0]);
            while cur != start {
                used.insert(cur);
                ring.push(crossing(cur));
                let next = links[&cur].iter().copied().find(|e| *e != prev).unwrap_or(start);
                prev = cur;
                cur = next;
            }
            out.push(ring);
        }
        out
    }
}

/// Contour levels with their stroke colours, then trajectories over the
/// first two joints.
pub fn render_svg(sample: &FieldSample, levels: &[f64], trajectories: &[(String, &Trajectory)]) -> String {
    const SIZE: f64 = 600.0;
    const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
    let (x0, x1) = (sample.q1[0], *sample.q1.last().unwrap());
    let (y0, y1) = (sample.q2[0], *sample.q2.last().unwrap());
    let sx = |x: f64| (x - x0) / (x1 - x0) * SIZE;
    let sy = |y: f64| SIZE - (y - y0) / (y1 - y0) * SIZE;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#);
    for (k, level) in levels.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let _ = writeln!(svg, r#"<g class="contour" data-level="{level}" stroke="{colour}" fill="none">"#);
        for ring in sample.contours(*level) {
            let mut d = String::new();
            for (n, p) in ring.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if n == 0 { "M" } else { "L" }, sx(p[0]), sy(p[1]));
            }
            let _ = writeln!(svg, r#"<path d="{d}Z"/>"#);
        }
        let _ = writeln!(svg, "</g>");
    }
    for (k, (name, traj)) in trajectories.iter().enumerate() {
        let colour = PALETTE[(k + 3) % PALETTE.len()];
        let points: Vec<String> = traj
            .states
            .iter()
            .map(|q| format!("{:.2},{:.2}", sx(q[0]), sy(q[1])))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="trajectory" data-name="{}" points="{}" stroke="{colour}" stroke-width="2" fill="none"/>"#,
            escape(name),
            points.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_field(robot: &RobotModel, centres: &[[f64; 2]]) -> FieldSample {
        let c = centres.to_vec();
        sample_field(robot, [61, 61], &move |q: &[f64]| {
            c.iter().map(|p| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()).reduce(f64::min)
        })
        .unwrap()
    }

    fn area(ring: &[[f64; 2]]) -> f64 {
        let n = ring.len();
        (0..n)
            .map(|k| {
                let (a, b) = (ring[k], ring[(k + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            .abs()
            / 2.0
    }

    #[test]
    fn circle_contour_encloses_disc_area() {
        let robot = RobotModel::two_link();
        let s = disc_field(&robot, &[[0.0, 0.0]]);
        let rings = s.contours(1.0);
        assert_eq!(rings.len(), 1);
        let a = area(&rings[0]);
        assert!((a - std::f64::consts::PI).abs() < 0.02, "{a}");
        for p in &rings[0] {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn separate_discs_give_separate_rings_and_border_ones_close() {
        let robot = RobotModel::two_link();
        // The second disc is cut by the q1 = pi border.
        let s = disc_field(&robot, &[[-1.0, 0.0], [3.0, 1.0]]);
        let rings = s.contours(0.5);
        assert_eq!(rings.len(), 2);
        for r in &rings {
            assert!(r.len() > 8);
        }
    }

    #[test]
    fn missing_values_count_as_outside() {
        let robot = RobotModel::two_link();
        let s = sample_field(&robot, [11, 11], &|q: &[f64]| (q[0].abs() < 1.0 && q[1].abs() < 1.0).then_some(0.0)).unwrap();
        assert_eq!(s.contours(0.5).len(), 1);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 122);
        assert!(text.lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn svg_lists_contours_and_trajectories() {
        let robot = RobotModel::two_link();
        let s = disc_field(&robot, &[[0.0, 0.0]]);
        let t = Trajectory {
            states: vec![crate::kinematics::JointConfig(vec![-1.0, -1.0]), crate::kinematics::JointConfig(vec![1.0, 1.0])],
            controls: vec![vec![0.0, 0.0]],
            distances: vec![None, None],
            converged: true,
        };
        let svg = render_svg(&s, &[0.5, 1.0], &[("a<b".into(), &t)]);
        assert_eq!(svg.matches("<path").count(), 2);
        assert_eq!(svg.matches("class=\"trajectory\"").count(), 1);
        assert!(svg.contains("a&lt;b"));
    }
}
