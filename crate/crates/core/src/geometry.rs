//! Oriented boundary parametrizations, tangents, arc-length measure, and
//! composite Gauss-Legendre quadrature with geometric grading toward
//! corners.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

type ParamFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// One smooth piece of a boundary, parametrized over `[t_start, t_end]`.
#[derive(Clone)]
pub struct BoundarySegment {
    pub label: String,
    pub t_start: f64,
    pub t_end: f64,
    position: ParamFn,
    velocity: ParamFn,
    /// Endpoint is a corner of the contour; quadrature grades toward it.
    pub corner_start: bool,
    pub corner_end: bool,
}

impl std::fmt::Debug for BoundarySegment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundarySegment")
            .field("label", &self.label)
            .field("t_start", &self.t_start)
            .field("t_end", &self.t_end)
            .field("corner_start", &self.corner_start)
            .field("corner_end", &self.corner_end)
            .finish()
    }
}

impl BoundarySegment {
    pub fn new(
        label: impl Into<String>,
        interval: (f64, f64),
        position: impl Fn(f64) -> C64 + Send + Sync + 'static,
        velocity: impl Fn(f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            t_start: interval.0,
            t_end: interval.1,
            position: Arc::new(position),
            velocity: Arc::new(velocity),
            corner_start: false,
            corner_end: false,
        }
    }

    pub fn with_corners(mut self, start: bool, end: bool) -> Self {
        self.corner_start = start;
        self.corner_end = end;
        self
    }

    pub fn position(&self, t: f64) -> C64 {
        (self.position)(t)
    }

    pub fn velocity(&self, t: f64) -> C64 {
        (self.velocity)(t)
    }

    /// Unit tangent zeta'(t)/|zeta'(t)|.
    pub fn unit_tangent(&self, t: f64) -> C64 {
        let v = self.velocity(t);
        v / v.norm()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }

    pub fn midpoint_param(&self) -> f64 {
        0.5 * (self.t_start + self.t_end)
    }
}

/// A closed, counterclockwise, piecewise-smooth boundary.
#[derive(Debug, Clone)]
pub struct BoundaryContour {
    pub segments: Vec<BoundarySegment>,
}

impl BoundaryContour {
    /// Build a contour, verifying that segment endpoints chain cyclically
    /// within 1e-12 and that velocities do not vanish on a sample grid.
    pub fn new(segments: Vec<BoundarySegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Domain("contour needs at least one segment".into()));
        }
        let n = segments.len();
        for j in 0..n {
            let here = segments[j].position(segments[j].t_end);
            let next = &segments[(j + 1) % n];
            let there = next.position(next.t_start);
            if (here - there).norm() > 1e-12 {
                return Err(Error::Domain(format!(
                    "segment '{}' does not chain to '{}' ({} vs {})",
                    segments[j].label, next.label, here, there
                )));
            }
            for i in 1..32 {
                let t = segments[j].t_start
                    + (segments[j].t_end - segments[j].t_start) * (i as f64) / 32.0;
                if segments[j].velocity(t).norm() < 1e-14 {
                    return Err(Error::Domain(format!(
                        "segment '{}' has vanishing velocity at t = {t}",
                        segments[j].label
                    )));
                }
            }
        }
        Ok(Self { segments })
    }

    pub fn segment(&self, label: &str) -> Option<&BoundarySegment> {
        self.segments.iter().find(|s| s.label == label)
    }

    /// Winding number of a point about the contour via the argument
    /// principle on a sample grid; 1 for interior points, 0 for exterior.
    pub fn winding_number(&self, z: C64, samples_per_segment: usize) -> i32 {
        let mut total = 0.0;
        for seg in &self.segments {
            let mut prev_arg = None;
            for i in 0..=samples_per_segment {
                let t = seg.t_start
                    + (seg.t_end - seg.t_start) * (i as f64) / (samples_per_segment as f64);
                let a = (seg.position(t) - z).arg();
                if let Some(p) = prev_arg {
                    let mut d: f64 = a - p;
                    while d > std::f64::consts::PI {
                        d -= 2.0 * std::f64::consts::PI;
                    }
                    while d < -std::f64::consts::PI {
                        d += 2.0 * std::f64::consts::PI;
                    }
                    total += d;
                }
                prev_arg = Some(a);
            }
        }
        (total / (2.0 * std::f64::consts::PI)).round() as i32
    }

    /// Total turning of the unit tangent around the contour (2*pi for a
    /// smooth Jordan boundary).
    pub fn tangent_winding(&self, samples_per_segment: usize) -> f64 {
        let mut total = 0.0;
        let mut prev: Option<f64> = None;
        let mut first: Option<f64> = None;
        for seg in &self.segments {
            for i in 0..samples_per_segment {
                let t = seg.t_start
                    + (seg.t_end - seg.t_start) * (i as f64 + 0.5) / (samples_per_segment as f64);
                let a = seg.unit_tangent(t).arg();
                if first.is_none() {
                    first = Some(a);
                }
                if let Some(p) = prev {
                    let mut d: f64 = a - p;
                    while d > std::f64::consts::PI {
                        d -= 2.0 * std::f64::consts::PI;
                    }
                    while d < -std::f64::consts::PI {
                        d += 2.0 * std::f64::consts::PI;
                    }
                    total += d;
                }
                prev = Some(a);
            }
        }
        if let (Some(p), Some(f)) = (prev, first) {
            let mut d: f64 = f - p;
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            total += d;
        }
        total
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial from Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Composite Gauss-Legendre panels over segments, geometrically graded
/// toward corner-flagged endpoints.
#[derive(Debug, Clone)]
pub struct PanelQuadrature {
    pub panels_per_segment: usize,
    pub grading_ratio: f64,
    pub nodes_per_panel: usize,
    /// Extra geometric refinement ladders toward (segment label, parameter)
    /// points, used to resolve boundary layers of spectral integrands.
    refinements: Vec<(String, f64)>,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl PanelQuadrature {
    pub fn new(panels_per_segment: usize, grading_ratio: f64, nodes_per_panel: usize) -> Self {
        let (gl_nodes, gl_weights) = gauss_legendre(nodes_per_panel);
        Self {
            panels_per_segment,
            grading_ratio,
            nodes_per_panel,
            refinements: Vec::new(),
            gl_nodes,
            gl_weights,
        }
    }

    /// Add refinement points; panel breakpoints gain a geometric ladder
    /// (ratio 1/2, 12 levels) around each.
    pub fn with_refinements(mut self, points: Vec<(String, f64)>) -> Self {
        self.refinements = points;
        self
    }

    /// Defaults used for smooth boundaries: 16-node panels, ratio 1/2.
    pub fn with_panels(panels_per_segment: usize) -> Self {
        Self::new(panels_per_segment, 0.5, 16)
    }

    /// Panel breakpoints for a segment, honoring corner flags.
    pub fn breakpoints(&self, seg: &BoundarySegment) -> Vec<f64> {
        let mut bps = self.base_breakpoints(seg);
        let span = (seg.t_end - seg.t_start) / self.panels_per_segment.max(1) as f64;
        for (label, t) in &self.refinements {
            if label != &seg.label {
                continue;
            }
            let t = t.clamp(seg.t_start, seg.t_end);
            for j in 0..=12 {
                let d = span * 0.5f64.powi(j);
                for cand in [t - d, t, t + d] {
                    if cand > seg.t_start && cand < seg.t_end {
                        bps.push(cand);
                    }
                }
            }
        }
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bps.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        bps
    }

    fn base_breakpoints(&self, seg: &BoundarySegment) -> Vec<f64> {
        let (a, b) = (seg.t_start, seg.t_end);
        let n = self.panels_per_segment.max(1);
        match (seg.corner_start, seg.corner_end) {
            (false, false) => (0..=n)
                .map(|i| a + (b - a) * (i as f64) / (n as f64))
                .collect(),
            (true, false) => graded_breakpoints(a, b, n, self.grading_ratio, true),
            (false, true) => graded_breakpoints(a, b, n, self.grading_ratio, false),
            (true, true) => {
                let mid = 0.5 * (a + b);
                let half = n.div_ceil(2).max(1);
                let mut left = graded_breakpoints(a, mid, half, self.grading_ratio, true);
                let right = graded_breakpoints(mid, b, half, self.grading_ratio, false);
                left.pop();
                left.extend(right);
                left
            }
        }
    }

    /// Quadrature nodes (t, weight) for a segment.
    pub fn segment_nodes(&self, seg: &BoundarySegment) -> Vec<(f64, f64)> {
        let bps = self.breakpoints(seg);
        let mut out = Vec::with_capacity((bps.len() - 1) * self.nodes_per_panel);
        for w in bps.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            for (x, gw) in self.gl_nodes.iter().zip(&self.gl_weights) {
                out.push((mid + half * x, half * gw));
            }
        }
        out
    }
}

/// Geometric panel breakpoints on [a, b], widths shrinking by `ratio`
/// toward the flagged end.
fn graded_breakpoints(a: f64, b: f64, n: usize, ratio: f64, toward_start: bool) -> Vec<f64> {
    let mut widths: Vec<f64> = (0..n).map(|j| ratio.powi(j as i32)).collect();
    let sum: f64 = widths.iter().sum();
    for w in &mut widths {
        *w *= (b - a) / sum;
    }
    if toward_start {
        widths.reverse();
    }
    let mut bps = Vec::with_capacity(n + 1);
    bps.push(a);
    let mut acc = a;
    for w in &widths {
        acc += w;
        bps.push(acc);
    }
    *bps.last_mut().unwrap() = b;
    bps
}

/// Composite quadrature of `integrand(t) dt` over one segment.
pub fn integrate_segment(
    seg: &BoundarySegment,
    q: &PanelQuadrature,
    integrand: impl Fn(f64) -> C64,
) -> Result<C64> {
    let mut sum = C64::new(0.0, 0.0);
    for (t, w) in q.segment_nodes(seg) {
        let v = integrand(t);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite integrand at t = {t} on segment '{}'",
                seg.label
            )));
        }
        sum += w * v;
    }
    Ok(sum)
}

/// Sum of `integrate_segment` over all segments of a contour.
pub fn integrate_contour(
    contour: &BoundaryContour,
    q: &PanelQuadrature,
    integrand: impl Fn(&BoundarySegment, f64) -> C64,
) -> Result<C64> {
    let mut sum = C64::new(0.0, 0.0);
    for seg in &contour.segments {
        sum += integrate_segment(seg, q, |t| integrand(seg, t))?;
    }
    Ok(sum)
}

/// Radial polar distance of the ellipse x^2/a^2 + y^2/b^2 = 1.
pub fn ellipse_radius(a: f64, b: f64, theta: f64) -> f64 {
    a * b / ((b * theta.cos()).powi(2) + (a * theta.sin()).powi(2)).sqrt()
}

/// Boundary of the ellipse x^2/a^2 + y^2/b^2 = 1 as two polar arcs,
/// C1 over theta in (-pi/2, pi/2) and C2 over (pi/2, 3pi/2), with
/// zeta(theta) = l(theta) e^{i theta}.
pub fn ellipse_boundary(a: f64, b: f64) -> Result<BoundaryContour> {
    if !(a > b && b > 0.0) {
        return Err(Error::Domain(format!(
            "ellipse_boundary requires a > b > 0, got a={a}, b={b}"
        )));
    }
    let position = move |th: f64| C64::from_polar(ellipse_radius(a, b, th), th);
    let velocity = move |th: f64| {
        let l = ellipse_radius(a, b, th);
        let s2 = (b * th.cos()).powi(2) + (a * th.sin()).powi(2);
        let dl = -a * b * (a * a - b * b) * th.sin() * th.cos() / s2.powf(1.5);
        (C64::new(dl, 0.0) + C64::new(0.0, l)) * C64::from_polar(1.0, th)
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let c1 = BoundarySegment::new("C1", (-half_pi, half_pi), position, velocity);
    let c2 = BoundarySegment::new("C2", (half_pi, 3.0 * half_pi), position, velocity);
    BoundaryContour::new(vec![c1, c2])
}

/// Interior angles alpha_j (in units of pi) of a simple counterclockwise
/// polygon.
pub fn polygon_interior_angles(vertices: &[C64]) -> Vec<f64> {
    let n = vertices.len();
    (0..n)
        .map(|j| {
            let u_in = vertices[j] - vertices[(j + n - 1) % n];
            let u_out = vertices[(j + 1) % n] - vertices[j];
            let turn = (u_out / u_in).arg();
            1.0 - turn / std::f64::consts::PI
        })
        .collect()
}

fn segments_cross(a: C64, b: C64, c: C64, d: C64) -> bool {
    let orient = |p: C64, q: C64, r: C64| {
        let v = (q - p).re * (r - p).im - (q - p).im * (r - p).re;
        if v > 1e-12 {
            1
        } else if v < -1e-12 {
            -1
        } else {
            0
        }
    };
    orient(a, b, c) != orient(a, b, d) && orient(c, d, a) != orient(c, d, b)
}

/// Boundary of a simple counterclockwise quadrilateral, each side
/// parametrized by zeta_j(s) = (1-s)/2 v_j + (1+s)/2 v_{j+1}, s in [-1, 1],
/// with corner flags at both endpoints.
pub fn polygon_boundary(vertices: &[C64]) -> Result<BoundaryContour> {
    let n = vertices.len();
    if n != 4 {
        return Err(Error::Domain(format!(
            "polygon_boundary expects 4 vertices, got {n}"
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (vertices[i] - vertices[j]).norm() < 1e-12 {
                return Err(Error::Domain("repeated polygon vertices".into()));
            }
        }
    }
    // counterclockwise orientation via the shoelace sum
    let mut area2 = 0.0;
    for j in 0..n {
        let p = vertices[j];
        let q = vertices[(j + 1) % n];
        area2 += p.re * q.im - q.re * p.im;
    }
    if area2 <= 0.0 {
        return Err(Error::Domain(
            "polygon vertices must be counterclockwise".into(),
        ));
    }
    // non-adjacent sides must not intersect
    for i in 0..n {
        for j in 0..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if segments_cross(
                vertices[i],
                vertices[(i + 1) % n],
                vertices[j],
                vertices[(j + 1) % n],
            ) {
                return Err(Error::Domain("polygon is self-intersecting".into()));
            }
        }
    }
    let mut segs = Vec::with_capacity(n);
    for j in 0..n {
        let v0 = vertices[j];
        let v1 = vertices[(j + 1) % n];
        let seg = BoundarySegment::new(
            format!("S{}", j + 1),
            (-1.0, 1.0),
            move |s| 0.5 * (1.0 - s) * v0 + 0.5 * (1.0 + s) * v1,
            move |_| 0.5 * (v1 - v0),
        )
        .with_corners(true, true);
        segs.push(seg);
    }
    BoundaryContour::new(segs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn adaptive_arc_length(seg: &BoundarySegment) -> f64 {
        // adaptive Simpson on |zeta'(t)|
        fn simpson(
            seg: &BoundarySegment,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            eps: f64,
            depth: u32,
        ) -> f64 {
            let mid = 0.5 * (a + b);
            let lm = 0.5 * (a + mid);
            let rm = 0.5 * (mid + b);
            let flm = seg.velocity(lm).norm();
            let frm = seg.velocity(rm).norm();
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb);
            if depth > 30 || (left + right - whole).abs() < 15.0 * eps {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(seg, a, mid, fa, flm, fm, eps / 2.0, depth + 1)
                    + simpson(seg, mid, b, fm, frm, fb, eps / 2.0, depth + 1)
            }
        }
        let (a, b) = (seg.t_start, seg.t_end);
        simpson(
            seg,
            a,
            b,
            seg.velocity(a).norm(),
            seg.velocity(0.5 * (a + b)).norm(),
            seg.velocity(b).norm(),
            1e-13,
            0,
        )
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [2, 4, 8, 16, 24] {
            let (xs, ws) = gauss_legendre(n);
            assert_abs_diff_eq!(ws.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            for w in xs.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn two_node_gauss_integrates_s_squared() {
        let seg = BoundarySegment::new(
            "t",
            (-1.0, 1.0),
            |s| C64::new(s, 0.0),
            |_| C64::new(1.0, 0.0),
        );
        let q = PanelQuadrature::new(1, 0.5, 2);
        let v = integrate_segment(&seg, &q, |s| C64::new(s * s, 0.0)).unwrap();
        assert_abs_diff_eq!(v.re, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ellipse_boundary_points() {
        let c = ellipse_boundary(2.0, 1.0).unwrap();
        let c1 = c.segment("C1").unwrap();
        assert!((c1.position(0.0) - C64::new(2.0, 0.0)).norm() < 1e-14);
        let c2 = c.segment("C2").unwrap();
        assert!((c2.position(std::f64::consts::FRAC_PI_2) - C64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn ellipse_rejects_bad_axes() {
        assert!(ellipse_boundary(1.0, 1.0).is_err());
        assert!(ellipse_boundary(1.0, 2.0).is_err());
        assert!(ellipse_boundary(2.0, 0.0).is_err());
    }

    #[test]
    fn ellipse_velocity_matches_finite_differences() {
        let c = ellipse_boundary(2.0, 1.0).unwrap();
        let seg = c.segment("C1").unwrap();
        for &t in &[-1.2, -0.4, 0.0, 0.7, 1.5] {
            let h = 1e-6;
            let fd = (seg.position(t + h) - seg.position(t - h)) / (2.0 * h);
            assert!((seg.velocity(t) - fd).norm() < 1e-8);
        }
    }

    #[test]
    fn ellipse_unit_tangent_has_modulus_one() {
        let c = ellipse_boundary(2.0, 1.0).unwrap();
        for seg in &c.segments {
            for i in 0..20 {
                let t = seg.t_start + (seg.t_end - seg.t_start) * (i as f64 + 0.5) / 20.0;
                assert_abs_diff_eq!(seg.unit_tangent(t).norm(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn ellipse_arc_length_matches_adaptive_oracle() {
        let c = ellipse_boundary(2.0, 1.0).unwrap();
        let q = PanelQuadrature::with_panels(24);
        let mut total = C64::new(0.0, 0.0);
        let mut oracle = 0.0;
        for seg in &c.segments {
            total += integrate_segment(seg, &q, |t| C64::new(seg.velocity(t).norm(), 0.0)).unwrap();
            oracle += adaptive_arc_length(seg);
        }
        assert!(
            (total.re - oracle).abs() < 1e-10,
            "panel={}, oracle={}",
            total.re,
            oracle
        );
    }

    #[test]
    fn arc_length_of_c1_matches_oracle() {
        let c = ellipse_boundary(2.0, 1.0).unwrap();
        let seg = c.segment("C1").unwrap();
        let q = PanelQuadrature::with_panels(24);
        let v = integrate_segment(seg, &q, |t| C64::new(seg.velocity(t).norm(), 0.0)).unwrap();
        assert!((v.re - adaptive_arc_length(seg)).abs() < 1e-10);
    }

    #[test]
    fn closed_contour_integral_of_velocity_vanishes() {
        let c = ellipse_boundary(2.0, 1.0).unwrap();
        let q = PanelQuadrature::with_panels(24);
        let v = integrate_contour(&c, &q, |seg, t| seg.velocity(t)).unwrap();
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn doubling_panels_changes_smooth_result_below_tolerance() {
        let c = ellipse_boundary(2.0, 1.0).unwrap();
        let seg = c.segment("C1").unwrap();
        let f = |t: f64| seg.position(t) * seg.position(t) * seg.velocity(t);
        let v1 = integrate_segment(seg, &PanelQuadrature::with_panels(24), f).unwrap();
        let v2 = integrate_segment(seg, &PanelQuadrature::with_panels(48), f).unwrap();
        assert!((v1 - v2).norm() < 1e-10);
    }

    #[test]
    fn polygon_endpoints_interpolate_vertices() {
        let verts = [
            C64::new(4.0, -1.0),
            C64::new(0.0, 3.0),
            C64::new(-4.0, -1.0),
            C64::new(0.0, 0.0),
        ];
        let c = polygon_boundary(&verts).unwrap();
        for (j, seg) in c.segments.iter().enumerate() {
            assert!((seg.position(-1.0) - verts[j]).norm() < 1e-15);
            assert!((seg.position(1.0) - verts[(j + 1) % 4]).norm() < 1e-15);
        }
        // side 1 midpoint from the paper's quadrilateral
        assert!((c.segments[0].position(0.0) - C64::new(2.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn polygon_interior_angle_sum_is_two_pi() {
        let verts = [
            C64::new(4.0, -1.0),
            C64::new(0.0, 3.0),
            C64::new(-4.0, -1.0),
            C64::new(0.0, 0.0),
        ];
        let sum: f64 = polygon_interior_angles(&verts).iter().sum();
        assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-12);
        let square = [
            C64::new(1.0, 1.0),
            C64::new(-1.0, 1.0),
            C64::new(-1.0, -1.0),
            C64::new(1.0, -1.0),
        ];
        let sum: f64 = polygon_interior_angles(&square).iter().sum();
        assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn polygon_rejects_degenerate_input() {
        let repeated = [
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(-1.0, 1.0),
            C64::new(-1.0, -1.0),
        ];
        assert!(polygon_boundary(&repeated).is_err());
        let clockwise = [
            C64::new(1.0, -1.0),
            C64::new(-1.0, -1.0),
            C64::new(-1.0, 1.0),
            C64::new(1.0, 1.0),
        ];
        assert!(polygon_boundary(&clockwise).is_err());
        let bowtie = [
            C64::new(0.0, 0.0),
            C64::new(1.0, 1.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
        ];
        assert!(polygon_boundary(&bowtie).is_err());
    }

    #[test]
    fn cauchy_orientation_check() {
        // contour integral of dzeta/(zeta - z0): 2*pi*i inside, 0 outside
        let c = ellipse_boundary(2.0, 1.0).unwrap();
        let q = PanelQuadrature::with_panels(24);
        let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
        for (z0, expect) in [
            (C64::new(0.3, 0.2), two_pi_i),
            (C64::new(-1.2, 0.1), two_pi_i),
            (C64::new(3.0, 0.0), C64::new(0.0, 0.0)),
            (C64::new(0.0, 2.0), C64::new(0.0, 0.0)),
        ] {
            let v = integrate_contour(&c, &q, |seg, t| {
                seg.velocity(t) / (seg.position(t) - z0)
            })
            .unwrap();
            assert!((v - expect).norm() < 1e-8, "z0={z0}: got {v}");
        }
        let verts = [
            C64::new(4.0, -1.0),
            C64::new(0.0, 3.0),
            C64::new(-4.0, -1.0),
            C64::new(0.0, 0.0),
        ];
        let p = polygon_boundary(&verts).unwrap();
        let q12 = PanelQuadrature::with_panels(12);
        let v = integrate_contour(&p, &q12, |seg, t| {
            seg.velocity(t) / (seg.position(t) - C64::new(0.0, 1.0))
        })
        .unwrap();
        assert!((v - two_pi_i).norm() < 1e-8);
    }

    #[test]
    fn winding_numbers() {
        let verts = [
            C64::new(4.0, -1.0),
            C64::new(0.0, 3.0),
            C64::new(-4.0, -1.0),
            C64::new(0.0, 0.0),
        ];
        let p = polygon_boundary(&verts).unwrap();
        assert_eq!(p.winding_number(C64::new(0.0, 1.0), 400), 1);
        assert_eq!(p.winding_number(C64::new(0.0, -0.5), 400), 0);
        assert_eq!(p.winding_number(C64::new(5.0, 5.0), 400), 0);
    }

    #[test]
    fn smooth_contour_tangent_winding_is_two_pi() {
        let c = ellipse_boundary(2.0, 1.0).unwrap();
        let w = c.tangent_winding(400);
        assert!((w - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn graded_panels_resolve_quarter_power_corner_singularity() {
        // integrand (1+s)^(-1/4) over [-1,1]: singular like the sqrt(Phi')
        // scale of a reflex corner; exact integral is (4/3) 2^(3/4).
        let seg = BoundarySegment::new(
            "s",
            (-1.0, 1.0),
            |s| C64::new(s, 0.0),
            |_| C64::new(1.0, 0.0),
        )
        .with_corners(true, false);
        let exact = 4.0 / 3.0 * 2.0f64.powf(0.75);
        let q = PanelQuadrature::new(32, 0.5, 16);
        let v = integrate_segment(&seg, &q, |s| C64::new((1.0 + s).powf(-0.25), 0.0)).unwrap();
        let rel = (v.re - exact).abs() / exact;
        assert!(rel < 1e-8, "rel err {rel}");
    }

    #[test]
    fn quadrature_reports_non_finite_integrand() {
        let seg = BoundarySegment::new(
            "s",
            (-1.0, 1.0),
            |s| C64::new(s, 0.0),
            |_| C64::new(1.0, 0.0),
        );
        let q = PanelQuadrature::with_panels(2);
        let err = integrate_segment(&seg, &q, |s| C64::new(1.0 / (s - s), 0.0));
        assert!(matches!(err, Err(Error::Evaluation(_))));
    }
}
