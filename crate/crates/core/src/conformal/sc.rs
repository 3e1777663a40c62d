//! Numerical Schwarz-Christoffel map between the unit disc and a
//! quadrilateral (one reflex vertex allowed).
//!
//! The disc-to-polygon map is F(w) = z_c + C int_0^w prod_j
//! (1 - u conj(q_j))^(alpha_j - 1) du with prevertices q_j = e^{i phi_j}.
//! The parameter problem fixes three prevertex angles, solves for the
//! fourth by a damped Newton iteration on one side-length ratio, then
//! recomposes with a disc automorphism so that F(0) is the polygon's area
//! centroid and the prevertex of v_1 is 1.
//!
//! Numerical ground rules, learned the hard way:
//! - near a prevertex, 1 - u conj(q_j) is evaluated from the *angle
//!   difference* delta as -2i sin(delta/2) e^{i delta/2}; forming it from
//!   complex subtraction loses all digits (and can hit exactly zero),
//! - arc integrals that end at a prevertex absorb the (...)^(alpha-1)
//!   endpoint singularity by the substitution delta = span * tau^(1/alpha),
//!   keeping the singular factor as a power of tau.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::{
    gauss_legendre, polygon_boundary, polygon_interior_angles, BoundaryContour, PanelQuadrature,
};

use super::{BoundaryMapData, BoundaryNode};

const TAU: f64 = 2.0 * std::f64::consts::PI;
const ARC_PANELS: usize = 10;

/// 1 - e^{i delta} without cancellation.
fn one_minus_e(delta: f64) -> C64 {
    C64::new(0.0, -2.0 * (0.5 * delta).sin()) * C64::from_polar(1.0, 0.5 * delta)
}

fn cpowf(base: C64, p: f64) -> C64 {
    base.powf(p)
}

#[derive(Debug)]
pub struct SchwarzChristoffelMap {
    pub vertices: Vec<C64>,
    /// Interior angles alpha_j in units of pi.
    pub angles: Vec<f64>,
    /// Prevertex angles phi_j, increasing, phi_1 = 0.
    pub prevertex_angles: Vec<f64>,
    /// Multiplier C of the side integral.
    pub constant: C64,
    /// Conformal center z_c = F(0).
    pub center: C64,
    sqrt_constant: C64,
    gl: (Vec<f64>, Vec<f64>),
    seed_grid: OnceLock<Vec<(C64, C64)>>,
}

impl SchwarzChristoffelMap {
    pub fn prevertices(&self) -> Vec<C64> {
        self.prevertex_angles
            .iter()
            .map(|&p| C64::from_polar(1.0, p))
            .collect()
    }

    /// Diameter scale of the polygon, used for tolerances.
    fn scale(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - self.center).norm())
            .fold(0.0, f64::max)
    }

    /// prod_j (1 - u conj(q_j))^(alpha_j - 1) at an interior point.
    pub fn integrand(&self, u: C64) -> C64 {
        let mut out = C64::new(1.0, 0.0);
        for (&phi, &al) in self.prevertex_angles.iter().zip(&self.angles) {
            out *= cpowf(1.0 - u * C64::from_polar(1.0, -phi), al - 1.0);
        }
        out
    }

    /// F'(w) = C prod (1 - w conj q_j)^(alpha_j - 1).
    pub fn forward_derivative(&self, w: C64) -> C64 {
        self.constant * self.integrand(w)
    }

    /// F''(w)/F'(w) = sum (alpha_j - 1)/(w - q_j).
    pub fn forward_log_derivative_slope(&self, w: C64) -> C64 {
        let mut out = C64::new(0.0, 0.0);
        for (&phi, &al) in self.prevertex_angles.iter().zip(&self.angles) {
            out += (al - 1.0) / (w - C64::from_polar(1.0, phi));
        }
        out
    }

    /// Global analytic square root of F': sqrt(C) prod (...)^((alpha-1)/2).
    /// Each factor 1 - w conj(q_j) has nonnegative real part on the closed
    /// disc, so principal powers never cross a cut.
    pub fn sqrt_forward_derivative(&self, w: C64) -> C64 {
        let mut out = self.sqrt_constant;
        for (&phi, &al) in self.prevertex_angles.iter().zip(&self.angles) {
            out *= cpowf(1.0 - w * C64::from_polar(1.0, -phi), 0.5 * (al - 1.0));
        }
        out
    }

    /// Integral of the SC integrand along the circular arc from prevertex j
    /// to angle phis[j] + span; the endpoint singularity at the prevertex is
    /// absorbed by the substitution delta = span tau^(1/alpha_j).
    fn arc_integral_from_prevertex(&self, j: usize, span: f64) -> C64 {
        if span == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let al = self.angles[j];
        let inv_al = 1.0 / al;
        let (xs, ws) = (&self.gl.0, &self.gl.1);
        let mut total = C64::new(0.0, 0.0);
        for p in 0..ARC_PANELS {
            let lo = p as f64 / ARC_PANELS as f64;
            let hi = (p + 1) as f64 / ARC_PANELS as f64;
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for (x, gw) in xs.iter().zip(ws) {
                let tau = mid + half * x;
                let sig = tau.powf(inv_al);
                let delta = span * sig;
                // singular factor rewritten: (1 - e^{i delta})^(al-1)
                //   = (-2i sin(delta/2) e^{i delta/2})^(al-1)
                //   = (-i delta e^{i delta/2} sinc)(al-1); take tau powers out
                let sinc = if delta.abs() < 1e-30 {
                    1.0
                } else {
                    (0.5 * delta).sin() / (0.5 * delta)
                };
                let base = C64::new(0.0, -span * sinc) * C64::from_polar(1.0, 0.5 * delta);
                let singular = cpowf(base, al - 1.0) * tau.powf((al - 1.0) * inv_al);
                let mut rest = C64::new(1.0, 0.0);
                for (i, (&phi, &ali)) in
                    self.prevertex_angles.iter().zip(&self.angles).enumerate()
                {
                    if i == j {
                        continue;
                    }
                    let d = (self.prevertex_angles[j] - phi) + delta;
                    rest *= cpowf(one_minus_e(d), ali - 1.0);
                }
                let u = C64::from_polar(1.0, self.prevertex_angles[j] + delta);
                let jac = span * inv_al * tau.powf(inv_al - 1.0);
                total += half * gw * singular * rest * (C64::new(0.0, 1.0) * u) * jac;
            }
        }
        total
    }

    /// Integral of the SC integrand along the radius from 0 to prevertex j,
    /// with the endpoint singularity absorbed by 1 - t = tau^(1/alpha_j).
    fn radial_integral_to_prevertex(&self, j: usize) -> C64 {
        let al = self.angles[j];
        let inv_al = 1.0 / al;
        let qj = C64::from_polar(1.0, self.prevertex_angles[j]);
        let (xs, ws) = (&self.gl.0, &self.gl.1);
        let mut total = C64::new(0.0, 0.0);
        for p in 0..ARC_PANELS {
            let lo = p as f64 / ARC_PANELS as f64;
            let hi = (p + 1) as f64 / ARC_PANELS as f64;
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for (x, gw) in xs.iter().zip(ws) {
                let tau = mid + half * x;
                let one_minus_t = tau.powf(inv_al);
                let u = (1.0 - one_minus_t) * qj;
                // factor j: (1 - t)^(al-1) = tau^((al-1)/al)
                let mut val = C64::new(tau.powf((al - 1.0) * inv_al), 0.0);
                for (i, (&phi, &ali)) in
                    self.prevertex_angles.iter().zip(&self.angles).enumerate()
                {
                    if i == j {
                        continue;
                    }
                    val *= cpowf(1.0 - u * C64::from_polar(1.0, -phi), ali - 1.0);
                }
                let jac = inv_al * tau.powf(inv_al - 1.0);
                total += half * gw * val * qj * jac;
            }
        }
        total
    }

    /// Integral of the SC integrand along the straight path 0 -> w, panels
    /// refined toward the endpoint down to its distance from the nearest
    /// prevertex.
    fn path_integral_from_origin(&self, w: C64) -> C64 {
        let d_min = self
            .prevertex_angles
            .iter()
            .map(|&p| (w - C64::from_polar(1.0, p)).norm())
            .fold(f64::INFINITY, f64::min);
        let mut bps = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let mut t = 0.25f64;
        while t * w.norm() > 0.5 * d_min.max(1e-13) && bps.len() < 64 {
            t *= 0.5;
            bps.push(1.0 - t);
        }
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bps.dedup();
        let (xs, ws) = (&self.gl.0, &self.gl.1);
        let mut total = C64::new(0.0, 0.0);
        for pair in bps.windows(2) {
            let mid = 0.5 * (pair[0] + pair[1]);
            let half = 0.5 * (pair[1] - pair[0]);
            for (x, gw) in xs.iter().zip(ws) {
                let u = w * (mid + half * x);
                total += half * gw * self.integrand(u);
            }
        }
        total * w
    }

    /// Side j runs from prevertex j to prevertex j+1; its image length
    /// integral, split at the arc midpoint with the singular substitution
    /// applied from both ends.
    fn side_image(&self, j: usize) -> C64 {
        let n = self.prevertex_angles.len();
        let jn = (j + 1) % n;
        let ph0 = self.prevertex_angles[j];
        let mut ph1 = self.prevertex_angles[jn];
        if ph1 <= ph0 {
            ph1 += TAU;
        }
        let mid = 0.5 * (ph0 + ph1);
        let i1 = self.arc_integral_from_prevertex(j, mid - ph0);
        // from prevertex j+1 backward to the midpoint; shift its angle by a
        // full turn when the side wraps through 0
        let span_back = mid - ph1;
        let i2 = self.arc_integral_from_prevertex_shifted(jn, ph1, span_back);
        i1 - i2
    }

    fn arc_integral_from_prevertex_shifted(&self, j: usize, phi_j: f64, span: f64) -> C64 {
        // same as arc_integral_from_prevertex but with an explicit base
        // angle (used when the side wraps past 2 pi)
        if span == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let al = self.angles[j];
        let inv_al = 1.0 / al;
        let (xs, ws) = (&self.gl.0, &self.gl.1);
        let mut total = C64::new(0.0, 0.0);
        for p in 0..ARC_PANELS {
            let lo = p as f64 / ARC_PANELS as f64;
            let hi = (p + 1) as f64 / ARC_PANELS as f64;
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for (x, gw) in xs.iter().zip(ws) {
                let tau = mid + half * x;
                let sig = tau.powf(inv_al);
                let delta = span * sig;
                let sinc = if delta.abs() < 1e-30 {
                    1.0
                } else {
                    (0.5 * delta).sin() / (0.5 * delta)
                };
                let base = C64::new(0.0, -span * sinc) * C64::from_polar(1.0, 0.5 * delta);
                let singular = cpowf(base, al - 1.0) * tau.powf((al - 1.0) * inv_al);
                let mut rest = C64::new(1.0, 0.0);
                for (i, (&phi, &ali)) in
                    self.prevertex_angles.iter().zip(&self.angles).enumerate()
                {
                    if i == j {
                        continue;
                    }
                    let d = (phi_j - phi) + delta;
                    rest *= cpowf(one_minus_e(d), ali - 1.0);
                }
                let u = C64::from_polar(1.0, phi_j + delta);
                let jac = span * inv_al * tau.powf(inv_al - 1.0);
                total += half * gw * singular * rest * (C64::new(0.0, 1.0) * u) * jac;
            }
        }
        total
    }

    /// Solve the parameter problem for a counterclockwise quadrilateral.
    pub fn solve(vertices: &[C64]) -> Result<Self> {
        polygon_boundary(vertices)?;
        let verts = vertices.to_vec();
        let angles = polygon_interior_angles(&verts);
        let defect: f64 = angles.iter().map(|a| 1.0 - a).sum::<f64>() - 2.0;
        if defect.abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "quadrilateral angle condition violated by {defect:.3e}"
            )));
        }
        if angles.iter().any(|&a| a <= 0.0 || a >= 2.0) {
            return Err(Error::Domain("interior angles must lie in (0, 2 pi)".into()));
        }

        let gl = gauss_legendre(16);
        let make = |p4: f64| -> SchwarzChristoffelMap {
            SchwarzChristoffelMap {
                vertices: verts.clone(),
                angles: angles.clone(),
                prevertex_angles: vec![0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, p4],
                constant: C64::new(1.0, 0.0),
                center: C64::new(0.0, 0.0),
                sqrt_constant: C64::new(1.0, 0.0),
                gl: gl.clone(),
                seed_grid: OnceLock::new(),
            }
        };
        let target = ((verts[3] - verts[2]).norm() / (verts[0] - verts[3]).norm()).ln();
        let objective = |p4: f64| {
            let m = make(p4);
            (m.side_image(2).norm() / m.side_image(3).norm()).ln() - target
        };

        // damped Newton on the free prevertex angle, with bracket-based step
        // rejection (a step that would cross a neighboring prevertex is
        // replaced by a bisection step)
        let mut lo = std::f64::consts::PI + 1e-9;
        let mut hi = TAU - 1e-9;
        let mut g_lo = objective(lo);
        let g_hi = objective(hi);
        if g_lo * g_hi > 0.0 {
            return Err(Error::NonConvergence(format!(
                "prevertex objective does not bracket a root: g({lo}) = {g_lo}, g({hi}) = {g_hi}"
            )));
        }
        let mut x = 0.5 * (lo + hi);
        let mut gx = objective(x);
        for _ in 0..80 {
            if gx.abs() < 1e-14 || hi - lo < 1e-15 {
                break;
            }
            if gx * g_lo <= 0.0 {
                hi = x;
            } else {
                lo = x;
                g_lo = gx;
            }
            let h = 1e-7 * (hi - lo).max(1e-7);
            let slope = (objective(x + h) - objective(x - h)) / (2.0 * h);
            let mut next = if slope.abs() > 1e-300 {
                x - gx / slope
            } else {
                0.5 * (lo + hi)
            };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            x = next;
            gx = objective(x);
        }
        let stage1 = make(x);
        let (c1, a1, resid) = stage1.fit_affine();
        if resid > 1e-8 {
            return Err(Error::NonConvergence(format!(
                "parameter problem vertex residual {resid:.3e} exceeds 1e-8"
            )));
        }

        // move the conformal center to the area centroid and put the
        // prevertex of v_1 at angle 0
        let centroid = area_centroid(&verts);
        let mut a = C64::new(0.0, 0.0);
        let mut ok = false;
        for _ in 0..200 {
            let r = a1 + c1 * stage1.path_integral_from_origin(a) - centroid;
            if r.norm() < 1e-13 * stage1_scale(&verts) {
                ok = true;
                break;
            }
            let d = c1 * stage1.integrand(a);
            let mut step = -r / d;
            let mut cand = a + step;
            while cand.norm() > 0.97 {
                step *= 0.5;
                cand = a + step;
            }
            a = cand;
        }
        if !ok {
            return Err(Error::NonConvergence(
                "centroid preimage Newton did not converge".into(),
            ));
        }
        let p1 = C64::from_polar(1.0, stage1.prevertex_angles[0]);
        let rot = (p1 - a) / (1.0 - a.conj() * p1);
        let theta = rot.arg();
        let mut new_angles: Vec<f64> = stage1
            .prevertex_angles
            .iter()
            .map(|&p| {
                let q = C64::from_polar(1.0, p);
                let img = (q - a) / (1.0 - a.conj() * q) * C64::from_polar(1.0, -theta);
                img.arg().rem_euclid(TAU)
            })
            .collect();
        new_angles[0] = 0.0;
        for i in 1..new_angles.len() {
            while new_angles[i] <= new_angles[i - 1] {
                new_angles[i] += TAU;
            }
        }
        if new_angles[3] >= TAU {
            return Err(Error::NonConvergence(
                "recentering scrambled the prevertex order".into(),
            ));
        }

        let mut map = SchwarzChristoffelMap {
            vertices: verts.clone(),
            angles,
            prevertex_angles: new_angles,
            constant: C64::new(1.0, 0.0),
            center: C64::new(0.0, 0.0),
            sqrt_constant: C64::new(1.0, 0.0),
            gl,
            seed_grid: OnceLock::new(),
        };
        let (c2, a2, resid2) = map.fit_affine();
        map.constant = c2;
        map.center = a2;
        map.sqrt_constant = c2.sqrt();
        if resid2 > 1e-8 {
            return Err(Error::NonConvergence(format!(
                "recentered map vertex residual {resid2:.3e} exceeds 1e-8"
            )));
        }
        if (map.center - centroid).norm() > 1e-8 * stage1_scale(&verts) {
            return Err(Error::NonConvergence(format!(
                "conformal center drifted from the centroid by {:.3e}",
                (map.center - centroid).norm()
            )));
        }
        Ok(map)
    }

    /// Rebuild a map from previously solved parameters (descriptor cache).
    pub fn from_parameters(
        vertices: &[C64],
        prevertex_angles: &[f64],
        constant: C64,
        center: C64,
    ) -> Result<Self> {
        polygon_boundary(vertices)?;
        let angles = polygon_interior_angles(vertices);
        let map = SchwarzChristoffelMap {
            vertices: vertices.to_vec(),
            angles,
            prevertex_angles: prevertex_angles.to_vec(),
            constant,
            center,
            sqrt_constant: constant.sqrt(),
            gl: gauss_legendre(16),
            seed_grid: OnceLock::new(),
        };
        let resid = map.vertex_residual();
        if resid > 1e-6 {
            return Err(Error::Domain(format!(
                "cached SC parameters do not reproduce the vertices (residual {resid:.3e})"
            )));
        }
        Ok(map)
    }

    /// Fit C and A of F = A + C G to the target vertices using the side
    /// images; returns (C, A, max vertex residual).
    fn fit_affine(&self) -> (C64, C64, f64) {
        let n = self.vertices.len();
        let mut cumulative = vec![C64::new(0.0, 0.0)];
        for j in 0..n - 1 {
            let prev = *cumulative.last().unwrap();
            cumulative.push(prev + self.side_image(j));
        }
        let c = (self.vertices[1] - self.vertices[0]) / cumulative[1];
        let g_q1 = self.radial_integral_to_prevertex(0);
        let a = self.vertices[0] - c * g_q1;
        let mut resid = 0.0f64;
        // closure check: the fourth side must return to v_1
        let back = *cumulative.last().unwrap() + self.side_image(n - 1);
        resid = resid.max((c * back).norm());
        for j in 0..n {
            let image = a + c * (g_q1 + cumulative[j]);
            resid = resid.max((image - self.vertices[j]).norm());
        }
        (c, a, resid)
    }

    fn vertex_residual(&self) -> f64 {
        let g_q1 = self.radial_integral_to_prevertex(0);
        let mut cum = C64::new(0.0, 0.0);
        let mut resid = (self.center + self.constant * g_q1 - self.vertices[0]).norm();
        for j in 0..self.vertices.len() - 1 {
            cum += self.side_image(j);
            let image = self.center + self.constant * (g_q1 + cum);
            resid = resid.max((image - self.vertices[j + 1]).norm());
        }
        resid
    }

    /// Disc-to-polygon map; valid on the closed disc.
    pub fn disc_to_domain(&self, w: C64) -> Result<C64> {
        if w.norm() > 1.0 + 1e-12 {
            return Err(Error::Domain(format!(
                "sc_forward requires |w| <= 1, got {}",
                w.norm()
            )));
        }
        if w.norm() > 1.0 - 1e-12 {
            let (j, delta) = self.locate_on_circle(w.arg());
            let base = self.radial_integral_to_prevertex(j)
                + self.arc_integral_from_prevertex(j, delta);
            return Ok(self.center + self.constant * base);
        }
        Ok(self.center + self.constant * self.path_integral_from_origin(w))
    }

    /// Nearest prevertex anchor (index, signed angular offset) for a circle
    /// angle psi.
    fn locate_on_circle(&self, psi: f64) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY, 0.0f64);
        for (j, &phi) in self.prevertex_angles.iter().enumerate() {
            let mut d = (psi - phi).rem_euclid(TAU);
            if d > std::f64::consts::PI {
                d -= TAU;
            }
            if d.abs() < best.1 {
                best = (j, d.abs(), d);
            }
        }
        (best.0, best.2)
    }

    /// Polygon-to-disc map by Newton iteration on the forward map, seeded
    /// from a cached forward-evaluated grid.
    pub fn domain_to_disc(&self, z: C64) -> Result<C64> {
        if !self.point_strictly_inside(z) {
            return Err(Error::Domain(format!(
                "sc_inverse requires a point strictly inside the polygon, got {z}"
            )));
        }
        let seeds = self.seed_grid.get_or_init(|| {
            let mut seeds = Vec::new();
            let n = 56;
            for i in 0..n {
                for j in 0..n {
                    let w = C64::new(
                        2.0 * (i as f64 + 0.5) / n as f64 - 1.0,
                        2.0 * (j as f64 + 0.5) / n as f64 - 1.0,
                    );
                    if w.norm() > 0.985 {
                        continue;
                    }
                    if let Ok(img) = self.disc_to_domain(w) {
                        seeds.push((w, img));
                    }
                }
            }
            seeds
        });
        super::newton_inverse(
            z,
            seeds,
            |w| self.disc_to_domain(w),
            |w| Ok(self.forward_derivative(w)),
            |w| {
                if w.norm() > 1.0 - 1e-12 {
                    w * ((1.0 - 1e-12) / w.norm())
                } else {
                    w
                }
            },
            1e-11 * self.scale(),
        )
    }

    fn point_strictly_inside(&self, z: C64) -> bool {
        let n = self.vertices.len();
        // reject points essentially on the boundary
        for j in 0..n {
            let a = self.vertices[j];
            let b = self.vertices[(j + 1) % n];
            let ab = b - a;
            let t = ((z - a).re * ab.re + (z - a).im * ab.im) / ab.norm_sqr();
            let t = t.clamp(0.0, 1.0);
            if (z - (a + ab * t)).norm() < 1e-12 * self.scale().max(1.0) {
                return false;
            }
        }
        let mut winding = 0i32;
        for j in 0..n {
            let a = self.vertices[j];
            let b = self.vertices[(j + 1) % n];
            if (a.im <= z.im) != (b.im <= z.im) {
                let x_cross = a.re + (z.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if x_cross > z.re {
                    winding += if b.im > a.im { 1 } else { -1 };
                }
            }
        }
        winding != 0
    }

    /// Boundary correspondence: circle angle psi with F(e^{i psi}) =
    /// zeta_j(s), solved per node by Newton anchored at the nearer corner.
    pub(super) fn boundary_data(
        &self,
        contour: &BoundaryContour,
        quad: &PanelQuadrature,
    ) -> Result<BoundaryMapData> {
        let n = self.vertices.len();
        if contour.segments.len() != n {
            return Err(Error::Domain(
                "contour does not match the polygon of this map".into(),
            ));
        }
        for (j, seg) in contour.segments.iter().enumerate() {
            if (seg.position(seg.t_start) - self.vertices[j]).norm() > 1e-10 {
                return Err(Error::Domain(format!(
                    "segment '{}' does not start at vertex {}",
                    seg.label, j
                )));
            }
        }
        let mut segments = Vec::new();
        for (j, seg) in contour.segments.iter().enumerate() {
            let jn = (j + 1) % n;
            let ph0 = self.prevertex_angles[j];
            let mut ph1 = self.prevertex_angles[jn];
            if ph1 <= ph0 {
                ph1 += TAU;
            }
            let arc = ph1 - ph0;
            let side_len = (self.vertices[jn] - self.vertices[j]).norm();
            let nodes_tw = quad.segment_nodes(seg);
            let mut nodes = Vec::with_capacity(nodes_tw.len());
            let mut delta_prev: Option<(f64, f64)> = None; // (s, delta from active anchor)
            for &(s, weight) in &nodes_tw {
                let zeta = seg.position(s);
                let from_start = s < 0.0;
                let (anchor, vertex, sign) = if from_start {
                    (j, self.vertices[j], 1.0)
                } else {
                    (jn, self.vertices[jn], -1.0)
                };
                let anchor_phi = if from_start { ph0 } else { ph1 };
                let al = self.angles[anchor];
                let dist = (zeta - vertex).norm();
                // asymptotic seed |delta| ~ (al |zeta - v| / |C P|)^(1/al)
                let mut p_rest = self.constant.norm();
                for (i, &phi) in self.prevertex_angles.iter().enumerate() {
                    if i == anchor {
                        continue;
                    }
                    p_rest *= one_minus_e(anchor_phi - phi)
                        .norm()
                        .powf(self.angles[i] - 1.0);
                }
                let mut delta = sign * (al * dist / p_rest).powf(1.0 / al);
                if let Some((s_prev, d_prev)) = delta_prev {
                    // continuation seed only while staying on the same anchor
                    if (s_prev < 0.0) == from_start {
                        let prev_zeta = seg.position(s_prev);
                        let prev_vertex_dist = (prev_zeta - vertex).norm();
                        if prev_vertex_dist > 1e-300 {
                            let guess = d_prev * (dist / prev_vertex_dist).powf(1.0 / al);
                            if guess.abs() <= arc {
                                delta = guess;
                            }
                        }
                    }
                }
                delta = delta.clamp(
                    if from_start { 1e-300 } else { -0.75 * arc },
                    if from_start { 0.75 * arc } else { -1e-300 },
                );
                let mut converged = false;
                for _ in 0..80 {
                    let image = vertex
                        + self.constant
                            * self.arc_integral_from_prevertex_shifted(anchor, anchor_phi, delta);
                    let r = image - zeta;
                    if r.norm() < 1e-13 * side_len {
                        converged = true;
                        break;
                    }
                    let df = self.constant
                        * self.integrand_arc_rel_at(anchor, anchor_phi, delta)
                        * C64::new(0.0, 1.0)
                        * C64::from_polar(1.0, anchor_phi + delta);
                    let step = (-r / df).re;
                    let max_step = 0.4 * arc;
                    let step = step.clamp(-max_step, max_step);
                    delta = (delta + step).clamp(
                        if from_start { 1e-300 } else { -(arc - 1e-13) },
                        if from_start { arc - 1e-13 } else { -1e-300 },
                    );
                }
                if !converged {
                    return Err(Error::NonConvergence(format!(
                        "boundary correspondence stalled on side {} at s = {s}",
                        j + 1
                    )));
                }
                delta_prev = Some((s, delta));
                let psi = anchor_phi + delta;
                let sqrt_fp = self.sqrt_forward_derivative_arc_at(anchor, anchor_phi, delta);
                nodes.push(BoundaryNode {
                    t: s,
                    weight,
                    zeta,
                    dzeta: seg.velocity(s),
                    phi: C64::from_polar(1.0, psi),
                    sqrt_dphi: 1.0 / sqrt_fp,
                });
            }
            segments.push((seg.label.clone(), nodes));
        }
        Ok(BoundaryMapData { segments })
    }

    fn integrand_arc_rel_at(&self, j: usize, phi_j: f64, delta: f64) -> C64 {
        let mut out = C64::new(1.0, 0.0);
        for (i, (&phi, &al)) in self.prevertex_angles.iter().zip(&self.angles).enumerate() {
            let d = if i == j { delta } else { (phi_j - phi) + delta };
            out *= cpowf(one_minus_e(d), al - 1.0);
        }
        out
    }

    fn sqrt_forward_derivative_arc_at(&self, j: usize, phi_j: f64, delta: f64) -> C64 {
        let mut out = self.sqrt_constant;
        for (i, (&phi, &al)) in self.prevertex_angles.iter().zip(&self.angles).enumerate() {
            let d = if i == j { delta } else { (phi_j - phi) + delta };
            out *= cpowf(one_minus_e(d), 0.5 * (al - 1.0));
        }
        out
    }
}

fn stage1_scale(verts: &[C64]) -> f64 {
    verts.iter().map(|v| v.norm()).fold(1.0, f64::max)
}

fn area_centroid(verts: &[C64]) -> C64 {
    let n = verts.len();
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for j in 0..n {
        let p = verts[j];
        let q = verts[(j + 1) % n];
        let cross = p.re * q.im - q.re * p.im;
        area2 += cross;
        cx += (p.re + q.re) * cross;
        cy += (p.im + q.im) * cross;
    }
    C64::new(cx / (3.0 * area2), cy / (3.0 * area2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paper_quad() -> Vec<C64> {
        vec![
            C64::new(4.0, -1.0),
            C64::new(0.0, 3.0),
            C64::new(-4.0, -1.0),
            C64::new(0.0, 0.0),
        ]
    }

    #[test]
    fn paper_quadrilateral_parameters_converge() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        assert!(m.vertex_residual() < 1e-8, "residual {}", m.vertex_residual());
        // reflex corner at the origin
        assert!(m.angles[3] > 1.0 && m.angles[3] < 2.0);
        let s: f64 = m.angles.iter().map(|a| 1.0 - a).sum();
        assert!((s - 2.0).abs() < 1e-12);
        for q in m.prevertices() {
            assert!((q.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn prevertices_map_to_vertices() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        for (q, v) in m.prevertices().iter().zip(&m.vertices) {
            let img = m.disc_to_domain(*q).unwrap();
            assert!((img - v).norm() < 1e-8, "prevertex {q} -> {img}, want {v}");
        }
    }

    #[test]
    fn side_length_ratios_match_target() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        let li: Vec<f64> = (0..4).map(|j| m.side_image(j).norm()).collect();
        for j in 1..4 {
            let target = (m.vertices[(j + 1) % 4] - m.vertices[j]).norm()
                / (m.vertices[1] - m.vertices[0]).norm();
            assert!(((li[j] / li[0]) - target).abs() < 1e-8);
        }
    }

    #[test]
    fn square_prevertices_are_fourth_roots_of_unity() {
        let square = vec![
            C64::new(1.0, 1.0),
            C64::new(-1.0, 1.0),
            C64::new(-1.0, -1.0),
            C64::new(1.0, -1.0),
        ];
        let m = SchwarzChristoffelMap::solve(&square).unwrap();
        for (j, &p) in m.prevertex_angles.iter().enumerate() {
            let expect = j as f64 * std::f64::consts::FRAC_PI_2;
            assert!(
                (p - expect).abs() < 1e-9,
                "prevertex {j} at angle {p}, want {expect}"
            );
        }
    }

    #[test]
    fn conformal_center_is_area_centroid() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        let centroid = area_centroid(&paper_quad());
        assert!((m.center - centroid).norm() < 1e-9);
        assert!((m.disc_to_domain(C64::new(0.0, 0.0)).unwrap() - centroid).norm() < 1e-10);
    }

    #[test]
    fn forward_derivative_matches_finite_differences() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..25 {
            let w = C64::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(0.0..TAU));
            let h = 1e-6;
            let fd = (m.disc_to_domain(w + h).unwrap() - m.disc_to_domain(w - h).unwrap())
                / (2.0 * h);
            let d = m.forward_derivative(w);
            assert!((d - fd).norm() / d.norm() < 1e-6, "w={w}");
        }
    }

    #[test]
    fn inverse_round_trips() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let w = C64::from_polar(rng.gen_range(0.0..0.95), rng.gen_range(0.0..TAU));
            let z = m.disc_to_domain(w).unwrap();
            let back = m.domain_to_disc(z).unwrap();
            assert!(
                (back - w).norm() < 1e-10,
                "w={w}, z={z}, back={back} ({})",
                (back - w).norm()
            );
        }
    }

    #[test]
    fn inverse_rejects_exterior_points() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        assert!(m.domain_to_disc(C64::new(0.0, -0.5)).is_err());
        assert!(m.domain_to_disc(C64::new(10.0, 0.0)).is_err());
        // a vertex is on the boundary
        assert!(m.domain_to_disc(C64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn near_boundary_points_invert_close_to_the_circle() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        // offset 1e-6 inward from a side midpoint
        let a = m.vertices[0];
        let b = m.vertices[1];
        let mid = 0.5 * (a + b);
        let inward = C64::new(0.0, 1.0) * (b - a) / (b - a).norm();
        let z = mid + 1e-6 * inward;
        let w = m.domain_to_disc(z).unwrap();
        assert!(w.norm() < 1.0 && w.norm() > 1.0 - 1e-4, "|w| = {}", w.norm());
    }

    #[test]
    fn prevertex_arc_midpoints_land_on_sides() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        for j in 0..4 {
            let ph0 = m.prevertex_angles[j];
            let mut ph1 = m.prevertex_angles[(j + 1) % 4];
            if ph1 <= ph0 {
                ph1 += TAU;
            }
            let w = C64::from_polar(1.0, 0.5 * (ph0 + ph1));
            let img = m.disc_to_domain(w).unwrap();
            let a = m.vertices[j];
            let b = m.vertices[(j + 1) % 4];
            let ab = b - a;
            let t = ((img - a).re * ab.re + (img - a).im * ab.im) / ab.norm_sqr();
            let dist = (img - (a + ab * t.clamp(0.0, 1.0))).norm();
            assert!(dist < 1e-8, "arc midpoint {j} off side by {dist}");
        }
    }

    #[test]
    fn sqrt_forward_derivative_squares_to_derivative() {
        let m = SchwarzChristoffelMap::solve(&paper_quad()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let w = C64::from_polar(rng.gen_range(0.0..0.98), rng.gen_range(0.0..TAU));
            let s = m.sqrt_forward_derivative(w);
            let d = m.forward_derivative(w);
            assert!((s * s - d).norm() < 1e-12 * d.norm());
        }
    }
}
