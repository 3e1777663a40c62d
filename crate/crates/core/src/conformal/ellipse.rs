//! Interior of an ellipse onto the unit disc via Jacobi elliptic functions:
//! Phi(z) = k^{1/2} sn((2K/pi) asin(z/c), m) with modulus k = sqrt(m).
//!
//! The nome is q = ((a+b)/c)^{-4}: composing z = c sin(v) (rectangle to
//! ellipse) with the sn rectangle-to-disc map forces K'/K = (4/pi)
//! log((a+b)/c). The constructor verifies |Phi| = 1 on the boundary and
//! fails if the oracle exceeds 1e-8.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::{ellipse_radius, BoundaryContour, PanelQuadrature};
use crate::specfun::{complex_asin, jacobi_scd, nome_to_parameter, EllipticParams};

use super::{newton_inverse, sqrt_from_tracked_log, BoundaryMapData, BoundaryNode};

#[derive(Debug)]
pub struct EllipseMap {
    pub a: f64,
    pub b: f64,
    /// Focal distance sqrt(a^2 - b^2).
    pub c: f64,
    pub elliptic: EllipticParams,
    /// Prefactor sqrt(k) = m^{1/4} (square root of the modulus).
    pub scale: f64,
    seed_grid: OnceLock<Vec<(C64, C64)>>,
}

impl EllipseMap {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > b && b > 0.0) {
            return Err(Error::Domain(format!(
                "ellipse map requires a > b > 0, got a={a}, b={b}"
            )));
        }
        let c = (a * a - b * b).sqrt();
        let q = ((a + b) / c).powi(-4);
        let elliptic = nome_to_parameter(q)?;
        let scale = elliptic.m.powf(0.25);
        let map = Self {
            a,
            b,
            c,
            elliptic,
            scale,
            seed_grid: OnceLock::new(),
        };
        // boundary-modulus oracle
        let mut worst = 0.0f64;
        for i in 0..64 {
            let th = (i as f64 + 0.5) / 64.0 * 2.0 * std::f64::consts::PI;
            let zeta = C64::from_polar(ellipse_radius(a, b, th), th);
            let defect = (map.forward(zeta)?.norm() - 1.0).abs();
            worst = worst.max(defect);
        }
        if worst > 1e-8 {
            return Err(Error::NonConvergence(format!(
                "ellipse map boundary-modulus oracle failed: defect {worst:.3e} for a={a}, b={b}"
            )));
        }
        Ok(map)
    }

    fn rect_coord(&self, z: C64) -> C64 {
        complex_asin(z / self.c)
    }

    pub fn forward(&self, z: C64) -> Result<C64> {
        let v = self.rect_coord(z);
        let u = 2.0 * self.elliptic.k_complete / std::f64::consts::PI * v;
        let (s, _, _) = jacobi_scd(u, self.elliptic.m)?;
        Ok(self.scale * s)
    }

    pub fn derivative(&self, z: C64) -> Result<C64> {
        let kk = self.elliptic.k_complete;
        let m = self.elliptic.m;
        let v = self.rect_coord(z);
        let front = self.scale * 2.0 * kk / (std::f64::consts::PI * self.c);
        let cos_v = v.cos();
        if cos_v.norm() > 1e-5 {
            let u = 2.0 * kk / std::f64::consts::PI * v;
            let (_, cn, dn) = jacobi_scd(u, m)?;
            Ok(front * cn * dn / cos_v)
        } else {
            // near a focus the quotient cn(u) dn(u)/cos(v) is 0/0;
            // expand about v0 = +-pi/2 where cn dn = -+ k'^2 sn(d)/dn(d)^2
            // and cos(v) = -+ sin(eps), so the ratio is k'^2 sn(d)/(dn(d)^2 sin(eps))
            let v0 = if v.re >= 0.0 {
                std::f64::consts::FRAC_PI_2
            } else {
                -std::f64::consts::FRAC_PI_2
            };
            let eps = v - v0;
            let delta = 2.0 * kk / std::f64::consts::PI * eps;
            let (sd, _, dd) = jacobi_scd(delta, m)?;
            let kp2 = 1.0 - m;
            let ratio = if eps.norm() < 1e-12 {
                C64::new(2.0 * kk / std::f64::consts::PI, 0.0)
            } else {
                sd / eps.sin()
            };
            Ok(front * kp2 * ratio / (dd * dd))
        }
    }

    /// Phi''(z)/Phi'(z); accurate away from the foci.
    pub fn log_derivative_slope(&self, z: C64) -> Result<C64> {
        let kk = self.elliptic.k_complete;
        let m = self.elliptic.m;
        let v = self.rect_coord(z);
        let cos_v = v.cos();
        if cos_v.norm() < 1e-6 {
            return Err(Error::Evaluation(format!(
                "Phi''/Phi' of the ellipse map is not evaluated at the focus neighborhood of z = {z}"
            )));
        }
        let u = 2.0 * kk / std::f64::consts::PI * v;
        let (sn, cn, dn) = jacobi_scd(u, m)?;
        let two_k_pi = 2.0 * kk / std::f64::consts::PI;
        let d_log = -two_k_pi * (sn * dn / cn + m * sn * cn / dn) + v.sin() / cos_v;
        Ok(d_log / (self.c * cos_v))
    }

    /// sqrt(Phi') at an interior point, with the log of Phi' tracked along
    /// the ray from the origin (Phi'(0) is real positive).
    pub fn sqrt_derivative(&self, z: C64) -> Result<C64> {
        let steps = 24usize;
        let mut values = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let p = z * (i as f64 / steps as f64);
            values.push(self.derivative(p)?);
        }
        let mut arg = values[0].arg(); // Phi'(0) > 0, principal arg ~ 0
        for w in values.windows(2) {
            let mut d = w[1].arg() - w[0].arg();
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            arg += d;
        }
        let last = *values.last().unwrap();
        Ok(C64::from_polar(last.norm().sqrt(), 0.5 * arg))
    }

    pub fn inverse(&self, w: C64) -> Result<C64> {
        if w.norm() > 1.0 + 1e-12 {
            return Err(Error::Domain(format!(
                "inverse requested outside the closed disc, |w| = {}",
                w.norm()
            )));
        }
        let seeds = self.seed_grid.get_or_init(|| {
            let mut seeds = Vec::new();
            let n = 48;
            for i in 0..n {
                for j in 0..n {
                    let x = self.a * (2.0 * (i as f64 + 0.5) / n as f64 - 1.0);
                    let y = self.b * (2.0 * (j as f64 + 0.5) / n as f64 - 1.0);
                    if (x / self.a).powi(2) + (y / self.b).powi(2) > 0.96 {
                        continue;
                    }
                    let z = C64::new(x, y);
                    if let Ok(img) = self.forward(z) {
                        seeds.push((z, img));
                    }
                }
            }
            seeds
        });
        let (a, b) = (self.a, self.b);
        newton_inverse(
            w,
            seeds,
            |z| self.forward(z),
            |z| self.derivative(z),
            move |z| {
                let r2 = (z.re / a).powi(2) + (z.im / b).powi(2);
                if r2 > 0.999999 {
                    z * (0.999999 / r2).sqrt()
                } else {
                    z
                }
            },
            1e-12,
        )
    }

    pub(super) fn boundary_data(
        &self,
        contour: &BoundaryContour,
        quad: &PanelQuadrature,
    ) -> Result<BoundaryMapData> {
        let mut segments = Vec::new();
        for seg in &contour.segments {
            let nodes_tw = quad.segment_nodes(seg);
            let mut phis = Vec::with_capacity(nodes_tw.len());
            let mut dphis = Vec::with_capacity(nodes_tw.len());
            for &(t, _) in &nodes_tw {
                let zeta = seg.position(t);
                phis.push(self.forward(zeta)?);
                dphis.push(self.derivative(zeta)?);
            }
            let sqrts = sqrt_from_tracked_log(&dphis);
            // the tracked branch is anchored at the segment midpoint where
            // Phi' is real positive for the polar-arc parametrization; a
            // flipped anchor would violate the global branch
            let mid = dphis.len() / 2;
            if dphis[mid].re <= 0.0 {
                return Err(Error::Evaluation(format!(
                    "unexpected branch anchor on segment '{}'",
                    seg.label
                )));
            }
            let mut nodes = Vec::with_capacity(nodes_tw.len());
            for (i, &(t, weight)) in nodes_tw.iter().enumerate() {
                nodes.push(BoundaryNode {
                    t,
                    weight,
                    zeta: seg.position(t),
                    dzeta: seg.velocity(t),
                    phi: phis[i],
                    sqrt_dphi: sqrts[i],
                });
            }
            segments.push((seg.label.clone(), nodes));
        }
        Ok(BoundaryMapData { segments })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{build_ellipse_map, BoundaryMapData, ConformalMap};
    use crate::geometry::ellipse_boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nome_for_paper_ellipse() {
        let m = EllipseMap::new(2.0, 1.0).unwrap();
        assert!((m.c - 3.0f64.sqrt()).abs() < 1e-15);
        assert!((m.elliptic.nome - 1.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn map_fixes_origin() {
        for (a, b) in [(2.0, 1.0), (3.0, 1.0), (1.5, 1.2)] {
            let m = EllipseMap::new(a, b).unwrap();
            assert!(m.forward(C64::new(0.0, 0.0)).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn boundary_modulus_oracle_all_configs() {
        for (a, b) in [(2.0, 1.0), (3.0, 1.0), (1.5, 1.2)] {
            let m = EllipseMap::new(a, b).unwrap();
            for i in 0..64 {
                let th = (i as f64 + 0.3) / 64.0 * 2.0 * std::f64::consts::PI;
                let zeta = C64::from_polar(ellipse_radius(a, b, th), th);
                let w = m.forward(zeta).unwrap();
                assert!(
                    (w.norm() - 1.0).abs() < 1e-10,
                    "a={a}, b={b}, th={th}: |Phi|={}",
                    w.norm()
                );
            }
        }
    }

    #[test]
    fn rejects_degenerate_axes() {
        assert!(EllipseMap::new(1.0, 1.0).is_err());
        assert!(EllipseMap::new(2.0, 0.0).is_err());
    }

    #[test]
    fn map_is_real_on_real_focal_segment() {
        let m = EllipseMap::new(2.0, 1.0).unwrap();
        for &x in &[-0.9, -0.3, 0.0, 0.5, 1.2] {
            let w = m.forward(C64::new(x, 0.0)).unwrap();
            assert!(w.im.abs() < 1e-13, "Phi({x}) = {w}");
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let m = EllipseMap::new(2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut checked = 0;
        while checked < 50 {
            let z = C64::new(rng.gen_range(-1.9..1.9), rng.gen_range(-0.95..0.95));
            if (z.re / 2.0).powi(2) + z.im.powi(2) > 0.9 {
                continue;
            }
            let h = 1e-6;
            let fd = (m.forward(z + h).unwrap() - m.forward(z - h).unwrap()) / (2.0 * h);
            let d = m.derivative(z).unwrap();
            assert!(
                (d - fd).norm() / d.norm() < 1e-6,
                "z={z}: analytic {d}, fd {fd}"
            );
            checked += 1;
        }
    }

    #[test]
    fn derivative_is_continuous_across_focal_guard() {
        let m = EllipseMap::new(2.0, 1.0).unwrap();
        let c = m.c;
        // walk a small circle around the focus; derivative must stay smooth
        let mut prev: Option<C64> = None;
        for i in 0..40 {
            let th = i as f64 / 40.0 * 2.0 * std::f64::consts::PI;
            let z = C64::new(c, 0.0) + C64::from_polar(3e-6, th);
            let d = m.derivative(z).unwrap();
            if let Some(p) = prev {
                assert!((d - p).norm() < 1e-4 * d.norm().max(1.0));
            }
            prev = Some(d);
        }
        // and exactly at the focus
        let d = m.derivative(C64::new(c, 0.0)).unwrap();
        assert!(d.is_finite() && d.norm() > 0.0);
    }

    #[test]
    fn log_derivative_slope_matches_finite_differences() {
        let m = EllipseMap::new(2.0, 1.0).unwrap();
        for &z in &[C64::new(0.4, 0.3), C64::new(-0.8, -0.2), C64::new(0.1, 0.6)] {
            let h = 1e-6;
            let fd = (m.derivative(z + h).unwrap() - m.derivative(z - h).unwrap()) / (2.0 * h);
            let slope = m.log_derivative_slope(z).unwrap() * m.derivative(z).unwrap();
            assert!((slope - fd).norm() / fd.norm().max(1e-12) < 1e-5);
        }
    }

    #[test]
    fn inverse_round_trips() {
        let m = EllipseMap::new(2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let w = C64::from_polar(rng.gen_range(0.0..0.95), rng.gen_range(0.0..6.28));
            let z = m.inverse(w).unwrap();
            assert!((m.forward(z).unwrap() - w).norm() < 1e-10);
        }
        // and the reverse composition on an interior grid
        for i in 0..8 {
            for j in 0..8 {
                let z = C64::new(
                    -1.8 + 3.6 * i as f64 / 7.0,
                    -0.9 + 1.8 * j as f64 / 7.0,
                );
                if (z.re / 2.0).powi(2) + z.im.powi(2) > 0.85 {
                    continue;
                }
                let w = m.forward(z).unwrap();
                let back = m.inverse(w).unwrap();
                assert!((back - z).norm() < 1e-10, "z={z}, back={back}");
            }
        }
    }

    #[test]
    fn sqrt_derivative_squares_back() {
        let map = build_ellipse_map(2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let z = C64::new(rng.gen_range(-1.8..1.8), rng.gen_range(-0.9..0.9));
            if (z.re / 2.0).powi(2) + z.im.powi(2) > 0.85 {
                continue;
            }
            let s = map.sqrt_derivative(z).unwrap();
            let d = map.derivative(z).unwrap();
            assert!((s * s - d).norm() < 1e-10 * d.norm().max(1e-12));
        }
    }

    #[test]
    fn boundary_sqrt_branch_is_consistent_with_interior_branch() {
        let map = build_ellipse_map(2.0, 1.0).unwrap();
        let contour = ellipse_boundary(2.0, 1.0).unwrap();
        let quad = PanelQuadrature::with_panels(8);
        let data = BoundaryMapData::build(&map, &contour, &quad).unwrap();
        let ConformalMap::Ellipse(e) = &map else {
            unreachable!()
        };
        for (_, nodes) in &data.segments {
            for n in nodes.iter().step_by(17) {
                // pull the node slightly inside and compare branches
                let z_in = n.zeta * 0.999;
                let interior = e.sqrt_derivative(z_in).unwrap();
                assert!(
                    (interior - n.sqrt_dphi).norm() < 0.05 * n.sqrt_dphi.norm(),
                    "branch mismatch at t={}: {} vs {}",
                    n.t,
                    interior,
                    n.sqrt_dphi
                );
            }
        }
    }
}
