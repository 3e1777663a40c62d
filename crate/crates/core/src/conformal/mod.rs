//! Conformal maps Phi: D -> unit disc with derivatives, inverses, and
//! boundary data carrying a globally consistent branch of sqrt(Phi').
//!
//! Three base maps are provided: the identity on the disc, the ellipse
//! interior map built from Jacobi elliptic functions, and a numerically
//! solved Schwarz-Christoffel map for quadrilaterals. A Moebius factor
//! composes any base map into a map of the punctured domain onto the
//! punctured disc.

mod ellipse;
mod sc;

pub use ellipse::EllipseMap;
pub use sc::SchwarzChristoffelMap;

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryContour, BoundarySegment, PanelQuadrature};

/// Moebius disc automorphism M_{z0}(z) = (z - z0)/(1 - conj(z0) z).
#[derive(Debug, Clone, Copy)]
pub struct MoebiusFactor {
    pub z0: C64,
}

impl MoebiusFactor {
    pub fn new(z0: C64) -> Result<Self> {
        if z0.norm() >= 1.0 {
            return Err(Error::Domain(format!(
                "Moebius parameter must lie in the open disc, |z0| = {}",
                z0.norm()
            )));
        }
        Ok(Self { z0 })
    }

    pub fn apply(&self, z: C64) -> C64 {
        (z - self.z0) / (1.0 - self.z0.conj() * z)
    }

    pub fn inverse(&self, w: C64) -> C64 {
        (w + self.z0) / (1.0 + self.z0.conj() * w)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let d = 1.0 - self.z0.conj() * z;
        (1.0 - self.z0.norm_sqr()) / (d * d)
    }

    /// Analytic square root of the derivative: sqrt(1-|z0|^2)/(1 - conj(z0) z).
    pub fn sqrt_derivative(&self, z: C64) -> C64 {
        (1.0 - self.z0.norm_sqr()).sqrt() / (1.0 - self.z0.conj() * z)
    }
}

/// A conformal map of a domain onto the unit disc (or, composed with a
/// Moebius factor, of a punctured domain onto the punctured disc).
#[derive(Clone)]
pub enum ConformalMap {
    Disc,
    Ellipse(Arc<EllipseMap>),
    SchwarzChristoffel(Arc<SchwarzChristoffelMap>),
    Punctured {
        base: Box<ConformalMap>,
        /// Puncture location in the domain.
        z0: C64,
        moebius: MoebiusFactor,
    },
}

impl std::fmt::Debug for ConformalMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConformalMap::Disc => write!(f, "ConformalMap::Disc"),
            ConformalMap::Ellipse(e) => write!(f, "ConformalMap::Ellipse(a={}, b={})", e.a, e.b),
            ConformalMap::SchwarzChristoffel(_) => write!(f, "ConformalMap::SchwarzChristoffel"),
            ConformalMap::Punctured { z0, .. } => write!(f, "ConformalMap::Punctured(z0={z0})"),
        }
    }
}

/// The identity map of the unit disc.
pub fn disc_identity() -> ConformalMap {
    ConformalMap::Disc
}

/// Ellipse-interior map with the given semi-axes; fails loudly if the
/// boundary-modulus oracle exceeds 1e-8.
pub fn build_ellipse_map(a: f64, b: f64) -> Result<ConformalMap> {
    Ok(ConformalMap::Ellipse(Arc::new(EllipseMap::new(a, b)?)))
}

/// Solve the Schwarz-Christoffel parameter problem for a quadrilateral.
pub fn solve_sc_parameters(vertices: &[C64]) -> Result<ConformalMap> {
    Ok(ConformalMap::SchwarzChristoffel(Arc::new(
        SchwarzChristoffelMap::solve(vertices)?,
    )))
}

/// Compose a base map with the Moebius factor that sends Phi(z0) to the
/// origin, mapping D \ {z0} onto the punctured disc.
pub fn punctured_map(base: ConformalMap, z0: C64) -> Result<ConformalMap> {
    let w0 = base.forward(z0)?;
    if w0.norm() > 1.0 - 1e-10 {
        return Err(Error::Domain(format!(
            "puncture must be strictly interior, |Phi(z0)| = {}",
            w0.norm()
        )));
    }
    Ok(ConformalMap::Punctured {
        base: Box::new(base),
        z0,
        moebius: MoebiusFactor::new(w0)?,
    })
}

impl ConformalMap {
    /// Phi(z).
    pub fn forward(&self, z: C64) -> Result<C64> {
        match self {
            ConformalMap::Disc => Ok(z),
            ConformalMap::Ellipse(e) => e.forward(z),
            ConformalMap::SchwarzChristoffel(m) => m.domain_to_disc(z),
            ConformalMap::Punctured { base, moebius, .. } => {
                Ok(moebius.apply(base.forward(z)?))
            }
        }
    }

    /// Phi'(z).
    pub fn derivative(&self, z: C64) -> Result<C64> {
        match self {
            ConformalMap::Disc => Ok(C64::new(1.0, 0.0)),
            ConformalMap::Ellipse(e) => e.derivative(z),
            ConformalMap::SchwarzChristoffel(m) => {
                let w = m.domain_to_disc(z)?;
                Ok(1.0 / m.forward_derivative(w))
            }
            ConformalMap::Punctured { base, moebius, .. } => {
                let bw = base.forward(z)?;
                Ok(moebius.derivative(bw) * base.derivative(z)?)
            }
        }
    }

    /// Ratio Phi''(z)/Phi'(z), used when differentiating spectral
    /// representations in z.
    pub fn log_derivative_slope(&self, z: C64) -> Result<C64> {
        match self {
            ConformalMap::Disc => Ok(C64::new(0.0, 0.0)),
            ConformalMap::Ellipse(e) => e.log_derivative_slope(z),
            ConformalMap::SchwarzChristoffel(m) => {
                let w = m.domain_to_disc(z)?;
                // Phi' = 1/F'(w); Phi''/Phi' = -F''(w)/F'(w)^2
                Ok(-m.forward_log_derivative_slope(w) / m.forward_derivative(w))
            }
            ConformalMap::Punctured { base, moebius, .. } => {
                let bw = base.forward(z)?;
                let bd = base.derivative(z)?;
                // (M o Phi)''/(M o Phi)' = M''/M' (Phi) * Phi' + Phi''/Phi'
                let m_slope = 2.0 * moebius.z0.conj() / (1.0 - moebius.z0.conj() * bw);
                Ok(m_slope * bd + base.log_derivative_slope(z)?)
            }
        }
    }

    /// Psi(w) = Phi^{-1}(w).
    pub fn inverse(&self, w: C64) -> Result<C64> {
        match self {
            ConformalMap::Disc => Ok(w),
            ConformalMap::Ellipse(e) => e.inverse(w),
            ConformalMap::SchwarzChristoffel(m) => m.disc_to_domain(w),
            ConformalMap::Punctured { base, moebius, .. } => {
                base.inverse(moebius.inverse(w))
            }
        }
    }

    /// sqrt(Phi'(z)) at an interior point, on the branch used consistently
    /// by this map's boundary data.
    pub fn sqrt_derivative(&self, z: C64) -> Result<C64> {
        match self {
            ConformalMap::Disc => Ok(C64::new(1.0, 0.0)),
            ConformalMap::Ellipse(e) => e.sqrt_derivative(z),
            ConformalMap::SchwarzChristoffel(m) => {
                let w = m.domain_to_disc(z)?;
                Ok(1.0 / m.sqrt_forward_derivative(w))
            }
            ConformalMap::Punctured { base, moebius, .. } => {
                let bw = base.forward(z)?;
                Ok(moebius.sqrt_derivative(bw) * base.sqrt_derivative(z)?)
            }
        }
    }

    /// Serializable descriptor for caching solved parameter problems.
    pub fn to_descriptor(&self) -> MapDescriptor {
        match self {
            ConformalMap::Disc => MapDescriptor {
                kind: "disc".into(),
                ..MapDescriptor::default()
            },
            ConformalMap::Ellipse(e) => MapDescriptor {
                kind: "ellipse".into(),
                a: Some(e.a),
                b: Some(e.b),
                q: Some(e.elliptic.nome),
                ..MapDescriptor::default()
            },
            ConformalMap::SchwarzChristoffel(m) => MapDescriptor {
                kind: "schwarz-christoffel".into(),
                vertices: Some(m.vertices.iter().map(|v| [v.re, v.im]).collect()),
                angles: Some(m.angles.to_vec()),
                prevertices: Some(m.prevertex_angles.to_vec()),
                constant: Some([m.constant.re, m.constant.im]),
                center: Some([m.center.re, m.center.im]),
                ..MapDescriptor::default()
            },
            ConformalMap::Punctured { base, z0, .. } => {
                let mut d = base.to_descriptor();
                d.kind = format!("punctured-{}", d.kind);
                d.puncture = Some([z0.re, z0.im]);
                d
            }
        }
    }

    pub fn from_descriptor(d: &MapDescriptor) -> Result<ConformalMap> {
        let base_kind = d.kind.strip_prefix("punctured-").unwrap_or(&d.kind);
        let base = match base_kind {
            "disc" => ConformalMap::Disc,
            "ellipse" => {
                let (a, b) = (missing(d.a, "a")?, missing(d.b, "b")?);
                build_ellipse_map(a, b)?
            }
            "schwarz-christoffel" => {
                let verts: Vec<C64> = missing(d.vertices.as_ref(), "vertices")?
                    .iter()
                    .map(|v| C64::new(v[0], v[1]))
                    .collect();
                match (&d.prevertices, &d.constant, &d.center) {
                    (Some(p), Some(c), Some(zc)) => ConformalMap::SchwarzChristoffel(Arc::new(
                        SchwarzChristoffelMap::from_parameters(
                            &verts,
                            p,
                            C64::new(c[0], c[1]),
                            C64::new(zc[0], zc[1]),
                        )?,
                    )),
                    _ => solve_sc_parameters(&verts)?,
                }
            }
            other => {
                return Err(Error::Domain(format!("unknown map kind '{other}'")));
            }
        };
        if let Some(p) = d.puncture {
            punctured_map(base, C64::new(p[0], p[1]))
        } else {
            Ok(base)
        }
    }
}

fn missing<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Domain(format!("map descriptor missing field '{name}'")))
}

/// JSON-serializable description of a solved map.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MapDescriptor {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prevertices: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub puncture: Option<[f64; 2]>,
}

/// Boundary quadrature node with the map data the transforms need.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryNode {
    pub t: f64,
    pub weight: f64,
    pub zeta: C64,
    pub dzeta: C64,
    /// Phi(zeta); unimodular up to the map's boundary tolerance.
    pub phi: C64,
    /// sqrt(Phi'(zeta)) on one consistent branch along the whole boundary.
    pub sqrt_dphi: C64,
}

/// All quadrature nodes of a contour with precomputed map data, segment by
/// segment.
#[derive(Debug, Clone)]
pub struct BoundaryMapData {
    pub segments: Vec<(String, Vec<BoundaryNode>)>,
}

impl BoundaryMapData {
    pub fn build(
        map: &ConformalMap,
        contour: &BoundaryContour,
        quad: &PanelQuadrature,
    ) -> Result<Self> {
        match map {
            ConformalMap::Disc => build_generic(contour, quad, |_seg, _t, zeta| {
                Ok((zeta, C64::new(1.0, 0.0)))
            }),
            ConformalMap::Ellipse(e) => e.boundary_data(contour, quad),
            ConformalMap::SchwarzChristoffel(m) => m.boundary_data(contour, quad),
            ConformalMap::Punctured { base, moebius, .. } => {
                let mut data = BoundaryMapData::build(base, contour, quad)?;
                for (_, nodes) in &mut data.segments {
                    for n in nodes {
                        let phi = n.phi;
                        n.sqrt_dphi *= moebius.sqrt_derivative(phi);
                        n.phi = moebius.apply(phi);
                    }
                }
                Ok(data)
            }
        }
    }

    pub fn all_nodes(&self) -> impl Iterator<Item = &BoundaryNode> {
        self.segments.iter().flat_map(|(_, ns)| ns.iter())
    }

    pub fn segment(&self, label: &str) -> Option<&[BoundaryNode]> {
        self.segments
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, ns)| ns.as_slice())
    }

    /// Largest deviation of |Phi| from 1 over all nodes.
    pub fn max_modulus_defect(&self) -> f64 {
        self.all_nodes()
            .map(|n| (n.phi.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn build_generic(
    contour: &BoundaryContour,
    quad: &PanelQuadrature,
    mut eval: impl FnMut(&BoundarySegment, f64, C64) -> Result<(C64, C64)>,
) -> Result<BoundaryMapData> {
    let mut segments = Vec::new();
    for seg in &contour.segments {
        let mut nodes = Vec::new();
        for (t, weight) in quad.segment_nodes(seg) {
            let zeta = seg.position(t);
            let dzeta = seg.velocity(t);
            let (phi, sqrt_dphi) = eval(seg, t, zeta)?;
            nodes.push(BoundaryNode {
                t,
                weight,
                zeta,
                dzeta,
                phi,
                sqrt_dphi,
            });
        }
        segments.push((seg.label.clone(), nodes));
    }
    Ok(BoundaryMapData { segments })
}

/// Track log Phi' continuously along an ordered list of values, starting
/// from the entry nearest the list midpoint seeded with the principal
/// argument; returns sqrt(Phi') per entry.
pub(crate) fn sqrt_from_tracked_log(values: &[C64]) -> Vec<C64> {
    let n = values.len();
    let mut args = vec![0.0f64; n];
    let mid = n / 2;
    args[mid] = values[mid].arg();
    for i in (mid + 1)..n {
        let raw = values[i].arg();
        let prev = args[i - 1];
        let mut d = raw - prev;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        args[i] = prev + d;
    }
    for i in (0..mid).rev() {
        let raw = values[i].arg();
        let prev = args[i + 1];
        let mut d = raw - prev;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        args[i] = prev + d;
    }
    values
        .iter()
        .zip(&args)
        .map(|(v, a)| C64::from_polar(v.norm().sqrt(), 0.5 * a))
        .collect()
}

/// Newton inversion of `forward` seeded from the best entry of a
/// precomputed grid of (candidate, image) pairs.
pub(crate) fn newton_inverse(
    target: C64,
    seeds: &[(C64, C64)],
    forward: impl Fn(C64) -> Result<C64>,
    derivative: impl Fn(C64) -> Result<C64>,
    clamp: impl Fn(C64) -> C64,
    tol: f64,
) -> Result<C64> {
    let mut best = seeds
        .iter()
        .min_by(|a, b| {
            (a.1 - target)
                .norm()
                .partial_cmp(&(b.1 - target).norm())
                .unwrap()
        })
        .ok_or_else(|| Error::Evaluation("empty seed grid".into()))?
        .0;
    let mut last_residual = f64::INFINITY;
    for _ in 0..100 {
        let r = forward(best)? - target;
        last_residual = r.norm();
        if last_residual < tol {
            return Ok(best);
        }
        let d = derivative(best)?;
        if d.norm() < 1e-300 {
            return Err(Error::NonConvergence(
                "inverse Newton hit a critical point".into(),
            ));
        }
        let mut step = -r / d;
        // step halving keeps iterates in the admissible region
        for _ in 0..60 {
            let cand = clamp(best + step);
            match forward(cand) {
                Ok(f) if (f - target).norm() <= last_residual => {
                    best = cand;
                    break;
                }
                _ => step *= 0.5,
            }
        }
    }
    Err(Error::NonConvergence(format!(
        "inverse Newton stalled at residual {last_residual:.3e} for target {target}"
    )))
}

/// Unit circle as a one-segment contour, zeta(theta) = e^{i theta}.
pub fn disc_boundary() -> BoundaryContour {
    let seg = BoundarySegment::new(
        "circle",
        (-std::f64::consts::PI, std::f64::consts::PI),
        |t| C64::from_polar(1.0, t),
        |t| C64::new(0.0, 1.0) * C64::from_polar(1.0, t),
    );
    BoundaryContour::new(vec![seg]).expect("unit circle is a valid contour")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ellipse_boundary, polygon_boundary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn paper_quad() -> Vec<C64> {
        vec![
            C64::new(4.0, -1.0),
            C64::new(0.0, 3.0),
            C64::new(-4.0, -1.0),
            C64::new(0.0, 0.0),
        ]
    }

    #[test]
    fn disc_identity_map() {
        let m = disc_identity();
        let z = C64::new(0.0, 0.3);
        assert_eq!(m.forward(z).unwrap(), z);
        assert_eq!(m.derivative(C64::new(0.5, -0.1)).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(m.inverse(m.forward(z).unwrap()).unwrap(), z);
    }

    #[test]
    fn moebius_basics() {
        let z0 = C64::new(0.4, -0.2);
        let m = MoebiusFactor::new(z0).unwrap();
        assert!(m.apply(z0).norm() < 1e-15);
        for k in 0..16 {
            let w = C64::from_polar(1.0, k as f64 * 0.39);
            assert!((m.apply(w).norm() - 1.0).abs() < 1e-14);
        }
        let w = C64::new(0.3, 0.5);
        assert!((m.inverse(m.apply(w)) - w).norm() < 1e-14);
        let h = 1e-6;
        let fd = (m.apply(w + h) - m.apply(w - h)) / (2.0 * h);
        assert!((m.derivative(w) - fd).norm() < 1e-9);
        let s = m.sqrt_derivative(w);
        assert!((s * s - m.derivative(w)).norm() < 1e-14);
    }

    #[test]
    fn punctured_disc_at_origin_is_identity() {
        let m = punctured_map(disc_identity(), C64::new(0.0, 0.0)).unwrap();
        let z = C64::new(0.2, 0.6);
        assert!((m.forward(z).unwrap() - z).norm() < 1e-15);
        assert!((m.derivative(z).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn punctured_map_sends_puncture_to_origin() {
        let map = build_ellipse_map(2.0, 1.0).unwrap();
        let z0 = C64::new(0.3, 0.0);
        let p = punctured_map(map, z0).unwrap();
        assert!(p.forward(z0).unwrap().norm() < 1e-12);
        // boundary modulus preserved
        let contour = ellipse_boundary(2.0, 1.0).unwrap();
        let q = PanelQuadrature::with_panels(8);
        let data = BoundaryMapData::build(&p, &contour, &q).unwrap();
        assert!(data.max_modulus_defect() < 1e-8);
    }

    #[test]
    fn punctured_map_rejects_boundary_puncture() {
        let map = build_ellipse_map(2.0, 1.0).unwrap();
        assert!(punctured_map(map, C64::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let map = solve_sc_parameters(&paper_quad()).unwrap();
        let d = map.to_descriptor();
        let s = serde_json::to_string(&d).unwrap();
        let d2: MapDescriptor = serde_json::from_str(&s).unwrap();
        let map2 = ConformalMap::from_descriptor(&d2).unwrap();
        let z = C64::new(0.5, 0.8);
        assert!((map.forward(z).unwrap() - map2.forward(z).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn argument_principle_counts_one_preimage() {
        // (1/2 pi i) oint Phi'/(Phi - w0) dzeta = 1 for targets in the disc
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cases: Vec<(ConformalMap, BoundaryContour)> = vec![
            (build_ellipse_map(2.0, 1.0).unwrap(), ellipse_boundary(2.0, 1.0).unwrap()),
            (
                solve_sc_parameters(&paper_quad()).unwrap(),
                polygon_boundary(&paper_quad()).unwrap(),
            ),
        ];
        for (map, contour) in &cases {
            let q = PanelQuadrature::new(40, 0.5, 16);
            let data = BoundaryMapData::build(map, contour, &q).unwrap();
            for _ in 0..10 {
                let w0 = C64::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(0.0..6.28));
                let mut sum = C64::new(0.0, 0.0);
                for n in data.all_nodes() {
                    // Phi' = (sqrt Phi')^2
                    let dphi = n.sqrt_dphi * n.sqrt_dphi;
                    sum += n.weight * dphi * n.dzeta / (n.phi - w0);
                }
                sum /= C64::new(0.0, 2.0 * std::f64::consts::PI);
                assert!(
                    (sum - C64::new(1.0, 0.0)).norm() < 1e-6,
                    "argument principle failed: {sum}"
                );
            }
        }
    }

    #[test]
    fn tangent_transformation_law() {
        // T_disc(Phi(zeta)) conj(sqrt Phi') = sqrt Phi' T_D(zeta)
        let cases: Vec<(ConformalMap, BoundaryContour)> = vec![
            (build_ellipse_map(2.0, 1.0).unwrap(), ellipse_boundary(2.0, 1.0).unwrap()),
            (
                solve_sc_parameters(&paper_quad()).unwrap(),
                polygon_boundary(&paper_quad()).unwrap(),
            ),
        ];
        for (map, contour) in &cases {
            let q = PanelQuadrature::new(16, 0.5, 16);
            let data = BoundaryMapData::build(map, contour, &q).unwrap();
            for (label, nodes) in &data.segments {
                let seg = contour.segment(label).unwrap();
                for n in nodes {
                    let t_domain = seg.unit_tangent(n.t);
                    let t_disc = C64::new(0.0, 1.0) * n.phi;
                    let lhs = t_disc * n.sqrt_dphi.conj();
                    let rhs = n.sqrt_dphi * t_domain;
                    assert!(
                        (lhs - rhs).norm() < 1e-8,
                        "tangent law violated on {label} at t={}: {} vs {}",
                        n.t,
                        lhs,
                        rhs
                    );
                }
            }
        }
    }
}
