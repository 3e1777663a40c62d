//! The transform pair: forward transform rho(k) as a boundary integral,
//! inverse transform over the spectral contours L1, L2, L3, punctured
//! variants, and global-relation residuals.
//!
//! L1 runs up the negative imaginary axis from -i inf to -i r and then
//! clockwise along the quarter arc |k| = r to -r; L2 is the real interval
//! [-r, inf); L3 runs clockwise from -r along the second-quadrant arc to
//! i r and on up the positive imaginary axis. The 1/(1 - e^{2 pi i k})
//! weights on L1/L3 have poles at the integers, which the arcs dodge on the
//! left of the origin; on L2 the weight is 1, and panel breakpoints are
//! still placed at the integers so no node ever lands on one.
//!
//! Far out on the rays both rho(k) and the weights overflow f64 range
//! individually even though their product decays; products are therefore
//! assembled in log space, with rho memoized in the rescaled form
//! rho(k) e^{-pi |Im k|}.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64 as C64;

use crate::conformal::{BoundaryMapData, ConformalMap};
use crate::error::{Error, Result};
use crate::geometry::{gauss_legendre, BoundaryContour, BoundarySegment, PanelQuadrature};
use crate::specfun::BranchCut;

const TAU: f64 = 2.0 * std::f64::consts::PI;
const PI: f64 = std::f64::consts::PI;

/// |Phi(z)| beyond which the inverse transform refuses to evaluate and the
/// caller must use boundary expansions instead.
pub const NEAR_BOUNDARY_LIMIT: f64 = 0.995;

/// Hysteresis half-width of the branch-cut switch: the evaluation cut moves
/// from (-pi, pi] to [0, 2 pi) once |arg Phi(z)| exceeds pi - 0.1.
pub const CUT_SWITCH_BAND: f64 = 0.1;

/// Which contour piece a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourPiece {
    L1Ray,
    L1Arc,
    L2,
    L3Arc,
    L3Ray,
}

/// One spectral quadrature node: position, complex weight (including the
/// direction factor dk), and the branch factor of its piece.
#[derive(Debug, Clone, Copy)]
pub struct ContourNode {
    pub k: C64,
    pub weight: C64,
    pub piece: ContourPiece,
    /// 1/(1 - e^{2 pi i k}) on L1, 1 on L2, e^{2 pi i k}/(1 - e^{2 pi i k})
    /// on L3. Stored for inspection; far out on the rays this underflows and
    /// the evaluators recompute it in log space.
    pub branch_factor: C64,
}

/// Spectral contour discretization for one truncation class.
#[derive(Debug, Clone)]
pub struct ContourDiscretization {
    pub r: f64,
    pub k_max: f64,
    pub nodes: Vec<ContourNode>,
}

fn branch_factor(piece: ContourPiece, k: C64) -> C64 {
    match piece {
        ContourPiece::L2 => C64::new(1.0, 0.0),
        ContourPiece::L1Ray | ContourPiece::L1Arc => {
            1.0 / (1.0 - (C64::new(0.0, TAU) * k).exp())
        }
        ContourPiece::L3Ray | ContourPiece::L3Arc => {
            let e = (C64::new(0.0, TAU) * k).exp();
            e / (1.0 - e)
        }
    }
}

/// log of the branch factor, stable for large |Im k| on the rays.
fn log_branch_factor(piece: ContourPiece, k: C64) -> C64 {
    match piece {
        ContourPiece::L2 => C64::new(0.0, 0.0),
        ContourPiece::L1Ray | ContourPiece::L1Arc => {
            if k.im < -2.0 {
                // 1 - e^{2 pi i k} = -e^{2 pi i k}(1 - e^{-2 pi i k});
                // log(1/(1-e^{2 pi i k})) = -i pi - 2 pi i k - log(1 - e^{-2 pi i k})
                let small = (-(C64::new(0.0, TAU) * k)).exp();
                -C64::new(0.0, PI) - C64::new(0.0, TAU) * k - (1.0 - small).ln()
            } else {
                branch_factor(piece, k).ln()
            }
        }
        ContourPiece::L3Ray | ContourPiece::L3Arc => {
            if k.im > 2.0 {
                // e^{2 pi i k}/(1 - e^{2 pi i k}): log = 2 pi i k - log(1 - e^{2 pi i k})
                let small = (C64::new(0.0, TAU) * k).exp();
                C64::new(0.0, TAU) * k - (1.0 - small).ln()
            } else {
                branch_factor(piece, k).ln()
            }
        }
    }
}

/// Build the spectral contour for a point with |arg Phi(z)| = `arg_phi_z`
/// relative to the evaluation cut's center and |Phi(z)| = `mod_phi_z`.
///
/// The truncation satisfies both decay bounds: e^{-K (pi - |arg|)} < tol on
/// the rays and mod^K < tol on L2.
pub fn build_contour(
    r: f64,
    arg_phi_z: f64,
    tol: f64,
    mod_phi_z: f64,
) -> Result<ContourDiscretization> {
    if !(0.0..1.0).contains(&r) || r == 0.0 {
        return Err(Error::Domain(format!(
            "contour radius must be in (0,1), got {r}"
        )));
    }
    if arg_phi_z.abs() >= PI {
        return Err(Error::Domain(format!(
            "|arg Phi(z)| = {} >= pi: no evaluation cut admits this point; \
             the caller must re-center the cut",
            arg_phi_z.abs()
        )));
    }
    if !(0.0..1.0).contains(&mod_phi_z) {
        return Err(Error::Domain(format!(
            "|Phi(z)| must be in [0, 1), got {mod_phi_z}"
        )));
    }
    if !(0.0..1.0).contains(&tol) || tol == 0.0 {
        return Err(Error::Domain(format!(
            "tolerance must be in (0,1), got {tol}"
        )));
    }
    let log_inv_tol = -(tol.ln());
    let k_ray = log_inv_tol / (PI - arg_phi_z.abs());
    let k_l2 = if mod_phi_z < 1e-14 {
        0.0
    } else {
        log_inv_tol / -(mod_phi_z.ln())
    };
    let k_max = k_ray.max(k_l2).max(2.0 * r);

    let (xs, ws) = gauss_legendre(16);
    let mut nodes = Vec::new();

    // geometric ray breakpoints r, 2r, 4r, ..., truncated at k_max; the
    // ray integrand carries the oscillation e^{i t ln|Phi(z)|}, so panel
    // widths are capped at ~12/|ln mod| where the modulus is small
    let width_cap = 12.0 / (-(mod_phi_z.max(1e-300).ln())).max(1.0);
    let mut ray_bps = vec![r];
    while *ray_bps.last().unwrap() < k_max {
        let prev = *ray_bps.last().unwrap();
        let next = (prev * 2.0).min(prev + width_cap);
        ray_bps.push(next.min(k_max));
    }

    // L1 ray: from -i inf up to -i r, i.e. i * int_r^{k_max} f(-i t) dt
    for pair in ray_bps.windows(2) {
        let mid = 0.5 * (pair[0] + pair[1]);
        let half = 0.5 * (pair[1] - pair[0]);
        for (x, w) in xs.iter().zip(&ws) {
            let t = mid + half * x;
            let k = C64::new(0.0, -t);
            nodes.push(ContourNode {
                k,
                weight: C64::new(0.0, half * w),
                piece: ContourPiece::L1Ray,
                branch_factor: branch_factor(ContourPiece::L1Ray, k),
            });
        }
    }
    // L1 arc: theta from -pi/2 to -pi (clockwise), k = r e^{i theta}
    for (a, b) in [(-PI / 2.0, -0.75 * PI), (-0.75 * PI, -PI)] {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (x, w) in xs.iter().zip(&ws) {
            let th = mid + half * x;
            let k = C64::from_polar(r, th);
            nodes.push(ContourNode {
                k,
                weight: (half * w) * C64::new(0.0, 1.0) * k,
                piece: ContourPiece::L1Arc,
                branch_factor: branch_factor(ContourPiece::L1Arc, k),
            });
        }
    }
    // L2: [-r, k_max], panels split at every integer so nodes never land on
    // the poles of the L1/L3 weights
    let mut l2_bps = vec![-r, 0.0];
    let mut t = r;
    while t < k_max {
        l2_bps.push(t);
        t = (t * 2.0).min(t + width_cap);
    }
    l2_bps.push(k_max);
    let mut split = Vec::new();
    for pair in l2_bps.windows(2) {
        split.push(pair[0]);
        let mut n = pair[0].floor() + 1.0;
        while n < pair[1] {
            if n > pair[0] {
                split.push(n);
            }
            n += 1.0;
        }
    }
    split.push(*l2_bps.last().unwrap());
    split.sort_by(|a, b| a.partial_cmp(b).unwrap());
    split.dedup();
    for pair in split.windows(2) {
        if pair[1] - pair[0] < 1e-14 {
            continue;
        }
        let mid = 0.5 * (pair[0] + pair[1]);
        let half = 0.5 * (pair[1] - pair[0]);
        for (x, w) in xs.iter().zip(&ws) {
            let k = C64::new(mid + half * x, 0.0);
            nodes.push(ContourNode {
                k,
                weight: C64::new(half * w, 0.0),
                piece: ContourPiece::L2,
                branch_factor: C64::new(1.0, 0.0),
            });
        }
    }
    // L3 arc: theta from pi to pi/2 (clockwise)
    for (a, b) in [(PI, 0.75 * PI), (0.75 * PI, PI / 2.0)] {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (x, w) in xs.iter().zip(&ws) {
            let th = mid + half * x;
            let k = C64::from_polar(r, th);
            nodes.push(ContourNode {
                k,
                weight: (half * w) * C64::new(0.0, 1.0) * k,
                piece: ContourPiece::L3Arc,
                branch_factor: branch_factor(ContourPiece::L3Arc, k),
            });
        }
    }
    // L3 ray: from i r to i inf, i.e. i * int_r^{k_max} f(i t) dt
    for pair in ray_bps.windows(2) {
        let mid = 0.5 * (pair[0] + pair[1]);
        let half = 0.5 * (pair[1] - pair[0]);
        for (x, w) in xs.iter().zip(&ws) {
            let t = mid + half * x;
            let k = C64::new(0.0, t);
            nodes.push(ContourNode {
                k,
                weight: C64::new(0.0, half * w),
                piece: ContourPiece::L3Ray,
                branch_factor: branch_factor(ContourPiece::L3Ray, k),
            });
        }
    }

    Ok(ContourDiscretization { r, k_max, nodes })
}


/// Contour radius suited to a spectral modulus: the default 1/2 unless
/// |Phi(z)| is so small that |Phi(z)|^{-r} would amplify rounding on the
/// arcs, in which case r shrinks like 6/|ln mod|.
pub fn contour_radius_for(mod_phi_z: f64) -> f64 {
    if mod_phi_z <= 0.0 {
        return 0.05;
    }
    let l = -(mod_phi_z.ln());
    if l > 12.0 {
        (6.0 / l).max(0.02)
    } else {
        0.5
    }
}

/// Boundary map data with quadrature refined toward the preimages of +-1
/// (the cut-ray crossings), where the rho integrand develops exponential
/// layers for large |Im k|. Use this data for spectral functions that feed
/// inverse transforms.
pub fn spectral_refined_data(
    map: &ConformalMap,
    contour: &BoundaryContour,
    base: &PanelQuadrature,
) -> Result<BoundaryMapData> {
    let data = BoundaryMapData::build(map, contour, base)?;
    let mut points = Vec::new();
    let mut prev: Option<(String, f64, C64)> = None;
    let mut first: Option<(String, f64, C64)> = None;
    for (label, nodes) in &data.segments {
        for n in nodes {
            if first.is_none() {
                first = Some((label.clone(), n.t, n.phi));
            }
            if let Some((plabel, pt, pphi)) = &prev {
                if pphi.im.signum() != n.phi.im.signum() {
                    if plabel == label {
                        points.push((label.clone(), 0.5 * (pt + n.t)));
                    } else {
                        // crossing straddles a segment joint
                        points.push((plabel.clone(), *pt));
                        points.push((label.clone(), n.t));
                    }
                }
            }
            prev = Some((label.clone(), n.t, n.phi));
        }
    }
    if let (Some((fl, ft, fphi)), Some((ll, lt, lphi))) = (first, prev) {
        if fphi.im.signum() != lphi.im.signum() {
            points.push((fl, ft));
            points.push((ll, lt));
        }
    }
    let refined = base.clone().with_refinements(points);
    BoundaryMapData::build(map, contour, &refined)
}

/// Pick the evaluation cut for a spectral point: principal by default,
/// switched to [0, 2 pi) when arg Phi(z) comes within [`CUT_SWITCH_BAND`]
/// of +-pi. Returns the cut and the argument re-centered on it.
pub fn select_cut(phi_z: C64) -> (BranchCut, f64) {
    let a = phi_z.im.atan2(phi_z.re);
    if a.abs() > PI - CUT_SWITCH_BAND {
        let centered = a.rem_euclid(TAU) - PI;
        (BranchCut::POSITIVE_AXIS, centered)
    } else {
        (BranchCut::PRINCIPAL, a)
    }
}

/// Where a spectral function's boundary samples came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    BoundaryQuadrature,
    ExpansionCoefficients,
}

/// rho(k) as a finite quadrature sum of boundary terms; entire in k, with
/// memoized rescaled samples rho(k) e^{-pi |Im k|}.
pub struct SpectralFunction {
    pub provenance: Provenance,
    /// true for the punctured pair (integrand 1/Phi^k instead of 1/Phi^{k+1})
    pub punctured: bool,
    /// per-node A_j = weight * sqrt(Phi') * f * zeta' paired with Phi(zeta)
    terms: Vec<(C64, C64)>,
    memo: Mutex<HashMap<(u8, u64, u64), C64>>,
}

impl SpectralFunction {
    /// Assemble from precomputed boundary map data and boundary values of f.
    pub fn from_boundary_data(
        data: &BoundaryMapData,
        f: impl Fn(&str, f64, C64) -> C64,
        provenance: Provenance,
        punctured: bool,
    ) -> Result<Self> {
        let mut terms = Vec::new();
        for (label, nodes) in &data.segments {
            for n in nodes {
                let fv = f(label, n.t, n.zeta);
                if !fv.is_finite() {
                    return Err(Error::Evaluation(format!(
                        "non-finite boundary data at t = {} on segment '{label}'",
                        n.t
                    )));
                }
                terms.push((n.weight * n.sqrt_dphi * fv * n.dzeta, n.phi));
            }
        }
        Ok(Self {
            provenance,
            punctured,
            terms,
            memo: Mutex::new(HashMap::new()),
        })
    }

    fn cut_id(cut: BranchCut) -> u8 {
        if cut.base_angle == BranchCut::POSITIVE_AXIS.base_angle {
            1
        } else {
            0
        }
    }

    /// rho(k) e^{-pi |Im k|} under the given cut (memoized).
    pub fn rho_scaled(&self, k: C64, cut: BranchCut) -> C64 {
        // the punctured pair shifts the exponent: 1/Phi^k = 1/Phi^{(k-1)+1}
        let k_eff = if self.punctured { k - 1.0 } else { k };
        let key = (Self::cut_id(cut), k_eff.re.to_bits(), k_eff.im.to_bits());
        if let Some(v) = self.memo.lock().unwrap().get(&key) {
            return *v;
        }
        let shift = PI * k_eff.im.abs();
        let mut sum = C64::new(0.0, 0.0);
        for (a, phi) in &self.terms {
            let lambda = cut.log(*phi);
            sum += a * (-(k_eff + 1.0) * lambda - shift).exp();
        }
        self.memo.lock().unwrap().insert(key, sum);
        sum
    }

    /// rho(k) under the given cut; may overflow for |Im k| beyond ~225.
    pub fn rho_with_cut(&self, k: C64, cut: BranchCut) -> C64 {
        let k_eff = if self.punctured { k - 1.0 } else { k };
        self.rho_scaled(k, cut) * (PI * k_eff.im.abs()).exp()
    }

    /// rho(k) under the principal cut.
    pub fn rho(&self, k: C64) -> C64 {
        self.rho_with_cut(k, BranchCut::PRINCIPAL)
    }
}

/// Forward transform rho(k) = int_dD sqrt(Phi')/Phi^{k+1} f dzeta by
/// segment quadrature, with the principal evaluation cut.
pub fn forward_rho(
    map: &ConformalMap,
    contour: &BoundaryContour,
    quad: &PanelQuadrature,
    f: impl Fn(&BoundarySegment, f64, C64) -> C64,
    k: C64,
) -> Result<C64> {
    let data = BoundaryMapData::build(map, contour, quad)?;
    let mut by_label: HashMap<&str, &BoundarySegment> = HashMap::new();
    for seg in &contour.segments {
        by_label.insert(seg.label.as_str(), seg);
    }
    let rho = SpectralFunction::from_boundary_data(
        &data,
        |label, t, zeta| f(by_label[label], t, zeta),
        Provenance::BoundaryQuadrature,
        false,
    )?;
    Ok(rho.rho(k))
}

/// Punctured forward transform: exponent k instead of k + 1, i.e.
/// rho_punctured(k) = rho(k - 1) for the same boundary data.
pub fn forward_rho_punctured(
    map: &ConformalMap,
    contour: &BoundaryContour,
    quad: &PanelQuadrature,
    f: impl Fn(&BoundarySegment, f64, C64) -> C64,
    k: C64,
) -> Result<C64> {
    forward_rho(map, contour, quad, f, k - 1.0)
}

/// Global-relation residual tau(n) = rho(-n - 1) for n >= 0; a pure
/// quadrature residual when the boundary data extends analytically.
pub fn global_relation_residual(
    map: &ConformalMap,
    contour: &BoundaryContour,
    quad: &PanelQuadrature,
    f: impl Fn(&BoundarySegment, f64, C64) -> C64,
    n: u32,
) -> Result<C64> {
    forward_rho(map, contour, quad, f, C64::new(-(n as f64) - 1.0, 0.0))
}

/// The three contour integrals of the inverse transform, evaluated in log
/// space; returns the weighted sum of rho(k) Phi(z)^k terms (without the
/// sqrt(Phi'(z))/(2 pi i) prefactor).
fn contour_sum(
    rho: &SpectralFunction,
    log_phi_z: C64,
    contour: &ContourDiscretization,
    cut: BranchCut,
    with_extra_k: bool,
) -> C64 {
    let mut total = C64::new(0.0, 0.0);
    for node in &contour.nodes {
        let shift = PI * node.k.im.abs();
        let log_g = node.k * log_phi_z + shift + log_branch_factor(node.piece, node.k);
        // rays decay at least like e^{-0.1 t}; skip fully underflowed tails
        if log_g.re < -745.0 {
            continue;
        }
        let rho_hat = rho.rho_scaled(node.k, cut);
        let mut term = node.weight * rho_hat * log_g.exp();
        if with_extra_k {
            term *= node.k;
        }
        total += term;
    }
    total
}

/// Inverse transform: f(z) = (1/2 pi i) sqrt(Phi'(z)) [I1 + I2 + I3].
pub fn inverse_transform(
    rho: &SpectralFunction,
    map: &ConformalMap,
    z: C64,
    contour: &ContourDiscretization,
) -> Result<C64> {
    let phi_z = map.forward(z)?;
    if phi_z.norm() > NEAR_BOUNDARY_LIMIT {
        return Err(Error::NearBoundary(format!(
            "|Phi(z)| = {:.6} > {NEAR_BOUNDARY_LIMIT}; evaluate through the boundary expansion instead",
            phi_z.norm()
        )));
    }
    let (cut, _) = select_cut(phi_z);
    let log_phi_z = cut.log(clamp_away_from_zero(phi_z));
    let sum = contour_sum(rho, log_phi_z, contour, cut, false);
    Ok(map.sqrt_derivative(z)? * sum / C64::new(0.0, TAU))
}

/// d/dz of the inverse transform, differentiating the representation term
/// by term:
/// f'(z) = (1/2 pi i) sqrt(Phi') [ (Phi''/(2 Phi')) I + (Phi'/Phi) I_k ]
/// with I_k the same contour sum carrying an extra factor k.
pub fn inverse_transform_derivative(
    rho: &SpectralFunction,
    map: &ConformalMap,
    z: C64,
    contour: &ContourDiscretization,
) -> Result<C64> {
    let phi_z = map.forward(z)?;
    if phi_z.norm() > NEAR_BOUNDARY_LIMIT {
        return Err(Error::NearBoundary(format!(
            "|Phi(z)| = {:.6} > {NEAR_BOUNDARY_LIMIT}",
            phi_z.norm()
        )));
    }
    let (cut, _) = select_cut(phi_z);
    let log_phi_z = cut.log(clamp_away_from_zero(phi_z));
    let i0 = contour_sum(rho, log_phi_z, contour, cut, false);
    let ik = contour_sum(rho, log_phi_z, contour, cut, true);
    let slope = map.log_derivative_slope(z)?;
    let dphi = map.derivative(z)?;
    let sq = map.sqrt_derivative(z)?;
    Ok(sq * (0.5 * slope * i0 + dphi / phi_z * ik) / C64::new(0.0, TAU))
}

/// Punctured inverse transform: the same contour sum with the extra
/// prefactor 1/Phi(z).
pub fn inverse_transform_punctured(
    rho: &SpectralFunction,
    map: &ConformalMap,
    z: C64,
    contour: &ContourDiscretization,
) -> Result<C64> {
    let phi_z = map.forward(z)?;
    if phi_z.norm() < 1e-13 {
        return Err(Error::Singularity(
            "punctured inverse transform evaluated at the puncture".into(),
        ));
    }
    Ok(inverse_transform(rho, map, z, contour)? / phi_z)
}

/// Phi(z) = 0 exactly (the preimage of the origin) is nudged to 1e-14 so
/// that Phi(z)^k stays meaningful; the induced error has the same size.
fn clamp_away_from_zero(phi_z: C64) -> C64 {
    if phi_z.norm() < 1e-14 {
        C64::new(1e-14, 0.0)
    } else {
        phi_z
    }
}

/// Numerically evaluate the spectral representation of 1/(zeta - z) on the
/// unit circle/disc: the three contour integrals of z^k/zeta^{k+1} with the
/// L1/L2/L3 weights. Test oracle only.
pub fn spectral_identity_check(
    zeta: C64,
    z: C64,
    contour: &ContourDiscretization,
) -> Result<C64> {
    if (zeta.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain("spectral identity needs |zeta| = 1".into()));
    }
    if z.norm() >= 1.0 {
        return Err(Error::Domain("spectral identity needs |z| < 1".into()));
    }
    let z = clamp_away_from_zero(z);
    let (cut, _) = select_cut(z);
    let log_z = cut.log(z);
    let log_zeta = cut.log(zeta);
    let mut total = C64::new(0.0, 0.0);
    for node in &contour.nodes {
        let log_g =
            node.k * log_z - (node.k + 1.0) * log_zeta + log_branch_factor(node.piece, node.k);
        if log_g.re < -745.0 {
            continue;
        }
        total += node.weight * log_g.exp();
    }
    Ok(total)
}
