//! Cauchy and Szego kernels, their punctured and pulled-back variants, and
//! the direct reproduction integrals used as oracles.

use num_complex::Complex64 as C64;

use crate::conformal::{BoundaryMapData, BoundaryNode, ConformalMap, MoebiusFactor};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Which kernel a [`KernelEvaluation`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Cauchy,
    SzegoDisc,
    SzegoPuncturedDisc,
    SzegoPullback,
    SzegoPuncturedDomain,
}

/// A kernel value tagged with its origin.
#[derive(Debug, Clone, Copy)]
pub struct KernelEvaluation {
    pub value: C64,
    pub kind: KernelKind,
}

/// Cauchy kernel C_D(zeta, z) = -conj(T(zeta)) / (2 pi i (conj zeta - conj z)).
pub fn cauchy_kernel(zeta: C64, z: C64, tangent: C64) -> Result<C64> {
    if (zeta - z).norm() < 1e-14 {
        return Err(Error::Singularity(format!(
            "Cauchy kernel evaluated at zeta = z = {z}"
        )));
    }
    Ok(-tangent.conj() / (C64::new(0.0, TWO_PI) * (zeta.conj() - z.conj())))
}

/// Szego kernel of the unit disc, 1/(2 pi (1 - zeta conj z)).
pub fn szego_disc(zeta: C64, z: C64) -> C64 {
    1.0 / (TWO_PI * (1.0 - zeta * z.conj()))
}

/// Szego kernel of the punctured disc for a pole of order n at the origin:
/// (1/2 pi) / ((zeta conj z)^n (1 - zeta conj z)).
pub fn szego_punctured_disc(zeta: C64, z: C64, n: u32) -> Result<C64> {
    if n > 0 && z.norm() < 1e-300 {
        return Err(Error::Domain(
            "punctured-disc kernel needs z away from the puncture".into(),
        ));
    }
    let base = szego_disc(zeta, z);
    Ok(base / (zeta * z.conj()).powu(n))
}

/// Szego kernel of a simply-connected domain pulled back through its map:
/// S_D(zeta, z) = conj(sqrt Phi'(z)) S_disc(Phi(zeta), Phi(z)) sqrt Phi'(zeta).
///
/// The boundary point arrives as a quadrature node so that sqrt(Phi') keeps
/// the contour-wide consistent branch.
pub fn szego_pullback(map: &ConformalMap, node: &BoundaryNode, z: C64) -> Result<C64> {
    if !node.sqrt_dphi.is_finite() || node.sqrt_dphi.norm() < 1e-300 {
        return Err(Error::Singularity(format!(
            "sqrt(Phi') unavailable at boundary node t = {}",
            node.t
        )));
    }
    let phi_z = map.forward(z)?;
    let sq_z = map.sqrt_derivative(z)?;
    Ok(sq_z.conj() * szego_disc(node.phi, phi_z) * node.sqrt_dphi)
}

/// Szego kernel of the punctured domain D \ {z0} for a pole of order n:
/// the punctured-disc kernel of order n pulled back through M o Phi, i.e.
/// S_D(zeta, z) / ((M o Phi)(zeta)^n conj((M o Phi)(z))^n), where `map` is
/// the base map of D and M sends Phi(z0) to the origin. This is the form
/// that reduces to the punctured-disc kernel and reproduces poles; the
/// Moebius-power product is sometimes written with the zeta and z factors
/// interchanged, which does neither.
pub fn szego_punctured_domain(
    map: &ConformalMap,
    z0: C64,
    n: u32,
    node: &BoundaryNode,
    z: C64,
) -> Result<C64> {
    let base = szego_pullback(map, node, z)?;
    if n == 0 {
        return Ok(base);
    }
    let w0 = map.forward(z0)?;
    let moebius = MoebiusFactor::new(w0)?;
    let g_z = moebius.apply(map.forward(z)?);
    if g_z.norm() < 1e-13 {
        return Err(Error::Singularity(format!(
            "punctured kernel evaluated at the puncture z0 = {z0}"
        )));
    }
    let g_zeta = moebius.apply(node.phi);
    Ok(base / g_zeta.powu(n) / g_z.powu(n).conj())
}

/// Reproduction integral int_dD f(zeta) conj(K(zeta, z)) dsigma with the
/// Cauchy kernel.
pub fn cauchy_reproduce(
    data: &BoundaryMapData,
    f: impl Fn(C64) -> C64,
    z: C64,
) -> Result<C64> {
    let mut sum = C64::new(0.0, 0.0);
    for node in data.all_nodes() {
        let speed = node.dzeta.norm();
        let tangent = node.dzeta / speed;
        let k = cauchy_kernel(node.zeta, z, tangent)?;
        sum += node.weight * speed * f(node.zeta) * k.conj();
    }
    Ok(sum)
}

/// Reproduction integral with the pulled-back Szego kernel.
pub fn szego_reproduce(
    map: &ConformalMap,
    data: &BoundaryMapData,
    f: impl Fn(C64) -> C64,
    z: C64,
) -> Result<C64> {
    let phi_z = map.forward(z)?;
    let sq_z = map.sqrt_derivative(z)?;
    let mut sum = C64::new(0.0, 0.0);
    for node in data.all_nodes() {
        let speed = node.dzeta.norm();
        let k = sq_z.conj() * szego_disc(node.phi, phi_z) * node.sqrt_dphi;
        sum += node.weight * speed * f(node.zeta) * k.conj();
    }
    Ok(sum)
}

/// Reproduction integral with the punctured-domain kernel of order n.
pub fn szego_punctured_reproduce(
    map: &ConformalMap,
    data: &BoundaryMapData,
    z0: C64,
    n: u32,
    f: impl Fn(C64) -> C64,
    z: C64,
) -> Result<C64> {
    let mut sum = C64::new(0.0, 0.0);
    for node in data.all_nodes() {
        let speed = node.dzeta.norm();
        let k = szego_punctured_domain(map, z0, n, node, z)?;
        sum += node.weight * speed * f(node.zeta) * k.conj();
    }
    Ok(sum)
}
