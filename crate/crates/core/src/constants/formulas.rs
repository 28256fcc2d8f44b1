//! Closed-form quantities: `η_p`, the complex sign net, and the constants
//! `K₁`, `K₂` of the positive-cone argument.

use num_complex::Complex64;
use serde::Serialize;

use crate::optimize::golden_section;
use crate::scalar::roots_of_unity;
use crate::spaces::{geometry_constants, Field};
use crate::{Error, Result};

const ETA_LO: f64 = 1e-6;
const ETA_HI: f64 = 1.0 - 1e-6;
const ETA_SCAN: usize = 256;

/// The objective minimised by [`eta_p`].
pub fn eta_objective(p: f64, u: f64, t: f64) -> f64 {
    let a_p = (2f64.powf(p) - 1.0).powf(-1.0 / p);
    let left = (1.0 - t.powf(p)).powf(-1.0 / p);
    let right = (1.0 - (1.0 + t / (a_p * u)).powf(-p)).powf(-1.0 / p);
    left * right
}

/// `η_p(u) = min_{0<t<1} (1−t^p)^{−1/p} (1 − (1 + t/(A_p u))^{−p})^{−1/p}`.
///
/// A coarse scan locates the basin, then golden-section search refines it
/// to `1e-10` in `t`.
pub fn eta_p(p: f64, u: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::input(format!("p must lie in (0, 1], got {p}")));
    }
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::input(format!("u must be positive, got {u}")));
    }
    let step = (ETA_HI - ETA_LO) / ETA_SCAN as f64;
    let mut best = (ETA_LO, eta_objective(p, u, ETA_LO));
    for i in 1..=ETA_SCAN {
        let t = ETA_LO + step * i as f64;
        let v = eta_objective(p, u, t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let lo = (best.0 - step).max(ETA_LO);
    let hi = (best.0 + step).min(ETA_HI);
    let m = golden_section(|t| eta_objective(p, u, t), lo, hi, 1e-10);
    Ok(m.value.min(best.1))
}

/// Smallest `N` whose roots of unity cover the circle within `delta`,
/// i.e. `2 sin(π/(2N)) ≤ delta`.
pub fn net_size_for_spacing(delta: f64) -> Result<usize> {
    if !(delta > 0.0) {
        return Err(Error::input(format!("net spacing must be positive, got {delta}")));
    }
    if delta >= 2.0 {
        return Ok(1);
    }
    let mut n = 1usize;
    while 2.0 * (std::f64::consts::PI / (2.0 * n as f64)).sin() > delta + 1e-12 {
        n += 1;
    }
    Ok(n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SignNet {
    pub delta: f64,
    pub j1: usize,
    pub net: Vec<Complex64>,
}

/// `K₁ = (1 + C^p)^{1/p}`.
pub fn k1(c: f64, p: f64) -> f64 {
    (1.0 + c.powf(p)).powf(1.0 / p)
}

/// Minimal net of unimodular scalars at spacing `δ = (2^{1/p} K₁ B_p)^{−1}`,
/// with `B_p` of the complex field.
pub fn sign_net(p: f64, k1: f64) -> Result<SignNet> {
    let g = geometry_constants(p, Field::Complex { net_order: 4 })?;
    if !(k1 > 0.0 && k1.is_finite()) {
        return Err(Error::input(format!("K1 must be positive, got {k1}")));
    }
    let delta = 1.0 / (2f64.powf(1.0 / p) * k1 * g.b_p);
    sign_net_for_spacing(delta)
}

pub fn sign_net_for_spacing(delta: f64) -> Result<SignNet> {
    let j1 = net_size_for_spacing(delta)?;
    Ok(SignNet {
        delta,
        j1,
        net: roots_of_unity(j1),
    })
}

/// `K₂ = (3 j₁)^{1/p} K₁` for the constant `C` of the positive-cone
/// hypothesis.
pub fn k2(c: f64, p: f64) -> Result<f64> {
    let k1 = k1(c, p);
    let net = sign_net(p, k1)?;
    Ok((3.0 * net.j1 as f64).powf(1.0 / p) * k1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eta_one_one_matches_closed_form() {
        assert_abs_diff_eq!(eta_p(1.0, 1.0).unwrap(), 3.0 + 2.0 * 2f64.sqrt(), epsilon = 1e-9);
        let t = 2f64.sqrt() - 1.0;
        assert_abs_diff_eq!(eta_objective(1.0, 1.0, t), 3.0 + 2.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn eta_single_point_upper_bound() {
        assert_abs_diff_eq!(eta_objective(1.0, 1.0, 0.5), 6.0, epsilon = 1e-12);
        assert!(eta_p(1.0, 1.0).unwrap() <= 6.0);
        assert!(eta_p(1.0, 10.0).unwrap() > eta_p(1.0, 1.0).unwrap());
    }

    #[test]
    fn eta_rejects_bad_arguments() {
        assert!(eta_p(0.0, 1.0).is_err());
        assert!(eta_p(1.5, 1.0).is_err());
        assert!(eta_p(1.0, 0.0).is_err());
    }

    #[test]
    fn net_sizes() {
        assert_eq!(net_size_for_spacing(2.0).unwrap(), 1);
        assert_eq!(net_size_for_spacing(3.0).unwrap(), 1);
        assert_eq!(net_size_for_spacing(2f64.sqrt()).unwrap(), 2);
        assert_eq!(net_size_for_spacing(1.0 / 16.0).unwrap(), 51);
        assert!(net_size_for_spacing(0.0).is_err());
    }

    #[test]
    fn k2_grows_with_c() {
        let a = k2(1.0, 1.0).unwrap();
        let b = k2(2.0, 1.0).unwrap();
        assert!(b > a && a > k1(1.0, 1.0));
        let net = sign_net(1.0, 2.0).unwrap();
        assert_eq!(net.net.len(), net.j1);
    }
}
