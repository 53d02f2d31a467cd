//! Adaptive quadrature of the singular gap integrals.
//!
//! The rate functions realized in [`crate::rates`] are shadow forms of the
//! radial integrals
//!
//! ```text
//! I(n, m, k; eps) = c_n * int_0^R  r^(n-2+k) / (eps + r^m) dr,
//! ```
//!
//! where `c_n` is the surface measure of the unit sphere in the tangential
//! hyperplane (`c_2 = 2`: two half-lines, `c_3 = 2 pi`, `c_4 = 4 pi`). The
//! integrand develops a boundary layer of width `eps^(1/m)` at the contact
//! point, so the integrator pre-splits the range at that scale and then in
//! geometrically doubling panels, applying a 7-15 Gauss-Kronrod rule with
//! adaptive bisection on each panel. This module is the measurement-side
//! oracle: it knows nothing of the rate algebra it is compared against.

use crate::error::{Error, Result};
use crate::geometry::ball_volume;
use crate::rates::{rho, rho_case, RateFunction};
use crate::tol::QUAD_REL_TOL;
use serde::{Deserialize, Serialize};

/// Positive abscissae of the 15-point Kronrod extension of 7-point Gauss
/// on `[-1, 1]`, ordered outermost first; the last entry is the center.
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];

/// Kronrod weights matching [`XGK`].
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];

/// Gauss weights for the embedded 7-point rule (abscissae `XGK[1]`,
/// `XGK[3]`, `XGK[5]`, center).
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// One 7-15 Gauss-Kronrod evaluation over `[a, b]`: returns the Kronrod
/// value and the magnitude of the Gauss-Kronrod difference.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let fsum = f(mid - half * x) + f(mid + half * x);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half.abs())
}

/// Adaptive bisection driver: integrates `f` over `[a, b]` to the absolute
/// tolerance `tol_abs`, splitting the budget between halves.
fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol_abs: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 48;
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        tol_abs: f64,
        depth: u32,
    ) -> Result<f64> {
        let (value, err) = gk15(f, a, b);
        if err <= tol_abs || b - a < f64::EPSILON * (a.abs() + b.abs()) {
            return Ok(value);
        }
        if depth >= MAX_DEPTH {
            return Err(Error::Quadrature(format!(
                "panel [{a}, {b}] failed to converge: error estimate {err:.3e} > {tol_abs:.3e}"
            )));
        }
        let mid = 0.5 * (a + b);
        Ok(rec(f, a, mid, 0.5 * tol_abs, depth + 1)?
            + rec(f, mid, b, 0.5 * tol_abs, depth + 1)?)
    }
    rec(f, a, b, tol_abs, 0)
}

/// Integrates `f` over the pre-split panels to relative accuracy
/// `rel_tol`, distributing the absolute budget by each panel's share of a
/// rough first pass (the integrands here are nonnegative, so shares are
/// meaningful).
fn integrate_panels(f: &impl Fn(f64) -> f64, cuts: &[f64], rel_tol: f64) -> Result<f64> {
    let mut rough = Vec::with_capacity(cuts.len() - 1);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (v, _) = gk15(f, w[0], w[1]);
        rough.push(v.abs());
        total += v.abs();
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    let budget = rel_tol * total;
    let mut sum = 0.0;
    for (w, share) in cuts.windows(2).zip(&rough) {
        let tol_abs = (budget * share / total).max(budget * 1e-3 / rough.len() as f64);
        sum += adaptive(f, w[0], w[1], tol_abs)?;
    }
    Ok(sum)
}

/// Panel breakpoints resolving a boundary layer of width `layer` on
/// `[0, r_max]`: one panel across the layer, then geometric doubling.
fn layered_cuts(layer: f64, r_max: f64) -> Vec<f64> {
    let mut cuts = vec![0.0];
    let mut r = layer.min(r_max);
    while r < r_max {
        cuts.push(r);
        r *= 2.0;
    }
    cuts.push(r_max);
    cuts
}

/// Surface measure of the unit sphere in the `(n-1)`-dimensional
/// tangential hyperplane.
pub fn tangential_sphere_measure(n: u32) -> Result<f64> {
    use std::f64::consts::PI;
    Ok(match n {
        2 => 2.0,
        3 => 2.0 * PI,
        4 => 4.0 * PI,
        5 => 2.0 * PI * PI,
        6 => 8.0 * PI * PI / 3.0,
        _ => {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("sphere measure tabulated for 2 <= n <= 6, got {n}"),
            })
        }
    })
}

fn check_gap_args(n: u32, m: u32, eps: f64, r_max: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("ambient dimension must be >= 2, got {n}"),
        });
    }
    if m < 2 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("gap exponent must be >= 2, got {m}"),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("gap width must be positive, got {eps}"),
        });
    }
    if !(r_max > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r_max",
            reason: format!("integration radius must be positive, got {r_max}"),
        });
    }
    Ok(())
}

/// The point-contact gap integral
/// `c_n int_0^R r^(n-2+k) / (eps + r^m) dr`.
pub fn gap_integral(n: u32, m: u32, k: u32, eps: f64, r_max: f64) -> Result<f64> {
    check_gap_args(n, m, eps, r_max)?;
    let c = tangential_sphere_measure(n)?;
    let p = (n - 2 + k) as i32;
    let mi = m as i32;
    let f = move |r: f64| r.powi(p) / (eps + r.powi(mi));
    let cuts = layered_cuts(eps.powf(1.0 / m as f64), r_max);
    Ok(c * integrate_panels(&f, &cuts, QUAD_REL_TOL)?)
}

/// The flat-contact gap integral: a contact-plateau term
/// `|B'_r| / eps` plus the off-contact tail
/// `c_n int_0^(R-r) (r+s)^(n-2) s^k / (eps + s^m) ds`
/// for data vanishing to order `k` at distance `s` from the contact disk.
pub fn flat_contact_integral(
    n: u32,
    m: u32,
    k: u32,
    eps: f64,
    r: f64,
    r_max: f64,
) -> Result<f64> {
    check_gap_args(n, m, eps, r_max)?;
    if !(r > 0.0 && r < r_max) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("contact radius must satisfy 0 < r < {r_max}, got {r}"),
        });
    }
    let plateau = ball_volume(n - 1, r) / eps;
    let c = tangential_sphere_measure(n)?;
    let p = (n - 2) as i32;
    let ki = k as i32;
    let mi = m as i32;
    let f = move |s: f64| (r + s).powi(p) * s.powi(ki) / (eps + s.powi(mi));
    let cuts = layered_cuts(eps.powf(1.0 / m as f64), r_max - r);
    Ok(plateau + c * integrate_panels(&f, &cuts, QUAD_REL_TOL)?)
}

/// One row of a rate-equivalence report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivRow {
    pub eps: f64,
    /// Computed gap integral.
    pub value: f64,
    /// Rate-function prediction at this `eps`.
    pub predicted: f64,
    pub ratio: f64,
}

/// Comparison of the gap integral against the matching rate function over
/// a grid of gap widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub rate: RateFunction,
    pub rows: Vec<EquivRow>,
    /// Max over min of the ratios: 1 means the integral tracks the rate
    /// with a constant prefactor exactly.
    pub spread: f64,
}

/// Computes the gap integral over `eps_list` and compares it against
/// `rho_k(n, m; eps)`: the ratio must stabilize to a constant, so its
/// spread across the grid measures how faithfully the three-case rate
/// function captures the integral.
pub fn verify_rate_equivalence(
    n: u32,
    m: u32,
    k: u32,
    eps_list: &[f64],
    r_max: f64,
) -> Result<EquivalenceReport> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: "need at least one gap width".into(),
        });
    }
    let rate = rho_case(k, n, m)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for &eps in eps_list {
        let value = gap_integral(n, m, k, eps, r_max)?;
        let predicted = rho(k, n, m, eps)?;
        let ratio = value / predicted;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        rows.push(EquivRow {
            eps,
            value,
            predicted,
            ratio,
        });
    }
    Ok(EquivalenceReport {
        n,
        m,
        k,
        rate,
        rows,
        spread: hi / lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol::CLOSED_FORM_REL_TOL;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Closed forms for n = 2, m = 2, R = 1, derived by elementary calculus
    // independently of the panel integrator.
    fn closed_k0(eps: f64) -> f64 {
        2.0 / eps.sqrt() * (1.0 / eps.sqrt()).atan()
    }

    fn closed_k1(eps: f64) -> f64 {
        ((eps + 1.0) / eps).ln()
    }

    fn closed_k2(eps: f64) -> f64 {
        2.0 - 2.0 * eps.sqrt() * (1.0 / eps.sqrt()).atan()
    }

    #[test]
    fn matches_inverse_square_root_closed_form() {
        assert_relative_eq!(closed_k0(1e-4), 312.1593320215127, max_relative = 1e-12);
        for eps in [1e-2, 1e-4, 1e-6] {
            assert_relative_eq!(
                gap_integral(2, 2, 0, eps, 1.0).unwrap(),
                closed_k0(eps),
                max_relative = CLOSED_FORM_REL_TOL
            );
        }
    }

    #[test]
    fn matches_logarithmic_closed_form() {
        assert_relative_eq!(closed_k1(1e-4), 9.210440366976517, max_relative = 1e-12);
        for eps in [1e-2, 1e-4, 1e-6] {
            assert_relative_eq!(
                gap_integral(2, 2, 1, eps, 1.0).unwrap(),
                closed_k1(eps),
                max_relative = CLOSED_FORM_REL_TOL
            );
        }
    }

    #[test]
    fn matches_bounded_closed_form() {
        assert_relative_eq!(closed_k2(1e-4), 1.9687840667978486, max_relative = 1e-12);
        for eps in [1e-2, 1e-4, 1e-6] {
            assert_relative_eq!(
                gap_integral(2, 2, 2, eps, 1.0).unwrap(),
                closed_k2(eps),
                max_relative = CLOSED_FORM_REL_TOL
            );
        }
    }

    #[test]
    fn three_dimensional_prefactor() {
        // n = 3, k = 0, m = 2, R = 1: 2 pi int r/(eps + r^2) dr =
        // pi ln((eps+1)/eps).
        let eps = 1e-4;
        assert_relative_eq!(
            gap_integral(3, 2, 0, eps, 1.0).unwrap(),
            std::f64::consts::PI * closed_k1(eps),
            max_relative = CLOSED_FORM_REL_TOL
        );
    }

    #[test]
    fn equivalence_log_branch_tight() {
        let eps: Vec<f64> = (2..=7).map(|j| 10f64.powi(-j)).collect();
        let rep = verify_rate_equivalence(2, 2, 1, &eps, 1.0).unwrap();
        assert!(rep.spread < 1.1, "log-branch spread {}", rep.spread);
    }

    #[test]
    fn equivalence_power_branch_ratio_near_pi() {
        let eps: Vec<f64> = (2..=7).map(|j| 10f64.powi(-j)).collect();
        let rep = verify_rate_equivalence(2, 2, 0, &eps, 1.0).unwrap();
        assert!(rep.spread < 1.1, "power-branch spread {}", rep.spread);
        let last = rep.rows.last().unwrap();
        assert_relative_eq!(last.ratio, std::f64::consts::PI, max_relative = 1e-3);
    }

    #[test]
    fn equivalence_bounded_branch() {
        let eps: Vec<f64> = (2..=9).map(|j| 10f64.powi(-j)).collect();
        let rep = verify_rate_equivalence(2, 2, 3, &eps, 1.0).unwrap();
        assert!(rep.spread < 1.5, "bounded-branch spread {}", rep.spread);
    }

    #[test]
    fn flat_contact_plateau_dominates() {
        // r = 0.1, eps = 1e-4, n = 2: plateau 2r/eps = 2000, plus a
        // logarithmic tail of order 10 for first-order vanishing data.
        let v = flat_contact_integral(2, 2, 1, 1e-4, 0.1, 1.0).unwrap();
        let tail = ((1e-4 + 0.81) / 1e-4f64).ln();
        assert_relative_eq!(v, 2000.0 + tail, max_relative = 1e-9);
        assert!(v > 2000.0 && v < 2000.0 + 20.0);
        // Zeroth-order data instead feeds the inverse-square-root tail.
        let v0 = flat_contact_integral(2, 2, 0, 1e-4, 0.1, 1.0).unwrap();
        let tail0 = 2.0 / 1e-2 * (0.9 / 1e-2f64).atan();
        assert_relative_eq!(v0, 2000.0 + tail0, max_relative = 1e-9);
    }

    #[test]
    fn flat_contact_degenerates_to_point_contact() {
        let point = gap_integral(2, 2, 1, 1e-4, 1.0).unwrap();
        let flat = flat_contact_integral(2, 2, 1, 1e-4, 1e-10, 1.0 + 1e-10).unwrap();
        assert_relative_eq!(flat, point, max_relative = 1e-6);
    }

    #[test]
    fn flat_contact_plateau_limit() {
        // eps * I -> |B'_r| as eps -> 0: the contact plateau carries the
        // whole singular mass.
        let r = 0.1;
        let eps = 1e-9;
        let v = flat_contact_integral(2, 2, 1, eps, r, 1.0).unwrap();
        assert_relative_eq!(v * eps, 2.0 * r, max_relative = 1e-3);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gap_integral(1, 2, 0, 1e-4, 1.0).is_err());
        assert!(gap_integral(2, 1, 0, 1e-4, 1.0).is_err());
        assert!(gap_integral(2, 2, 0, 0.0, 1.0).is_err());
        assert!(gap_integral(2, 2, 0, 1e-4, 0.0).is_err());
        assert!(flat_contact_integral(2, 2, 0, 1e-4, 0.0, 1.0).is_err());
        assert!(flat_contact_integral(2, 2, 0, 1e-4, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn decreasing_in_gap_width(
            n in 2u32..=4,
            m in 2u32..=5,
            k in 0u32..=4,
            eps in 1e-7f64..1e-2,
        ) {
            let v1 = gap_integral(n, m, k, eps, 0.5).unwrap();
            let v2 = gap_integral(n, m, k, 2.0 * eps, 0.5).unwrap();
            prop_assert!(v2 < v1 * (1.0 + 1e-9));
        }

        #[test]
        fn increasing_in_radius(
            n in 2u32..=4,
            m in 2u32..=5,
            k in 0u32..=4,
            eps in 1e-7f64..1e-2,
            r in 0.1f64..0.9,
        ) {
            let v1 = gap_integral(n, m, k, eps, r).unwrap();
            let v2 = gap_integral(n, m, k, eps, r + 0.1).unwrap();
            prop_assert!(v2 > v1 * (1.0 - 1e-12));
        }
    }
}
