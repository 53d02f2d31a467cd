//! Blow-up rate algebra and boundary-data classification.
//!
//! The singular behaviour of the gap problem is governed by the three-case
//! rate function
//!
//! ```text
//! rho_i(n, m; eps) = eps^((n+i-1)/m - 1)   if m > n+i-1,
//!                    |ln eps|              if m = n+i-1,
//!                    1                     if m < n+i-1,
//! ```
//!
//! together with the parity classes of the boundary datum on the bottom
//! graph near the contact point:
//!
//! * `A1`: every component even in each tangential coordinate,
//! * `A2`: components odd (in the plane: both odd in `x_1`),
//! * `A3`: first component odd, normal component zero (in the plane).
//!
//! From these the module builds the upper envelopes for `|grad u|`, the
//! lower-bound rates of the preset catalog `PhiOne`..`PhiFive` (blow-up on
//! the shortest line `{x' = 0}`) and `PhiTildeOne`..`PhiTildeThree` (blow-up
//! on the cylinder surface `{|x'| = eps^(1/m)}`), and the locus decision
//! tables. Everything here is closed-form arithmetic: it is the reference
//! the finite element measurements are judged against, so it must not share
//! code with the solvers.

use crate::error::{Error, Result};
use crate::geometry::{GapProfile, ProfileVariant, Sigma};
use crate::tol::ENVELOPE_C_DEFAULT;
use serde::{Deserialize, Serialize};

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("gap width must be positive, got {eps}"),
        });
    }
    if eps >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("rates need eps in (0, 1) so that ln(eps) < 0, got {eps}"),
        });
    }
    Ok(())
}

fn check_nm(n: u32, m: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("ambient dimension must be >= 2, got {n}"),
        });
    }
    if m < 2 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("convexity order must be >= 2, got {m}"),
        });
    }
    Ok(())
}

/// Magnitude of the logarithm, `|ln eps|`, for `eps` in `(0, 1)`.
fn log_mag(eps: f64) -> f64 {
    -eps.ln()
}

/// The three cases of the rate function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateCase {
    /// `eps^exponent` with a negative exponent.
    Power(f64),
    /// `|ln eps|`.
    Log,
    /// Constant 1.
    One,
}

/// A single rate `rho_i(n, m; eps)` in symbolic form with an evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunction {
    pub case: RateCase,
    /// Human-readable description such as `"eps^(-1/2)"`.
    pub prefactor: String,
}

impl RateFunction {
    pub fn eval(&self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(match self.case {
            RateCase::Power(p) => eps.powf(p),
            RateCase::Log => log_mag(eps),
            RateCase::One => 1.0,
        })
    }
}

/// Symbolic form of `rho_i(n, m; eps)`: selects the branch from the sign of
/// `m - (n+i-1)`.
pub fn rho_case(i: u32, n: u32, m: u32) -> Result<RateFunction> {
    check_nm(n, m)?;
    let t = n + i - 1;
    Ok(if m > t {
        let p = t as f64 / m as f64 - 1.0;
        RateFunction {
            case: RateCase::Power(p),
            prefactor: format!("eps^({t}/{m} - 1)"),
        }
    } else if m == t {
        RateFunction {
            case: RateCase::Log,
            prefactor: "|ln eps|".into(),
        }
    } else {
        RateFunction {
            case: RateCase::One,
            prefactor: "1".into(),
        }
    })
}

/// Evaluates `rho_i(n, m; eps)`.
pub fn rho(i: u32, n: u32, m: u32, eps: f64) -> Result<f64> {
    rho_case(i, n, m)?.eval(eps)
}

/// Parity class of the boundary datum near the contact point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityClass {
    /// Every component even in each tangential coordinate.
    A1,
    /// Components odd in a tangential coordinate (plane: both odd in `x_1`).
    A2,
    /// Tangential components odd in their own coordinate, normal component
    /// zero (plane: first component odd in `x_1`, second zero).
    A3,
    /// No parity assumed; generic growth bounds apply.
    None,
}

/// The parity-reduced growth pair `(rho_A, rho_B)` controlling the
/// translation and rotation functional families:
/// `rho_A = rho_k / rho_0` under `A1` (else `1/rho_0`),
/// `rho_B = rho_{k+1} / rho_2` under `A2` (else `1/rho_2`).
/// Without a parity class both families keep their generic growth.
pub fn rho_ab(class: ParityClass, k: u32, n: u32, m: u32, eps: f64) -> Result<(f64, f64)> {
    let r0 = rho(0, n, m, eps)?;
    let r2 = rho(2, n, m, eps)?;
    let rho_a = match class {
        ParityClass::A1 | ParityClass::None => rho(k, n, m, eps)? / r0,
        _ => 1.0 / r0,
    };
    let rho_b = match class {
        ParityClass::A2 | ParityClass::None => rho(k + 1, n, m, eps)? / r2,
        _ => 1.0 / r2,
    };
    Ok((rho_a, rho_b))
}

/// Off-diagonal Gram scale `rho_n(eps, |Sigma'|)`:
/// `|Sigma'| eps^(-1/m) + |ln eps|` in the plane, and
/// `|Sigma'| eps^(-1/m) + |Sigma'|^((n-2)/(n-1)) |ln eps| + 1` for `n >= 3`.
pub fn rho_offdiag(eps: f64, sigma_area: f64, n: u32, m: u32) -> Result<f64> {
    check_nm(n, m)?;
    check_eps(eps)?;
    let pow = sigma_area * eps.powf(-1.0 / m as f64);
    Ok(if n == 2 {
        pow + log_mag(eps)
    } else {
        pow + sigma_area.powf((n - 2) as f64 / (n - 1) as f64) * log_mag(eps) + 1.0
    })
}

/// Predicted scale of a Gram diagonal entry `a_{alpha alpha}`:
/// `(|Sigma'| + eps rho_0)/eps` for translation modes and
/// `(|Sigma'|^((n+1)/(n-1)) + eps rho_2)/eps` for rotation modes.
pub fn gram_diag_scale(
    translation: bool,
    n: u32,
    m: u32,
    eps: f64,
    sigma_area: f64,
) -> Result<f64> {
    Ok(if translation {
        (sigma_area + eps * rho(0, n, m, eps)?) / eps
    } else {
        (sigma_area.powf((n + 1) as f64 / (n - 1) as f64) + eps * rho(2, n, m, eps)?) / eps
    })
}

/// Predicted bound scale for a rigid-motion coefficient `|C^alpha|` given
/// the relevant functional magnitude `q`: `eps q / (|Sigma'| + eps rho_0)`
/// for translations, with the rotation denominator analogous.
pub fn coeff_bound_scale(
    translation: bool,
    q: f64,
    n: u32,
    m: u32,
    eps: f64,
    sigma_area: f64,
) -> Result<f64> {
    Ok(eps * q / (eps * gram_diag_scale(translation, n, m, eps, sigma_area)?))
}

/// Product rate `prefactor * eps^eps_power * |ln eps|^log_power`, the shape
/// every combined prediction in this crate reduces to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExpr {
    pub eps_power: f64,
    pub log_power: i32,
    pub prefactor: f64,
    /// Display form, e.g. `"|ln eps| * eps^(-1/3)"`.
    pub label: String,
}

impl RateExpr {
    pub fn eval(&self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(self.prefactor * eps.powf(self.eps_power) * log_mag(eps).powi(self.log_power))
    }

    /// Whether the prediction carries a logarithmic correction, which forces
    /// ratio-mode fitting instead of a pure log-log slope.
    pub fn has_log(&self) -> bool {
        self.log_power != 0
    }

    fn from_parts(prefactor: f64, parts: &[(RateCase, i32)], label: String) -> Self {
        let mut eps_power = 0.0;
        let mut log_power = 0;
        for (case, sign) in parts {
            match case {
                RateCase::Power(p) => eps_power += *sign as f64 * p,
                RateCase::Log => log_power += sign,
                RateCase::One => {}
            }
        }
        RateExpr {
            eps_power,
            log_power,
            prefactor,
            label,
        }
    }
}

/// The shortest-line blow-up rate `eta rho_k / (eps rho_0)` in symbolic
/// form, shared by the whole `Phi` preset family.
pub fn shortest_line_rate_expr(k: u32, n: u32, m: u32, eta: f64) -> Result<RateExpr> {
    let rk = rho_case(k, n, m)?;
    let r0 = rho_case(0, n, m)?;
    let label = format!("eta {} / (eps {})", rk.prefactor, r0.prefactor);
    let mut e = RateExpr::from_parts(eta, &[(rk.case, 1), (r0.case, -1)], label);
    e.eps_power -= 1.0;
    Ok(e)
}

/// The cylinder-surface blow-up rate `eta rho_{k+1} / (rho_2 eps^(1-1/m))`.
pub fn cylinder_rate_expr(k: u32, n: u32, m: u32, eta: f64) -> Result<RateExpr> {
    let rk1 = rho_case(k + 1, n, m)?;
    let r2 = rho_case(2, n, m)?;
    let label = format!("eta {} / ({} eps^(1-1/m))", rk1.prefactor, r2.prefactor);
    let mut e = RateExpr::from_parts(eta, &[(rk1.case, 1), (r2.case, -1)], label);
    e.eps_power -= 1.0 - 1.0 / m as f64;
    Ok(e)
}

/// The cylinder-surface rate `eta / eps^(1 - k/m)` of the low-order preset.
pub fn cylinder_low_order_rate_expr(k: u32, m: u32, eta: f64) -> RateExpr {
    RateExpr {
        eps_power: k as f64 / m as f64 - 1.0,
        log_power: 0,
        prefactor: eta,
        label: format!("eta / eps^(1 - {k}/{m})"),
    }
}

/// Where the gradient blow-up concentrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    /// The fiber `{x' = 0}` across the narrowest gap.
    ShortestLine,
    /// The fiber `{|x'| = eps^(1/m)}` where the gap thickness doubles.
    CylinderSurface,
    /// Both loci carry the maximal rate simultaneously.
    Both,
    /// No blow-up locus (bounded gradient).
    None,
}

impl std::fmt::Display for Locus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Locus::ShortestLine => "shortest_line",
            Locus::CylinderSurface => "cylinder_surface",
            Locus::Both => "both",
            Locus::None => "none",
        })
    }
}

/// Boundary-datum catalog: the explicit data families with known lower
/// bounds, plus generic parity representatives and harness data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    /// `phi^i = eta |x'|^k`, all components; valid for `m >= n+1`,
    /// `2 <= k < m-n+1` on the exact power-gap profile.
    PhiOne { k: u32, eta: f64 },
    /// `phi^i = x_1`, all components, on the tilted profile; `k = 1`.
    PhiTwo,
    /// Growth-`k` even datum (`k > 1`) at `m = n` whose limit functional
    /// `Q*_{k0}` is assumed nonzero for some translation index `k0`.
    PhiThree { k: u32, eta: f64, k0: usize },
    /// Even datum for `n-1 <= m < n` with `Q*_{k0}` nonzero.
    PhiFour { k: u32, eta: f64, k0: usize },
    /// Even datum for `m < n-1` with `Q*_{k0}` the only nonzero
    /// translation functional.
    PhiFive { k: u32, eta: f64, k0: usize },
    /// Odd datum `phi^i = eta x_1 |x_1|^(k-1)` with nonzero limit rotation
    /// functional; valid for `m > n`, `k > m-n`.
    PhiTildeOne { k: u32, eta: f64 },
    /// Odd datum `phi^i = eta x_1 |x_1|^(k-1)` at the threshold `k = m-n`,
    /// `m > n+1`, on the exact power-gap profile.
    PhiTildeTwo { k: u32, eta: f64 },
    /// `phi^i = eta x_i |x_i|^(k-1)` tangentially, zero normal component,
    /// for `k = 1, m = n+1` or `k < m-n`, on the exact power-gap profile.
    PhiTildeThree { k: u32, eta: f64 },
    /// Generic representative of a parity class with growth order `k`.
    CustomParity { class: ParityClass, k: u32, eta: f64 },
    /// `phi = (0, eta max(|x_1| - r, 0)^k)`: a normal datum vanishing to
    /// order `k` near a contact disk of radius `r` (the bounded,
    /// flat-contact regime). The even normal direction keeps the response
    /// in the single decoupled load mode, so boundedness is read without
    /// the slowly decaying translation-rotation coupling transients.
    FlatVanishing { k: u32, eta: f64, r: f64 },
    /// Zero datum.
    Zero,
    /// Rigid-motion datum `phi = psi_alpha` (plane: alpha in 1..=3).
    Rigid { alpha: usize },
}

/// A Dirichlet boundary datum: preset tag plus closed-form components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub preset: Preset,
}

impl BoundaryData {
    pub fn new(preset: Preset) -> Self {
        BoundaryData { preset }
    }

    pub fn phi_one(k: u32, eta: f64) -> Self {
        Self::new(Preset::PhiOne { k, eta })
    }

    pub fn phi_two() -> Self {
        Self::new(Preset::PhiTwo)
    }

    pub fn phi_three(k: u32, eta: f64, k0: usize) -> Self {
        Self::new(Preset::PhiThree { k, eta, k0 })
    }

    pub fn phi_tilde_three(k: u32, eta: f64) -> Self {
        Self::new(Preset::PhiTildeThree { k, eta })
    }

    pub fn custom(class: ParityClass, k: u32, eta: f64) -> Self {
        Self::new(Preset::CustomParity { class, k, eta })
    }

    pub fn zero() -> Self {
        Self::new(Preset::Zero)
    }

    pub fn rigid(alpha: usize) -> Self {
        Self::new(Preset::Rigid { alpha })
    }

    /// Growth order of the datum near the contact set (0 for harness data).
    pub fn k(&self) -> u32 {
        match self.preset {
            Preset::PhiOne { k, .. }
            | Preset::PhiThree { k, .. }
            | Preset::PhiFour { k, .. }
            | Preset::PhiFive { k, .. }
            | Preset::PhiTildeOne { k, .. }
            | Preset::PhiTildeTwo { k, .. }
            | Preset::PhiTildeThree { k, .. }
            | Preset::CustomParity { k, .. }
            | Preset::FlatVanishing { k, .. } => k,
            Preset::PhiTwo => 1,
            Preset::Zero | Preset::Rigid { .. } => 0,
        }
    }

    /// Amplitude `eta` of the growth bound (0 for harness data).
    pub fn eta(&self) -> f64 {
        match self.preset {
            Preset::PhiOne { eta, .. }
            | Preset::PhiThree { eta, .. }
            | Preset::PhiFour { eta, .. }
            | Preset::PhiFive { eta, .. }
            | Preset::PhiTildeOne { eta, .. }
            | Preset::PhiTildeTwo { eta, .. }
            | Preset::PhiTildeThree { eta, .. }
            | Preset::CustomParity { eta, .. }
            | Preset::FlatVanishing { eta, .. } => eta,
            Preset::PhiTwo => 1.0,
            Preset::Zero | Preset::Rigid { .. } => 0.0,
        }
    }

    /// Parity class of the components near the contact set.
    pub fn class(&self) -> ParityClass {
        match self.preset {
            Preset::PhiOne { .. }
            | Preset::PhiThree { .. }
            | Preset::PhiFour { .. }
            | Preset::PhiFive { .. }
            | Preset::FlatVanishing { .. } => ParityClass::A1,
            Preset::PhiTwo | Preset::PhiTildeOne { .. } | Preset::PhiTildeTwo { .. } => {
                ParityClass::A2
            }
            Preset::PhiTildeThree { .. } => ParityClass::A3,
            Preset::CustomParity { class, .. } => class,
            Preset::Zero | Preset::Rigid { .. } => ParityClass::None,
        }
    }

    /// Evaluates the datum components at a boundary point of the plane.
    ///
    /// The presets are closed forms in `x_1` alone (extended off the bottom
    /// graph by vertical constancy); the rigid datum depends on both
    /// coordinates.
    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let x = p[0];
        match self.preset {
            Preset::Zero => [0.0, 0.0],
            Preset::Rigid { alpha } => match alpha {
                1 => [1.0, 0.0],
                2 => [0.0, 1.0],
                _ => [p[1], -p[0]],
            },
            Preset::PhiTwo => [x, x],
            Preset::PhiOne { k, eta }
            | Preset::PhiThree { k, eta, .. }
            | Preset::PhiFour { k, eta, .. }
            | Preset::PhiFive { k, eta, .. } => {
                let v = eta * x.abs().powi(k as i32);
                [v, v]
            }
            Preset::PhiTildeOne { k, eta } | Preset::PhiTildeTwo { k, eta } => {
                let v = eta * x * x.abs().powi(k as i32 - 1);
                [v, v]
            }
            Preset::PhiTildeThree { k, eta } => {
                [eta * x * x.abs().powi(k as i32 - 1), 0.0]
            }
            Preset::CustomParity { class, k, eta } => {
                let even = eta * x.abs().powi(k as i32);
                let odd = eta * x * x.abs().powi(k as i32 - 1);
                match class {
                    ParityClass::A1 => [even, even],
                    ParityClass::A2 => [odd, odd],
                    ParityClass::A3 => [odd, 0.0],
                    ParityClass::None => [0.5 * (even + odd), even],
                }
            }
            Preset::FlatVanishing { k, eta, r } => {
                let v = eta * (x.abs() - r).max(0.0).powi(k as i32);
                [0.0, v]
            }
        }
    }

    /// Crude closed-form bound on the `C^2` norm of the datum over the unit
    /// disk: monomial data of growth `k` and amplitude `eta` stays below
    /// `eta (1 + k + k^2)` together with its first two derivatives.
    pub fn c2_norm_bound(&self) -> f64 {
        let k = self.k() as f64;
        match self.preset {
            Preset::Zero => 0.0,
            Preset::Rigid { .. } => 2.0,
            _ => self.eta() * (1.0 + k + k * k),
        }
    }
}

/// Inputs for the four-term gap envelope of the gradient.
#[derive(Debug, Clone, Copy)]
pub struct Thm11Inputs {
    /// Distance `d(x')` from the horizontal position to the contact set.
    pub dist: f64,
    /// Horizontal magnitude `|x'|`.
    pub x_abs: f64,
    /// Largest translation functional magnitude `max_{beta <= n} |Q_beta|`.
    pub q_i: f64,
    /// Largest rotation functional magnitude.
    pub q_ii: f64,
    /// `|phi|` at the bottom-graph point below `x'`.
    pub phi_trace: f64,
    /// `C^2` norm bound of the datum.
    pub phi_norm: f64,
    /// Contact-set measure `|Sigma'|`.
    pub sigma_area: f64,
    pub n: u32,
    pub m: u32,
    pub eps: f64,
    /// Envelope constant.
    pub c: f64,
}

/// Pointwise gap envelope
/// `C [ Q_I eps / ((eps+d^m)(|Sigma'| + eps rho_0))
///    + |phi(x',h)| / (eps+d^m)
///    + Q_II (eps+|x'|) eps / ((eps+d^m)(|Sigma'|^((n+1)/(n-1)) + eps rho_2))
///    + ||phi||_C2 ]`.
pub fn upper_bound_thm11(inp: &Thm11Inputs) -> Result<f64> {
    check_nm(inp.n, inp.m)?;
    check_eps(inp.eps)?;
    let eps = inp.eps;
    let denom = eps + inp.dist.powi(inp.m as i32);
    let r0 = rho(0, inp.n, inp.m, eps)?;
    let r2 = rho(2, inp.n, inp.m, eps)?;
    let sig_rot = inp.sigma_area.powf((inp.n + 1) as f64 / (inp.n - 1) as f64);
    let t1 = inp.q_i / denom * eps / (inp.sigma_area + eps * r0);
    let t2 = inp.phi_trace / denom;
    let t3 = inp.q_ii / denom * (eps + inp.x_abs) * eps / (sig_rot + eps * r2);
    Ok(inp.c * (t1 + t2 + t3 + inp.phi_norm))
}

/// Point-contact envelope in parity-reduced form:
/// `C/(eps+|x'|^m) [eta rho_A + ||phi||/rho_0 + |x'| (eta rho_B + ||phi||/rho_2)]
///  + eta |x'|^k/(eps+|x'|^m) + C ||phi||`.
#[allow(clippy::too_many_arguments)]
pub fn upper_bound_cor15(
    x_abs: f64,
    class: ParityClass,
    k: u32,
    eta: f64,
    phi_norm: f64,
    n: u32,
    m: u32,
    eps: f64,
    c: f64,
) -> Result<f64> {
    check_nm(n, m)?;
    check_eps(eps)?;
    let (rho_a, rho_b) = rho_ab(class, k, n, m, eps)?;
    let r0 = rho(0, n, m, eps)?;
    let r2 = rho(2, n, m, eps)?;
    let denom = eps + x_abs.powi(m as i32);
    let bracket = eta * rho_a + phi_norm / r0 + x_abs * (eta * rho_b + phi_norm / r2);
    Ok(c / denom * bracket + eta * x_abs.powi(k as i32) / denom + c * phi_norm)
}

/// Whether the coarse envelope `C (eta + ||phi||) eps^(-n/m) +
/// |x'|^k/(eps + |x'|^m)` applies: `k >= m - n` together with `m > n + 1`.
pub fn simplified_envelope_applies(n: u32, m: u32, k: u32) -> bool {
    m > n + 1 && k + n >= m
}

/// The coarse high-order envelope (valid when
/// [`simplified_envelope_applies`] holds).
pub fn upper_bound_simplified(
    x_abs: f64,
    k: u32,
    eta: f64,
    phi_norm: f64,
    n: u32,
    m: u32,
    eps: f64,
    c: f64,
) -> Result<f64> {
    check_nm(n, m)?;
    check_eps(eps)?;
    let denom = eps + x_abs.powi(m as i32);
    Ok(c * ((eta + phi_norm) * eps.powf(-(n as f64) / m as f64) + x_abs.powi(k as i32) / denom))
}

fn hypothesis(condition: &'static str, detail: String) -> Error {
    Error::Hypothesis { condition, detail }
}

fn require_point_contact(profile: &GapProfile) -> Result<()> {
    if profile.sigma != Sigma::Point {
        return Err(hypothesis(
            "point contact set",
            "lower bounds are stated for Sigma' = {0'}".into(),
        ));
    }
    Ok(())
}

fn require_pure_power(profile: &GapProfile) -> Result<()> {
    if profile.variant != ProfileVariant::PurePower || profile.sigma != Sigma::Point {
        return Err(hypothesis(
            "exact power gap (h1 - h = |x'|^m)",
            format!("profile variant is {:?}", profile.variant),
        ));
    }
    Ok(())
}

fn require_even_profile(profile: &GapProfile) -> Result<()> {
    if !profile.is_even() {
        return Err(hypothesis(
            "H5 (gap even in x_1)",
            "parity conclusions need an even profile".into(),
        ));
    }
    Ok(())
}

/// Validates a preset's hypotheses against the geometry and returns the
/// symbolic lower-bound rate and its locus.
///
/// Conditions `Q*_{k0} != 0` (and the vanishing of the other limit
/// functionals for the low-order preset) are structural claims about the
/// datum that only a numerical limit can test; they are accepted here as
/// asserted by the preset and checked separately by the stabilization
/// estimator. The material condition `lambda + 2 mu != 0` of the threshold
/// preset holds for every admissible constant pair (`mu > 0` forces
/// `lambda + 2 mu > mu` in the plane) and is therefore not a parameter.
pub fn lower_bound_expr(
    data: &BoundaryData,
    profile: &GapProfile,
    n: u32,
) -> Result<(Locus, RateExpr)> {
    check_nm(n, profile.m)?;
    let m = profile.m;
    let k = data.k();
    let eta = data.eta();
    match data.preset {
        Preset::PhiOne { .. } => {
            require_pure_power(profile)?;
            if m < n + 1 {
                return Err(hypothesis("m >= n+1", format!("m = {m}, n = {n}")));
            }
            if !(2 <= k && k + n < m + 1) {
                return Err(hypothesis(
                    "2 <= k < m-n+1",
                    format!("k = {k}, m-n+1 = {}", m as i64 - n as i64 + 1),
                ));
            }
            Ok((Locus::ShortestLine, shortest_line_rate_expr(k, n, m, eta)?))
        }
        Preset::PhiTwo => {
            if profile.variant != ProfileVariant::Tilted {
                return Err(hypothesis(
                    "tilted profile (h1 - h = (1+x_1)|x'|^m)",
                    format!("profile variant is {:?}", profile.variant),
                ));
            }
            if m < n {
                return Err(hypothesis("m >= n", format!("m = {m}, n = {n}")));
            }
            Ok((Locus::ShortestLine, shortest_line_rate_expr(1, n, m, 1.0)?))
        }
        Preset::PhiThree { .. } => {
            require_point_contact(profile)?;
            require_even_profile(profile)?;
            if m != n {
                return Err(hypothesis("m = n", format!("m = {m}, n = {n}")));
            }
            if k <= 1 {
                return Err(hypothesis("k > 1", format!("k = {k}")));
            }
            Ok((Locus::ShortestLine, shortest_line_rate_expr(k, n, m, eta)?))
        }
        Preset::PhiFour { .. } => {
            require_point_contact(profile)?;
            require_even_profile(profile)?;
            if !(n >= 1 && m + 1 >= n && m < n) {
                return Err(hypothesis("n-1 <= m < n", format!("m = {m}, n = {n}")));
            }
            Ok((Locus::ShortestLine, shortest_line_rate_expr(k, n, m, eta)?))
        }
        Preset::PhiFive { .. } => {
            require_point_contact(profile)?;
            require_even_profile(profile)?;
            if m + 1 >= n {
                return Err(hypothesis("m < n-1", format!("m = {m}, n = {n}")));
            }
            Ok((Locus::ShortestLine, shortest_line_rate_expr(k, n, m, eta)?))
        }
        Preset::PhiTildeOne { .. } => {
            require_point_contact(profile)?;
            require_even_profile(profile)?;
            if m <= n {
                return Err(hypothesis("m > n", format!("m = {m}, n = {n}")));
            }
            if k + n <= m {
                return Err(hypothesis("k > m-n", format!("k = {k}, m-n = {}", m - n)));
            }
            Ok((Locus::CylinderSurface, cylinder_rate_expr(k, n, m, eta)?))
        }
        Preset::PhiTildeTwo { .. } => {
            require_pure_power(profile)?;
            if m <= n + 1 {
                return Err(hypothesis("m > n+1", format!("m = {m}, n = {n}")));
            }
            if k + n != m {
                return Err(hypothesis("k = m-n", format!("k = {k}, m-n = {}", m - n)));
            }
            Ok((Locus::CylinderSurface, cylinder_rate_expr(k, n, m, eta)?))
        }
        Preset::PhiTildeThree { .. } => {
            require_pure_power(profile)?;
            if m <= n {
                return Err(hypothesis("m > n", format!("m = {m}, n = {n}")));
            }
            let threshold = k == 1 && m == n + 1;
            let low = k + n < m;
            if !(threshold || low) {
                return Err(hypothesis(
                    "k = 1, m = n+1 or k < m-n",
                    format!("k = {k}, m = {m}, n = {n}"),
                ));
            }
            Ok((
                Locus::CylinderSurface,
                cylinder_low_order_rate_expr(k, m, eta),
            ))
        }
        _ => Err(hypothesis(
            "explicit lower-bound preset",
            format!("{:?} carries no proven lower bound", data.preset),
        )),
    }
}

/// Evaluates the preset lower bound at a given `eps`.
pub fn lower_bound(
    data: &BoundaryData,
    profile: &GapProfile,
    n: u32,
    eps: f64,
) -> Result<(Locus, f64)> {
    let (locus, expr) = lower_bound_expr(data, profile, n)?;
    Ok((locus, expr.eval(eps)?))
}

/// Locus decision table for a parity class (point contact):
/// under `A1` the maximum sits on the shortest line for `m < n` (any `k`)
/// and for `m = n, k = 1`; on both loci for `m = n, k > 1` and for
/// `m >= n+1, k < m-n+1`; on the cylinder surface for `m >= n+1,
/// k >= m-n+1`. Under `A2`/`A3` the split is `m < n` / `m = n` / `m > n`.
pub fn locus_table(class: ParityClass, n: u32, m: u32, k: u32) -> Result<Locus> {
    check_nm(n, m)?;
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "growth order must be a positive integer".into(),
        });
    }
    match class {
        ParityClass::A1 => Ok(if m < n {
            Locus::ShortestLine
        } else if m == n {
            if k == 1 {
                Locus::ShortestLine
            } else {
                Locus::Both
            }
        } else if k + n < m + 1 {
            Locus::Both
        } else {
            Locus::CylinderSurface
        }),
        ParityClass::A2 | ParityClass::A3 => Ok(match m.cmp(&n) {
            std::cmp::Ordering::Less => Locus::ShortestLine,
            std::cmp::Ordering::Equal => Locus::Both,
            std::cmp::Ordering::Greater => Locus::CylinderSurface,
        }),
        ParityClass::None => Err(hypothesis(
            "parity class",
            "locus tables are stated for classes A1, A2, A3".into(),
        )),
    }
}

/// Envelope closure attached to a prediction: evaluates the point-contact
/// upper bound at `(|x'|, eps)` with the stored datum parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UpperEnvelope {
    pub class: ParityClass,
    pub k: u32,
    pub eta: f64,
    pub phi_norm: f64,
    pub n: u32,
    pub m: u32,
    pub c: f64,
}

impl UpperEnvelope {
    pub fn eval(&self, x_abs: f64, eps: f64) -> Result<f64> {
        upper_bound_cor15(
            x_abs,
            self.class,
            self.k,
            self.eta,
            self.phi_norm,
            self.n,
            self.m,
            eps,
            self.c,
        )
    }
}

/// Which regime a classified datum falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimeTag {
    pub class: ParityClass,
    /// 1 = shortest line only, 2 = both loci, 3 = cylinder surface,
    /// 0 = bounded (no blow-up locus).
    pub remark_case: u8,
    /// Whether the coarse envelope form applies (`k >= m-n`, `m > n+1`).
    pub simplified_form: bool,
    /// The open threshold cases where two envelope terms peak at the same
    /// rate and no lower bound is available.
    pub lower_undetermined: bool,
}

/// A classified prediction: blow-up locus, upper envelope, and the
/// lower-bound rate when the preset carries one.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub locus: Locus,
    pub envelope: UpperEnvelope,
    pub lower: Option<(Locus, RateExpr)>,
    pub regime: RegimeTag,
}

/// Classifies a datum on a profile: locus per the parity tables, envelope
/// parameters, attached lower bound where a preset hypothesis is satisfied.
///
/// A positive-measure contact set short-circuits to the bounded regime (no
/// blow-up locus). Harness data (zero or rigid datum) also classifies as
/// bounded. Threshold cases with no available lower bound are flagged
/// `lower_undetermined` rather than given a guessed rate.
pub fn classify(data: &BoundaryData, profile: &GapProfile, n: u32) -> Result<Prediction> {
    check_nm(n, profile.m)?;
    let class = data.class();
    let m = profile.m;
    let k = data.k();
    let envelope = UpperEnvelope {
        class,
        k: k.max(1),
        eta: data.eta(),
        phi_norm: data.c2_norm_bound(),
        n,
        m,
        c: ENVELOPE_C_DEFAULT,
    };

    let bounded = matches!(data.preset, Preset::Zero | Preset::Rigid { .. })
        || matches!(profile.sigma, Sigma::Disk { .. });
    if bounded {
        return Ok(Prediction {
            locus: Locus::None,
            envelope,
            lower: None,
            regime: RegimeTag {
                class,
                remark_case: 0,
                simplified_form: false,
                lower_undetermined: false,
            },
        });
    }

    if class == ParityClass::None {
        return Err(hypothesis(
            "parity class",
            "locus tables are stated for classes A1, A2, A3".into(),
        ));
    }
    if matches!(data.preset, Preset::PhiTwo) {
        if profile.variant != ProfileVariant::Tilted {
            return Err(hypothesis(
                "tilted profile (h1 - h = (1+x_1)|x'|^m)",
                "this preset prescribes its own gap shape".into(),
            ));
        }
    } else {
        require_even_profile(profile)?;
    }

    let locus = locus_table(class, n, m, k)?;
    let remark_case = match locus {
        Locus::ShortestLine => 1,
        Locus::Both => 2,
        Locus::CylinderSurface => 3,
        Locus::None => 0,
    };

    // Threshold data where two envelope terms attain the peak rate
    // together: odd data of the all-components form at (k = 1, m = n+1) or
    // (k < m-n), and the tangential-only odd form at (k = m-n, m > n+1).
    let lower_undetermined = match class {
        ParityClass::A2 => (k == 1 && m == n + 1) || (k + n < m),
        ParityClass::A3 => m > n + 1 && k + n == m,
        _ => false,
    };

    let lower = lower_bound_expr(data, profile, n).ok();
    Ok(Prediction {
        locus,
        envelope,
        lower,
        regime: RegimeTag {
            class,
            remark_case,
            simplified_form: simplified_envelope_applies(n, m, k),
            lower_undetermined,
        },
    })
}
