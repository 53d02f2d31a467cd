//! Thin-gap contact geometry.
//!
//! The gap between the matrix boundary and the inclusion is described by two
//! graphs over the patch `|x'| < 2R`: a bottom graph `x_n = h(x')` on the
//! outer boundary and a top graph `x_n = eps + h1(x')` on the inclusion. The
//! contact set `Sigma'` is where `h1 - h` vanishes, either a single point or
//! a closed disk of radius `r`. Profiles are closed-form families
//!
//! * pure power:    `h1 - h = d(x')^m` with `Sigma' = {0'}`,
//! * tilted:        `h1 - h = (1 + x_1) |x'|^m` (breaks the evenness
//!   condition H5, used to separate parity effects),
//! * flat contact:  `h1 - h = d(x')^m` with `Sigma' = Disk(r)`,
//!
//! where `d(x')` is the distance to the contact set. Closed forms make the
//! admissibility conditions H1-H5 checkable exactly:
//!
//! * H1: `h1 = h = 0` on `Sigma'`;
//! * H2: `kappa_1 d^m <= h1 - h <= kappa_2 d^m` off `Sigma'`;
//! * H3: `|h'|, |h1'| <= kappa_3 d^(m-1)`;
//! * H4: `C^(2,alpha)` norms of the graphs bounded by `kappa_4`;
//! * H5: `h1 - h` even in each tangential coordinate on `|x'| < R`.
//!
//! Numerics run in the plane (`n = 2`), so `x'` is a scalar throughout this
//! module; the contact-set measure is still provided for general `n` because
//! the rate algebra needs it.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default gap-patch radius `R`; the graphs are used on `|x'| < 2R = 0.5`.
pub const DEFAULT_PATCH_RADIUS: f64 = 0.25;

/// Contact set `Sigma'` between the two graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Sigma {
    /// Single contact point at the origin.
    #[default]
    Point,
    /// Closed contact disk `|x'| <= r`.
    Disk { r: f64 },
}

impl Sigma {
    /// `(n-1)`-dimensional measure `|Sigma'|` of the contact set.
    ///
    /// Zero for a point; for a disk of radius `r` it is the volume of the
    /// `(n-1)`-ball: `2r` (n=2), `pi r^2` (n=3), `(4/3) pi r^3` (n=4).
    pub fn area(&self, n: u32) -> f64 {
        match *self {
            Sigma::Point => 0.0,
            Sigma::Disk { r } => ball_volume(n - 1, r),
        }
    }
}

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3`, clamped outside `[0, 1]`:
/// a `C^2` ramp with vanishing first and second derivatives at both ends,
/// used wherever two closed-form surfaces are blended.
pub fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Volume of the `d`-dimensional ball of radius `r`.
pub fn ball_volume(d: u32, r: f64) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r.powi(3),
        d => {
            // V_d = V_{d-2} * 2 pi r^2 / d
            ball_volume(d - 2, r) * 2.0 * std::f64::consts::PI * r * r / d as f64
        }
    }
}

/// Closed-form profile family for `h1 - h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileVariant {
    /// `h1 - h = d(x')^m`, even in `x_1`.
    #[default]
    PurePower,
    /// `h1 - h = (1 + x_1) |x'|^m`; requires a point contact set.
    Tilted,
    /// `h1 - h = d(x')^m` with a disk contact set.
    FlatContact,
}

/// A gap profile: convexity order, contact set, closed-form family, and the
/// constants used by the admissibility checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    /// Convexity order `m >= 2` of the gap opening.
    pub m: u32,
    /// Contact set descriptor.
    pub sigma: Sigma,
    /// Closed-form family for `h1 - h`.
    pub variant: ProfileVariant,
    /// Gap-patch radius `R`; graphs are valid on `|x'| < 2R`.
    pub patch_radius: f64,
    /// Opening length `ell`: the distance from the contact set at which
    /// the gap reaches unit thickness. The families scale the contact
    /// distance, `h1 - h = w(x_1) (d(x_1)/ell)^m`, so a short `ell` is a
    /// sharp opening. Default 1.
    pub opening_length: f64,
    /// Constants `(kappa_1, kappa_2, kappa_3, kappa_4)` for H2-H4.
    pub kappa: [f64; 4],
}

/// Constants `(kappa_1, ..., kappa_4)` loose enough that every closed-form
/// variant of order `m` passes its applicable checks on the default patch.
pub fn default_kappa(m: u32) -> [f64; 4] {
    [0.5, 1.5, 2.0 * m as f64, 50.0]
}

/// Builds a profile after validating the basic admissibility constraints.
///
/// Rejects `m < 2`, a contact disk at least as large as the patch radius,
/// non-increasing kappa brackets, and the tilted family paired with a disk
/// contact set (the tilt factor is tied to point contact).
pub fn build_gap_profile(
    m: u32,
    sigma: Sigma,
    variant: ProfileVariant,
    kappa: [f64; 4],
) -> Result<GapProfile> {
    let patch_radius = DEFAULT_PATCH_RADIUS;
    if m < 2 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("convexity order must be >= 2, got {m}"),
        });
    }
    if let Sigma::Disk { r } = sigma {
        if !(r > 0.0) || r >= patch_radius {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!(
                    "contact disk radius must satisfy 0 < r < R = {patch_radius}, got {r}"
                ),
            });
        }
    }
    if kappa.iter().any(|k| !(*k > 0.0)) || kappa[0] > kappa[1] {
        return Err(Error::InvalidParameter {
            name: "kappa",
            reason: format!("need 0 < kappa_1 <= kappa_2 and kappa_3, kappa_4 > 0, got {kappa:?}"),
        });
    }
    if variant == ProfileVariant::Tilted && sigma != Sigma::Point {
        return Err(Error::InvalidParameter {
            name: "variant",
            reason: "the tilted family requires a point contact set".into(),
        });
    }
    Ok(GapProfile {
        m,
        sigma,
        variant,
        patch_radius,
        opening_length: 1.0,
        kappa,
    })
}

impl GapProfile {
    /// Convenience constructor with the default kappa constants.
    pub fn new(m: u32, sigma: Sigma, variant: ProfileVariant) -> Result<Self> {
        build_gap_profile(m, sigma, variant, default_kappa(m))
    }

    /// Rebuilds the profile over a different gap-patch radius.
    ///
    /// The contact disk must stay strictly inside the patch. The upper cap
    /// is left to the consumers: the mesh generator knows how much room
    /// the blend into the outer circle needs.
    pub fn with_patch_radius(mut self, patch_radius: f64) -> Result<Self> {
        if !(patch_radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "patch_radius",
                reason: format!("patch radius must be positive, got {patch_radius}"),
            });
        }
        if let Sigma::Disk { r } = self.sigma {
            if r >= patch_radius {
                return Err(Error::InvalidParameter {
                    name: "patch_radius",
                    reason: format!(
                        "contact disk radius {r} must stay strictly inside the patch radius {patch_radius}"
                    ),
                });
            }
        }
        self.patch_radius = patch_radius;
        Ok(self)
    }

    /// Rebuilds the profile with a different opening length.
    pub fn with_opening_length(mut self, opening_length: f64) -> Result<Self> {
        if !(opening_length > 0.0) {
            return Err(Error::InvalidParameter {
                name: "opening_length",
                reason: format!("opening length must be positive, got {opening_length}"),
            });
        }
        self.opening_length = opening_length;
        Ok(self)
    }

    /// Distance `d(x')` from a patch point to the contact set.
    pub fn dist_to_sigma(&self, x1: f64) -> f64 {
        match self.sigma {
            Sigma::Point => x1.abs(),
            Sigma::Disk { r } => (x1.abs() - r).max(0.0),
        }
    }

    /// Tilt factor `w(x_1)`: 1 for the even families, `1 + x_1` for tilted.
    fn tilt(&self, x1: f64) -> f64 {
        match self.variant {
            ProfileVariant::Tilted => 1.0 + x1,
            _ => 1.0,
        }
    }

    fn tilt_deriv(&self) -> f64 {
        match self.variant {
            ProfileVariant::Tilted => 1.0,
            _ => 0.0,
        }
    }

    /// Bottom graph `h(x_1)`; identically zero on the patch for every family.
    pub fn h(&self, _x1: f64) -> f64 {
        0.0
    }

    /// Top-graph offset `h1(x_1) = h + w(x_1) (d(x_1)/ell)^m`.
    pub fn h1(&self, x1: f64) -> f64 {
        let t = self.dist_to_sigma(x1) / self.opening_length;
        self.tilt(x1) * t.powi(self.m as i32)
    }

    /// `h'(x_1)`; zero for the flat bottom graph.
    pub fn dh(&self, _x1: f64) -> f64 {
        0.0
    }

    /// `h1'(x_1)` by the product rule on `w(x_1) (d(x_1)/ell)^m`.
    pub fn dh1(&self, x1: f64) -> f64 {
        let t = self.dist_to_sigma(x1) / self.opening_length;
        let ts = self.dist_deriv(x1) / self.opening_length;
        let m = self.m as i32;
        self.tilt_deriv() * t.powi(m) + self.tilt(x1) * self.m as f64 * t.powi(m - 1) * ts
    }

    /// `h1''(x_1)` away from the contact-set boundary.
    pub fn d2h1(&self, x1: f64) -> f64 {
        let t = self.dist_to_sigma(x1) / self.opening_length;
        let ts = self.dist_deriv(x1) / self.opening_length;
        let m = self.m as f64;
        let mi = self.m as i32;
        2.0 * self.tilt_deriv() * m * t.powi(mi - 1) * ts
            + self.tilt(x1) * m * (m - 1.0) * t.powi(mi - 2) * ts * ts
    }

    fn dist_deriv(&self, x1: f64) -> f64 {
        match self.sigma {
            Sigma::Point => x1.signum(),
            Sigma::Disk { r } => {
                if x1.abs() > r {
                    x1.signum()
                } else {
                    0.0
                }
            }
        }
    }

    /// Gap thickness `delta(x') = eps + h1(x') - h(x')`.
    pub fn gap_thickness(&self, x1: f64, eps: f64) -> f64 {
        eps + self.h1(x1) - self.h(x1)
    }

    /// Measure `|Sigma'|` of the contact set in ambient dimension `n`.
    pub fn sigma_area(&self, n: u32) -> f64 {
        self.sigma.area(n)
    }

    /// Whether the family is even in `x_1` by construction.
    pub fn is_even(&self) -> bool {
        self.variant != ProfileVariant::Tilted
    }
}

/// Result of checking one admissibility condition at sampled points.
#[derive(Debug, Clone)]
pub struct ConditionEntry {
    /// Condition label, `"H1"` through `"H5"`.
    pub condition: &'static str,
    pub passed: bool,
    /// Worst sampled margin; negative means the condition failed by that
    /// amount in the check's own normalization.
    pub worst_margin: f64,
    pub detail: String,
}

/// Report from [`verify_h_conditions`]: one entry per condition, failures
/// included as entries rather than errors.
#[derive(Debug, Clone)]
pub struct HReport {
    pub entries: Vec<ConditionEntry>,
}

impl HReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn entry(&self, condition: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.condition == condition)
    }
}

impl std::fmt::Display for HReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{}: {} (worst margin {:+.3e}) {}",
                e.condition,
                if e.passed { "pass" } else { "FAIL" },
                e.worst_margin,
                e.detail
            )?;
        }
        Ok(())
    }
}

/// Exact-zero tolerance for conditions that hold identically (H1, H5).
const EXACT_TOL: f64 = 1e-13;
/// Slack for ratio checks evaluated in floating point (H2, H3).
const RATIO_TOL: f64 = 1e-11;

/// Samples each of H1-H5 at `sample_count` points per check and reports the
/// worst margin for each condition.
///
/// H2 and H3 sample `|x'| < 2R` off the contact set, H5 samples `|x'| < R`,
/// H1 samples the contact set itself. H4 bounds `|h1| + |h1'| + |h1''|` plus
/// a first-order Hoelder quotient of `h1''` over adjacent samples, which
/// catches curvature jumps at a contact-disk edge.
pub fn verify_h_conditions(profile: &GapProfile, sample_count: usize) -> Result<HReport> {
    if sample_count < 100 {
        return Err(Error::InvalidParameter {
            name: "sample_count",
            reason: format!("need at least 100 samples, got {sample_count}"),
        });
    }
    let two_r = 2.0 * profile.patch_radius;
    let mut entries = Vec::with_capacity(5);

    // H1: both graphs vanish on the contact set.
    let sigma_samples: Vec<f64> = match profile.sigma {
        Sigma::Point => vec![0.0],
        Sigma::Disk { r } => (0..sample_count)
            .map(|i| -r + 2.0 * r * i as f64 / (sample_count - 1) as f64)
            .collect(),
    };
    let h1_worst = sigma_samples
        .iter()
        .map(|&x| profile.h1(x).abs().max(profile.h(x).abs()))
        .fold(0.0f64, f64::max);
    entries.push(ConditionEntry {
        condition: "H1",
        passed: h1_worst <= EXACT_TOL,
        worst_margin: -h1_worst,
        detail: "graphs vanish on the contact set".into(),
    });

    // Off-contact samples on |x'| < 2R, both signs, excluding the contact
    // set where the H2/H3 ratios degenerate.
    let off_samples: Vec<f64> = (0..sample_count)
        .map(|i| {
            let t = (i as f64 + 0.5) / sample_count as f64;
            -two_r + 2.0 * two_r * t
        })
        .filter(|&x| profile.dist_to_sigma(x) > 1e-6)
        .collect();

    // H2: kappa_1 <= (h1 - h)/d^m <= kappa_2.
    let mut h2_margin = f64::INFINITY;
    for &x in &off_samples {
        let d = profile.dist_to_sigma(x);
        let ratio = (profile.h1(x) - profile.h(x)) / d.powi(profile.m as i32);
        h2_margin = h2_margin
            .min(ratio - profile.kappa[0])
            .min(profile.kappa[1] - ratio);
    }
    entries.push(ConditionEntry {
        condition: "H2",
        passed: h2_margin >= -RATIO_TOL,
        worst_margin: h2_margin,
        detail: format!(
            "(h1-h)/d^m within [{}, {}]",
            profile.kappa[0], profile.kappa[1]
        ),
    });

    // H3: |h1'|, |h'| <= kappa_3 d^(m-1).
    let mut h3_margin = f64::INFINITY;
    for &x in &off_samples {
        let d = profile.dist_to_sigma(x);
        let scale = d.powi(profile.m as i32 - 1);
        let slope = profile.dh1(x).abs().max(profile.dh(x).abs());
        h3_margin = h3_margin.min(profile.kappa[2] - slope / scale);
    }
    entries.push(ConditionEntry {
        condition: "H3",
        passed: h3_margin >= -RATIO_TOL,
        worst_margin: h3_margin,
        detail: format!("|grad h1| / d^(m-1) below {}", profile.kappa[2]),
    });

    // H4: C^(2,alpha) bound via |h1| + |h1'| + |h1''| plus the Hoelder
    // quotient of h1'' over adjacent sample pairs (alpha = 1).
    let mut c2_worst = 0.0f64;
    for &x in &off_samples {
        let v = profile.h1(x).abs() + profile.dh1(x).abs() + profile.d2h1(x).abs();
        c2_worst = c2_worst.max(v);
    }
    let mut hoelder = 0.0f64;
    for pair in off_samples.windows(2) {
        let dx = (pair[1] - pair[0]).abs();
        if dx > 1e-12 {
            hoelder = hoelder.max((profile.d2h1(pair[1]) - profile.d2h1(pair[0])).abs() / dx);
        }
    }
    let h4_value = c2_worst + hoelder;
    entries.push(ConditionEntry {
        condition: "H4",
        passed: h4_value <= profile.kappa[3],
        worst_margin: profile.kappa[3] - h4_value,
        detail: format!("sampled C^(2,1) proxy {h4_value:.3} vs {}", profile.kappa[3]),
    });

    // H5: h1 - h even in x_1 on |x'| < R.
    let mut h5_worst = 0.0f64;
    for i in 0..sample_count {
        let x = profile.patch_radius * (i as f64 + 0.5) / sample_count as f64;
        let g_pos = profile.h1(x) - profile.h(x);
        let g_neg = profile.h1(-x) - profile.h(-x);
        h5_worst = h5_worst.max((g_pos - g_neg).abs());
    }
    entries.push(ConditionEntry {
        condition: "H5",
        passed: h5_worst <= EXACT_TOL,
        worst_margin: -h5_worst,
        detail: "h1 - h even in x_1".into(),
    });

    Ok(HReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pure(m: u32) -> GapProfile {
        GapProfile::new(m, Sigma::Point, ProfileVariant::PurePower).unwrap()
    }

    #[test]
    fn dist_to_point_contact() {
        let p = pure(2);
        assert_eq!(p.dist_to_sigma(0.0), 0.0);
        assert_eq!(p.dist_to_sigma(-0.3), 0.3);
    }

    #[test]
    fn dist_to_disk_contact() {
        let p = GapProfile::new(3, Sigma::Disk { r: 0.1 }, ProfileVariant::FlatContact).unwrap();
        assert_relative_eq!(p.dist_to_sigma(0.3), 0.2, max_relative = 1e-15);
        assert_eq!(p.dist_to_sigma(0.05), 0.0);
        assert_eq!(p.dist_to_sigma(-0.05), 0.0);
    }

    #[test]
    fn thickness_at_contact_is_eps() {
        assert_relative_eq!(pure(2).gap_thickness(0.0, 0.01), 0.01);
    }

    #[test]
    fn thickness_pure_power_quadratic() {
        assert_relative_eq!(pure(2).gap_thickness(0.1, 0.01), 0.02, max_relative = 1e-14);
    }

    #[test]
    fn thickness_tilted_quartic() {
        let p = GapProfile::new(4, Sigma::Point, ProfileVariant::Tilted).unwrap();
        assert_relative_eq!(
            p.gap_thickness(0.1, 1e-3),
            1.11e-3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn builder_rejects_low_order() {
        assert!(build_gap_profile(1, Sigma::Point, ProfileVariant::PurePower, default_kappa(1)).is_err());
    }

    #[test]
    fn builder_rejects_disk_reaching_patch() {
        let r = DEFAULT_PATCH_RADIUS;
        assert!(build_gap_profile(2, Sigma::Disk { r }, ProfileVariant::FlatContact, default_kappa(2)).is_err());
    }

    #[test]
    fn sigma_measures() {
        assert_eq!(Sigma::Point.area(2), 0.0);
        assert_relative_eq!(Sigma::Disk { r: 0.1 }.area(2), 0.2);
        assert_relative_eq!(Sigma::Disk { r: 0.1 }.area(3), std::f64::consts::PI * 0.01);
        assert_relative_eq!(
            Sigma::Disk { r: 0.1 }.area(4),
            4.0 / 3.0 * std::f64::consts::PI * 1e-3
        );
    }

    #[test]
    fn pure_power_passes_all_conditions() {
        for m in [2, 3, 4, 6] {
            let report = verify_h_conditions(&pure(m), 200).unwrap();
            assert!(report.all_passed(), "m={m}: {report}");
        }
    }

    #[test]
    fn flat_contact_passes_all_conditions() {
        let p = GapProfile::new(3, Sigma::Disk { r: 0.1 }, ProfileVariant::FlatContact).unwrap();
        let report = verify_h_conditions(&p, 200).unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn tilted_fails_only_evenness() {
        let p = GapProfile::new(4, Sigma::Point, ProfileVariant::Tilted).unwrap();
        let report = verify_h_conditions(&p, 200).unwrap();
        for entry in &report.entries {
            if entry.condition == "H5" {
                assert!(!entry.passed, "tilted profile must fail H5");
            } else {
                assert!(entry.passed, "{}: {}", entry.condition, entry.detail);
            }
        }
    }

    #[test]
    fn undersized_slope_constant_fails_h3() {
        let mut kappa = default_kappa(2);
        kappa[2] = 0.1;
        let p = build_gap_profile(2, Sigma::Point, ProfileVariant::PurePower, kappa).unwrap();
        let report = verify_h_conditions(&p, 200).unwrap();
        assert!(!report.entry("H3").unwrap().passed);
        assert!(report.entry("H2").unwrap().passed);
    }

    #[test]
    fn sample_count_floor_enforced() {
        assert!(verify_h_conditions(&pure(2), 99).is_err());
    }

    proptest! {
        #[test]
        fn thickness_bracketed_by_h2(
            m in 2u32..=6,
            x in -0.5f64..0.5,
            eps in 1e-6f64..1e-1,
            variant_ix in 0usize..3,
        ) {
            let (variant, sigma) = match variant_ix {
                0 => (ProfileVariant::PurePower, Sigma::Point),
                1 => (ProfileVariant::Tilted, Sigma::Point),
                _ => (ProfileVariant::FlatContact, Sigma::Disk { r: 0.1 }),
            };
            let p = GapProfile::new(m, sigma, variant).unwrap();
            let d = p.dist_to_sigma(x);
            let delta = p.gap_thickness(x, eps);
            let dm = d.powi(m as i32);
            prop_assert!(delta >= eps + p.kappa[0] * dm - 1e-12);
            prop_assert!(delta <= eps + p.kappa[1] * dm + 1e-12);
        }

        #[test]
        fn contact_distance_is_lipschitz(
            x in -0.5f64..0.5,
            y in -0.5f64..0.5,
            disk in proptest::bool::ANY,
        ) {
            let sigma = if disk { Sigma::Disk { r: 0.1 } } else { Sigma::Point };
            let variant = if disk { ProfileVariant::FlatContact } else { ProfileVariant::PurePower };
            let p = GapProfile::new(3, sigma, variant).unwrap();
            let diff = (p.dist_to_sigma(x) - p.dist_to_sigma(y)).abs();
            prop_assert!(diff <= (x - y).abs() + 1e-15);
        }
    }
}
