//! System geometry and geometric channel construction.
//!
//! Builds element positions for the BS uniform linear array and the RIS
//! uniform square planar array, evaluates large-scale path loss, and
//! assembles the LoS channel matrices/vectors from exact per-element
//! distances. Also samples Rician composites with fixed-norm NLoS parts
//! and reconstructs the RIS-UE LoS channel from an estimated UE position.
//!
//! All distances are in meters and all powers are linear ratios; dB/dBm
//! conversions happen only at the configuration boundary.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// 3D position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn sub(&self, other: &Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn add(&self, other: &Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Distance to another point.
    pub fn distance(&self, other: &Vec3) -> f64 {
        self.sub(other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// BS/RIS array geometry: anchors, spacings and element counts.
///
/// The BS is an `M`-antenna uniform linear array along the x-axis anchored
/// at `bs_anchor`; the RIS is an `L x L` uniform square planar array in the
/// x-o-z plane anchored at `ris_anchor` (bottom-left element).
#[derive(Debug, Clone, Copy)]
pub struct ArrayGeometry {
    pub bs_anchor: Vec3,
    pub ris_anchor: Vec3,
    /// BS antenna spacing in meters.
    pub d_bs: f64,
    /// RIS element spacing in meters.
    pub d_ris: f64,
    /// Number of BS antennas.
    pub m: usize,
    /// RIS rows (= columns); the element count is `N = L * L`.
    pub l: usize,
}

impl ArrayGeometry {
    pub fn new(
        bs_anchor: Vec3,
        ris_anchor: Vec3,
        d_bs: f64,
        d_ris: f64,
        m: usize,
        l: usize,
    ) -> Result<Self> {
        if !(d_bs > 0.0) {
            return Err(Error::InvalidParameter {
                name: "d_bs",
                reason: format!("must be positive, got {d_bs}"),
            });
        }
        if !(d_ris > 0.0) {
            return Err(Error::InvalidParameter {
                name: "d_ris",
                reason: format!("must be positive, got {d_ris}"),
            });
        }
        if m < 1 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "need at least one BS antenna".into(),
            });
        }
        if l < 1 {
            return Err(Error::InvalidParameter {
                name: "l",
                reason: "need at least one RIS row".into(),
            });
        }
        if !bs_anchor.is_finite() || !ris_anchor.is_finite() {
            return Err(Error::InvalidParameter {
                name: "anchor",
                reason: "anchor coordinates must be finite".into(),
            });
        }
        Ok(Self {
            bs_anchor,
            ris_anchor,
            d_bs,
            d_ris,
            m,
            l,
        })
    }

    /// Total number of RIS elements.
    pub fn n(&self) -> usize {
        self.l * self.l
    }
}

/// Large-scale path loss parameters: `rho(d) = zeta0 * (d/d0)^(-alpha)`.
#[derive(Debug, Clone, Copy)]
pub struct PathLossParams {
    /// Linear path loss at the reference distance.
    pub zeta0: f64,
    /// Reference distance in meters.
    pub d0: f64,
    /// Path loss exponent.
    pub alpha: f64,
}

impl PathLossParams {
    pub fn new(zeta0: f64, d0: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("zeta0", zeta0), ("d0", d0), ("alpha", alpha)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(Self { zeta0, d0, alpha })
    }
}

/// Small-scale channel parameters.
#[derive(Debug, Clone, Copy)]
pub struct ChannelParams {
    /// Signal wavelength in meters.
    pub wavelength: f64,
    /// Rician factor (power ratio of LoS to scattered parts).
    pub kappa_r: f64,
    /// Fixed l2-norm of the NLoS RIS-UE component.
    pub delta_ru_nlos: f64,
    /// Fixed l2-norm of the BS-UE channel.
    pub delta_bu: f64,
    /// Whether the direct BS-UE channel participates at all.
    pub e_bu: bool,
    /// Common RIS reflection amplitude, `0 < beta <= 1`.
    pub beta: f64,
}

impl ChannelParams {
    pub fn new(
        wavelength: f64,
        kappa_r: f64,
        delta_ru_nlos: f64,
        delta_bu: f64,
        e_bu: bool,
        beta: f64,
    ) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(Error::InvalidParameter {
                name: "wavelength",
                reason: format!("must be positive, got {wavelength}"),
            });
        }
        if !(kappa_r >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa_r",
                reason: format!("must be nonnegative, got {kappa_r}"),
            });
        }
        if !(delta_ru_nlos >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta_ru_nlos",
                reason: format!("must be nonnegative, got {delta_ru_nlos}"),
            });
        }
        if !(delta_bu >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta_bu",
                reason: format!("must be nonnegative, got {delta_bu}"),
            });
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be in (0, 1], got {beta}"),
            });
        }
        Ok(Self {
            wavelength,
            kappa_r,
            delta_ru_nlos,
            delta_bu,
            e_bu,
            beta,
        })
    }

    /// LoS mixing weight `sqrt(kappa / (1 + kappa))`.
    pub fn los_weight(&self) -> f64 {
        (self.kappa_r / (1.0 + self.kappa_r)).sqrt()
    }

    /// NLoS mixing weight `sqrt(1 / (1 + kappa))`.
    pub fn nlos_weight(&self) -> f64 {
        (1.0 / (1.0 + self.kappa_r)).sqrt()
    }
}

/// One full set of channel realizations for a sampled true UE position.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// BS-RIS channel, `N x M` (LoS of the deployed geometry).
    pub h_br: DMatrix<Complex64>,
    /// LoS RIS-UE channel at the true UE position.
    pub h_ru_los: DVector<Complex64>,
    /// RIS-UE LoS channel reconstructed from the estimated position.
    pub h_ru_hat: DVector<Complex64>,
    /// Rician composite RIS-UE channel at the true position.
    pub h_ru_true: DVector<Complex64>,
    /// BS-UE channel draw with `||h_bu|| = delta_bu`.
    pub h_bu: DVector<Complex64>,
}

/// Positions of every BS antenna and every RIS element.
///
/// RIS ordering is fixed to `j = l + (k-1)L` (row within column block), so
/// the 0-based element `j-1` carries offset `((l-1) d_ris, 0, (k-1) d_ris)`.
pub fn element_positions(geometry: &ArrayGeometry) -> (Vec<Vec3>, Vec<Vec3>) {
    let bs = (0..geometry.m)
        .map(|i| {
            geometry
                .bs_anchor
                .add(&Vec3::new(i as f64 * geometry.d_bs, 0.0, 0.0))
        })
        .collect();
    let mut ris = Vec::with_capacity(geometry.n());
    for k in 0..geometry.l {
        for l in 0..geometry.l {
            ris.push(geometry.ris_anchor.add(&Vec3::new(
                l as f64 * geometry.d_ris,
                0.0,
                k as f64 * geometry.d_ris,
            )));
        }
    }
    (bs, ris)
}

/// Linear path loss `zeta0 * (d/d0)^(-alpha)` at distance `d`.
pub fn path_loss(distance: f64, params: &PathLossParams) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(params.zeta0 * (distance / params.d0).powf(-params.alpha))
}

/// BS-RIS LoS channel matrix.
///
/// Entry `(j, i)` has modulus `sqrt(rho(||v_j - q_i||))` and phase
/// `(2 pi / lambda) * (||v_1 - q_1|| - ||v_j - q_i||)`, referenced to the
/// anchor pair so entry `(1, 1)` has zero phase.
pub fn build_bs_ris_channel(
    geometry: &ArrayGeometry,
    path: &PathLossParams,
    wavelength: f64,
) -> DMatrix<Complex64> {
    let (bs, ris) = element_positions(geometry);
    let ref_dist = ris[0].distance(&bs[0]);
    let wave_number = 2.0 * std::f64::consts::PI / wavelength;
    DMatrix::from_fn(geometry.n(), geometry.m, |j, i| {
        let d = ris[j].distance(&bs[i]);
        // distances are bounded away from zero by the deployment geometry
        let rho = path.zeta0 * (d / path.d0).powf(-path.alpha);
        Complex64::from_polar(rho.sqrt(), wave_number * (ref_dist - d))
    })
}

/// RIS-UE LoS channel at UE position `p`.
///
/// Element `j` has modulus `sqrt(rho(||v_j - p||))` and phase
/// `(2 pi / lambda) * (||v_j - p|| - ||v_1 - p||)`.
pub fn build_ris_ue_los(
    geometry: &ArrayGeometry,
    path: &PathLossParams,
    wavelength: f64,
    p: &Vec3,
) -> Result<DVector<Complex64>> {
    let (_, ris) = element_positions(geometry);
    let ref_dist = ris[0].distance(p);
    let wave_number = 2.0 * std::f64::consts::PI / wavelength;
    let mut h = DVector::zeros(geometry.n());
    for (j, v) in ris.iter().enumerate() {
        let d = v.distance(p);
        if d <= 0.0 {
            return Err(Error::UeOnRisElement { index: j + 1 });
        }
        let rho = path.zeta0 * (d / path.d0).powf(-path.alpha);
        h[j] = Complex64::from_polar(rho.sqrt(), wave_number * (d - ref_dist));
    }
    Ok(h)
}

/// RIS-UE LoS channel reconstructed from the estimated UE position.
///
/// Same map as [`build_ris_ue_los`]; this entry point exists because the
/// reconstruction is a distinct step of the pipeline and callers pass the
/// estimate rather than a true position.
pub fn reconstruct_ris_ue_los(
    geometry: &ArrayGeometry,
    path: &PathLossParams,
    wavelength: f64,
    p_hat: &Vec3,
) -> Result<DVector<Complex64>> {
    build_ris_ue_los(geometry, path, wavelength, p_hat)
}

/// Draw a complex vector with independent standard-normal parts, rescaled
/// so its l2-norm equals `target_norm` exactly (zero vector when the target
/// is zero).
fn fixed_norm_gaussian(rng: &mut ChaCha8Rng, len: usize, target_norm: f64) -> DVector<Complex64> {
    if target_norm == 0.0 {
        return DVector::zeros(len);
    }
    let mut v = DVector::from_fn(len, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = v.norm();
    if norm == 0.0 {
        // astronomically unlikely; fall back to a deterministic direction
        v[0] = Complex64::new(1.0, 0.0);
        return v * Complex64::from(target_norm);
    }
    v * Complex64::from(target_norm / norm)
}

/// Sample one channel realization for true position `p` and estimate `p_hat`.
///
/// The Rician composite is `los_weight * h_los(p) + nlos_weight * h_nlos`
/// with the NLoS draw rescaled to norm `delta_ru_nlos`; `h_bu` is rescaled
/// to norm `delta_bu`. All randomness derives from `seed`.
pub fn sample_rician(
    geometry: &ArrayGeometry,
    path: &PathLossParams,
    channel: &ChannelParams,
    p_hat: &Vec3,
    p: &Vec3,
    seed: u64,
) -> Result<ChannelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_br = build_bs_ris_channel(geometry, path, channel.wavelength);
    let h_ru_los = build_ris_ue_los(geometry, path, channel.wavelength, p)?;
    let h_ru_hat = reconstruct_ris_ue_los(geometry, path, channel.wavelength, p_hat)?;
    let h_nlos = fixed_norm_gaussian(&mut rng, geometry.n(), channel.delta_ru_nlos);
    let h_ru_true = &h_ru_los * Complex64::from(channel.los_weight())
        + &h_nlos * Complex64::from(channel.nlos_weight());
    let h_bu = fixed_norm_gaussian(&mut rng, geometry.m, channel.delta_bu);
    Ok(ChannelSet {
        h_br,
        h_ru_los,
        h_ru_hat,
        h_ru_true,
        h_bu,
    })
}

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Convert a dB power ratio to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
