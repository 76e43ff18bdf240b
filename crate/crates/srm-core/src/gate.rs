//! Stateless per-action reference gate.
//!
//! Four layer scores are computed for every (action vector, role profile)
//! pair and the verdict is a veto: the action is blocked when any score
//! falls below its configured threshold. The layer formulas here are a
//! reference implementation kept behind the [`GateProvider`] trait so the
//! gate can be swapped for an alternative evaluator without touching the
//! session layer.
//!
//! Layer semantics, with `m` the total vector mass, `u` the mass on
//! dimensions the role has no authority over, and hazard excess the mass
//! on hazard dimensions beyond the role's allowance:
//!
//! - `svrf` = 1 - u/m: reachability within the authorized space.
//! - `idc`  = cos(v, authority): deviation from the role identity profile.
//! - `irs`  = overlap(v, authority)/m: shared-mass coherence.
//! - `cvl`  = 1 - excess/m: hazard mass beyond the role allowance vetoes.
//!
//! A zero vector carries no semantic mass and scores 1.0 on every layer.

use crate::semantics::{ActionVector, DIM};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Gate decision for a single action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "ALLOW")]
    Allow,
    #[serde(rename = "BLOCK")]
    Block,
}

/// Per-layer veto thresholds, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerThresholds {
    pub cvl: f64,
    pub idc: f64,
    pub irs: f64,
    pub svrf: f64,
}

impl Default for LayerThresholds {
    fn default() -> Self {
        Self {
            cvl: 0.30,
            idc: 0.30,
            irs: 0.30,
            svrf: 0.30,
        }
    }
}

/// A role's authorized semantic profile.
///
/// `authority` is the nonnegative per-dimension mass the role may carry;
/// `hazard_dims` are dimensions whose excess over the allowance triggers
/// the consensus veto. A hazard dimension may also carry authority (a
/// security analyst legitimately touches audit and credential mass).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoleProfile {
    pub role: String,
    #[serde(with = "authority_serde")]
    pub authority: [f64; DIM],
    pub hazard_dims: BTreeSet<usize>,
    #[serde(default)]
    pub thresholds: LayerThresholds,
}

mod authority_serde {
    use super::DIM;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; DIM], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; DIM], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        let len = v.len();
        v.try_into()
            .map_err(|_| D::Error::custom(format!("expected {DIM} authority weights, got {len}")))
    }
}

impl RoleProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.role.is_empty() {
            return Err(ProfileError::EmptyRole);
        }
        if !self.authority.iter().any(|&a| a > 0.0) {
            return Err(ProfileError::NoAuthority(self.role.clone()));
        }
        if self.authority.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(ProfileError::NegativeAuthority(self.role.clone()));
        }
        if let Some(&dim) = self.hazard_dims.iter().find(|&&d| d >= DIM) {
            return Err(ProfileError::InvalidHazardDim {
                role: self.role.clone(),
                dim,
            });
        }
        for t in [
            self.thresholds.cvl,
            self.thresholds.idc,
            self.thresholds.irs,
            self.thresholds.svrf,
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(ProfileError::InvalidThreshold {
                    role: self.role.clone(),
                    value: t,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("profile has empty role name")]
    EmptyRole,
    #[error("role {0:?} has no positive authority component")]
    NoAuthority(String),
    #[error("role {0:?} has a negative or non-finite authority component")]
    NegativeAuthority(String),
    #[error("role {role:?} hazard dimension {dim} out of range")]
    InvalidHazardDim { role: String, dim: usize },
    #[error("role {role:?} threshold {value} outside [0, 1]")]
    InvalidThreshold { role: String, value: f64 },
    #[error("duplicate role {0:?}")]
    DuplicateRole(String),
}

/// A loaded set of role profiles with a content-derived version tag used
/// for calibration checks against generated benchmarks.
#[derive(Debug, Clone)]
pub struct RoleProfileSet {
    version: String,
    profiles: Vec<RoleProfile>,
}

impl RoleProfileSet {
    /// Parse the on-disk format: a JSON array of profiles.
    pub fn from_json_str(json: &str) -> Result<Self, ProfileError> {
        let profiles: Vec<RoleProfile> = serde_json::from_str(json)?;
        let mut seen = BTreeSet::new();
        for p in &profiles {
            p.validate()?;
            if !seen.insert(p.role.clone()) {
                return Err(ProfileError::DuplicateRole(p.role.clone()));
            }
        }
        Ok(Self {
            version: content_version(json),
            profiles,
        })
    }

    /// The profile set co-calibrated with the bundled lexicon and
    /// benchmark generator.
    pub fn bundled() -> &'static RoleProfileSet {
        static BUNDLED: std::sync::OnceLock<RoleProfileSet> = std::sync::OnceLock::new();
        BUNDLED.get_or_init(|| {
            RoleProfileSet::from_json_str(include_str!("../data/role_profiles.json"))
                .expect("bundled role profiles are valid")
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, role: &str) -> Option<&RoleProfile> {
        self.profiles.iter().find(|p| p.role == role)
    }

    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.profiles.iter().map(|p| p.role.as_str())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.profiles).expect("profiles serialize")
    }
}

/// Content-addressed version tag (FNV-1a over the canonical JSON).
fn content_version(json: &str) -> String {
    let canonical: serde_json::Value = match serde_json::from_str(json) {
        Ok(v) => v,
        Err(_) => serde_json::Value::Null,
    };
    let bytes = serde_json::to_string(&canonical).unwrap_or_default();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes.bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("profiles-{hash:016x}")
}

/// The four layer scores plus the veto verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateScores {
    pub cvl: f64,
    pub idc: f64,
    pub irs: f64,
    pub svrf: f64,
    pub verdict: Verdict,
}

/// A stateless, deterministic gate evaluator. Implementations must return
/// identical scores for identical inputs and retain no state.
pub trait GateProvider {
    fn evaluate(&self, v: &ActionVector, profile: &RoleProfile) -> GateScores;
}

/// The built-in reference gate (see module docs for the layer formulas).
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceGate;

impl GateProvider for ReferenceGate {
    fn evaluate(&self, v: &ActionVector, profile: &RoleProfile) -> GateScores {
        evaluate_action(v, profile)
    }
}

/// Evaluate an action vector against a role profile with the reference
/// layer formulas.
pub fn evaluate_action(v: &ActionVector, profile: &RoleProfile) -> GateScores {
    let mass = v.l1_mass();
    let (cvl, idc, irs, svrf) = if mass == 0.0 {
        (1.0, 1.0, 1.0, 1.0)
    } else {
        let mut unauthorized = 0.0;
        let mut overlap = 0.0;
        let mut hazard_excess = 0.0;
        for dim in 0..DIM {
            let value = v.get(dim);
            let allowance = profile.authority[dim];
            if allowance == 0.0 {
                unauthorized += value;
            }
            overlap += value.min(allowance);
            if profile.hazard_dims.contains(&dim) {
                hazard_excess += (value - allowance).max(0.0);
            }
        }
        let svrf = 1.0 - unauthorized / mass;
        let irs = overlap / mass;
        let cvl = (1.0 - hazard_excess / mass).clamp(0.0, 1.0);
        let idc = cosine_nonneg(v, &profile.authority);
        (cvl, idc, irs, svrf)
    };

    let t = &profile.thresholds;
    let verdict = if cvl < t.cvl || idc < t.idc || irs < t.irs || svrf < t.svrf {
        Verdict::Block
    } else {
        Verdict::Allow
    };

    GateScores {
        cvl,
        idc,
        irs,
        svrf,
        verdict,
    }
}

/// Cosine between two nonnegative vectors, defined as 1.0 when either is
/// zero (no mass, no deviation evidence).
fn cosine_nonneg(v: &ActionVector, reference: &[f64; DIM]) -> f64 {
    let dot = v.dot(reference);
    let norm_v = v.norm();
    let norm_r = reference.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_v == 0.0 || norm_r == 0.0 {
        return 1.0;
    }
    (dot / (norm_v * norm_r)).clamp(0.0, 1.0)
}

/// Composite raw gate risk: the largest layer complement.
pub fn raw_gate_risk(scores: &GateScores) -> f64 {
    (1.0 - scores.cvl)
        .max(1.0 - scores.idc)
        .max(1.0 - scores.irs)
        .max(1.0 - scores.svrf)
}
