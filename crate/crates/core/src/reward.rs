//! Task success test, potential-based shaping terms and the energy penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Goal-reaching coefficient.
    pub k_g: f64,
    /// Hand-reaching coefficient.
    pub k_r: f64,
    pub k_e: f64,
    /// Distance decay inside the potential exponent.
    pub k_d: f64,
    pub gamma: f64,
    pub success_translation: f64,
    pub success_rotation: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            k_g: 0.302,
            k_r: 0.0604,
            k_e: 0.0001,
            k_d: 243.12,
            gamma: 0.99,
            success_translation: 0.05,
            success_rotation: 0.1,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter("gamma must lie in [0, 1)".into()));
        }
        if [self.k_g, self.k_r, self.k_e, self.k_d]
            .iter()
            .any(|k| !(*k >= 0.0) || !k.is_finite())
        {
            return Err(Error::InvalidParameter("reward coefficients must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub pose: Pose,
    pub goal: Pose,
    pub half_extents: Vec3,
    /// World-frame center of mass.
    pub com: Vec3,
    pub gripper_tip: Vec3,
    pub torque: [f64; 7],
    pub qdot: [f64; 7],
}

/// Mean displacement of the eight box corners between `pose` and `goal`.
pub fn bbox_distance(pose: &Pose, goal: &Pose, half_extents: &Vec3) -> f64 {
    let mut sum = 0.0;
    for i in 0..8 {
        let s = |b: usize| if i >> b & 1 == 1 { 1.0 } else { -1.0 };
        let c = Vec3::new(s(0) * half_extents.x, s(1) * half_extents.y, s(2) * half_extents.z);
        sum += (pose.transform_point(&c) - goal.transform_point(&c)).norm();
    }
    sum / 8.0
}

/// Strict thresholds on translation and geodesic rotation error.
pub fn success_from_errors(translation: f64, rotation: f64, params: &RewardParams) -> bool {
    translation < params.success_translation && rotation < params.success_rotation
}

pub fn success(state: &ObjectState, params: &RewardParams) -> bool {
    let (t, r) = state.pose.error_to(&state.goal);
    success_from_errors(t, r, params)
}

/// `k · γ^(k_d · d)`
fn potential(k: f64, d: f64, params: &RewardParams) -> f64 {
    k * params.gamma.powf(params.k_d * d)
}

pub fn potential_reach(d_og: f64, params: &RewardParams) -> f64 {
    potential(params.k_g, d_og, params)
}

pub fn potential_contact(d_ho: f64, params: &RewardParams) -> f64 {
    potential(params.k_r, d_ho, params)
}

/// `γ φ(s') − φ(s)`
pub fn shaped_reward(phi_prev: f64, phi_next: f64, params: &RewardParams) -> f64 {
    params.gamma * phi_next - phi_prev
}

/// `k_e Σ τᵢ q̇ᵢ`; may be negative.
pub fn energy_penalty(torque: &[f64], qdot: &[f64], params: &RewardParams) -> Result<f64> {
    if torque.len() != 7 || qdot.len() != 7 {
        return Err(Error::SizeMismatch {
            expected: 7,
            got: if torque.len() != 7 { torque.len() } else { qdot.len() },
        });
    }
    Ok(params.k_e * torque.iter().zip(qdot).map(|(t, v)| t * v).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub success: bool,
    pub r_success: f64,
    pub r_reach: f64,
    pub r_contact: f64,
    pub c_energy: f64,
    pub total: f64,
    pub d_og: f64,
    pub d_ho: f64,
}

fn d_og(s: &ObjectState) -> f64 {
    bbox_distance(&s.pose, &s.goal, &s.half_extents)
}

fn d_ho(s: &ObjectState) -> f64 {
    (s.com - s.gripper_tip).norm()
}

/// All terms for the transition `prev → next`; energy uses `next`.
pub fn reward_terms(
    prev: &ObjectState,
    next: &ObjectState,
    success_flag: bool,
    params: &RewardParams,
) -> RewardTerms {
    let (dp, dn) = (d_og(prev), d_og(next));
    let (hp, hn) = (d_ho(prev), d_ho(next));
    let r_success = if success_flag { 1.0 } else { 0.0 };
    let r_reach = shaped_reward(potential_reach(dp, params), potential_reach(dn, params), params);
    let r_contact =
        shaped_reward(potential_contact(hp, params), potential_contact(hn, params), params);
    let c_energy = energy_penalty(&next.torque, &next.qdot, params).expect("fixed-size arrays");
    RewardTerms {
        success: success_flag,
        r_success,
        r_reach,
        r_contact,
        c_energy,
        total: r_success + r_reach + r_contact - c_energy,
        d_og: dn,
        d_ho: hn,
    }
}

pub fn total_reward(
    prev: &ObjectState,
    next: &ObjectState,
    success_flag: bool,
    params: &RewardParams,
) -> f64 {
    reward_terms(prev, next, success_flag, params).total
}

/// One step of a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub pose: Pose,
    /// World-frame COM; the pose origin when omitted.
    #[serde(default)]
    pub com: Option<Vec3>,
    pub gripper_tip: Vec3,
    pub torque: [f64; 7],
    pub qdot: [f64; 7],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub goal: Pose,
    pub half_extents: Vec3,
    #[serde(default)]
    pub params: RewardParams,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn from_json(s: &str) -> Result<Self> {
        let t: Trajectory = serde_json::from_str(s)?;
        t.params.validate()?;
        if t.half_extents.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidParameter("half extents must be positive".into()));
        }
        Ok(t)
    }

    pub fn states(&self) -> Vec<ObjectState> {
        self.steps
            .iter()
            .map(|s| ObjectState {
                pose: s.pose,
                goal: self.goal,
                half_extents: self.half_extents,
                com: s.com.unwrap_or(s.pose.translation),
                gripper_tip: s.gripper_tip,
                torque: s.torque,
                qdot: s.qdot,
            })
            .collect()
    }

    /// Terms for each transition, success judged on the arriving state.
    pub fn reward_trace(&self) -> Vec<RewardTerms> {
        let states = self.states();
        states
            .windows(2)
            .map(|w| reward_terms(&w[0], &w[1], success(&w[1], &self.params), &self.params))
            .collect()
    }
}

pub const TRACE_CSV_HEADER: &str = "step,success,r_success,r_reach,r_contact,c_energy,total,d_og,d_ho";

pub fn trace_to_csv(terms: &[RewardTerms]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for (i, t) in terms.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            i + 1,
            t.success as u8,
            t.r_success,
            t.r_reach,
            t.r_contact,
            t.c_energy,
            t.total,
            t.d_og,
            t.d_ho
        ));
    }
    out
}
