//! Serial-chain kinematics, damped-least-squares IK and the joint
//! impedance torque law.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pose, Rotation, Vec3};

/// One revolute joint: a fixed transform from the previous link, then a
/// rotation about `axis` (expressed in the joint frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub origin: Pose,
    pub axis: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerialChain {
    pub joints: Vec<Joint>,
    pub ee_offset: Pose,
}

const AXIS_TOL: f64 = 1e-6;

impl SerialChain {
    pub fn new(joints: Vec<Joint>, ee_offset: Pose) -> Result<Self> {
        let chain = SerialChain { joints, ee_offset };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::InvalidParameter("chain has no joints".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if (j.axis.norm() - 1.0).abs() > AXIS_TOL {
                return Err(Error::InvalidParameter(format!("joint {i} axis is not unit")));
            }
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let chain: SerialChain = serde_json::from_str(s)?;
        chain.validate()?;
        Ok(chain)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// A 7-DoF arm with Franka-Panda-like proportions (modified DH), the
    /// tool point 0.21 m past the flange.
    pub fn franka_like() -> Self {
        use std::f64::consts::FRAC_PI_2;
        let a = [0.0, 0.0, 0.0, 0.0825, -0.0825, 0.0, 0.088];
        let d = [0.333, 0.0, 0.316, 0.0, 0.384, 0.0, 0.0];
        let alpha = [0.0, -FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2, FRAC_PI_2];
        let joints = (0..7)
            .map(|i| {
                let r = Rotation::from_axis_angle(&Vec3::x(), alpha[i]);
                Joint {
                    origin: Pose::new(Vec3::new(a[i], 0.0, 0.0) + r.rotate(&Vec3::new(0.0, 0.0, d[i])), r),
                    axis: Vec3::z(),
                }
            })
            .collect();
        let ee = Pose::new(
            Vec3::new(0.0, 0.0, 0.107 + 0.1034),
            Rotation::from_axis_angle(&Vec3::z(), -std::f64::consts::FRAC_PI_4),
        );
        SerialChain {
            joints,
            ee_offset: ee,
        }
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::SizeMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("joint positions"));
        }
        Ok(())
    }

    /// World frames of each joint (before its own rotation) and the EE pose.
    fn frames(&self, q: &[f64]) -> (Vec<Pose>, Pose) {
        let mut t = Pose::identity();
        let mut frames = Vec::with_capacity(self.dof());
        for (j, &qi) in self.joints.iter().zip(q) {
            t = t.compose(&j.origin);
            frames.push(t);
            t = t.compose(&Pose::from_rotation(Rotation::from_axis_angle(&j.axis, qi)));
        }
        (frames, t.compose(&self.ee_offset))
    }

    pub fn fk(&self, q: &[f64]) -> Result<Pose> {
        self.check_q(q)?;
        Ok(self.frames(q).1)
    }

    /// Geometric Jacobian (`6 × dof`): linear rows on top, angular below,
    /// both in the world frame.
    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        self.check_q(q)?;
        let (frames, ee) = self.frames(q);
        let mut jac = DMatrix::zeros(6, self.dof());
        for (i, (f, j)) in frames.iter().zip(&self.joints).enumerate() {
            let z = f.rotation.rotate(&j.axis);
            let lin = z.cross(&(ee.translation - f.translation));
            for r in 0..3 {
                jac[(r, i)] = lin[r];
                jac[(r + 3, i)] = z[r];
            }
        }
        Ok(jac)
    }
}

/// Twist error taking `current` to `target`: translation difference and the
/// axis-angle of `R_target · R_currentᵀ`.
pub fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dt = target.translation - current.translation;
    let dr = (target.rotation * current.rotation.inverse()).scaled_axis();
    Vector6::new(dt.x, dt.y, dt.z, dr.x, dr.y, dr.z)
}

/// `Δq = Jᵀ (J Jᵀ + λ² I)⁻¹ e`.
pub fn dls_step(jac: &DMatrix<f64>, err: &Vector6<f64>, lambda: f64) -> Result<DVector<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("damping must be positive".into()));
    }
    if jac.nrows() != 6 {
        return Err(Error::ShapeMismatch {
            expected: vec![6, jac.ncols()],
            got: vec![jac.nrows(), jac.ncols()],
        });
    }
    let jjt = jac * jac.transpose();
    let a: Matrix6<f64> = Matrix6::from_fn(|r, c| jjt[(r, c)]) + Matrix6::identity() * (lambda * lambda);
    let y = a.lu().solve(err).ok_or(Error::SingularSolve)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSolve);
    }
    Ok(jac.transpose() * DVector::from_column_slice(y.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub tol_translation: f64,
    pub tol_rotation: f64,
    /// Largest per-joint change per iteration, radians.
    pub step_clamp: f64,
    pub max_halvings: usize,
}

impl Default for IkConfig {
    fn default() -> Self {
        IkConfig {
            lambda: 0.05,
            max_iters: 32,
            tol_translation: 1e-4,
            tol_rotation: 1e-3,
            step_clamp: 0.2,
            max_halvings: 8,
        }
    }
}

impl IkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter("damping must be positive".into()));
        }
        if !(self.tol_translation >= 0.0 && self.tol_rotation >= 0.0 && self.step_clamp > 0.0) {
            return Err(Error::InvalidParameter("IK tolerances must be >= 0 and the clamp > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IkStatus {
    Converged,
    /// Tolerance not reached; the returned configuration is the best found.
    NoProgress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: Vec<f64>,
    pub status: IkStatus,
    pub iterations: usize,
    pub translation_error: f64,
    pub rotation_error: f64,
}

fn err_norm(e: &Vector6<f64>) -> f64 {
    e.norm()
}

/// Solves for joints that move the end effector by `residual`: the target
/// is `p + Δt` with orientation `ΔR · R` (world-frame residual). The error
/// never increases across accepted steps.
pub fn ik(chain: &SerialChain, q: &[f64], residual: &Pose, cfg: &IkConfig) -> Result<IkSolution> {
    cfg.validate()?;
    let start = chain.fk(q)?;
    let target = Pose::new(
        start.translation + residual.translation,
        residual.rotation * start.rotation,
    );
    let mut q = q.to_vec();
    let mut e = pose_error(&start, &target);
    let done = |e: &Vector6<f64>| {
        e.fixed_rows::<3>(0).norm() <= cfg.tol_translation
            && e.fixed_rows::<3>(3).norm() <= cfg.tol_rotation
    };
    let mut status = IkStatus::NoProgress;
    let mut iterations = 0;
    while !done(&e) {
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;
        let mut dq = dls_step(&chain.jacobian(&q)?, &e, cfg.lambda)?;
        let biggest = dq.amax();
        if biggest > cfg.step_clamp {
            dq *= cfg.step_clamp / biggest;
        }
        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..=cfg.max_halvings {
            let cand: Vec<f64> = q.iter().zip(dq.iter()).map(|(a, d)| a + alpha * d).collect();
            let ce = pose_error(&chain.fk(&cand)?, &target);
            if err_norm(&ce) < err_norm(&e) {
                accepted = Some((cand, ce));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((nq, ne)) => {
                q = nq;
                e = ne;
            }
            None => break,
        }
    }
    if done(&e) {
        status = IkStatus::Converged;
    }
    Ok(IkSolution {
        q,
        status,
        iterations,
        translation_error: e.fixed_rows::<3>(0).norm(),
        rotation_error: e.fixed_rows::<3>(3).norm(),
    })
}

/// `τ = k_p (q_target − q) − k_d q̇` with `k_d = ρ √k_p`.
pub fn torque(kp: &[f64], rho: &[f64], q_target: &[f64], q: &[f64], qdot: &[f64]) -> Result<Vec<f64>> {
    let n = kp.len();
    for len in [rho.len(), q_target.len(), q.len(), qdot.len()] {
        if len != n {
            return Err(Error::SizeMismatch { expected: n, got: len });
        }
    }
    if kp.iter().chain(rho).any(|&g| !(g > 0.0)) {
        return Err(Error::NonPositiveGains);
    }
    Ok((0..n)
        .map(|i| {
            let kd = rho[i] * kp[i].sqrt();
            kp[i] * (q_target[i] - q[i]) - kd * qdot[i]
        })
        .collect())
}
