//! Longitudinal car-following laws.
//!
//! Human-driven vehicles follow the Krauss safe-velocity model with driver
//! imperfection; connected autonomous vehicles follow the Intelligent Driver
//! Model. Both are integrated with explicit Euler steps of length `dt`.

use thiserror::Error;

/// Gap (m) under which IDM stops trusting `(s*/s)²` and brakes hard instead.
pub const IDM_MIN_GAP_GUARD: f64 = 0.01;
/// Emergency deceleration multiplier applied to `decel` below the guard gap.
pub const IDM_EMERGENCY_FACTOR: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Krauss parameters for human drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KraussParams {
    pub accel: f64,
    pub decel: f64,
    /// Reaction time (s).
    pub tau: f64,
    /// Driver imperfection in `[0, 1]`.
    pub sigma: f64,
    pub v_max: f64,
    /// Standstill gap kept to the leader (m).
    pub min_gap: f64,
    pub length: f64,
}

impl Default for KraussParams {
    fn default() -> Self {
        KraussParams { accel: 2.6, decel: 4.5, tau: 1.0, sigma: 0.5, v_max: 50.0, min_gap: 2.5, length: 5.0 }
    }
}

impl KraussParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok = self.accel > 0.0
            && self.decel > 0.0
            && self.tau > 0.0
            && (0.0..=1.0).contains(&self.sigma)
            && self.v_max > 0.0
            && self.min_gap >= 0.0
            && self.length > 0.0;
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::InvalidArgument(format!("invalid Krauss parameters {self:?}")))
        }
    }
}

/// Intelligent Driver Model parameters for automated vehicles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    pub accel: f64,
    /// Comfortable deceleration (m/s²).
    pub decel: f64,
    /// Desired time headway (s).
    pub time_headway: f64,
    /// Jam gap (m).
    pub s0: f64,
    pub delta: f64,
    pub v_max: f64,
    pub length: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams { accel: 2.6, decel: 4.5, time_headway: 0.5, s0: 1.0, delta: 4.0, v_max: 50.0, length: 5.0 }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok = self.accel > 0.0
            && self.decel > 0.0
            && self.time_headway > 0.0
            && self.s0 > 0.0
            && self.delta >= 1.0
            && self.v_max > 0.0
            && self.length > 0.0;
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::InvalidArgument(format!("invalid IDM parameters {self:?}")))
        }
    }
}

/// What a follower perceives of the vehicle (or obstacle) ahead.
///
/// `gap` runs from the follower's front bumper to the leader's rear bumper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderView {
    pub leader_speed: f64,
    pub gap: f64,
}

impl LeaderView {
    pub fn new(leader_speed: f64, gap: f64) -> Self {
        LeaderView { leader_speed, gap }
    }
}

/// Classic Krauss safe velocity. May be negative; callers clamp.
pub fn krauss_safe_speed(v: f64, leader: LeaderView, p: &KraussParams) -> f64 {
    let vl = leader.leader_speed;
    vl + (leader.gap - vl * p.tau) / ((v + vl) / (2.0 * p.decel) + p.tau)
}

/// One Krauss update. `noise_u` is a uniform sample in `[0, 1]`.
pub fn krauss_step(
    v: f64,
    leader: Option<LeaderView>,
    v_limit: f64,
    dt: f64,
    noise_u: f64,
    p: &KraussParams,
) -> f64 {
    let cap = v_limit.min(p.v_max);
    let mut desired = (v + p.accel * dt).min(cap);
    if let Some(leader) = leader {
        desired = desired.min(krauss_safe_speed(v, leader, p));
    }
    (desired - p.sigma * p.accel * dt * noise_u).clamp(0.0, cap)
}

/// IDM acceleration with desired speed `p.v_max`. Pass `gap = f64::INFINITY`
/// and `delta_v = 0` for free flow. `delta_v` is the closing speed `v - v_leader`.
pub fn idm_acceleration(v: f64, delta_v: f64, gap: f64, p: &IdmParams) -> Result<f64, DynamicsError> {
    if gap.is_nan() || gap <= 0.0 {
        return Err(DynamicsError::InvalidArgument(format!("IDM gap must be positive, got {gap}")));
    }
    if gap < IDM_MIN_GAP_GUARD {
        return Ok(-IDM_EMERGENCY_FACTOR * p.decel);
    }
    let free = (v / p.v_max).powf(p.delta);
    let interaction = if gap.is_infinite() {
        0.0
    } else {
        let s_star = p.s0 + (v * p.time_headway + v * delta_v / (2.0 * (p.accel * p.decel).sqrt())).max(0.0);
        (s_star / gap).powi(2)
    };
    Ok(p.accel * (1.0 - free - interaction))
}

/// One Euler IDM update; the desired speed is `min(v_limit, p.v_max)`.
pub fn idm_step(
    v: f64,
    leader: Option<LeaderView>,
    v_limit: f64,
    dt: f64,
    p: &IdmParams,
) -> Result<f64, DynamicsError> {
    let v0 = v_limit.min(p.v_max);
    let local = IdmParams { v_max: v0, ..*p };
    let a = match leader {
        Some(l) => idm_acceleration(v, v - l.leader_speed, l.gap, &local)?,
        None => idm_acceleration(v, 0.0, f64::INFINITY, &local)?,
    };
    Ok((v + a * dt).clamp(0.0, v0))
}

/// Steady-state IDM gap at speed `v` for desired speed `v0`.
pub fn equilibrium_gap(v: f64, p: &IdmParams, v0: f64) -> Result<f64, DynamicsError> {
    if !(0.0..v0).contains(&v) {
        return Err(DynamicsError::InvalidArgument(format!("equilibrium needs 0 <= v < v0, got v={v}, v0={v0}")));
    }
    Ok((p.s0 + v * p.time_headway) / (1.0 - (v / v0).powf(p.delta)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn krauss_safe_speed_examples() {
        let p = KraussParams::default();
        assert!(krauss_safe_speed(10.0, LeaderView::new(0.0, 0.0), &p).abs() < EPS);
        assert!((krauss_safe_speed(10.0, LeaderView::new(10.0, 10.0 * p.tau), &p) - 10.0).abs() < EPS);
        // 10 + 20 / (25/9 + 1), evaluated by hand: 15.294117...
        let expected = 10.0 + 20.0 / (25.0 / 9.0 + 1.0);
        let got = krauss_safe_speed(15.0, LeaderView::new(10.0, 30.0), &p);
        assert!((got - expected).abs() < EPS);
        assert!((got - 15.2941).abs() < 1e-4);
    }

    #[test]
    fn krauss_step_examples() {
        let p = KraussParams { sigma: 0.0, ..Default::default() };
        assert!((krauss_step(0.0, None, 13.89, 1.0, 0.7, &p) - 2.6).abs() < EPS);
        assert!((krauss_step(13.89, None, 13.89, 1.0, 0.0, &p) - 13.89).abs() < EPS);
        let noisy = KraussParams::default();
        assert!((krauss_step(0.0, None, 13.89, 1.0, 1.0, &noisy) - 1.3).abs() < EPS);
        // Never negative.
        assert_eq!(krauss_step(0.0, Some(LeaderView::new(0.0, 0.0)), 13.89, 1.0, 1.0, &noisy), 0.0);
    }

    #[test]
    fn idm_acceleration_examples() {
        let p = IdmParams { v_max: 13.89, ..Default::default() };
        assert!((idm_acceleration(0.0, 0.0, f64::INFINITY, &p).unwrap() - 2.6).abs() < EPS);
        assert!(idm_acceleration(13.89, 0.0, f64::INFINITY, &p).unwrap().abs() < EPS);
        let s = equilibrium_gap(10.0, &p, 13.89).unwrap();
        assert!(idm_acceleration(10.0, 0.0, s, &p).unwrap().abs() < 1e-9);
    }

    #[test]
    fn idm_rejects_non_positive_gap_and_guards_tiny_gaps() {
        let p = IdmParams::default();
        assert!(idm_acceleration(5.0, 0.0, 0.0, &p).is_err());
        assert!(idm_acceleration(5.0, 0.0, -1.0, &p).is_err());
        assert_eq!(idm_acceleration(5.0, 0.0, 0.005, &p).unwrap(), -45.0);
    }

    #[test]
    fn idm_step_examples() {
        let p = IdmParams::default();
        assert!((idm_step(0.0, None, 13.89, 1.0, &p).unwrap() - 2.6).abs() < EPS);
        // Limit dropped below the current speed: decelerate toward it.
        let v = 12.0;
        let next = idm_step(v, None, 8.0, 0.1, &p).unwrap();
        assert!(next < v);
    }

    #[test]
    fn equilibrium_gap_examples() {
        let p = IdmParams::default();
        assert!((equilibrium_gap(0.0, &p, 13.89).unwrap() - 1.0).abs() < EPS);
        // (1 + 5) / sqrt(1 - (10/13.89)^4) = 6 / sqrt(0.731350) = 7.01600
        let g = equilibrium_gap(10.0, &p, 13.89).unwrap();
        assert!((g - 6.0 / (1.0f64 - (10.0f64 / 13.89).powi(4)).sqrt()).abs() < EPS);
        assert!((g - 7.016).abs() < 1e-3, "{g}");
        let mut prev = 0.0;
        for i in 0..1000 {
            let v = 13.89 * i as f64 / 1000.0;
            let gap = equilibrium_gap(v, &p, 13.89).unwrap();
            assert!(gap > prev);
            prev = gap;
        }
        assert!(equilibrium_gap(13.8899999, &p, 13.89).unwrap() > 1e3);
        assert!(equilibrium_gap(13.89, &p, 13.89).is_err());
        assert!(equilibrium_gap(-1.0, &p, 13.89).is_err());
    }

    #[test]
    fn idm_headway_beats_krauss_headway() {
        // Per-vehicle spacing at equal speed: IDM s_eq vs Krauss reaction distance.
        let idm = IdmParams::default();
        let kr = KraussParams::default();
        for v in [2.0, 5.0, 8.0, 10.0, 12.0] {
            let idm_space = equilibrium_gap(v, &idm, 13.89).unwrap() + idm.length;
            let krauss_space = v * kr.tau + kr.min_gap + kr.length;
            assert!(idm_space < krauss_space, "v={v}: {idm_space} vs {krauss_space}");
            assert!(v / idm_space > v / krauss_space);
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(KraussParams::default().validate().is_ok());
        assert!(IdmParams::default().validate().is_ok());
        assert!(KraussParams { sigma: 1.5, ..Default::default() }.validate().is_err());
        assert!(IdmParams { delta: 0.5, ..Default::default() }.validate().is_err());
    }
}
