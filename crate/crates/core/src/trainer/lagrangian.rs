//! Augmented-Lagrangian bookkeeping for the PAPR (equality) and ACLR (inequality)
//! constraints, with the slack variable eliminated in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::signal::{db_to_lin, lin_to_db};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianState {
    pub mu_p: f64,
    pub mu_a: f64,
    pub lambda: f64,
    pub tau: f64,
    /// PAPR target, linear power ratio.
    pub eps_p: f64,
    /// ACLR target, linear.
    pub eps_a: f64,
    /// Excess bandwidth defining the ACLR in-band.
    pub beta: f64,
}

impl LagrangianState {
    /// Zero multipliers, `lambda = lambda0`; targets given in dB.
    pub fn new(papr_target_db: f64, aclr_target_db: f64, beta: f64, lambda0: f64, tau: f64) -> Result<Self> {
        let st = Self {
            mu_p: 0.0,
            mu_a: 0.0,
            lambda: lambda0,
            tau,
            eps_p: db_to_lin(papr_target_db),
            eps_a: db_to_lin(aclr_target_db),
            beta,
        };
        st.validate()?;
        Ok(st)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return invalid(format!("penalty weight must be positive, got {}", self.lambda));
        }
        if !(self.tau > 1.0) {
            return invalid(format!("penalty growth must exceed 1, got {}", self.tau));
        }
        if !(self.eps_p > 0.0 && self.eps_a > 0.0) {
            return invalid("constraint targets must be positive in linear units");
        }
        Ok(())
    }

    pub fn aclr_target_db(&self) -> f64 {
        lin_to_db(self.eps_a)
    }
}

/// ACLR constraint value in the dB domain: positive when the target is violated.
pub fn aclr_violation(aclr_db: f64, st: &LagrangianState) -> f64 {
    aclr_db - st.aclr_target_db()
}

/// `bce + mu_P phi_P + lambda/2 phi_P^2 + (max(0, mu_A + lambda phi_A)^2 - mu_A^2) / (2 lambda)`.
pub fn augmented_loss(bce: f64, phi_p: f64, phi_a: f64, st: &LagrangianState) -> Result<f64> {
    if !(st.lambda > 0.0) {
        return invalid(format!("penalty weight must be positive, got {}", st.lambda));
    }
    let l = st.lambda;
    let hinge = (st.mu_a + l * phi_a).max(0.0);
    Ok(bce + st.mu_p * phi_p + 0.5 * l * phi_p * phi_p + (hinge * hinge - st.mu_a * st.mu_a) / (2.0 * l))
}

/// One outer-iteration multiplier update.
pub fn update_multipliers(st: &LagrangianState, phi_p: f64, phi_a: f64) -> Result<LagrangianState> {
    st.validate()?;
    Ok(LagrangianState {
        mu_p: st.mu_p + st.lambda * phi_p,
        mu_a: (st.mu_a + st.lambda * phi_a).max(0.0),
        lambda: st.tau * st.lambda,
        ..st.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(mu_p: f64, mu_a: f64, lambda: f64) -> LagrangianState {
        LagrangianState {
            mu_p,
            mu_a,
            lambda,
            tau: 2.0,
            eps_p: 4.0,
            eps_a: 1e-4,
            beta: 0.3,
        }
    }

    #[test]
    fn loss_examples() {
        let st = state(0.0, 3.0, 2.0);
        // inactive hinge
        let l = augmented_loss(1.5, 0.0, -2.0, &st).unwrap();
        assert_eq!(l, 1.5 - 9.0 / 4.0);
        let l = augmented_loss(1.5, 0.0, 0.0, &state(0.0, 0.0, 1e-9)).unwrap();
        assert_eq!(l, 1.5);
        let pen = augmented_loss(0.0, 0.1, -1e9, &state(2.0, 0.0, 10.0)).unwrap();
        assert!((pen - 0.25).abs() < 1e-15);
        assert!(augmented_loss(0.0, 0.0, 0.0, &state(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn multiplier_examples() {
        let s = update_multipliers(&state(1.0, 1.0, 2.0), 0.5, -3.0).unwrap();
        assert_eq!(s.mu_p, 2.0);
        assert_eq!(s.mu_a, 0.0);
        assert_eq!(s.lambda, 4.0);
        let bad = LagrangianState { tau: 1.0, ..state(0.0, 0.0, 1.0) };
        assert!(update_multipliers(&bad, 0.0, 0.0).is_err());
    }

    #[test]
    fn scripted_sequence_matches_closed_form() {
        let phis = [(0.25, 0.5), (0.125, -2.0), (0.0, 0.75), (0.5, -0.25), (0.0625, 1.0)];
        let mut st = state(0.0, 0.0, 1.0);
        let (mut mp, mut ma, mut l) = (0.0f64, 0.0f64, 1.0f64);
        for (i, &(pp, pa)) in phis.iter().enumerate() {
            st = update_multipliers(&st, pp, pa).unwrap();
            mp += l * pp;
            ma = (ma + l * pa).max(0.0);
            l *= 2.0;
            assert_eq!(st.mu_p, mp);
            assert_eq!(st.mu_a, ma);
            assert_eq!(st.lambda, 2f64.powi(i as i32 + 1));
            assert!(st.mu_a >= 0.0);
        }
    }

    #[test]
    fn targets_convert_once() {
        let st = LagrangianState::new(6.5, -45.0, 0.3, 1.0, 2.0).unwrap();
        assert!((st.eps_p - 10f64.powf(0.65)).abs() < 1e-12);
        assert!((st.aclr_target_db() + 45.0).abs() < 1e-12);
        assert!((aclr_violation(-50.0, &st) + 5.0).abs() < 1e-12);
    }
}
