//! Logistic QoE scores.
//!
//! Each user scores its semantic rate and semantic accuracy with a logistic
//! curve centred on its requirement; group QoE is the weighted sum over the
//! group's users, with the accuracy shared by both members of a bimodal pair.

use serde::{Deserialize, Serialize};

/// Per-user QoE parameters.
///
/// `beta` applies to rates measured in ksuts/s, `lambda` to accuracy in
/// [0, 1]. `phi_req` is stored in suts/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QoEParams {
    pub w: f64,
    pub beta: f64,
    pub lambda: f64,
    pub phi_req: f64,
    pub xi_req: f64,
    pub g_th: f64,
}

impl QoEParams {
    /// Support violations, empty when the parameters are valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.w) {
            out.push(format!("w = {} outside [0, 1]", self.w));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            out.push(format!("beta = {} must be positive", self.beta));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            out.push(format!("lambda = {} must be positive", self.lambda));
        }
        if !(self.phi_req > 0.0 && self.phi_req.is_finite()) {
            out.push(format!("phi_req = {} must be positive", self.phi_req));
        }
        if !(self.xi_req > 0.0 && self.xi_req < 1.0) {
            out.push(format!("xi_req = {} outside (0, 1)", self.xi_req));
        }
        if !(0.0..=1.0).contains(&self.g_th) {
            out.push(format!("g_th = {} outside [0, 1]", self.g_th));
        }
        out
    }
}

fn logistic_above(growth: f64, required: f64, value: f64) -> f64 {
    // exp overflow gives 1/inf = 0, underflow gives 1/1 = 1
    1.0 / (1.0 + (growth * (required - value)).exp())
}

/// Rate score `G^R`; `phi` in suts/s.
pub fn rate_score(params: &QoEParams, phi: f64) -> f64 {
    logistic_above(params.beta, params.phi_req / 1e3, phi / 1e3)
}

/// Accuracy score `G^A`.
pub fn accuracy_score(params: &QoEParams, xi: f64) -> f64 {
    logistic_above(params.lambda, params.xi_req, xi)
}

/// Weighted contribution of one user.
pub fn user_qoe(params: &QoEParams, rate_score: f64, accuracy_score: f64) -> f64 {
    params.w * rate_score + (1.0 - params.w) * accuracy_score
}

/// Group QoE for users with rates `phis` sharing the group accuracy `xi`.
pub fn group_qoe(params: &[&QoEParams], phis: &[f64], xi: f64) -> f64 {
    params.iter().zip(phis).map(|(p, &phi)| user_qoe(p, rate_score(p, phi), accuracy_score(p, xi))).sum()
}

/// Score threshold: both scores must reach `g_th` (inclusive).
pub fn meets_threshold(params: &QoEParams, rate_score: f64, accuracy_score: f64) -> bool {
    rate_score >= params.g_th && accuracy_score >= params.g_th
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn params() -> QoEParams {
        QoEParams { w: 0.3, beta: 0.2, lambda: 55.0, phi_req: 60e3, xi_req: 0.85, g_th: 0.5 }
    }

    #[test]
    fn midpoints_are_exactly_half() {
        let p = params();
        assert!((rate_score(&p, p.phi_req) - 0.5).abs() <= 1e-12);
        assert!((accuracy_score(&p, p.xi_req) - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn closed_form_values() {
        let p = params();
        // phi_req - phi = -10 ksuts/s
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((rate_score(&p, 70e3) - expected).abs() < 1e-12);
        assert!((expected - 0.88080).abs() < 5e-6);
        let ga = accuracy_score(&p, 1.0);
        assert!((ga - 1.0 / (1.0 + (-8.25f64).exp())).abs() < 1e-12);
        assert!((ga - 0.99974).abs() < 5e-6);
    }

    #[test]
    fn limits_saturate() {
        let p = params();
        assert_eq!(rate_score(&p, f64::INFINITY), 1.0);
        let big = QoEParams { beta: 10.0, ..p };
        assert!(rate_score(&big, 0.0) < 1e-200);
        assert!(accuracy_score(&p, 0.0) < 1e-19);
        let huge = QoEParams { beta: 1e6, ..p };
        assert_eq!(rate_score(&huge, 0.0), 0.0);
    }

    #[test]
    fn group_qoe_examples() {
        let single = QoEParams { w: 1.0, ..params() };
        let gr = rate_score(&single, 75e3);
        assert_eq!(group_qoe(&[&single], &[75e3], 0.2), gr);

        let t = QoEParams { w: 0.2, ..params() };
        let i = QoEParams { w: 0.9, phi_req: 90e3, beta: 0.1, xi_req: 0.85, ..params() };
        let q = group_qoe(&[&t, &i], &[t.phi_req, i.phi_req], 0.85);
        assert!((q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn group_qoe_hand_evaluated() {
        let t = QoEParams { w: 0.4, beta: 0.2, lambda: 50.0, phi_req: 60e3, xi_req: 0.8, g_th: 0.5 };
        let i = QoEParams { w: 0.7, beta: 0.1, lambda: 60.0, phi_req: 90e3, xi_req: 0.9, g_th: 0.5 };
        let (phi_t, phi_i, xi) = (72e3, 121.827_411_167_512_7e3, 0.9);
        let expected = 0.4 / (1.0 + (0.2f64 * (60.0 - 72.0)).exp())
            + 0.6 / (1.0 + (50.0f64 * (0.8 - 0.9)).exp())
            + 0.7 / (1.0 + (0.1f64 * (90.0 - 121.827_411_167_512_7)).exp())
            + 0.3 / (1.0 + (60.0f64 * (0.9 - 0.9)).exp());
        let got = group_qoe(&[&t, &i], &[phi_t, phi_i], xi);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn threshold_examples() {
        let p = params();
        assert!(meets_threshold(&p, 0.5, 0.5));
        assert!(!meets_threshold(&p, 0.49, 0.9));
        assert!(!meets_threshold(&p, 0.9, 0.49));
    }

    #[test]
    fn violations_flag_support() {
        assert!(params().violations().is_empty());
        assert_eq!(QoEParams { beta: 0.0, ..params() }.violations().len(), 1);
        assert_eq!(QoEParams { w: 1.5, xi_req: 1.0, ..params() }.violations().len(), 2);
    }

    proptest! {
        #[test]
        fn scores_are_symmetric_about_requirement(d in 0.0f64..0.2, dphi in 0.0f64..80e3) {
            let p = params();
            let a = accuracy_score(&p, p.xi_req + d) + accuracy_score(&p, p.xi_req - d);
            prop_assert!((a - 1.0).abs() < 1e-12);
            let r = rate_score(&p, p.phi_req + dphi) + rate_score(&p, p.phi_req - dphi);
            prop_assert!((r - 1.0).abs() < 1e-12);
        }

        #[test]
        fn scores_are_increasing(x in 0.0f64..1.0, dx in 1e-3f64..0.1) {
            let p = params();
            prop_assert!(accuracy_score(&p, x + dx) >= accuracy_score(&p, x));
            prop_assert!(rate_score(&p, (x + dx) * 120e3) > rate_score(&p, x * 120e3));
        }

        #[test]
        fn group_qoe_is_bounded(w in 0.0f64..=1.0, phi in 0.0f64..800e3, xi in 0.0f64..=1.0) {
            let p = QoEParams { w, ..params() };
            let q = group_qoe(&[&p, &p], &[phi, phi], xi);
            prop_assert!((0.0..=2.0).contains(&q));
        }
    }
}
