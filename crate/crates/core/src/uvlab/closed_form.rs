use serde::{Deserialize, Serialize};

use crate::models::{uv_top_eigenvalue, UvReduced, UvState};
use crate::numkit::{dot, norm};
use crate::{Error, Result};

/// One gradient step of the `uv` model written in `(f, Tr H)`.
pub fn uv_step_fn(s: UvReduced, eta: f64, w: usize) -> UvReduced {
    let wf = w as f64;
    let f2w = s.f * s.f / wf;
    UvReduced {
        f: s.f * (1.0 - eta * s.tr_h + eta * eta * f2w),
        tr_h: s.tr_h + eta * f2w * (eta * s.tr_h - 4.0),
    }
}

/// `⟨L₁/L₀⟩` over Gaussian initializations for `eta = k / Tr H₀`.
pub fn uv_expected_first_step_loss_ratio(k: f64, w: usize) -> f64 {
    let wf = w as f64;
    (1.0 - k).powi(2)
        + k * k * (1.0 - k) / (2.0 * (wf + 1.0))
        + 3.0 * k.powi(4) / (16.0 * (wf + 1.0) * (wf + 3.0))
}

/// Gaussian-initialization averages of ratios of `f₀` and `Tr H₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvMoments {
    /// `⟨f₀² / Tr H₀²⟩`
    pub m2: f64,
    /// `⟨f₀⁴ / Tr H₀⁴⟩`
    pub m4: f64,
    /// `⟨f₀⁴ / Tr H₀²⟩`
    pub m42: f64,
}

pub fn uv_moments(w: usize) -> UvMoments {
    let wf = w as f64;
    // 3 (w+2) w³ Γ(w) / (16 Γ(w+4)) with Γ(w+4)/Γ(w) = w(w+1)(w+2)(w+3)
    let m4 = 3.0 * (wf + 2.0) * wf.powi(3) / (16.0 * wf * (wf + 1.0) * (wf + 2.0) * (wf + 3.0));
    UvMoments {
        m2: wf / (4.0 * (wf + 1.0)),
        m4,
        m42: 3.0 * wf / (4.0 * (wf + 3.0)),
    }
}

/// `‖H‖²_F = Tr H² + 4 (1 + 2/w) L`.
pub fn uv_frobenius_sq(tr_h: f64, loss: f64, w: usize) -> f64 {
    tr_h * tr_h + 4.0 * (1.0 + 2.0 / w as f64) * loss
}

/// `⟨Δ Tr H²⟩` after one step with `eta = k / Tr H₀`.
pub fn uv_trace_sq_change(k: f64, w: usize) -> f64 {
    let wf = w as f64;
    k * (k - 4.0) / wf * (3.0 * k * (k - 4.0) / (4.0 * (wf + 3.0)) + 2.0)
}

/// `⟨Δ‖H‖²_F⟩` after one step, with `⟨L₁ − L₀⟩` replaced by
/// `(⟨L₁/L₀⟩ − 1) · ⟨L₀⟩` and `⟨L₀⟩ = 1/2`.
pub fn uv_expected_frobenius_change(k: f64, w: usize) -> f64 {
    let wf = w as f64;
    uv_trace_sq_change(k, w)
        + 4.0 * (1.0 + 2.0 / wf) * (uv_expected_first_step_loss_ratio(k, w) - 1.0) * 0.5
}

/// Smallest `k > 0` above which `⟨L₁/L₀⟩ > 1`.
pub fn uv_k_loss(w: usize) -> f64 {
    bisect(|k| uv_expected_first_step_loss_ratio(k, w) - 1.0, 1.0, 8.0)
}

/// Smallest `k > 0` above which the expected Frobenius change is positive.
pub fn uv_k_frob(w: usize) -> f64 {
    bisect(|k| uv_expected_frobenius_change(k, w), 1.0, 8.0)
}

/// Root of an increasing sign change of `g` in `[lo, hi]`.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    debug_assert!(g(lo) <= 0.0 && g(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `c_max / k_max = 4 λ₀ / Tr H₀` for this state.
pub fn uv_cmax_ratio(s: &UvState) -> f64 {
    4.0 * uv_top_eigenvalue(s) / s.trace_h()
}

/// Cosine of the angle between `u` and `v`.
pub fn uv_weight_correlation(s: &UvState) -> Result<f64> {
    let (nu, nv) = (norm(&s.u), norm(&s.v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Undefined(
            "weight correlation of a zero vector".into(),
        ));
    }
    Ok((dot(&s.u, &s.v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_from_unit_state() {
        // u = v = 1: grad = (f v, f u) = (1, 1); eta = 0.5 gives u = v = 0.5
        let s = uv_step_fn(UvReduced { f: 1.0, tr_h: 2.0 }, 0.5, 1);
        assert_eq!(s, UvReduced { f: 0.25, tr_h: 0.5 });
        let fixed = UvReduced { f: 0.0, tr_h: 1.7 };
        assert_eq!(uv_step_fn(fixed, 3.0, 4), fixed);
        let any = UvReduced { f: 0.4, tr_h: 1.7 };
        assert_eq!(uv_step_fn(any, 0.0, 4), any);
    }

    #[test]
    fn loss_ratio_spot_values() {
        assert_eq!(uv_expected_first_step_loss_ratio(0.0, 5), 1.0);
        assert!((uv_expected_first_step_loss_ratio(2.0, 1) - 0.375).abs() < 1e-15);
        assert!((uv_expected_first_step_loss_ratio(2.0, 1_000_000_000) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn moment_spot_values() {
        assert_eq!(uv_moments(1).m2, 0.125);
        assert!((uv_moments(1).m4 - 9.0 / 384.0).abs() < 1e-16);
        assert_eq!(uv_moments(3).m42, 0.375);
        for w in [1, 2, 10, 1000, 1_000_000] {
            let m = uv_moments(w);
            assert!(m.m2 < 0.25 && m.m2 > 0.0 && m.m4 > 0.0 && m.m42 > 0.0);
        }
        assert!((uv_moments(100_000_000).m2 - 0.25).abs() < 1e-8);
    }

    #[test]
    fn frobenius_spot_values() {
        assert_eq!(uv_frobenius_sq(2.0, 0.5, 1), 10.0);
        assert_eq!(uv_frobenius_sq(1.5, 0.0, 7), 2.25);
    }

    #[test]
    fn frobenius_change_at_k4_is_loss_term_only() {
        for w in [1, 2, 8] {
            let wf = w as f64;
            let want =
                4.0 * (1.0 + 2.0 / wf) * (uv_expected_first_step_loss_ratio(4.0, w) - 1.0) / 2.0;
            assert!((uv_expected_frobenius_change(4.0, w) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn thresholds() {
        let wide = 1_000_000_000;
        assert!((uv_k_loss(wide) - 2.0).abs() < 1e-6);
        assert!((uv_k_frob(wide) - uv_k_loss(wide)).abs() < 1e-6);
        assert!(uv_k_frob(2) > uv_k_loss(2));
        let k = uv_k_loss(2);
        assert!(uv_expected_frobenius_change(k, 2) < 0.0);
    }

    #[test]
    fn cmax_ratio_and_correlation() {
        let s = UvState::new(vec![1.0], vec![1.0]).unwrap();
        assert!((uv_cmax_ratio(&s) - 6.0).abs() < 1e-14);
        assert_eq!(uv_weight_correlation(&s).unwrap(), 1.0);
        let o = UvState::new(vec![1.0, 0.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(uv_weight_correlation(&o).unwrap(), 0.0);
        let z = UvState::new(vec![0.0, 0.0], vec![0.0, 2.0]).unwrap();
        assert!(matches!(
            uv_weight_correlation(&z),
            Err(Error::Undefined(_))
        ));
    }
}
