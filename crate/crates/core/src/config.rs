use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// Every tunable of the refinement pipeline and the 3D metric.
///
/// Missing fields in a JSON config fall back to [`GeoConfig::default`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoConfig {
    /// Cosine threshold for the coplanar neighborhood of normal-to-depth.
    pub alpha: f64,
    /// Neighborhood half-extent in pixels; offsets must satisfy `|du| < beta`.
    pub beta: usize,
    /// Relative depth gate of the least-squares neighborhood.
    pub gamma: f64,
    /// Four-sweep cascades per propagation.
    pub t_prop: usize,
    /// Outer refinement repetitions.
    pub iterations: usize,
    /// Ridge added to the normal equations, relative to `trace(AᵀA) / 3`.
    pub ridge_eps: f64,
    /// Weight of the geometric estimate when blending with the input.
    pub blend_w: f64,
    /// Propagation weight away from image edges.
    pub base_w: f64,
    /// Canny hysteresis thresholds; `None` means per-image mean / twice the mean.
    pub canny_low: Option<f64>,
    pub canny_high: Option<f64>,
    /// Use the already-updated predecessor inside a sweep.
    pub recursive_within_pass: bool,
    /// TV denoising strength used by the 3D geometric metric.
    pub tv_strength: f64,
    pub tv_iters: usize,
}

impl Default for GeoConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            beta: 9,
            gamma: 0.05,
            t_prop: 3,
            iterations: 2,
            ridge_eps: 1e-12,
            blend_w: 0.5,
            base_w: 0.7,
            canny_low: None,
            canny_high: None,
            recursive_within_pass: true,
            tv_strength: 0.1,
            tv_iters: 30,
        }
    }
}

impl GeoConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(GeoError::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.beta < 1 {
            return fail("beta must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.t_prop < 1 {
            return fail("t_prop must be >= 1".into());
        }
        if self.iterations < 1 {
            return fail("iterations must be >= 1".into());
        }
        if !(self.ridge_eps.is_finite() && self.ridge_eps >= 0.0) {
            return fail(format!("ridge_eps must be >= 0, got {}", self.ridge_eps));
        }
        if !(0.0..=1.0).contains(&self.blend_w) {
            return fail(format!("blend_w must lie in [0, 1], got {}", self.blend_w));
        }
        if !(0.0..=1.0).contains(&self.base_w) {
            return fail(format!("base_w must lie in [0, 1], got {}", self.base_w));
        }
        match (self.canny_low, self.canny_high) {
            (None, None) => {}
            (Some(lo), Some(hi)) => {
                if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                    return fail(format!("canny thresholds need 0 <= low <= high, got ({lo}, {hi})"));
                }
            }
            _ => return fail("canny_low and canny_high must be given together".into()),
        }
        if !(self.tv_strength.is_finite() && self.tv_strength >= 0.0) {
            return fail(format!("tv_strength must be >= 0, got {}", self.tv_strength));
        }
        if self.tv_iters < 1 {
            return fail("tv_iters must be >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = GeoConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.alpha, cfg.beta, cfg.gamma, cfg.t_prop), (0.95, 9, 0.05, 3));
    }

    #[test]
    fn partial_json_falls_back_to_defaults() {
        let cfg: GeoConfig = serde_json::from_str(r#"{"beta": 4, "blend_w": 1.0}"#).unwrap();
        assert_eq!(cfg.beta, 4);
        assert_eq!(cfg.blend_w, 1.0);
        assert_eq!(cfg.alpha, 0.95);
        assert!(serde_json::from_str::<GeoConfig>(r#"{"betta": 4}"#).is_err());
    }

    #[test]
    fn rejects_out_of_range_values() {
        let bad = [
            GeoConfig { alpha: 1.0, ..Default::default() },
            GeoConfig { beta: 0, ..Default::default() },
            GeoConfig { gamma: 0.0, ..Default::default() },
            GeoConfig { t_prop: 0, ..Default::default() },
            GeoConfig { iterations: 0, ..Default::default() },
            GeoConfig { ridge_eps: -1.0, ..Default::default() },
            GeoConfig { blend_w: 1.5, ..Default::default() },
            GeoConfig { canny_low: Some(3.0), ..Default::default() },
            GeoConfig { canny_low: Some(3.0), canny_high: Some(2.0), ..Default::default() },
            GeoConfig { tv_iters: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
