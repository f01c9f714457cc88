//! Device profile: fitted regression rows, radio phase constants, CPU range,
//! detector sizes and the local tracking cost table.
//!
//! Profiles are TOML files. The bundled default reproduces the measured
//! Nexus-6/WiFi coefficients; see `profiles/default.toml`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Text of the bundled default profile, comments included.
pub const BUNDLED_PROFILE: &str = include_str!("../profiles/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub name: String,
    pub regression: Regression,
    pub radio: RadioPhases,
    pub cpu: CpuRange,
    pub detector: DetectorModel,
    #[serde(default)]
    pub tracking: Vec<TrackingCost>,
}

/// Fitted regression rows. Frequencies in GHz, rates in Mbps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    /// Image generation energy per frame, J.
    pub e_gt: Polynomial,
    /// Preview energy per frame, J.
    pub e_prv: Polynomial,
    /// Conversion power, W.
    pub p_cv: Polynomial,
    /// Conversion latency, s.
    pub l_cv: Polynomial,
    /// Network throughput per unit of allocated bandwidth.
    pub r_max_slope: f64,
    /// CPU-limited TCP throughput factor.
    pub r_star: Polynomial,
    /// Transmission power vs achieved rate, W. At most linear.
    pub p_tr: Polynomial,
    /// Inference latency vs normalized model area, s.
    pub l_inf: Polynomial,
    /// `s` is divided by this before squaring when evaluating `l_inf`.
    pub l_inf_area_divisor: f64,
    /// Base power, W.
    pub p_bs: Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioPhases {
    pub p_pro: f64,
    pub t_pro: f64,
    pub p_tail: f64,
    pub t_tail: f64,
}

impl RadioPhases {
    /// Energy of the promotion and tail phases, J.
    pub fn fixed_energy(&self) -> f64 {
        self.p_pro * self.t_pro + self.p_tail * self.t_tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpuRange {
    pub f_min: f64,
    pub f_max: f64,
    /// Frequency an interactive governor settles at, used by the FACT-like baseline.
    pub governor_default: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Square input side lengths in pixels, strictly increasing.
    pub model_sizes: Vec<f64>,
    /// Bits per transmitted pixel.
    pub sigma: f64,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
}

/// One row of the local tracker cost table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingCost {
    /// CPU frequency, GHz.
    pub f: f64,
    /// Energy per tracked frame, J.
    pub energy: f64,
    /// Latency per tracked frame, s.
    pub latency: f64,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        Self::bundled()
    }
}

impl DeviceProfile {
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_PROFILE).expect("bundled profile is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let profile: DeviceProfile = toml::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn s_min(&self) -> f64 {
        self.detector.model_sizes[0]
    }

    pub fn s_max(&self) -> f64 {
        *self
            .detector
            .model_sizes
            .last()
            .expect("validated nonempty")
    }

    /// `(s / divisor)^2`, the argument of the inference latency row.
    pub fn normalized_area(&self, s: f64) -> f64 {
        let x = s / self.regression.l_inf_area_divisor;
        x * x
    }

    /// Tracking cost at `f`, linearly interpolated and clamped to the table ends.
    pub fn tracking_cost(&self, f: f64) -> Option<TrackingCost> {
        let table = &self.tracking;
        let first = table.first()?;
        let last = table.last()?;
        if f <= first.f {
            return Some(TrackingCost { f, ..*first });
        }
        if f >= last.f {
            return Some(TrackingCost { f, ..*last });
        }
        let hi = table.iter().position(|row| row.f >= f)?;
        let (a, b) = (table[hi - 1], table[hi]);
        let t = (f - a.f) / (b.f - a.f);
        Some(TrackingCost {
            f,
            energy: a.energy + t * (b.energy - a.energy),
            latency: a.latency + t * (b.latency - a.latency),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        let reg = &self.regression;
        for (name, poly) in [
            ("e_gt", &reg.e_gt),
            ("e_prv", &reg.e_prv),
            ("p_cv", &reg.p_cv),
            ("l_cv", &reg.l_cv),
            ("r_star", &reg.r_star),
            ("p_tr", &reg.p_tr),
            ("l_inf", &reg.l_inf),
            ("p_bs", &reg.p_bs),
        ] {
            if poly.coeffs().is_empty() {
                return bad(format!("{name} has no coefficients"));
            }
            if poly.coeffs().iter().any(|c| !c.is_finite()) {
                return bad(format!("{name} has a non-finite coefficient"));
            }
        }
        // The closed-form bandwidth share needs P_tr(R) * L_tr to be affine in 1/B.
        if reg.p_tr.degree() > 1 {
            return bad("p_tr must be at most linear".into());
        }
        if !(reg.r_max_slope > 0.0) {
            return bad("r_max_slope must be > 0".into());
        }
        if !(reg.l_inf_area_divisor > 0.0) {
            return bad("l_inf_area_divisor must be > 0".into());
        }

        let r = &self.radio;
        if !(r.t_pro >= 0.0 && r.t_tail >= 0.0 && r.p_pro >= 0.0 && r.p_tail >= 0.0) {
            return bad("radio phase powers and durations must be >= 0".into());
        }

        let c = &self.cpu;
        if !(c.f_min > 0.0 && c.f_min < c.f_max) {
            return bad(format!(
                "need 0 < f_min < f_max, got [{}, {}]",
                c.f_min, c.f_max
            ));
        }
        if !(c.governor_default >= c.f_min && c.governor_default <= c.f_max) {
            return bad("governor_default outside [f_min, f_max]".into());
        }

        let d = &self.detector;
        if d.model_sizes.is_empty() {
            return bad("model_sizes is empty".into());
        }
        if d.model_sizes.iter().any(|&s| !(s > 0.0)) {
            return bad("model sizes must be > 0".into());
        }
        if d.model_sizes.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("model sizes must be strictly increasing".into());
        }
        if !(d.sigma > 0.0) {
            return bad("sigma must be > 0".into());
        }
        if !(d.accuracy_a > 0.0 && d.accuracy_b > 0.0) {
            return bad("accuracy coefficients must be > 0".into());
        }

        if self.tracking.windows(2).any(|w| !(w[0].f < w[1].f)) {
            return bad("tracking table must be sorted by strictly increasing f".into());
        }
        if self
            .tracking
            .iter()
            .any(|t| !(t.energy > 0.0 && t.latency > 0.0 && t.f > 0.0))
        {
            return bad("tracking entries must be positive".into());
        }
        Ok(())
    }
}
