//! Per-frame latency, energy and accuracy of one offloading client, and the
//! weighted objective term `E + lambda1 * L - lambda2 * A` built from them.
//!
//! Units: frequency in GHz, model side length in pixels, bandwidth and data
//! rates in Mbps, energy in J, power in W, time in s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::DeviceProfile;

const BITS_PER_MEGABIT: f64 = 1e6;

/// One client's camera rate, preference weights and latency bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientSpec {
    /// Camera frames per second.
    pub fps: u32,
    /// Latency weight, J/s.
    pub lambda1: f64,
    /// Accuracy weight, J per unit accuracy.
    pub lambda2: f64,
    /// Maximum tolerable per-frame service latency, s.
    pub l_max: f64,
}

impl ClientSpec {
    pub fn new(fps: u32, lambda1: f64, lambda2: f64, l_max: f64) -> Self {
        Self {
            fps,
            lambda1,
            lambda2,
            l_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fps < 1 {
            return Err(Error::InvalidInput("fps must be >= 1".into()));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::InvalidInput(
                "preference weights must be >= 0".into(),
            ));
        }
        if !(self.l_max > 0.0) {
            return Err(Error::InvalidInput("l_max must be > 0".into()));
        }
        Ok(())
    }
}

/// CPU frequency, model side length and allocated bandwidth of one client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub f: f64,
    pub s: f64,
    pub b: f64,
}

impl Configuration {
    pub fn new(f: f64, s: f64, b: f64) -> Self {
        Self { f, s, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub l_cv: f64,
    pub l_tr: f64,
    pub l_inf: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_img: f64,
    pub e_cv: f64,
    pub e_com: f64,
    pub e_bs: f64,
    pub total: f64,
    pub latency: f64,
    pub l_cv: f64,
    pub l_tr: f64,
    pub l_inf: f64,
}

/// Partial derivatives of one client's objective term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub f: f64,
    pub s: f64,
    pub b: f64,
}

pub fn check_frequency(profile: &DeviceProfile, f: f64) -> Result<()> {
    let (min, max) = (profile.cpu.f_min, profile.cpu.f_max);
    if !(f >= min && f <= max) {
        return Err(Error::FrequencyOutOfRange { f, min, max });
    }
    Ok(())
}

fn check_config(profile: &DeviceProfile, cfg: &Configuration) -> Result<()> {
    check_frequency(profile, cfg.f)?;
    if !(cfg.s >= 0.0) || !cfg.s.is_finite() {
        return Err(Error::InvalidInput(format!("model size {} px", cfg.s)));
    }
    if !(cfg.b > 0.0) || !cfg.b.is_finite() {
        return Err(Error::InvalidInput(format!("bandwidth {} Mbps", cfg.b)));
    }
    Ok(())
}

/// Size of one transmitted frame in megabits.
pub fn payload_megabits(profile: &DeviceProfile, s: f64) -> f64 {
    profile.detector.sigma * s * s / BITS_PER_MEGABIT
}

/// Achieved rate `r_max(b) * r*(f)`, Mbps.
pub fn data_rate(profile: &DeviceProfile, f: f64, b: f64) -> Result<f64> {
    check_frequency(profile, f)?;
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!("bandwidth {b} Mbps")));
    }
    let rate = profile.regression.r_max_slope * b * profile.regression.r_star.eval(f);
    if !(rate > 0.0) {
        return Err(Error::NonPositiveRate(rate));
    }
    Ok(rate)
}

pub fn latency_per_frame(profile: &DeviceProfile, cfg: &Configuration) -> Result<LatencyBreakdown> {
    check_config(profile, cfg)?;
    let reg = &profile.regression;
    let rate = data_rate(profile, cfg.f, cfg.b)?;
    let l_cv = reg.l_cv.eval(cfg.f);
    let l_tr = payload_megabits(profile, cfg.s) / rate;
    let l_inf = reg.l_inf.eval(profile.normalized_area(cfg.s));
    Ok(LatencyBreakdown {
        l_cv,
        l_tr,
        l_inf,
        total: l_cv + l_tr + l_inf,
    })
}

/// Per-frame energy split into image generation/preview, conversion,
/// communication and base components.
pub fn energy_per_frame(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
) -> Result<EnergyBreakdown> {
    let lat = latency_per_frame(profile, cfg)?;
    let reg = &profile.regression;
    let radio = &profile.radio;
    let f = cfg.f;

    let per_frame_img = reg.e_gt.eval(f) + reg.e_prv.eval(f);
    let e_img = per_frame_img * spec.fps as f64 * lat.total;

    let e_cv = reg.p_cv.eval(f) * lat.l_cv;

    let rate = data_rate(profile, f, cfg.b)?;
    let p_bs = reg.p_bs.eval(f);
    // The idle phase and the base-energy case split share one predicate.
    let waits_past_tail = lat.l_inf > radio.t_tail;
    let e_idle = if waits_past_tail {
        p_bs * (lat.l_inf - radio.t_tail)
    } else {
        0.0
    };
    let e_com = reg.p_tr.eval(rate) * lat.l_tr
        + e_idle
        + radio.p_pro * radio.t_pro
        + radio.p_tail * radio.t_tail;

    let e_bs = if waits_past_tail {
        p_bs * (lat.total - lat.l_inf + radio.t_tail)
    } else {
        p_bs * lat.total
    };

    Ok(EnergyBreakdown {
        e_img,
        e_cv,
        e_com,
        e_bs,
        total: e_img + e_cv + e_com + e_bs,
        latency: lat.total,
        l_cv: lat.l_cv,
        l_tr: lat.l_tr,
        l_inf: lat.l_inf,
    })
}

/// Detection accuracy `1 - a * exp(-b * s)`.
pub fn accuracy(profile: &DeviceProfile, s: f64) -> f64 {
    let d = &profile.detector;
    1.0 - d.accuracy_a * (-d.accuracy_b * s).exp()
}

fn accuracy_slope(profile: &DeviceProfile, s: f64) -> f64 {
    let d = &profile.detector;
    d.accuracy_a * d.accuracy_b * (-d.accuracy_b * s).exp()
}

/// `E + lambda1 * L - lambda2 * A` for one client.
pub fn objective_term(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
) -> Result<f64> {
    let e = energy_per_frame(profile, spec, cfg)?;
    Ok(e.total + spec.lambda1 * e.latency - spec.lambda2 * accuracy(profile, cfg.s))
}

/// Analytic partial derivatives of [`objective_term`].
///
/// Idle plus base energy equals `P_bs(f) * L` in both tail branches, which
/// keeps the objective differentiable across the branch boundary.
pub fn objective_gradient(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
) -> Result<Gradient> {
    let lat = latency_per_frame(profile, cfg)?;
    let reg = &profile.regression;
    let (f, s, b) = (cfg.f, cfg.s, cfg.b);
    let fps = spec.fps as f64;
    let kappa = reg.r_max_slope;

    let img = reg.e_gt.eval(f) + reg.e_prv.eval(f);
    let img_df = reg.e_gt.derivative(f) + reg.e_prv.derivative(f);
    let r_star = reg.r_star.eval(f);
    let r_star_df = reg.r_star.derivative(f);
    let rate = kappa * b * r_star;
    let p_tr = reg.p_tr.eval(rate);
    let p_tr_dr = reg.p_tr.derivative(rate);
    let p_bs = reg.p_bs.eval(f);
    let p_bs_df = reg.p_bs.derivative(f);

    // Every latency-proportional energy term carries this multiplier.
    let per_second = img * fps + p_bs + spec.lambda1;

    let l_tr_df = -lat.l_tr * r_star_df / r_star;
    let l_df = reg.l_cv.derivative(f) + l_tr_df;
    let d_f = img_df * fps * lat.total
        + per_second * l_df
        + reg.p_cv.derivative(f) * lat.l_cv
        + reg.p_cv.eval(f) * reg.l_cv.derivative(f)
        + p_tr_dr * kappa * b * r_star_df * lat.l_tr
        + p_tr * l_tr_df
        + p_bs_df * lat.total;

    let divisor = reg.l_inf_area_divisor;
    let l_tr_ds = if s > 0.0 { 2.0 * lat.l_tr / s } else { 0.0 };
    let l_inf_ds = reg.l_inf.derivative(profile.normalized_area(s)) * 2.0 * s / (divisor * divisor);
    let d_s = per_second * (l_tr_ds + l_inf_ds) + p_tr * l_tr_ds
        - spec.lambda2 * accuracy_slope(profile, s);

    let l_tr_db = -lat.l_tr / b;
    let d_b = per_second * l_tr_db + p_tr_dr * kappa * r_star * lat.l_tr + p_tr * l_tr_db;

    Ok(Gradient {
        f: d_f,
        s: d_s,
        b: d_b,
    })
}

/// Weight `Phi` of the transmission term, so that the bandwidth-dependent
/// part of the objective (plus `beta * L_tr`) equals `Phi / (r_max_slope * b)`.
///
/// With `beta = 0` this is the positive coefficient that makes the objective
/// strictly convex in `b`.
pub fn transmission_weight(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    f: f64,
    s: f64,
    beta: f64,
) -> Result<f64> {
    check_frequency(profile, f)?;
    let reg = &profile.regression;
    let r_star = reg.r_star.eval(f);
    if !(r_star > 0.0) {
        return Err(Error::NonPositiveRate(r_star));
    }
    let per_second = spec.fps as f64 * (reg.e_gt.eval(f) + reg.e_prv.eval(f))
        + reg.p_tr.eval(0.0)
        + reg.p_bs.eval(f)
        + spec.lambda1
        + beta;
    Ok(per_second * payload_megabits(profile, s) / r_star)
}

/// Analytic `d^2 Q / d b^2` for one client; cross-client terms are zero.
pub fn bandwidth_curvature(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
) -> Result<f64> {
    let psi = transmission_weight(profile, spec, cfg.f, cfg.s, 0.0)?;
    Ok(2.0 * psi / (profile.regression.r_max_slope * cfg.b.powi(3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn profile() -> DeviceProfile {
        DeviceProfile::bundled()
    }

    fn reference_cfg() -> Configuration {
        Configuration::new(1.0, 320.0, 100.0)
    }

    fn spec(fps: u32, l1: f64, l2: f64) -> ClientSpec {
        ClientSpec::new(fps, l1, l2, 10.0)
    }

    #[test]
    fn base_power_at_one_ghz() {
        assert_relative_eq!(
            profile().regression.p_bs.eval(1.0),
            0.67053,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            profile().regression.l_cv.eval(1.0),
            0.184,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rate_is_linear_in_bandwidth() {
        let p = profile();
        let full = data_rate(&p, 1.0, 100.0).unwrap();
        assert_relative_eq!(full, 60.294297, max_relative = 1e-9);
        let half = data_rate(&p, 1.0, 50.0).unwrap();
        assert_relative_eq!(half * 2.0, full, max_relative = 1e-15);
    }

    #[test]
    fn rate_rejects_out_of_range_frequency() {
        let p = profile();
        assert!(matches!(
            data_rate(&p, 0.2, 100.0),
            Err(Error::FrequencyOutOfRange { .. })
        ));
        assert!(data_rate(&p, 2.7, 100.0).is_err());
    }

    #[test]
    fn reference_latency() {
        let lat = latency_per_frame(&profile(), &reference_cfg()).unwrap();
        assert_relative_eq!(lat.l_tr, 0.04076007387564367, max_relative = 1e-12);
        assert_relative_eq!(lat.l_inf, 0.8892784, max_relative = 1e-12);
        assert_eq!(lat.total, lat.l_cv + lat.l_tr + lat.l_inf);
    }

    #[test]
    fn zero_payload_has_zero_transmission_latency() {
        let lat = latency_per_frame(&profile(), &Configuration::new(1.0, 0.0, 100.0)).unwrap();
        assert_eq!(lat.l_tr, 0.0);
    }

    #[test]
    fn reference_energy_breakdown() {
        // Frozen from an independent straight-line evaluation of the fitted rows.
        let e = energy_per_frame(&profile(), &spec(15, 0.0, 0.0), &reference_cfg()).unwrap();
        assert_relative_eq!(e.e_img, 1.890634694014355, max_relative = 1e-12);
        assert_relative_eq!(e.e_cv, 0.0704444, max_relative = 1e-12);
        assert_relative_eq!(e.e_com, 0.9353414639835744, max_relative = 1e-12);
        assert_relative_eq!(e.e_bs, 0.29151967233583526, max_relative = 1e-12);
        assert_relative_eq!(e.total, 3.1879402303337647, max_relative = 1e-12);
        assert_eq!(e.total, e.e_img + e.e_cv + e.e_com + e.e_bs);
    }

    #[test]
    fn zero_fps_removes_only_image_energy() {
        let p = profile();
        let a = energy_per_frame(&p, &spec(15, 0.0, 0.0), &reference_cfg()).unwrap();
        let b = energy_per_frame(&p, &spec(0, 0.0, 0.0), &reference_cfg()).unwrap();
        assert_eq!(b.e_img, 0.0);
        assert_eq!(a.e_cv, b.e_cv);
        assert_eq!(a.e_com, b.e_com);
        assert_eq!(a.e_bs, b.e_bs);
    }

    #[test]
    fn short_inference_skips_idle_phase() {
        let p = profile();
        // L_inf(100 px) = 0.1681 s < t_tail
        let cfg = Configuration::new(1.0, 100.0, 100.0);
        let e = energy_per_frame(&p, &spec(15, 0.0, 0.0), &cfg).unwrap();
        assert!(e.l_inf <= p.radio.t_tail);
        let rate = data_rate(&p, 1.0, 100.0).unwrap();
        let expected_com = p.regression.p_tr.eval(rate) * e.l_tr + p.radio.fixed_energy();
        assert_relative_eq!(e.e_com, expected_com, max_relative = 1e-15);
        assert_eq!(e.e_bs, p.regression.p_bs.eval(1.0) * e.latency);
    }

    #[test]
    fn accuracy_values() {
        let p = profile();
        assert_relative_eq!(accuracy(&p, 320.0), 0.802860125150637, max_relative = 1e-12);
        assert_relative_eq!(
            accuracy(&p, 608.0),
            0.9696767877098954,
            max_relative = 1e-12
        );
        assert!(accuracy(&p, 300.0) < accuracy(&p, 301.0));
    }

    #[test]
    fn objective_with_default_weights() {
        let p = profile();
        let cfg = reference_cfg();
        let zero = objective_term(&p, &spec(15, 0.0, 0.0), &cfg).unwrap();
        assert_eq!(
            zero,
            energy_per_frame(&p, &spec(15, 0.0, 0.0), &cfg)
                .unwrap()
                .total
        );
        let q = objective_term(&p, &spec(15, 0.3, 1.8), &cfg).unwrap();
        assert_relative_eq!(q, 2.0770035472253117, max_relative = 1e-12);
        let q_more_acc = objective_term(&p, &spec(15, 0.3, 2.0), &cfg).unwrap();
        assert!(q_more_acc < q);
    }

    #[test]
    fn curvature_matches_transmission_weight() {
        let p = profile();
        let s = spec(15, 0.3, 1.8);
        let cfg = reference_cfg();
        let h = 1e-2;
        let q = |b: f64| objective_term(&p, &s, &Configuration { b, ..cfg }).unwrap();
        let numeric = (q(cfg.b + h) - 2.0 * q(cfg.b) + q(cfg.b - h)) / (h * h);
        let analytic = bandwidth_curvature(&p, &s, &cfg).unwrap();
        assert_relative_eq!(numeric, analytic, max_relative = 1e-5);
    }
}
