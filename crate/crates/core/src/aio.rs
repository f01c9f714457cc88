//! Adaptive image offloading: decides how many frames to track locally
//! between two detection offloads.
//!
//! The orchestrator keeps a short history of consecutive-frame PSNR values
//! and their half-difference gradients, estimates the scene-change rate as an
//! exponentially weighted mean, and picks the tracking budget `rho` that
//! minimizes `theta1 * (e_obj + e_trk * rho) / (1 + rho) - theta2 * IOU(rho)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_PSNR_CAP;
use crate::poly::Polynomial;

/// Tracking IOU as a quadratic in PSNR for one scene attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneModel {
    /// Lowest power first.
    pub iou_coeffs: Polynomial,
    pub attribute_name: String,
}

impl Default for SceneModel {
    fn default() -> Self {
        Self::motion_blur()
    }
}

impl SceneModel {
    pub fn motion_blur() -> Self {
        Self {
            iou_coeffs: Polynomial::new([-2.328, 0.2411, -0.004335]),
            attribute_name: "motion_blur".into(),
        }
    }

    pub fn raw_iou(&self, psnr: f64) -> f64 {
        self.iou_coeffs.eval(psnr)
    }

    pub fn iou(&self, psnr: f64) -> f64 {
        self.raw_iou(psnr).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffloadPreference {
    /// Energy weight.
    pub theta1: f64,
    /// Accuracy weight.
    pub theta2: f64,
}

impl OffloadPreference {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if !(theta1 > 0.0 && theta2 > 0.0) || !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "offload weights must be > 0, got ({theta1}, {theta2})"
            )));
        }
        Ok(Self { theta1, theta2 })
    }

    /// `theta1 / theta2 = ratio` with `theta2 = 1`.
    pub fn from_ratio(ratio: f64) -> Result<Self> {
        Self::new(ratio, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Detect,
    Track,
}

/// History window covering two seconds of camera frames.
pub fn window_for_fps(fps: u32) -> usize {
    ((2 * fps) as usize).max(1)
}

/// Predicted tracking IOU after `rho` frames: PSNR extrapolated linearly with
/// slope `v_bar`, clamped to `[0, cap]`, then mapped through the scene fit.
pub fn predict_iou_at(scene: &SceneModel, v_bar: f64, rho: u32, psnr_latest: f64, cap: f64) -> f64 {
    let psnr = (psnr_latest + v_bar * rho as f64).clamp(0.0, cap);
    scene.iou(psnr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorState {
    psnr_history: VecDeque<f64>,
    grad_history: VecDeque<f64>,
    pub rho: u32,
    pub window_frames: usize,
    pub decay: f64,
    /// Energy of one offloaded detection, J.
    pub e_obj: f64,
    /// Energy of one locally tracked frame at the current frequency, J.
    pub e_trk: f64,
    pub rho_max: u32,
    pub psnr_cap: f64,
    /// Scene-change rate fixed at the last detection, dB/frame.
    pub v_bar: f64,
}

impl OrchestratorState {
    pub fn new(
        window_frames: usize,
        decay: f64,
        e_obj: f64,
        e_trk: f64,
        rho_max: u32,
    ) -> Result<Self> {
        if window_frames == 0 {
            return Err(Error::InvalidInput("window_frames must be >= 1".into()));
        }
        if !(decay >= 0.0) {
            return Err(Error::InvalidInput(format!("decay {decay}")));
        }
        if !(e_obj > 0.0 && e_trk > 0.0) || !e_obj.is_finite() || !e_trk.is_finite() {
            return Err(Error::InvalidInput(format!(
                "energies must be > 0, got e_obj={e_obj} e_trk={e_trk}"
            )));
        }
        Ok(Self {
            psnr_history: VecDeque::with_capacity(window_frames),
            grad_history: VecDeque::with_capacity(window_frames),
            rho: 0,
            window_frames,
            decay,
            e_obj,
            e_trk,
            rho_max,
            psnr_cap: DEFAULT_PSNR_CAP,
            v_bar: 0.0,
        })
    }

    pub fn psnr_history(&self) -> impl Iterator<Item = f64> + '_ {
        self.psnr_history.iter().copied()
    }

    pub fn grad_history(&self) -> impl Iterator<Item = f64> + '_ {
        self.grad_history.iter().copied()
    }

    fn push(buf: &mut VecDeque<f64>, cap: usize, v: f64) {
        if buf.len() == cap {
            buf.pop_front();
        }
        buf.push_back(v);
    }

    /// Appends `curr` to the PSNR history and `(curr - prev) / 2` to the gradient history.
    pub fn update_history(&mut self, prev: f64, curr: f64) {
        Self::push(&mut self.psnr_history, self.window_frames, curr);
        Self::push(
            &mut self.grad_history,
            self.window_frames,
            (curr - prev) / 2.0,
        );
    }

    /// Records the newest consecutive-frame PSNR.
    pub fn observe(&mut self, psnr: f64) {
        match self.psnr_history.back() {
            Some(&prev) => self.update_history(prev, psnr),
            None => Self::push(&mut self.psnr_history, self.window_frames, psnr),
        }
    }

    /// Exponentially weighted mean of the gradient history, newest weighted most.
    pub fn scene_rate(&self) -> Result<f64> {
        if self.grad_history.is_empty() {
            return Err(Error::EmptyHistory);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (j, &v) in self.grad_history.iter().rev().enumerate() {
            let w = if j == 0 {
                1.0
            } else {
                (-self.decay * j as f64).exp()
            };
            num += v * w;
            den += w;
        }
        Ok(num / den)
    }

    pub fn predict_iou(&self, scene: &SceneModel, rho: u32, psnr_latest: f64) -> f64 {
        predict_iou_at(scene, self.v_bar, rho, psnr_latest, self.psnr_cap)
    }

    /// Offloading objective for a tracking budget of `rho` frames.
    pub fn objective(
        &self,
        scene: &SceneModel,
        pref: &OffloadPreference,
        rho: u32,
        psnr_latest: f64,
    ) -> f64 {
        let energy = (self.e_obj + self.e_trk * rho as f64) / (1.0 + rho as f64);
        pref.theta1 * energy - pref.theta2 * self.predict_iou(scene, rho, psnr_latest)
    }

    /// Exhaustive argmin over `0..=rho_max`; ties go to the smaller budget.
    pub fn solve_rho(&self, scene: &SceneModel, pref: &OffloadPreference, psnr_latest: f64) -> u32 {
        let mut best = (0, self.objective(scene, pref, 0, psnr_latest));
        for rho in 1..=self.rho_max {
            let j = self.objective(scene, pref, rho, psnr_latest);
            if j < best.1 {
                best = (rho, j);
            }
        }
        best.0
    }

    /// Advances one camera frame and returns the action for the next frame.
    ///
    /// On a detection result with no pending budget the rate estimate is
    /// refreshed and a new budget solved; otherwise the pending budget counts
    /// down. Between two detections exactly `rho` frames are tracked.
    pub fn step(
        &mut self,
        scene: &SceneModel,
        pref: &OffloadPreference,
        detection_arrived: bool,
        psnr_latest: f64,
    ) -> Action {
        if self.rho > 0 {
            self.observe(psnr_latest);
            self.rho -= 1;
            return if self.rho == 0 {
                Action::Detect
            } else {
                Action::Track
            };
        }
        if !detection_arrived {
            return Action::Detect;
        }
        self.observe(psnr_latest);
        self.v_bar = self.scene_rate().unwrap_or(0.0);
        self.rho = self.solve_rho(scene, pref, psnr_latest);
        if self.rho == 0 {
            Action::Detect
        } else {
            Action::Track
        }
    }
}
