//! Scenario files: clients, bandwidth and preference sweeps, trace source.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aio::SceneModel;
use crate::energy::ClientSpec;
use crate::error::{Error, Result};
use crate::leaf::{self, SolverConfig};
use crate::profile::DeviceProfile;

pub const TEN_CLIENT_SCENARIO: &str = include_str!("../scenarios/ten_client.toml");
pub const MOTION_BLUR_SCENARIO: &str = include_str!("../scenarios/motion_blur_aio.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Leaf,
    FactLike,
    Mine,
    LeafAio,
    LeafFrugal,
    LeafOnly,
}

impl Algorithm {
    pub const ALLOCATORS: [Algorithm; 3] = [Algorithm::Leaf, Algorithm::FactLike, Algorithm::Mine];
    pub const OFFLOAD_POLICIES: [Algorithm; 3] = [
        Algorithm::LeafAio,
        Algorithm::LeafFrugal,
        Algorithm::LeafOnly,
    ];

    /// True for per-frame offloading policies, false for allocators.
    pub fn is_offload_policy(self) -> bool {
        Self::OFFLOAD_POLICIES.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Leaf => "LEAF",
            Algorithm::FactLike => "FACT_LIKE",
            Algorithm::Mine => "MINE",
            Algorithm::LeafAio => "LEAF_AIO",
            Algorithm::LeafFrugal => "LEAF_FRUGAL",
            Algorithm::LeafOnly => "LEAF_ONLY",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub fps: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    /// Latency bound, s. Defaults to twice the latency at `(f_max, s_min, b_max / K)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceSource {
    Synthetic {
        seed: u64,
        start: f64,
        length: usize,
        drift: f64,
        noise: f64,
    },
    PsnrFile {
        path: PathBuf,
    },
    PgmDir {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AioSettings {
    pub rho_max: u32,
    /// Exponential decay of the scene-rate weights, per frame.
    pub decay: f64,
    /// Frugal offloads when NCC to the last detected frame drops below this.
    pub ncc_threshold: f64,
    /// Frame intensity variance assumed when NCC is estimated from PSNR alone.
    pub ncc_reference_variance: f64,
    pub scene: SceneModel,
}

impl Default for AioSettings {
    fn default() -> Self {
        Self {
            rho_max: 120,
            decay: 0.1,
            ncc_threshold: 0.5,
            ncc_reference_variance: 2000.0,
            scene: SceneModel::motion_blur(),
        }
    }
}

fn default_lambda1() -> f64 {
    0.3
}

fn default_lambda2() -> f64 {
    1.8
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALLOCATORS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    #[serde(default = "default_lambda2")]
    pub lambda2: f64,
    /// Total bandwidth values to run, Mbps.
    pub b_max: Vec<f64>,
    /// `lambda2 / lambda1` ratios; empty means the configured preferences only.
    #[serde(default)]
    pub preference_sweep: Vec<f64>,
    /// `theta1 / theta2` ratios for offloading policies.
    #[serde(default)]
    pub offload_sweep: Vec<f64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSource>,
    #[serde(default)]
    pub aio: AioSettings,
    #[serde(default)]
    pub solver: SolverConfig,
    pub clients: Vec<ClientConfig>,
}

impl Scenario {
    /// Ten clients at the default preference, bandwidth 100..500 Mbps.
    pub fn ten_client() -> Self {
        Self::from_toml_str(TEN_CLIENT_SCENARIO).expect("bundled scenario is valid")
    }

    /// Ten clients on a seeded synthetic motion-blur trace.
    pub fn motion_blur() -> Self {
        Self::from_toml_str(MOTION_BLUR_SCENARIO).expect("bundled scenario is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Loads a scenario; relative trace paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::from_toml_str(&text)?;
        if let Some(TraceSource::PsnrFile { path: p } | TraceSource::PgmDir { path: p }) =
            &mut s.trace
        {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.clients.is_empty() {
            return bad("scenario has no clients".into());
        }
        if self.b_max.is_empty() {
            return bad("b_max list is empty".into());
        }
        if self.b_max.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return bad("b_max values must be > 0".into());
        }
        if self.algorithms.is_empty() {
            return bad("algorithms list is empty".into());
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return bad("lambda1 and lambda2 must be >= 0".into());
        }
        if self
            .preference_sweep
            .iter()
            .any(|r| !(*r >= 0.0) || !r.is_finite())
        {
            return bad("preference ratios must be finite and >= 0".into());
        }
        if self
            .offload_sweep
            .iter()
            .any(|r| !(*r > 0.0) || !r.is_finite())
        {
            return bad("offload ratios must be finite and > 0".into());
        }
        for (k, c) in self.clients.iter().enumerate() {
            if c.fps == 0 {
                return bad(format!("client {k}: fps must be > 0"));
            }
            if c.lambda1.is_some_and(|v| !(v >= 0.0)) || c.lambda2.is_some_and(|v| !(v >= 0.0)) {
                return bad(format!("client {k}: preferences must be >= 0"));
            }
            if c.l_max.is_some_and(|v| !(v > 0.0)) {
                return bad(format!("client {k}: l_max must be > 0"));
            }
        }
        let a = &self.aio;
        if !(a.decay >= 0.0 && a.ncc_reference_variance > 0.0)
            || !(-1.0..=1.0).contains(&a.ncc_threshold)
        {
            return bad("aio settings out of range".into());
        }
        if let Some(TraceSource::Synthetic { length, noise, .. }) = &self.trace {
            if *length < 3 || !(*noise >= 0.0) {
                return bad("synthetic trace needs length >= 3 and noise >= 0".into());
            }
        }
        self.solver.validate()
    }

    /// Ratios to run; the configured preference when no sweep is given.
    pub fn preference_points(&self) -> Vec<Option<f64>> {
        if self.preference_sweep.is_empty() {
            vec![None]
        } else {
            self.preference_sweep.iter().copied().map(Some).collect()
        }
    }

    pub fn offload_points(&self) -> Vec<f64> {
        if self.offload_sweep.is_empty() {
            vec![1.0]
        } else {
            self.offload_sweep.clone()
        }
    }

    /// Client specs at one sweep point. A preference ratio `r` overrides every
    /// client with `lambda1 = self.lambda1`, `lambda2 = r * self.lambda1`.
    pub fn client_specs(
        &self,
        profile: &DeviceProfile,
        b_max: f64,
        ratio: Option<f64>,
    ) -> Result<Vec<ClientSpec>> {
        let default_l_max = leaf::default_latency_bound(profile, self.clients.len(), b_max)?;
        self.clients
            .iter()
            .map(|c| {
                let (l1, l2) = match ratio {
                    Some(r) => (self.lambda1, r * self.lambda1),
                    None => (
                        c.lambda1.unwrap_or(self.lambda1),
                        c.lambda2.unwrap_or(self.lambda2),
                    ),
                };
                let spec = ClientSpec::new(c.fps, l1, l2, c.l_max.unwrap_or(default_l_max));
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        let s = Scenario::ten_client();
        assert_eq!(s.clients.len(), 10);
        let fps: Vec<u32> = s.clients.iter().map(|c| c.fps).collect();
        assert_eq!(fps, vec![9, 30, 16, 23, 14, 17, 13, 2, 19, 5]);
        assert_eq!(s.b_max, vec![100.0, 200.0, 300.0, 400.0, 500.0]);
        let m = Scenario::motion_blur();
        assert_eq!(m.offload_sweep, vec![0.5, 1.0, 2.0, 4.0, 7.0]);
        assert!(matches!(
            m.trace,
            Some(TraceSource::Synthetic { length: 360, .. })
        ));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALLOCATORS
            .iter()
            .chain(&Algorithm::OFFLOAD_POLICIES)
        {
            let text = serde_json::to_string(a).unwrap();
            assert_eq!(text, format!("\"{}\"", a.name()));
            assert_eq!(serde_json::from_str::<Algorithm>(&text).unwrap(), *a);
        }
    }

    #[test]
    fn toml_round_trip() {
        let s = Scenario::motion_blur();
        let back = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_invalid() {
        let mut s = Scenario::ten_client();
        s.clients.clear();
        assert!(s.validate().is_err());
        let mut s = Scenario::ten_client();
        s.b_max = vec![0.0];
        assert!(s.validate().is_err());
        let mut s = Scenario::ten_client();
        s.clients[0].fps = 0;
        assert!(s.validate().is_err());
        assert!(Scenario::from_toml_str("b_max = [1.0]\nclients = []\n").is_err());
    }

    #[test]
    fn preference_ratio_overrides_clients() {
        let p = DeviceProfile::bundled();
        let mut s = Scenario::ten_client();
        s.clients[0].lambda2 = Some(9.0);
        let base = s.client_specs(&p, 300.0, None).unwrap();
        assert_eq!(base[0].lambda2, 9.0);
        assert_eq!(base[1].lambda2, 1.8);
        let swept = s.client_specs(&p, 300.0, Some(10.0)).unwrap();
        assert!(swept
            .iter()
            .all(|c| c.lambda1 == 0.3 && (c.lambda2 - 3.0).abs() < 1e-15));
    }

    #[test]
    fn relative_trace_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("s.toml");
        std::fs::write(&file, "b_max = [10.0]\n[trace]\nkind = \"psnr_file\"\npath = \"t.txt\"\n[[clients]]\nfps = 5\n").unwrap();
        let s = Scenario::load(&file).unwrap();
        assert_eq!(
            s.trace,
            Some(TraceSource::PsnrFile {
                path: dir.path().join("t.txt")
            })
        );
    }
}
