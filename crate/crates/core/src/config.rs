//! Run configuration shared by the CLI commands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Experiment constants and tolerances. Defaults follow the reference
/// configuration: `E=7, F=5, K=128, M=5, N=2, P=64, C=512, S=1, T=1, H_z=4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// control rows (u / vehicle-forward)
    #[serde(alias = "E")]
    pub e: usize,
    /// control columns (v / lateral)
    #[serde(alias = "F")]
    pub f: usize,
    /// samples per present class
    #[serde(alias = "K")]
    pub k: usize,
    /// semantic class count
    #[serde(alias = "M")]
    pub m: usize,
    /// attention iterations
    #[serde(alias = "N")]
    pub n: usize,
    /// spatial features per image
    #[serde(alias = "P")]
    pub p: usize,
    /// feature dimensionality
    #[serde(alias = "C")]
    pub c: usize,
    /// sensor count
    #[serde(alias = "S")]
    pub s: usize,
    /// observed timesteps
    #[serde(alias = "T")]
    pub t: usize,
    /// prediction horizon, carried as a data-model field only
    #[serde(alias = "H_z")]
    pub h_z: usize,
    /// edge-decay length for sampling, cells
    pub tau: f64,
    pub seed: u64,
    /// vehicle speed fed to the stub encoder, m/s
    pub speed: f64,
    /// projected-gradient tolerance for inversion
    pub tol: f64,
    pub max_iter: usize,
    /// Gauss-Legendre order per subinterval
    pub quad_order: usize,
    /// coverage bins per axis
    pub bins: usize,
    /// loss weights
    pub eta_pc: f64,
    pub eta_off: f64,
    pub eta_ce: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            e: 7,
            f: 5,
            k: 128,
            m: 5,
            n: 2,
            p: 64,
            c: 512,
            s: 1,
            t: 1,
            h_z: 4,
            tau: crate::sampler::DEFAULT_TAU,
            seed: 0,
            speed: 0.0,
            tol: 1e-10,
            max_iter: 100,
            quad_order: crate::arclength::DEFAULT_QUAD_ORDER,
            bins: 4,
            eta_pc: 1.0,
            eta_off: 1.0,
            eta_ce: 1.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("e", self.e),
            ("f", self.f),
            ("k", self.k),
            ("m", self.m),
            ("n", self.n),
            ("p", self.p),
            ("c", self.c),
            ("s", self.s),
            ("t", self.t),
            ("h_z", self.h_z),
            ("max_iter", self.max_iter),
            ("quad_order", self.quad_order),
            ("bins", self.bins),
        ] {
            if value == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be ≥ 1")));
            }
        }
        if !(self.tau > 0.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tau and tol must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)
            .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
