//! Run configuration: `key = value` files with `#` comments, validated into
//! the system, grid, solver and planner settings used by every subcommand.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use quasistat_core::{ContactPendulum, LinearSpringPendulum, LiftConfig, PotentialSystem, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    LinearPendulum,
    ContactPendulum,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemKind::LinearPendulum => write!(f, "linear-pendulum"),
            SystemKind::ContactPendulum => write!(f, "contact-pendulum"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemKind,
    // Shared physical parameters.
    pub l0: f64,
    pub mg: f64,
    // Linear pendulum.
    pub k_c: f64,
    // Contact pendulum (Table-style parameters).
    pub w0: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub eps: f64,
    pub d0: Option<f64>,
    // Control grid.
    pub grid_min_x: f64,
    pub grid_max_x: f64,
    pub grid_min_y: f64,
    pub grid_max_y: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub diagonals: bool,
    // Solver.
    pub tol: f64,
    pub max_iter: usize,
    pub crit_threshold: f64,
    pub dedup_radius: f64,
    pub seed_count: usize,
    // Planner.
    pub match_threshold: Option<f64>,
    pub switch_threshold: Option<f64>,
    pub switch_penalty: f64,
    pub symmetric_weights: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::LinearPendulum,
            l0: 1.0,
            mg: 10.0,
            k_c: 1.0,
            w0: 0.1,
            k_min: 1.0,
            k_max: 1e4,
            eps: 0.1,
            d0: None,
            grid_min_x: -1.5,
            grid_max_x: 1.5,
            grid_min_y: -1.5,
            grid_max_y: 1.5,
            grid_nx: 31,
            grid_ny: 31,
            diagonals: false,
            tol: 1e-10,
            max_iter: 200,
            crit_threshold: 1e-8,
            dedup_radius: 1e-6,
            seed_count: 16,
            match_threshold: None,
            switch_threshold: None,
            switch_penalty: 0.0,
            symmetric_weights: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::from_str(&text)
    }

    pub fn build_system(&self) -> Result<Box<dyn PotentialSystem>> {
        match self.system {
            SystemKind::LinearPendulum => Ok(Box::new(
                LinearSpringPendulum::new(self.l0, self.mg, self.k_c)
                    .map_err(|e| anyhow::anyhow!("{e}"))?,
            )),
            SystemKind::ContactPendulum => {
                let mut sys =
                    ContactPendulum::new(self.l0, self.w0, self.mg, self.k_min, self.k_max, self.eps)
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                if let Some(d0) = self.d0 {
                    sys = sys.with_d0(d0).map_err(|e| anyhow::anyhow!("{e}"))?;
                }
                Ok(Box::new(sys))
            }
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            crit_threshold: self.crit_threshold,
            dedup_radius: self.dedup_radius,
        }
    }

    pub fn lift(&self) -> LiftConfig {
        LiftConfig {
            solver: self.solver(),
            seed_count: self.seed_count,
            match_threshold: self.match_threshold,
            switch_threshold: self.switch_threshold,
            switch_penalty: self.switch_penalty,
            symmetric_weights: self.symmetric_weights,
        }
    }

    pub fn bounds(&self) -> [(f64, f64); 2] {
        [
            (self.grid_min_x, self.grid_max_x),
            (self.grid_min_y, self.grid_max_y),
        ]
    }

    pub fn resolution(&self) -> [usize; 2] {
        [self.grid_nx, self.grid_ny]
    }

    fn validate(&self) -> Result<()> {
        // Constructing the system exercises all of its parameter checks.
        self.build_system()?;
        if !(self.tol > 0.0) {
            bail!("tol must be positive");
        }
        if self.max_iter == 0 {
            bail!("max_iter must be at least 1");
        }
        if !(self.crit_threshold > 0.0) || !(self.dedup_radius > 0.0) {
            bail!("crit_threshold and dedup_radius must be positive");
        }
        if self.seed_count == 0 {
            bail!("seed_count must be at least 1");
        }
        if self.grid_nx == 0 || self.grid_ny == 0 {
            bail!("grid resolution must be at least 1 per axis");
        }
        if self.switch_penalty < 0.0 {
            bail!("switch_penalty must be nonnegative");
        }
        for opt in [self.match_threshold, self.switch_threshold] {
            if let Some(v) = opt {
                if !(v > 0.0) {
                    bail!("thresholds must be positive when given");
                }
            }
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = anyhow::Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected 'key = value', got {raw:?}", lineno + 1);
            };
            let key = key.trim();
            let value = value.trim();
            apply_key(&mut cfg, key, value)
                .with_context(|| format!("line {}: key {key:?}", lineno + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn apply_key(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let float = || -> Result<f64> {
        value
            .parse::<f64>()
            .with_context(|| format!("not a number: {value:?}"))
    };
    let uint = || -> Result<usize> {
        value
            .parse::<usize>()
            .with_context(|| format!("not a nonnegative integer: {value:?}"))
    };
    let boolean = || -> Result<bool> {
        match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => bail!("not a boolean: {value:?}"),
        }
    };
    match key {
        "system" => {
            cfg.system = match value {
                "linear-pendulum" => SystemKind::LinearPendulum,
                "contact-pendulum" => SystemKind::ContactPendulum,
                _ => bail!("unknown system {value:?} (expected linear-pendulum or contact-pendulum)"),
            }
        }
        "l0" | "L0" => cfg.l0 = float()?,
        "w0" | "W0" => cfg.w0 = float()?,
        "mg" => cfg.mg = float()?,
        "k_c" => cfg.k_c = float()?,
        "k_min" => cfg.k_min = float()?,
        "k_max" => cfg.k_max = float()?,
        "eps" => cfg.eps = float()?,
        "d0" => cfg.d0 = Some(float()?),
        "grid_min_x" => cfg.grid_min_x = float()?,
        "grid_max_x" => cfg.grid_max_x = float()?,
        "grid_min_y" => cfg.grid_min_y = float()?,
        "grid_max_y" => cfg.grid_max_y = float()?,
        "grid_nx" => cfg.grid_nx = uint()?,
        "grid_ny" => cfg.grid_ny = uint()?,
        "diagonals" => cfg.diagonals = boolean()?,
        "tol" => cfg.tol = float()?,
        "max_iter" => cfg.max_iter = uint()?,
        "crit_threshold" => cfg.crit_threshold = float()?,
        "dedup_radius" => cfg.dedup_radius = float()?,
        "seed_count" => cfg.seed_count = uint()?,
        "match_threshold" => cfg.match_threshold = Some(float()?),
        "switch_threshold" => cfg.switch_threshold = Some(float()?),
        "switch_penalty" => cfg.switch_penalty = float()?,
        "symmetric_weights" => cfg.symmetric_weights = boolean()?,
        _ => bail!("unknown configuration key"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_style_config() {
        let text = "\
# contact model
system = contact-pendulum
L0 = 1.0
W0 = 0.1
mg = 10
k_min = 1
k_max = 1e4
eps = 0.1
grid_nx = 31  # per-axis resolution
grid_ny = 31
";
        let cfg: RunConfig = text.parse().unwrap();
        assert_eq!(cfg.system, SystemKind::ContactPendulum);
        assert_eq!(cfg.k_max, 1e4);
        assert_eq!(cfg.grid_nx, 31);
        assert!(cfg.build_system().is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!("bogus = 1".parse::<RunConfig>().is_err());
        assert!("tol = fast".parse::<RunConfig>().is_err());
        assert!("tol = -1".parse::<RunConfig>().is_err());
        assert!("system = pendulum".parse::<RunConfig>().is_err());
        assert!("max_iter = 0".parse::<RunConfig>().is_err());
    }

    #[test]
    fn empty_config_is_default() {
        let cfg: RunConfig = "".parse().unwrap();
        assert_eq!(cfg, RunConfig::default());
    }
}
