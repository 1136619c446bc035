//! Declarative scenario configuration (TOML text file with nested sections),
//! with validation errors naming the offending key.

use crate::constitutive::{PoroMaterial, SolidMaterial};
use crate::error::{io_err, Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ScenarioConfig {
    /// "leakage" or "stamp".
    pub scenario: String,
    #[serde(default)]
    pub geometry: GeometryConfig,
    pub materials: MaterialsConfig,
    #[serde(default)]
    pub loads: LoadsConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// Domain length (leakage: mm, stamp: m).
    pub l: f64,
    /// Foundation height.
    pub h: f64,
    /// Poroelastic layer height.
    pub delta: f64,
    /// Upper-body width (leakage) / stamp height and width (stamp).
    pub a: f64,
    /// Fluid region top.
    pub b: f64,
    /// Left fluid column width / stamp offset.
    pub c: f64,
    /// Stamp face diameter (stamp scenario only).
    pub d: f64,
    /// Initial gap between stamp face edge and layer top (stamp only).
    pub g: f64,
    pub nx_layer: usize,
    pub ny_layer: usize,
    pub ny_foundation: usize,
    pub nx_upper: usize,
    pub ny_upper: usize,
    pub nx_fluid: usize,
    pub ny_fluid: usize,
    /// Optional directory of pre-built plain-text meshes overriding the
    /// structured generators (see the mesh file grammar).
    pub mesh_dir: Option<String>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            l: 0.0,
            h: 0.0,
            delta: 0.0,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            g: 0.0,
            nx_layer: 0,
            ny_layer: 0,
            ny_foundation: 0,
            nx_upper: 0,
            ny_upper: 0,
            nx_fluid: 0,
            ny_fluid: 0,
            mesh_dir: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct MaterialsConfig {
    pub solid1: SolidMaterial,
    pub solid2: SolidMaterial,
    pub poro: PoroMaterial,
    pub fluid: FluidMaterialConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct FluidMaterialConfig {
    pub rho: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct LoadsConfig {
    /// Fluid traction ramp: linear 0 -> fluid_max over [0, fluid_ramp_end]
    /// (leakage) or [fluid_ramp_start, fluid_ramp_end] (stamp).
    pub fluid_max: f64,
    pub fluid_ramp_start: f64,
    pub fluid_ramp_end: f64,
    /// Solid stress plateaus (leakage staircase) or ramp maximum (stamp).
    pub solid_levels: Vec<f64>,
    /// Plateau duration of the staircase.
    pub solid_plateau: f64,
    /// Stamp: solid ramp end time (ramp starts at 0).
    pub solid_ramp_end: f64,
    pub solid_max: f64,
}

impl Default for LoadsConfig {
    fn default() -> Self {
        Self {
            fluid_max: 0.0,
            fluid_ramp_start: 0.0,
            fluid_ramp_end: 1.0,
            solid_levels: Vec::new(),
            solid_plateau: 1.0,
            solid_ramp_end: 1.0,
            solid_max: 0.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct TimeConfig {
    pub theta: f64,
    /// Either a constant dt or a (start, dt) schedule.
    pub dt: f64,
    pub dt_schedule: Vec<(f64, f64)>,
    pub t_end: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            dt: 0.05,
            dt_schedule: Vec::new(),
            t_end: 1.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct NumericsConfig {
    pub gamma: f64,
    pub gamma_n: f64,
    pub gamma_t: f64,
    /// 0 means "derive from 100 mu delta / K0".
    pub gamma_p: f64,
    /// 0 means "derive from E^P / delta".
    pub c_n: f64,
    pub eps: f64,
    pub max_newton: usize,
    pub max_active_set_cycles: usize,
    pub max_bisections: usize,
    /// 0 means "derive from 1e-3 * min element size".
    pub geometry_tol: f64,
    pub island_threshold: f64,
    pub eps_area: f64,
    pub ghost_gamma_v: f64,
    pub ghost_gamma_p: f64,
    pub saffman: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            gamma_n: 0.05,
            gamma_t: 0.005,
            gamma_p: 0.0,
            c_n: 0.0,
            eps: 1e-8,
            max_newton: 25,
            max_active_set_cycles: 10,
            max_bisections: 2,
            geometry_tol: 0.0,
            island_threshold: 0.3,
            eps_area: 1e-6,
            ghost_gamma_v: 0.1,
            ghost_gamma_p: 0.1,
            saffman: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: String,
    /// Field snapshots every n accepted steps (0 disables).
    pub vtk_every: usize,
    pub qoi: bool,
    /// Dump cut geometry polygon soup at every geometry refresh.
    pub debug_cut: bool,
    /// Checkpoint file written on abort and at the end.
    pub checkpoint: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            vtk_every: 0,
            qoi: true,
            debug_cut: false,
            checkpoint: true,
        }
    }
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_str_named(&text, &path.display().to_string())
    }

    pub fn from_str_named(text: &str, origin: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            Error::Config(format!("{origin}: {e}"))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.scenario.as_str() {
            "leakage" | "stamp" => {}
            other => {
                return Err(Error::Config(format!(
                    "scenario must be 'leakage' or 'stamp', got '{other}'"
                )))
            }
        }
        let g = &self.geometry;
        for (name, v) in [
            ("geometry.l", g.l),
            ("geometry.h", g.h),
            ("geometry.delta", g.delta),
            ("geometry.a", g.a),
            ("geometry.b", g.b),
            ("geometry.c", g.c),
        ] {
            if v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("geometry.nx_layer", g.nx_layer),
            ("geometry.ny_layer", g.ny_layer),
            ("geometry.ny_foundation", g.ny_foundation),
            ("geometry.nx_upper", g.nx_upper),
            ("geometry.ny_upper", g.ny_upper),
            ("geometry.nx_fluid", g.nx_fluid),
            ("geometry.ny_fluid", g.ny_fluid),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        self.materials.solid1.validate()?;
        self.materials.solid2.validate()?;
        self.materials.poro.validate()?;
        if self.materials.fluid.rho < 0.0 || self.materials.fluid.mu <= 0.0 {
            return Err(Error::Config("materials.fluid needs rho >= 0, mu > 0".into()));
        }
        if !(self.time.theta > 0.0 && self.time.theta <= 1.0) {
            return Err(Error::Config(format!(
                "time.theta = {} outside (0, 1]",
                self.time.theta
            )));
        }
        if self.time.t_end <= 0.0 || (self.time.dt <= 0.0 && self.time.dt_schedule.is_empty()) {
            return Err(Error::Config("time.t_end and time.dt must be positive".into()));
        }
        if self.scenario == "leakage" && self.loads.solid_levels.is_empty() {
            return Err(Error::Config(
                "loads.solid_levels required for the leakage scenario".into(),
            ));
        }
        Ok(())
    }

    pub fn resolved_gamma_p(&self) -> f64 {
        if self.numerics.gamma_p > 0.0 {
            self.numerics.gamma_p
        } else {
            self.materials.poro.k0 / (100.0 * self.materials.fluid.mu * self.geometry.delta)
        }
    }

    pub fn resolved_c_n(&self) -> f64 {
        if self.numerics.c_n > 0.0 {
            self.numerics.c_n
        } else {
            self.materials.poro.e_mod / self.geometry.delta
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }
}

/// Built-in leakage configuration matching the common setup (mm, Pa, s units;
/// densities in Pa s^2/mm^2).
pub fn default_leakage_config() -> ScenarioConfig {
    ScenarioConfig {
        scenario: "leakage".into(),
        geometry: GeometryConfig {
            l: 10.0,
            h: 1.0,
            delta: 0.1,
            a: 5.0,
            b: 4.0,
            c: 2.5,
            d: 0.0,
            g: 0.0,
            nx_layer: 64,
            ny_layer: 3,
            ny_foundation: 2,
            nx_upper: 32,
            ny_upper: 10,
            nx_fluid: 8,
            ny_fluid: 10,
            mesh_dir: None,
        },
        materials: MaterialsConfig {
            solid1: SolidMaterial {
                e_mod: 2.3e6,
                nu: 0.49,
                rho0: 1.0e-3,
            },
            solid2: SolidMaterial {
                e_mod: 2.3e9,
                nu: 0.3,
                rho0: 1.0e-3,
            },
            poro: PoroMaterial {
                e_mod: 0.25e6,
                nu: 0.0,
                c_tilde: 0.25e6,
                alpha: 8.0,
                kappa_vol: 0.8e6,
                eta_pen: 1.0e3,
                phi0: 0.5,
                k0: 4.6e-4,
                alpha_bj: 1.0,
                rho0_solid: 1.0e-3,
            },
            fluid: FluidMaterialConfig {
                rho: 1.0e-3,
                mu: 1.0e-3,
            },
        },
        loads: LoadsConfig {
            fluid_max: 1.0e4,
            fluid_ramp_start: 0.0,
            fluid_ramp_end: 5.0,
            solid_levels: vec![1.5e4, 4.5e4, 7.5e4, 1.05e5, 1.35e5, 1.65e5, 1.95e5],
            solid_plateau: 1.0,
            solid_ramp_end: 0.0,
            solid_max: 0.0,
        },
        time: TimeConfig {
            theta: 1.0,
            dt: 0.05,
            dt_schedule: Vec::new(),
            t_end: 12.0,
        },
        numerics: NumericsConfig::default(),
        output: OutputConfig::default(),
    }
}

/// Built-in stamp configuration (m, Pa, s, kg/m^3 units).
pub fn default_stamp_config() -> ScenarioConfig {
    ScenarioConfig {
        scenario: "stamp".into(),
        geometry: GeometryConfig {
            l: 10.0,
            h: 1.0,
            delta: 0.1,
            a: 5.0,
            b: 4.0,
            c: 2.5,
            d: 100.0,
            g: 0.5,
            nx_layer: 40,
            ny_layer: 3,
            ny_foundation: 2,
            nx_upper: 16,
            ny_upper: 8,
            nx_fluid: 34,
            ny_fluid: 12,
            mesh_dir: None,
        },
        materials: MaterialsConfig {
            solid1: SolidMaterial {
                e_mod: 2.0e4,
                nu: 0.3,
                rho0: 1.0,
            },
            solid2: SolidMaterial {
                e_mod: 2.0e6,
                nu: 0.3,
                rho0: 1.0,
            },
            poro: PoroMaterial {
                e_mod: 1.0e4,
                nu: 0.0,
                c_tilde: 0.0,
                alpha: 1.0,
                kappa_vol: 1.0e6,
                eta_pen: 1.0,
                phi0: 0.5,
                k0: 1.0e-2,
                alpha_bj: 1.0,
                rho0_solid: 1.0,
            },
            fluid: FluidMaterialConfig { rho: 1.0, mu: 1.0 },
        },
        loads: LoadsConfig {
            fluid_max: 2.02e3,
            fluid_ramp_start: 2.0,
            fluid_ramp_end: 4.0,
            solid_levels: Vec::new(),
            solid_plateau: 0.0,
            solid_ramp_end: 1.0,
            solid_max: 2.0e3,
        },
        time: TimeConfig {
            theta: 1.0,
            dt: 0.1,
            dt_schedule: vec![(0.0, 0.1), (0.3, 0.01), (1.5, 0.1), (2.0, 0.01), (4.8, 0.1)],
            t_end: 6.0,
        },
        numerics: NumericsConfig::default(),
        output: OutputConfig::default(),
    }
}
