//! Scenario files: a wall, a resolution, run controls and the checks to
//! evaluate on the result.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use frontlab::barrier::Variant;
use frontlab::dynamics::{Initializer, RunParams, Verdict};
use frontlab::geometry::{ObstacleSpec, Wall};
use serde::{Deserialize, Serialize};

/// Openings must span at least this many cells, solid parts at least one.
pub const MIN_OPENING_CELLS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObstacleSource {
    Inline(ObstacleSpec),
    /// Path to a wall file, relative to the scenario file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub obstacle: ObstacleSource,
    /// Grid spacing h; overrides `run.h`.
    pub resolution: f64,
    #[serde(default)]
    pub run: RunParams,
    #[serde(default)]
    pub initializer: Initializer,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<Check>,
}

/// Evenly spaced slide positions `from, from + step, …, ≤ to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl Span {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step + 1e-9).floor().max(0.0) as usize;
        (0..=n).map(|k| self.from + k as f64 * self.step).collect()
    }
}

fn both_variants() -> Vec<Variant> {
    vec![Variant::Constrained, Variant::Cylinder]
}

fn dominance_tol() -> f64 {
    1e-3
}

fn monotone_tol() -> f64 {
    1e-12
}

fn universality_tol() -> f64 {
    5e-2
}

fn agreement_tol() -> f64 {
    5e-2
}

fn el_tol() -> f64 {
    1e-5
}

fn min_v_bar() -> f64 {
    0.95
}

fn stability() -> f64 {
    0.2
}

fn samples() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// The limit profile's verdict.
    Verdict { expect: Verdict },
    /// Most negative per-step increment of the entire-solution run.
    Monotone {
        #[serde(default = "monotone_tol")]
        tol: f64,
    },
    /// Front speed over the part of the run where the front is in
    /// `[from_x, to_x]`, against the wave speed.
    FrontSpeed { from_x: f64, to_x: f64, tol: f64 },
    /// Blocking barriers on the wall's slab, each a certificate dominating
    /// the run at every recorded time.
    Certificate {
        #[serde(default = "both_variants")]
        variants: Vec<Variant>,
        #[serde(default = "el_tol")]
        el_tol: f64,
        #[serde(default = "agreement_tol")]
        agreement: f64,
        #[serde(default = "dominance_tol")]
        dominance: f64,
    },
    /// The reservoir barrier V: certificate, v̄ ≤ V + dominance, cavity mean
    /// of v̄ ≤ δ.
    Reservoir {
        #[serde(default = "dominance_tol")]
        dominance: f64,
    },
    /// Ψ^P and H(x₁) runs end within `tol` of v̄.
    Universality {
        point: [f64; 2],
        #[serde(default = "universality_tol")]
        tol: f64,
    },
    SlideBubble { path: Vec<[f64; 2]> },
    /// sup |D^λ| ≤ ν (default: no cell), and |D^λ| nondecreasing within h².
    SlideRho {
        delta_f: f64,
        lambdas: Span,
        #[serde(default)]
        nu: Option<f64>,
    },
    SlideW { delta_f: f64, lambdas: Span },
    MinVBar {
        #[serde(default = "min_v_bar")]
        min: f64,
    },
    /// Clearance of the tunnel against R₀.
    Clearance,
    BladeFlux { max: f64 },
    /// Poincaré ratio of random small-support fields at h and h/2.
    Poincare {
        #[serde(default = "samples")]
        count: usize,
        #[serde(default = "stability")]
        stability: f64,
    },
}

impl Check {
    pub fn label(&self) -> &'static str {
        match self {
            Check::Verdict { .. } => "verdict",
            Check::Monotone { .. } => "monotone",
            Check::FrontSpeed { .. } => "front_speed",
            Check::Certificate { .. } => "certificate",
            Check::Reservoir { .. } => "reservoir",
            Check::Universality { .. } => "universality",
            Check::SlideBubble { .. } => "slide_bubble",
            Check::SlideRho { .. } => "slide_rho",
            Check::SlideW { .. } => "slide_w",
            Check::MinVBar { .. } => "min_v_bar",
            Check::Clearance => "clearance",
            Check::BladeFlux { .. } => "blade_flux",
            Check::Poincare { .. } => "poincare",
        }
    }
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub h: Option<f64>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub seed: Option<u64>,
}

/// A scenario with its wall resolved and overrides applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub name: String,
    pub file: Option<PathBuf>,
    pub spec: ObstacleSpec,
    pub params: RunParams,
    pub initializer: Initializer,
    pub seed: u64,
    pub checks: Vec<Check>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    // serde_json errors carry line and column.
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Resolves the wall (relative to `base`), applies `ov` and validates.
    pub fn load(self, base: Option<&Path>, ov: Overrides) -> Result<Loaded> {
        let spec = match self.obstacle {
            ObstacleSource::Inline(spec) => spec,
            ObstacleSource::File(rel) => {
                let path = base.map_or(rel.clone(), |b| b.join(&rel));
                if !path.is_file() {
                    bail!("wall file {} does not exist", path.display());
                }
                read_json(&path)?
            }
        };
        spec.validate()?;
        let mut params = self.run;
        params.h = ov.h.unwrap_or(self.resolution);
        if ov.dt.is_some() {
            params.dt = ov.dt;
        }
        if let Some(t) = ov.t_max {
            params.t_max = t;
        }
        if !(params.h > 0.0) {
            bail!("resolution must be positive, got {}", params.h);
        }
        check_resolution(&spec, params.h)?;
        Ok(Loaded {
            name: self.name,
            file: None,
            spec,
            params,
            initializer: self.initializer,
            seed: ov.seed.unwrap_or(self.seed),
            checks: self.checks,
        })
    }
}

/// Reads, resolves and validates a scenario file.
pub fn load_file(path: &Path, ov: Overrides) -> Result<Loaded> {
    let s = Scenario::from_file(path)?;
    let mut loaded = s.load(path.parent(), ov).with_context(|| format!("in {}", path.display()))?;
    loaded.file = Some(path.to_path_buf());
    Ok(loaded)
}

/// Narrowest opening and thinnest solid part of a wall, where defined.
fn feature_sizes(wall: &Wall) -> (Option<f64>, Option<f64>) {
    match wall {
        Wall::Empty | Wall::ConvexBlock { .. } => (None, None),
        Wall::SlabWithHoles { hole_rects, .. } => {
            let open = hole_rects.iter().map(|r| (r.x1 - r.x0).min(r.y1 - r.y0)).reduce(f64::min);
            (open, None)
        }
        Wall::PeriodicSlits { thickness, slit_width, .. } => (Some(*slit_width), Some(*thickness)),
        Wall::ParallelBlades { blade_thickness, gap, .. } => (Some(*gap), Some(*blade_thickness)),
        Wall::Debris { disk_radius, slab, .. } => {
            (slab.map(|s| s.tunnel[1] - s.tunnel[0]), Some(2.0 * disk_radius))
        }
        Wall::Reservoir { mouth_width, wall, .. } => (Some(*mouth_width), Some(*wall)),
    }
}

fn check_resolution(spec: &ObstacleSpec, h: f64) -> Result<()> {
    let (open, solid) = feature_sizes(&spec.wall);
    if let Some(w) = open {
        if w < MIN_OPENING_CELLS * h - 1e-9 {
            bail!("opening {w} spans fewer than {MIN_OPENING_CELLS} cells at h = {h}");
        }
    }
    if let Some(t) = solid {
        if t < h - 1e-9 {
            bail!("solid part {t} is thinner than one cell at h = {h}");
        }
    }
    Ok(())
}
