//! Wall descriptions, their rasterization onto a uniform grid, and the
//! geometric functionals the propagation and blocking criteria are phrased in.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("fluid region splits into {0} components; the complement of the wall must be connected")]
    DisconnectedComplement(usize),
    #[error("solid cell at x1 = {x1} lies outside the slab [0, {m}]")]
    ObstacleOutsideSlab { x1: f64, m: f64 },
    #[error("extent {0} is not a whole number of cells of size {1}")]
    BadExtent(f64, f64),
    #[error("invalid obstacle: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateralBc {
    /// The strip height is one period of the wall.
    #[default]
    Periodic,
    /// Zero flux on y = 0 and y = height (a mirror-symmetric wall).
    Reflecting,
}

/// Half-open rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

/// Membership slack, in length units, for cell centres that sit exactly on
/// a boundary: lower edges are inside, upper edges outside.
const EDGE_TOL: f64 = 1e-9;

fn in_half_open(v: f64, lo: f64, hi: f64) -> bool {
    v > lo - EDGE_TOL && v < hi - EDGE_TOL
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        in_half_open(x, self.x0, self.x1) && in_half_open(y, self.y0, self.y1)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Slab with a tunnel, used to hold debris.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunnelSlab {
    pub a: f64,
    pub b: f64,
    /// Open rows `[y0, y1)` through the slab.
    pub tunnel: [f64; 2],
}

/// Lateral half-thickness `g(x₁)` of a block, piecewise linear through the
/// knots; the block is `{|y − center_y| < g(x₁)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockProfile {
    pub center_y: f64,
    pub knots: Vec<[f64; 2]>,
}

impl BlockProfile {
    fn half_width(&self, x: f64) -> Option<f64> {
        let first = self.knots.first()?;
        let last = self.knots.last()?;
        if !in_half_open(x, first[0], last[0]) {
            return None;
        }
        self.knots.windows(2).find(|w| x < w[1][0]).map(|w| {
            let s = (x - w[0][0]) / (w[1][0] - w[0][0]);
            w[0][1] + s * (w[1][1] - w[0][1])
        })
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if self.knots.len() < 2 {
            return Err(GeometryError::Invalid("block profile needs two knots".into()));
        }
        if self.knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(GeometryError::Invalid("block knots must increase in x1".into()));
        }
        if self.knots.iter().any(|k| k[1] < 0.0) {
            return Err(GeometryError::Invalid("block half-widths must be nonnegative".into()));
        }
        // Unimodal widths make every horizontal line meet the block once and
        // put the widest cross-section on a single vertical line.
        let peak = self
            .knots
            .iter()
            .enumerate()
            .max_by(|a, b| a.1[1].total_cmp(&b.1[1]))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let rising = self.knots[..=peak].windows(2).all(|w| w[1][1] >= w[0][1]);
        let falling = self.knots[peak..].windows(2).all(|w| w[1][1] <= w[0][1]);
        if !(rising && falling) {
            return Err(GeometryError::Invalid("block profile must be unimodal".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Wall {
    Empty,
    SlabWithHoles {
        a: f64,
        b: f64,
        hole_rects: Vec<Rect>,
    },
    /// Wall `[0, thickness)` with one slit per period, centred at `period/2`.
    PeriodicSlits {
        thickness: f64,
        slit_width: f64,
        period: f64,
    },
    /// `count` blades of length `blade_len` per period `count·(thickness + gap)`.
    ParallelBlades {
        blade_len: f64,
        blade_thickness: f64,
        gap: f64,
        count: usize,
    },
    Debris {
        disk_centers: Vec<[f64; 2]>,
        disk_radius: f64,
        #[serde(default)]
        slab: Option<TunnelSlab>,
    },
    ConvexBlock {
        profile: BlockProfile,
    },
    /// A walled box with a square cavity whose entrance channel crosses the
    /// left wall, so the mouth faces −x₁.
    Reservoir {
        mouth_width: f64,
        cavity_size: f64,
        entrance_len: f64,
        #[serde(default = "default_reservoir_wall")]
        wall: f64,
        #[serde(default)]
        x0: f64,
        center_y: f64,
    },
}

fn default_reservoir_wall() -> f64 {
    0.5
}

/// A wall inside the slab `0 ≤ x₁ ≤ M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    #[serde(flatten)]
    pub wall: Wall,
    #[serde(rename = "M")]
    pub m: f64,
}

/// The reservoir pieces in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirParts {
    /// Entrance channel; its left face is the mouth Γ.
    pub channel: Rect,
    pub cavity: Rect,
    pub outer: Rect,
}

impl ObstacleSpec {
    pub fn new(wall: Wall, m: f64) -> Self {
        Self { wall, m }
    }

    pub fn empty(m: f64) -> Self {
        Self { wall: Wall::Empty, m }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: &str| Err(GeometryError::Invalid(msg.into()));
        if !(self.m > 0.0) {
            return bad("M must be positive");
        }
        match &self.wall {
            Wall::PeriodicSlits { thickness, slit_width, period } => {
                if !(*thickness > 0.0 && *slit_width >= 0.0 && slit_width < period) {
                    return bad("slits need 0 ≤ width < period and positive thickness");
                }
            }
            Wall::ParallelBlades { blade_len, blade_thickness, gap, .. } => {
                if !(*blade_len > 0.0 && *blade_thickness >= 0.0 && *gap > 0.0) {
                    return bad("blades need positive length and gap");
                }
            }
            Wall::Debris { disk_radius, .. } if *disk_radius < 0.0 => {
                return bad("disk radius must be nonnegative");
            }
            Wall::ConvexBlock { profile } => profile.validate()?,
            Wall::Reservoir { mouth_width, cavity_size, entrance_len, wall, .. } => {
                if !(*mouth_width > 0.0 && mouth_width < cavity_size && *entrance_len > 0.0 && *wall > 0.0)
                {
                    return bad("reservoir needs 0 < mouth < cavity and positive walls");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Lateral period implied by the wall, if it has one.
    pub fn period(&self) -> Option<f64> {
        match &self.wall {
            Wall::PeriodicSlits { period, .. } => Some(*period),
            Wall::ParallelBlades { blade_thickness, gap, count, .. } => {
                Some(*count as f64 * (blade_thickness + gap))
            }
            _ => None,
        }
    }

    /// The wall's own slab `[a, b]` for hole measures and barriers.
    pub fn slab(&self) -> Option<(f64, f64)> {
        match &self.wall {
            Wall::SlabWithHoles { a, b, .. } => Some((*a, *b)),
            Wall::PeriodicSlits { thickness, .. } => Some((0.0, *thickness)),
            Wall::Debris { slab: Some(s), .. } => Some((s.a, s.b)),
            _ => None,
        }
    }

    pub fn reservoir_parts(&self) -> Option<ReservoirParts> {
        let Wall::Reservoir { mouth_width, cavity_size, entrance_len, wall, x0, center_y } =
            &self.wall
        else {
            return None;
        };
        let (w, s, l, t, cy) = (*mouth_width, *cavity_size, *entrance_len, *wall, *center_y);
        Some(ReservoirParts {
            channel: Rect { x0: *x0, x1: x0 + l, y0: cy - w / 2.0, y1: cy + w / 2.0 },
            cavity: Rect { x0: x0 + l, x1: x0 + l + s, y0: cy - s / 2.0, y1: cy + s / 2.0 },
            outer: Rect {
                x0: *x0,
                x1: x0 + l + s + t,
                y0: cy - s / 2.0 - t,
                y1: cy + s / 2.0 + t,
            },
        })
    }

    /// Whether the point belongs to the obstacle, for `y` in one lateral period.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match &self.wall {
            Wall::Empty => false,
            Wall::SlabWithHoles { a, b, hole_rects } => {
                in_half_open(x, *a, *b) && !hole_rects.iter().any(|r| r.contains(x, y))
            }
            Wall::PeriodicSlits { thickness, slit_width, period } => {
                let yy = y.rem_euclid(*period);
                let c = period / 2.0;
                in_half_open(x, 0.0, *thickness)
                    && !in_half_open(yy, c - slit_width / 2.0, c + slit_width / 2.0)
            }
            Wall::ParallelBlades { blade_len, blade_thickness, gap, count } => {
                let pitch = blade_thickness + gap;
                let yy = y.rem_euclid(*count as f64 * pitch);
                let k = (yy / pitch).floor();
                let lo = k * pitch + gap / 2.0;
                in_half_open(x, 0.0, *blade_len) && in_half_open(yy, lo, lo + blade_thickness)
            }
            Wall::Debris { disk_centers, disk_radius, slab } => {
                let in_disk = disk_centers.iter().any(|c| {
                    let (dx, dy) = (x - c[0], y - c[1]);
                    dx * dx + dy * dy < disk_radius * disk_radius
                });
                let in_slab = slab.is_some_and(|s| {
                    in_half_open(x, s.a, s.b) && !in_half_open(y, s.tunnel[0], s.tunnel[1])
                });
                in_disk || in_slab
            }
            Wall::ConvexBlock { profile } => profile
                .half_width(x)
                .is_some_and(|g| (y - profile.center_y).abs() < g - EDGE_TOL),
            Wall::Reservoir { .. } => {
                let p = self.reservoir_parts().expect("reservoir variant");
                p.outer.contains(x, y) && !p.cavity.contains(x, y) && !p.channel.contains(x, y)
            }
        }
    }
}

/// Region rasterized: `[x_min, x_max] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub height: f64,
}

/// Face bits in [`GridDomain::solid_faces`].
pub const EAST: u8 = 1;
pub const WEST: u8 = 2;
pub const NORTH: u8 = 4;
pub const SOUTH: u8 = 8;

/// Uniform cell grid over a strip, row-major (`j * nx + i`, `i` along x₁).
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub lateral_bc: LateralBc,
    /// World x₁ of the left face of column 0.
    pub x1_offset: f64,
    fluid: Vec<bool>,
    solid_faces: Vec<u8>,
}

fn cell_count(len: f64, h: f64) -> Result<usize, GeometryError> {
    let n = len / h;
    let r = n.round();
    if r < 1.0 || (n - r).abs() > 1e-6 {
        return Err(GeometryError::BadExtent(len, h));
    }
    Ok(r as usize)
}

impl GridDomain {
    /// All-fluid grid.
    pub fn open(h: f64, extent: Extent, lateral_bc: LateralBc) -> Result<Self, GeometryError> {
        let nx = cell_count(extent.x_max - extent.x_min, h)?;
        let ny = cell_count(extent.height, h)?;
        Ok(Self {
            h,
            nx,
            ny,
            lateral_bc,
            x1_offset: extent.x_min,
            fluid: vec![true; nx * ny],
            solid_faces: vec![0; nx * ny],
        })
    }

    /// Grid from an explicit fluid mask; checks connectivity.
    pub fn from_mask(
        h: f64,
        extent: Extent,
        lateral_bc: LateralBc,
        fluid: Vec<bool>,
    ) -> Result<Self, GeometryError> {
        let mut g = Self::open(h, extent, lateral_bc)?;
        if fluid.len() != g.fluid.len() {
            return Err(GeometryError::Invalid("mask size does not match extent".into()));
        }
        g.fluid = fluid;
        g.annotate();
        let parts = g.components();
        if parts != 1 {
            return Err(GeometryError::DisconnectedComplement(parts));
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn is_fluid(&self, idx: usize) -> bool {
        self.fluid[idx]
    }

    pub fn fluid_mask(&self) -> &[bool] {
        &self.fluid
    }

    /// Bits for the faces of a fluid cell that touch solid cells.
    pub fn solid_faces(&self, idx: usize) -> u8 {
        self.solid_faces[idx]
    }

    /// Unit normal pointing from the adjacent solid into the fluid cell.
    pub fn inward_normal(&self, idx: usize) -> Option<(f64, f64)> {
        let bits = self.solid_faces[idx];
        if bits == 0 {
            return None;
        }
        let mut n = (0.0f64, 0.0f64);
        if bits & EAST != 0 {
            n.0 -= 1.0;
        }
        if bits & WEST != 0 {
            n.0 += 1.0;
        }
        if bits & NORTH != 0 {
            n.1 -= 1.0;
        }
        if bits & SOUTH != 0 {
            n.1 += 1.0;
        }
        let len = (n.0 * n.0 + n.1 * n.1).sqrt();
        (len > 0.0).then(|| (n.0 / len, n.1 / len))
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x1_offset + (i as f64 + 0.5) * self.h
    }

    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.x1_offset + self.nx as f64 * self.h
    }

    pub fn extent(&self) -> Extent {
        Extent { x_min: self.x1_offset, x_max: self.x_max(), height: self.height() }
    }

    /// Column whose centre is nearest to `x`, if inside the grid.
    pub fn column_of(&self, x: f64) -> Option<usize> {
        let i = ((x - self.x1_offset) / self.h - 0.5).round();
        (i >= 0.0 && (i as usize) < self.nx).then_some(i as usize)
    }

    pub fn row_of(&self, y: f64) -> Option<usize> {
        let j = (y / self.h - 0.5).round();
        (j >= 0.0 && (j as usize) < self.ny).then_some(j as usize)
    }

    /// Neighbour across the north face, honouring the lateral condition.
    pub fn north(&self, j: usize) -> Option<usize> {
        match (self.lateral_bc, j + 1 < self.ny) {
            (_, true) => Some(j + 1),
            (LateralBc::Periodic, false) => Some(0),
            (LateralBc::Reflecting, false) => None,
        }
    }

    pub fn south(&self, j: usize) -> Option<usize> {
        match (self.lateral_bc, j > 0) {
            (_, true) => Some(j - 1),
            (LateralBc::Periodic, false) => Some(self.ny - 1),
            (LateralBc::Reflecting, false) => None,
        }
    }

    /// Fluid neighbours of a cell through open faces.
    pub fn neighbours(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = (idx % self.nx, idx / self.nx);
        let e = (i + 1 < self.nx).then(|| idx + 1);
        let w = (i > 0).then(|| idx - 1);
        let n = self.north(j).map(|jn| self.idx(i, jn));
        let s = self.south(j).map(|js| self.idx(i, js));
        [e, w, n, s].into_iter().flatten().filter(move |&k| k != idx && self.fluid[k])
    }

    fn annotate(&mut self) {
        let mut faces = vec![0u8; self.len()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let idx = self.idx(i, j);
                if !self.fluid[idx] {
                    continue;
                }
                let solid = |k: usize| !self.fluid[k];
                let mut bits = 0;
                if i + 1 < self.nx && solid(idx + 1) {
                    bits |= EAST;
                }
                if i > 0 && solid(idx - 1) {
                    bits |= WEST;
                }
                if self.north(j).is_some_and(|jn| solid(self.idx(i, jn))) {
                    bits |= NORTH;
                }
                if self.south(j).is_some_and(|js| solid(self.idx(i, js))) {
                    bits |= SOUTH;
                }
                faces[idx] = bits;
            }
        }
        self.solid_faces = faces;
    }

    /// Number of 4-connected fluid components.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut parts = 0;
        for start in 0..self.len() {
            if !self.fluid[start] || seen[start] {
                continue;
            }
            parts += 1;
            self.flood(start, &mut seen, |_| true);
        }
        parts
    }

    /// Marks everything reachable from `start` through fluid cells accepted
    /// by `admit`.
    fn flood(&self, start: usize, seen: &mut [bool], admit: impl Fn(usize) -> bool) {
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = queue.pop_front() {
            for n in self.neighbours(k) {
                if !seen[n] && admit(n) {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }

    pub fn fluid_count(&self) -> usize {
        self.fluid.iter().filter(|&&f| f).count()
    }

    pub fn solid_count(&self) -> usize {
        self.len() - self.fluid_count()
    }
}

/// Cell-centre rasterization of the wall on `extent`.
pub fn rasterize(
    spec: &ObstacleSpec,
    h: f64,
    extent: Extent,
    lateral_bc: LateralBc,
) -> Result<GridDomain, GeometryError> {
    spec.validate()?;
    let open = GridDomain::open(h, extent, lateral_bc)?;
    let mut fluid = vec![true; open.len()];
    for j in 0..open.ny {
        let y = open.y_center(j);
        for i in 0..open.nx {
            let x = open.x_center(i);
            if spec.contains(x, y) {
                if x < -EDGE_TOL || x > spec.m + EDGE_TOL {
                    return Err(GeometryError::ObstacleOutsideSlab { x1: x, m: spec.m });
                }
                fluid[open.idx(i, j)] = false;
            }
        }
    }
    GridDomain::from_mask(h, extent, lateral_bc, fluid)
}

/// Area of fluid cells with centres strictly inside the wall's slab, within
/// one lateral period when the wall has one.
pub fn hole_measure(spec: &ObstacleSpec, grid: &GridDomain) -> f64 {
    let Some((a, b)) = spec.slab() else { return 0.0 };
    let period = spec.period().unwrap_or(grid.height());
    let mut count = 0usize;
    for j in 0..grid.ny {
        if grid.y_center(j) >= period {
            continue;
        }
        for i in 0..grid.nx {
            let x = grid.x_center(i);
            if x > a && x < b && grid.is_fluid(grid.idx(i, j)) {
                count += 1;
            }
        }
    }
    count as f64 * grid.h * grid.h
}

/// Exact ∫|ν·e₁| over the blade boundaries in one period: only the two end
/// caps of each rectangle contribute.
pub fn blade_flux(spec: &ObstacleSpec) -> f64 {
    match &spec.wall {
        Wall::ParallelBlades { blade_thickness, count, .. } => {
            2.0 * blade_thickness * *count as f64
        }
        _ => 0.0,
    }
}

/// 1D squared distance transform (Felzenszwalb–Huttenlocher) in place.
fn edt_1d(f: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let src = f.to_vec();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let mut started = false;
    for q in 0..n {
        if !src[q].is_finite() {
            continue;
        }
        if !started {
            v[0] = q;
            started = true;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((src[q] + (q * q) as f64) - (src[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if !started {
        return;
    }
    let mut k = 0usize;
    for (q, out) in f.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *out = d * d + src[v[k]];
    }
}

/// Distance from every cell centre to the nearest solid cell, minus half a
/// cell (so it measures clearance to the solid boundary). Lateral images of
/// the solid are included. Infinite when there is no solid at all.
pub fn distance_to_solid(grid: &GridDomain) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    if grid.solid_count() == 0 {
        return vec![f64::INFINITY; grid.len()];
    }
    // Three stacked copies in y carry the lateral images.
    let rows = 3 * ny;
    let src_row = |r: usize| -> usize {
        let k = r / ny;
        let j = r % ny;
        match (grid.lateral_bc, k) {
            (LateralBc::Periodic, _) | (_, 1) => j,
            (LateralBc::Reflecting, _) => ny - 1 - j,
        }
    };
    let mut g = vec![f64::INFINITY; rows * nx];
    for r in 0..rows {
        let j = src_row(r);
        for i in 0..nx {
            if !grid.is_fluid(grid.idx(i, j)) {
                g[r * nx + i] = 0.0;
            }
        }
    }
    let mut col = vec![0.0; rows];
    for i in 0..nx {
        for r in 0..rows {
            col[r] = g[r * nx + i];
        }
        edt_1d(&mut col);
        for r in 0..rows {
            g[r * nx + i] = col[r];
        }
    }
    for r in 0..rows {
        edt_1d(&mut g[r * nx..(r + 1) * nx]);
    }
    let mut out = vec![0.0; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let d2 = g[(ny + j) * nx + i];
            out[grid.idx(i, j)] = if grid.is_fluid(grid.idx(i, j)) {
                (d2.sqrt() - 0.5) * grid.h
            } else {
                0.0
            };
        }
    }
    out
}

/// Largest ρ such that fluid cells with clearance ≥ ρ connect {x₁ < 0} to
/// {x₁ > M}. With no solid at all the half-height is reported.
pub fn tunnel_clearance(spec: &ObstacleSpec, grid: &GridDomain) -> f64 {
    let dist = distance_to_solid(grid);
    if grid.solid_count() == 0 {
        return grid.height() / 2.0;
    }
    let connects = |rho: f64| -> bool {
        let mut seen = vec![false; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                if grid.x_center(i) < 0.0 && grid.is_fluid(k) && dist[k] >= rho && !seen[k] {
                    grid.flood(k, &mut seen, |n| dist[n] >= rho);
                }
            }
        }
        (0..grid.len()).any(|k| seen[k] && grid.x_center(k % grid.nx) > spec.m)
    };
    let mut levels: Vec<f64> =
        dist.iter().zip(grid.fluid_mask()).filter(|(_, &f)| f).map(|(&d, _)| d).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.is_empty() || !connects(levels[0]) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    if connects(levels[hi]) {
        return levels[hi];
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if connects(levels[mid]) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    levels[lo]
}

/// Each grid row meets the solid in at most one run, and some column meets
/// every row that has solid cells. The grid form of directional convexity.
pub fn is_directionally_convex(grid: &GridDomain) -> bool {
    let mut occupied_rows = Vec::new();
    for j in 0..grid.ny {
        let solid: Vec<usize> =
            (0..grid.nx).filter(|&i| !grid.is_fluid(grid.idx(i, j))).collect();
        if solid.is_empty() {
            continue;
        }
        if solid.last().unwrap() - solid[0] + 1 != solid.len() {
            return false;
        }
        occupied_rows.push(j);
    }
    (0..grid.nx).any(|i| occupied_rows.iter().all(|&j| !grid.is_fluid(grid.idx(i, j))))
}
