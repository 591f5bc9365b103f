//! Random obstacle worlds: simplex-noise occupancy grids, their signed
//! distance fields, and the clutter filter.

mod edt;
mod noise;

pub use edt::squared_edt;
pub use noise::SimplexNoise;

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::robot::RobotModel;
use crate::rng::Rng;

/// Shared lattice geometry of occupancy grids and distance fields.
///
/// Cell `c` covers `[origin + c * voxel, origin + (c + 1) * voxel)`; its
/// center is the reference point for all distances. Axis 0 varies fastest
/// in the flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    pub shape: Vec<usize>,
    pub voxel_size: f64,
    pub origin: Vec<f64>,
}

impl GridGeometry {
    pub fn new(shape: Vec<usize>, voxel_size: f64, origin: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&shape.len()) {
            return config_err(format!("grid dimension must be 2 or 3, got {}", shape.len()));
        }
        if origin.len() != shape.len() {
            return Err(Error::Dimension {
                expected: shape.len(),
                got: origin.len(),
            });
        }
        if shape.contains(&0) {
            return config_err("grid extents must be positive");
        }
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return config_err("voxel_size must be positive");
        }
        Ok(Self {
            shape,
            voxel_size,
            origin,
        })
    }

    /// Geometry whose extent is centered on the coordinate origin.
    pub fn centered(shape: Vec<usize>, voxel_size: f64) -> Result<Self> {
        let origin = shape
            .iter()
            .map(|&n| -(n as f64) * voxel_size / 2.0)
            .collect();
        Self::new(shape, voxel_size, origin)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> Vec<f64> {
        self.shape
            .iter()
            .map(|&n| n as f64 * self.voxel_size)
            .collect()
    }

    pub fn max_extent(&self) -> f64 {
        self.extent().into_iter().fold(0.0, f64::max)
    }

    pub fn coords(&self, mut index: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for (a, &n) in self.shape.iter().enumerate() {
            c[a] = index % n;
            index /= n;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for a in (0..self.dim()).rev() {
            idx = idx * self.shape[a] + coords[a];
        }
        idx
    }

    /// World coordinates of a cell center; unused trailing axes are zero.
    pub fn center(&self, index: usize) -> [f64; 3] {
        let c = self.coords(index);
        let mut p = [0.0; 3];
        for a in 0..self.dim() {
            p[a] = self.origin[a] + (c[a] as f64 + 0.5) * self.voxel_size;
        }
        p
    }

    /// Index of the cell containing `x`, if inside the grid.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..self.dim() {
            let u = ((x[a] - self.origin[a]) / self.voxel_size).floor();
            if u < 0.0 || u >= self.shape[a] as f64 {
                return None;
            }
            c[a] = u as usize;
        }
        Some(self.index(&c[..self.dim()]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub geometry: GridGeometry,
    /// `true` marks an obstacle cell.
    pub cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(geometry: GridGeometry, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(Error::Dimension {
                expected: geometry.len(),
                got: cells.len(),
            });
        }
        Ok(Self { geometry, cells })
    }

    pub fn empty(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            cells: vec![false; n],
        }
    }

    pub fn obstacle_fraction(&self) -> f64 {
        self.cells.iter().filter(|&&c| c).count() as f64 / self.cells.len() as f64
    }

    /// Centers of all obstacle cells.
    pub fn obstacle_points(&self) -> Vec<[f64; 3]> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| self.geometry.center(i))
            .collect()
    }

    /// Rotates the grid by `quarter_turns * 90°` counter-clockwise about its
    /// center in the x-y plane. Requires equal x and y extents.
    pub fn rotated(&self, quarter_turns: u8) -> Result<Self> {
        let g = &self.geometry;
        if g.shape[0] != g.shape[1] {
            return Err(Error::Unsupported(
                "rotation needs equal x and y extents".into(),
            ));
        }
        let mut cells = self.cells.clone();
        let n = g.shape[0];
        for _ in 0..quarter_turns % 4 {
            let mut next = vec![false; cells.len()];
            for (i, &occupied) in cells.iter().enumerate() {
                let mut c = g.coords(i);
                let (x, y) = (c[0], c[1]);
                c[0] = n - 1 - y;
                c[1] = x;
                next[g.index(&c[..g.dim()])] = occupied;
            }
            cells = next;
        }
        Ok(Self {
            geometry: g.clone(),
            cells,
        })
    }
}

/// Real-valued distance per cell: positive in free space, negative inside
/// obstacles. Values are stored in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistanceField {
    pub geometry: GridGeometry,
    pub values: Vec<f32>,
}

impl SignedDistanceField {
    pub fn new(geometry: GridGeometry, values: Vec<f32>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::Dimension {
                expected: geometry.len(),
                got: values.len(),
            });
        }
        Ok(Self { geometry, values })
    }

    pub fn lookup(&self, x: &[f64]) -> f64 {
        self.interpolate(x, false).0
    }

    /// Interpolated value and its exact spatial gradient. The gradient is
    /// zero along axes where `x` lies outside the cell-center lattice.
    pub fn lookup_with_gradient(&self, x: &[f64]) -> (f64, [f64; 3]) {
        self.interpolate(x, true)
    }

    fn interpolate(&self, x: &[f64], want_grad: bool) -> (f64, [f64; 3]) {
        let g = &self.geometry;
        let d = g.dim();
        let mut base = 0usize;
        let mut frac = [0.0f64; 3];
        let mut step = [0usize; 3];
        let mut active = [false; 3];
        let mut stride = 1usize;
        for a in 0..d {
            let n = g.shape[a];
            let u = (x[a] - g.origin[a]) / g.voxel_size - 0.5;
            // `u > 0` here, so truncation is the floor.
            let (i0, f, act) = if n == 1 || !(u > 0.0) {
                (0, 0.0, false)
            } else if u >= (n - 1) as f64 {
                (n - 2, 1.0, false)
            } else {
                let i0 = (u as usize).min(n - 2);
                (i0, u - i0 as f64, true)
            };
            base += i0 * stride;
            frac[a] = f;
            step[a] = if n == 1 { 0 } else { stride };
            active[a] = act;
            stride *= n;
        }
        let v = |i: usize| self.values[i] as f64;
        let inv = 1.0 / g.voxel_size;
        let [fx, fy, fz] = frac;
        let [sx, sy, sz] = step;
        if d == 2 {
            let (v00, v10, v01, v11) = (v(base), v(base + sx), v(base + sy), v(base + sx + sy));
            let lo = v00 + fx * (v10 - v00);
            let hi = v01 + fx * (v11 - v01);
            let value = lo + fy * (hi - lo);
            let mut grad = [0.0; 3];
            if want_grad {
                if active[0] {
                    grad[0] = ((1.0 - fy) * (v10 - v00) + fy * (v11 - v01)) * inv;
                }
                if active[1] {
                    grad[1] = (hi - lo) * inv;
                }
            }
            return (value, grad);
        }
        let c = |o: usize| {
            let (a, b) = (v(base + o), v(base + o + sx));
            (a, b, a + fx * (b - a))
        };
        let (a00, b00, x00) = c(0);
        let (a10, b10, x10) = c(sy);
        let (a01, b01, x01) = c(sz);
        let (a11, b11, x11) = c(sy + sz);
        let y0 = x00 + fy * (x10 - x00);
        let y1 = x01 + fy * (x11 - x01);
        let value = y0 + fz * (y1 - y0);
        let mut grad = [0.0; 3];
        if want_grad {
            if active[0] {
                let e0 = (b00 - a00) + fy * ((b10 - a10) - (b00 - a00));
                let e1 = (b01 - a01) + fy * ((b11 - a11) - (b01 - a01));
                grad[0] = (e0 + fz * (e1 - e0)) * inv;
            }
            if active[1] {
                grad[1] = ((x10 - x00) + fz * ((x11 - x01) - (x10 - x00))) * inv;
            }
            if active[2] {
                grad[2] = (y1 - y0) * inv;
            }
        }
        (value, grad)
    }
}

/// Default magnitude used when a grid has no cell of the opposite kind.
pub fn default_sentinel(geometry: &GridGeometry) -> f64 {
    10.0 * geometry.max_extent()
}

pub fn compute_sdf(grid: &OccupancyGrid) -> SignedDistanceField {
    compute_sdf_with_sentinel(grid, default_sentinel(&grid.geometry))
}

/// Exact signed distance between cell centers: free cells measure to the
/// nearest obstacle center, obstacle cells to the nearest free center
/// (negated). Missing opposite cells yield `±sentinel`.
pub fn compute_sdf_with_sentinel(grid: &OccupancyGrid, sentinel: f64) -> SignedDistanceField {
    let g = &grid.geometry;
    let to_obstacle = squared_edt(&g.shape, &grid.cells);
    let free: Vec<bool> = grid.cells.iter().map(|&c| !c).collect();
    let to_free = squared_edt(&g.shape, &free);
    let values = grid
        .cells
        .iter()
        .enumerate()
        .map(|(i, &occupied)| {
            let (d2, sign) = if occupied {
                (to_free[i], -1.0)
            } else {
                (to_obstacle[i], 1.0)
            };
            let d = if d2.is_finite() {
                d2.sqrt() * g.voxel_size
            } else {
                sentinel
            };
            (sign * d) as f32
        })
        .collect();
    SignedDistanceField {
        geometry: g.clone(),
        values,
    }
}

/// Parameters fully determining one generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub seed: u64,
    /// Noise cycles per world extent.
    pub noise_frequency: f64,
    /// Cells with noise above this value are obstacles.
    pub threshold: f64,
    pub shape: Vec<usize>,
    pub voxel_size: f64,
    /// Quarter turns applied about the grid center after generation.
    #[serde(default)]
    pub rotation: u8,
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.shape.len()) {
            return config_err("world dimension must be 2 or 3");
        }
        if self.shape.iter().any(|&n| n < 8) {
            return config_err("world extents must be at least 8 cells");
        }
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return config_err("voxel_size must be positive");
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return config_err("threshold must lie in [-1, 1]");
        }
        if !(self.noise_frequency > 0.0 && self.noise_frequency.is_finite()) {
            return config_err("noise_frequency must be positive");
        }
        if self.rotation >= 4 {
            return config_err("rotation is a quarter-turn count in 0..4");
        }
        if self.rotation != 0 && self.shape[0] != self.shape[1] {
            return config_err("rotated worlds need equal x and y extents");
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::centered(self.shape.clone(), self.voxel_size)
    }
}

pub fn generate_world(spec: &WorldSpec) -> Result<OccupancyGrid> {
    spec.validate()?;
    let geometry = spec.geometry()?;
    let noise = SimplexNoise::new(spec.seed);
    let scale = spec.noise_frequency / geometry.max_extent();
    let cells = (0..geometry.len())
        .map(|i| {
            let c = geometry.center(i);
            let p: Vec<f64> = (0..geometry.dim())
                .map(|a| (c[a] - geometry.origin[a]) * scale)
                .collect();
            let n = if geometry.dim() == 2 {
                noise.noise2(p[0], p[1])
            } else {
                noise.noise3(p[0], p[1], p[2])
            };
            n > spec.threshold
        })
        .collect();
    let grid = OccupancyGrid { geometry, cells };
    if spec.rotation == 0 {
        Ok(grid)
    } else {
        grid.rotated(spec.rotation)
    }
}

/// Number of configurations sampled by the clutter filter.
pub const USABLE_SAMPLES: usize = 1000;
/// Minimum feasible count out of [`USABLE_SAMPLES`].
pub const USABLE_MIN_FEASIBLE: usize = 200;

pub fn world_is_usable(grid: &OccupancyGrid, robot: &RobotModel, rng: &mut Rng) -> bool {
    let sdf = compute_sdf(grid);
    usable_fraction(&sdf, robot, rng) >= USABLE_MIN_FEASIBLE
}

/// Feasible count among [`USABLE_SAMPLES`] uniform configurations.
pub fn usable_fraction(sdf: &SignedDistanceField, robot: &RobotModel, rng: &mut Rng) -> usize {
    (0..USABLE_SAMPLES)
        .filter(|_| {
            let q = robot.random_config(rng);
            robot.is_config_feasible(sdf, &q)
        })
        .count()
}

/// An occupancy grid together with its distance field.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub grid: OccupancyGrid,
    pub sdf: SignedDistanceField,
}

impl World {
    pub fn from_grid(grid: OccupancyGrid) -> Self {
        let sdf = compute_sdf(&grid);
        Self { grid, sdf }
    }

    pub fn from_spec(spec: &WorldSpec) -> Result<Self> {
        Ok(Self::from_grid(generate_world(spec)?))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let g = &self.grid.geometry;
        w.write_all(b"BPW1")?;
        w.write_u8(g.dim() as u8)?;
        for &n in &g.shape {
            w.write_u32::<LittleEndian>(n as u32)?;
        }
        w.write_f64::<LittleEndian>(g.voxel_size)?;
        for &o in &g.origin {
            w.write_f64::<LittleEndian>(o)?;
        }
        let bytes: Vec<u8> = self.grid.cells.iter().map(|&c| c as u8).collect();
        w.write_all(&bytes)?;
        for &v in &self.sdf.values {
            w.write_f32::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"BPW1" {
            return Err(Error::Format("not a world file (bad magic)".into()));
        }
        let d = r.read_u8()? as usize;
        if !(2..=3).contains(&d) {
            return Err(Error::Format(format!("bad world dimension {d}")));
        }
        let shape = (0..d)
            .map(|_| r.read_u32::<LittleEndian>().map(|n| n as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        let voxel = r.read_f64::<LittleEndian>()?;
        let origin = (0..d)
            .map(|_| r.read_f64::<LittleEndian>())
            .collect::<std::io::Result<Vec<_>>>()?;
        let geometry = GridGeometry::new(shape, voxel, origin)
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut bytes = vec![0u8; geometry.len()];
        r.read_exact(&mut bytes)?;
        if bytes.iter().any(|&b| b > 1) {
            return Err(Error::Format("occupancy bytes must be 0 or 1".into()));
        }
        let mut values = vec![0f32; geometry.len()];
        r.read_f32_into::<LittleEndian>(&mut values)?;
        Ok(Self {
            grid: OccupancyGrid {
                geometry: geometry.clone(),
                cells: bytes.into_iter().map(|b| b == 1).collect(),
            },
            sdf: SignedDistanceField { geometry, values },
        })
    }
}
