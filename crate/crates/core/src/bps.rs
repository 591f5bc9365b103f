//! Basis point set world encoding.
//!
//! A fixed set of workspace points; a world is described by each point's
//! distance to the nearest obstacle, either looked up in the signed distance
//! field or measured against an obstacle point cloud.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{config_err, Error, Result};
use crate::worldgen::{GridGeometry, OccupancyGrid, SignedDistanceField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpsLayout {
    HexPacked,
    RegularGrid,
    Custom,
}

impl BpsLayout {
    fn code(self) -> u8 {
        match self {
            BpsLayout::HexPacked => 0,
            BpsLayout::RegularGrid => 1,
            BpsLayout::Custom => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(BpsLayout::HexPacked),
            1 => Ok(BpsLayout::RegularGrid),
            2 => Ok(BpsLayout::Custom),
            _ => Err(Error::Format(format!("unknown BPS layout {c}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisPointSet {
    pub dim: usize,
    /// Points padded to three coordinates; trailing axes are zero in 2D.
    pub points: Vec<[f64; 3]>,
    pub layout: BpsLayout,
    pub center: [f64; 3],
    pub reach: f64,
    pub target_count: usize,
    /// Lattice spacing (hex) or stride in meters (regular grid).
    pub spacing: f64,
}

/// Encoded world, one value per basis point.
#[derive(Debug, Clone, PartialEq)]
pub struct BpsFeatures {
    pub values: Vec<f64>,
    /// `true` when taken from a signed distance field.
    pub signed: bool,
}

impl BpsFeatures {
    /// Network input scaling: `values / reach`, clamped to [-1, 1].
    pub fn normalized(&self, reach: f64) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| (v / reach).clamp(-1.0, 1.0))
            .collect()
    }
}

/// Lattice offset that breaks the point symmetry about the center so the
/// point count grows in small steps as the spacing shrinks.
const HEX_OFFSET: [f64; 3] = [0.3137, 0.1729, 0.2411];

fn hex_lattice(center: [f64; 3], reach: f64, spacing: f64, dim: usize) -> Vec<[f64; 3]> {
    let s = spacing;
    let row = s * 3f64.sqrt() / 2.0;
    let layer = s * (2.0f64 / 3.0).sqrt();
    let nx = (reach / s).ceil() as i64 + 2;
    let ny = (reach / row).ceil() as i64 + 2;
    let nz = if dim == 3 {
        (reach / layer).ceil() as i64 + 2
    } else {
        0
    };
    let mut pts = Vec::new();
    for k in -nz..=nz {
        // ABAB stacking: odd layers sit over the triangle centers.
        let (lx, ly) = if k.rem_euclid(2) == 1 {
            (s / 2.0, s / (2.0 * 3f64.sqrt()))
        } else {
            (0.0, 0.0)
        };
        for j in -ny..=ny {
            for i in -nx..=nx {
                let mut p = [
                    (i as f64 + 0.5 * j.rem_euclid(2) as f64 + HEX_OFFSET[0]) * s + lx,
                    (j as f64 + HEX_OFFSET[1]) * row + ly,
                    0.0,
                ];
                if dim == 3 {
                    p[2] = (k as f64 + HEX_OFFSET[2]) * layer;
                }
                let r2: f64 = p.iter().map(|v| v * v).sum();
                if r2.sqrt() <= reach {
                    for a in 0..3 {
                        p[a] += center[a];
                    }
                    pts.push(p);
                }
            }
        }
    }
    pts
}

/// Hexagonal (2D) or hexagonal-close-packed (3D) points inside the reach
/// ball, with the spacing bisected until the count is within ±10% of
/// `target_count`.
pub fn generate_hex_bps(center: [f64; 3], reach: f64, target_count: usize, dim: usize) -> Result<BasisPointSet> {
    if !(reach > 0.0) {
        return config_err("reach must be positive");
    }
    if target_count < 4 {
        return config_err("target_count must be at least 4");
    }
    if !(2..=3).contains(&dim) {
        return config_err("BPS dimension must be 2 or 3");
    }
    let tol = 0.1 * target_count as f64;
    let mut lo = reach * 1e-4;
    let mut hi = 4.0 * reach;
    let mut best: Option<(f64, usize)> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let count = hex_lattice(center, reach, mid, dim).len();
        let err = (count as f64 - target_count as f64).abs();
        if err <= tol && best.is_none_or(|(_, c)| err < (c as f64 - target_count as f64).abs()) {
            best = Some((mid, count));
        }
        if count == target_count {
            break;
        }
        if count > target_count {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (spacing, _) = best.ok_or_else(|| {
        Error::Config(format!("no lattice spacing gives {target_count} ± 10% points"))
    })?;
    Ok(BasisPointSet {
        dim,
        points: hex_lattice(center, reach, spacing, dim),
        layout: BpsLayout::HexPacked,
        center,
        reach,
        target_count,
        spacing,
    })
}

/// Every `stride`-th cell center of a grid, starting at cell `stride / 2`
/// along each axis.
pub fn regular_grid_bps(geometry: &GridGeometry, stride: usize) -> Result<BasisPointSet> {
    if stride == 0 {
        return config_err("stride must be positive");
    }
    let offset = stride / 2;
    let points: Vec<[f64; 3]> = (0..geometry.len())
        .filter(|&i| {
            let c = geometry.coords(i);
            (0..geometry.dim()).all(|a| c[a] % stride == offset)
        })
        .map(|i| geometry.center(i))
        .collect();
    let mut center = [0.0; 3];
    let ext = geometry.extent();
    for a in 0..geometry.dim() {
        center[a] = geometry.origin[a] + ext[a] / 2.0;
    }
    let reach = ext.iter().map(|e| e * e).sum::<f64>().sqrt() / 2.0;
    Ok(BasisPointSet {
        dim: geometry.dim(),
        target_count: points.len(),
        points,
        layout: BpsLayout::RegularGrid,
        center,
        reach,
        spacing: stride as f64 * geometry.voxel_size,
    })
}

impl BasisPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"BPS1")?;
        w.write_u32::<LittleEndian>(self.points.len() as u32)?;
        w.write_u8(self.dim as u8)?;
        for p in &self.points {
            for &v in &p[..self.dim] {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        // generation metadata
        w.write_u8(self.layout.code())?;
        for &v in &self.center[..self.dim] {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.write_f64::<LittleEndian>(self.reach)?;
        w.write_u32::<LittleEndian>(self.target_count as u32)?;
        w.write_f64::<LittleEndian>(self.spacing)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"BPS1" {
            return Err(Error::Format("not a BPS file (bad magic)".into()));
        }
        let n = r.read_u32::<LittleEndian>()? as usize;
        let dim = r.read_u8()? as usize;
        if !(2..=3).contains(&dim) {
            return Err(Error::Format(format!("bad BPS dimension {dim}")));
        }
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let mut p = [0.0; 3];
            for v in p.iter_mut().take(dim) {
                *v = r.read_f64::<LittleEndian>()?;
            }
            points.push(p);
        }
        let layout = BpsLayout::from_code(r.read_u8()?)?;
        let mut center = [0.0; 3];
        for v in center.iter_mut().take(dim) {
            *v = r.read_f64::<LittleEndian>()?;
        }
        let reach = r.read_f64::<LittleEndian>()?;
        let target_count = r.read_u32::<LittleEndian>()? as usize;
        let spacing = r.read_f64::<LittleEndian>()?;
        Ok(Self {
            dim,
            points,
            layout,
            center,
            reach,
            target_count,
            spacing,
        })
    }
}

pub fn encode_sdf(sdf: &SignedDistanceField, bps: &BasisPointSet) -> BpsFeatures {
    BpsFeatures {
        values: bps
            .points
            .iter()
            .map(|p| sdf.lookup(&p[..bps.dim]))
            .collect(),
        signed: true,
    }
}

/// Unsigned distance from each basis point to its nearest cloud point.
pub fn encode_pointcloud(points: &[[f64; 3]], bps: &BasisPointSet) -> Result<BpsFeatures> {
    if points.is_empty() {
        return config_err("point cloud is empty");
    }
    let d = bps.dim;
    let values = bps
        .points
        .iter()
        .map(|b| {
            points
                .iter()
                .map(|x| (0..d).map(|a| (b[a] - x[a]) * (b[a] - x[a])).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    Ok(BpsFeatures {
        values,
        signed: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLabel {
    Free,
    Occupied,
    /// Not covered by any ball; must be treated as an obstacle.
    Unknown,
}

/// Relative shrink of every ball, covering single-precision rounding of the
/// stored distances.
const BALL_SLACK: f64 = 1e-6;

/// Labels the query grid's cell centers: free inside a positive ball
/// `‖x − b_i‖ < f_i`, occupied inside a negative ball `‖x − b_i‖ < −f_i`,
/// unknown otherwise.
pub fn reconstruct_conservative(
    bps: &BasisPointSet,
    features: &BpsFeatures,
    query: &GridGeometry,
) -> Result<Vec<CellLabel>> {
    if !features.signed {
        return config_err("conservative reconstruction needs signed features");
    }
    if features.values.len() != bps.len() {
        return Err(Error::Dimension {
            expected: bps.len(),
            got: features.values.len(),
        });
    }
    let d = bps.dim;
    Ok((0..query.len())
        .map(|i| {
            let p = query.center(i);
            let mut label = CellLabel::Unknown;
            for (b, &v) in bps.points.iter().zip(&features.values) {
                let r2 = (v.abs() * (1.0 - BALL_SLACK)).powi(2);
                let dist2: f64 = (0..d).map(|a| (p[a] - b[a]) * (p[a] - b[a])).sum();
                if dist2 < r2 {
                    label = if v > 0.0 {
                        CellLabel::Free
                    } else {
                        CellLabel::Occupied
                    };
                    break;
                }
            }
            label
        })
        .collect())
}

/// Occupancy reduced by `factor` per axis and expanded back: blocks that are
/// entirely free or entirely occupied keep their label, mixed blocks become
/// unknown.
pub fn conservative_downsample(grid: &OccupancyGrid, factor: usize) -> Vec<CellLabel> {
    let g = &grid.geometry;
    let block_of = |i: usize| {
        let c = g.coords(i);
        let mut key = 0usize;
        for a in (0..g.dim()).rev() {
            key = key * g.shape[a].div_ceil(factor) + c[a] / factor;
        }
        key
    };
    let n_blocks: usize = g.shape.iter().map(|&n| n.div_ceil(factor)).product();
    let mut any_free = vec![false; n_blocks];
    let mut any_occ = vec![false; n_blocks];
    for (i, &c) in grid.cells.iter().enumerate() {
        let k = block_of(i);
        if c {
            any_occ[k] = true;
        } else {
            any_free[k] = true;
        }
    }
    (0..grid.cells.len())
        .map(|i| {
            let k = block_of(i);
            match (any_free[k], any_occ[k]) {
                (true, false) => CellLabel::Free,
                (false, true) => CellLabel::Occupied,
                _ => CellLabel::Unknown,
            }
        })
        .collect()
}

#[cfg(test)]
#[path = "bps_tests.rs"]
mod tests;
