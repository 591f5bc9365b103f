//! Sphere-model robots: serial/tree kinematics, world-space sphere
//! placement, sphere Jacobians and feasibility predicates.

use std::path::Path;

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::Rng;
use crate::worldgen::SignedDistanceField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub kind: JointKind,
    /// Unit axis in the joint's own frame.
    pub axis: Vector3<f64>,
    /// Parent frame, `None` for the robot base.
    pub parent: Option<usize>,
    /// Fixed transform from the parent frame to the joint frame at q = 0.
    pub origin: Isometry3<f64>,
    pub limits: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub frame: usize,
    pub center: Vector3<f64>,
    pub radius: f64,
}

/// Workspace symmetry usable for data augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    #[default]
    None,
    /// Joints 0 and 1 are the planar position; rotate them with the world.
    GridRotation,
    /// Joint 0 is a revolute base about +z at the world center.
    BaseRotation,
}

/// One sphere placed in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedSphere {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub frame: usize,
    pub sphere: usize,
}

/// World transforms of all frames plus the joint axes and pivots needed for
/// Jacobians.
#[derive(Debug, Clone, Default)]
pub struct FrameSet {
    pub frames: Vec<Isometry3<f64>>,
    pub axes: Vec<Vector3<f64>>,
    pub pivots: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    /// Workspace dimension (2 or 3). Planar robots live in z = 0.
    pub dim: usize,
    pub joints: Vec<Joint>,
    /// All spheres, grouped by ascending frame.
    pub spheres: Vec<Sphere>,
    pub self_pairs: Vec<(usize, usize)>,
    pub reach: f64,
    /// Center of the reach ball.
    pub base: Vector3<f64>,
    pub symmetry: Symmetry,
    /// Extra clearance demanded by the feasibility predicates.
    pub margin: f64,
    ancestors: Vec<Vec<usize>>,
    frame_spheres: Vec<std::ops::Range<usize>>,
    levers: Vec<Vec<f64>>,
}

impl RobotModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        joints: Vec<Joint>,
        mut spheres: Vec<Sphere>,
        self_pairs: Vec<(usize, usize)>,
        reach: f64,
        base: Vector3<f64>,
        symmetry: Symmetry,
        margin: f64,
    ) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return config_err("robot dimension must be 2 or 3");
        }
        if joints.is_empty() {
            return config_err("robot needs at least one joint");
        }
        let n = joints.len();
        let mut ancestors: Vec<Vec<usize>> = Vec::with_capacity(n);
        for (i, j) in joints.iter().enumerate() {
            if !(j.limits[0] < j.limits[1]) {
                return config_err(format!("joint {i}: limits must satisfy lo < hi"));
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return config_err(format!("joint {i}: axis must be a unit vector"));
            }
            let mut chain = match j.parent {
                None => Vec::new(),
                Some(p) if p < i => ancestors[p].clone(),
                Some(p) => {
                    return config_err(format!("joint {i}: parent {p} must precede it"));
                }
            };
            chain.push(i);
            ancestors.push(chain);
            if dim == 2 {
                let planar_axis = match j.kind {
                    JointKind::Revolute => j.axis.x.abs() < 1e-12 && j.axis.y.abs() < 1e-12,
                    JointKind::Prismatic => j.axis.z.abs() < 1e-12,
                };
                let t = j.origin.translation.vector;
                let (raxis, _) = j
                    .origin
                    .rotation
                    .axis_angle()
                    .unwrap_or((Vector3::z_axis(), 0.0));
                let planar_origin =
                    t.z.abs() < 1e-12 && raxis.x.abs() < 1e-12 && raxis.y.abs() < 1e-12;
                if !planar_axis || !planar_origin {
                    return config_err(format!("joint {i}: not planar in a 2D robot"));
                }
            }
        }
        for (k, s) in spheres.iter().enumerate() {
            if s.frame >= n {
                return config_err(format!("sphere {k}: frame {} out of range", s.frame));
            }
            if !(s.radius > 0.0) {
                return config_err(format!("sphere {k}: radius must be positive"));
            }
            if dim == 2 && s.center.z.abs() > 1e-12 {
                return config_err(format!("sphere {k}: off-plane center in a 2D robot"));
            }
        }
        spheres.sort_by_key(|s| s.frame);
        let mut frame_spheres = vec![0..0; n];
        let mut start = 0;
        for (f, range) in frame_spheres.iter_mut().enumerate() {
            let end = start + spheres[start..].iter().take_while(|s| s.frame == f).count();
            *range = start..end;
            start = end;
        }
        for &(a, b) in &self_pairs {
            if !(a < b && b < n) {
                return config_err(format!("self pair ({a}, {b}) must satisfy i < j < n_frames"));
            }
        }
        if !(reach > 0.0) {
            return config_err("reach must be positive");
        }
        match symmetry {
            Symmetry::GridRotation => {
                let ok = n >= 2
                    && joints[..2].iter().all(|j| j.kind == JointKind::Prismatic)
                    && (joints[0].axis - Vector3::x()).norm() < 1e-12
                    && (joints[1].axis - Vector3::y()).norm() < 1e-12
                    && joints[0].limits == joints[1].limits
                    && (joints[0].limits[0] + joints[0].limits[1]).abs() < 1e-12;
                if !ok {
                    return config_err(
                        "grid_rotation symmetry needs two prismatic joints with equal symmetric limits",
                    );
                }
            }
            Symmetry::BaseRotation => {
                let j = &joints[0];
                let centered = base.x.abs() < 1e-12 && base.y.abs() < 1e-12;
                if j.kind != JointKind::Revolute
                    || j.parent.is_some()
                    || j.axis.z.abs() < 1.0 - 1e-12
                    || !centered
                {
                    return config_err(
                        "base_rotation symmetry needs a revolute +z base joint at the world center",
                    );
                }
            }
            Symmetry::None => {}
        }

        // Upper bound on sphere speed per unit joint velocity.
        let levers = spheres
            .iter()
            .map(|s| {
                let chain = &ancestors[s.frame];
                let mut lever = vec![0.0; n];
                for (k, &j) in chain.iter().enumerate() {
                    lever[j] = match joints[j].kind {
                        JointKind::Prismatic => 1.0,
                        JointKind::Revolute => {
                            let downstream: f64 = chain[k + 1..]
                                .iter()
                                .map(|&m| {
                                    let jm = &joints[m];
                                    let ext = if jm.kind == JointKind::Prismatic {
                                        jm.limits[0].abs().max(jm.limits[1].abs())
                                    } else {
                                        0.0
                                    };
                                    jm.origin.translation.vector.norm() + ext
                                })
                                .sum();
                            downstream + s.center.norm()
                        }
                    };
                }
                lever
            })
            .collect();

        Ok(Self {
            name: name.into(),
            dim,
            joints,
            spheres,
            self_pairs,
            reach,
            base,
            symmetry,
            margin,
            ancestors,
            frame_spheres,
            levers,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.joints.len()
    }

    pub fn n_frames(&self) -> usize {
        self.joints.len()
    }

    pub fn n_spheres(&self) -> usize {
        self.spheres.len()
    }

    pub fn frame_sphere_range(&self, frame: usize) -> std::ops::Range<usize> {
        self.frame_spheres[frame].clone()
    }

    /// Upper bound on the displacement of sphere `s` per unit motion of
    /// joint `j` (zero when `j` does not move the sphere).
    pub fn lever(&self, s: usize, j: usize) -> f64 {
        self.levers[s][j]
    }

    pub fn limits(&self) -> Vec<[f64; 2]> {
        self.joints.iter().map(|j| j.limits).collect()
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n_dof() {
            return Err(Error::Dimension {
                expected: self.n_dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<FrameSet> {
        self.check_q(q)?;
        Ok(self.fk_unchecked(q))
    }

    fn fk_unchecked(&self, q: &[f64]) -> FrameSet {
        let mut fs = FrameSet {
            frames: Vec::with_capacity(self.n_dof()),
            axes: Vec::with_capacity(self.n_dof()),
            pivots: Vec::with_capacity(self.n_dof()),
        };
        self.fk_into(q, &mut fs);
        fs
    }

    fn fk_into(&self, q: &[f64], fs: &mut FrameSet) {
        fs.frames.clear();
        fs.axes.clear();
        fs.pivots.clear();
        for (i, j) in self.joints.iter().enumerate() {
            let pre = match j.parent {
                Some(p) => fs.frames[p] * j.origin,
                None => Translation3::from(self.base) * j.origin,
            };
            fs.axes.push(pre.rotation * j.axis);
            fs.pivots.push(pre.translation.vector);
            let motion = match j.kind {
                JointKind::Revolute => Isometry3::from_parts(
                    Translation3::identity(),
                    UnitQuaternion::from_axis_angle(&Unit::new_unchecked(j.axis), q[i]),
                ),
                JointKind::Prismatic => {
                    Isometry3::from_parts(Translation3::from(j.axis * q[i]), UnitQuaternion::identity())
                }
            };
            fs.frames.push(pre * motion);
        }
    }

    pub fn sphere_centers(&self, q: &[f64]) -> Result<Vec<PlacedSphere>> {
        let fs = self.forward_kinematics(q)?;
        Ok(self.place_spheres(&fs))
    }

    pub fn place_spheres(&self, fs: &FrameSet) -> Vec<PlacedSphere> {
        self.spheres
            .iter()
            .enumerate()
            .map(|(k, s)| PlacedSphere {
                center: fs.frames[s.frame].transform_point(&s.center.into()).coords,
                radius: s.radius,
                frame: s.frame,
                sphere: k - self.frame_spheres[s.frame].start,
            })
            .collect()
    }

    /// `dim × n_dof` Jacobian of a sphere center, row-major.
    pub fn sphere_jacobian(&self, q: &[f64], frame: usize, sphere: usize) -> Result<Vec<f64>> {
        self.check_q(q)?;
        if frame >= self.n_frames() {
            return Err(Error::Index(format!("frame {frame}")));
        }
        let range = self.frame_sphere_range(frame);
        if sphere >= range.len() {
            return Err(Error::Index(format!("sphere {sphere} on frame {frame}")));
        }
        let s = &self.spheres[range.start + sphere];
        let fs = self.fk_unchecked(q);
        let p = fs.frames[frame].transform_point(&s.center.into()).coords;
        let n = self.n_dof();
        let mut jac = vec![0.0; self.dim * n];
        for &j in &self.ancestors[frame] {
            let col = self.joint_column(&fs, j, &p);
            for r in 0..self.dim {
                jac[r * n + j] = col[r];
            }
        }
        Ok(jac)
    }

    #[inline]
    fn joint_column(&self, fs: &FrameSet, j: usize, p: &Vector3<f64>) -> Vector3<f64> {
        match self.joints[j].kind {
            JointKind::Revolute => fs.axes[j].cross(&(p - fs.pivots[j])),
            JointKind::Prismatic => fs.axes[j],
        }
    }

    /// Sphere centers and (optionally) all sphere Jacobians for one
    /// configuration, written into a reusable buffer.
    pub(crate) fn kinematics_into(&self, q: &[f64], want_jac: bool, buf: &mut KinBuffer) {
        let mut fs = std::mem::take(&mut buf.frames);
        self.fk_into(q, &mut fs);
        let n = self.n_dof();
        buf.centers.clear();
        buf.jac.clear();
        for s in &self.spheres {
            let p = fs.frames[s.frame].transform_point(&s.center.into()).coords;
            buf.centers.push(p);
            if want_jac {
                let start = buf.jac.len();
                buf.jac.resize(start + n, Vector3::zeros());
                for &j in &self.ancestors[s.frame] {
                    buf.jac[start + j] = self.joint_column(&fs, j, &p);
                }
            }
        }
        buf.frames = fs;
    }

    pub fn random_config(&self, rng: &mut Rng) -> Vec<f64> {
        self.joints
            .iter()
            .map(|j| rng.random_range(j.limits[0]..j.limits[1]))
            .collect()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.iter()
            .zip(&self.joints)
            .all(|(v, j)| *v >= j.limits[0] && *v <= j.limits[1])
    }

    /// World clearance of every sphere is at least `margin` and no listed
    /// self pair overlaps.
    pub fn is_config_feasible(&self, sdf: &SignedDistanceField, q: &[f64]) -> bool {
        let mut buf = KinBuffer::default();
        self.kinematics_into(q, false, &mut buf);
        self.buffer_feasible(sdf, &buf)
    }

    pub(crate) fn buffer_feasible(&self, sdf: &SignedDistanceField, buf: &KinBuffer) -> bool {
        let world_ok = self
            .spheres
            .iter()
            .zip(&buf.centers)
            .all(|(s, c)| sdf.lookup(c.as_slice()) - s.radius >= self.margin);
        world_ok && self.self_clear(buf)
    }

    pub(crate) fn self_clear(&self, buf: &KinBuffer) -> bool {
        self.self_pairs.iter().all(|&(a, b)| {
            self.frame_spheres[a].clone().all(|k| {
                self.frame_spheres[b].clone().all(|l| {
                    (buf.centers[k] - buf.centers[l]).norm()
                        - self.spheres[k].radius
                        - self.spheres[l].radius
                        >= self.margin
                })
            })
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: RobotFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("robot file: {e}")))?;
        file.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&RobotFile::from_model(self)).expect("robot model serializes")
    }

    /// Resolves a bundled model name or a path to a robot file.
    pub fn by_name_or_path(spec: &str) -> Result<Self> {
        match spec {
            "sphere_bot" => Ok(Self::sphere_bot()),
            "planar_arm4" => Ok(Self::planar_arm4()),
            path => Self::load(path),
        }
    }

    /// 2-DoF point robot: one sphere translated over the unit square
    /// centered on the origin.
    pub fn sphere_bot() -> Self {
        let half = 0.5;
        let prismatic = |axis: Vector3<f64>, parent| Joint {
            kind: JointKind::Prismatic,
            axis,
            parent,
            origin: Isometry3::identity(),
            limits: [-half, half],
        };
        let radius = 0.03;
        Self::new(
            "sphere_bot",
            2,
            vec![prismatic(Vector3::x(), None), prismatic(Vector3::y(), Some(0))],
            vec![Sphere {
                frame: 1,
                center: Vector3::zeros(),
                radius,
            }],
            vec![],
            half * std::f64::consts::SQRT_2 + radius,
            Vector3::zeros(),
            Symmetry::GridRotation,
            0.0,
        )
        .expect("bundled sphere bot is valid")
    }

    /// 4-DoF planar arm with equal links, based at the origin.
    pub fn planar_arm4() -> Self {
        let link = 0.12;
        let radius = 0.02;
        let joints = (0..4)
            .map(|i| Joint {
                kind: JointKind::Revolute,
                axis: Vector3::z(),
                parent: if i == 0 { None } else { Some(i - 1) },
                origin: if i == 0 {
                    Isometry3::identity()
                } else {
                    Isometry3::translation(link, 0.0, 0.0)
                },
                limits: if i == 0 {
                    [-std::f64::consts::PI, std::f64::consts::PI]
                } else {
                    [-2.5, 2.5]
                },
            })
            .collect();
        let spheres = (0..4)
            .flat_map(|f| {
                (1..=4).map(move |k| Sphere {
                    frame: f,
                    center: Vector3::new(link * k as f64 / 4.0, 0.0, 0.0),
                    radius,
                })
            })
            .collect();
        Self::new(
            "planar_arm4",
            2,
            joints,
            spheres,
            vec![(0, 2), (0, 3), (1, 3)],
            4.0 * link + radius,
            Vector3::zeros(),
            Symmetry::BaseRotation,
            0.0,
        )
        .expect("bundled planar arm is valid")
    }
}

/// Scratch space for repeated kinematics evaluation.
#[derive(Debug, Default, Clone)]
pub(crate) struct KinBuffer {
    pub centers: Vec<Vector3<f64>>,
    /// `n_spheres × n_dof` columns, sphere-major.
    pub jac: Vec<Vector3<f64>>,
    frames: FrameSet,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    name: String,
    dim: usize,
    reach: f64,
    #[serde(default)]
    base: [f64; 3],
    #[serde(default)]
    symmetry: Symmetry,
    #[serde(default)]
    margin: f64,
    #[serde(default)]
    self_pairs: Vec<[usize; 2]>,
    joints: Vec<JointEntry>,
    spheres: Vec<SphereEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    kind: JointKind,
    axis: [f64; 3],
    /// Index of the parent frame; omitted means the previous joint, -1 the base.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<i64>,
    #[serde(default)]
    origin: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
    limits: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereEntry {
    frame: usize,
    center: [f64; 3],
    radius: f64,
}

impl RobotFile {
    fn into_model(self) -> Result<RobotModel> {
        let joints = self
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let parent = match j.parent {
                    None if i == 0 => None,
                    None => Some(i - 1),
                    Some(p) if p < 0 => None,
                    Some(p) => Some(p as usize),
                };
                let axis = Vector3::from(j.axis);
                let norm = axis.norm();
                if !(norm > 0.0) {
                    return config_err(format!("joint {i}: zero axis"));
                }
                Ok(Joint {
                    kind: j.kind,
                    axis: axis / norm,
                    parent,
                    origin: Isometry3::from_parts(
                        Translation3::from(Vector3::from(j.origin)),
                        UnitQuaternion::from_euler_angles(j.rpy[0], j.rpy[1], j.rpy[2]),
                    ),
                    limits: j.limits,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spheres = self
            .spheres
            .iter()
            .map(|s| Sphere {
                frame: s.frame,
                center: Vector3::from(s.center),
                radius: s.radius,
            })
            .collect();
        RobotModel::new(
            self.name,
            self.dim,
            joints,
            spheres,
            self.self_pairs.iter().map(|p| (p[0], p[1])).collect(),
            self.reach,
            Vector3::from(self.base),
            self.symmetry,
            self.margin,
        )
    }

    fn from_model(m: &RobotModel) -> Self {
        RobotFile {
            name: m.name.clone(),
            dim: m.dim,
            reach: m.reach,
            base: m.base.into(),
            symmetry: m.symmetry,
            margin: m.margin,
            self_pairs: m.self_pairs.iter().map(|&(a, b)| [a, b]).collect(),
            joints: m
                .joints
                .iter()
                .enumerate()
                .map(|(i, j)| {
                    let (r, p, y) = j.origin.rotation.euler_angles();
                    JointEntry {
                        kind: j.kind,
                        axis: j.axis.into(),
                        parent: match j.parent {
                            None if i == 0 => None,
                            None => Some(-1),
                            Some(p) if p + 1 == i => None,
                            Some(p) => Some(p as i64),
                        },
                        origin: j.origin.translation.vector.into(),
                        rpy: [r, p, y],
                        limits: j.limits,
                    }
                })
                .collect(),
            spheres: m
                .spheres
                .iter()
                .map(|s| SphereEntry {
                    frame: s.frame,
                    center: s.center.into(),
                    radius: s.radius,
                })
                .collect(),
        }
    }
}
