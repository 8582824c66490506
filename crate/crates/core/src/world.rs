//! Procedural 2D worlds: disk landmarks and segment occluders, with
//! visibility queries and raycast panoramas that act as ground truth for
//! what a camera at a given pose can see.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Bounds, CameraPose, GeometryError, OverlapConfig, Vec2, EPS};
use crate::json;
use crate::rng::keyed_rng;

/// Minimum center spacing between landmarks, meters.
pub const LANDMARK_SPACING: f64 = 1.0;
/// Default panorama width in columns.
pub const PANORAMA_COLUMNS: usize = 128;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("density must be positive and finite, got {0}")]
    InvalidDensity(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid world file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorTag {
    Red,
    Green,
    Blue,
    Yellow,
    Cyan,
    Magenta,
}

const COLORS: [ColorTag; 6] = [
    ColorTag::Red,
    ColorTag::Green,
    ColorTag::Blue,
    ColorTag::Yellow,
    ColorTag::Cyan,
    ColorTag::Magenta,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: u32,
    pub position: Vec2,
    pub radius: f64,
    pub color: ColorTag,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    /// Proper or touching intersection with the closed segment `p`–`q`.
    pub fn intersects(&self, p: Vec2, q: Vec2) -> bool {
        let d1 = (self.b - self.a).cross(p - self.a);
        let d2 = (self.b - self.a).cross(q - self.a);
        let d3 = (q - p).cross(self.a - p);
        let d4 = (q - p).cross(self.b - p);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        let on = |a: Vec2, b: Vec2, c: Vec2, d: f64| {
            d.abs() < EPS
                && c.x >= a.x.min(b.x) - EPS
                && c.x <= a.x.max(b.x) + EPS
                && c.y >= a.y.min(b.y) - EPS
                && c.y <= a.y.max(b.y) + EPS
        };
        on(self.a, self.b, p, d1)
            || on(self.a, self.b, q, d2)
            || on(p, q, self.a, d3)
            || on(p, q, self.b, d4)
    }

    /// Distance along the ray `origin + t·dir` to this segment, if hit.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        if denom.abs() < EPS {
            return None;
        }
        let w = self.a - origin;
        let t = w.cross(e) / denom;
        let s = w.cross(dir) / denom;
        (t > 0.0 && (-EPS..=1.0 + EPS).contains(&s)).then_some(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    /// Landmarks per 100 m².
    pub density: f64,
    pub occluder_count: usize,
    pub bounds: Bounds,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub bounds: Bounds,
    pub seed: u64,
    pub landmarks: Vec<Landmark>,
    pub occluders: Vec<Segment>,
}

/// Dart-throwing Poisson-disk sampler over a hash grid.
struct DiskSampler {
    cell: f64,
    origin: Vec2,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<Vec2>>,
}

impl DiskSampler {
    fn new(bounds: &Bounds, spacing: f64) -> Self {
        let cols = (bounds.width() / spacing).ceil().max(1.0) as usize;
        let rows = (bounds.height() / spacing).ceil().max(1.0) as usize;
        Self {
            cell: spacing,
            origin: bounds.min,
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
        }
    }

    fn key(&self, p: Vec2) -> (usize, usize) {
        let cx = (((p.x - self.origin.x) / self.cell) as usize).min(self.cols - 1);
        let cy = (((p.y - self.origin.y) / self.cell) as usize).min(self.rows - 1);
        (cx, cy)
    }

    fn try_insert(&mut self, p: Vec2) -> bool {
        let (cx, cy) = self.key(p);
        let r2 = self.cell * self.cell;
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1) {
                if self.cells[y * self.cols + x]
                    .iter()
                    .any(|q| (*q - p).norm_sq() < r2)
                {
                    return false;
                }
            }
        }
        self.cells[cy * self.cols + cx].push(p);
        true
    }
}

/// Builds a world with about `density · area / 100` landmarks, pairwise at
/// least [`LANDMARK_SPACING`] apart, and `occluder_count` wall segments.
pub fn generate_world(spec: &WorldSpec) -> Result<WorldModel, WorldError> {
    if !(spec.density.is_finite() && spec.density > 0.0) {
        return Err(WorldError::InvalidDensity(spec.density));
    }
    spec.bounds.validate()?;
    let target = (spec.density * spec.bounds.area() / 100.0).round() as usize;
    let mut rng = keyed_rng(spec.seed, 0);
    let mut sampler = DiskSampler::new(&spec.bounds, LANDMARK_SPACING);
    let mut landmarks = Vec::with_capacity(target);
    let max_tries = 30 * target.max(1);
    let mut tries = 0;
    while landmarks.len() < target && tries < max_tries {
        tries += 1;
        let p = Vec2::new(
            rng.random_range(spec.bounds.min.x..spec.bounds.max.x),
            rng.random_range(spec.bounds.min.y..spec.bounds.max.y),
        );
        if sampler.try_insert(p) {
            landmarks.push(Landmark {
                id: landmarks.len() as u32,
                position: p,
                radius: rng.random_range(0.15..0.45),
                color: COLORS[rng.random_range(0..COLORS.len())],
            });
        }
    }

    let mut rng = keyed_rng(spec.seed, 1);
    let occluders = (0..spec.occluder_count)
        .map(|_| {
            let c = Vec2::new(
                rng.random_range(spec.bounds.min.x..spec.bounds.max.x),
                rng.random_range(spec.bounds.min.y..spec.bounds.max.y),
            );
            let half = 0.5 * rng.random_range(2.0..8.0);
            let d = Vec2::from_angle(rng.random_range(0.0..std::f64::consts::PI));
            Segment {
                a: c - d * half,
                b: c + d * half,
            }
        })
        .collect();

    Ok(WorldModel {
        bounds: spec.bounds,
        seed: spec.seed,
        landmarks,
        occluders,
    })
}

/// One panorama column: the landmark hit first, or `None` when the ray hits
/// nothing within range or is blocked by an occluder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnHit {
    pub landmark: u32,
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panorama {
    pub columns: Vec<Option<ColumnHit>>,
}

impl Panorama {
    pub fn hit_ids(&self) -> BTreeSet<u32> {
        self.columns.iter().flatten().map(|h| h.landmark).collect()
    }

    /// Stable byte encoding: per column, little-endian `u32` id
    /// (`u32::MAX` for none) then the `f64` depth bits (0 for none).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.columns.len() * 12);
        for c in &self.columns {
            let (id, depth) = c.map_or((u32::MAX, 0.0), |h| (h.landmark, h.depth));
            out.extend_from_slice(&id.to_le_bytes());
            out.extend_from_slice(&depth.to_bits().to_le_bytes());
        }
        out
    }

    /// 64-bit FNV-1a of [`Panorama::to_bytes`].
    pub fn digest(&self) -> u64 {
        fnv1a64(&self.to_bytes())
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Column ray angles from the left edge (`yaw + fov/2`) to the right edge
/// (`yaw − fov/2`), endpoints included.
pub fn column_angles(pose: &CameraPose, columns: usize) -> Vec<f64> {
    if columns == 1 {
        return vec![pose.yaw()];
    }
    (0..columns)
        .map(|j| pose.yaw() + pose.half_fov() - pose.fov() * j as f64 / (columns - 1) as f64)
        .collect()
}

fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    if t0 > 0.0 {
        return Some(t0);
    }
    let t1 = -b + sq;
    // Camera inside the disk: the disk fills the view from the start.
    (t1 > 0.0).then_some(t0.max(f64::MIN_POSITIVE))
}

impl WorldModel {
    pub fn empty(bounds: Bounds) -> Self {
        Self {
            bounds,
            seed: 0,
            landmarks: Vec::new(),
            occluders: Vec::new(),
        }
    }

    pub fn landmark(&self, id: u32) -> Option<&Landmark> {
        self.landmarks.get(id as usize).filter(|l| l.id == id)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        self.bounds.validate()?;
        for (i, l) in self.landmarks.iter().enumerate() {
            if l.id as usize != i {
                return Err(WorldError::Invalid(format!("landmark {i} has id {}", l.id)));
            }
            if l.radius.is_nan() || l.radius <= 0.0 || !l.position.is_finite() {
                return Err(WorldError::Invalid(format!(
                    "landmark {i} has invalid geometry"
                )));
            }
        }
        Ok(())
    }

    fn occluded(&self, from: Vec2, to: Vec2) -> bool {
        self.occluders.iter().any(|s| s.intersects(from, to))
    }

    /// Landmarks whose center lies within the view wedge, within `cfg.d_max`,
    /// and with no occluder crossing the sight line to the center.
    pub fn visible_set(&self, pose: &CameraPose, cfg: &OverlapConfig) -> BTreeSet<u32> {
        let o = pose.position();
        let r2 = cfg.d_max * cfg.d_max;
        self.landmarks
            .iter()
            .filter(|l| (l.position - o).norm_sq() <= r2)
            .filter(|l| pose.wedge_contains(l.position))
            .filter(|l| !self.occluded(o, l.position))
            .map(|l| l.id)
            .collect()
    }

    /// Raycasts [`PANORAMA_COLUMNS`] columns.
    pub fn render_panorama(&self, pose: &CameraPose, cfg: &OverlapConfig) -> Panorama {
        self.render_panorama_with(pose, cfg, PANORAMA_COLUMNS)
    }

    pub fn render_panorama_with(
        &self,
        pose: &CameraPose,
        cfg: &OverlapConfig,
        columns: usize,
    ) -> Panorama {
        let o = pose.position();
        let reach = cfg.d_max;
        let nearby: Vec<&Landmark> = self
            .landmarks
            .iter()
            .filter(|l| (l.position - o).norm() <= reach + l.radius)
            .collect();
        let columns = column_angles(pose, columns.max(1))
            .into_iter()
            .map(|a| {
                let dir = Vec2::from_angle(a);
                let wall = self
                    .occluders
                    .iter()
                    .filter_map(|s| s.ray_hit(o, dir))
                    .fold(f64::INFINITY, f64::min);
                let mut best: Option<ColumnHit> = None;
                for l in &nearby {
                    if let Some(t) = ray_circle(o, dir, l.position, l.radius) {
                        if t <= reach && t < wall && best.is_none_or(|b| t < b.depth) {
                            best = Some(ColumnHit {
                                landmark: l.id,
                                depth: t,
                            });
                        }
                    }
                }
                best
            })
            .collect();
        Panorama { columns }
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), WorldError> {
        json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), WorldError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_json(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let world: WorldModel = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        world.validate()?;
        Ok(world)
    }
}

/// Ground-truth co-visibility: at least `threshold` shared visible landmarks.
pub fn co_visible(a: &BTreeSet<u32>, b: &BTreeSet<u32>, threshold: usize) -> bool {
    a.intersection(b).take(threshold).count() >= threshold.max(1)
}
