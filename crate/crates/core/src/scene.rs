//! Scene composition: pinhole camera, directional light, and scattering of
//! plants and distractor objects on the terrain.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{GeneratorConfig, PaletteSpec, PlantClass};
use crate::error::{Error, Result};
use crate::leafgen::LeafTemplate;
use crate::math::{rotation_from_z, Mat4, UnitQuat, Vec3};
use crate::plantgen::{assemble_plant, leaf_template, plant_bounding_radius, PlantInstance};
use crate::rng::Rng;
use crate::terrain::{build_terrain, sample_terrain, TerrainPatch};

/// Directional light plus ambient term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightSpec {
    /// Unit vector from the surface towards the light.
    pub direction: [f64; 3],
    pub intensity: f64,
    pub ambient: f64,
    pub color: [f64; 3],
}

impl LightSpec {
    pub fn direction(&self) -> Vec3 {
        Vec3::from(self.direction)
    }

    /// Light drawn from the configured ranges.
    pub fn sample(ranges: &crate::config::LightRanges, rng: &mut Rng) -> Self {
        let elevation = rng
            .uniform(ranges.elevation_deg[0], ranges.elevation_deg[1])
            .to_radians();
        let azimuth = rng
            .uniform(ranges.azimuth_deg[0], ranges.azimuth_deg[1])
            .to_radians();
        let intensity = rng.uniform(ranges.intensity[0], ranges.intensity[1]);
        let ambient = rng.uniform(ranges.ambient[0], ranges.ambient[1]);
        let (se, ce) = elevation.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Self {
            direction: [ce * ca, ce * sa, se],
            intensity,
            ambient,
            color: ranges.color,
        }
    }
}

/// Pinhole camera. Camera frame: x right, y down, z forward.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub world_to_camera: Mat4,
}

impl CameraModel {
    /// Camera at `center` whose optical axis has the given yaw (heading from
    /// `+x` towards `+y`) and pitch (elevation, `-90` straight down), degrees.
    pub fn look(
        intrinsics: [f64; 4],
        size: [u32; 2],
        center: Vec3,
        yaw_deg: f64,
        pitch_deg: f64,
    ) -> Result<Self> {
        let [fx, fy, cx, cy] = intrinsics;
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidArgument("focal lengths must be > 0".into()));
        }
        if !(0.0..f64::from(size[0])).contains(&cx) || !(0.0..f64::from(size[1])).contains(&cy) {
            return Err(Error::InvalidArgument("principal point outside the image".into()));
        }
        let (yaw, pitch) = (yaw_deg.to_radians(), pitch_deg.to_radians());
        let forward = if pitch_deg == -90.0 {
            -Vec3::z()
        } else {
            Vec3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin())
        };
        let right = Vec3::new(yaw.sin(), -yaw.cos(), 0.0);
        let down = forward.cross(&right);
        let mut m = Mat4::identity();
        for (row, axis) in [right, down, forward].iter().enumerate() {
            for col in 0..3 {
                m[(row, col)] = axis[col];
            }
            m[(row, 3)] = -axis.dot(&center);
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width: size[0],
            height: size[1],
            world_to_camera: m,
        })
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        crate::math::transform_point(&self.world_to_camera, p)
    }

    /// World position of the optical center.
    pub fn center(&self) -> Vec3 {
        let r = self.world_to_camera.fixed_view::<3, 3>(0, 0);
        let t = Vec3::new(
            self.world_to_camera[(0, 3)],
            self.world_to_camera[(1, 3)],
            self.world_to_camera[(2, 3)],
        );
        -(r.transpose() * t)
    }

    /// World-space unit direction of the ray through image point `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        let c = Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let r = self.world_to_camera.fixed_view::<3, 3>(0, 0);
        (r.transpose() * c).normalize()
    }

    /// Same pose with the image scaled by an integer factor.
    pub fn scaled(&self, factor: u32) -> Self {
        let f = f64::from(factor);
        Self {
            fx: self.fx * f,
            fy: self.fy * f,
            cx: self.cx * f,
            cy: self.cy * f,
            width: self.width * factor,
            height: self.height * factor,
            world_to_camera: self.world_to_camera,
        }
    }
}

/// Pinhole projection: `(fx X/Z + cx, fy Y/Z + cy, Z)` in camera coordinates.
pub fn project(camera: &CameraModel, world: &Vec3) -> Result<(f64, f64, f64)> {
    let c = camera.to_camera(world);
    if !(c.z > 0.0) {
        return Err(Error::BehindCamera { depth: c.z });
    }
    Ok((
        camera.fx * c.x / c.z + camera.cx,
        camera.fy * c.y / c.z + camera.cy,
        c.z,
    ))
}

/// Intrinsics scaled from the reference sensor to the output size.
pub fn default_intrinsics(config: &GeneratorConfig) -> [f64; 4] {
    let cam = &config.camera;
    let sx = f64::from(config.image.width) / f64::from(cam.reference_sensor[0]);
    let sy = f64::from(config.image.height) / f64::from(cam.reference_sensor[1]);
    let [pcx, pcy] = cam.reference_principal_px.unwrap_or([
        f64::from(cam.reference_sensor[0]) / 2.0,
        f64::from(cam.reference_sensor[1]) / 2.0,
    ]);
    [
        cam.reference_focal_px[0] * sx,
        cam.reference_focal_px[1] * sy,
        pcx * sx,
        pcy * sy,
    ]
}

/// Camera at the configured ground position and height with the given yaw.
pub fn default_camera(config: &GeneratorConfig, yaw_deg: f64) -> Result<CameraModel> {
    let cam = &config.camera;
    CameraModel::look(
        default_intrinsics(config),
        [config.image.width, config.image.height],
        Vec3::new(cam.position_m[0], cam.position_m[1], cam.height_m),
        yaw_deg,
        cam.pitch_deg,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistractorKind {
    Rock,
    Stick,
}

/// A soil-class object: flat-shaded triangle mesh with a single albedo.
#[derive(Debug, Clone)]
pub struct Distractor {
    pub kind: DistractorKind,
    pub positions: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub albedo: [f32; 3],
}

/// Icosphere of the given subdivision level on the unit sphere.
fn icosphere(level: u32) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints = BTreeMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    (verts, tris)
}

fn make_rock(at: Vec3, normal: Vec3, rng: &mut Rng) -> Distractor {
    let (unit, triangles) = icosphere(1);
    let radius = rng.uniform(0.01, 0.035);
    let squash = rng.uniform(0.45, 0.75);
    let lumps: Vec<(Vec3, f64)> = (0..4)
        .map(|_| {
            let z: f64 = rng.uniform(-1.0, 1.0);
            let phi = rng.uniform(0.0, TAU);
            let s = (1.0 - z * z).sqrt();
            (Vec3::new(s * phi.cos(), s * phi.sin(), z), rng.uniform(-0.2, 0.2))
        })
        .collect();
    let frame = rotation_from_z(&normal) * UnitQuat::from_axis_angle(&Vec3::z_axis(), rng.uniform(0.0, TAU));
    let positions = unit
        .iter()
        .map(|u| {
            let bump: f64 = lumps.iter().map(|(dir, amp)| amp * u.dot(dir).max(0.0).powi(2)).sum();
            let local = Vec3::new(u.x, u.y, u.z * squash) * radius * (1.0 + bump);
            // Sink the lower part into the ground.
            at + frame * (local - Vec3::new(0.0, 0.0, 0.3 * radius * squash))
        })
        .collect();
    let v = rng.uniform(0.38, 0.6);
    let warm = rng.uniform(0.0, 0.06) as f32;
    Distractor {
        kind: DistractorKind::Rock,
        positions,
        triangles,
        albedo: [v as f32 + warm, v as f32 + warm * 0.5, v as f32 - warm * 0.3],
    }
}

fn make_stick(at: Vec3, normal: Vec3, rng: &mut Rng) -> Distractor {
    const SIDES: u32 = 6;
    const SEGMENTS: u32 = 6;
    let length = rng.uniform(0.05, 0.16);
    let radius = rng.uniform(0.002, 0.005);
    let curve = rng.uniform(-0.4, 0.4);
    let frame = rotation_from_z(&normal) * UnitQuat::from_axis_angle(&Vec3::z_axis(), rng.uniform(0.0, TAU));
    let mut positions = Vec::new();
    for s in 0..=SEGMENTS {
        let t = f64::from(s) / f64::from(SEGMENTS) - 0.5;
        // Centerline bends sideways along an arc in the ground plane.
        let center = Vec3::new(t * length, curve * length * (t * t - 0.25), radius * 0.6);
        for k in 0..SIDES {
            let a = TAU * f64::from(k) / f64::from(SIDES);
            let offset = Vec3::new(0.0, a.cos() * radius, a.sin() * radius);
            positions.push(at + frame * (center + offset));
        }
    }
    let mut triangles = Vec::new();
    for s in 0..SEGMENTS {
        for k in 0..SIDES {
            let a = s * SIDES + k;
            let b = s * SIDES + (k + 1) % SIDES;
            let (c, d) = (a + SIDES, b + SIDES);
            triangles.push([a, b, d]);
            triangles.push([a, d, c]);
        }
    }
    for (ring, flip) in [(0, false), (SEGMENTS, true)] {
        for k in 1..SIDES - 1 {
            let base = ring * SIDES;
            let tri = [base, base + k, base + k + 1];
            triangles.push(if flip { [tri[0], tri[2], tri[1]] } else { tri });
        }
    }
    let v = rng.uniform(0.3, 0.5) as f32;
    Distractor {
        kind: DistractorKind::Stick,
        positions,
        triangles,
        albedo: [v * 1.15, v * 0.9, v * 0.6],
    }
}

/// Label colors per semantic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPalette {
    pub soil: [u8; 3],
    pub crop: [u8; 3],
    pub weed: [u8; 3],
    pub background: [u8; 3],
}

impl From<&PaletteSpec> for LabelPalette {
    fn from(p: &PaletteSpec) -> Self {
        Self {
            soil: p.soil,
            crop: p.crop,
            weed: p.weed,
            background: p.background,
        }
    }
}

impl Default for LabelPalette {
    fn default() -> Self {
        Self::from(&PaletteSpec::default())
    }
}

impl LabelPalette {
    pub fn color(&self, class: crate::config::SemanticClass) -> [u8; 3] {
        use crate::config::SemanticClass::*;
        match class {
            Soil => self.soil,
            Crop => self.crop,
            Weed => self.weed,
        }
    }

    /// Class of a label color; the background color counts as soil.
    pub fn class_of(&self, color: [u8; 3]) -> Option<crate::config::SemanticClass> {
        use crate::config::SemanticClass::*;
        if color == self.soil || color == self.background {
            Some(Soil)
        } else if color == self.crop {
            Some(Crop)
        } else if color == self.weed {
            Some(Weed)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub terrain: Arc<TerrainPatch>,
    pub plants: Vec<PlantInstance>,
    pub distractors: Vec<Distractor>,
    pub light: LightSpec,
    pub camera: CameraModel,
    pub palette: LabelPalette,
    /// Camera heading used for this scene, degrees.
    pub yaw_deg: f64,
    /// Placement problems, e.g. plants dropped after exhausting retries.
    pub warnings: Vec<String>,
}

/// Plants and distractors placed by [`scatter`].
#[derive(Debug, Clone, Default)]
pub struct Scattered {
    pub plants: Vec<PlantInstance>,
    pub radii: Vec<f64>,
    pub distractors: Vec<Distractor>,
    pub warnings: Vec<String>,
}

/// Growth axis: `normal` tilted by `|N(0, sigma)|` capped at `cone`, towards a
/// uniform random azimuth.
fn perturb_axis(normal: &Vec3, sigma: f64, cone: f64, rng: &mut Rng) -> Vec3 {
    let tilt = if sigma > 0.0 {
        rng.normal(0.0, sigma).abs().min(cone)
    } else {
        0.0
    };
    let phi = rng.uniform(0.0, TAU);
    if tilt == 0.0 {
        return *normal;
    }
    let local = Vec3::new(tilt.sin() * phi.cos(), tilt.sin() * phi.sin(), tilt.cos());
    (rotation_from_z(normal) * local).normalize()
}

fn draw_count(range: [i64; 2], rng: &mut Rng) -> u64 {
    let lo = range[0].max(0) as u64;
    let hi = range[1].max(0) as u64;
    rng.range_inclusive(lo, hi.max(lo))
}

/// Place plants and distractors inside the scatter rectangle.
///
/// `templates` holds one leaf template per configured species.
pub fn scatter(
    config: &GeneratorConfig,
    terrain: &TerrainPatch,
    templates: &[Arc<LeafTemplate>],
    rng: &mut Rng,
) -> Result<Scattered> {
    if templates.len() != config.species.len() {
        return Err(Error::InvalidArgument(format!(
            "{} leaf templates for {} species",
            templates.len(),
            config.species.len()
        )));
    }
    let sc = &config.scatter;
    let center = config.camera.position_m;
    let half = [sc.area_m[0] / 2.0, sc.area_m[1] / 2.0];
    let weights = config.spawn_weights();
    let sigma = sc.axis_noise_deg.to_radians();
    let cone = sc.axis_cone_deg.to_radians();
    let mut out = Scattered::default();

    let mut plant_rng = rng.fork("plants");
    let count = draw_count(sc.plant_count, &mut plant_rng);
    for k in 0..count {
        let mut slot = plant_rng.fork_index("plant", k);
        let Some(si) = slot.weighted_index(&weights) else {
            break;
        };
        let species = &config.species[si];
        let stage = slot.below(species.stages.len());
        let shape_seed = slot.next_u64();
        let mut placed = None;
        for _ in 0..=sc.max_retries {
            let mut x = center[0] + slot.uniform(-half[0], half[0]);
            let y = center[1] + slot.uniform(-half[1], half[1]);
            if sc.rows.enabled && species.class == PlantClass::Crop {
                let spacing = sc.rows.spacing_m;
                let row = ((x - sc.rows.offset_m) / spacing).round();
                let jitter = slot.normal(0.0, sc.rows.lateral_jitter_m);
                x = (sc.rows.offset_m + row * spacing + jitter)
                    .clamp(center[0] - half[0], center[0] + half[0]);
            }
            let (h, normal) = sample_terrain(terrain, x, y)?;
            let axis = perturb_axis(&normal, sigma, cone, &mut slot);
            let plant = assemble_plant(
                species,
                &templates[si],
                stage,
                Vec3::new(x, y, h),
                axis,
                &mut Rng::new(shape_seed),
            )?;
            let r = plant_bounding_radius(&plant);
            let clear = out.plants.iter().zip(&out.radii).all(|(other, ro)| {
                (other.position.xy() - plant.position.xy()).norm() >= sc.overlap_factor * (r + ro)
            });
            if clear {
                placed = Some((plant, r));
                break;
            }
        }
        match placed {
            Some((plant, r)) => {
                out.plants.push(plant);
                out.radii.push(r);
            }
            None => out.warnings.push(format!(
                "plant {k} ({}) dropped after {} placement retries",
                species.name, sc.max_retries
            )),
        }
    }

    let mut distractor_rng = rng.fork("distractors");
    let count = draw_count(sc.distractor_count, &mut distractor_rng);
    for k in 0..count {
        let mut slot = distractor_rng.fork_index("distractor", k);
        let x = center[0] + slot.uniform(-half[0], half[0]);
        let y = center[1] + slot.uniform(-half[1], half[1]);
        let (h, normal) = sample_terrain(terrain, x, y)?;
        let at = Vec3::new(x, y, h);
        out.distractors.push(if slot.chance(0.6) {
            make_rock(at, normal, &mut slot)
        } else {
            make_stick(at, normal, &mut slot)
        });
    }
    Ok(out)
}

/// Build the full scene of one image from its random stream.
pub fn build_scene(config: &GeneratorConfig, rng: &Rng) -> Result<Scene> {
    let terrain = Arc::new(build_terrain(&config.terrain, &mut rng.fork("terrain"))?);
    let leaf_rng = rng.fork("leaves");
    let templates = config
        .species
        .iter()
        .enumerate()
        .map(|(i, s)| leaf_template(s, &mut leaf_rng.fork_index("species", i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let scattered = scatter(config, &terrain, &templates, &mut rng.fork("scatter"))?;
    let light = LightSpec::sample(&config.light, &mut rng.fork("light"));
    let mut cam_rng = rng.fork("camera");
    let [y0, y1] = config.camera.yaw_range_deg;
    let yaw_deg = cam_rng.uniform(y0, y1);
    let camera = default_camera(config, yaw_deg)?;
    Ok(Scene {
        terrain,
        plants: scattered.plants,
        distractors: scattered.distractors,
        light,
        camera,
        palette: LabelPalette::from(&config.palette),
        yaw_deg,
        warnings: scattered.warnings,
    })
}

impl Scene {
    /// Number of placed plants per class.
    pub fn census(&self) -> BTreeMap<PlantClass, usize> {
        let mut census = BTreeMap::from([(PlantClass::Crop, 0), (PlantClass::Weed, 0)]);
        for p in &self.plants {
            *census.entry(p.class).or_default() += 1;
        }
        census
    }
}

/// Angle between two unit vectors, radians.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().min(PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{PlantClass, TerrainSpec};

    fn small_config(seed: u64) -> GeneratorConfig {
        let mut cfg = GeneratorConfig::with_seed(seed);
        cfg.terrain = TerrainSpec {
            grid: [33, 33],
            texture_resolution: 64,
            soil_texture_size: 32,
            ..TerrainSpec::default()
        };
        cfg
    }

    fn templates(cfg: &GeneratorConfig) -> Vec<Arc<LeafTemplate>> {
        cfg.species
            .iter()
            .map(|s| leaf_template(s, &mut Rng::new(0)).unwrap())
            .collect()
    }

    fn terrain(cfg: &GeneratorConfig) -> TerrainPatch {
        build_terrain(&cfg.terrain, &mut Rng::new(cfg.seed)).unwrap()
    }

    #[test]
    fn principal_point_and_direct_formula() {
        let cam = CameraModel::look([100.0, 100.0, 240.0, 180.0], [480, 360], Vec3::zeros(), 0.0, -90.0)
            .unwrap();
        // Camera looks along -z; its x axis is world -y and its y axis world -x.
        let (u, v, z) = project(&cam, &Vec3::new(0.0, 0.0, -3.0)).unwrap();
        assert_eq!((u, v, z), (240.0, 180.0, 3.0));
        let (u, _, _) = project(&cam, &Vec3::new(0.0, -1.0, -2.0)).unwrap();
        assert!((u - 290.0).abs() < 1e-12);
        assert!(matches!(
            project(&cam, &Vec3::new(0.0, 0.0, 1.0)),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn projection_matches_homogeneous_oracle() {
        let mut rng = Rng::new(1);
        let cam = CameraModel::look([420.0, 415.0, 239.0, 181.0], [480, 360], Vec3::new(0.1, 0.2, 1.0), 33.0, -70.0)
            .unwrap();
        // K [R | t] built independently from the camera axes.
        let yaw = 33f64.to_radians();
        let pitch = -70f64.to_radians();
        let f = Vec3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin());
        let r = Vec3::new(yaw.sin(), -yaw.cos(), 0.0);
        let d = f.cross(&r);
        let c = Vec3::new(0.1, 0.2, 1.0);
        let rt = nalgebra::Matrix3x4::new(
            r.x, r.y, r.z, -r.dot(&c),
            d.x, d.y, d.z, -d.dot(&c),
            f.x, f.y, f.z, -f.dot(&c),
        );
        let k = nalgebra::Matrix3::new(420.0, 0.0, 239.0, 0.0, 415.0, 181.0, 0.0, 0.0, 1.0);
        let p = k * rt;
        let mut checked = 0;
        while checked < 100 {
            let w = Vec3::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5));
            let h = p * nalgebra::Vector4::new(w.x, w.y, w.z, 1.0);
            if h.z <= 0.0 {
                continue;
            }
            let (u, v, z) = project(&cam, &w).unwrap();
            assert!((u - h.x / h.z).abs() < 1e-9 && (v - h.y / h.z).abs() < 1e-9);
            assert!((z - h.z).abs() < 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn default_camera_framing() {
        let cfg = GeneratorConfig::with_seed(1);
        let cam = default_camera(&cfg, 0.0).unwrap();
        assert_eq!((cam.width, cam.height), (480, 360));
        // Optical axis is antiparallel to the ground normal.
        let axis = cam.ray_direction(cam.cx, cam.cy);
        assert!((axis + Vec3::z()).norm() < 1e-12);
        // All four corner rays hit the flat ground inside the patch.
        let o = cam.center();
        for (u, v) in [(0.0, 0.0), (480.0, 0.0), (0.0, 360.0), (480.0, 360.0)] {
            let d = cam.ray_direction(u, v);
            assert!(d.z < 0.0);
            let t = -o.z / d.z;
            let hit = o + d * t;
            assert!(hit.x.abs() < cfg.terrain.extent_m[0] / 2.0);
            assert!(hit.y.abs() < cfg.terrain.extent_m[1] / 2.0);
        }
    }

    #[test]
    fn empty_count_range_gives_no_plants() {
        let mut cfg = small_config(1);
        cfg.scatter.plant_count = [0, 0];
        cfg.scatter.distractor_count = [0, 0];
        let t = terrain(&cfg);
        let out = scatter(&cfg, &t, &templates(&cfg), &mut Rng::new(1)).unwrap();
        assert!(out.plants.is_empty() && out.distractors.is_empty());
    }

    #[test]
    fn zero_weight_species_never_spawn() {
        let mut cfg = small_config(2);
        cfg.mix = [("capsella".to_string(), 1.0), ("galium".to_string(), 0.0)].into();
        cfg.validate().unwrap();
        let t = terrain(&cfg);
        let tpl = templates(&cfg);
        for seed in 0..20 {
            let out = scatter(&cfg, &t, &tpl, &mut Rng::new(seed)).unwrap();
            assert!(out.plants.iter().all(|p| p.species == "capsella"));
        }
    }

    #[test]
    fn mean_plant_count_is_centered() {
        let mut cfg = small_config(3);
        cfg.scatter.plant_count = [5, 10];
        cfg.scatter.overlap_factor = 0.0;
        cfg.species.iter_mut().for_each(|s| s.stages.truncate(1));
        let t = terrain(&cfg);
        let tpl = templates(&cfg);
        let total: usize = (0..1000)
            .map(|seed| {
                let mut rng = Rng::new(seed).fork("plants");
                draw_count(cfg.scatter.plant_count, &mut rng) as usize
            })
            .sum();
        let mean = total as f64 / 1000.0;
        assert!((7.0..=8.0).contains(&mean), "{mean}");
        // With overlap disabled the scatterer places every drawn plant.
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let expected = draw_count(cfg.scatter.plant_count, &mut rng.fork("plants"));
            let out = scatter(&cfg, &t, &tpl, &mut rng).unwrap();
            assert_eq!(out.plants.len() as u64, expected);
        }
    }

    #[test]
    fn overlap_policy_and_axis_cone_hold() {
        let cfg = small_config(4);
        let t = terrain(&cfg);
        let tpl = templates(&cfg);
        let cone = cfg.scatter.axis_cone_deg.to_radians();
        for seed in 0..1000 {
            let out = scatter(&cfg, &t, &tpl, &mut Rng::new(seed)).unwrap();
            for i in 0..out.plants.len() {
                let p = &out.plants[i];
                assert!(t.contains(p.position.x, p.position.y));
                let (_, n) = sample_terrain(&t, p.position.x, p.position.y).unwrap();
                assert!(angle_between(&p.axis, &n) <= cone + 1e-9);
                for j in 0..i {
                    let q = &out.plants[j];
                    let dist = (p.position.xy() - q.position.xy()).norm();
                    assert!(dist >= cfg.scatter.overlap_factor * (out.radii[i] + out.radii[j]));
                }
            }
        }
    }

    #[test]
    fn zero_axis_noise_follows_normal() {
        let mut cfg = small_config(5);
        cfg.scatter.axis_noise_deg = 0.0;
        let t = terrain(&cfg);
        let out = scatter(&cfg, &t, &templates(&cfg), &mut Rng::new(5)).unwrap();
        assert!(!out.plants.is_empty());
        for p in &out.plants {
            let (_, n) = sample_terrain(&t, p.position.x, p.position.y).unwrap();
            assert!((p.axis - n).norm() < 1e-6);
        }
    }

    #[test]
    fn crop_rows_snap_positions() {
        let mut cfg = small_config(6);
        cfg.mix = [("sugar_beet".to_string(), 1.0)].into();
        cfg.scatter.rows.lateral_jitter_m = 0.0;
        cfg.scatter.overlap_factor = 0.0;
        let t = terrain(&cfg);
        let out = scatter(&cfg, &t, &templates(&cfg), &mut Rng::new(6)).unwrap();
        for p in &out.plants {
            assert_eq!(p.class, PlantClass::Crop);
            let k = p.position.x / cfg.scatter.rows.spacing_m;
            let inside = p.position.x.abs() < cfg.scatter.area_m[0] / 2.0;
            assert!(!inside || (k - k.round()).abs() < 1e-9, "x = {}", p.position.x);
        }
    }

    #[test]
    fn scenes_are_deterministic() {
        let cfg = small_config(7);
        let a = build_scene(&cfg, &Rng::new(7)).unwrap();
        let b = build_scene(&cfg, &Rng::new(7)).unwrap();
        assert_eq!(a.plants.len(), b.plants.len());
        assert_eq!(a.light, b.light);
        for (p, q) in a.plants.iter().zip(&b.plants) {
            assert_eq!(p.position, q.position);
            assert_eq!(p.leaves[0].positions, q.leaves[0].positions);
        }
    }

    #[test]
    fn icosphere_is_closed() {
        let (v, t) = icosphere(1);
        assert_eq!((v.len(), t.len()), (42, 80));
        let mut edges = BTreeMap::new();
        for tri in &t {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        assert!(edges.values().all(|c| *c == 2));
    }
}
