//! Multi-layer radial assembly of posed leaves into a plant.
//!
//! A plant is anchored at `p` with growth axis `d`. Layer `s` holds `N_l`
//! leaves spread around `d`; each leaf is inclined above the plane normal to
//! `d` by the species' per-layer elevation, scaled by `r * S_l` and posed
//! with a random gravity bend.

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::config::{PlantClass, SemanticClass, SpeciesSpec};
use crate::error::{Error, Result};
use crate::leafgen::{
    randomize_pose, skin_mesh, synth_leaf_texture, LeafTemplate, PosedLeafMesh,
};
use crate::math::{from_rotation_translation, rotation_from_z, Mat4, UnitQuat, Vec3};
use crate::raster::read_rgba;
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct PlantInstance {
    pub position: Vec3,
    /// Unit growth axis.
    pub axis: Vec3,
    pub species: String,
    pub class: PlantClass,
    pub stage: usize,
    pub leaves: Vec<PosedLeafMesh>,
    /// Azimuth of each leaf around the axis, radians.
    pub azimuths: Vec<f64>,
    /// Realized leaf size `r * S_l`, meters.
    pub sizes: Vec<f64>,
    /// 1-based layer of each leaf.
    pub layers: Vec<u32>,
}

/// `cycle * i / n + alpha_i` with `alpha_i` uniform in `[-jitter, jitter]`.
///
/// `cycle` is the full-circle constant, `2π` for an even radial spread.
pub fn layer_azimuths(n: u32, jitter: f64, cycle: f64, rng: &mut Rng) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let alpha = if jitter > 0.0 {
                rng.uniform(-jitter, jitter)
            } else {
                0.0
            };
            cycle * f64::from(i) / f64::from(n) + alpha
        })
        .collect()
}

/// Leaf template of a species: the configured texture file, or a procedural
/// texture drawn from `rng`.
pub fn leaf_template(species: &SpeciesSpec, rng: &mut Rng) -> Result<Arc<LeafTemplate>> {
    let albedo = match &species.leaf.texture_path {
        Some(path) => read_rgba(path)?,
        None => synth_leaf_texture(&species.leaf, rng),
    };
    Ok(Arc::new(LeafTemplate::build(&species.leaf, albedo)?))
}

/// Rotation from the leaf frame (x along the leaf, z its normal) to the plant
/// frame (z along the growth axis) for a given azimuth and elevation.
fn leaf_orientation(azimuth: f64, elevation: f64) -> UnitQuat {
    UnitQuat::from_axis_angle(&Vec3::z_axis(), azimuth)
        * UnitQuat::from_axis_angle(&Vec3::y_axis(), -elevation)
}

/// Assemble a plant of growth stage `stage` (0-based) at `p` with axis `d`.
pub fn assemble_plant(
    species: &SpeciesSpec,
    template: &Arc<LeafTemplate>,
    stage: usize,
    p: Vec3,
    d: Vec3,
    rng: &mut Rng,
) -> Result<PlantInstance> {
    let stage_spec = species.stages.get(stage).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "species '{}' has {} growth stages, requested stage {stage}",
            species.name,
            species.stages.len()
        ))
    })?;
    let norm = d.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("growth axis must be nonzero".into()));
    }
    let axis = d / norm;
    let plant_frame = rotation_from_z(&axis);
    let heading = rng.uniform(0.0, TAU);
    let class = SemanticClass::from(species.class);
    let jitter = species.alpha_jitter_deg.to_radians();
    let cycle = species.azimuth_cycle_deg.to_radians();
    let [r_min, r_max] = species.size_jitter;
    let [bend_min, bend_max] = species.bend_deg;
    let sigma = species.pose_jitter_deg.to_radians();

    let mut plant = PlantInstance {
        position: p,
        axis,
        species: species.name.clone(),
        class: species.class,
        stage,
        leaves: Vec::new(),
        azimuths: Vec::new(),
        sizes: Vec::new(),
        layers: Vec::new(),
    };
    for layer in 1..=stage_spec.layers {
        let elevation = species.layer_inclination(layer).to_radians();
        // Successive layers are staggered by half a slot.
        let stagger = if layer % 2 == 0 {
            0.5 * cycle / f64::from(species.leaves_per_layer)
        } else {
            0.0
        };
        for azimuth in layer_azimuths(species.leaves_per_layer, jitter, cycle, rng) {
            let azimuth = azimuth + heading + stagger;
            let r = rng.uniform(r_min, r_max);
            let size = r * stage_spec.leaf_size_m;
            let bend = rng.uniform(bend_min, bend_max).to_radians();
            let mut posed = randomize_pose(&template.skeleton, bend, sigma, rng);
            let rotation = plant_frame * leaf_orientation(azimuth, elevation);
            posed.base = from_rotation_translation(&rotation, p) * Mat4::new_scaling(size);
            plant.leaves.push(skin_mesh(template, &posed, class)?);
            plant.azimuths.push(azimuth);
            plant.sizes.push(size);
            plant.layers.push(layer);
        }
    }
    Ok(plant)
}

/// Radius of the smallest vertical cylinder around `p` holding every leaf
/// vertex.
pub fn plant_bounding_radius(plant: &PlantInstance) -> f64 {
    plant
        .leaves
        .iter()
        .flat_map(|leaf| &leaf.positions)
        .map(|v| (v.x - plant.position.x).hypot(v.y - plant.position.y))
        .fold(0.0, f64::max)
}
