//! Generator configuration: schema, defaults, validation and presets.
//!
//! Files are TOML. Lengths are meters, angles are degrees in the file and
//! converted to radians at the point of use. The seed is mandatory. See
//! `docs/config.md` for the field reference.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference sensor the default intrinsics are scaled from.
pub const REFERENCE_SENSOR: [u32; 2] = [1296, 966];
pub const DEFAULT_IMAGE_SIZE: [u32; 2] = [480, 360];
pub const DEFAULT_DATASET_SIZE: u64 = 1300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    #[serde(default = "default_dataset_size")]
    pub dataset_size: u64,
    #[serde(default)]
    pub image: ImageSpec,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub light: LightRanges,
    #[serde(default)]
    pub terrain: TerrainSpec,
    #[serde(default)]
    pub scatter: ScatterSpec,
    #[serde(default)]
    pub palette: PaletteSpec,
    #[serde(default)]
    pub render: RenderSpec,
    #[serde(default = "default_species")]
    pub species: Vec<SpeciesSpec>,
    /// Spawn weight per species name. Empty means weight 1 for every species;
    /// otherwise species missing from the table get weight 0.
    #[serde(default)]
    pub mix: BTreeMap<String, f64>,
}

fn default_dataset_size() -> u64 {
    DEFAULT_DATASET_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageSpec {
    pub width: u32,
    pub height: u32,
}

impl Default for ImageSpec {
    fn default() -> Self {
        Self {
            width: DEFAULT_IMAGE_SIZE[0],
            height: DEFAULT_IMAGE_SIZE[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSpec {
    pub height_m: f64,
    /// Optical axis elevation; -90 looks straight down.
    pub pitch_deg: f64,
    /// Heading drawn uniformly from this range per image.
    pub yaw_range_deg: [f64; 2],
    /// Camera ground position.
    pub position_m: [f64; 2],
    pub reference_sensor: [u32; 2],
    /// Focal lengths (fx, fy) in pixels of the reference sensor.
    pub reference_focal_px: [f64; 2],
    /// Principal point of the reference sensor; sensor center when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_principal_px: Option<[f64; 2]>,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            height_m: 1.0,
            pitch_deg: -90.0,
            yaw_range_deg: [0.0, 360.0],
            position_m: [0.0, 0.0],
            reference_sensor: REFERENCE_SENSOR,
            reference_focal_px: [1100.0, 1100.0],
            reference_principal_px: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightRanges {
    pub elevation_deg: [f64; 2],
    pub azimuth_deg: [f64; 2],
    pub intensity: [f64; 2],
    pub ambient: [f64; 2],
    pub color: [f64; 3],
}

impl Default for LightRanges {
    fn default() -> Self {
        Self {
            elevation_deg: [35.0, 85.0],
            azimuth_deg: [0.0, 360.0],
            intensity: [0.55, 0.9],
            ambient: [0.3, 0.45],
            color: [1.0, 0.97, 0.92],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub octaves: u32,
    pub frequency: f64,
    pub persistence: f64,
    pub lacunarity: f64,
}

impl NoiseSpec {
    pub fn with_frequency(frequency: f64) -> Self {
        Self {
            frequency,
            ..Self::default()
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            octaves: 4,
            frequency: 0.5,
            persistence: 0.5,
            lacunarity: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoilSpec {
    /// Procedural kind: `dirt`, `cracked` or `stony`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Lossless RGBA texture file used instead of a procedural kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl SoilSpec {
    pub fn kind(kind: &str) -> Self {
        Self {
            kind: Some(kind.to_string()),
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainSpec {
    pub extent_m: [f64; 2],
    pub grid: [u32; 2],
    pub amplitude_m: f64,
    /// Resolution of the blended soil texture covering the whole patch.
    pub texture_resolution: u32,
    /// Resolution of each soil texture before blending.
    pub soil_texture_size: u32,
    pub blend_noise: NoiseSpec,
    pub displacement_noise: NoiseSpec,
    pub soils: Vec<SoilSpec>,
}

impl Default for TerrainSpec {
    fn default() -> Self {
        Self {
            extent_m: [4.0, 4.0],
            grid: [128, 128],
            amplitude_m: 0.03,
            texture_resolution: 1024,
            soil_texture_size: 256,
            blend_noise: NoiseSpec::with_frequency(0.5),
            displacement_noise: NoiseSpec::with_frequency(0.25),
            soils: vec![
                SoilSpec::kind("dirt"),
                SoilSpec::kind("cracked"),
                SoilSpec::kind("stony"),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RowSpec {
    pub enabled: bool,
    pub spacing_m: f64,
    pub offset_m: f64,
    pub lateral_jitter_m: f64,
}

impl Default for RowSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            spacing_m: 0.45,
            offset_m: 0.0,
            lateral_jitter_m: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterSpec {
    /// Inclusive plant count range per image.
    pub plant_count: [i64; 2],
    /// Inclusive rock/stick count range per image.
    pub distractor_count: [i64; 2],
    /// Size of the scatter rectangle centered on the camera ground point.
    pub area_m: [f64; 2],
    pub overlap_factor: f64,
    pub max_retries: u32,
    /// Standard deviation of the growth-axis perturbation.
    pub axis_noise_deg: f64,
    /// Hard cap on the angle between growth axis and terrain normal.
    pub axis_cone_deg: f64,
    pub rows: RowSpec,
}

impl Default for ScatterSpec {
    fn default() -> Self {
        Self {
            plant_count: [6, 14],
            distractor_count: [0, 4],
            area_m: [1.4, 1.1],
            overlap_factor: 0.6,
            max_retries: 30,
            axis_noise_deg: 4.0,
            axis_cone_deg: 12.0,
            rows: RowSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaletteSpec {
    pub soil: [u8; 3],
    pub crop: [u8; 3],
    pub weed: [u8; 3],
    /// Clear color for pixels no geometry covers.
    pub background: [u8; 3],
}

impl Default for PaletteSpec {
    fn default() -> Self {
        Self {
            soil: [0, 0, 0],
            crop: [0, 255, 0],
            weed: [255, 0, 0],
            background: [0, 0, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSpec {
    /// Supersampling factor for the RGB pass only; the label pass always
    /// uses one sample per pixel.
    pub rgb_supersample: u32,
    pub near_m: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            rgb_supersample: 1,
            near_m: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantClass {
    Crop,
    Weed,
}

/// Semantic label class of a rendered surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticClass {
    Soil,
    Crop,
    Weed,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 3] = [SemanticClass::Soil, SemanticClass::Crop, SemanticClass::Weed];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Soil => "soil",
            SemanticClass::Crop => "crop",
            SemanticClass::Weed => "weed",
        }
    }

    pub fn is_vegetation(self) -> bool {
        self != SemanticClass::Soil
    }
}

impl From<PlantClass> for SemanticClass {
    fn from(c: PlantClass) -> Self {
        match c {
            PlantClass::Crop => SemanticClass::Crop,
            PlantClass::Weed => SemanticClass::Weed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub layers: u32,
    pub leaf_size_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeafShapeSpec {
    pub stem_joints: u32,
    pub vein_joints: u32,
    /// Fraction of the leaf length taken by the stem (petiole).
    pub stem_fraction: f64,
    pub branch_pairs: u32,
    pub branch_angle_deg: f64,
    /// Branch link length relative to the local principal-vein spacing.
    pub branch_length_ratio: f64,
    /// Vertex grid (along, across).
    pub grid: [u32; 2],
    /// Blade width over leaf length.
    pub aspect: f64,
    /// Superellipse exponent of the blade outline.
    pub roundness: f64,
    pub lobes: u32,
    pub lobe_depth: f64,
    pub hue_deg: f64,
    pub hue_shift_deg: f64,
    pub saturation: f64,
    pub value: f64,
    pub vein_darkening: f64,
    pub texture_size: [u32; 2],
    /// Lossless RGBA leaf texture used instead of the procedural one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub texture_path: Option<PathBuf>,
}

impl Default for LeafShapeSpec {
    fn default() -> Self {
        Self {
            stem_joints: 2,
            vein_joints: 4,
            stem_fraction: 0.25,
            branch_pairs: 2,
            branch_angle_deg: 50.0,
            branch_length_ratio: 0.4,
            grid: [16, 8],
            aspect: 0.5,
            roundness: 2.0,
            lobes: 0,
            lobe_depth: 0.0,
            hue_deg: 95.0,
            hue_shift_deg: 0.0,
            saturation: 0.6,
            value: 0.5,
            vein_darkening: 0.2,
            texture_size: [128, 64],
            texture_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub name: String,
    pub class: PlantClass,
    pub leaves_per_layer: u32,
    /// One entry per growth stage.
    pub stages: Vec<StageSpec>,
    /// Per-leaf azimuth jitter, uniform in `[-j, j]`.
    #[serde(default)]
    pub alpha_jitter_deg: f64,
    /// Multiplicative leaf-size factor range `[r_min, r_max]`.
    #[serde(default = "default_size_jitter")]
    pub size_jitter: [f64; 2],
    /// Per-layer elevation of the leaf axis above the plane normal to the
    /// growth axis. Absent: `90 - 25 * layer`, clamped to at least 15.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_inclination_deg: Option<Vec<f64>>,
    /// Full-circle constant of the azimuth offset formula.
    #[serde(default = "default_azimuth_cycle")]
    pub azimuth_cycle_deg: f64,
    /// Gravity bend per leaf, drawn uniformly from this range.
    #[serde(default)]
    pub bend_deg: [f64; 2],
    /// Standard deviation of per-joint angle noise.
    #[serde(default)]
    pub pose_jitter_deg: f64,
    #[serde(default)]
    pub leaf: LeafShapeSpec,
}

fn default_size_jitter() -> [f64; 2] {
    [0.8, 1.2]
}

fn default_azimuth_cycle() -> f64 {
    360.0
}

impl SpeciesSpec {
    /// Leaf elevation in degrees for a 1-based layer index.
    pub fn layer_inclination(&self, layer: u32) -> f64 {
        match &self.layer_inclination_deg {
            Some(list) if !list.is_empty() => {
                let idx = (layer as usize).saturating_sub(1).min(list.len() - 1);
                list[idx]
            }
            _ => (90.0 - 25.0 * f64::from(layer)).max(15.0),
        }
    }
}

fn species(
    name: &str,
    class: PlantClass,
    leaves_per_layer: u32,
    sizes: [f64; 2],
    leaf: LeafShapeSpec,
) -> SpeciesSpec {
    SpeciesSpec {
        name: name.to_string(),
        class,
        leaves_per_layer,
        stages: vec![
            StageSpec {
                layers: 1,
                leaf_size_m: sizes[0],
            },
            StageSpec {
                layers: 2,
                leaf_size_m: sizes[1],
            },
        ],
        alpha_jitter_deg: 12.0,
        size_jitter: default_size_jitter(),
        layer_inclination_deg: None,
        azimuth_cycle_deg: 360.0,
        bend_deg: [10.0, 35.0],
        pose_jitter_deg: 4.0,
        leaf,
    }
}

/// Illustrative species table: a sugar-beet-like crop, two generic weeds, and
/// Capsella-like and Galium-like weeds.
pub fn default_species() -> Vec<SpeciesSpec> {
    vec![
        species(
            "sugar_beet",
            PlantClass::Crop,
            4,
            [0.05, 0.09],
            LeafShapeSpec {
                aspect: 0.6,
                roundness: 2.2,
                stem_fraction: 0.3,
                hue_deg: 98.0,
                saturation: 0.62,
                value: 0.52,
                ..LeafShapeSpec::default()
            },
        ),
        species(
            "random_broadleaf",
            PlantClass::Weed,
            4,
            [0.025, 0.045],
            LeafShapeSpec {
                aspect: 0.7,
                roundness: 1.8,
                stem_fraction: 0.2,
                hue_deg: 88.0,
                saturation: 0.55,
                value: 0.5,
                ..LeafShapeSpec::default()
            },
        ),
        species(
            "random_grass",
            PlantClass::Weed,
            3,
            [0.04, 0.07],
            LeafShapeSpec {
                aspect: 0.12,
                roundness: 1.5,
                stem_fraction: 0.05,
                branch_pairs: 0,
                hue_deg: 85.0,
                saturation: 0.5,
                value: 0.55,
                ..LeafShapeSpec::default()
            },
        ),
        species(
            "capsella",
            PlantClass::Weed,
            6,
            [0.025, 0.045],
            LeafShapeSpec {
                aspect: 0.3,
                roundness: 1.7,
                stem_fraction: 0.15,
                lobes: 4,
                lobe_depth: 0.35,
                hue_deg: 92.0,
                saturation: 0.5,
                value: 0.45,
                ..LeafShapeSpec::default()
            },
        ),
        species(
            "galium",
            PlantClass::Weed,
            5,
            [0.015, 0.03],
            LeafShapeSpec {
                aspect: 0.22,
                roundness: 1.6,
                stem_fraction: 0.1,
                branch_pairs: 1,
                hue_deg: 105.0,
                saturation: 0.58,
                value: 0.48,
                ..LeafShapeSpec::default()
            },
        ),
    ]
}

/// Dataset presets mirroring four species compositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Crop plus generic weeds only.
    SyntheticA,
    /// Crop plus many Capsella-like weeds.
    SyntheticB,
    /// Crop plus Galium-like weeds.
    SyntheticC,
    /// Crop plus every weed species.
    SyntheticD,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::SyntheticA,
        Preset::SyntheticB,
        Preset::SyntheticC,
        Preset::SyntheticD,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "synthetic-a" | "a" => Ok(Preset::SyntheticA),
            "synthetic-b" | "b" => Ok(Preset::SyntheticB),
            "synthetic-c" | "c" => Ok(Preset::SyntheticC),
            "synthetic-d" | "d" => Ok(Preset::SyntheticD),
            other => Err(Error::InvalidArgument(format!(
                "unknown preset '{other}' (expected synthetic-a, synthetic-b, synthetic-c or synthetic-d)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::SyntheticA => "synthetic-a",
            Preset::SyntheticB => "synthetic-b",
            Preset::SyntheticC => "synthetic-c",
            Preset::SyntheticD => "synthetic-d",
        }
    }

    fn description(self) -> &'static str {
        match self {
            Preset::SyntheticA => "sugar beet plus generic random weeds",
            Preset::SyntheticB => "sugar beet plus many Capsella-like weeds",
            Preset::SyntheticC => "sugar beet plus Galium-like weeds",
            Preset::SyntheticD => "sugar beet plus all weed species",
        }
    }

    fn mix(self) -> [(&'static str, f64); 5] {
        match self {
            Preset::SyntheticA => [
                ("sugar_beet", 2.0),
                ("random_broadleaf", 1.0),
                ("random_grass", 1.0),
                ("capsella", 0.0),
                ("galium", 0.0),
            ],
            Preset::SyntheticB => [
                ("sugar_beet", 2.0),
                ("random_broadleaf", 0.0),
                ("random_grass", 0.0),
                ("capsella", 3.0),
                ("galium", 0.0),
            ],
            Preset::SyntheticC => [
                ("sugar_beet", 2.0),
                ("random_broadleaf", 0.0),
                ("random_grass", 0.0),
                ("capsella", 0.0),
                ("galium", 2.0),
            ],
            Preset::SyntheticD => [
                ("sugar_beet", 2.0),
                ("random_broadleaf", 0.5),
                ("random_grass", 0.5),
                ("capsella", 1.5),
                ("galium", 1.0),
            ],
        }
    }

    pub fn config(self, seed: u64) -> GeneratorConfig {
        let mut cfg = GeneratorConfig::with_seed(seed);
        cfg.mix = self
            .mix()
            .iter()
            .map(|(name, w)| (name.to_string(), *w))
            .collect();
        cfg
    }

    /// The preset config as TOML with explanatory comments.
    pub fn commented_toml(self, seed: u64) -> String {
        let body = self.config(seed).to_toml_string();
        let mut out = format!(
            "# agrisynth generator config, preset {} ({}).\n\
             # Lengths are meters, angles degrees. `seed` is required.\n\
             # Reference: docs/config.md\n\n",
            self.name(),
            self.description()
        );
        for line in body.lines() {
            if let Some(comment) = section_comment(line.trim()) {
                out.push_str(comment);
                out.push('\n');
            }
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

fn section_comment(header: &str) -> Option<&'static str> {
    Some(match header {
        "[image]" => "# Output raster size in pixels.",
        "[camera]" => "# Downward-looking pinhole camera; intrinsics scale from the reference sensor.",
        "[light]" => "# Directional sun plus ambient, drawn per image from these ranges.",
        "[terrain]" => "# Soil patch: displaced grid mesh with noise-blended soil textures.",
        "[scatter]" => "# Object placement. Counts are inclusive ranges.",
        "[palette]" => "# Label colors (RGB).",
        "[render]" => "# Rasterizer options.",
        "[[species]]" => "# Plant species. Stages list layers and base leaf size per growth stage.",
        "[mix]" => "# Spawn weight per species; 0 disables a species.",
        _ => return None,
    })
}

impl GeneratorConfig {
    /// Default configuration with every species enabled at weight 1.
    pub fn with_seed(seed: u64) -> Self {
        let mut cfg = Self {
            seed,
            dataset_size: DEFAULT_DATASET_SIZE,
            image: ImageSpec::default(),
            camera: CameraSpec::default(),
            light: LightRanges::default(),
            terrain: TerrainSpec::default(),
            scatter: ScatterSpec::default(),
            palette: PaletteSpec::default(),
            render: RenderSpec::default(),
            species: default_species(),
            mix: BTreeMap::new(),
        };
        cfg.fill_defaults();
        cfg
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: GeneratorConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.fill_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    fn fill_defaults(&mut self) {
        if self.mix.is_empty() {
            for s in &self.species {
                self.mix.insert(s.name.clone(), 1.0);
            }
        }
    }

    /// Spawn weight per species, aligned with `self.species`.
    pub fn spawn_weights(&self) -> Vec<f64> {
        self.species
            .iter()
            .map(|s| self.mix.get(&s.name).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.seed > i64::MAX as u64 {
            return fail(format!("seed {} exceeds {}", self.seed, i64::MAX));
        }
        if self.image.width < 16 || self.image.height < 16 {
            return fail(format!(
                "image size {}x{} is below the 16x16 minimum",
                self.image.width, self.image.height
            ));
        }

        let cam = &self.camera;
        if !(cam.height_m > 0.0) {
            return fail("camera.height_m must be > 0".into());
        }
        if !(-90.0..0.0).contains(&cam.pitch_deg) {
            return fail("camera.pitch_deg must be in [-90, 0)".into());
        }
        if cam.reference_focal_px.iter().any(|f| !(*f > 0.0)) {
            return fail("camera.reference_focal_px must be > 0".into());
        }
        if cam.reference_sensor.iter().any(|s| *s == 0) {
            return fail("camera.reference_sensor must be nonzero".into());
        }
        check_range("camera.yaw_range_deg", cam.yaw_range_deg)?;

        let light = &self.light;
        check_range("light.elevation_deg", light.elevation_deg)?;
        check_range("light.azimuth_deg", light.azimuth_deg)?;
        check_range("light.intensity", light.intensity)?;
        check_range("light.ambient", light.ambient)?;
        if light.elevation_deg[0] <= 0.0 || light.elevation_deg[1] > 90.0 {
            return fail("light.elevation_deg must lie in (0, 90]".into());
        }
        if light.intensity[0] < 0.0 {
            return fail("light.intensity must be >= 0".into());
        }
        if light.ambient[0] < 0.0 || light.ambient[1] > 1.0 {
            return fail("light.ambient must lie in [0, 1]".into());
        }
        if light.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return fail("light.color channels must lie in [0, 1]".into());
        }

        let t = &self.terrain;
        if t.extent_m.iter().any(|e| !(*e > 0.0)) {
            return fail("terrain.extent_m must be > 0".into());
        }
        if t.grid.iter().any(|g| *g < 2) {
            return fail("terrain.grid needs at least 2x2 vertices".into());
        }
        if t.amplitude_m < 0.0 {
            return fail("terrain.amplitude_m must be >= 0".into());
        }
        if t.texture_resolution < 2 || t.soil_texture_size < 4 {
            return fail("terrain texture sizes are too small".into());
        }
        if t.soils.is_empty() {
            return fail("terrain.soils needs at least one soil texture".into());
        }
        for (i, s) in t.soils.iter().enumerate() {
            match (&s.kind, &s.path) {
                (Some(kind), None) => {
                    if !crate::terrain::SOIL_KINDS.contains(&kind.as_str()) {
                        return fail(format!(
                            "terrain.soils[{i}]: unknown kind '{kind}' (expected one of {:?})",
                            crate::terrain::SOIL_KINDS
                        ));
                    }
                }
                (None, Some(_)) => {}
                _ => {
                    return fail(format!(
                        "terrain.soils[{i}] must set exactly one of `kind` or `path`"
                    ))
                }
            }
        }
        check_noise("terrain.blend_noise", &t.blend_noise)?;
        check_noise("terrain.displacement_noise", &t.displacement_noise)?;

        let sc = &self.scatter;
        check_count("scatter.plant_count", sc.plant_count)?;
        check_count("scatter.distractor_count", sc.distractor_count)?;
        if sc.area_m.iter().any(|a| !(*a > 0.0)) {
            return fail("scatter.area_m must be > 0".into());
        }
        let half = [t.extent_m[0] / 2.0, t.extent_m[1] / 2.0];
        for axis in 0..2 {
            if cam.position_m[axis].abs() + sc.area_m[axis] / 2.0 > half[axis] + 1e-9 {
                return fail("scatter area must lie inside the terrain extent".into());
            }
        }
        if sc.overlap_factor < 0.0 {
            return fail("scatter.overlap_factor must be >= 0".into());
        }
        if sc.axis_noise_deg < 0.0 || sc.axis_cone_deg < 0.0 {
            return fail("scatter axis noise and cone must be >= 0".into());
        }
        if sc.rows.enabled && !(sc.rows.spacing_m > 0.0) {
            return fail("scatter.rows.spacing_m must be > 0".into());
        }

        let p = &self.palette;
        if p.soil == p.crop || p.soil == p.weed || p.crop == p.weed {
            return fail("palette colors must be pairwise distinct".into());
        }
        if self.render.rgb_supersample == 0 || self.render.rgb_supersample > 8 {
            return fail("render.rgb_supersample must be in 1..=8".into());
        }
        if !(self.render.near_m > 0.0) {
            return fail("render.near_m must be > 0".into());
        }

        if self.species.is_empty() {
            return fail("at least one species is required".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.species {
            if !names.insert(s.name.as_str()) {
                return fail(format!("duplicate species name '{}'", s.name));
            }
            validate_species(s)?;
        }
        for (name, w) in &self.mix {
            if !names.contains(name.as_str()) {
                return fail(format!("mix references unknown species '{name}'"));
            }
            if !(*w >= 0.0) || !w.is_finite() {
                return fail(format!("mix weight for '{name}' must be >= 0"));
            }
        }
        if self.spawn_weights().iter().all(|w| *w == 0.0) {
            return fail("spawn weights are all zero".into());
        }
        Ok(())
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
        return Err(Error::ConfigInvalid(format!(
            "{name} must be a finite [min, max] range"
        )));
    }
    Ok(())
}

fn check_count(name: &str, r: [i64; 2]) -> Result<()> {
    if r[0] < 0 || r[1] < 0 {
        return Err(Error::ConfigInvalid(format!("{name} must be >= 0, got {r:?}")));
    }
    if r[0] > r[1] {
        return Err(Error::ConfigInvalid(format!("{name} has min > max: {r:?}")));
    }
    Ok(())
}

fn check_noise(name: &str, n: &NoiseSpec) -> Result<()> {
    if n.octaves == 0 || !(n.frequency > 0.0) || !(n.persistence > 0.0) || !(n.lacunarity > 0.0)
    {
        return Err(Error::ConfigInvalid(format!(
            "{name}: octaves >= 1 and positive frequency, persistence, lacunarity required"
        )));
    }
    Ok(())
}

fn validate_species(s: &SpeciesSpec) -> Result<()> {
    let fail = |msg: String| Err(Error::ConfigInvalid(format!("species '{}': {msg}", s.name)));
    if s.name.is_empty() {
        return Err(Error::ConfigInvalid("species name must be nonempty".into()));
    }
    if s.leaves_per_layer < 1 {
        return fail("leaves_per_layer must be >= 1".into());
    }
    if s.stages.is_empty() {
        return fail("at least one growth stage is required".into());
    }
    for (i, st) in s.stages.iter().enumerate() {
        if st.layers < 1 {
            return fail(format!("stage {i}: layers must be >= 1"));
        }
        if !(st.leaf_size_m > 0.0) {
            return fail(format!("stage {i}: leaf_size_m must be > 0"));
        }
    }
    if !(s.size_jitter[0] > 0.0) || s.size_jitter[0] > s.size_jitter[1] {
        return fail("size_jitter must satisfy 0 < r_min <= r_max".into());
    }
    if s.alpha_jitter_deg < 0.0 || s.pose_jitter_deg < 0.0 {
        return fail("jitter values must be >= 0".into());
    }
    check_range("bend_deg", s.bend_deg)?;
    if !(s.azimuth_cycle_deg > 0.0) {
        return fail("azimuth_cycle_deg must be > 0".into());
    }
    let l = &s.leaf;
    if l.stem_joints < 1 || l.vein_joints < 1 {
        return fail("leaf needs at least one stem joint and one vein joint".into());
    }
    if l.branch_pairs > 0 && l.branch_pairs >= l.vein_joints {
        return fail("branch_pairs must be smaller than vein_joints".into());
    }
    if !(0.0..1.0).contains(&l.stem_fraction) {
        return fail("stem_fraction must lie in [0, 1)".into());
    }
    if l.grid[0] < 2 || l.grid[1] < 2 {
        return fail("leaf grid needs at least 2x2 vertices".into());
    }
    if !(l.aspect > 0.0) || !(l.roundness > 0.0) {
        return fail("aspect and roundness must be > 0".into());
    }
    if l.texture_size[0] < 8 || l.texture_size[1] < 8 {
        return fail("leaf texture_size must be at least 8x8".into());
    }
    Ok(())
}

/// Read, fill defaults and validate a config file.
pub fn load_config(path: &Path) -> Result<GeneratorConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GeneratorConfig::from_toml_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7

[[species]]
name = "beet"
class = "crop"
leaves_per_layer = 4
stages = [{ layers = 1, leaf_size_m = 0.05 }, { layers = 2, leaf_size_m = 0.08 }]
"#;

    fn parse(text: &str) -> Result<GeneratorConfig> {
        GeneratorConfig::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!((cfg.image.width, cfg.image.height), (480, 360));
        assert_eq!(cfg.dataset_size, 1300);
        assert_eq!(cfg.species.len(), 1);
        assert_eq!(cfg.mix.get("beet"), Some(&1.0));
        assert_eq!(cfg.terrain.grid, [128, 128]);
        assert_eq!(cfg.scatter.overlap_factor, 0.6);
    }

    #[test]
    fn negative_plant_count_is_rejected() {
        let text = format!("{MINIMAL}\n[scatter]\nplant_count = [-1, 4]\n");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, Error::ConfigInvalid(ref m) if m.contains("plant_count")), "{err}");
    }

    #[test]
    fn missing_seed_is_rejected() {
        let text = MINIMAL.replace("seed = 7", "");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, Error::ConfigParse { ref message, .. } if message.contains("seed")), "{err}");
    }

    #[test]
    fn parse_error_reports_location() {
        let err = parse("seed = 7\n[image]\nwidth = \"wide\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") || msg.contains("width"), "{msg}");
    }

    #[test]
    fn tiny_image_and_zero_weights_rejected() {
        let text = format!("{MINIMAL}\n[image]\nwidth = 8\nheight = 360\n");
        assert!(parse(&text).is_err());
        let text = format!("{MINIMAL}\n[mix]\nbeet = 0.0\n");
        assert!(parse(&text).is_err());
        let text = format!("{MINIMAL}\n[mix]\nunknown = 1.0\n");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn round_trip_through_toml() {
        for preset in Preset::ALL {
            let cfg = preset.config(99);
            let text = cfg.to_toml_string();
            let back = parse(&text).unwrap();
            assert_eq!(cfg, back);
            let commented = preset.commented_toml(99);
            assert_eq!(parse(&commented).unwrap(), cfg);
        }
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(parse(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn presets_enable_expected_species() {
        let a = Preset::SyntheticA.config(1);
        let enabled: Vec<&str> = a
            .species
            .iter()
            .zip(a.spawn_weights())
            .filter(|(s, w)| *w > 0.0 && s.class == PlantClass::Weed)
            .map(|(s, _)| s.name.as_str())
            .collect();
        assert_eq!(enabled, ["random_broadleaf", "random_grass"]);
        let d = Preset::SyntheticD.config(1);
        assert!(d.spawn_weights().iter().all(|w| *w > 0.0));
        assert!(Preset::parse("synthetic-e").is_err());
    }

    #[test]
    fn default_inclinations() {
        let s = &default_species()[0];
        assert_eq!(s.layer_inclination(1), 65.0);
        assert_eq!(s.layer_inclination(2), 40.0);
        assert_eq!(s.layer_inclination(3), 15.0);
        assert_eq!(s.layer_inclination(4), 15.0);
    }
}
