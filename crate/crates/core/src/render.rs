//! Software rasterizer with a shared visibility pass.
//!
//! Every scene is rasterized once into a visibility buffer holding, per
//! pixel, the winning fragment's depth, primitive id and perspective-correct
//! barycentrics. The RGB and label images are two shade functions over that
//! buffer, so their coverage agrees pixel for pixel.
//!
//! Resolve rule: smaller camera depth wins; at equal depth the smaller
//! primitive id (submission order) wins. Leaf fragments whose nearest texel
//! has alpha below one half are discarded before the depth test.

use crate::config::SemanticClass;
use crate::leafgen::LeafTemplate;
use crate::math::Vec3;
use crate::raster::{bilinear_axis, nearest_index, Raster, Rgb};
use crate::scene::{CameraModel, LabelPalette, LightSpec, Scene};
use crate::terrain::TerrainPatch;

/// Alpha at or above this value (of 255) survives the cutout.
pub const ALPHA_CUTOFF: u8 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffer {
    pub color: Raster<Rgb>,
    /// Camera-space depth in meters, `+inf` where nothing was drawn.
    pub depth: Raster<f64>,
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32, clear: Rgb) -> Self {
        Self {
            color: Raster::filled(width, height, clear),
            depth: Raster::filled(width, height, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Rgb,
    Label,
}

#[derive(Debug, Clone, Copy)]
pub enum Material<'a> {
    /// Blended soil textures; normal map in the ground tangent frame.
    Terrain(&'a TerrainPatch),
    /// Leaf albedo with alpha cutout and derived maps.
    Leaf(&'a LeafTemplate),
    /// Untextured, flat-shaded surface.
    Solid([f32; 3]),
}

/// Triangle mesh in world coordinates ready for rasterization.
#[derive(Debug, Clone, Copy)]
pub struct Mesh<'a> {
    pub positions: &'a [Vec3],
    pub triangles: &'a [[u32; 3]],
    /// Per-vertex texture coordinates; may be empty for solid meshes.
    pub uvs: &'a [[f64; 2]],
    /// Per-vertex normals; empty means flat face normals.
    pub normals: &'a [Vec3],
    pub material: Material<'a>,
    pub class: SemanticClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    pub depth: f64,
    /// Global primitive id, `u32::MAX` when empty.
    pub prim: u32,
    /// Barycentrics with respect to the unclipped triangle.
    pub bary: [f64; 3],
}

impl Fragment {
    const EMPTY: Fragment = Fragment {
        depth: f64::INFINITY,
        prim: u32::MAX,
        bary: [0.0; 3],
    };

    pub fn is_empty(&self) -> bool {
        self.prim == u32::MAX
    }

    #[inline]
    fn beats(&self, other: &Fragment) -> bool {
        self.depth < other.depth || (self.depth == other.depth && self.prim < other.prim)
    }
}

/// Winning fragment per pixel plus the primitive-id layout of the meshes.
#[derive(Debug, Clone)]
pub struct VisibilityBuffer {
    pub fragments: Raster<Fragment>,
    /// First primitive id of each mesh.
    pub mesh_offsets: Vec<u32>,
    pub classes: Vec<SemanticClass>,
}

impl VisibilityBuffer {
    /// `(mesh, triangle)` of a primitive id.
    pub fn locate(&self, prim: u32) -> (usize, usize) {
        let m = self.mesh_offsets.partition_point(|&o| o <= prim) - 1;
        (m, (prim - self.mesh_offsets[m]) as usize)
    }

    pub fn class_at(&self, x: u32, y: u32) -> Option<SemanticClass> {
        let f = self.fragments.get(x, y);
        (!f.is_empty()).then(|| self.classes[self.locate(f.prim).0])
    }

    pub fn depth(&self) -> Raster<f64> {
        self.fragments.map(|f| f.depth)
    }
}

fn bilinear<const N: usize>(
    w: u32,
    h: u32,
    uv: [f64; 2],
    fetch: impl Fn(u32, u32) -> [f64; N],
) -> [f64; N] {
    let (x0, x1, tx) = bilinear_axis(uv[0], w);
    let (y0, y1, ty) = bilinear_axis(uv[1], h);
    let (a, b, c, d) = (fetch(x0, y0), fetch(x1, y0), fetch(x0, y1), fetch(x1, y1));
    std::array::from_fn(|k| {
        let top = a[k] + tx * (b[k] - a[k]);
        let bottom = c[k] + tx * (d[k] - c[k]);
        top + ty * (bottom - top)
    })
}

fn leaf_alpha_passes(template: &LeafTemplate, uv: [f64; 2]) -> bool {
    let (w, h) = template.albedo.dims();
    let texel = template.albedo.get(nearest_index(uv[0], w), nearest_index(uv[1], h));
    texel[3] >= ALPHA_CUTOFF
}

#[inline]
fn interp_uv(uvs: &[[f64; 2]], tri: &[u32; 3], b: &[f64; 3]) -> [f64; 2] {
    let (a, c, d) = (uvs[tri[0] as usize], uvs[tri[1] as usize], uvs[tri[2] as usize]);
    [
        b[0] * a[0] + b[1] * c[0] + b[2] * d[0],
        b[0] * a[1] + b[1] * c[1] + b[2] * d[1],
    ]
}

#[derive(Clone, Copy)]
struct ClipVertex {
    cam: Vec3,
    bary: [f64; 3],
}

fn lerp_clip(a: &ClipVertex, b: &ClipVertex, t: f64) -> ClipVertex {
    ClipVertex {
        cam: a.cam + (b.cam - a.cam) * t,
        bary: std::array::from_fn(|k| a.bary[k] + (b.bary[k] - a.bary[k]) * t),
    }
}

/// Sutherland-Hodgman against the plane `z = near`.
fn clip_near(tri: [ClipVertex; 3], near: f64) -> Vec<ClipVertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = &tri[i];
        let b = &tri[(i + 1) % 3];
        let a_in = a.cam.z >= near;
        let b_in = b.cam.z >= near;
        if a_in {
            out.push(*a);
        }
        if a_in != b_in {
            let t = (near - a.cam.z) / (b.cam.z - a.cam.z);
            let mut v = lerp_clip(a, b, t);
            v.cam.z = near;
            out.push(v);
        }
    }
    out
}

struct ScreenVertex {
    x: f64,
    y: f64,
    inv_z: f64,
    bary: [f64; 3],
}

/// Edge function of `(a, b)` evaluated at `(px, py)`.
#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Top-left rule for a positively oriented triangle in y-down screen space.
#[inline]
fn is_top_left(ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    (ay == by && bx < ax) || by > ay
}

/// Rasterize `meshes` into a visibility buffer.
pub fn rasterize_visibility(camera: &CameraModel, meshes: &[Mesh], near: f64) -> VisibilityBuffer {
    let (w, h) = (camera.width, camera.height);
    let mut frags = Raster::filled(w, h, Fragment::EMPTY);
    let mut mesh_offsets = Vec::with_capacity(meshes.len());
    let mut classes = Vec::with_capacity(meshes.len());
    let mut prim_base: u32 = 0;
    for mesh in meshes {
        mesh_offsets.push(prim_base);
        classes.push(mesh.class);
        let cam: Vec<Vec3> = mesh.positions.iter().map(|p| camera.to_camera(p)).collect();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let prim = prim_base + t as u32;
            let c = [cam[tri[0] as usize], cam[tri[1] as usize], cam[tri[2] as usize]];
            if c.iter().all(|v| v.z < near) {
                continue;
            }
            let verts = [
                ClipVertex { cam: c[0], bary: [1.0, 0.0, 0.0] },
                ClipVertex { cam: c[1], bary: [0.0, 1.0, 0.0] },
                ClipVertex { cam: c[2], bary: [0.0, 0.0, 1.0] },
            ];
            let poly = if c.iter().all(|v| v.z >= near) {
                verts.to_vec()
            } else {
                clip_near(verts, near)
            };
            if poly.len() < 3 {
                continue;
            }
            let screen: Vec<ScreenVertex> = poly
                .iter()
                .map(|v| ScreenVertex {
                    x: camera.fx * v.cam.x / v.cam.z + camera.cx,
                    y: camera.fy * v.cam.y / v.cam.z + camera.cy,
                    inv_z: 1.0 / v.cam.z,
                    bary: v.bary,
                })
                .collect();
            for k in 1..screen.len() - 1 {
                raster_triangle(
                    [&screen[0], &screen[k], &screen[k + 1]],
                    prim,
                    mesh,
                    tri,
                    &mut frags,
                );
            }
        }
        prim_base += mesh.triangles.len() as u32;
    }
    VisibilityBuffer {
        fragments: frags,
        mesh_offsets,
        classes,
    }
}

fn raster_triangle(
    v: [&ScreenVertex; 3],
    prim: u32,
    mesh: &Mesh,
    tri: &[u32; 3],
    frags: &mut Raster<Fragment>,
) {
    let (w, h) = frags.dims();
    let area = edge(v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    // Orient counter-clockwise in the edge-function sense.
    let v = if area < 0.0 { [v[0], v[2], v[1]] } else { v };
    let area = area.abs();
    let min_x = v.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_x = v.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = v.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_y = v.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    if max_x < 0.0 || max_y < 0.0 || min_x > f64::from(w) || min_y > f64::from(h) {
        return;
    }
    let x0 = (min_x - 0.5).ceil().max(0.0) as u32;
    let y0 = (min_y - 0.5).ceil().max(0.0) as u32;
    let x1 = ((max_x - 0.5).floor().min(f64::from(w) - 1.0)).max(-1.0);
    let y1 = ((max_y - 0.5).floor().min(f64::from(h) - 1.0)).max(-1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    let (x1, y1) = (x1 as u32, y1 as u32);
    let edges = [(1, 2), (2, 0), (0, 1)];
    let top_left: [bool; 3] =
        std::array::from_fn(|k| is_top_left(v[edges[k].0].x, v[edges[k].0].y, v[edges[k].1].x, v[edges[k].1].y));
    let leaf = match mesh.material {
        Material::Leaf(t) => Some(t),
        _ => None,
    };
    for py in y0..=y1 {
        let sy = f64::from(py) + 0.5;
        for px in x0..=x1 {
            let sx = f64::from(px) + 0.5;
            let mut lambda = [0.0; 3];
            let mut inside = true;
            for k in 0..3 {
                let (a, b) = (v[edges[k].0], v[edges[k].1]);
                let e = edge(a.x, a.y, b.x, b.y, sx, sy);
                if e < 0.0 || (e == 0.0 && !top_left[k]) {
                    inside = false;
                    break;
                }
                lambda[k] = e / area;
            }
            if !inside {
                continue;
            }
            let inv_z = lambda[0] * v[0].inv_z + lambda[1] * v[1].inv_z + lambda[2] * v[2].inv_z;
            if !(inv_z > 0.0) {
                continue;
            }
            let depth = 1.0 / inv_z;
            let bary: [f64; 3] = std::array::from_fn(|j| {
                (lambda[0] * v[0].inv_z * v[0].bary[j]
                    + lambda[1] * v[1].inv_z * v[1].bary[j]
                    + lambda[2] * v[2].inv_z * v[2].bary[j])
                    / inv_z
            });
            let candidate = Fragment { depth, prim, bary };
            let slot = frags.get_mut(px, py);
            if !candidate.beats(slot) {
                continue;
            }
            if let Some(t) = leaf {
                if !leaf_alpha_passes(t, interp_uv(mesh.uvs, tri, &bary)) {
                    continue;
                }
            }
            *slot = candidate;
        }
    }
}

/// Unlit label pass: palette color of the winning class, background where
/// nothing was drawn.
pub fn shade_label(vis: &VisibilityBuffer, palette: &LabelPalette) -> FrameBuffer {
    let (w, h) = vis.fragments.dims();
    FrameBuffer {
        color: Raster::from_fn(w, h, |x, y| match vis.class_at(x, y) {
            Some(c) => palette.color(c),
            None => palette.background,
        }),
        depth: vis.depth(),
    }
}

struct SurfaceSample {
    albedo: [f64; 3],
    ao: f64,
    normal: Vec3,
}

fn shading_frame(n: Vec3, t_hint: Vec3) -> (Vec3, Vec3) {
    let mut t = t_hint - n * n.dot(&t_hint);
    if t.norm_squared() < 1e-20 {
        t = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        t -= n * n.dot(&t);
    }
    let t = t.normalize();
    (t, n.cross(&t))
}

fn perturb(n: Vec3, t_hint: Vec3, map: [f64; 3]) -> Vec3 {
    let (t, b) = shading_frame(n, t_hint);
    let p = t * map[0] + b * map[1] + n * map[2];
    if p.norm_squared() > 0.0 {
        p.normalize()
    } else {
        n
    }
}

fn sample_surface(mesh: &Mesh, tri: &[u32; 3], b: &[f64; 3], eye: &Vec3) -> SurfaceSample {
    let p = [
        mesh.positions[tri[0] as usize],
        mesh.positions[tri[1] as usize],
        mesh.positions[tri[2] as usize],
    ];
    let point = p[0] * b[0] + p[1] * b[1] + p[2] * b[2];
    let mut face = (p[1] - p[0]).cross(&(p[2] - p[0]));
    if face.norm_squared() > 0.0 {
        face.normalize_mut();
    } else {
        face = Vec3::z();
    }
    let to_eye = eye - point;
    match mesh.material {
        Material::Terrain(patch) => {
            let uv = interp_uv(mesh.uvs, tri, b);
            let tex = &patch.texture;
            let (w, h) = tex.albedo.dims();
            let albedo = bilinear(w, h, uv, |x, y| tex.albedo.get(x, y).map(|c| f64::from(c) / 255.0));
            let [ao] = bilinear(w, h, uv, |x, y| [f64::from(*tex.ao.get(x, y))]);
            let map = bilinear(w, h, uv, |x, y| tex.normal.get(x, y).map(f64::from));
            let n = if mesh.normals.is_empty() {
                face
            } else {
                let n = mesh.normals[tri[0] as usize] * b[0]
                    + mesh.normals[tri[1] as usize] * b[1]
                    + mesh.normals[tri[2] as usize] * b[2];
                n.normalize()
            };
            SurfaceSample {
                albedo,
                ao,
                normal: perturb(n, Vec3::x(), map),
            }
        }
        Material::Leaf(t) => {
            let uv = interp_uv(mesh.uvs, tri, b);
            let (w, h) = t.albedo.dims();
            let (tx, ty) = (nearest_index(uv[0], w), nearest_index(uv[1], h));
            let texel = t.albedo.get(tx, ty);
            let albedo = [0, 1, 2].map(|k| f64::from(texel[k]) / 255.0);
            let ao = f64::from(*t.maps.ao.get(tx, ty));
            let map = t.maps.normal.get(tx, ty).map(f64::from);
            let n = if face.dot(&to_eye) < 0.0 { -face } else { face };
            // Tangent along increasing u.
            let uvs = [
                mesh.uvs[tri[0] as usize],
                mesh.uvs[tri[1] as usize],
                mesh.uvs[tri[2] as usize],
            ];
            let (e1, e2) = (p[1] - p[0], p[2] - p[0]);
            let (du1, dv1) = (uvs[1][0] - uvs[0][0], uvs[1][1] - uvs[0][1]);
            let (du2, dv2) = (uvs[2][0] - uvs[0][0], uvs[2][1] - uvs[0][1]);
            let det = du1 * dv2 - du2 * dv1;
            let tangent = if det != 0.0 { (e1 * dv2 - e2 * dv1) / det } else { e1 };
            SurfaceSample {
                albedo,
                ao,
                normal: perturb(n, tangent, map),
            }
        }
        Material::Solid(c) => SurfaceSample {
            albedo: c.map(f64::from),
            ao: 1.0,
            normal: if face.dot(&to_eye) < 0.0 { -face } else { face },
        },
    }
}

/// `albedo * ao * (ambient + intensity * max(0, n.l)) * light color`.
pub fn shade_color(albedo: [f64; 3], ao: f64, normal: &Vec3, light: &LightSpec) -> [f64; 3] {
    let lambert = normal.dot(&light.direction()).max(0.0);
    let k = ao * (light.ambient + light.intensity * lambert);
    std::array::from_fn(|c| albedo[c] * k * light.color[c])
}

fn shade_rgb_linear(
    vis: &VisibilityBuffer,
    meshes: &[Mesh],
    camera: &CameraModel,
    light: &LightSpec,
    background: Rgb,
) -> Raster<[f64; 3]> {
    let eye = camera.center();
    let (w, h) = vis.fragments.dims();
    let bg = background.map(|c| f64::from(c) / 255.0);
    Raster::from_fn(w, h, |x, y| {
        let f = vis.fragments.get(x, y);
        if f.is_empty() {
            return bg;
        }
        let (m, t) = vis.locate(f.prim);
        let mesh = &meshes[m];
        let s = sample_surface(mesh, &mesh.triangles[t], &f.bary, &eye);
        shade_color(s.albedo, s.ao, &s.normal, light)
    })
}

fn quantize(c: f64) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Lit RGB pass over an existing visibility buffer.
pub fn shade_rgb(
    vis: &VisibilityBuffer,
    meshes: &[Mesh],
    camera: &CameraModel,
    light: &LightSpec,
    background: Rgb,
) -> FrameBuffer {
    FrameBuffer {
        color: shade_rgb_linear(vis, meshes, camera, light, background).map(|c| c.map(quantize)),
        depth: vis.depth(),
    }
}

/// Owned geometry the scene meshes borrow from.
pub struct SceneGeometry {
    terrain_positions: Vec<Vec3>,
    terrain_uvs: Vec<[f64; 2]>,
    terrain_normals: Vec<Vec3>,
    terrain_triangles: Vec<[u32; 3]>,
}

impl SceneGeometry {
    pub fn new(scene: &Scene) -> Self {
        let t = &scene.terrain;
        let [gw, gh] = t.grid;
        let mut terrain_positions = Vec::with_capacity((gw * gh) as usize);
        let mut terrain_uvs = Vec::with_capacity(terrain_positions.capacity());
        for j in 0..gh {
            for i in 0..gw {
                let p = t.vertex(i, j);
                terrain_uvs.push(t.uv(p.x, p.y));
                terrain_positions.push(p);
            }
        }
        Self {
            terrain_positions,
            terrain_uvs,
            terrain_normals: t.normals.data().to_vec(),
            terrain_triangles: t.triangles(),
        }
    }

    /// Terrain first, then leaves plant by plant, then distractors.
    pub fn meshes<'a>(&'a self, scene: &'a Scene) -> Vec<Mesh<'a>> {
        let mut meshes = vec![Mesh {
            positions: &self.terrain_positions,
            triangles: &self.terrain_triangles,
            uvs: &self.terrain_uvs,
            normals: &self.terrain_normals,
            material: Material::Terrain(&scene.terrain),
            class: SemanticClass::Soil,
        }];
        for plant in &scene.plants {
            for leaf in &plant.leaves {
                meshes.push(Mesh {
                    positions: &leaf.positions,
                    triangles: leaf.triangles(),
                    uvs: leaf.uvs(),
                    normals: &[],
                    material: Material::Leaf(&leaf.template),
                    class: leaf.class,
                });
            }
        }
        for d in &scene.distractors {
            meshes.push(Mesh {
                positions: &d.positions,
                triangles: &d.triangles,
                uvs: &[],
                normals: &[],
                material: Material::Solid(d.albedo),
                class: SemanticClass::Soil,
            });
        }
        meshes
    }
}

/// Both passes of a scene plus the shared visibility buffer.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub rgb: FrameBuffer,
    pub label: FrameBuffer,
    pub visibility: VisibilityBuffer,
}

/// Render one pass of a scene.
pub fn rasterize(scene: &Scene, mode: RenderMode, near: f64) -> FrameBuffer {
    let geometry = SceneGeometry::new(scene);
    let meshes = geometry.meshes(scene);
    let vis = rasterize_visibility(&scene.camera, &meshes, near);
    match mode {
        RenderMode::Label => shade_label(&vis, &scene.palette),
        RenderMode::Rgb => shade_rgb(&vis, &meshes, &scene.camera, &scene.light, scene.palette.background),
    }
}

/// RGB and label images from one visibility resolve. With `supersample > 1`
/// the RGB image is shaded from an `s x s` grid per pixel and box-filtered;
/// the label image always uses the single-sample resolve.
pub fn render_pair(scene: &Scene, supersample: u32, near: f64) -> RenderOutput {
    let geometry = SceneGeometry::new(scene);
    let meshes = geometry.meshes(scene);
    let vis = rasterize_visibility(&scene.camera, &meshes, near);
    let label = shade_label(&vis, &scene.palette);
    let background = scene.palette.background;
    let rgb = if supersample <= 1 {
        shade_rgb(&vis, &meshes, &scene.camera, &scene.light, background)
    } else {
        let big_cam = scene.camera.scaled(supersample);
        let big = rasterize_visibility(&big_cam, &meshes, near);
        let lin = shade_rgb_linear(&big, &meshes, &big_cam, &scene.light, background);
        let s = supersample;
        let n = f64::from(s * s);
        let color = Raster::from_fn(scene.camera.width, scene.camera.height, |x, y| {
            let mut acc = [0.0; 3];
            for dy in 0..s {
                for dx in 0..s {
                    let c = lin.get(x * s + dx, y * s + dy);
                    for k in 0..3 {
                        acc[k] += c[k];
                    }
                }
            }
            acc.map(|a| quantize(a / n))
        });
        FrameBuffer {
            color,
            depth: vis.depth(),
        }
    };
    RenderOutput {
        rgb,
        label,
        visibility: vis,
    }
}
