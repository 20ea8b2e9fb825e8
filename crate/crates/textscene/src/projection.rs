//! Camera sampling and 3D-to-2D projection of layouts into reference
//! configurations (category-tagged 2D boxes).
//!
//! Cameras are sampled under three heuristics: location 5-10 m from the
//! origin with positive coordinates (in front of both walls), yaw aimed at
//! the centroid of all object cuboids, and, for every wall-mounted object,
//! viewing direction within 60 degrees of facing that object head-on. The
//! camera sits 1.7 m above the ground, horizontally; intrinsics are fixed
//! and scale/translation are resolved later at match time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scene::{corner_points, ConcretePose, Scene};

pub const CAMERA_HEIGHT: f64 = 1.7;
const MIN_DEPTH: f64 = 0.01;
/// Clipped boxes keeping less than this fraction of their area are dropped.
const MIN_VISIBLE_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Intrinsics {
    pub fov_h_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Intrinsics {
            fov_h_deg: 60.0,
            width: 640,
            height: 480,
        }
    }
}

impl Intrinsics {
    /// Focal length in pixels (square pixels, principal point at center).
    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.fov_h_deg.to_radians() / 2.0).tan()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CameraPose {
    pub x: f64,
    pub y: f64,
    /// Height above the ground; fixed at 1.7 m.
    pub z: f64,
    pub yaw: f64,
    pub intrinsics: Intrinsics,
}

/// Camera sampling heuristics.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraHeuristics {
    pub min_distance: f64,
    pub max_distance: f64,
    /// Maximum offset between the viewing direction and facing a
    /// wall-mounted object head-on (degrees).
    pub wall_cone_deg: f64,
    /// Rejection-sampling attempts before giving up.
    pub budget: u32,
}

impl Default for CameraHeuristics {
    fn default() -> Self {
        CameraHeuristics {
            min_distance: 5.0,
            max_distance: 10.0,
            wall_cone_deg: 60.0,
            budget: 10_000,
        }
    }
}

/// Axis-aligned 2D box in pixels with a category tag.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Box2D {
    pub category: String,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub confidence: f64,
}

impl Box2D {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }
}

/// Projected 2D configuration with its (layout, camera) provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceLayout {
    pub layout_index: usize,
    pub camera_index: usize,
    pub camera: CameraPose,
    pub boxes: Vec<Box2D>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ProjectionError {
    #[error("no camera satisfying the heuristics within the sampling budget")]
    CameraSamplingExhausted,
    #[error("all objects project behind the camera")]
    DegenerateView,
    #[error("no non-degenerate reference layouts could be generated")]
    NoReferences,
}

/// Centroid of all object cuboid centers.
pub fn layout_centroid(layout: &[ConcretePose], scene: &Scene) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for (pose, obj) in layout.iter().zip(&scene.objects) {
        let pts = corner_points(pose, &obj.model.spec);
        let mut c = [0.0; 3];
        for p in &pts {
            for a in 0..3 {
                c[a] += p[a] / 8.0;
            }
        }
        for a in 0..3 {
            acc[a] += c[a] / layout.len() as f64;
        }
    }
    acc
}

/// Checks the three sampling heuristics exactly.
pub fn camera_satisfies(
    cam: &CameraPose,
    layout: &[ConcretePose],
    scene: &Scene,
    heur: &CameraHeuristics,
) -> bool {
    let dist = (cam.x * cam.x + cam.y * cam.y).sqrt();
    if cam.x <= 0.0 || cam.y <= 0.0 {
        return false;
    }
    if dist < heur.min_distance || dist > heur.max_distance {
        return false;
    }
    let c = layout_centroid(layout, scene);
    let aim = (c[1] - cam.y).atan2(c[0] - cam.x);
    if angle_between(aim, cam.yaw) > 1e-9 {
        return false;
    }
    wall_cones_ok(cam.yaw, layout, scene, heur)
}

fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

fn wall_cones_ok(yaw: f64, layout: &[ConcretePose], scene: &Scene, heur: &CameraHeuristics) -> bool {
    let v = [yaw.cos(), yaw.sin()];
    let cone = heur.wall_cone_deg.to_radians();
    for (pose, obj) in layout.iter().zip(&scene.objects) {
        if !obj.on_wall {
            continue;
        }
        let u = pose.orientation().facing();
        // view within `cone` of looking at the object head-on (direction -u)
        let cos_offset = -(v[0] * u[0] + v[1] * u[1]);
        if cos_offset < cone.cos() - 1e-12 {
            return false;
        }
    }
    true
}

/// Rejection-samples camera poses satisfying all heuristics.
pub fn sample_cameras(
    layout: &[ConcretePose],
    scene: &Scene,
    count: usize,
    heur: &CameraHeuristics,
    intrinsics: Intrinsics,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<CameraPose>, ProjectionError> {
    assert!(!layout.is_empty());
    let c = layout_centroid(layout, scene);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts >= heur.budget {
            return Err(ProjectionError::CameraSamplingExhausted);
        }
        attempts += 1;
        let r = rng.gen_range(heur.min_distance..=heur.max_distance);
        let phi = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
        let (x, y) = (r * phi.cos(), r * phi.sin());
        if x <= 0.0 || y <= 0.0 {
            continue;
        }
        let yaw = (c[1] - y).atan2(c[0] - x);
        if !wall_cones_ok(yaw, layout, scene, heur) {
            continue;
        }
        out.push(CameraPose {
            x,
            y,
            z: CAMERA_HEIGHT,
            yaw,
            intrinsics,
        });
    }
    Ok(out)
}

/// Projects one world point to pixels; `None` when at or behind the camera
/// plane.
pub fn project_point(cam: &CameraPose, p: [f64; 3]) -> Option<[f64; 2]> {
    let f = [cam.yaw.cos(), cam.yaw.sin()];
    let right = [cam.yaw.sin(), -cam.yaw.cos()];
    let rel = [p[0] - cam.x, p[1] - cam.y, p[2] - cam.z];
    let depth = rel[0] * f[0] + rel[1] * f[1];
    if depth < MIN_DEPTH {
        return None;
    }
    let focal = cam.intrinsics.focal_px();
    let u = cam.intrinsics.width as f64 / 2.0 + focal * (rel[0] * right[0] + rel[1] * right[1]) / depth;
    let v = cam.intrinsics.height as f64 / 2.0 + focal * (-rel[2]) / depth;
    Some([u, v])
}

/// Projects every cuboid's eight corners through the pinhole model and
/// takes the axis-aligned hull, clipped to the image. Objects behind the
/// camera plane are dropped; an empty result is a degenerate view.
pub fn project(
    layout: &[ConcretePose],
    scene: &Scene,
    cam: &CameraPose,
) -> Result<Vec<Box2D>, ProjectionError> {
    let (w, h) = (cam.intrinsics.width as f64, cam.intrinsics.height as f64);
    let mut boxes = Vec::new();
    'object: for (pose, obj) in layout.iter().zip(&scene.objects) {
        let mut lo = [f64::MAX; 2];
        let mut hi = [f64::MIN; 2];
        for p in corner_points(pose, &obj.model.spec) {
            let Some(px) = project_point(cam, p) else {
                continue 'object;
            };
            for a in 0..2 {
                lo[a] = lo[a].min(px[a]);
                hi[a] = hi[a].max(px[a]);
            }
        }
        let full = (hi[0] - lo[0]).max(0.0) * (hi[1] - lo[1]).max(0.0);
        let clipped = Box2D {
            category: obj.category.clone(),
            x_min: lo[0].max(0.0),
            y_min: lo[1].max(0.0),
            x_max: hi[0].min(w),
            y_max: hi[1].min(h),
            confidence: 1.0,
        };
        if clipped.width() <= 0.0 || clipped.height() <= 0.0 {
            continue;
        }
        if full > 0.0 && clipped.area() / full < MIN_VISIBLE_FRACTION {
            continue;
        }
        boxes.push(clipped);
    }
    if boxes.is_empty() {
        return Err(ProjectionError::DegenerateView);
    }
    Ok(boxes)
}

/// Samples up to `layouts_m` layouts and `cameras_v` views per layout.
pub fn generate_references(
    layouts: &[Vec<ConcretePose>],
    scene: &Scene,
    layouts_m: usize,
    cameras_v: usize,
    heur: &CameraHeuristics,
    intrinsics: Intrinsics,
    seed: u64,
) -> Result<Vec<ReferenceLayout>, ProjectionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<usize> = if layouts.len() <= layouts_m {
        (0..layouts.len()).collect()
    } else {
        let mut idx = rand::seq::index::sample(&mut rng, layouts.len(), layouts_m).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut out = Vec::new();
    for &li in &chosen {
        let cams = match sample_cameras(&layouts[li], scene, cameras_v, heur, intrinsics, &mut rng)
        {
            Ok(c) => c,
            Err(ProjectionError::CameraSamplingExhausted) => continue,
            Err(e) => return Err(e),
        };
        for (ci, cam) in cams.iter().enumerate() {
            match project(&layouts[li], scene, cam) {
                Ok(boxes) => out.push(ReferenceLayout {
                    layout_index: li,
                    camera_index: ci,
                    camera: *cam,
                    boxes,
                }),
                Err(ProjectionError::DegenerateView) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    if out.is_empty() {
        return Err(ProjectionError::NoReferences);
    }
    Ok(out)
}
