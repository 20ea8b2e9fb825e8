//! Object category library and cuboid geometry.
//!
//! Objects are axis-aligned cuboids (or unions of sub-cuboids) with a
//! supporting-surface height. Orientation is restricted to the four
//! axis-aligned directions, which keeps interval rotation exact: the
//! rotation matrix entries are all in {0, +-1}, so rotated corner
//! coordinates are just pose intervals shifted by constants.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::Deserialize;

use crate::interval::Interval;

/// Slack used when testing whether a discrete orientation lies in a
/// floating-point interval built from multiples of pi/2.
const ORIENT_EPS: f64 = 1e-9;

/// One of the four axis-aligned orientations `k * pi/2`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub struct Orient(u8);

impl Orient {
    pub const ALL: [Orient; 4] = [Orient(0), Orient(1), Orient(2), Orient(3)];

    pub fn new(k: usize) -> Orient {
        Orient((k % 4) as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn radians(self) -> f64 {
        self.0 as f64 * FRAC_PI_2
    }

    /// Facing direction `u_theta = (cos theta, sin theta)`.
    pub fn facing(self) -> [f64; 2] {
        match self.0 {
            0 => [1.0, 0.0],
            1 => [0.0, 1.0],
            2 => [-1.0, 0.0],
            _ => [0.0, -1.0],
        }
    }

    /// `u_{theta - pi/2}`, the axis used by the left/right relations.
    pub fn right_axis(self) -> [f64; 2] {
        self.rotated_by(3).facing()
    }

    pub fn opposite(self) -> Orient {
        self.rotated_by(2)
    }

    pub fn rotated_by(self, quarter_turns: u8) -> Orient {
        Orient((self.0 + quarter_turns) % 4)
    }

    /// Rotates an xy vector by this orientation.
    pub fn rotate_xy(self, v: [f64; 2]) -> [f64; 2] {
        match self.0 {
            0 => v,
            1 => [-v[1], v[0]],
            2 => [-v[0], -v[1]],
            _ => [v[1], -v[0]],
        }
    }
}

/// Discrete orientations contained in an orientation interval.
pub fn orientations_in(d: &Interval) -> Vec<Orient> {
    Orient::ALL
        .iter()
        .copied()
        .filter(|o| {
            let v = o.radians();
            d.lo() - ORIENT_EPS <= v && v <= d.hi() + ORIENT_EPS
        })
        .collect()
}

/// Hull interval of a non-empty orientation set.
pub fn orient_hull(orients: &[Orient]) -> Interval {
    let lo = orients.iter().map(|o| o.radians()).fold(f64::MAX, f64::min);
    let hi = orients.iter().map(|o| o.radians()).fold(f64::MIN, f64::max);
    Interval::new(lo, hi)
}

/// Orientation interval admitting all four directions.
pub fn full_orientation() -> Interval {
    Interval::new(0.0, 3.0 * FRAC_PI_2)
}

/// Orientation interval for objects facing away from one of the two walls.
pub fn wall_orientations() -> Interval {
    Interval::new(0.0, FRAC_PI_2)
}

/// Base cuboid: extents plus supporting-surface height, both in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CuboidSpec {
    pub extents: [f64; 3],
    pub support_height: f64,
}

impl CuboidSpec {
    pub fn new(extents: [f64; 3], support_height: f64) -> Result<Self, LibraryError> {
        if extents.iter().any(|&e| !(e > 0.0)) {
            return Err(LibraryError::Invalid(format!(
                "non-positive extents {extents:?}"
            )));
        }
        if !(0.0..=extents[2]).contains(&support_height) {
            return Err(LibraryError::Invalid(format!(
                "support height {support_height} outside [0, {}]",
                extents[2]
            )));
        }
        Ok(CuboidSpec {
            extents,
            support_height,
        })
    }
}

/// Sub-cuboid in fractions of the parent extents.
#[derive(Clone, Debug)]
pub struct SubCuboid {
    pub name: Option<String>,
    pub offset_frac: [f64; 3],
    pub size_frac: [f64; 3],
}

impl SubCuboid {
    /// Local box `[lo, hi]` in meters for the given parent extents.
    pub fn local_box(&self, extents: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = self.offset_frac[a] * extents[a];
            hi[a] = lo[a] + self.size_frac[a] * extents[a];
        }
        (lo, hi)
    }
}

/// Which half of the cuboid a named sub-object region occupies, along the
/// facing axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionHalf {
    Front,
    Back,
}

/// Object category: geometry, placement flags and attribute variants.
#[derive(Clone, Debug)]
pub struct ObjectModel {
    pub category: String,
    pub base: CuboidSpec,
    pub sub_cuboids: Vec<SubCuboid>,
    pub regions: BTreeMap<String, RegionHalf>,
    pub on_wall: bool,
    pub against_wall: bool,
    pub on_ground: bool,
    pub variants: BTreeMap<String, CuboidSpec>,
    pub phrases: Vec<String>,
}

impl ObjectModel {
    /// Applies the first attribute that names a size variant; unknown
    /// attributes leave the base spec untouched.
    pub fn resolve(&self, attributes: &[String]) -> ResolvedModel {
        let spec = attributes
            .iter()
            .find_map(|a| self.variants.get(a))
            .copied()
            .unwrap_or(self.base);
        let subs = self
            .sub_cuboids
            .iter()
            .map(|s| s.local_box(spec.extents))
            .collect();
        ResolvedModel {
            spec,
            subs,
            regions: self.regions.clone(),
        }
    }
}

/// Category geometry with a concrete size chosen: local sub-boxes in meters.
#[derive(Clone, Debug)]
pub struct ResolvedModel {
    pub spec: CuboidSpec,
    /// Local `[lo, hi]` boxes; empty means the object is a single cuboid.
    pub subs: Vec<([f64; 3], [f64; 3])>,
    pub regions: BTreeMap<String, RegionHalf>,
}

impl ResolvedModel {
    /// Local boxes used for the pairwise exclusivity test: the sub-cuboids,
    /// or the whole cuboid when there is no decomposition.
    pub fn solid_boxes(&self) -> Vec<([f64; 3], [f64; 3])> {
        if self.subs.is_empty() {
            vec![([0.0; 3], self.spec.extents)]
        } else {
            self.subs.clone()
        }
    }

    pub fn region_box(&self, name: &str) -> Option<([f64; 3], [f64; 3])> {
        let half = self.regions.get(name)?;
        let [lx, ly, lz] = self.spec.extents;
        Some(match half {
            RegionHalf::Back => ([0.0, 0.0, 0.0], [lx / 2.0, ly, lz]),
            RegionHalf::Front => ([lx / 2.0, 0.0, 0.0], [lx, ly, lz]),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("object library: {0}")]
    Invalid(String),
    #[error("object library parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Immutable category library loaded from the structured-text data file.
#[derive(Clone, Debug)]
pub struct ObjectLibrary {
    categories: BTreeMap<String, ObjectModel>,
    phrase_index: Vec<(String, String)>,
}

#[derive(Deserialize)]
struct LibraryFile {
    category: Vec<CategoryFile>,
}

#[derive(Deserialize)]
struct CategoryFile {
    name: String,
    #[serde(default)]
    phrases: Vec<String>,
    extents: [f64; 3],
    support_height: f64,
    #[serde(default)]
    on_wall: bool,
    #[serde(default)]
    against_wall: bool,
    #[serde(default)]
    on_ground: bool,
    #[serde(default)]
    sub_cuboid: Vec<SubCuboidFile>,
    #[serde(default)]
    regions: BTreeMap<String, RegionHalf>,
    #[serde(default)]
    variants: BTreeMap<String, VariantFile>,
}

#[derive(Deserialize)]
struct SubCuboidFile {
    #[serde(default)]
    name: Option<String>,
    offset: [f64; 3],
    size: [f64; 3],
}

#[derive(Deserialize)]
struct VariantFile {
    extents: [f64; 3],
    #[serde(default)]
    support_height: Option<f64>,
}

pub const DEFAULT_LIBRARY_TOML: &str = include_str!("../data/object_library.toml");

impl ObjectLibrary {
    /// The library shipped with the crate (19 SUN RGB-D categories plus the
    /// extra 3DGP furniture categories).
    pub fn builtin() -> ObjectLibrary {
        Self::from_toml_str(DEFAULT_LIBRARY_TOML).expect("builtin object library is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<ObjectLibrary, LibraryError> {
        let file: LibraryFile = toml::from_str(text)?;
        let mut categories = BTreeMap::new();
        let mut phrase_index = Vec::new();
        for cat in file.category {
            let base = CuboidSpec::new(cat.extents, cat.support_height)
                .map_err(|e| LibraryError::Invalid(format!("{}: {e}", cat.name)))?;
            let sub_cuboids: Vec<SubCuboid> = cat
                .sub_cuboid
                .into_iter()
                .map(|s| SubCuboid {
                    name: s.name,
                    offset_frac: s.offset,
                    size_frac: s.size,
                })
                .collect();
            validate_subs(&cat.name, &sub_cuboids)?;
            let mut variants = BTreeMap::new();
            for (attr, v) in cat.variants {
                let zs = v.support_height.unwrap_or_else(|| {
                    // keep the same relative support height as the base
                    cat.support_height / cat.extents[2] * v.extents[2]
                });
                let spec = CuboidSpec::new(v.extents, zs)
                    .map_err(|e| LibraryError::Invalid(format!("{}.{attr}: {e}", cat.name)))?;
                variants.insert(attr, spec);
            }
            let mut phrases = cat.phrases;
            let default_phrase = cat.name.replace('-', " ");
            if !phrases.contains(&default_phrase) {
                phrases.push(default_phrase);
            }
            for p in &phrases {
                phrase_index.push((p.clone(), cat.name.clone()));
            }
            let model = ObjectModel {
                category: cat.name.clone(),
                base,
                sub_cuboids,
                regions: cat.regions,
                on_wall: cat.on_wall,
                against_wall: cat.against_wall,
                on_ground: cat.on_ground,
                variants,
                phrases,
            };
            if categories.insert(cat.name.clone(), model).is_some() {
                return Err(LibraryError::Invalid(format!(
                    "duplicate category {}",
                    cat.name
                )));
            }
        }
        // longest phrases first so "night stand" wins over "stand"-like prefixes
        phrase_index.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
        Ok(ObjectLibrary {
            categories,
            phrase_index,
        })
    }

    pub fn get(&self, category: &str) -> Option<&ObjectModel> {
        self.categories.get(category)
    }

    pub fn contains(&self, category: &str) -> bool {
        self.categories.contains_key(category)
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(|s| s.as_str())
    }

    /// Phrase-to-category pairs, longest phrase first.
    pub fn phrases(&self) -> &[(String, String)] {
        &self.phrase_index
    }
}

fn validate_subs(name: &str, subs: &[SubCuboid]) -> Result<(), LibraryError> {
    if subs.is_empty() {
        return Ok(());
    }
    let mut hull_lo = [f64::MAX; 3];
    let mut hull_hi = [f64::MIN; 3];
    for s in subs {
        for a in 0..3 {
            let lo = s.offset_frac[a];
            let hi = lo + s.size_frac[a];
            if !(s.size_frac[a] > 0.0) || lo < -1e-9 || hi > 1.0 + 1e-9 {
                return Err(LibraryError::Invalid(format!(
                    "{name}: sub-cuboid outside parent bounds"
                )));
            }
            hull_lo[a] = hull_lo[a].min(lo);
            hull_hi[a] = hull_hi[a].max(hi);
        }
    }
    for a in 0..3 {
        if hull_lo[a] > 1e-9 || hull_hi[a] < 1.0 - 1e-9 {
            return Err(LibraryError::Invalid(format!(
                "{name}: sub-cuboid union bounding box does not equal the base cuboid"
            )));
        }
    }
    Ok(())
}

/// Object pose as intervals: position of the lowest corner before rotation
/// plus the orientation interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub x: Interval,
    pub y: Interval,
    pub z: Interval,
    pub d: Interval,
}

impl Pose {
    pub fn point(x: f64, y: f64, z: f64, o: Orient) -> Pose {
        Pose {
            x: Interval::point(x),
            y: Interval::point(y),
            z: Interval::point(z),
            d: Interval::point(o.radians()),
        }
    }

    pub fn orientations(&self) -> Vec<Orient> {
        orientations_in(&self.d)
    }
}

/// Axis-aligned lowest/highest corner pair with interval coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerPair {
    pub p: [Interval; 3],
    pub q: [Interval; 3],
}

impl CornerPair {
    pub fn hull(&self, other: &CornerPair) -> CornerPair {
        CornerPair {
            p: [
                self.p[0].hull(other.p[0]),
                self.p[1].hull(other.p[1]),
                self.p[2].hull(other.p[2]),
            ],
            q: [
                self.q[0].hull(other.q[0]),
                self.q[1].hull(other.q[1]),
                self.q[2].hull(other.q[2]),
            ],
        }
    }

    /// Center coordinate `(p + q) / 2` along one axis.
    pub fn center(&self, axis: usize) -> Interval {
        self.p[axis].add(self.q[axis]).scale_shift(0.5, 0.0)
    }
}

/// Per-axis `[min, max]` offsets of the rotated local box relative to the
/// pose coordinates, in meters.
pub(crate) fn rotated_offsets(
    local_lo: [f64; 3],
    local_hi: [f64; 3],
    parent: [f64; 3],
    o: Orient,
) -> ([f64; 3], [f64; 3]) {
    let cx = parent[0] / 2.0;
    let cy = parent[1] / 2.0;
    let corners_xy = [
        [local_lo[0], local_lo[1]],
        [local_lo[0], local_hi[1]],
        [local_hi[0], local_lo[1]],
        [local_hi[0], local_hi[1]],
    ];
    let mut min_xy = [f64::MAX; 2];
    let mut max_xy = [f64::MIN; 2];
    for c in corners_xy {
        let r = o.rotate_xy([c[0] - cx, c[1] - cy]);
        let w = [r[0] + cx, r[1] + cy];
        for a in 0..2 {
            min_xy[a] = min_xy[a].min(w[a]);
            max_xy[a] = max_xy[a].max(w[a]);
        }
    }
    (
        [min_xy[0], min_xy[1], local_lo[2]],
        [max_xy[0], max_xy[1], local_hi[2]],
    )
}

fn box_corners_for(pose: &Pose, local_lo: [f64; 3], local_hi: [f64; 3], parent: [f64; 3]) -> Option<CornerPair> {
    let orients = pose.orientations();
    if orients.is_empty() {
        return None;
    }
    let mut acc: Option<CornerPair> = None;
    for o in orients {
        let (lo, hi) = rotated_offsets(local_lo, local_hi, parent, o);
        let pos = [pose.x, pose.y, pose.z];
        let pair = CornerPair {
            p: [pos[0].shift(lo[0]), pos[1].shift(lo[1]), pos[2].shift(lo[2])],
            q: [pos[0].shift(hi[0]), pos[1].shift(hi[1]), pos[2].shift(hi[2])],
        };
        acc = Some(match acc {
            None => pair,
            Some(prev) => prev.hull(&pair),
        });
    }
    acc
}

/// Interval corner pair of the whole cuboid.
///
/// For orientation intervals covering several discrete directions this is
/// the hull over those directions; `None` when the orientation interval
/// contains none of the four.
pub fn corners(pose: &Pose, spec: &CuboidSpec) -> Option<CornerPair> {
    box_corners_for(pose, [0.0; 3], spec.extents, spec.extents)
}

/// Interval corner pair of sub-cuboid `k`, rotated and translated with the
/// parent. Falls back to the whole cuboid for single-cuboid objects when
/// `k == 0`.
pub fn sub_corners(pose: &Pose, model: &ResolvedModel, k: usize) -> Option<CornerPair> {
    if model.subs.is_empty() {
        if k == 0 {
            return corners(pose, &model.spec);
        }
        return None;
    }
    let (lo, hi) = *model.subs.get(k)?;
    box_corners_for(pose, lo, hi, model.spec.extents)
}

/// Corner pair of a named sub-object region (e.g. the head of a bed).
pub fn region_corners(pose: &Pose, model: &ResolvedModel, region: &str) -> Option<CornerPair> {
    let (lo, hi) = model.region_box(region)?;
    box_corners_for(pose, lo, hi, model.spec.extents)
}

/// Height of the supporting surface, `z + z_s`.
pub fn support_height(pose: &Pose, model: &ResolvedModel) -> Interval {
    pose.z.shift(model.spec.support_height)
}

/// Concrete (degenerate) pose used after sampling a solution.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConcretePose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub orient: usize,
}

impl ConcretePose {
    pub fn orientation(&self) -> Orient {
        Orient::new(self.orient)
    }

    pub fn to_pose(&self) -> Pose {
        Pose::point(self.x, self.y, self.z, self.orientation())
    }
}

/// The eight world-space corner points of a concrete cuboid.
pub fn corner_points(pose: &ConcretePose, spec: &CuboidSpec) -> [[f64; 3]; 8] {
    let [lx, ly, lz] = spec.extents;
    let o = pose.orientation();
    let c = [lx / 2.0, ly / 2.0];
    let mut out = [[0.0; 3]; 8];
    let mut i = 0;
    for xf in [0.0, lx] {
        for yf in [0.0, ly] {
            for zf in [0.0, lz] {
                let r = o.rotate_xy([xf - c[0], yf - c[1]]);
                out[i] = [pose.x + r[0] + c[0], pose.y + r[1] + c[1], pose.z + zf];
                i += 1;
            }
        }
    }
    out
}

/// One placed object instance in a scene.
#[derive(Clone, Debug)]
pub struct SceneObject {
    /// Canonical reference name, e.g. `chair-0-2`.
    pub name: String,
    pub category: String,
    pub model: ResolvedModel,
    pub on_wall: bool,
    pub against_wall: bool,
    pub on_ground: bool,
}

/// Virtual object standing in for a counted group; its cuboid is the
/// bounding box of its members and it carries no pose variables.
#[derive(Clone, Debug)]
pub struct GroupDef {
    pub name: String,
    pub members: Vec<usize>,
}

/// Ordered set of objects a layout state refers to.
#[derive(Clone, Debug)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub groups: Vec<GroupDef>,
    pub room: [f64; 3],
}

impl Scene {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_spec(lx: f64, ly: f64, lz: f64) -> CuboidSpec {
        CuboidSpec::new([lx, ly, lz], lz).unwrap()
    }

    #[test]
    fn builtin_library_loads_and_validates() {
        let lib = ObjectLibrary::builtin();
        for name in ["bed", "chair", "night-stand", "picture", "dining-table"] {
            assert!(lib.contains(name), "missing {name}");
        }
        assert!(lib.get("bed").unwrap().against_wall);
        assert!(lib.get("picture").unwrap().on_wall);
        assert!(!lib.get("sofa").unwrap().against_wall);
        assert!(lib.get("sofa").unwrap().variants.contains_key("triple"));
    }

    #[test]
    fn corners_identity_orientation() {
        let spec = unit_spec(2.0, 1.0, 1.0);
        let pose = Pose::point(0.0, 0.0, 0.0, Orient::new(0));
        let c = corners(&pose, &spec).unwrap();
        for a in 0..3 {
            assert_eq!(c.p[a], Interval::point(0.0));
        }
        assert_eq!(c.q[0], Interval::point(2.0));
        assert_eq!(c.q[1], Interval::point(1.0));
        assert_eq!(c.q[2], Interval::point(1.0));
    }

    #[test]
    fn corners_quarter_turn_recenters_footprint() {
        // (2,1,1) cuboid at the origin rotated by pi/2: footprint extents
        // swap and recenter, lowest corner (0.5, -0.5, 0), highest (1.5, 1.5, 1)
        let spec = unit_spec(2.0, 1.0, 1.0);
        let pose = Pose::point(0.0, 0.0, 0.0, Orient::new(1));
        let c = corners(&pose, &spec).unwrap();
        assert!((c.p[0].lo() - 0.5).abs() < 1e-12);
        assert!((c.p[1].lo() + 0.5).abs() < 1e-12);
        assert_eq!(c.p[2], Interval::point(0.0));
        assert!((c.q[0].hi() - 1.5).abs() < 1e-12);
        assert!((c.q[1].hi() - 1.5).abs() < 1e-12);
        assert_eq!(c.q[2], Interval::point(1.0));
    }

    #[test]
    fn corners_shift_by_interval() {
        let spec = unit_spec(1.0, 1.0, 1.0);
        let pose = Pose {
            x: Interval::new(0.0, 1.0),
            y: Interval::point(0.0),
            z: Interval::point(0.0),
            d: Interval::point(0.0),
        };
        let c = corners(&pose, &spec).unwrap();
        assert_eq!(c.p[0], Interval::new(0.0, 1.0));
        assert_eq!(c.q[0], Interval::new(1.0, 2.0));
    }

    #[test]
    fn corners_empty_orientation_interval_is_infeasible() {
        let spec = unit_spec(1.0, 1.0, 1.0);
        let pose = Pose {
            x: Interval::point(0.0),
            y: Interval::point(0.0),
            z: Interval::point(0.0),
            d: Interval::new(0.3, 0.5),
        };
        assert!(corners(&pose, &spec).is_none());
    }

    #[test]
    fn single_cuboid_sub_corners_equal_corners() {
        let lib = ObjectLibrary::builtin();
        let model = lib.get("night-stand").unwrap().resolve(&[]);
        let pose = Pose::point(1.0, 2.0, 0.0, Orient::new(1));
        assert_eq!(
            sub_corners(&pose, &model, 0).unwrap(),
            corners(&pose, &model.spec).unwrap()
        );
    }

    #[test]
    fn table_top_reaches_parent_height() {
        let lib = ObjectLibrary::builtin();
        let model = lib.get("table").unwrap().resolve(&[]);
        let pose = Pose::point(0.0, 0.0, 0.0, Orient::new(0));
        let top = sub_corners(&pose, &model, 0).unwrap();
        let whole = corners(&pose, &model.spec).unwrap();
        assert_eq!(top.q[2], whole.q[2]);
    }

    #[test]
    fn chair_seat_reflects_through_center_at_half_turn() {
        let lib = ObjectLibrary::builtin();
        let model = lib.get("chair").unwrap().resolve(&[]);
        // the back slab occupies local x [0, 0.1]; at d=pi it lands at [0.4, 0.5]
        let p0 = Pose::point(0.0, 0.0, 0.0, Orient::new(0));
        let p2 = Pose::point(0.0, 0.0, 0.0, Orient::new(2));
        let back0 = sub_corners(&p0, &model, 2).unwrap();
        let back2 = sub_corners(&p2, &model, 2).unwrap();
        assert!((back0.p[0].lo() - 0.0).abs() < 1e-12);
        assert!((back0.q[0].hi() - 0.1).abs() < 1e-12);
        assert!((back2.p[0].lo() - 0.4).abs() < 1e-12);
        assert!((back2.q[0].hi() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn support_height_examples() {
        let lib = ObjectLibrary::builtin();
        let chair = lib.get("chair").unwrap().resolve(&[]);
        let pose = Pose::point(0.0, 0.0, 0.0, Orient::new(0));
        assert_eq!(support_height(&pose, &chair), Interval::point(0.45));

        let bin = lib.get("box").unwrap().resolve(&[]);
        assert_eq!(
            support_height(&pose, &bin),
            Interval::point(bin.spec.extents[2])
        );

        let lifted = Pose {
            z: Interval::new(0.0, 0.2),
            ..Pose::point(0.0, 0.0, 0.0, Orient::new(0))
        };
        assert_eq!(
            support_height(&lifted, &chair),
            Interval::new(0.45, 0.65)
        );
    }

    #[test]
    fn half_turn_keeps_footprint() {
        let lib = ObjectLibrary::builtin();
        for cat in ["bed", "chair", "desk", "picture"] {
            let spec = lib.get(cat).unwrap().base;
            for k in 0..4 {
                let a = corners(&Pose::point(1.0, 2.0, 0.0, Orient::new(k)), &spec).unwrap();
                let b = corners(&Pose::point(1.0, 2.0, 0.0, Orient::new(k + 2)), &spec).unwrap();
                assert_eq!(a, b, "{cat} at {k}");
            }
        }
    }

    #[test]
    fn sub_cuboid_union_bbox_matches_corners() {
        let lib = ObjectLibrary::builtin();
        for cat in ["bed", "chair", "table", "desk", "dining-table", "sofa"] {
            let model = lib.get(cat).unwrap().resolve(&[]);
            for k in 0..4 {
                let pose = Pose::point(0.7, 1.3, 0.2, Orient::new(k));
                let whole = corners(&pose, &model.spec).unwrap();
                let mut acc: Option<CornerPair> = None;
                for i in 0..model.subs.len() {
                    let sc = sub_corners(&pose, &model, i).unwrap();
                    acc = Some(match acc {
                        None => sc,
                        Some(prev) => prev.hull(&sc),
                    });
                }
                let union = acc.unwrap();
                for a in 0..3 {
                    assert!((union.p[a].lo() - whole.p[a].lo()).abs() < 1e-9, "{cat}");
                    assert!((union.q[a].hi() - whole.q[a].hi()).abs() < 1e-9, "{cat}");
                }
            }
        }
    }

    #[test]
    fn corners_monotone_under_pose_widening() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let spec = unit_spec(1.2, 0.8, 0.7);
        for _ in 0..500 {
            let base = Pose {
                x: Interval::new(rng.gen_range(0.0..2.0), rng.gen_range(2.0..4.0)),
                y: Interval::new(rng.gen_range(0.0..2.0), rng.gen_range(2.0..4.0)),
                z: Interval::point(0.0),
                d: Interval::point(0.0),
            };
            let wider = Pose {
                x: Interval::new(base.x.lo() - 0.5, base.x.hi() + 0.5),
                y: base.y,
                z: base.z,
                d: full_orientation(),
            };
            let a = corners(&base, &spec).unwrap();
            let b = corners(&wider, &spec).unwrap();
            for axis in 0..3 {
                assert!(b.p[axis].lo() <= a.p[axis].lo() + 1e-12);
                assert!(b.q[axis].hi() >= a.q[axis].hi() - 1e-12);
            }
        }
    }

    #[test]
    fn region_halves() {
        let lib = ObjectLibrary::builtin();
        let bed = lib.get("bed").unwrap().resolve(&[]);
        let pose = Pose::point(0.0, 0.0, 0.0, Orient::new(0));
        let head = region_corners(&pose, &bed, "head").unwrap();
        let rear = region_corners(&pose, &bed, "rear").unwrap();
        assert_eq!(head.q[0], Interval::point(1.0));
        assert_eq!(rear.p[0], Interval::point(1.0));
        assert_eq!(rear.q[0], Interval::point(2.0));
        assert!(region_corners(&pose, &bed, "seat").is_none());
    }

    #[test]
    fn variant_rescales_sub_cuboids() {
        let lib = ObjectLibrary::builtin();
        let sofa = lib.get("sofa").unwrap();
        let triple = sofa.resolve(&["triple".into()]);
        assert_eq!(triple.spec.extents[1], 2.4);
        // base slab spans the full footprint in y for any variant
        let (_, hi) = triple.subs[0];
        assert!((hi[1] - 2.4).abs() < 1e-12);
    }
}
