//! Spatial relation semantics and constraint compilation.
//!
//! Triplets plus prior knowledge compile into a constraint expression tree
//! over interval poses. Evaluation maps a layout box to a tribool that is
//! sound in both directions: True only when every point in the box
//! satisfies everything, False only when no point does.
//!
//! The eight atomic relations follow their inequality definitions evaluated
//! in interval arithmetic. Directional relations (behind/front/on-left/
//! on-right) depend on the reference orientation, so they are evaluated per
//! admitted discrete direction and the outcomes are combined by consensus
//! (agreement keeps the value, disagreement yields Maybe).

use std::collections::BTreeMap;

use crate::interval::{Interval, Tribool};
use crate::query::{expand_counts, ObjectRef, Query, Relation, ValidationError};
use crate::scene::{
    full_orientation, rotated_offsets, wall_orientations, GroupDef, ObjectLibrary, Orient,
    ResolvedModel, Scene, SceneObject,
};
use crate::solver::{BoundMatrices, LayoutState, AXIS_X, AXIS_Y, AXIS_Z};

/// Distance thresholds for the near/above relations (meters).
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RelationThresholds {
    pub d_near: f64,
    pub d_min_above: f64,
    pub d_max_above: f64,
}

impl Default for RelationThresholds {
    fn default() -> Self {
        RelationThresholds {
            d_near: 0.5,
            d_min_above: 0.25,
            d_max_above: 0.5,
        }
    }
}

/// Direction frame of a reference orientation: the facing unit vector and
/// the cuboid-enlargement vector used by `near`.
///
/// For the axis-aligned orientations every component of `e` has magnitude
/// one, so applying `p - d*e, q + d*e` to the rotated corner pair inflates
/// the axis-aligned box by `d` on every side; the evaluation below uses
/// that reduced form.
#[derive(Clone, Copy, Debug)]
pub struct AxisFrame {
    pub theta: f64,
    pub u: [f64; 3],
    pub e: [f64; 3],
}

impl AxisFrame {
    pub fn new(theta: f64) -> AxisFrame {
        let (s, c) = theta.sin_cos();
        AxisFrame {
            theta,
            u: [c, s, 0.0],
            e: [c - s, s + c, 1.0],
        }
    }
}

/// Evaluation parameters: thresholds, the equality tolerance shared with
/// the solver, and the coherence-prior distance.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EvalContext {
    pub thresholds: RelationThresholds,
    /// Tolerance used wherever a relation demands exact equality.
    pub tol: f64,
    /// "objects in each semantic triplet are close": maximum gap between a
    /// triplet's target and reference.
    pub coherence_distance: f64,
}

impl Default for EvalContext {
    fn default() -> Self {
        EvalContext {
            thresholds: RelationThresholds::default(),
            tol: 0.2,
            coherence_distance: 2.0,
        }
    }
}

/// The eight atomic relations.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AtomicRelation {
    Near,
    On,
    Above,
    Under,
    Behind,
    Front,
    OnLeft,
    OnRight,
}

impl AtomicRelation {
    pub fn name(&self) -> &'static str {
        match self {
            AtomicRelation::Near => "near",
            AtomicRelation::On => "on",
            AtomicRelation::Above => "above",
            AtomicRelation::Under => "under",
            AtomicRelation::Behind => "behind",
            AtomicRelation::Front => "front",
            AtomicRelation::OnLeft => "on-left",
            AtomicRelation::OnRight => "on-right",
        }
    }
}

/// What a constraint leaf refers to: a concrete object or a virtual group.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OperandObject {
    Object(usize),
    Group(usize),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Operand {
    pub object: OperandObject,
    pub region: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PriorKind {
    /// `x = 0 \/ y = 0` on the pose coordinates (picture, door, mirror).
    OnWall,
    /// One face touching a wall plane, facing into the room.
    AgainstWall,
    /// `z = 0`.
    OnGround,
    /// The two walls are solid: the cuboid stays on their positive side.
    InsideWalls,
}

/// Constraint expression tree.
#[derive(Clone, PartialEq, Debug)]
pub enum ConstraintNode {
    Atomic {
        relation: AtomicRelation,
        target: Operand,
        reference: Operand,
    },
    /// Exact orientation equality between two objects.
    SameOrientation(usize, usize),
    /// Coherence prior: target within `coherence_distance` of reference.
    Coherent { target: Operand, reference: Operand },
    And(Vec<ConstraintNode>),
    Or(Vec<ConstraintNode>),
    /// Pairwise sub-cuboid disjointness over all concrete object pairs.
    Exclusive,
    Prior { kind: PriorKind, object: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("object {object} has no sub-object region `{region}`")]
    UnknownRegion { object: String, region: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Per-object rotated box offsets, precomputed for each discrete
/// orientation so evaluation only shifts pose intervals by constants.
#[derive(Clone, Debug)]
struct GeomConsts {
    /// Whole-cuboid `[lo, hi]` offsets per orientation.
    full: [([f64; 3], [f64; 3]); 4],
    /// Solid boxes (sub-cuboids, or the whole box) per orientation.
    solids: [Vec<([f64; 3], [f64; 3])>; 4],
    regions: BTreeMap<String, [([f64; 3], [f64; 3]); 4]>,
    support: f64,
}

impl GeomConsts {
    fn new(model: &ResolvedModel) -> GeomConsts {
        let extents = model.spec.extents;
        let per_orient = |lo: [f64; 3], hi: [f64; 3]| {
            let mut out = [([0.0; 3], [0.0; 3]); 4];
            for k in 0..4 {
                out[k] = rotated_offsets(lo, hi, extents, Orient::new(k));
            }
            out
        };
        let full = per_orient([0.0; 3], extents);
        let solid_list = model.solid_boxes();
        let mut solids: [Vec<([f64; 3], [f64; 3])>; 4] = Default::default();
        for k in 0..4 {
            solids[k] = solid_list
                .iter()
                .map(|&(lo, hi)| rotated_offsets(lo, hi, extents, Orient::new(k)))
                .collect();
        }
        let mut regions = BTreeMap::new();
        for name in model.regions.keys() {
            let (lo, hi) = model.region_box(name).expect("region exists");
            regions.insert(name.clone(), per_orient(lo, hi));
        }
        GeomConsts {
            full,
            solids,
            regions,
            support: model.spec.support_height,
        }
    }
}

/// A compiled query: the scene objects, the constraint tree, and the
/// precomputed geometry needed to evaluate it on layout states.
#[derive(Clone, Debug)]
pub struct CompiledConstraint {
    pub scene: Scene,
    pub root: ConstraintNode,
    pub ctx: EvalContext,
    /// Initial orientation domain per object (restricted for objects that
    /// must face away from a wall).
    init_d: Vec<Interval>,
    /// Initial z domain per object (restricted for on-ground objects).
    init_z: Vec<Interval>,
    geoms: Vec<GeomConsts>,
}

/// Box with interval corners plus the data relations need.
#[derive(Clone, Debug)]
pub struct OperandGeom {
    /// (orientation, corner pair) per admitted reference direction. Groups
    /// carry their orientation-independent hull for every admitted member
    /// direction.
    pub cases: Vec<(Orient, BoxIv)>,
    pub support: Interval,
}

/// Interval axis-aligned box.
#[derive(Clone, Copy, Debug)]
pub struct BoxIv {
    pub lo: [Interval; 3],
    pub hi: [Interval; 3],
}

impl BoxIv {
    fn from_offsets(pose: [Interval; 3], off: &([f64; 3], [f64; 3])) -> BoxIv {
        BoxIv {
            lo: [
                pose[0].shift(off.0[0]),
                pose[1].shift(off.0[1]),
                pose[2].shift(off.0[2]),
            ],
            hi: [
                pose[0].shift(off.1[0]),
                pose[1].shift(off.1[1]),
                pose[2].shift(off.1[2]),
            ],
        }
    }

    fn hull(&self, other: &BoxIv) -> BoxIv {
        let mut out = *self;
        for a in 0..3 {
            out.lo[a] = out.lo[a].hull(other.lo[a]);
            out.hi[a] = out.hi[a].hull(other.hi[a]);
        }
        out
    }

    /// Bounding box of two boxes whose coordinates are independent
    /// interval variables (used for virtual group objects): the min/max
    /// of intervals, not their hull.
    fn bounding_with(&self, other: &BoxIv) -> BoxIv {
        let mut out = *self;
        for a in 0..3 {
            out.lo[a] = out.lo[a].min_with(other.lo[a]);
            out.hi[a] = out.hi[a].max_with(other.hi[a]);
        }
        out
    }

    pub fn center(&self, axis: usize) -> Interval {
        self.lo[axis].add(self.hi[axis]).scale_shift(0.5, 0.0)
    }
}

impl OperandGeom {
    pub fn hull(&self) -> BoxIv {
        let mut it = self.cases.iter();
        let first = it.next().expect("operand has at least one case").1;
        it.fold(first, |acc, (_, b)| acc.hull(b))
    }

    /// Builds the operand data for a free-standing pose, one case per
    /// admitted orientation. `None` when the orientation interval admits no
    /// discrete direction.
    pub fn for_pose(
        pose: &crate::scene::Pose,
        model: &ResolvedModel,
        region: Option<&str>,
    ) -> Option<OperandGeom> {
        let orients = pose.orientations();
        if orients.is_empty() {
            return None;
        }
        let mut cases = Vec::with_capacity(orients.len());
        for k in orients {
            let fixed = crate::scene::Pose {
                d: Interval::point(k.radians()),
                ..pose.clone()
            };
            let pair = match region {
                None => crate::scene::corners(&fixed, &model.spec)?,
                Some(name) => crate::scene::region_corners(&fixed, model, name)?,
            };
            cases.push((k, BoxIv { lo: pair.p, hi: pair.q }));
        }
        Some(OperandGeom {
            cases,
            support: crate::scene::support_height(pose, model),
        })
    }
}

impl CompiledConstraint {
    /// Initial layout state spanning the room, with unary priors folded
    /// into the starting domains (ground objects start at the floor, wall
    /// objects keep only room-facing orientations).
    pub fn initial_state(&self) -> LayoutState {
        let mut vars = Vec::with_capacity(self.scene.len() * 4);
        for i in 0..self.scene.len() {
            vars.push(Interval::new(0.0, self.scene.room[0]));
            vars.push(Interval::new(0.0, self.scene.room[1]));
            vars.push(self.init_z[i]);
            vars.push(self.init_d[i]);
        }
        LayoutState::new(vars)
    }

    pub fn eval(&self, s: &LayoutState) -> Tribool {
        debug_assert_eq!(s.object_count(), self.scene.len());
        let cache = self.build_cache(s);
        if cache.iter().any(|c| c.boxes.is_empty()) {
            // no admissible orientation: no real point lies in this box
            return Tribool::False;
        }
        self.eval_node(&self.root, s, &cache)
    }

    fn build_cache(&self, s: &LayoutState) -> Vec<ObjCase> {
        (0..self.scene.len())
            .map(|i| {
                let pose = [s.var(i, AXIS_X), s.var(i, AXIS_Y), s.var(i, AXIS_Z)];
                let orients = s.orientations(i);
                let boxes: Vec<(Orient, BoxIv)> = orients
                    .iter()
                    .map(|&k| {
                        (
                            k,
                            BoxIv::from_offsets(pose, &self.geoms[i].full[k.index()]),
                        )
                    })
                    .collect();
                ObjCase {
                    pose,
                    boxes,
                    support: s.var(i, AXIS_Z).shift(self.geoms[i].support),
                }
            })
            .collect()
    }

    fn operand_geom(&self, op: &Operand, cache: &[ObjCase]) -> OperandGeom {
        match op.object {
            OperandObject::Object(i) => {
                let obj = &cache[i];
                let cases = match &op.region {
                    None => obj.boxes.clone(),
                    Some(name) => {
                        let offs = &self.geoms[i].regions[name];
                        obj.boxes
                            .iter()
                            .map(|(k, _)| (*k, BoxIv::from_offsets(obj.pose, &offs[k.index()])))
                            .collect()
                    }
                };
                OperandGeom {
                    cases,
                    support: obj.support,
                }
            }
            OperandObject::Group(g) => {
                let group = &self.scene.groups[g];
                let mut hull: Option<BoxIv> = None;
                let mut support: Option<Interval> = None;
                let mut orients: Vec<Orient> = Vec::new();
                for &m in &group.members {
                    let mh = cache[m]
                        .boxes
                        .iter()
                        .map(|(_, b)| *b)
                        .reduce(|a, b| a.hull(&b))
                        .expect("member has orientations");
                    hull = Some(match hull {
                        None => mh,
                        Some(h) => h.bounding_with(&mh),
                    });
                    support = Some(match support {
                        None => cache[m].support,
                        Some(s) => s.hull(cache[m].support),
                    });
                    for (k, _) in &cache[m].boxes {
                        if !orients.contains(k) {
                            orients.push(*k);
                        }
                    }
                }
                orients.sort();
                let hull = hull.expect("group has members");
                OperandGeom {
                    cases: orients.into_iter().map(|k| (k, hull)).collect(),
                    support: support.expect("group has members"),
                }
            }
        }
    }

    fn eval_node(&self, node: &ConstraintNode, s: &LayoutState, cache: &[ObjCase]) -> Tribool {
        match node {
            ConstraintNode::Atomic {
                relation,
                target,
                reference,
            } => {
                let t = self.operand_geom(target, cache);
                let r = self.operand_geom(reference, cache);
                eval_atomic(*relation, &t, &r, &self.ctx)
            }
            ConstraintNode::Coherent { target, reference } => {
                let t = self.operand_geom(target, cache);
                let r = self.operand_geom(reference, cache);
                near_within(&t.hull(), &r.hull(), self.ctx.coherence_distance)
            }
            ConstraintNode::SameOrientation(i, j) => {
                orientation_equality(&cache[*i], &cache[*j])
            }
            ConstraintNode::And(children) => {
                let mut acc = Tribool::True;
                for c in children {
                    acc = acc.meet(self.eval_node(c, s, cache));
                    if acc.is_false() {
                        return Tribool::False;
                    }
                }
                acc
            }
            ConstraintNode::Or(children) => {
                let mut acc = Tribool::False;
                for c in children {
                    acc = acc.join(self.eval_node(c, s, cache));
                    if acc.is_true() {
                        return Tribool::True;
                    }
                }
                acc
            }
            ConstraintNode::Exclusive => self.eval_exclusive(s, cache),
            ConstraintNode::Prior { kind, object } => self.eval_prior(*kind, *object, s, cache),
        }
    }

    fn eval_exclusive(&self, s: &LayoutState, cache: &[ObjCase]) -> Tribool {
        let n = self.scene.len();
        let mut acc = Tribool::True;
        for i in 0..n {
            for j in i + 1..n {
                let pair = self.eval_exclusive_pair(i, j, s, cache);
                acc = acc.meet(pair);
                if acc.is_false() {
                    return Tribool::False;
                }
            }
        }
        acc
    }

    fn eval_exclusive_pair(
        &self,
        i: usize,
        j: usize,
        _s: &LayoutState,
        cache: &[ObjCase],
    ) -> Tribool {
        // cheap accept: whole-cuboid hulls already surely disjoint
        let hi = cache[i].hull();
        let hj = cache[j].hull();
        if boxes_disjoint(&hi, &hj).is_true() {
            return Tribool::True;
        }
        let pose_i = cache[i].pose;
        let pose_j = cache[j].pose;
        let cases = cache[i].boxes.iter().flat_map(|(ki, _)| {
            cache[j].boxes.iter().map(move |(kj, _)| (*ki, *kj))
        });
        Tribool::consensus(cases.map(|(ki, kj)| {
            let mut acc = Tribool::True;
            for vo in &self.geoms[i].solids[ki.index()] {
                let v = BoxIv::from_offsets(pose_i, vo);
                for wo in &self.geoms[j].solids[kj.index()] {
                    let w = BoxIv::from_offsets(pose_j, wo);
                    acc = acc.meet(boxes_disjoint(&v, &w));
                    if acc.is_false() {
                        return Tribool::False;
                    }
                }
            }
            acc
        }))
    }

    fn eval_prior(
        &self,
        kind: PriorKind,
        i: usize,
        s: &LayoutState,
        cache: &[ObjCase],
    ) -> Tribool {
        let tol = self.ctx.tol;
        let zero = Interval::point(0.0);
        match kind {
            PriorKind::OnWall => {
                let x = s.var(i, AXIS_X);
                let y = s.var(i, AXIS_Y);
                x.eq_tol(zero, tol).join(y.eq_tol(zero, tol))
            }
            PriorKind::OnGround => s.var(i, AXIS_Z).eq_tol(zero, 0.0),
            PriorKind::AgainstWall => Tribool::consensus(cache[i].boxes.iter().map(|(k, b)| {
                match k.index() {
                    0 => b.lo[0].eq_tol(zero, tol),
                    1 => b.lo[1].eq_tol(zero, tol),
                    _ => Tribool::False,
                }
            })),
            PriorKind::InsideWalls => {
                let h = cache[i].hull();
                ge_const(h.lo[0], 0.0).meet(ge_const(h.lo[1], 0.0))
            }
        }
    }
}

struct ObjCase {
    pose: [Interval; 3],
    boxes: Vec<(Orient, BoxIv)>,
    support: Interval,
}

impl ObjCase {
    fn hull(&self) -> BoxIv {
        self.boxes
            .iter()
            .map(|(_, b)| *b)
            .reduce(|a, b| a.hull(&b))
            .expect("object admits at least one orientation")
    }
}

fn ge_const(iv: Interval, c: f64) -> Tribool {
    Interval::point(c).le(iv)
}

fn orientation_equality(a: &ObjCase, b: &ObjCase) -> Tribool {
    let da: Vec<Orient> = a.boxes.iter().map(|(k, _)| *k).collect();
    let db: Vec<Orient> = b.boxes.iter().map(|(k, _)| *k).collect();
    if da.len() == 1 && db.len() == 1 {
        return Tribool::from_bool(da[0] == db[0]);
    }
    if da.iter().any(|k| db.contains(k)) {
        Tribool::Maybe
    } else {
        Tribool::False
    }
}

/// Closed-box overlap along one axis as a tribool.
fn axis_overlap(a_lo: Interval, a_hi: Interval, b_lo: Interval, b_hi: Interval) -> Tribool {
    a_lo.le(b_hi).meet(b_lo.le(a_hi))
}

/// Interior disjointness: separated (touching allowed) along some axis.
fn boxes_disjoint(a: &BoxIv, b: &BoxIv) -> Tribool {
    let mut acc = Tribool::False;
    for axis in 0..3 {
        let sep = a.hi[axis].le(b.lo[axis]).join(b.hi[axis].le(a.lo[axis]));
        acc = acc.join(sep);
        if acc.is_true() {
            return Tribool::True;
        }
    }
    acc
}

/// Box intersection test with `b` inflated by `dist` on every axis (the
/// reduced form of the `p - d*e_theta, q + d*e_theta` cuboid enlargement
/// for axis-aligned orientations).
fn near_within(a: &BoxIv, b: &BoxIv, dist: f64) -> Tribool {
    let mut acc = Tribool::True;
    for axis in 0..3 {
        let o = axis_overlap(
            a.lo[axis],
            a.hi[axis],
            b.lo[axis].shift(-dist),
            b.hi[axis].shift(dist),
        );
        acc = acc.meet(o);
        if acc.is_false() {
            return Tribool::False;
        }
    }
    acc
}

/// Target center inside the reference footprint (xy).
fn center_in_xy(t: &BoxIv, r: &BoxIv) -> Tribool {
    let mut acc = Tribool::True;
    for axis in 0..2 {
        let c = t.center(axis);
        acc = acc.meet(r.lo[axis].le(c)).meet(c.le(r.hi[axis]));
    }
    acc
}

/// Extremal interval projections of a box along a signed axis direction.
fn max_proj(b: &BoxIv, dir: [f64; 2]) -> Interval {
    match (dir[0] as i32, dir[1] as i32) {
        (1, 0) => b.hi[0],
        (-1, 0) => b.lo[0].scale_shift(-1.0, 0.0),
        (0, 1) => b.hi[1],
        _ => b.lo[1].scale_shift(-1.0, 0.0),
    }
}

fn min_proj(b: &BoxIv, dir: [f64; 2]) -> Interval {
    match (dir[0] as i32, dir[1] as i32) {
        (1, 0) => b.lo[0],
        (-1, 0) => b.hi[0].scale_shift(-1.0, 0.0),
        (0, 1) => b.lo[1],
        _ => b.hi[1].scale_shift(-1.0, 0.0),
    }
}

/// Evaluates one atomic relation on prepared operands.
pub fn eval_atomic(
    rel: AtomicRelation,
    target: &OperandGeom,
    reference: &OperandGeom,
    ctx: &EvalContext,
) -> Tribool {
    let th = &ctx.thresholds;
    match rel {
        AtomicRelation::Near => near_within(&target.hull(), &reference.hull(), th.d_near),
        AtomicRelation::On => {
            // resting contact is an exact equality; the shrinkage bounds pin
            // the two z variables together so it stays decidable
            let t = target.hull();
            let r = reference.hull();
            t.lo[2]
                .eq_tol(reference.support, 0.0)
                .meet(center_in_xy(&t, &r))
        }
        AtomicRelation::Above => {
            let t = target.hull();
            let r = reference.hull();
            r.hi[2]
                .shift(th.d_min_above)
                .le(t.lo[2])
                .meet(t.lo[2].le(r.hi[2].shift(th.d_max_above)))
                .meet(center_in_xy(&t, &r))
        }
        AtomicRelation::Under => {
            let t = target.hull();
            let r = reference.hull();
            let xy = axis_overlap(t.lo[0], t.hi[0], r.lo[0], r.hi[0])
                .meet(axis_overlap(t.lo[1], t.hi[1], r.lo[1], r.hi[1]));
            target.support.lt(reference.support).meet(xy)
        }
        AtomicRelation::Behind | AtomicRelation::Front
        | AtomicRelation::OnLeft | AtomicRelation::OnRight => {
            let t = target.hull();
            Tribool::consensus(reference.cases.iter().map(|(k, r)| {
                let dir = match rel {
                    AtomicRelation::Behind | AtomicRelation::Front => k.facing(),
                    _ => k.right_axis(),
                };
                match rel {
                    // max(u' O1) <= min(u' O2)
                    AtomicRelation::Behind | AtomicRelation::OnRight => {
                        max_proj(&t, dir).le(min_proj(r, dir))
                    }
                    // min(u' O1) >= max(u' O2)
                    _ => max_proj(r, dir).le(min_proj(&t, dir)),
                }
            }))
        }
    }
}

/// Compiles an (expanded) query against the library into a constraint.
pub fn compile(
    query: &Query,
    lib: &ObjectLibrary,
    ctx: EvalContext,
    room: [f64; 3],
) -> Result<CompiledConstraint, CompileError> {
    let q = expand_counts(query)?;

    // object table in first-mention order: triplets, then remaining counts
    let mut order: Vec<ObjectRef> = Vec::new();
    let push_ref = |r: &ObjectRef, order: &mut Vec<ObjectRef>| {
        let base = r.base();
        if base.group_size.is_none() && !order.contains(&base) {
            order.push(base);
        }
    };
    for t in &q.triplets {
        push_ref(&t.target, &mut order);
        if t.reference.group_size.is_none() {
            push_ref(&t.reference, &mut order);
        }
    }
    for r in q.counts.keys() {
        push_ref(r, &mut order);
    }

    let mut objects = Vec::new();
    let mut geoms = Vec::new();
    for r in &order {
        let model = lib
            .get(&r.category)
            .ok_or_else(|| CompileError::UnknownCategory(r.category.clone()))?;
        let attrs = q.attributes_of(r);
        let resolved = model.resolve(attrs);
        let has_attr = |name: &str| attrs.iter().any(|a| a == name);
        let obj = SceneObject {
            name: r.canonical(),
            category: r.category.clone(),
            on_wall: model.on_wall || has_attr("on-wall"),
            against_wall: model.against_wall || has_attr("against-wall"),
            on_ground: model.on_ground || has_attr("on-ground"),
            model: resolved,
        };
        geoms.push(GeomConsts::new(&obj.model));
        objects.push(obj);
    }
    fn index_of(order: &[ObjectRef], r: &ObjectRef) -> usize {
        let base = r.base();
        order.iter().position(|o| *o == base).expect("collected")
    }

    fn group_index(groups: &mut Vec<GroupDef>, order: &[ObjectRef], r: &ObjectRef) -> usize {
        let name = r.canonical();
        if let Some(g) = groups.iter().position(|g| g.name == name) {
            return g;
        }
        let k = r.group_size.expect("group ref");
        let members = (0..k).map(|j| index_of(order, &r.instance(j))).collect();
        groups.push(GroupDef { name, members });
        groups.len() - 1
    }

    fn make_operand(
        lib: &ObjectLibrary,
        groups: &mut Vec<GroupDef>,
        order: &[ObjectRef],
        r: &ObjectRef,
    ) -> Result<Operand, CompileError> {
        let object = if r.group_size.is_some() {
            OperandObject::Group(group_index(groups, order, r))
        } else {
            OperandObject::Object(index_of(order, r))
        };
        if let Some(region) = &r.sub_object {
            let model = lib
                .get(&r.category)
                .ok_or_else(|| CompileError::UnknownCategory(r.category.clone()))?;
            if !model.regions.contains_key(region) {
                return Err(CompileError::UnknownRegion {
                    object: r.canonical(),
                    region: region.clone(),
                });
            }
        }
        Ok(Operand {
            object,
            region: r.sub_object.clone(),
        })
    }

    // virtual groups referenced by triplets
    let mut groups: Vec<GroupDef> = Vec::new();

    // wall propagation: next-to / side-by-side / in-a-row spread the
    // against-wall requirement and force equal orientation
    let mut against: Vec<bool> = objects.iter().map(|o| o.against_wall).collect();
    let prop_edges: Vec<(usize, usize)> = q
        .triplets
        .iter()
        .filter(|t| {
            matches!(
                t.relation,
                Relation::NextTo | Relation::SideBySide | Relation::InARow
            )
        })
        .flat_map(|t| {
            let mut ts = Vec::new();
            let mut rs = Vec::new();
            if let Some(k) = t.target.group_size {
                ts.extend((0..k).map(|j| index_of(&order, &t.target.instance(j))));
            } else {
                ts.push(index_of(&order, &t.target));
            }
            if let Some(k) = t.reference.group_size {
                rs.extend((0..k).map(|j| index_of(&order, &t.reference.instance(j))));
            } else {
                rs.push(index_of(&order, &t.reference));
            }
            let mut edges = Vec::new();
            for &a in &ts {
                for &b in &rs {
                    if a != b {
                        edges.push((a, b));
                    }
                }
            }
            edges
        })
        .collect();
    let mut changed = true;
    let mut same_orientation: Vec<(usize, usize)> = Vec::new();
    while changed {
        changed = false;
        for &(a, b) in &prop_edges {
            if against[a] != against[b] {
                against[a] = true;
                against[b] = true;
                changed = true;
            }
        }
    }
    for &(a, b) in &prop_edges {
        if against[a] && against[b] && !same_orientation.contains(&(a, b)) {
            same_orientation.push((a, b));
        }
    }

    // constraint tree
    let mut nodes: Vec<ConstraintNode> = Vec::new();
    for t in &q.triplets {
        let target = make_operand(lib, &mut groups, &order, &t.target)?;
        let reference = make_operand(lib, &mut groups, &order, &t.reference)?;
        let atomic = |relation: AtomicRelation| ConstraintNode::Atomic {
            relation,
            target: target.clone(),
            reference: reference.clone(),
        };
        let node = match t.relation {
            Relation::Near => atomic(AtomicRelation::Near),
            Relation::On => atomic(AtomicRelation::On),
            Relation::Above => atomic(AtomicRelation::Above),
            Relation::Under => atomic(AtomicRelation::Under),
            Relation::Behind => atomic(AtomicRelation::Behind),
            Relation::Front => atomic(AtomicRelation::Front),
            Relation::Left => atomic(AtomicRelation::OnLeft),
            Relation::Right => atomic(AtomicRelation::OnRight),
            Relation::NextTo => ConstraintNode::Or(vec![
                atomic(AtomicRelation::OnLeft),
                atomic(AtomicRelation::OnRight),
            ]),
            Relation::SideBySide | Relation::InARow => {
                let (OperandObject::Object(a), OperandObject::Object(b)) =
                    (target.object, reference.object)
                else {
                    return Err(CompileError::Validation(ValidationError(format!(
                        "`{}` requires concrete objects",
                        t.relation
                    ))));
                };
                let second = if t.relation == Relation::SideBySide {
                    atomic(AtomicRelation::Near)
                } else {
                    atomic(AtomicRelation::OnRight)
                };
                ConstraintNode::And(vec![ConstraintNode::SameOrientation(a, b), second])
            }
        };
        nodes.push(node);
        nodes.push(ConstraintNode::Coherent { target, reference });
    }
    for &(a, b) in &same_orientation {
        nodes.push(ConstraintNode::SameOrientation(a, b));
    }
    for (i, obj) in objects.iter().enumerate() {
        if obj.on_wall {
            nodes.push(ConstraintNode::Prior {
                kind: PriorKind::OnWall,
                object: i,
            });
        }
        if against[i] {
            nodes.push(ConstraintNode::Prior {
                kind: PriorKind::AgainstWall,
                object: i,
            });
        }
        if obj.on_ground {
            nodes.push(ConstraintNode::Prior {
                kind: PriorKind::OnGround,
                object: i,
            });
        }
        nodes.push(ConstraintNode::Prior {
            kind: PriorKind::InsideWalls,
            object: i,
        });
    }
    nodes.push(ConstraintNode::Exclusive);

    let init_d: Vec<Interval> = (0..objects.len())
        .map(|i| {
            if against[i] {
                wall_orientations()
            } else {
                full_orientation()
            }
        })
        .collect();
    let init_z: Vec<Interval> = objects
        .iter()
        .map(|o| {
            if o.on_ground {
                Interval::point(0.0)
            } else {
                Interval::new(0.0, room[2])
            }
        })
        .collect();

    Ok(CompiledConstraint {
        scene: Scene {
            objects,
            groups,
            room,
        },
        root: ConstraintNode::And(nodes),
        ctx,
        init_d,
        init_z,
        geoms,
    })
}

/// Extracts pairwise coordinate-difference bounds from the compiled
/// constraint for the interval-shrinkage matrices.
///
/// Extraction table (worst-cased over each object's initial orientation
/// domain; `lo/hi` are rotated box offsets, `mid` the box center offset):
/// - `on`: `z_t - z_r` in `[zs_r - tol, zs_r + tol]`; centroid-in-footprint
///   bounds for x and y.
/// - `above`: `z_t - z_r` in `[zhi_r + d_min, zhi_r + d_max]`; centroid
///   bounds for x and y.
/// - `under`: `z_t - z_r <= zs_r - zs_t`; xy-overlap bounds.
/// - `near` and the coherence prior: per-axis overlap bounds inflated by
///   the distance.
/// - `behind`/`front`/`on-left`/`on-right`: one-sided x or y bound when the
///   reference orientation domain is a single direction.
/// Disjunctions contribute nothing; group operands are skipped.
pub fn init_bounds(c: &CompiledConstraint) -> BoundMatrices {
    let n = c.scene.len();
    let mut b = BoundMatrices::unconstrained(n, c.scene.room);
    collect_bounds(c, &c.root, &mut b);
    b
}

fn collect_bounds(c: &CompiledConstraint, node: &ConstraintNode, b: &mut BoundMatrices) {
    match node {
        ConstraintNode::And(children) => {
            for child in children {
                collect_bounds(c, child, b);
            }
        }
        ConstraintNode::Atomic {
            relation,
            target,
            reference,
        } => {
            if let (Some(t), Some(r)) = (concrete(target), concrete(reference)) {
                atomic_bounds(c, *relation, t, target, r, reference, b);
            }
        }
        ConstraintNode::Coherent { target, reference } => {
            if let (Some(t), Some(r)) = (concrete(target), concrete(reference)) {
                overlap_bounds(c, t, target, r, reference, c.ctx.coherence_distance, true, b);
            }
        }
        // Or-subtrees, priors, exclusivity and orientation equality carry
        // no unconditional difference bounds
        _ => {}
    }
}

fn concrete(op: &Operand) -> Option<usize> {
    match op.object {
        OperandObject::Object(i) => Some(i),
        OperandObject::Group(_) => None,
    }
}

/// Offset constants of an operand box along an axis, ranged over the
/// object's initial orientation domain. Universal bounds need both the
/// loosest and the tightest value of each offset.
#[derive(Clone, Copy, Debug)]
struct OffsetRange {
    lo_min: f64,
    lo_max: f64,
    hi_min: f64,
    hi_max: f64,
    mid_min: f64,
    mid_max: f64,
}

fn offset_range(c: &CompiledConstraint, i: usize, op: &Operand, axis: usize) -> OffsetRange {
    let geoms = &c.geoms[i];
    let orients = crate::scene::orientations_in(&c.init_d[i]);
    let mut r = OffsetRange {
        lo_min: f64::MAX,
        lo_max: f64::MIN,
        hi_min: f64::MAX,
        hi_max: f64::MIN,
        mid_min: f64::MAX,
        mid_max: f64::MIN,
    };
    for k in orients {
        let off = match &op.region {
            None => &geoms.full[k.index()],
            Some(name) => &geoms.regions[name][k.index()],
        };
        let (lo, hi) = (off.0[axis], off.1[axis]);
        let mid = 0.5 * (lo + hi);
        r.lo_min = r.lo_min.min(lo);
        r.lo_max = r.lo_max.max(lo);
        r.hi_min = r.hi_min.min(hi);
        r.hi_max = r.hi_max.max(hi);
        r.mid_min = r.mid_min.min(mid);
        r.mid_max = r.mid_max.max(mid);
    }
    r
}

/// Per-axis overlap bounds: boxes (reference inflated by `dist`) intersect,
/// so `t - r >= min(rlo) - max(thi) - dist` and
/// `t - r <= max(rhi) - min(tlo) + dist`. `include_z` covers the uniform
/// z-inflation of the near relation.
#[allow(clippy::too_many_arguments)]
fn overlap_bounds(
    c: &CompiledConstraint,
    t: usize,
    top: &Operand,
    r: usize,
    rop: &Operand,
    dist: f64,
    include_z: bool,
    b: &mut BoundMatrices,
) {
    if t == r {
        return;
    }
    let axes = if include_z { 0..3 } else { 0..2 };
    for axis in axes {
        let to = offset_range(c, t, top, axis);
        let ro = offset_range(c, r, rop, axis);
        b.tighten_lower(axis, t, r, ro.lo_min - to.hi_max - dist);
        b.tighten_upper(axis, t, r, ro.hi_max - to.lo_min + dist);
    }
}

/// Centroid-in-footprint bounds for x and y: `t_mid` inside `[r_lo, r_hi]`.
fn centroid_bounds(
    c: &CompiledConstraint,
    t: usize,
    top: &Operand,
    r: usize,
    rop: &Operand,
    b: &mut BoundMatrices,
) {
    if t == r {
        return;
    }
    for axis in 0..2 {
        let to = offset_range(c, t, top, axis);
        let ro = offset_range(c, r, rop, axis);
        b.tighten_lower(axis, t, r, ro.lo_min - to.mid_max);
        b.tighten_upper(axis, t, r, ro.hi_max - to.mid_min);
    }
}

fn atomic_bounds(
    c: &CompiledConstraint,
    rel: AtomicRelation,
    t: usize,
    top: &Operand,
    r: usize,
    rop: &Operand,
    b: &mut BoundMatrices,
) {
    if t == r {
        return;
    }
    let th = &c.ctx.thresholds;
    match rel {
        AtomicRelation::On => {
            // exact support equality: z_t - z_r = z_s
            let zs_r = c.geoms[r].support;
            b.tighten_lower(AXIS_Z, t, r, zs_r);
            b.tighten_upper(AXIS_Z, t, r, zs_r);
            centroid_bounds(c, t, top, r, rop, b);
        }
        AtomicRelation::Above => {
            // z offsets are rotation-invariant, so the range is exact
            let zhi_r = offset_range(c, r, rop, AXIS_Z).hi_max;
            b.tighten_lower(AXIS_Z, t, r, zhi_r + th.d_min_above);
            b.tighten_upper(AXIS_Z, t, r, zhi_r + th.d_max_above);
            centroid_bounds(c, t, top, r, rop, b);
        }
        AtomicRelation::Under => {
            b.tighten_upper(AXIS_Z, t, r, c.geoms[r].support - c.geoms[t].support);
            overlap_bounds(c, t, top, r, rop, 0.0, false, b);
        }
        AtomicRelation::Near => {
            overlap_bounds(c, t, top, r, rop, th.d_near, true, b);
        }
        AtomicRelation::Behind | AtomicRelation::Front
        | AtomicRelation::OnLeft | AtomicRelation::OnRight => {
            let r_orients = crate::scene::orientations_in(&c.init_d[r]);
            if r_orients.len() != 1 {
                return;
            }
            let k2 = r_orients[0];
            let dir = match rel {
                AtomicRelation::Behind | AtomicRelation::Front => k2.facing(),
                _ => k2.right_axis(),
            };
            let axis = if dir[0] != 0.0 { AXIS_X } else { AXIS_Y };
            let sign = dir[axis];
            let to = offset_range(c, t, top, axis);
            let ro = offset_range(c, r, rop, axis);
            // max-proj(lesser) <= min-proj(greater) along dir, worst-cased
            // over the target's admitted orientations
            let target_is_lesser =
                matches!(rel, AtomicRelation::Behind | AtomicRelation::OnRight);
            if (sign > 0.0) == target_is_lesser {
                // t + thi(k_t) <= r + rlo  (or its mirrored negative-sign form)
                b.tighten_upper(axis, t, r, ro.lo_min - to.hi_min);
            } else {
                // r + rhi <= t + tlo(k_t)
                b.tighten_lower(axis, t, r, ro.hi_max - to.lo_max);
            }
        }
    }
}
