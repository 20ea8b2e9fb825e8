//! Branch-and-prune interval search over layout states.
//!
//! A layout state holds four intervals per object (x, y, z, d). The solver
//! pops candidate states from a randomized queue, optionally shrinks them
//! against precomputed pairwise difference-bound matrices, evaluates the
//! constraint to a tribool and either accepts, prunes, or splits along the
//! dimension with the largest uncertainty. The orientation dimension is
//! branched over the four discrete directions rather than bisected; an
//! unresolved orientation counts as width `2*tol` when choosing the split
//! dimension so it is resolved early.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interval::{Interval, Tribool};
use crate::scene::{orient_hull, orientations_in, ConcretePose, Orient, Pose};

/// Interval box over all object poses: `4n` intervals, ordered
/// `x_0, y_0, z_0, d_0, x_1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutState {
    vars: Vec<Interval>,
}

pub const AXIS_X: usize = 0;
pub const AXIS_Y: usize = 1;
pub const AXIS_Z: usize = 2;
pub const AXIS_D: usize = 3;

impl LayoutState {
    pub fn new(vars: Vec<Interval>) -> LayoutState {
        assert!(vars.len() % 4 == 0);
        LayoutState { vars }
    }

    pub fn object_count(&self) -> usize {
        self.vars.len() / 4
    }

    pub fn var(&self, object: usize, axis: usize) -> Interval {
        self.vars[object * 4 + axis]
    }

    pub fn set_var(&mut self, object: usize, axis: usize, value: Interval) {
        self.vars[object * 4 + axis] = value;
    }

    pub fn pose(&self, object: usize) -> Pose {
        Pose {
            x: self.var(object, AXIS_X),
            y: self.var(object, AXIS_Y),
            z: self.var(object, AXIS_Z),
            d: self.var(object, AXIS_D),
        }
    }

    pub fn vars(&self) -> &[Interval] {
        &self.vars
    }

    /// Discrete orientations still admitted for an object.
    pub fn orientations(&self, object: usize) -> Vec<Orient> {
        orientations_in(&self.var(object, AXIS_D))
    }

    /// Width used for split selection: interval width for positions, and
    /// `2*tol` for an orientation admitting more than one direction.
    fn effective_width(&self, flat: usize, tol: f64) -> f64 {
        if flat % 4 == AXIS_D {
            if orientations_in(&self.vars[flat]).len() > 1 {
                2.0 * tol
            } else {
                0.0
            }
        } else {
            self.vars[flat].width()
        }
    }

    /// Splits dimension `flat` into two children covering the parent
    /// exactly. Orientation dimensions split their discrete direction set.
    fn split(&self, flat: usize) -> (LayoutState, LayoutState) {
        let mut a = self.clone();
        let mut b = self.clone();
        if flat % 4 == AXIS_D {
            let orients = orientations_in(&self.vars[flat]);
            debug_assert!(orients.len() > 1);
            let mid = orients.len().div_ceil(2);
            a.vars[flat] = orient_hull(&orients[..mid]);
            b.vars[flat] = orient_hull(&orients[mid..]);
        } else {
            let (lo, hi) = self.vars[flat].split();
            a.vars[flat] = lo;
            b.vars[flat] = hi;
        }
        (a, b)
    }

    /// Midpoint sample; orientations pick a uniformly random admitted
    /// direction.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<ConcretePose> {
        (0..self.object_count())
            .map(|i| {
                let orients = self.orientations(i);
                let o = orients[rng.gen_range(0..orients.len())];
                ConcretePose {
                    x: self.var(i, AXIS_X).midpoint(),
                    y: self.var(i, AXIS_Y).midpoint(),
                    z: self.var(i, AXIS_Z).midpoint(),
                    orient: o.index(),
                }
            })
            .collect()
    }

    pub fn from_poses(poses: &[ConcretePose]) -> LayoutState {
        let mut vars = Vec::with_capacity(poses.len() * 4);
        for p in poses {
            vars.push(Interval::point(p.x));
            vars.push(Interval::point(p.y));
            vars.push(Interval::point(p.z));
            vars.push(Interval::point(p.orientation().radians()));
        }
        LayoutState::new(vars)
    }
}

/// Pairwise coordinate-difference bounds `L[i,j] <= c_i - c_j <= U[i,j]`
/// per axis, closed under transitive composition.
#[derive(Clone, Debug)]
pub struct BoundMatrices {
    n: usize,
    upper: [Vec<f64>; 3],
}

impl BoundMatrices {
    /// Unconstrained bounds: every difference within +-room extent.
    pub fn unconstrained(n: usize, room: [f64; 3]) -> BoundMatrices {
        let mut upper = [
            vec![0.0; n * n],
            vec![0.0; n * n],
            vec![0.0; n * n],
        ];
        for (axis, m) in upper.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] = if i == j { 0.0 } else { room[axis] };
                }
            }
        }
        BoundMatrices { n, upper }
    }

    pub fn object_count(&self) -> usize {
        self.n
    }

    pub fn upper(&self, axis: usize, i: usize, j: usize) -> f64 {
        self.upper[axis][i * self.n + j]
    }

    /// `L[i,j] = -U[j,i]` by antisymmetry.
    pub fn lower(&self, axis: usize, i: usize, j: usize) -> f64 {
        -self.upper(axis, j, i)
    }

    /// Records `c_i - c_j <= value` (and by antisymmetry
    /// `c_j - c_i >= -value`), keeping the tighter of old and new.
    pub fn tighten_upper(&mut self, axis: usize, i: usize, j: usize, value: f64) {
        debug_assert!(i != j);
        let m = &mut self.upper[axis];
        let cell = &mut m[i * self.n + j];
        if value < *cell {
            *cell = value;
        }
    }

    /// Records `c_i - c_j >= value`.
    pub fn tighten_lower(&mut self, axis: usize, i: usize, j: usize, value: f64) {
        self.tighten_upper(axis, j, i, -value);
    }

    /// Bound interval on `c_i - c_j`.
    pub fn difference(&self, axis: usize, i: usize, j: usize) -> Interval {
        Interval::new(self.lower(axis, i, j), self.upper(axis, i, j))
    }
}

/// Transitive closure of the difference bounds to a fixed point:
/// `U[i,j] <- min(U[i,j], U[i,k] + U[k,j])` (and the mirrored rule for the
/// lower bounds via antisymmetry). Returns `None` when the bounds admit no
/// point (`L > U` somewhere).
pub fn close_bounds(b: &BoundMatrices) -> Option<BoundMatrices> {
    let n = b.n;
    let mut out = b.clone();
    for m in out.upper.iter_mut() {
        for k in 0..n {
            for i in 0..n {
                let uik = m[i * n + k];
                for j in 0..n {
                    let cand = uik + m[k * n + j];
                    let cell = &mut m[i * n + j];
                    if cand < *cell {
                        *cell = cand;
                    }
                }
            }
        }
        for i in 0..n {
            if m[i * n + i] < 0.0 {
                return None;
            }
            for j in 0..n {
                // U[i,j] < L[i,j] means an empty difference interval
                if m[i * n + j] + m[j * n + i] < 0.0 {
                    return None;
                }
            }
        }
    }
    Some(out)
}

/// Intersects every coordinate interval with all partner-implied intervals:
/// `x_i <- x_i /\ (x_j + [L[i,j], U[i,j]])` for all `j`. Returns `None`
/// when some intersection is empty.
pub fn shrink(s: &LayoutState, b: &BoundMatrices) -> Option<LayoutState> {
    let n = s.object_count();
    debug_assert_eq!(n, b.n);
    let mut out = s.clone();
    for axis in 0..3 {
        for i in 0..n {
            let mut iv = s.var(i, axis);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let implied = s.var(j, axis).add(b.difference(axis, i, j));
                iv = iv.intersect(implied)?;
            }
            out.set_var(i, axis, iv);
        }
    }
    Some(out)
}

/// Solver parameters; defaults mirror the reference configuration
/// (tolerance 0.2 m, 5 solutions).
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stop splitting a dimension once its width is at or below this (meters).
    pub tol: f64,
    /// Target solution count for early stopping.
    pub target_solutions: usize,
    /// Node expansion budget.
    pub max_expansions: u64,
    pub seed: u64,
    pub shrinkage: bool,
    /// When false the search runs to queue exhaustion regardless of
    /// `target_solutions`.
    pub early_stop: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 0.2,
            target_solutions: 5,
            max_expansions: 1_000_000,
            seed: 0,
            shrinkage: true,
            early_stop: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    /// Found the requested number of solutions and stopped.
    EarlyStopped,
    /// The candidate queue ran dry; the returned solutions are everything
    /// there is at this tolerance. With zero solutions this proves
    /// infeasibility.
    Exhausted,
    /// The expansion budget ran out first.
    BudgetExhausted,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct SolveStats {
    pub expansions: u64,
    pub eval_prunes: u64,
    pub shrink_prunes: u64,
    pub dropped_at_tol: u64,
    pub solutions: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub solutions: Vec<LayoutState>,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

impl SolveOutcome {
    pub fn proven_infeasible(&self) -> bool {
        self.status == SolveStatus::Exhausted && self.solutions.is_empty()
    }
}

/// Runs the branch-and-prune search.
///
/// Every returned state evaluates to True under `eval`. The queue is kept
/// in randomized order by swapping each newly appended element with a
/// uniformly random one (seeded), which makes early stopping sample the
/// feasible set rather than enumerate one corner of it.
pub fn solve<F>(
    eval: F,
    init: LayoutState,
    bounds: Option<&BoundMatrices>,
    cfg: &SolverConfig,
) -> SolveOutcome
where
    F: Fn(&LayoutState) -> Tribool,
{
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut queue: VecDeque<LayoutState> = VecDeque::new();
    let push = |queue: &mut VecDeque<LayoutState>, rng: &mut ChaCha8Rng, s: LayoutState| {
        queue.push_back(s);
        let last = queue.len() - 1;
        let pick = rng.gen_range(0..queue.len());
        queue.swap(pick, last);
    };
    queue.push_back(init);

    let mut solutions = Vec::new();
    let mut stats = SolveStats {
        expansions: 0,
        eval_prunes: 0,
        shrink_prunes: 0,
        dropped_at_tol: 0,
        solutions: 0,
        elapsed: Duration::ZERO,
    };
    let dims = |s: &LayoutState| s.object_count() * 4;

    let status = loop {
        let Some(state) = queue.pop_front() else {
            break SolveStatus::Exhausted;
        };
        if stats.expansions >= cfg.max_expansions {
            break SolveStatus::BudgetExhausted;
        }
        stats.expansions += 1;

        let state = if cfg.shrinkage {
            match bounds.map_or(Some(state.clone()), |b| shrink(&state, b)) {
                Some(s) => s,
                None => {
                    stats.shrink_prunes += 1;
                    continue;
                }
            }
        } else {
            state
        };

        match eval(&state) {
            Tribool::True => {
                solutions.push(state);
                if cfg.early_stop && solutions.len() >= cfg.target_solutions {
                    break SolveStatus::EarlyStopped;
                }
            }
            Tribool::False => {
                stats.eval_prunes += 1;
            }
            Tribool::Maybe => {
                let (best, width) = (0..dims(&state))
                    .map(|k| (k, state.effective_width(k, cfg.tol)))
                    .fold((0, f64::MIN), |acc, (k, w)| if w > acc.1 { (k, w) } else { acc });
                if width > cfg.tol {
                    let (a, b) = state.split(best);
                    push(&mut queue, &mut rng, a);
                    push(&mut queue, &mut rng, b);
                } else {
                    stats.dropped_at_tol += 1;
                }
            }
        }
    };

    stats.solutions = solutions.len();
    stats.elapsed = start.elapsed();
    SolveOutcome {
        solutions,
        status,
        stats,
    }
}
