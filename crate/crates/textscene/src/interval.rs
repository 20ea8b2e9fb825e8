//! Closed-interval arithmetic and three-valued logic.
//!
//! Every solver variable is a closed interval `[lo, hi]`; constraint
//! evaluation maps interval boxes to a [`Tribool`] (the logical intervals
//! `[0,0]`, `[0,1]`, `[1,1]`). Only the operations the layout constraints
//! need are provided: addition, subtraction, affine `k*x + c`, comparison,
//! tolerance equality, intersection and midpoint splitting. There is no
//! general multiplication; with axis-aligned orientations the corner
//! formulas only ever scale by -1, 0 or 1, so everything here is exact in
//! the absence of rounding error.

use std::fmt;

/// Closed real interval `[lo, hi]` with `lo <= hi`.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Interval {
    /// Builds `[lo, hi]`. Panics if `lo > hi` or either bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    /// Degenerate interval `[x, x]`.
    pub fn point(x: f64) -> Self {
        Interval::new(x, x)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// `[l1+l2, u1+u2]`.
    pub fn add(&self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }

    /// `[l1-u2, u1-l2]`.
    pub fn sub(&self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }

    /// Exact image `{k*x + c : x in self}`; endpoints swap when `k < 0`.
    pub fn scale_shift(&self, k: f64, c: f64) -> Interval {
        let a = k * self.lo + c;
        let b = k * self.hi + c;
        if k >= 0.0 {
            Interval::new(a, b)
        } else {
            Interval::new(b, a)
        }
    }

    /// Shift by a constant.
    pub fn shift(&self, c: f64) -> Interval {
        Interval::new(self.lo + c, self.hi + c)
    }

    /// Interval comparison `self < rhs`.
    ///
    /// `[0,0]` when `u2 <= l1` (no point pair satisfies it), `[1,1]` when
    /// `u1 < l2` (every point pair does), `[0,1]` otherwise. Touching
    /// intervals therefore compare as False or Maybe, never True.
    pub fn lt(&self, rhs: Interval) -> Tribool {
        if rhs.hi <= self.lo {
            Tribool::False
        } else if self.hi < rhs.lo {
            Tribool::True
        } else {
            Tribool::Maybe
        }
    }

    /// Interval comparison `self <= rhs`; the negation of `rhs < self`.
    pub fn le(&self, rhs: Interval) -> Tribool {
        rhs.lt(*self).negate()
    }

    /// `|x - y| <= eps` lifted to intervals.
    ///
    /// True when the farthest point pair is within `eps`, False when even
    /// the closest pair exceeds it, Maybe otherwise.
    pub fn eq_tol(&self, rhs: Interval, eps: f64) -> Tribool {
        debug_assert!(eps >= 0.0);
        let min_dist = (self.lo - rhs.hi).max(rhs.lo - self.hi).max(0.0);
        let max_dist = (self.hi - rhs.lo).max(rhs.hi - self.lo);
        if min_dist > eps {
            Tribool::False
        } else if max_dist <= eps {
            Tribool::True
        } else {
            Tribool::Maybe
        }
    }

    /// Overlap with `rhs`, or `None` when disjoint.
    pub fn intersect(&self, rhs: Interval) -> Option<Interval> {
        let lo = self.lo.max(rhs.lo);
        let hi = self.hi.min(rhs.hi);
        if lo <= hi {
            Some(Interval::new(lo, hi))
        } else {
            None
        }
    }

    /// Smallest interval covering both.
    pub fn hull(&self, rhs: Interval) -> Interval {
        Interval::new(self.lo.min(rhs.lo), self.hi.max(rhs.hi))
    }

    /// Exact enclosure of `min(x, y)` over independent interval variables.
    pub fn min_with(&self, rhs: Interval) -> Interval {
        Interval::new(self.lo.min(rhs.lo), self.hi.min(rhs.hi))
    }

    /// Exact enclosure of `max(x, y)`.
    pub fn max_with(&self, rhs: Interval) -> Interval {
        Interval::new(self.lo.max(rhs.lo), self.hi.max(rhs.hi))
    }

    /// Halves at the midpoint; the two parts cover `self` exactly.
    pub fn split(&self) -> (Interval, Interval) {
        let m = self.midpoint();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }
}

/// Three-valued constraint outcome with its logical-interval encoding.
#[derive(Clone, Copy, PartialEq, Eq, Debug, PartialOrd, Ord)]
pub enum Tribool {
    False,
    Maybe,
    True,
}

impl Tribool {
    pub fn from_bool(b: bool) -> Tribool {
        if b {
            Tribool::True
        } else {
            Tribool::False
        }
    }

    /// Logical-interval encoding: `[0,0]`, `[0,1]` or `[1,1]`.
    pub fn encode(&self) -> (u8, u8) {
        match self {
            Tribool::False => (0, 0),
            Tribool::Maybe => (0, 1),
            Tribool::True => (1, 1),
        }
    }

    pub fn decode(lo: u8, hi: u8) -> Option<Tribool> {
        match (lo, hi) {
            (0, 0) => Some(Tribool::False),
            (0, 1) => Some(Tribool::Maybe),
            (1, 1) => Some(Tribool::True),
            _ => None,
        }
    }

    /// Strong-Kleene conjunction: minimum under False < Maybe < True.
    pub fn meet(&self, rhs: Tribool) -> Tribool {
        (*self).min(rhs)
    }

    /// Strong-Kleene disjunction: maximum.
    pub fn join(&self, rhs: Tribool) -> Tribool {
        (*self).max(rhs)
    }

    /// Swaps False and True, fixes Maybe.
    pub fn negate(&self) -> Tribool {
        match self {
            Tribool::False => Tribool::True,
            Tribool::Maybe => Tribool::Maybe,
            Tribool::True => Tribool::False,
        }
    }

    pub fn is_true(&self) -> bool {
        *self == Tribool::True
    }

    pub fn is_false(&self) -> bool {
        *self == Tribool::False
    }

    /// Combines outcomes of mutually exclusive cases (e.g. the discrete
    /// orientations a box still admits): agreement keeps the value, any
    /// disagreement is Maybe.
    pub fn consensus(cases: impl IntoIterator<Item = Tribool>) -> Tribool {
        let mut acc: Option<Tribool> = None;
        for t in cases {
            acc = match acc {
                None => Some(t),
                Some(prev) if prev == t => Some(prev),
                Some(_) => return Tribool::Maybe,
            };
        }
        acc.unwrap_or(Tribool::Maybe)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_interval(rng: &mut ChaCha8Rng) -> Interval {
        let a: f64 = rng.gen_range(-10.0..10.0);
        let b: f64 = rng.gen_range(-10.0..10.0);
        Interval::new(a.min(b), a.max(b))
    }

    fn sample(rng: &mut ChaCha8Rng, iv: Interval) -> f64 {
        if iv.is_degenerate() {
            iv.lo()
        } else {
            rng.gen_range(iv.lo()..=iv.hi())
        }
    }

    #[test]
    fn add_examples() {
        assert_eq!(
            Interval::new(1.0, 2.0).add(Interval::new(3.0, 4.0)),
            Interval::new(4.0, 6.0)
        );
        let a = Interval::new(-3.5, 7.25);
        assert_eq!(Interval::point(0.0).add(a), a);
    }

    #[test]
    fn sub_examples() {
        assert_eq!(
            Interval::new(4.0, 6.0).sub(Interval::new(3.0, 4.0)),
            Interval::new(0.0, 3.0)
        );
        let a = Interval::new(-1.0, 2.0);
        assert_eq!(a.sub(Interval::point(0.0)), a);
    }

    #[test]
    fn scale_shift_examples() {
        assert_eq!(
            Interval::new(1.0, 2.0).scale_shift(-1.0, 0.0),
            Interval::new(-2.0, -1.0)
        );
        assert_eq!(
            Interval::new(1.0, 2.0).scale_shift(1.0, 5.0),
            Interval::new(6.0, 7.0)
        );
    }

    #[test]
    fn lt_boundary_convention() {
        assert_eq!(
            Interval::new(1.0, 2.0).lt(Interval::new(3.0, 4.0)),
            Tribool::True
        );
        assert_eq!(
            Interval::new(3.0, 4.0).lt(Interval::new(1.0, 2.0)),
            Tribool::False
        );
        assert_eq!(
            Interval::new(1.0, 3.0).lt(Interval::new(2.0, 4.0)),
            Tribool::Maybe
        );
        // touching: [1,2] < [2,3] is maybe (u1 = l2), [2,3] < [1,2] is false
        assert_eq!(
            Interval::new(1.0, 2.0).lt(Interval::new(2.0, 3.0)),
            Tribool::Maybe
        );
        assert_eq!(
            Interval::new(2.0, 3.0).lt(Interval::new(1.0, 2.0)),
            Tribool::False
        );
    }

    #[test]
    fn eq_tol_examples() {
        assert_eq!(
            Interval::point(1.0).eq_tol(Interval::point(1.0), 0.0),
            Tribool::True
        );
        assert_eq!(
            Interval::new(0.0, 0.1).eq_tol(Interval::new(5.0, 5.1), 0.05),
            Tribool::False
        );
        assert_eq!(
            Interval::new(0.0, 1.0).eq_tol(Interval::new(0.5, 0.6), 0.05),
            Tribool::Maybe
        );
    }

    #[test]
    fn eq_tol_maybe_has_witnesses() {
        // the Maybe case above must contain both satisfying and violating pairs
        let a = Interval::new(0.0, 1.0);
        let b = Interval::new(0.5, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sat = false;
        let mut unsat = false;
        for _ in 0..1000 {
            let x = sample(&mut rng, a);
            let y = sample(&mut rng, b);
            if (x - y).abs() <= 0.05 {
                sat = true;
            } else {
                unsat = true;
            }
        }
        assert!(sat && unsat);
    }

    #[test]
    fn kleene_tables() {
        use Tribool::*;
        assert_eq!(True.meet(Maybe), Maybe);
        assert_eq!(False.join(True), True);
        assert_eq!(Maybe.negate(), Maybe);
        assert_eq!(False.meet(Maybe), False);
        assert_eq!(Maybe.join(Maybe), Maybe);
        assert_eq!(True.negate(), False);
    }

    #[test]
    fn tribool_encoding_round_trips() {
        for t in [Tribool::False, Tribool::Maybe, Tribool::True] {
            let (lo, hi) = t.encode();
            assert_eq!(Tribool::decode(lo, hi), Some(t));
        }
        assert_eq!(Tribool::decode(1, 0), None);
    }

    #[test]
    fn intersect_and_split() {
        assert_eq!(
            Interval::new(0.0, 2.0).intersect(Interval::new(1.0, 3.0)),
            Some(Interval::new(1.0, 2.0))
        );
        assert_eq!(
            Interval::new(0.0, 1.0).intersect(Interval::new(2.0, 3.0)),
            None
        );
        let (a, b) = Interval::new(0.0, 4.0).split();
        assert_eq!(a, Interval::new(0.0, 2.0));
        assert_eq!(b, Interval::new(2.0, 4.0));
    }

    #[test]
    fn split_halves_cover_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let iv = rand_interval(&mut rng);
            let (a, b) = iv.split();
            assert!((a.width() - b.width()).abs() < 1e-12);
            assert_eq!(a.hull(b), iv);
            assert_eq!(a.hi(), b.lo());
        }
    }

    #[test]
    fn inclusion_by_point_sampling() {
        // for all sampled x in a, y in b: f(x,y) lies in f(a,b)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = rand_interval(&mut rng);
            let b = rand_interval(&mut rng);
            let x = sample(&mut rng, a);
            let y = sample(&mut rng, b);
            assert!(a.add(b).contains(x + y));
            assert!(a.sub(b).contains(x - y));
            let k: f64 = rng.gen_range(-3.0..3.0);
            let c: f64 = rng.gen_range(-3.0..3.0);
            assert!(a.scale_shift(k, c).contains(k * x + c));
        }
    }

    #[test]
    fn monotonicity_under_widening() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let a = rand_interval(&mut rng);
            let b = rand_interval(&mut rng);
            let wide = |iv: Interval, rng: &mut ChaCha8Rng| {
                let dl: f64 = rng.gen_range(0.0..2.0);
                let dh: f64 = rng.gen_range(0.0..2.0);
                Interval::new(iv.lo() - dl, iv.hi() + dh)
            };
            let a2 = wide(a, &mut rng);
            let b2 = wide(b, &mut rng);
            assert!(a2.add(b2).contains_interval(&a.add(b)));
            assert!(a2.sub(b2).contains_interval(&a.sub(b)));
        }
    }

    #[test]
    fn lt_soundness_by_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let a = rand_interval(&mut rng);
            let b = rand_interval(&mut rng);
            let verdict = a.lt(b);
            for _ in 0..20 {
                let x = sample(&mut rng, a);
                let y = sample(&mut rng, b);
                match verdict {
                    Tribool::True => assert!(x < y),
                    Tribool::False => assert!(x >= y),
                    Tribool::Maybe => {}
                }
            }
        }
    }

    #[test]
    fn consensus_combinator() {
        use Tribool::*;
        assert_eq!(Tribool::consensus([True, True]), True);
        assert_eq!(Tribool::consensus([False, False]), False);
        assert_eq!(Tribool::consensus([True, False]), Maybe);
        assert_eq!(Tribool::consensus([True, Maybe]), Maybe);
        assert_eq!(Tribool::consensus([]), Maybe);
    }
}
