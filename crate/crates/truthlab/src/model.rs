//! Domain types for the two-bidder, two-item online-supply model, plus
//! welfare evaluation and the offline optimum.
//!
//! Bidder V bids `(v1, v2)`, bidder W bids `(w1, w2)`. Item 1 always arrives;
//! item 2 arrives only in the `TwoItems` scenario. Bidders are unit-demand:
//! the value of a bundle is the maximum single-item value inside it.

use std::fmt;
use std::str::FromStr;

use crate::rational::Rat;

/// Which bidder, in reports and witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bidder {
    V,
    W,
}

impl Bidder {
    pub fn other(self) -> Bidder {
        match self {
            Bidder::V => Bidder::W,
            Bidder::W => Bidder::V,
        }
    }

    pub const BOTH: [Bidder; 2] = [Bidder::V, Bidder::W];
}

impl fmt::Display for Bidder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bidder::V => write!(f, "V"),
            Bidder::W => write!(f, "W"),
        }
    }
}

/// One of the two item types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Item {
    One,
    Two,
}

/// Which items arrived. Item 1 always arrives; item 2 may not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    OneItem,
    TwoItems,
}

impl Scenario {
    pub const BOTH: [Scenario; 2] = [Scenario::OneItem, Scenario::TwoItems];

    pub fn item2_arrived(self) -> bool {
        matches!(self, Scenario::TwoItems)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::OneItem => write!(f, "one-item"),
            Scenario::TwoItems => write!(f, "two-items"),
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one-item" | "one" | "1" => Ok(Scenario::OneItem),
            "two-items" | "two" | "2" => Ok(Scenario::TwoItems),
            other => Err(format!("unknown scenario `{other}`")),
        }
    }
}

/// A bidder's reported values for the two items. Both nonnegative.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Valuation {
    pub v1: Rat,
    pub v2: Rat,
}

impl Valuation {
    pub fn new(v1: Rat, v2: Rat) -> Self {
        assert!(
            v1.is_nonnegative() && v2.is_nonnegative(),
            "valuations must be nonnegative"
        );
        Valuation { v1, v2 }
    }

    pub fn zero() -> Self {
        Valuation::new(Rat::zero(), Rat::zero())
    }

    pub fn value_of(&self, item: Item) -> &Rat {
        match item {
            Item::One => &self.v1,
            Item::Two => &self.v2,
        }
    }

    /// Highest single-item value, the unit-demand value of the full bundle.
    pub fn max_value(&self) -> Rat {
        self.v1.clone().max(self.v2.clone())
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.v1, self.v2)
    }
}

impl fmt::Debug for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Convenience constructor: `val(3, (1, 2))` is `(3, 1/2)`.
pub fn val<A: crate::rational::IntoRat, B: crate::rational::IntoRat>(v1: A, v2: B) -> Valuation {
    Valuation::new(v1.into_rat(), v2.into_rat())
}

/// The set of items held by one bidder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Bundle {
    pub has_item1: bool,
    pub has_item2: bool,
}

impl Bundle {
    pub const EMPTY: Bundle = Bundle {
        has_item1: false,
        has_item2: false,
    };
    pub const ITEM1: Bundle = Bundle {
        has_item1: true,
        has_item2: false,
    };
    pub const ITEM2: Bundle = Bundle {
        has_item1: false,
        has_item2: true,
    };
    pub const BOTH: Bundle = Bundle {
        has_item1: true,
        has_item2: true,
    };

    pub fn is_empty(self) -> bool {
        !self.has_item1 && !self.has_item2
    }

    pub fn has(self, item: Item) -> bool {
        match item {
            Item::One => self.has_item1,
            Item::Two => self.has_item2,
        }
    }

    pub fn with(self, item: Item) -> Bundle {
        match item {
            Item::One => Bundle {
                has_item1: true,
                ..self
            },
            Item::Two => Bundle {
                has_item2: true,
                ..self
            },
        }
    }

    pub fn overlaps(self, other: Bundle) -> bool {
        (self.has_item1 && other.has_item1) || (self.has_item2 && other.has_item2)
    }

    /// Unit-demand value of the bundle: max value inside, 0 when empty.
    pub fn value(self, valuation: &Valuation) -> Rat {
        let mut best = Rat::zero();
        if self.has_item1 && valuation.v1 > best {
            best = valuation.v1.clone();
        }
        if self.has_item2 && valuation.v2 > best {
            best = valuation.v2.clone();
        }
        best
    }

    /// Compact index 0..=3 used by the search kernels.
    pub fn code(self) -> usize {
        (self.has_item1 as usize) | ((self.has_item2 as usize) << 1)
    }

    pub fn from_code(code: usize) -> Bundle {
        Bundle {
            has_item1: code & 1 != 0,
            has_item2: code & 2 != 0,
        }
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.has_item1, self.has_item2) {
            (false, false) => write!(f, "{{}}"),
            (true, false) => write!(f, "{{1}}"),
            (false, true) => write!(f, "{{2}}"),
            (true, true) => write!(f, "{{1,2}}"),
        }
    }
}

/// A bundle per bidder. Feasible allocations give each item to at most one
/// bidder; items may also go unallocated (free disposal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Allocation {
    pub bundle_v: Bundle,
    pub bundle_w: Bundle,
}

impl Allocation {
    pub const NOTHING: Allocation = Allocation {
        bundle_v: Bundle::EMPTY,
        bundle_w: Bundle::EMPTY,
    };

    /// Checked constructor enforcing item-exclusivity and scenario
    /// availability. Fixture tables that deliberately violate feasibility
    /// are built with the raw struct literal instead.
    pub fn checked(
        bundle_v: Bundle,
        bundle_w: Bundle,
        scenario: Scenario,
    ) -> Result<Allocation, String> {
        let a = Allocation { bundle_v, bundle_w };
        if !a.feasible(scenario) {
            return Err(format!(
                "infeasible allocation V={bundle_v} W={bundle_w} in {scenario}"
            ));
        }
        Ok(a)
    }

    pub fn bundle_of(&self, bidder: Bidder) -> Bundle {
        match bidder {
            Bidder::V => self.bundle_v,
            Bidder::W => self.bundle_w,
        }
    }

    /// Item-exclusive and consistent with which items arrived.
    pub fn feasible(&self, scenario: Scenario) -> bool {
        if self.bundle_v.overlaps(self.bundle_w) {
            return false;
        }
        if !scenario.item2_arrived() && (self.bundle_v.has_item2 || self.bundle_w.has_item2) {
            return false;
        }
        true
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V:{} W:{}", self.bundle_v, self.bundle_w)
    }
}

/// Allocation plus a payment per bidder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub allocation: Allocation,
    pub payment_v: Rat,
    pub payment_w: Rat,
}

impl Outcome {
    pub fn new(allocation: Allocation, payment_v: Rat, payment_w: Rat) -> Self {
        Outcome {
            allocation,
            payment_v,
            payment_w,
        }
    }

    pub fn nothing() -> Self {
        Outcome::new(Allocation::NOTHING, Rat::zero(), Rat::zero())
    }

    pub fn bundle_of(&self, bidder: Bidder) -> Bundle {
        self.allocation.bundle_of(bidder)
    }

    pub fn payment_of(&self, bidder: Bidder) -> &Rat {
        match bidder {
            Bidder::V => &self.payment_v,
            Bidder::W => &self.payment_w,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} pV={} pW={}",
            self.allocation, self.payment_v, self.payment_w
        )
    }
}

/// Total value realized by a feasible allocation: each bidder contributes the
/// unit-demand value of their bundle.
pub fn welfare(a: &Allocation, v: &Valuation, w: &Valuation) -> Rat {
    a.bundle_v.value(v) + a.bundle_w.value(w)
}

/// Welfare of the best feasible allocation with hindsight: the maximum
/// weighted matching between bidders and arrived items.
pub fn offline_opt(v: &Valuation, w: &Valuation, s: Scenario) -> Rat {
    match s {
        Scenario::OneItem => v.v1.clone().max(w.v1.clone()),
        // For nonnegative unit-demand values the optimum is one of the two
        // perfect matchings; the brute-force equivalence is tested.
        Scenario::TwoItems => {
            let cross_v = &v.v1 + &w.v2;
            let cross_w = &w.v1 + &v.v2;
            cross_v.max(cross_w)
        }
    }
}

/// Quasilinear utility of holding `bundle` at `payment`.
pub fn utility(valuation: &Valuation, bundle: Bundle, payment: &Rat) -> Rat {
    bundle.value(valuation) - payment.clone()
}

/// A sorted axis of distinct nonnegative rational values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    values: Vec<Rat>,
}

impl Grid {
    pub fn new(mut values: Vec<Rat>) -> Result<Grid, String> {
        if values.is_empty() {
            return Err("grid must be nonempty".into());
        }
        values.sort();
        for pair in values.windows(2) {
            if pair[0] == pair[1] {
                return Err(format!("duplicate grid value {}", pair[0]));
            }
        }
        if values[0].is_negative() {
            return Err(format!("negative grid value {}", values[0]));
        }
        Ok(Grid { values })
    }

    pub fn from_ints(values: &[i64]) -> Grid {
        Grid::new(values.iter().map(|&n| Rat::from_int(n)).collect()).unwrap()
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> &Rat {
        &self.values[0]
    }

    pub fn max(&self) -> &Rat {
        self.values.last().unwrap()
    }

    pub fn contains(&self, r: &Rat) -> bool {
        self.values.binary_search(r).is_ok()
    }

    /// Union with additional values, dropping duplicates.
    pub fn extended(&self, extra: &[Rat]) -> Grid {
        let mut values = self.values.clone();
        for r in extra {
            if !self.contains(r) {
                values.push(r.clone());
            }
        }
        Grid::new(values).unwrap()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|r| r.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Per-axis grids for the four bid coordinates. Most checks share one grid
/// across all axes; probe constructions override single axes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileSpace {
    pub v1: Grid,
    pub v2: Grid,
    pub w1: Grid,
    pub w2: Grid,
}

impl ProfileSpace {
    /// One grid shared by every coordinate.
    pub fn shared(g: &Grid) -> ProfileSpace {
        ProfileSpace {
            v1: g.clone(),
            v2: g.clone(),
            w1: g.clone(),
            w2: g.clone(),
        }
    }

    pub fn axes_of(&self, bidder: Bidder) -> (&Grid, &Grid) {
        match bidder {
            Bidder::V => (&self.v1, &self.v2),
            Bidder::W => (&self.w1, &self.w2),
        }
    }

    pub fn points_of(&self, bidder: Bidder) -> Vec<Valuation> {
        let (a1, a2) = self.axes_of(bidder);
        let mut out = Vec::with_capacity(a1.len() * a2.len());
        for x1 in a1.values() {
            for x2 in a2.values() {
                out.push(Valuation::new(x1.clone(), x2.clone()));
            }
        }
        out
    }

    pub fn v_points(&self) -> Vec<Valuation> {
        self.points_of(Bidder::V)
    }

    pub fn w_points(&self) -> Vec<Valuation> {
        self.points_of(Bidder::W)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    #[test]
    fn welfare_unit_demand_max() {
        // V holds both items, values (3, 5): unit demand counts only the max.
        let a = Allocation {
            bundle_v: Bundle::BOTH,
            bundle_w: Bundle::EMPTY,
        };
        assert_eq!(welfare(&a, &val(3, 5), &val(4, 2)), rat(5));

        let a = Allocation {
            bundle_v: Bundle::ITEM1,
            bundle_w: Bundle::ITEM2,
        };
        assert_eq!(welfare(&a, &val(3, 5), &val(4, 2)), rat(5)); // 3 + 2

        assert_eq!(
            welfare(&Allocation::NOTHING, &val(3, 5), &val(4, 2)),
            rat(0)
        );
    }

    #[test]
    fn offline_opt_examples() {
        // Enumerated by hand over all feasible assignments: max(3+2, 4+5, ...) = 9.
        assert_eq!(
            offline_opt(&val(3, 5), &val(4, 2), Scenario::TwoItems),
            rat(9)
        );
        assert_eq!(
            offline_opt(&val(0, 0), &val(0, 0), Scenario::OneItem),
            rat(0)
        );
        assert_eq!(
            offline_opt(&val(1, 2), &val(3, 4), Scenario::OneItem),
            rat(3)
        );
    }

    #[test]
    fn utility_examples() {
        assert_eq!(utility(&val(3, 10), Bundle::ITEM2, &rat(6)), rat(4));
        assert_eq!(utility(&val(3, 10), Bundle::EMPTY, &rat(0)), rat(0));
        assert_eq!(utility(&val(3, 5), Bundle::BOTH, &rat(4)), rat(1));
    }

    #[test]
    fn allocation_feasibility() {
        let ok = Allocation {
            bundle_v: Bundle::ITEM1,
            bundle_w: Bundle::ITEM2,
        };
        assert!(ok.feasible(Scenario::TwoItems));
        assert!(!ok.feasible(Scenario::OneItem)); // item 2 not arrived

        let clash = Allocation {
            bundle_v: Bundle::ITEM1,
            bundle_w: Bundle::BOTH,
        };
        assert!(!clash.feasible(Scenario::TwoItems));
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(vec![]).is_err());
        assert!(Grid::new(vec![rat(1), rat(1)]).is_err());
        assert!(Grid::new(vec![rat(-1), rat(0)]).is_err());
        let g = Grid::new(vec![rat(3), rat(0), rat(1)]).unwrap();
        assert_eq!(g.values(), &[rat(0), rat(1), rat(3)]);
    }

    /// Enumerate every feasible assignment of arrived items directly.
    fn opt_brute(v: &Valuation, w: &Valuation, s: Scenario) -> Rat {
        let codes: &[usize] = match s {
            Scenario::OneItem => &[0, 1],
            Scenario::TwoItems => &[0, 1, 2, 3],
        };
        let mut best = Rat::zero();
        for &cv in codes {
            for &cw in codes {
                let a = Allocation {
                    bundle_v: Bundle::from_code(cv),
                    bundle_w: Bundle::from_code(cw),
                };
                if !a.feasible(s) {
                    continue;
                }
                let welf = welfare(&a, v, w);
                if welf > best {
                    best = welf;
                }
            }
        }
        best
    }

    fn small_rat() -> impl Strategy<Value = Rat> {
        (0i64..40, 1i64..8).prop_map(|(n, d)| Rat::new(n, d))
    }

    proptest! {
        #[test]
        fn opt_matches_brute_force(
            a in small_rat(), b in small_rat(), c in small_rat(), d in small_rat()
        ) {
            let v = Valuation::new(a, b);
            let w = Valuation::new(c, d);
            for s in Scenario::BOTH {
                prop_assert_eq!(offline_opt(&v, &w, s), opt_brute(&v, &w, s));
            }
        }

        #[test]
        fn welfare_never_exceeds_opt(
            a in small_rat(), b in small_rat(), c in small_rat(), d in small_rat(),
            cv in 0usize..4, cw in 0usize..4
        ) {
            let v = Valuation::new(a, b);
            let w = Valuation::new(c, d);
            let alloc = Allocation {
                bundle_v: Bundle::from_code(cv),
                bundle_w: Bundle::from_code(cw),
            };
            for s in Scenario::BOTH {
                if alloc.feasible(s) {
                    prop_assert!(welfare(&alloc, &v, &w) <= offline_opt(&v, &w, s));
                }
            }
        }

        #[test]
        fn rational_text_roundtrip(n in -1000i64..1000, d in 1i64..1000) {
            let r = Rat::new(n, d);
            let back: Rat = r.to_string().parse().unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
