//! Payment existence for bare allocation rules.
//!
//! Fix a bidder, an opponent report, and a scenario. An allocation rule then
//! assigns each of the bidder's grid types a bundle. The rule is truthful at
//! this slice for some payment scheme iff bundle prices `p` exist with
//! `p(empty) = 0` such that every type weakly prefers its own assigned
//! bundle at these prices and no type pays more than its value.
//!
//! That is a system of difference constraints over at most four bundle
//! prices, solved by shortest paths; infeasibility is witnessed by a
//! negative constraint cycle, re-checkable from the raw valuations alone.

use std::collections::BTreeMap;
use std::fmt;

use crate::mechanisms::{MechanismError, MechanismSpec};
use crate::model::{Bidder, Bundle, Grid, ProfileSpace, Scenario, Valuation};
use crate::rational::Rat;

/// The taxation-principle reduction of one rule slice: one node per realized
/// bundle plus the always-present empty bundle, and for each ordered node
/// pair the tightest margin `min over types assigned S of value(S) - value(T)`.
#[derive(Debug, Clone)]
pub struct BundleGraph {
    /// Nodes; index 0 is always the empty bundle.
    pub nodes: Vec<Bundle>,
    /// `edges[(S, T)]` carries the margin and one type attaining it.
    pub edges: BTreeMap<(Bundle, Bundle), EdgeData>,
    /// `min over types assigned S of value(S)`: the IR bound on `p(S)`.
    pub ir_caps: BTreeMap<Bundle, Rat>,
    /// The assignment the graph was built from.
    pub assignments: Vec<(Valuation, Bundle)>,
}

#[derive(Debug, Clone)]
pub struct EdgeData {
    pub weight: Rat,
    pub witness_type: Valuation,
}

/// One inequality in an infeasibility witness: the type holding `assigned`
/// must weakly prefer it to `alternative`, contributing margin
/// `value(assigned) - value(alternative)` to the cycle sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleStep {
    pub bidder_type: Valuation,
    pub assigned: Bundle,
    pub alternative: Bundle,
    pub margin: Rat,
}

/// A cycle of preference constraints whose margins sum to a strict
/// contradiction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintCycle {
    pub steps: Vec<CycleStep>,
    pub total: Rat,
}

impl ConstraintCycle {
    /// Re-derive every margin from the raw valuations and confirm the sum is
    /// strictly negative.
    pub fn validates(&self) -> bool {
        if self.steps.is_empty() {
            return false;
        }
        let mut total = Rat::zero();
        for (i, step) in self.steps.iter().enumerate() {
            let next = &self.steps[(i + 1) % self.steps.len()];
            if step.alternative != next.assigned {
                return false;
            }
            let margin = step.assigned.value(&step.bidder_type)
                - step.alternative.value(&step.bidder_type);
            if margin != step.margin {
                return false;
            }
            total += margin;
        }
        total == self.total && total.is_negative()
    }
}

impl fmt::Display for ConstraintCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(
                f,
                "  type {} holds {} vs {}: margin {}",
                step.bidder_type, step.assigned, step.alternative, step.margin
            )?;
        }
        write!(f, "  cycle sum {} < 0", self.total)
    }
}

/// Why no payments exist: a pure preference cycle, or a forced price above
/// some assigned type's value (the cycle passes through the empty bundle).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibilityKind {
    NegativeCycle,
    IrConflict,
}

/// Decision outcome: concrete prices, or a re-checkable contradiction.
#[derive(Debug, Clone)]
pub enum PaymentCertificate {
    Feasible { prices: BTreeMap<Bundle, Rat> },
    Infeasible {
        kind: InfeasibilityKind,
        witness: ConstraintCycle,
    },
}

impl PaymentCertificate {
    pub fn is_feasible(&self) -> bool {
        matches!(self, PaymentCertificate::Feasible { .. })
    }

    pub fn prices(&self) -> Option<&BTreeMap<Bundle, Rat>> {
        match self {
            PaymentCertificate::Feasible { prices } => Some(prices),
            _ => None,
        }
    }
}

impl fmt::Display for PaymentCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PaymentCertificate::Feasible { prices } => {
                write!(f, "feasible:")?;
                for (b, p) in prices {
                    write!(f, " p({b})={p}")?;
                }
                Ok(())
            }
            PaymentCertificate::Infeasible { kind, witness } => {
                let label = match kind {
                    InfeasibilityKind::NegativeCycle => "negative constraint cycle",
                    InfeasibilityKind::IrConflict => "ir conflict",
                };
                writeln!(f, "infeasible ({label}):")?;
                write!(f, "{witness}")
            }
        }
    }
}

/// Build the bundle graph for an explicit type-to-bundle assignment.
pub fn build_bundle_graph_from(assignments: Vec<(Valuation, Bundle)>) -> BundleGraph {
    let mut nodes = vec![Bundle::EMPTY];
    for (_, b) in &assignments {
        if !nodes.contains(b) {
            nodes.push(*b);
        }
    }
    nodes.sort_by_key(|b| b.code());

    let mut edges: BTreeMap<(Bundle, Bundle), EdgeData> = BTreeMap::new();
    let mut ir_caps: BTreeMap<Bundle, Rat> = BTreeMap::new();
    for (ty, assigned) in &assignments {
        let own_value = assigned.value(ty);
        ir_caps
            .entry(*assigned)
            .and_modify(|cap| {
                if own_value < *cap {
                    *cap = own_value.clone();
                }
            })
            .or_insert_with(|| own_value.clone());
        for alt in &nodes {
            if alt == assigned {
                continue;
            }
            let weight = assigned.value(ty) - alt.value(ty);
            let entry = edges.entry((*assigned, *alt));
            match entry {
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    if weight < e.get().weight {
                        *e.get_mut() = EdgeData {
                            weight,
                            witness_type: ty.clone(),
                        };
                    }
                }
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(EdgeData {
                        weight,
                        witness_type: ty.clone(),
                    });
                }
            }
        }
    }
    BundleGraph {
        nodes,
        edges,
        ir_caps,
        assignments,
    }
}

/// Build the bundle graph for a rule given as a closure over the bidder's
/// own grid axes.
pub fn build_bundle_graph(
    rule: impl Fn(&Valuation) -> Bundle,
    axes: (&Grid, &Grid),
) -> BundleGraph {
    let mut assignments = Vec::new();
    for x1 in axes.0.values() {
        for x2 in axes.1.values() {
            let ty = Valuation::new(x1.clone(), x2.clone());
            let bundle = rule(&ty);
            assignments.push((ty, bundle));
        }
    }
    build_bundle_graph_from(assignments)
}

/// Decide payment existence for a bundle graph.
///
/// Feasible instances get the pointwise-minimal price vector (the critical
/// prices) when the empty bundle is realized, or the maximal vector
/// otherwise; infeasible instances get a negative-cycle witness.
pub fn solve(graph: &BundleGraph) -> PaymentCertificate {
    let n = graph.nodes.len();
    let index_of = |b: Bundle| graph.nodes.iter().position(|x| *x == b).unwrap();

    // Constraint p(S) <= p(T) + c for:
    //   - every tightened envy edge: c = margin(S over T);
    //   - every IR cap (T = empty): c = cap(S).
    // Directed edge T -> S with weight c.
    struct E {
        from: usize,
        to: usize,
        weight: Rat,
        // (type, assigned, alternative) realizing the constraint
        witness: (Valuation, Bundle, Bundle),
    }
    let mut es: Vec<E> = Vec::new();
    for ((s, t), data) in &graph.edges {
        es.push(E {
            from: index_of(*t),
            to: index_of(*s),
            weight: data.weight.clone(),
            witness: (data.witness_type.clone(), *s, *t),
        });
    }
    // IR caps coincide with envy edges toward the empty bundle when the
    // empty bundle is realized; add them explicitly so unrealized-empty
    // instances still carry them.
    for (s, cap) in &graph.ir_caps {
        if *s == Bundle::EMPTY {
            continue;
        }
        let key = (*s, Bundle::EMPTY);
        if !graph.edges.contains_key(&key) {
            let ty = graph
                .assignments
                .iter()
                .find(|(t, b)| b == s && s.value(t) == *cap)
                .map(|(t, _)| t.clone())
                .expect("cap has a realizing type");
            es.push(E {
                from: index_of(Bundle::EMPTY),
                to: index_of(*s),
                weight: cap.clone(),
                witness: (ty, *s, Bundle::EMPTY),
            });
        }
    }

    // Bellman-Ford from a virtual super-source (all distances start 0), so
    // every negative cycle is found regardless of reachability.
    let mut dist: Vec<Rat> = vec![Rat::zero(); n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut changed_node = None;
    for round in 0..n {
        let mut changed = None;
        for (ei, e) in es.iter().enumerate() {
            let cand = &dist[e.from] + &e.weight;
            if cand < dist[e.to] {
                dist[e.to] = cand;
                pred[e.to] = Some(ei);
                changed = Some(e.to);
            }
        }
        if changed.is_none() {
            break;
        }
        if round == n - 1 {
            changed_node = changed;
        }
    }

    if let Some(start) = changed_node {
        // Walk predecessors n steps to guarantee landing on the cycle, then
        // collect it.
        let mut node = start;
        for _ in 0..n {
            node = es[pred[node].expect("relaxed node has predecessor")].from;
        }
        let mut cycle_edges = Vec::new();
        let cycle_start = node;
        loop {
            let ei = pred[node].expect("cycle node has predecessor");
            cycle_edges.push(ei);
            node = es[ei].from;
            if node == cycle_start {
                break;
            }
        }
        cycle_edges.reverse();
        let mut steps = Vec::new();
        let mut total = Rat::zero();
        let mut through_empty = false;
        for ei in cycle_edges {
            let (ty, assigned, alternative) = es[ei].witness.clone();
            if assigned == Bundle::EMPTY || alternative == Bundle::EMPTY {
                through_empty = true;
            }
            total += es[ei].weight.clone();
            steps.push(CycleStep {
                bidder_type: ty,
                assigned,
                alternative,
                margin: es[ei].weight.clone(),
            });
        }
        let kind = if through_empty {
            InfeasibilityKind::IrConflict
        } else {
            InfeasibilityKind::NegativeCycle
        };
        return PaymentCertificate::Infeasible {
            kind,
            witness: ConstraintCycle { steps, total },
        };
    }

    // Feasible. Prefer the minimal solution p(S) = -shortest(S -> empty);
    // it exists whenever some type is assigned the empty bundle. Fall back
    // to the maximal solution p(S) = shortest(empty -> S).
    let empty_idx = index_of(Bundle::EMPTY);
    let empty_realized = graph
        .assignments
        .iter()
        .any(|(_, b)| *b == Bundle::EMPTY);

    let shortest_from = |source: usize, reversed: bool| -> Vec<Option<Rat>> {
        let mut d: Vec<Option<Rat>> = vec![None; n];
        d[source] = Some(Rat::zero());
        for _ in 0..n {
            let mut changed = false;
            for e in &es {
                let (a, b) = if reversed {
                    (e.to, e.from)
                } else {
                    (e.from, e.to)
                };
                if let Some(da) = &d[a] {
                    let cand = da + &e.weight;
                    if d[b].as_ref().is_none_or(|db| cand < *db) {
                        d[b] = Some(cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        d
    };

    let mut prices = BTreeMap::new();
    if empty_realized {
        let to_empty = shortest_from(empty_idx, true);
        for (i, b) in graph.nodes.iter().enumerate() {
            let d = to_empty[i]
                .clone()
                .expect("all nodes constrain against the empty bundle");
            prices.insert(*b, -d);
        }
    } else {
        let from_empty = shortest_from(empty_idx, false);
        for (i, b) in graph.nodes.iter().enumerate() {
            let d = from_empty[i].clone().expect("ir caps reach every node");
            prices.insert(*b, d);
        }
    }
    debug_assert!(prices_satisfy(graph, &prices));
    PaymentCertificate::Feasible { prices }
}

/// Check a price vector against every raw constraint of the graph's
/// assignment: weak argmax for each type, empty priced 0, IR caps.
pub fn prices_satisfy(graph: &BundleGraph, prices: &BTreeMap<Bundle, Rat>) -> bool {
    if prices.get(&Bundle::EMPTY).map(|p| !p.is_zero()).unwrap_or(true) {
        return false;
    }
    for (ty, assigned) in &graph.assignments {
        let own = assigned.value(ty) - prices[assigned].clone();
        if own.is_negative() {
            return false;
        }
        for alt in &graph.nodes {
            let other = alt.value(ty) - prices[alt].clone();
            if other > own {
                return false;
            }
        }
    }
    true
}

/// Payment existence for an allocation rule given as a closure.
pub fn payments_exist_rule(
    rule: impl Fn(&Valuation) -> Bundle,
    axes: (&Grid, &Grid),
) -> PaymentCertificate {
    solve(&build_bundle_graph(rule, axes))
}

/// Payment existence for one bidder of a mechanism, at a fixed opponent
/// report and scenario, quantified over the bidder's own grid axes. Only
/// the mechanism's allocation is consulted.
pub fn payments_exist(
    m: &MechanismSpec,
    bidder: Bidder,
    opponent: &Valuation,
    s: Scenario,
    space: &ProfileSpace,
) -> Result<PaymentCertificate, MechanismError> {
    Ok(solve(&bundle_graph_of_mechanism(m, bidder, opponent, s, space)?))
}

/// The bundle graph of a mechanism slice (exposed for report output).
pub fn bundle_graph_of_mechanism(
    m: &MechanismSpec,
    bidder: Bidder,
    opponent: &Valuation,
    s: Scenario,
    space: &ProfileSpace,
) -> Result<BundleGraph, MechanismError> {
    let (a1, a2) = space.axes_of(bidder);
    let mut assignments = Vec::new();
    for x1 in a1.values() {
        for x2 in a2.values() {
            let ty = Valuation::new(x1.clone(), x2.clone());
            let (v, w) = match bidder {
                Bidder::V => (&ty, opponent),
                Bidder::W => (opponent, &ty),
            };
            let out = m.run(v, w, s)?;
            assignments.push((ty, out.bundle_of(bidder)));
        }
    }
    Ok(build_bundle_graph_from(assignments))
}

/// One decomposed subproblem result of the full survey.
#[derive(Debug, Clone)]
pub struct PaymentSlice {
    pub bidder: Bidder,
    pub opponent: Valuation,
    pub scenario: Scenario,
    pub certificate: PaymentCertificate,
}

/// Decide payment existence across every (bidder, opponent grid point,
/// scenario) slice. Truthfulness fixes the opponent's report, so the global
/// question decomposes exactly into these slices.
pub fn payments_survey(
    m: &MechanismSpec,
    space: &ProfileSpace,
) -> Result<Vec<PaymentSlice>, MechanismError> {
    let mut out = Vec::new();
    for bidder in Bidder::BOTH {
        for opponent in space.points_of(bidder.other()) {
            for s in Scenario::BOTH {
                let certificate = payments_exist(m, bidder, &opponent, s, space)?;
                out.push(PaymentSlice {
                    bidder,
                    opponent: opponent.clone(),
                    scenario: s,
                    certificate,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::val;
    use crate::rational::rat;

    fn grid(values: &[(i64, i64)]) -> Grid {
        Grid::new(values.iter().map(|&(n, d)| Rat::new(n, d)).collect()).unwrap()
    }

    #[test]
    fn constant_empty_rule_is_free() {
        let g = grid(&[(0, 1), (1, 1), (2, 1)]);
        let cert = payments_exist_rule(|_| Bundle::EMPTY, (&g, &g));
        let prices = cert.prices().expect("constant-empty rule is feasible");
        assert!(prices.values().all(|p| p.is_zero()));
        assert_eq!(prices.len(), 1);
    }

    #[test]
    fn threshold_rule_recovers_its_own_prices() {
        // Strict-region threshold rule with pi1 = 2, pi2 = 5 on a grid that
        // contains both cut values: the minimal solver returns exactly them.
        let g = grid(&[(0, 1), (1, 1), (2, 1), (3, 1), (5, 1), (6, 1), (9, 1)]);
        let pi1 = rat(2);
        let pi2 = rat(5);
        let rule = |ty: &Valuation| -> Bundle {
            if ty.v1 > pi1 {
                if &ty.v2 - &pi2 > &ty.v1 - &pi1 {
                    Bundle::BOTH
                } else {
                    Bundle::ITEM1
                }
            } else if ty.v2 > pi2 {
                Bundle::ITEM2
            } else {
                Bundle::EMPTY
            }
        };
        let cert = payments_exist_rule(rule, (&g, &g));
        let prices = cert.prices().expect("threshold rule has payments");
        assert_eq!(prices[&Bundle::ITEM1], rat(2));
        assert_eq!(prices[&Bundle::ITEM2], rat(5));
        assert_eq!(prices[&Bundle::BOTH], rat(5));
    }

    #[test]
    fn threshold_bundle_graph_nodes() {
        let g = grid(&[(0, 1), (1, 1), (3, 1), (6, 1), (9, 1)]);
        let pi1 = rat(2);
        let pi2 = rat(5);
        let graph = build_bundle_graph(
            |ty| {
                if ty.v1 > pi1 {
                    if &ty.v2 - &pi2 > &ty.v1 - &pi1 {
                        Bundle::BOTH
                    } else {
                        Bundle::ITEM1
                    }
                } else if ty.v2 > pi2 {
                    Bundle::ITEM2
                } else {
                    Bundle::EMPTY
                }
            },
            (&g, &g),
        );
        assert_eq!(
            graph.nodes,
            vec![Bundle::EMPTY, Bundle::ITEM1, Bundle::ITEM2, Bundle::BOTH]
        );
    }

    #[test]
    fn bundling_one_item_graph() {
        let g = grid(&[(1, 10), (4, 1), (5, 1), (10, 1)]);
        let w = val(5, 0);
        let graph = bundle_graph_of_mechanism(
            &MechanismSpec::Bundling(crate::mechanisms::BundlingPayment::Free),
            Bidder::V,
            &w,
            Scenario::OneItem,
            &ProfileSpace::shared(&g),
        )
        .unwrap();
        assert_eq!(graph.nodes, vec![Bundle::EMPTY, Bundle::ITEM1]);
        assert!(graph
            .assignments
            .iter()
            .any(|(t, b)| *t == val((1, 10), 10) && *b == Bundle::ITEM1));
    }

    #[test]
    fn greedy_slice_has_no_truthful_payments() {
        let g = grid(&[(0, 1), (1, 1), (2, 1), (3, 1), (4, 1), (8, 1)]);
        let cert = payments_exist(
            &MechanismSpec::Greedy,
            Bidder::V,
            &val(3, 4),
            Scenario::TwoItems,
            &ProfileSpace::shared(&g),
        )
        .unwrap();
        match &cert {
            PaymentCertificate::Infeasible { witness, .. } => {
                assert!(witness.validates(), "witness must re-validate: {witness}");
            }
            PaymentCertificate::Feasible { .. } => panic!("greedy slice should be infeasible"),
        }
    }

    #[test]
    fn ir_conflict_detected() {
        // Every type gets item 1, including a type valuing it below the
        // price forced by a participation constraint... construct directly:
        // type (5,0) assigned empty forces p({1}) >= 5, but type (1,0)
        // assigned {1} caps it at 1.
        let assignments = vec![
            (val(5, 0), Bundle::EMPTY),
            (val(1, 0), Bundle::ITEM1),
        ];
        let graph = build_bundle_graph_from(assignments);
        match solve(&graph) {
            PaymentCertificate::Infeasible { kind, witness } => {
                assert_eq!(kind, InfeasibilityKind::IrConflict);
                assert!(witness.validates());
            }
            PaymentCertificate::Feasible { .. } => panic!("should be infeasible"),
        }
    }

    #[test]
    fn infeasibility_is_monotone_under_supergrids() {
        let small = grid(&[(0, 1), (1, 1), (2, 1), (3, 1), (4, 1), (8, 1)]);
        let big = small.extended(&[rat((1, 2)), rat(6)]);
        for g in [small, big] {
            let cert = payments_exist(
                &MechanismSpec::Greedy,
                Bidder::V,
                &val(3, 4),
                Scenario::TwoItems,
                &ProfileSpace::shared(&g),
            )
            .unwrap();
            assert!(!cert.is_feasible());
        }
    }

    #[test]
    fn feasible_prices_satisfy_all_constraints() {
        // Discount mechanism slices are truthful; recovered prices must
        // satisfy every constraint of their graph.
        let g = grid(&[(0, 1), (1, 1), (2, 1), (5, 1)]);
        let space = ProfileSpace::shared(&g);
        for slice in payments_survey(&MechanismSpec::Discount, &space).unwrap() {
            let graph = bundle_graph_of_mechanism(
                &MechanismSpec::Discount,
                slice.bidder,
                &slice.opponent,
                slice.scenario,
                &space,
            )
            .unwrap();
            match &slice.certificate {
                PaymentCertificate::Feasible { prices } => {
                    assert!(prices_satisfy(&graph, prices));
                }
                PaymentCertificate::Infeasible { witness, .. } => {
                    panic!(
                        "discount slice {:?}/{}/{} infeasible:\n{}",
                        slice.bidder, slice.opponent, slice.scenario, witness
                    );
                }
            }
        }
    }
}
