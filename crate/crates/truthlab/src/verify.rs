//! Brute-force verification over bid grids: truthfulness (DSIC), individual
//! rationality, sequential consistency, feasibility, and worst-case or
//! expected approximation ratios. Every reported violation carries a
//! concrete, self-contained witness that replays through the mechanism.

use rayon::prelude::*;
use std::fmt;

use crate::mechanisms::{ArrivalProb, Coin, MechanismError, MechanismSpec};
use crate::model::{offline_opt, welfare, Bidder, Outcome, ProfileSpace, Scenario, Valuation};
use crate::rational::Rat;

/// What a violation witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    /// A strict utility gain from misreporting.
    Dsic,
    /// Negative utility under truthful reporting.
    Ir,
    /// Item-1 assignment differs between arrival scenarios.
    Consistency,
    /// An item allocated twice, or to a scenario where it never arrived.
    Feasibility,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::Dsic => write!(f, "dsic"),
            ViolationKind::Ir => write!(f, "ir"),
            ViolationKind::Consistency => write!(f, "consistency"),
            ViolationKind::Feasibility => write!(f, "feasibility"),
        }
    }
}

/// A concrete witness for one failed check. For DSIC, `utility_deviation`
/// strictly exceeds `utility_truth`; for IR, `utility_truth` is negative and
/// `utility_deviation` is the zero outside option.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationReport {
    pub kind: ViolationKind,
    pub bidder: Bidder,
    pub true_valuation: Valuation,
    pub opponent: Valuation,
    pub misreport: Option<Valuation>,
    pub scenario: Scenario,
    pub coin: Option<Coin>,
    pub utility_truth: Rat,
    pub utility_deviation: Rat,
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} bidder={} true={} opp={} {}",
            self.kind, self.bidder, self.true_valuation, self.opponent, self.scenario
        )?;
        if let Some(m) = &self.misreport {
            write!(f, " misreport={m}")?;
        }
        if let Some(c) = &self.coin {
            write!(f, " coin={c}")?;
        }
        write!(
            f,
            " u_truth={} u_dev={}",
            self.utility_truth, self.utility_deviation
        )
    }
}

/// Worst-case ratio value; `Unbounded` records zero mechanism welfare
/// against positive optimum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatioValue {
    Finite(Rat),
    Unbounded,
}

impl RatioValue {
    pub fn as_finite(&self) -> Option<&Rat> {
        match self {
            RatioValue::Finite(r) => Some(r),
            RatioValue::Unbounded => None,
        }
    }

    pub fn leq_rat(&self, bound: &Rat) -> bool {
        match self {
            RatioValue::Finite(r) => r <= bound,
            RatioValue::Unbounded => false,
        }
    }
}

impl PartialOrd for RatioValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RatioValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use RatioValue::*;
        match (self, other) {
            (Unbounded, Unbounded) => std::cmp::Ordering::Equal,
            (Unbounded, Finite(_)) => std::cmp::Ordering::Greater,
            (Finite(_), Unbounded) => std::cmp::Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for RatioValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatioValue::Finite(r) => write!(f, "{r}"),
            RatioValue::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// The profile realizing a reported ratio. `scenario` is `None` for
/// expectations that mix over arrival.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioWitness {
    pub v: Valuation,
    pub w: Valuation,
    pub scenario: Option<Scenario>,
}

/// Supremum of OPT/welfare over a profile space, with its witness. By
/// convention a profile with zero optimum contributes ratio 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioReport {
    pub ratio: RatioValue,
    pub witness: RatioWitness,
    pub opt: Rat,
    pub welfare: Rat,
    pub target: Option<Rat>,
}

impl fmt::Display for RatioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ratio={} at v={}, w={}",
            self.ratio, self.witness.v, self.witness.w
        )?;
        if let Some(s) = self.witness.scenario {
            write!(f, ", {s}")?;
        }
        write!(f, " (opt={}, welfare={})", self.opt, self.welfare)
    }
}

fn ratio_of(opt: &Rat, welf: &Rat) -> RatioValue {
    if opt.is_zero() {
        RatioValue::Finite(Rat::one())
    } else if welf.is_zero() {
        RatioValue::Unbounded
    } else {
        RatioValue::Finite(opt / welf)
    }
}

/// Coins to iterate for per-realization checks: a single `None` for
/// deterministic kinds.
fn coin_slots(m: &MechanismSpec) -> Vec<Option<Coin>> {
    if m.is_randomized() {
        m.coins().into_iter().map(Some).collect()
    } else {
        vec![None]
    }
}

/// All outcomes of one scenario over the profile space, indexed
/// `[v_idx][w_idx]` in the lexicographic point order of `ProfileSpace`.
struct OutcomeTable {
    v_points: Vec<Valuation>,
    w_points: Vec<Valuation>,
    outcomes: Vec<Outcome>,
}

impl OutcomeTable {
    fn build(
        m: &MechanismSpec,
        space: &ProfileSpace,
        s: Scenario,
        coin: Option<Coin>,
    ) -> Result<OutcomeTable, MechanismError> {
        let v_points = space.v_points();
        let w_points = space.w_points();
        let outcomes = v_points
            .par_iter()
            .map(|v| {
                w_points
                    .iter()
                    .map(|w| m.run_with_coin(coin, v, w, s))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        Ok(OutcomeTable {
            v_points,
            w_points,
            outcomes,
        })
    }

    fn get(&self, vi: usize, wi: usize) -> &Outcome {
        &self.outcomes[vi * self.w_points.len() + wi]
    }
}

/// Exhaustive truthfulness check: for each scenario, bidder, true profile,
/// and on-grid misreport, flag every strict utility gain. Randomized kinds
/// are checked per realized coin (universal truthfulness).
pub fn check_dsic(
    m: &MechanismSpec,
    space: &ProfileSpace,
) -> Result<Vec<ViolationReport>, MechanismError> {
    let mut reports = Vec::new();
    for coin in coin_slots(m) {
        for s in Scenario::BOTH {
            let table = OutcomeTable::build(m, space, s, coin)?;
            for bidder in Bidder::BOTH {
                reports.extend(dsic_for_bidder(&table, bidder, s, coin));
            }
        }
    }
    Ok(reports)
}

fn dsic_for_bidder(
    table: &OutcomeTable,
    bidder: Bidder,
    s: Scenario,
    coin: Option<Coin>,
) -> Vec<ViolationReport> {
    // Own reports index the bidder's own axis of the table; the opponent's
    // report stays fixed while scanning misreports.
    let (own_points, opp_points) = match bidder {
        Bidder::V => (&table.v_points, &table.w_points),
        Bidder::W => (&table.w_points, &table.v_points),
    };
    let outcome_at = |own: usize, opp: usize| -> &Outcome {
        match bidder {
            Bidder::V => table.get(own, opp),
            Bidder::W => table.get(opp, own),
        }
    };
    own_points
        .par_iter()
        .enumerate()
        .map(|(ti, true_val)| {
            let mut found = Vec::new();
            for (oi, opp_val) in opp_points.iter().enumerate() {
                let truth_out = outcome_at(ti, oi);
                let u_truth = truth_out.bundle_of(bidder).value(true_val)
                    - truth_out.payment_of(bidder).clone();
                for (ri, _report) in own_points.iter().enumerate() {
                    if ri == ti {
                        continue;
                    }
                    let dev_out = outcome_at(ri, oi);
                    let u_dev = dev_out.bundle_of(bidder).value(true_val)
                        - dev_out.payment_of(bidder).clone();
                    if u_dev > u_truth {
                        found.push(ViolationReport {
                            kind: ViolationKind::Dsic,
                            bidder,
                            true_valuation: true_val.clone(),
                            opponent: opp_val.clone(),
                            misreport: Some(own_points[ri].clone()),
                            scenario: s,
                            coin,
                            utility_truth: u_truth.clone(),
                            utility_deviation: u_dev,
                        });
                    }
                }
            }
            found
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Individual rationality: flag every profile where truthful reporting
/// leaves a bidder with negative utility.
pub fn check_ir(
    m: &MechanismSpec,
    space: &ProfileSpace,
) -> Result<Vec<ViolationReport>, MechanismError> {
    let mut reports = Vec::new();
    for coin in coin_slots(m) {
        for s in Scenario::BOTH {
            let table = OutcomeTable::build(m, space, s, coin)?;
            for (vi, v) in table.v_points.iter().enumerate() {
                for (wi, w) in table.w_points.iter().enumerate() {
                    let out = table.get(vi, wi);
                    for bidder in Bidder::BOTH {
                        let own = match bidder {
                            Bidder::V => v,
                            Bidder::W => w,
                        };
                        let u = out.bundle_of(bidder).value(own) - out.payment_of(bidder).clone();
                        if u.is_negative() {
                            reports.push(ViolationReport {
                                kind: ViolationKind::Ir,
                                bidder,
                                true_valuation: own.clone(),
                                opponent: match bidder {
                                    Bidder::V => w.clone(),
                                    Bidder::W => v.clone(),
                                },
                                misreport: None,
                                scenario: s,
                                coin,
                                utility_truth: u,
                                utility_deviation: Rat::zero(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(reports)
}

/// Sequential consistency and feasibility: the item-1 assignment must be
/// identical whether or not item 2 arrives, and no outcome may allocate an
/// item twice or hand out an item that never arrived.
pub fn check_consistency(
    m: &MechanismSpec,
    space: &ProfileSpace,
) -> Result<Vec<ViolationReport>, MechanismError> {
    let mut reports = Vec::new();
    for coin in coin_slots(m) {
        let one = OutcomeTable::build(m, space, Scenario::OneItem, coin)?;
        let two = OutcomeTable::build(m, space, Scenario::TwoItems, coin)?;
        for (vi, v) in one.v_points.iter().enumerate() {
            for (wi, w) in one.w_points.iter().enumerate() {
                for (s, out) in [
                    (Scenario::OneItem, one.get(vi, wi)),
                    (Scenario::TwoItems, two.get(vi, wi)),
                ] {
                    if !out.allocation.feasible(s) {
                        reports.push(ViolationReport {
                            kind: ViolationKind::Feasibility,
                            bidder: Bidder::V,
                            true_valuation: v.clone(),
                            opponent: w.clone(),
                            misreport: None,
                            scenario: s,
                            coin,
                            utility_truth: Rat::zero(),
                            utility_deviation: Rat::zero(),
                        });
                    }
                }
                for bidder in Bidder::BOTH {
                    let held_one = one.get(vi, wi).bundle_of(bidder).has_item1;
                    let held_two = two.get(vi, wi).bundle_of(bidder).has_item1;
                    if held_one != held_two {
                        let (own, opp) = match bidder {
                            Bidder::V => (v, w),
                            Bidder::W => (w, v),
                        };
                        reports.push(ViolationReport {
                            kind: ViolationKind::Consistency,
                            bidder,
                            true_valuation: own.clone(),
                            opponent: opp.clone(),
                            misreport: None,
                            scenario: Scenario::TwoItems,
                            coin,
                            utility_truth: Rat::zero(),
                            utility_deviation: Rat::zero(),
                        });
                    }
                }
            }
        }
    }
    Ok(reports)
}

/// DSIC, IR, and consistency in one pass, concatenated in that order.
pub fn check_all(
    m: &MechanismSpec,
    space: &ProfileSpace,
) -> Result<Vec<ViolationReport>, MechanismError> {
    let mut out = check_dsic(m, space)?;
    out.extend(check_ir(m, space)?);
    out.extend(check_consistency(m, space)?);
    Ok(out)
}

/// Supremum of OPT/welfare over all grid profiles and both scenarios, for a
/// deterministic mechanism.
pub fn worst_case_ratio(
    m: &MechanismSpec,
    space: &ProfileSpace,
    target: Option<Rat>,
) -> Result<RatioReport, MechanismError> {
    if m.is_randomized() {
        return Err(MechanismError::Config(format!(
            "{} is randomized; use expected_ratio",
            m.kind_name()
        )));
    }
    let mut best: Option<RatioReport> = None;
    for s in Scenario::BOTH {
        let table = OutcomeTable::build(m, space, s, None)?;
        for (vi, v) in table.v_points.iter().enumerate() {
            for (wi, w) in table.w_points.iter().enumerate() {
                let out = table.get(vi, wi);
                let opt = offline_opt(v, w, s);
                let welf = welfare(&out.allocation, v, w);
                let ratio = ratio_of(&opt, &welf);
                let candidate = RatioReport {
                    ratio,
                    witness: RatioWitness {
                        v: v.clone(),
                        w: w.clone(),
                        scenario: Some(s),
                    },
                    opt,
                    welfare: welf,
                    target: target.clone(),
                };
                if best.as_ref().is_none_or(|b| candidate.ratio > b.ratio) {
                    best = Some(candidate);
                }
            }
        }
    }
    Ok(best.expect("profile space is nonempty"))
}

/// Supremum over profiles of expected OPT over expected welfare, where the
/// expectation runs over item-2 arrival at probability `p` and, for the
/// randomized baselines, a uniform coin.
pub fn expected_ratio(
    m: &MechanismSpec,
    space: &ProfileSpace,
    arrival: &ArrivalProb,
) -> Result<RatioReport, MechanismError> {
    if !matches!(
        m,
        MechanismSpec::StochasticArrival(_) | MechanismSpec::RandomBidder | MechanismSpec::RandomItem
    ) {
        return Err(MechanismError::Config(format!(
            "expected_ratio applies to stochastic-arrival and randomized kinds, not {}",
            m.kind_name()
        )));
    }
    let p = arrival.value().clone();
    let q = Rat::one() - p.clone();
    let coins = coin_slots(m);
    let coin_share = Rat::one() / Rat::from_int(coins.len() as i64);

    let mut tables = Vec::new();
    for s in Scenario::BOTH {
        for coin in &coins {
            tables.push((s, OutcomeTable::build(m, space, s, *coin)?));
        }
    }
    let v_points = space.v_points();
    let w_points = space.w_points();

    let mut best: Option<RatioReport> = None;
    for (vi, v) in v_points.iter().enumerate() {
        for (wi, w) in w_points.iter().enumerate() {
            let exp_opt = &q * &offline_opt(v, w, Scenario::OneItem)
                + &p * &offline_opt(v, w, Scenario::TwoItems);
            let mut exp_welf = Rat::zero();
            for (s, table) in &tables {
                let arrival_weight = match s {
                    Scenario::OneItem => &q,
                    Scenario::TwoItems => &p,
                };
                let welf = welfare(&table.get(vi, wi).allocation, v, w);
                exp_welf += arrival_weight * &coin_share * welf;
            }
            let ratio = ratio_of(&exp_opt, &exp_welf);
            let candidate = RatioReport {
                ratio,
                witness: RatioWitness {
                    v: v.clone(),
                    w: w.clone(),
                    scenario: None,
                },
                opt: exp_opt,
                welfare: exp_welf,
                target: None,
            };
            if best.as_ref().is_none_or(|b| candidate.ratio > b.ratio) {
                best = Some(candidate);
            }
        }
    }
    Ok(best.expect("profile space is nonempty"))
}

/// Replay one violation report against the mechanism and confirm it
/// reproduces the recorded utilities exactly. Used by witness-soundness
/// tests and by the certificate replayer.
pub fn replay_violation(
    m: &MechanismSpec,
    report: &ViolationReport,
) -> Result<bool, MechanismError> {
    let (v_true, w_true) = match report.bidder {
        Bidder::V => (report.true_valuation.clone(), report.opponent.clone()),
        Bidder::W => (report.opponent.clone(), report.true_valuation.clone()),
    };
    match report.kind {
        ViolationKind::Dsic => {
            let Some(mis) = &report.misreport else {
                return Ok(false);
            };
            let truth_out = m.run_with_coin(report.coin, &v_true, &w_true, report.scenario)?;
            let (v_dev, w_dev) = match report.bidder {
                Bidder::V => (mis.clone(), w_true.clone()),
                Bidder::W => (v_true.clone(), mis.clone()),
            };
            let dev_out = m.run_with_coin(report.coin, &v_dev, &w_dev, report.scenario)?;
            let u_truth = truth_out.bundle_of(report.bidder).value(&report.true_valuation)
                - truth_out.payment_of(report.bidder).clone();
            let u_dev = dev_out.bundle_of(report.bidder).value(&report.true_valuation)
                - dev_out.payment_of(report.bidder).clone();
            Ok(u_truth == report.utility_truth && u_dev == report.utility_deviation && u_dev > u_truth)
        }
        ViolationKind::Ir => {
            let out = m.run_with_coin(report.coin, &v_true, &w_true, report.scenario)?;
            let u = out.bundle_of(report.bidder).value(&report.true_valuation)
                - out.payment_of(report.bidder).clone();
            Ok(u == report.utility_truth && u.is_negative())
        }
        ViolationKind::Consistency => {
            let one = m.run_with_coin(report.coin, &v_true, &w_true, Scenario::OneItem)?;
            let two = m.run_with_coin(report.coin, &v_true, &w_true, Scenario::TwoItems)?;
            Ok(one.bundle_of(report.bidder).has_item1 != two.bundle_of(report.bidder).has_item1)
        }
        ViolationKind::Feasibility => {
            let out = m.run_with_coin(report.coin, &v_true, &w_true, report.scenario)?;
            Ok(!out.allocation.feasible(report.scenario))
        }
    }
}
