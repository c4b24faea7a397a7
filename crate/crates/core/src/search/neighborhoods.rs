//! Move operators. Every operator works on a copy of the current solution
//! and either returns a feasible candidate or `None` when no feasible move
//! was drawn within [`MAX_RETRIES`] attempts (the caller treats that as a
//! no-op application).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng as _;

use super::instance::RoutingInstance;
use super::lahc::SearchError;
use super::solution::Solution;
use crate::rng::Rng;

/// Attempts per application before a capacity-violating draw is given up.
pub const MAX_RETRIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodKind {
    /// Remove `k` random customers, reinsert each at its cheapest position.
    CheapestInsertion(usize),
    /// Exchange two customers.
    Swap,
    /// Move one customer to a random position.
    Relocate,
    /// Reverse a segment inside one route.
    IntraRouteTwoOpt,
    /// Exchange the tails of two routes.
    InterRouteTwoOpt,
    /// Dissolve a route and reinsert its customers elsewhere.
    RemoveRoute,
    /// Remove a customer and its `k - 1` nearest customers, reinsert greedily.
    RuinRecreate(usize),
}

impl NeighborhoodKind {
    pub fn default_id(&self) -> String {
        match self {
            NeighborhoodKind::CheapestInsertion(k) => format!("cheapest-insertion-{k}"),
            NeighborhoodKind::Swap => "swap".into(),
            NeighborhoodKind::Relocate => "relocate".into(),
            NeighborhoodKind::IntraRouteTwoOpt => "intra-route-two-opt".into(),
            NeighborhoodKind::InterRouteTwoOpt => "inter-route-two-opt".into(),
            NeighborhoodKind::RemoveRoute => "remove-route".into(),
            NeighborhoodKind::RuinRecreate(k) => format!("ruin-recreate-{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub id: String,
    pub kind: NeighborhoodKind,
}

impl Neighborhood {
    pub fn new(kind: NeighborhoodKind) -> Self {
        Self {
            id: kind.default_id(),
            kind,
        }
    }
}

/// Ordered set of neighborhoods with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    items: Vec<Neighborhood>,
}

impl Roster {
    /// Returns `None` if ids repeat, are empty, or contain `,` or whitespace.
    pub fn new(items: Vec<Neighborhood>) -> Option<Self> {
        let valid_id = |id: &str| !id.is_empty() && !id.contains(',') && !id.contains(char::is_whitespace);
        for (i, n) in items.iter().enumerate() {
            if !valid_id(&n.id) || items[..i].iter().any(|m| m.id == n.id) {
                return None;
            }
        }
        (!items.is_empty()).then_some(Self { items })
    }

    /// Ten neighborhoods of seven types.
    pub fn standard() -> Self {
        use NeighborhoodKind::*;
        let kinds = [
            CheapestInsertion(1),
            CheapestInsertion(2),
            CheapestInsertion(5),
            CheapestInsertion(10),
            Swap,
            Relocate,
            IntraRouteTwoOpt,
            InterRouteTwoOpt,
            RemoveRoute,
            RuinRecreate(3),
        ];
        Self {
            items: kinds.into_iter().map(Neighborhood::new).collect(),
        }
    }

    /// The standard roster plus a second copy of swap under the id `swap-b`.
    pub fn with_duplicate_swap() -> Self {
        let mut r = Self::standard();
        r.items.push(Neighborhood {
            id: "swap-b".into(),
            kind: NeighborhoodKind::Swap,
        });
        r
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&Neighborhood> {
        self.items.get(idx)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|n| n.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.items.iter().map(|n| n.id.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Neighborhood> {
        self.items.iter()
    }

    /// [`apply_neighborhood`] addressed by id.
    pub fn apply_by_id(
        &self,
        id: &str,
        sol: &Solution,
        inst: &RoutingInstance,
        rng: &mut Rng,
        meter: &mut WorkMeter,
    ) -> Result<Option<Solution>, SearchError> {
        let idx = self
            .position(id)
            .ok_or_else(|| SearchError::UnknownNeighborhood(id.into()))?;
        Ok(apply_neighborhood(self.items[idx].kind, sol, inst, rng, meter))
    }
}

/// Deterministic stand-in for running time: counts elementary steps
/// (positions evaluated, nodes copied) performed by an operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkMeter {
    pub units: u64,
}

impl WorkMeter {
    #[inline]
    pub fn add(&mut self, units: usize) {
        self.units += units as u64;
    }
}

/// Applies one neighborhood to a copy of `sol`.
pub fn apply_neighborhood(
    kind: NeighborhoodKind,
    sol: &Solution,
    inst: &RoutingInstance,
    rng: &mut Rng,
    meter: &mut WorkMeter,
) -> Option<Solution> {
    let mut cand = sol.clone();
    meter.add(inst.n_customers() + sol.n_routes());
    let done = match kind {
        NeighborhoodKind::CheapestInsertion(k) => cheapest_insertion(&mut cand, inst, k, rng, meter),
        NeighborhoodKind::Swap => swap(&mut cand, inst, rng, meter),
        NeighborhoodKind::Relocate => relocate(&mut cand, inst, rng, meter),
        NeighborhoodKind::IntraRouteTwoOpt => intra_two_opt(&mut cand, inst, rng, meter),
        NeighborhoodKind::InterRouteTwoOpt => inter_two_opt(&mut cand, inst, rng, meter),
        NeighborhoodKind::RemoveRoute => remove_route(&mut cand, inst, rng, meter),
        NeighborhoodKind::RuinRecreate(k) => ruin_recreate(&mut cand, inst, k, rng, meter),
    };
    done.then_some(cand)
}

fn locate(sol: &Solution, customer: usize) -> (usize, usize) {
    sol.routes()
        .iter()
        .enumerate()
        .find_map(|(r, route)| route.customers.iter().position(|&c| c == customer).map(|p| (r, p)))
        .expect("every customer is routed")
}

fn remove_customers(sol: &mut Solution, inst: &RoutingInstance, removed: &[usize], meter: &mut WorkMeter) {
    let mut mask = vec![false; inst.n_customers() + 1];
    for &c in removed {
        mask[c] = true;
    }
    for r in 0..sol.n_routes() {
        let route = &sol.routes()[r];
        meter.add(route.len());
        if route.customers.iter().any(|&c| mask[c]) {
            let kept: Vec<usize> = route.customers.iter().copied().filter(|&c| !mask[c]).collect();
            sol.set_route(r, kept, inst);
        }
    }
    sol.drop_empty_routes();
}

/// Inserts at the cheapest feasible position; opens a new route only when
/// that is strictly cheaper or nothing else fits.
fn insert_cheapest(sol: &mut Solution, inst: &RoutingInstance, c: usize, meter: &mut WorkMeter) {
    let demand = inst.demand(c);
    let mut best: Option<(usize, usize, f64)> = None;
    for (r, route) in sol.routes().iter().enumerate() {
        if route.load + demand > inst.capacity() {
            continue;
        }
        meter.add(route.len() + 1);
        for pos in 0..=route.len() {
            let (prev, next) = route.gap(pos);
            let delta = inst.dist(prev, c) + inst.dist(c, next) - inst.dist(prev, next);
            if best.is_none_or(|(_, _, d)| delta < d) {
                best = Some((r, pos, delta));
            }
        }
    }
    let own_route = 2.0 * inst.dist(0, c);
    match best {
        Some((r, pos, delta)) if delta <= own_route => sol.insert(r, pos, c, inst),
        _ => sol.push_route(vec![c], inst),
    }
}

fn reinsert_all(
    sol: &mut Solution,
    inst: &RoutingInstance,
    removed: &mut [usize],
    rng: &mut Rng,
    meter: &mut WorkMeter,
) {
    removed.shuffle(rng);
    for &c in removed.iter() {
        insert_cheapest(sol, inst, c, meter);
    }
}

fn cheapest_insertion(
    sol: &mut Solution,
    inst: &RoutingInstance,
    k: usize,
    rng: &mut Rng,
    meter: &mut WorkMeter,
) -> bool {
    let n = inst.n_customers();
    let k = k.min(n);
    // sampled order is already random
    let removed: Vec<usize> = index::sample(rng, n, k).into_iter().map(|i| i + 1).collect();
    remove_customers(sol, inst, &removed, meter);
    for &c in &removed {
        insert_cheapest(sol, inst, c, meter);
    }
    true
}

fn swap(sol: &mut Solution, inst: &RoutingInstance, rng: &mut Rng, meter: &mut WorkMeter) -> bool {
    let n = inst.n_customers();
    for _ in 0..MAX_RETRIES {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        if a == b {
            continue;
        }
        let (ra, pa) = locate(sol, a);
        let (rb, pb) = locate(sol, b);
        meter.add(n);
        if ra == rb {
            let mut cs = sol.routes()[ra].customers.clone();
            cs.swap(pa, pb);
            sol.set_route(ra, cs, inst);
            return true;
        }
        let (da, db) = (inst.demand(a), inst.demand(b));
        let (la, lb) = (sol.routes()[ra].load, sol.routes()[rb].load);
        if la - da + db > inst.capacity() || lb - db + da > inst.capacity() {
            continue;
        }
        let mut ca = sol.routes()[ra].customers.clone();
        let mut cb = sol.routes()[rb].customers.clone();
        ca[pa] = b;
        cb[pb] = a;
        meter.add(ca.len() + cb.len());
        sol.set_route(ra, ca, inst);
        sol.set_route(rb, cb, inst);
        return true;
    }
    false
}

fn relocate(sol: &mut Solution, inst: &RoutingInstance, rng: &mut Rng, meter: &mut WorkMeter) -> bool {
    let n = inst.n_customers();
    for _ in 0..MAX_RETRIES {
        let c = rng.random_range(1..=n);
        let (r, p) = locate(sol, c);
        meter.add(n);
        // target n_routes means "own new route"
        let target = rng.random_range(0..=sol.n_routes());
        if target == sol.n_routes() {
            if sol.routes()[r].len() == 1 {
                return true;
            }
            let mut cs = sol.routes()[r].customers.clone();
            cs.remove(p);
            sol.set_route(r, cs, inst);
            sol.push_route(vec![c], inst);
            return true;
        }
        if target == r {
            let mut cs = sol.routes()[r].customers.clone();
            cs.remove(p);
            let pos = rng.random_range(0..=cs.len());
            cs.insert(pos, c);
            meter.add(cs.len());
            sol.set_route(r, cs, inst);
            return true;
        }
        if sol.routes()[target].load + inst.demand(c) > inst.capacity() {
            continue;
        }
        let mut from = sol.routes()[r].customers.clone();
        from.remove(p);
        let pos = rng.random_range(0..=sol.routes()[target].len());
        meter.add(from.len());
        sol.set_route(r, from, inst);
        sol.insert(target, pos, c, inst);
        sol.drop_empty_routes();
        return true;
    }
    false
}

fn intra_two_opt(sol: &mut Solution, inst: &RoutingInstance, rng: &mut Rng, meter: &mut WorkMeter) -> bool {
    let eligible: Vec<usize> = (0..sol.n_routes()).filter(|&r| sol.routes()[r].len() >= 2).collect();
    meter.add(sol.n_routes());
    let Some(&r) = eligible.choose(rng) else {
        return false;
    };
    let len = sol.routes()[r].len();
    let i = rng.random_range(0..len);
    let mut j = rng.random_range(0..len - 1);
    if j >= i {
        j += 1;
    }
    let (i, j) = (i.min(j), i.max(j));
    let mut cs = sol.routes()[r].customers.clone();
    cs[i..=j].reverse();
    meter.add(len);
    sol.set_route(r, cs, inst);
    true
}

fn inter_two_opt(sol: &mut Solution, inst: &RoutingInstance, rng: &mut Rng, meter: &mut WorkMeter) -> bool {
    let m = sol.n_routes();
    if m < 2 {
        return false;
    }
    for _ in 0..MAX_RETRIES {
        let r1 = rng.random_range(0..m);
        let mut r2 = rng.random_range(0..m - 1);
        if r2 >= r1 {
            r2 += 1;
        }
        let (a, b) = (&sol.routes()[r1], &sol.routes()[r2]);
        let cut1 = rng.random_range(0..=a.len());
        let cut2 = rng.random_range(0..=b.len());
        let new1: Vec<usize> = a.customers[..cut1]
            .iter()
            .chain(&b.customers[cut2..])
            .copied()
            .collect();
        let new2: Vec<usize> = b.customers[..cut2]
            .iter()
            .chain(&a.customers[cut1..])
            .copied()
            .collect();
        meter.add(a.len() + b.len());
        let load = |cs: &[usize]| cs.iter().map(|&c| inst.demand(c)).sum::<u32>();
        if load(&new1) > inst.capacity() || load(&new2) > inst.capacity() {
            continue;
        }
        sol.set_route(r1, new1, inst);
        sol.set_route(r2, new2, inst);
        sol.drop_empty_routes();
        return true;
    }
    false
}

fn remove_route(sol: &mut Solution, inst: &RoutingInstance, rng: &mut Rng, meter: &mut WorkMeter) -> bool {
    if sol.n_routes() < 2 {
        return false;
    }
    let r = rng.random_range(0..sol.n_routes());
    let mut removed = sol.remove_route(r).customers;
    reinsert_all(sol, inst, &mut removed, rng, meter);
    true
}

fn ruin_recreate(sol: &mut Solution, inst: &RoutingInstance, k: usize, rng: &mut Rng, meter: &mut WorkMeter) -> bool {
    let n = inst.n_customers();
    let seed = rng.random_range(1..=n);
    let mut others: Vec<usize> = (1..=n).filter(|&c| c != seed).collect();
    others.sort_by(|&a, &b| inst.dist(seed, a).total_cmp(&inst.dist(seed, b)).then(a.cmp(&b)));
    meter.add(n);
    let mut removed: Vec<usize> = core::iter::once(seed)
        .chain(others.into_iter().take(k.saturating_sub(1)))
        .collect();
    remove_customers(sol, inst, &removed, meter);
    reinsert_all(sol, inst, &mut removed, rng, meter);
    true
}
