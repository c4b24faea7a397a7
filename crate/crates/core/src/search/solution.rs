use alloc::vec;
use alloc::vec::Vec;

use super::instance::RoutingInstance;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolutionError {
    #[error("customer {0} is visited {1} times")]
    Coverage(usize, usize),
    #[error("route {0} carries {1}, above capacity {2}")]
    Capacity(usize, u32, u32),
    #[error("route {0} is empty")]
    EmptyRoute(usize),
    #[error("cached cost {cached} differs from recomputed {actual}")]
    StaleCost { cached: f64, actual: f64 },
}

/// Depot-to-depot sequence of customers with cached load and length.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub customers: Vec<usize>,
    pub load: u32,
    pub cost: f64,
}

impl Route {
    pub fn new(customers: Vec<usize>, inst: &RoutingInstance) -> Self {
        let load = customers.iter().map(|&c| inst.demand(c)).sum();
        let cost = route_cost(&customers, inst);
        Self { customers, load, cost }
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    /// Node before position `pos` and node at `pos` (depot at the ends).
    pub fn gap(&self, pos: usize) -> (usize, usize) {
        let prev = if pos == 0 { 0 } else { self.customers[pos - 1] };
        let next = self.customers.get(pos).copied().unwrap_or(0);
        (prev, next)
    }
}

pub(crate) fn route_cost(customers: &[usize], inst: &RoutingInstance) -> f64 {
    let mut prev = 0;
    let mut cost = 0.0;
    for &c in customers {
        cost += inst.dist(prev, c);
        prev = c;
    }
    if !customers.is_empty() {
        cost += inst.dist(prev, 0);
    }
    cost
}

/// Set of routes covering every customer once; the total cost is kept
/// incrementally as routes change.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    routes: Vec<Route>,
    cost: f64,
}

impl Solution {
    pub fn from_routes(routes: Vec<Vec<usize>>, inst: &RoutingInstance) -> Self {
        let routes: Vec<Route> = routes
            .into_iter()
            .filter(|r| !r.is_empty())
            .map(|r| Route::new(r, inst))
            .collect();
        let cost = routes.iter().map(|r| r.cost).sum();
        Self { routes, cost }
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn n_routes(&self) -> usize {
        self.routes.len()
    }

    pub fn recomputed_cost(&self, inst: &RoutingInstance) -> f64 {
        self.routes.iter().map(|r| route_cost(&r.customers, inst)).sum()
    }

    /// Replaces route `idx` and updates the cached total by the difference.
    pub(crate) fn set_route(&mut self, idx: usize, customers: Vec<usize>, inst: &RoutingInstance) {
        let route = Route::new(customers, inst);
        self.cost += route.cost - self.routes[idx].cost;
        self.routes[idx] = route;
    }

    pub(crate) fn push_route(&mut self, customers: Vec<usize>, inst: &RoutingInstance) {
        let route = Route::new(customers, inst);
        self.cost += route.cost;
        self.routes.push(route);
    }

    pub(crate) fn remove_route(&mut self, idx: usize) -> Route {
        let route = self.routes.remove(idx);
        self.cost -= route.cost;
        route
    }

    /// Inserts `customer` at `pos` of route `idx`, adjusting load and cost by
    /// the insertion delta.
    pub(crate) fn insert(&mut self, idx: usize, pos: usize, customer: usize, inst: &RoutingInstance) {
        let route = &mut self.routes[idx];
        let (prev, next) = route.gap(pos);
        let delta = inst.dist(prev, customer) + inst.dist(customer, next) - inst.dist(prev, next);
        route.customers.insert(pos, customer);
        route.load += inst.demand(customer);
        route.cost += delta;
        self.cost += delta;
    }

    pub(crate) fn drop_empty_routes(&mut self) {
        self.routes.retain(|r| !r.is_empty());
    }

    /// Refreshes the cached total from the per-route costs.
    pub(crate) fn resync(&mut self, inst: &RoutingInstance) {
        for r in &mut self.routes {
            r.cost = route_cost(&r.customers, inst);
        }
        self.cost = self.routes.iter().map(|r| r.cost).sum();
    }

    /// Checks coverage, capacity and the cached cost (relative 1e-6).
    pub fn validate(&self, inst: &RoutingInstance) -> Result<(), SolutionError> {
        let mut seen = vec![0usize; inst.n_customers() + 1];
        for (i, r) in self.routes.iter().enumerate() {
            if r.is_empty() {
                return Err(SolutionError::EmptyRoute(i));
            }
            let load: u32 = r.customers.iter().map(|&c| inst.demand(c)).sum();
            if load > inst.capacity() {
                return Err(SolutionError::Capacity(i, load, inst.capacity()));
            }
            for &c in &r.customers {
                seen[c] += 1;
            }
        }
        if let Some((c, &k)) = seen.iter().enumerate().skip(1).find(|(_, &k)| k != 1) {
            return Err(SolutionError::Coverage(c, k));
        }
        let actual = self.recomputed_cost(inst);
        if (actual - self.cost).abs() > 1e-6 * actual.abs().max(1.0) {
            return Err(SolutionError::StaleCost {
                cached: self.cost,
                actual,
            });
        }
        Ok(())
    }
}

/// One out-and-back route per customer.
pub fn initial_solution(inst: &RoutingInstance) -> Solution {
    Solution::from_routes((1..=inst.n_customers()).map(|c| vec![c]).collect(), inst)
}
