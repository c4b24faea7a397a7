use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstanceError {
    #[error("an instance needs at least 2 customers, got {0}")]
    TooFewCustomers(usize),
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("customer {index} has demand {demand}, outside 1..={capacity}")]
    BadDemand { index: usize, demand: u32, capacity: u32 },
    #[error("customer {0} has a non-finite coordinate")]
    BadCoordinate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        math::sqrt(dx * dx + dy * dy)
    }
}

/// Capacitated routing instance with unlimited identical vehicles.
///
/// Nodes are indexed `0` (depot) and `1..=n` (customers).
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingInstance {
    id: String,
    capacity: u32,
    points: Vec<Point>,
    demands: Vec<u32>,
    dist: Vec<f64>,
}

impl RoutingInstance {
    pub fn new(
        id: impl Into<String>,
        capacity: u32,
        depot: Point,
        customers: &[(Point, u32)],
    ) -> Result<Self, InstanceError> {
        if customers.len() < 2 {
            return Err(InstanceError::TooFewCustomers(customers.len()));
        }
        if capacity == 0 {
            return Err(InstanceError::ZeroCapacity);
        }
        let mut points = Vec::with_capacity(customers.len() + 1);
        let mut demands = Vec::with_capacity(customers.len() + 1);
        points.push(depot);
        demands.push(0);
        for (i, &(p, d)) in customers.iter().enumerate() {
            if d == 0 || d > capacity {
                return Err(InstanceError::BadDemand {
                    index: i + 1,
                    demand: d,
                    capacity,
                });
            }
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(InstanceError::BadCoordinate(i + 1));
            }
            points.push(p);
            demands.push(d);
        }
        if !depot.x.is_finite() || !depot.y.is_finite() {
            return Err(InstanceError::BadCoordinate(0));
        }
        let n = points.len();
        let mut dist = Vec::with_capacity(n * n);
        for a in &points {
            for b in &points {
                dist.push(a.distance(b));
            }
        }
        Ok(Self {
            id: id.into(),
            capacity,
            points,
            demands,
            dist,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn n_customers(&self) -> usize {
        self.points.len() - 1
    }

    pub fn depot(&self) -> Point {
        self.points[0]
    }

    pub fn point(&self, node: usize) -> Point {
        self.points[node]
    }

    pub fn demand(&self, node: usize) -> u32 {
        self.demands[node]
    }

    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.points.len() + b]
    }

    /// Customers (as `(point, demand)`), in node order.
    pub fn customers(&self) -> impl Iterator<Item = (Point, u32)> + '_ {
        self.points[1..].iter().copied().zip(self.demands[1..].iter().copied())
    }
}

/// Uniform coordinates in the unit square, depot at the center, integer
/// demands uniform in `1..=capacity/3`.
pub fn generate_instance(
    id: impl Into<String>,
    n_customers: usize,
    capacity: u32,
    seed: u64,
) -> Result<RoutingInstance, InstanceError> {
    let mut rng = rng::seeded(seed);
    let max_demand = (capacity / 3).max(1);
    let customers: Vec<(Point, u32)> = (0..n_customers)
        .map(|_| {
            let p = Point {
                x: rng.random::<f64>(),
                y: rng.random::<f64>(),
            };
            (p, rng.random_range(1..=max_demand))
        })
        .collect();
    RoutingInstance::new(id, capacity, Point { x: 0.5, y: 0.5 }, &customers)
}
