//! Desk-scale multi-neighborhood iterated local search over a capacitated
//! routing problem, instrumented to fill a [`RunLog`](crate::runlog::RunLog).

mod instance;
mod lahc;
mod neighborhoods;
mod solution;

pub use instance::{generate_instance, InstanceError, Point, RoutingInstance};
pub use lahc::{
    classify_move, lahc_run, reference_run, select_neighborhood, Budget, ModeledClock, MoveOutcome, RunOutcome,
    SearchConfig, SearchError, Stopwatch, WeightedSelector,
};
pub use neighborhoods::{apply_neighborhood, Neighborhood, NeighborhoodKind, Roster, WorkMeter};
pub use solution::{initial_solution, Route, Solution, SolutionError};
