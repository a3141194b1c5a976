//! Safe platoon formation and merging for car-like vehicles on curved
//! multi-lane roads.
//!
//! The crate is layered bottom-up: [`path`] holds the reference geometry,
//! [`vehicle`] the kinematic bicycle plant, [`frenet`] the path-relative
//! coordinates, [`control`] the lateral and longitudinal laws and [`sim`] the
//! closed loop. [`scenario`], [`output`] and [`check`] back the `platoon`
//! command-line tool.

pub mod check;
pub mod control;
pub mod frenet;
pub mod monitor;
pub mod output;
pub mod path;
pub mod road;
pub mod scenario;
pub mod sim;
pub mod vehicle;

pub use control::{ControllerMode, Gains, LaneWidths, SafetyDistances};
pub use frenet::FrenetState;
pub use path::ReferencePath;
pub use road::{PathSource, RoadSpec};
pub use sim::{run_simulation, ControlHold, PlatoonConfig, SimError, SimLog};
pub use vehicle::{ControlInput, VehicleState};
