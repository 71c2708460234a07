//! Cooperative routing for one fuel-limited aerial vehicle (UAV) and one
//! ground vehicle (UGV) that doubles as its mobile recharging station.
//!
//! Planning is bi-level. The outer level picks refuel stops by minimum set
//! cover ([`setcover`]) and orders them into a ground tour ([`ugv_router`]).
//! The inner level splits the mission along that tour ([`task_alloc`]) and
//! routes the UAV through each piece as an energy-constrained VRP
//! ([`evrp`]). [`pipeline`] stitches everything into timestamped plans and
//! [`simulator`] replays them to audit fuel, endurance and rendezvous.

pub mod evrp;
pub mod export;
pub mod pipeline;
pub mod scenario;
pub mod setcover;
pub mod simulator;
pub mod task_alloc;
pub mod ugv_router;
