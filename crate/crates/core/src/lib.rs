//! Rover teleoperation and navigation stack.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod global_planner;
pub mod ground_station;
pub mod local_planner;
pub mod locomotion;
pub mod mapping;
pub mod telemetry;
pub mod world;

/// Book chapters, compiled and run as doctests so the snippets stay current.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/world.md")]
    struct World;
    #[doc = include_str!("../../../book/src/locomotion.md")]
    struct Locomotion;
    #[doc = include_str!("../../../book/src/mapping.md")]
    struct Mapping;
    #[doc = include_str!("../../../book/src/global_planning.md")]
    struct GlobalPlanning;
    #[doc = include_str!("../../../book/src/local_planning.md")]
    struct LocalPlanning;
    #[doc = include_str!("../../../book/src/telemetry.md")]
    struct Telemetry;
    #[doc = include_str!("../../../book/src/ground_station.md")]
    struct GroundStation;
    #[doc = include_str!("../../../book/src/station.md")]
    struct Station;
}
