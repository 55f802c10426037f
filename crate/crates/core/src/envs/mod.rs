//! Built-in environments.

pub mod gridpush;
mod two_door;

pub use two_door::{follow_observation_policy, two_door, TWO_DOOR_ACCURACY};
