//! Leader/follower hand model and tactile servoing.

mod hand;
mod servo;

pub use hand::{establish_contact, Adaptation, HandState, HandTemplate, Twist, APPROACH_REACH, APPROACH_STANDOFF};
pub use servo::{
    follower_adapt, palm_twist, selected_twist, selection, servo_regulate, trace_csv, ServoGains, ServoOutcome,
    ServoStep, TactileJacobian, MAX_LOST_ITERATIONS,
};

#[cfg(test)]
mod tests;
