//! Interactive learning of grounded attribute words from a tutor.
//!
//! A learner sees synthetic objects, grounds colour and shape words with
//! online logistic classifiers, and talks to a (simulated or human) tutor
//! through a small set of dialogue acts. Two SARSA learners decide how
//! confident the learner must be before it stops asking, and what to say.

pub mod dialogue;
pub mod error;
pub mod harness;
pub mod live;
pub mod policy;
pub mod tutor;
pub mod vision;
pub mod world;

pub use error::{Error, Result};
