mod cost;
mod model;
mod table;

pub use cost::{charge, total_of, CostCounts, CostEntry, CostKind, CostLedger, CostParams};
pub use model::{default_reply, TutorConfig, TutorModel, TutorTurn};
pub use table::{fit_action_table, instantiate, read_corpus, ActionTable, AnnotatedDialogue, Outcome, Situation, TRUTH};
