mod act;
mod context;
mod lexicon;

pub use act::{format_tags, ActKind, Actor, DialogueAct, Slots};
pub use context::{provided_by, DialogueContext, Turn};
pub use lexicon::{normalize, Template, TemplateLexicon, BURCHAK_SURFACE, ENGLISH_TEMPLATES};
