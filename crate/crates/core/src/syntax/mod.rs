//! The CoRE program model, its line-oriented parser and renderers.
//!
//! A program is a list of steps, one per logical line:
//!
//! ```text
//! name ::: Type ::: instruction ::: connection
//! ```
//!
//! `Process` steps name a single successor, `Decision` steps list branches as
//! `condition => target` joined by `;;`, and `Terminal` steps omit the
//! connection (or write `none`). Lines ending in `\` continue on the next
//! line; lines starting with `//` are comments.

mod model;
mod parse;
mod render;

pub use model::{
    Branch, Connection, InvalidStepName, Program, Step, StepName, StepType, BRANCH_ARROW,
    BRANCH_SEPARATOR, SEPARATOR,
};
pub use parse::{parse_program, parse_step, ParseError};
pub use render::{
    render_core, render_flowchart, render_pseudocode, render_step, FlowchartFormat,
    UnsupportedFormat,
};
