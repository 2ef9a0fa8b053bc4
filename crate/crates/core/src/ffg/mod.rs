mod clan;
mod forward;
mod thin;

pub use clan::{build_clan, Budget, Clan, Cylinder};
pub use forward::{forward_dynamics, forward_states_at, Event, EventKind, ForwardRun};
pub use thin::{birth_order, kept_at_zero, perfect_sample, perfect_sample_detailed, thin, thin_with, PerfectDraw};
