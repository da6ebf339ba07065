//! Closed-loop benchmark harness for the cart-pendulum: configuration,
//! simulation, condensing benchmarks and output files.

pub mod bench;
pub mod config;
pub mod output;
pub mod sim;

pub use config::{load_config, parse_config, Scheme, SchemeConfig};
pub use sim::{run_closed_loop, SimLog};
