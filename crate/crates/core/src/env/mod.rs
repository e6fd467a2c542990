//! EV-charging network simulator.
//!
//! Each agent controls one household charger. The utility publishes a price
//! that is a strictly convex, increasing function of total demand, and each
//! step's network cost is split among households in proportion to their draw.

mod config;
mod ev;
mod price;
mod sim;
mod trace;

pub use config::{GridConfig, SamplingConfig};
pub use ev::{battery_step, reward, EVAgentSpec, EVState};
pub use price::PriceModel;
pub use sim::{build_observation, EvChargingEnv, Observation, StepInfo, StepOutcome, OBS_DIM};
pub use trace::{TraceRow, TraceWriter, TRACE_HEADER};
