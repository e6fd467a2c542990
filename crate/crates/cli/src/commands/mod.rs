pub mod baseline;
pub mod compare;
pub mod eval;
pub mod train;
pub mod verify;
