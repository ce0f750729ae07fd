pub mod acquisition;
pub mod bench;
pub mod gp;
pub mod objectives;
pub mod space;
pub mod strategies;
