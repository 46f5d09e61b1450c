pub mod evaluate;
pub mod fit;
pub mod monitor;
pub mod prepare;
pub mod simulate;
